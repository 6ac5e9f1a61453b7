#include "cqtp/protocol.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace cqtp;
using cqtp::test::max_abs_diff;

namespace {

const double s2 = std::numbers::sqrt2 / 2.0;

SubsystemLayout atoms(std::initializer_list<const char*> names) {
    std::vector<Subsystem> v;
    for (const char* n : names) v.push_back(atom(n));
    return SubsystemLayout(v);
}

}  // namespace

TEST_CASE("layout validation and mixed-radix indexing") {
    CHECK_THROWS_AS(SubsystemLayout({atom("a"), atom("a")}), LayoutError);
    CHECK_THROWS_AS(mode("m", 0), LayoutError);
    CHECK_THROWS_AS(SubsystemLayout({Subsystem{"a", 3, SubsystemKind::atom}}), LayoutError);

    const SubsystemLayout l({atom("a"), mode("m", 2), atom("b")});
    CHECK(l.dim() == 12);
    CHECK(l.stride(0) == 6);
    CHECK(l.stride(1) == 2);
    CHECK(l.stride(2) == 1);
    for (std::size_t i = 0; i < l.dim(); ++i) {
        const auto d = l.digits_of(i);
        CHECK(l.index_of(d) == i);
    }
    const std::vector<std::size_t> digits = {1, 2, 0};
    CHECK(l.index_of(digits) == 10);
}

TEST_CASE("tensor of basis states") {
    const StateVector g = StateVector::basis(atoms({"a"}), {0});
    const StateVector n0 = StateVector::basis(SubsystemLayout({mode("m", 1)}), {0});
    const StateVector t = tensor(g, n0);
    CHECK(t.layout().labels() == std::vector<std::string>{"a", "m"});
    CHECK(std::abs(t.amplitude({0, 0}) - 1.0) == 0.0);
    CHECK(t.norm_squared() == Catch::Approx(1.0));
}

TEST_CASE("tensor distributes over a superposition") {
    const StateVector plus(atoms({"a"}), Vector{{s2, s2}});
    const StateVector n1 = StateVector::basis(SubsystemLayout({mode("m", 1)}), {1});
    const StateVector t = tensor(plus, n1);
    CHECK(std::abs(t.amplitude({0, 1}) - s2) < 1e-15);
    CHECK(std::abs(t.amplitude({1, 1}) - s2) < 1e-15);
    CHECK(std::abs(t.amplitude({0, 0})) == 0.0);
    CHECK(std::abs(t.amplitude({1, 0})) == 0.0);
}

TEST_CASE("tensor rejects duplicate labels") {
    const StateVector g = StateVector::basis(atoms({"a"}), {0});
    CHECK_THROWS_AS(tensor(g, g), LayoutError);
}

TEST_CASE("input state built from local data") {
    const StateVector psi = prepare_input(0.6, 0.8);
    CHECK(psi.layout().labels() == std::vector<std::string>{"atom1", "atom2"});
    CHECK(std::abs(psi.amplitude({0, 1}) - 0.6) < 1e-15);
    CHECK(std::abs(psi.amplitude({1, 0}) - 0.8) < 1e-15);
    CHECK(std::abs(psi.amplitude({0, 0})) == 0.0);
    CHECK(std::abs(psi.amplitude({1, 1})) == 0.0);
}

TEST_CASE("embed identity is the full identity") {
    const SubsystemLayout l({atom("a"), atom("b"), mode("m", 1)});
    const std::string t[] = {"b", "m"};
    CHECK(max_abs_diff(embed(Matrix::Identity(4, 4), t, l), Matrix::Identity(8, 8)) == 0.0);
}

TEST_CASE("embed sigma_x on atom3 flips it") {
    const SubsystemLayout l = atoms({"atom3", "atom2"});
    const Matrix x{{0, 1}, {1, 0}};
    const StateVector gg = StateVector::basis(l, {0, 0});
    const StateVector out = apply(x, {"atom3"}, gg);
    CHECK(max_abs_diff(out.amplitudes(), StateVector::basis(l, {1, 0}).amplitudes()) == 0.0);
}

TEST_CASE("embed rejects a dimension mismatch") {
    const SubsystemLayout l = atoms({"a", "b"});
    CHECK_THROWS_AS(embed(Matrix::Identity(3, 3), {"a"}, l), ShapeError);
    CHECK_THROWS_AS(embed(Matrix::Identity(2, 2), {"zz"}, l), LayoutError);
}

TEST_CASE("embed agrees with explicit Kronecker products for non-adjacent targets") {
    // Random operator on (atom1, modeA) in the 5-slot register, checked entry by entry.
    std::mt19937_64 rng(11);
    const SubsystemLayout l({atom("atom1"), atom("atom2"), atom("atom3"), atom("atom4"), mode("modeA", 1)});
    Matrix op(4, 4);
    std::normal_distribution<double> n;
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) op(i, j) = cplx(n(rng), n(rng));
    const Matrix full = embed(op, {"atom1", "modeA"}, l);
    for (std::size_t r = 0; r < 32; ++r) {
        for (std::size_t c = 0; c < 32; ++c) {
            const auto dr = l.digits_of(r);
            const auto dc = l.digits_of(c);
            const bool spectators_equal = dr[1] == dc[1] && dr[2] == dc[2] && dr[3] == dc[3];
            const cplx expect = spectators_equal ? op(static_cast<Eigen::Index>(dr[0] * 2 + dr[4]),
                                                      static_cast<Eigen::Index>(dc[0] * 2 + dc[4]))
                                                 : cplx(0.0);
            REQUIRE(std::abs(full(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - expect) == 0.0);
        }
    }
}

TEST_CASE("partial trace of a product state") {
    std::mt19937_64 rng(3);
    const DensityMatrix a = test::random_density(rng, atoms({"a"}), 2);
    const DensityMatrix b = test::random_density(rng, SubsystemLayout({mode("m", 2)}), 2);
    const DensityMatrix ab = tensor(a, b);
    CHECK(max_abs_diff(partial_trace(ab, {"a"}).matrix(), a.matrix()) < 1e-12);
    CHECK(max_abs_diff(partial_trace(ab, {"m"}).matrix(), b.matrix()) < 1e-12);
}

TEST_CASE("partial trace of a Bell state of atom and mode is maximally mixed") {
    const DensityMatrix r = partial_trace(bell_state(BellOutcome::psi_plus), {"atom1"});
    CHECK(max_abs_diff(r.matrix(), 0.5 * Matrix::Identity(2, 2)) < 1e-15);
}

TEST_CASE("partial trace keeping every label is the identity map") {
    std::mt19937_64 rng(5);
    const SubsystemLayout l = atoms({"a", "b", "c"});
    const DensityMatrix rho = test::random_density(rng, l);
    CHECK(max_abs_diff(partial_trace(rho, {"a", "b", "c"}).matrix(), rho.matrix()) == 0.0);
}

TEST_CASE("partial trace is consistent under reordering of the kept labels") {
    std::mt19937_64 rng(6);
    const SubsystemLayout l({atom("a"), mode("m", 2), atom("b")});
    const DensityMatrix rho = test::random_density(rng, l, 4);
    const DensityMatrix ab = partial_trace(rho, {"a", "b"});
    const DensityMatrix ba = partial_trace(rho, {"b", "a"});
    const std::string order[] = {"a", "b"};
    CHECK(max_abs_diff(reorder(ba, order).matrix(), ab.matrix()) < 1e-15);
    CHECK(ab.trace() == Catch::Approx(1.0).margin(1e-10));
    CHECK(ab.hermiticity_error() < 1e-12);
    CHECK_THROWS_AS(partial_trace(rho, {"zz"}), LayoutError);
    CHECK_THROWS(partial_trace(rho, std::span<const std::string>{}));
}

TEST_CASE("projection of an equal superposition") {
    const StateVector plus(atoms({"a"}), Vector{{s2, s2}});
    const auto r = project_and_condition(plus, "a", Level::g);
    REQUIRE_FALSE(r.empty());
    CHECK(r.probability == Catch::Approx(0.5).margin(1e-15));
    CHECK(max_abs_diff(r.state->amplitudes(), Vector{{1.0, 0.0}}) < 1e-15);
}

TEST_CASE("projection onto an orthogonal level is flagged empty") {
    const StateVector e = StateVector::basis(atoms({"a"}), {1});
    const auto r = project_and_condition(e, "a", Level::g);
    CHECK(r.empty());
    CHECK(r.probability == 0.0);
}

TEST_CASE("projecting a mode label is an error") {
    const StateVector n0 = StateVector::basis(SubsystemLayout({mode("m", 1)}), {0});
    CHECK_THROWS_AS(project_and_condition(n0, "m", Level::g), LayoutError);
}

TEST_CASE("atom 1 detection after Alice's first stage is even") {
    const StateVector total = assemble_total(prepare_input(0.6, 0.8), prepare_channel());
    const auto r = alice_stage1(total, Level::g);
    CHECK(r.probability == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("fidelity examples") {
    const SubsystemLayout l = atoms({"a"});
    const StateVector plus(l, Vector{{s2, s2}});
    const StateVector minus(l, Vector{{s2, -s2}});
    CHECK(fidelity(DensityMatrix(plus), plus) == Catch::Approx(1.0).margin(1e-15));
    CHECK(fidelity(DensityMatrix(plus), minus) == Catch::Approx(0.0).margin(1e-15));

    // Damped equal superposition: rho_ee = e^{-2kt}/2, rho_ge = e^{-kt}/2, so F = (1 + e^{-kt})/2.
    const double a = 0.5;  // e^{-kt} at kt = ln 2
    Matrix m{{1.0 - a * a / 2.0, a / 2.0}, {a / 2.0, a * a / 2.0}};
    CHECK(fidelity(DensityMatrix(l, m), plus) == Catch::Approx(0.75).margin(1e-15));

    CHECK_THROWS_AS(fidelity(DensityMatrix(plus), StateVector::basis(atoms({"b"}), {0})), LayoutError);
}

TEST_CASE("random states: partial trace preserves trace, round-trips, detection is complete") {
    std::mt19937_64 rng(2024);
    const SubsystemLayout la({atom("a"), mode("m", 1)});
    const SubsystemLayout lb = atoms({"b", "c"});
    for (int k = 0; k < 200; ++k) {
        const DensityMatrix ra = test::random_density(rng, la, 1 + k % 4);
        const DensityMatrix rb = test::random_density(rng, lb, 1 + k % 3);
        const DensityMatrix ab = tensor(ra, rb);
        REQUIRE(ab.is_valid());
        const DensityMatrix back = partial_trace(ab, {"a", "m"});
        REQUIRE(max_abs_diff(back.matrix(), ra.matrix()) < 1e-12);
        REQUIRE(std::abs(partial_trace(ab, {"c"}).trace() - 1.0) < 1e-10);

        const StateVector psi = test::random_state(rng, la.concat(lb));
        for (const char* label : {"a", "b", "c"}) {
            const double pg = project(psi, label, Level::g).norm_squared();
            const double pe = project(psi, label, Level::e).norm_squared();
            REQUIRE(std::abs(pg + pe - 1.0) < 1e-10);
        }
        const DensityMatrix rpsi(psi);
        const double pg = project(rpsi, "b", Level::g).trace();
        const double pe = project(rpsi, "b", Level::e).trace();
        REQUIRE(std::abs(pg + pe - 1.0) < 1e-10);
    }
}

TEST_CASE("density matrix validity checks") {
    const SubsystemLayout l = atoms({"a"});
    CHECK(DensityMatrix(l, Matrix{{0.5, 0.0}, {0.0, 0.5}}).is_valid());
    CHECK_FALSE(DensityMatrix(l, Matrix{{1.2, 0.0}, {0.0, -0.2}}).is_valid());
    CHECK_FALSE(DensityMatrix(l, Matrix{{0.5, 0.3}, {0.0, 0.5}}).is_valid());
    CHECK_FALSE(DensityMatrix(l, Matrix{{0.6, 0.0}, {0.0, 0.6}}).is_valid());
}
