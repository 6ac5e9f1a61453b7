#include "cqtp/decoherence.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace cqtp;
using cqtp::test::max_abs_diff;

namespace {

const double s2 = std::numbers::sqrt2 / 2.0;

// Reference values from tests/oracles/protocol_oracle.py (dense numpy Kronecker model).
constexpr double kAmpPsi = 0.844004489042645;
constexpr double kAmpPhi = 0.850518827460655;
constexpr double kDephasingAll = 0.919672320538579;
constexpr double kAmpPsiPlusC06 = 0.845275625431824;

const SubsystemLayout one({atom("a")});

/// Atom-environment unitary on (atom, env) with env starting in |0>.
/// Amplitude damping: |e,0> -> c|e,0> + s|g,1>. Dephasing: |e,0> -> c|e,0> + s|e,1>.
Matrix environment_unitary(double kappa, double dt, DecayModel model) {
    const double c = std::exp(-kappa * dt);
    const double s = std::sqrt(1.0 - c * c);
    Matrix u = Matrix::Zero(4, 4);  // index atom*2 + env
    if (model == DecayModel::amplitude_damping) {
        // {|g0>, |e0>} -> {|g0>, c|e0> + s|g1>}, completed on {|g1>, |e1>}
        u(0, 0) = 1.0;
        u(2, 2) = c;
        u(1, 2) = s;
        u(2, 1) = -s;
        u(1, 1) = c;
        u(3, 3) = 1.0;
    } else {
        u(0, 0) = 1.0;
        u(1, 1) = 1.0;
        u(2, 2) = c;
        u(3, 2) = s;
        u(2, 3) = -s;
        u(3, 3) = c;
    }
    return u;
}

/// The decayed protocol run as one pure state that carries an explicit
/// environment qubit for every (event, atom) pair.
DensityMatrix explicit_environment_run(const ProtocolParams& params, BellOutcome outcome, DecayModel model) {
    using namespace labels;
    const DetectionSignature sig = signature(outcome);
    const DecaySchedule schedule = default_decay_schedule(params.schedule);
    StateVector psi = assemble_total(prepare_input(params.c0, params.c1), prepare_channel());
    double prev = 0.0;
    int env_count = 0;
    for (std::size_t step = 0; step < 4; ++step) {
        const double dt = schedule[step].time - prev;
        prev = schedule[step].time;
        for (const auto& a : schedule[step].affected_atoms) {
            const std::string env = "env" + std::to_string(env_count++);
            psi = tensor(psi, StateVector::basis(SubsystemLayout({atom(env)}), {0}));
            psi = apply(environment_unitary(params.kappa, dt, model), {a, env}, psi);
        }
        switch (step) {
        case 0:
            psi = apply(ramsey_unitary(), {atom1}, psi);
            break;
        case 1:
            psi = apply(dispersive_unitary(std::numbers::pi), {atom1, modeA}, psi);
            psi = apply(ramsey_unitary(), {atom1}, psi);
            psi = project(psi, atom1, sig.atom1);
            psi = tensor(psi, StateVector::basis(SubsystemLayout({atom(atom4)}), {0}));
            break;
        case 2:
            psi = apply(resonant_unitary(std::numbers::pi / 2.0), {atom4, modeA}, psi);
            break;
        case 3:
            psi = apply(ramsey_unitary(), {atom4}, psi);
            psi = project(psi, atom4, sig.atom4);
            break;
        }
    }
    return bob_correct(outcome, partial_trace(psi, {atom3, atom2})).normalized();
}

}  // namespace

TEST_CASE("damped equal superposition matches the closed-form density matrix") {
    const StateVector plus(one, Vector{{s2, s2}});
    for (double kt : {0.0, 0.1, 1.0, 10.0}) {
        const double kappa = 100.0;
        const DensityMatrix r = apply_damping(DensityMatrix(plus), "a", kappa, kt / kappa);
        const double a = std::exp(-kt);
        const Matrix expect{{0.5 * (2.0 - a * a), 0.5 * a}, {0.5 * a, 0.5 * a * a}};
        CHECK(max_abs_diff(r.matrix(), expect) <= 1e-12);
    }
}

TEST_CASE("zero rate and infinite time limits") {
    std::mt19937_64 rng(1);
    const DensityMatrix rho = test::random_density(rng, one, 2);
    CHECK(max_abs_diff(apply_damping(rho, "a", 0.0, 5.0).matrix(), rho.matrix()) == 0.0);
    const DensityMatrix gone = apply_damping(rho, "a", 100.0, 10.0);
    CHECK(max_abs_diff(gone.matrix(), Matrix{{1.0, 0.0}, {0.0, 0.0}}) <= 1e-15);
    CHECK_THROWS_AS(apply_damping(rho, "a", 100.0, -1e-3), DecoherenceError);
    CHECK_THROWS_AS(DampingChannel(-1.0, 1.0), DecoherenceError);
}

TEST_CASE("damping a mode label is rejected") {
    const DensityMatrix rho(StateVector::basis(SubsystemLayout({mode("m", 1)}), {1}));
    CHECK_THROWS_AS(apply_damping(rho, "m", 1.0, 1.0), DecoherenceError);
}

TEST_CASE("channel is CPTP and a semigroup on random (kappa, dt)") {
    std::mt19937_64 rng(314);
    std::uniform_real_distribution<double> lk(-1.0, 4.0), lt(-7.0, -1.0);
    const SubsystemLayout l({atom("a"), atom("b")});
    for (int k = 0; k < 1000; ++k) {
        const double kappa = std::pow(10.0, lk(rng));
        const double dt1 = std::pow(10.0, lt(rng));
        const double dt2 = std::pow(10.0, lt(rng));
        const DecayModel model = k % 2 == 0 ? DecayModel::amplitude_damping : DecayModel::dephasing;
        const auto ks = DampingChannel(kappa, dt1, model).kraus();
        Matrix sum = Matrix::Zero(2, 2);
        for (const auto& e : ks) sum += e.adjoint() * e;
        REQUIRE(max_abs_diff(sum, Matrix::Identity(2, 2)) <= 1e-12);
        const double p = DampingChannel(kappa, dt1, model).jump_probability();
        REQUIRE((p >= 0.0 && p <= 1.0));

        const DensityMatrix rho = test::random_density(rng, l, 2);
        const DensityMatrix two = apply_damping(apply_damping(rho, "a", kappa, dt1, model), "a", kappa, dt2, model);
        const DensityMatrix once = apply_damping(rho, "a", kappa, dt1 + dt2, model);
        REQUIRE(max_abs_diff(two.matrix(), once.matrix()) <= 1e-12);
        REQUIRE(std::abs(once.trace() - 1.0) <= 1e-12);
        REQUIRE(once.min_eigenvalue() >= -1e-12);
    }
}

TEST_CASE("damping on distinct atoms commutes") {
    std::mt19937_64 rng(8);
    const SubsystemLayout l({atom("a"), mode("m", 1), atom("b")});
    for (int k = 0; k < 20; ++k) {
        const DensityMatrix rho = test::random_density(rng, l, 3);
        const DensityMatrix ab = apply_damping(apply_damping(rho, "a", 50.0, 3e-3), "b", 80.0, 1e-3);
        const DensityMatrix ba = apply_damping(apply_damping(rho, "b", 80.0, 1e-3), "a", 50.0, 3e-3);
        REQUIRE(max_abs_diff(ab.matrix(), ba.matrix()) <= 1e-15);
    }
}

TEST_CASE("excited population decays as exp(-2 kappa t)") {
    const DensityMatrix e(StateVector::basis(one, {1}));
    for (double t : {0.0, 1e-4, 1e-3, 7e-3, 2e-2}) {
        const DensityMatrix r = apply_damping(e, "a", 100.0, t);
        CHECK(std::abs(r.matrix()(1, 1).real() - std::exp(-200.0 * t)) <= 1e-15);
    }
}

TEST_CASE("explicit environment qubit reproduces the channel on random states") {
    std::mt19937_64 rng(77);
    const SubsystemLayout l({atom("a"), atom("b"), mode("m", 1)});
    for (DecayModel model : {DecayModel::amplitude_damping, DecayModel::dephasing}) {
        for (int k = 0; k < 50; ++k) {
            const StateVector psi = test::random_state(rng, l);
            const double kappa = 100.0, dt = 1e-3 * (k + 1);
            StateVector dil = tensor(psi, StateVector::basis(SubsystemLayout({atom("env")}), {0}));
            dil = apply(environment_unitary(kappa, dt, model), {"b", "env"}, dil);
            const DensityMatrix viaenv = partial_trace(dil, {"a", "b", "m"});
            const DensityMatrix viachannel = apply_damping(DensityMatrix(psi), "b", kappa, dt, model);
            REQUIRE(max_abs_diff(viaenv.matrix(), viachannel.matrix()) <= 1e-10);
        }
    }
}

TEST_CASE("explicit environment simulation of the whole decayed protocol") {
    ProtocolParams p;
    p.c0 = 0.6;
    p.c1 = cplx(0.0, 0.8);
    for (DecayModel model : {DecayModel::amplitude_damping, DecayModel::dephasing}) {
        for (BellOutcome o : kAllOutcomes) {
            const DensityMatrix oracle = explicit_environment_run(p, o, model);
            const DecayRun run = run_with_decay(p, o, {model});
            REQUIRE(max_abs_diff(oracle.matrix(), run.bob_state.matrix()) <= 1e-10);
        }
    }
}

TEST_CASE("zero decay rate reproduces the ideal run") {
    ProtocolParams p;
    p.kappa = 0.0;
    for (BellOutcome o : kAllOutcomes) {
        const DecayRun r = run_with_decay(p, o);
        CHECK(r.fidelity == Catch::Approx(1.0).margin(1e-12));
        CHECK(r.probability == Catch::Approx(0.25).margin(1e-12));
    }
}

TEST_CASE("decayed runs match the numpy reference") {
    ProtocolParams p;
    for (BellOutcome o : kAllOutcomes) {
        const bool psi = o == BellOutcome::psi_plus || o == BellOutcome::psi_minus;
        const DecayRun a = run_with_decay(p, o);
        CHECK(a.fidelity == Catch::Approx(psi ? kAmpPsi : kAmpPhi).margin(1e-10));
        CHECK(a.probability == Catch::Approx(0.25).margin(1e-10));
        CHECK(a.bob_state.is_valid());
        const DecayRun d = run_with_decay(p, o, {DecayModel::dephasing});
        CHECK(d.fidelity == Catch::Approx(kDephasingAll).margin(1e-10));
    }
    p.c0 = 0.6;
    p.c1 = 0.8;
    CHECK(run_with_decay(p, BellOutcome::psi_plus).fidelity == Catch::Approx(kAmpPsiPlusC06).margin(1e-10));
}

TEST_CASE("schedule validation") {
    DecaySchedule s = default_decay_schedule(Schedule{});
    CHECK_NOTHROW(validate(s));
    std::swap(s[1].time, s[2].time);
    CHECK_THROWS_AS(validate(s), DecoherenceError);
    s.pop_back();
    CHECK_THROWS_AS(validate(s), DecoherenceError);

    DecaySchedule bad = default_decay_schedule(Schedule{});
    bad[0].affected_atoms.push_back(labels::atom4);  // atom 4 has not joined yet
    CHECK_THROWS_AS(run_with_decay(ProtocolParams{}, BellOutcome::psi_plus, {DecayModel::amplitude_damping, bad}),
                    DecoherenceError);
}

TEST_CASE("fidelity curve: starts at one, continuous at t4, non-increasing after") {
    const ProtocolParams p;
    const double t4 = p.schedule.t4;
    std::vector<double> grid;
    for (int k = 0; k <= 60; ++k) grid.push_back(1e-4 * k);
    grid.push_back(t4);
    std::sort(grid.begin(), grid.end());
    for (DecayModel model : {DecayModel::amplitude_damping, DecayModel::dephasing}) {
        const auto curve = fidelity_vs_time(p, BellOutcome::psi_plus, grid, true, model);
        CHECK(curve.front().fidelity == Catch::Approx(1.0).margin(1e-12));
        for (std::size_t i = 1; i < curve.size(); ++i) {
            CHECK((curve[i].fidelity >= 0.0 && curve[i].fidelity <= 1.0));
            if (curve[i - 1].t >= t4) CHECK(curve[i].fidelity <= curve[i - 1].fidelity + 1e-12);
        }
        const auto near = fidelity_vs_time(p, BellOutcome::psi_plus, {t4, t4 * (1.0 + 1e-9)}, true, model);
        CHECK(std::abs(near[0].fidelity - near[1].fidelity) < 1e-9);
        const auto frozen = fidelity_vs_time(p, BellOutcome::psi_plus, {t4, 2e-3}, false, model);
        CHECK(frozen[0].fidelity == frozen[1].fidelity);
    }
    CHECK(fidelity_vs_time(p, BellOutcome::psi_plus, {t4})[0].fidelity == Catch::Approx(kAmpPsi).margin(1e-10));
}

TEST_CASE("long-time variants and the discrepancy report") {
    const DecayDiscrepancy d = decay_discrepancy(ProtocolParams{});
    CHECK(d.variants[0].model == DecayModel::amplitude_damping);
    CHECK(d.variants[1].model == DecayModel::dephasing);
    CHECK(d.variants[0].fidelity_at_t4 == Catch::Approx(kAmpPsi).margin(1e-10));
    CHECK(d.variants[1].fidelity_at_t4 == Catch::Approx(kDephasingAll).margin(1e-10));
    CHECK(d.variants[1].matches_tf);
    CHECK_FALSE(d.variants[0].matches_tf);
    CHECK(d.any_matches_tf());
    // 2/3 crossing of the amplitude-damping curve lies near 1.8 ms
    CHECK(d.variants[0].two_thirds_time == Catch::Approx(1.797e-3).margin(2e-6));
    const std::string text = d.text();
    CHECK(text.find("amplitude_damping") != std::string::npos);
    CHECK(text.find("dephasing") != std::string::npos);
}
