// protocol.hpp
// The ideal partial-teleportation run: input pair (atom1, atom2), atom-cavity
// channel (atom3, modeA), Alice's two-stage Bell measurement on (atom1, modeA)
// with the probe atom4, and Bob's Pauli correction on atom3.

#pragma once

#include "cqtp/gates.hpp"
#include "cqtp/qstate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cqtp {

namespace labels {
inline const std::string atom1 = "atom1";
inline const std::string atom2 = "atom2";
inline const std::string atom3 = "atom3";
inline const std::string atom4 = "atom4";
inline const std::string modeA = "modeA";
}  // namespace labels

class ProtocolError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class BellOutcome { psi_plus, psi_minus, phi_plus, phi_minus };

inline constexpr std::array<BellOutcome, 4> kAllOutcomes = {
    BellOutcome::psi_plus, BellOutcome::psi_minus, BellOutcome::phi_plus, BellOutcome::phi_minus};

struct DetectionSignature {
    Level atom1;
    Level atom4;

    bool operator==(const DetectionSignature&) const = default;
};

inline DetectionSignature signature(BellOutcome o) {
    switch (o) {
    case BellOutcome::psi_plus:
        return {Level::g, Level::e};
    case BellOutcome::psi_minus:
        return {Level::g, Level::g};
    case BellOutcome::phi_plus:
        return {Level::e, Level::g};
    case BellOutcome::phi_minus:
        return {Level::e, Level::e};
    }
    throw ProtocolError("invalid Bell outcome");
}

inline BellOutcome outcome_from(DetectionSignature s) {
    if (s.atom1 == Level::g) return s.atom4 == Level::e ? BellOutcome::psi_plus : BellOutcome::psi_minus;
    return s.atom4 == Level::g ? BellOutcome::phi_plus : BellOutcome::phi_minus;
}

inline std::string_view name(BellOutcome o) {
    switch (o) {
    case BellOutcome::psi_plus:
        return "psi+";
    case BellOutcome::psi_minus:
        return "psi-";
    case BellOutcome::phi_plus:
        return "phi+";
    case BellOutcome::phi_minus:
        return "phi-";
    }
    return "?";
}

inline BellOutcome parse_outcome(std::string_view s) {
    for (BellOutcome o : kAllOutcomes) {
        if (name(o) == s) return o;
    }
    throw ProtocolError("unknown Bell outcome '" + std::string(s) + "'");
}

/// Bob's correction on atom 3; nullopt is the identity.
inline std::optional<Pauli> correction(BellOutcome o) {
    switch (o) {
    case BellOutcome::psi_plus:
        return std::nullopt;
    case BellOutcome::psi_minus:
        return Pauli::z;
    case BellOutcome::phi_plus:
        return Pauli::y;
    case BellOutcome::phi_minus:
        return Pauli::x;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Parameters

/// Event times in seconds, measured from the end of channel preparation.
struct Schedule {
    double t1 = 2e-6;                 // atom 1 leaves the first Ramsey zone
    double t2 = 5e-4 + 2e-6 + 2e-6;   // atom 1 leaves R' after the dispersive pass
    double t3 = 1e-4 + 5.04e-4;       // atom 4 leaves the cavity
    double t4 = 2e-6 + 6.04e-4;       // atom 4 leaves R'

    bool operator==(const Schedule&) const = default;
};

struct NbarCheck {
    double nbar;
    double gamma;
};

/// Interaction angles of the three cavity passes: lambda*t for the channel
/// and the probe, chi*t for the dispersive pass.
struct InteractionAngles {
    double channel = std::numbers::pi / 4.0;
    double dispersive = std::numbers::pi;
    double probe = std::numbers::pi / 2.0;
};

struct ProtocolParams {
    cplx c0{std::numbers::sqrt2 / 2.0, 0.0};
    cplx c1{std::numbers::sqrt2 / 2.0, 0.0};
    double lambda = 2.0 * std::numbers::pi * 25e3;   // rad/s
    double delta = 2.0 * std::numbers::pi * 625e3;   // rad/s
    double kappa = 100.0;                            // 1/s
    std::size_t fock_cutoff = 1;
    Schedule schedule{};
    std::optional<NbarCheck> nbar_check;

    double chi() const { return lambda * lambda / delta; }

    /// Nominal cavity durations pi/(4 lambda), pi/chi and pi/(2 lambda).
    std::array<double, 3> nominal_interaction_times() const {
        return {std::numbers::pi / (4.0 * lambda), std::numbers::pi / chi(),
                std::numbers::pi / (2.0 * lambda)};
    }

    /// Throws ProtocolError on a broken invariant; returns advisory warnings.
    std::vector<std::string> validate() const {
        const double n2 = std::norm(c0) + std::norm(c1);
        if (std::abs(n2 - 1.0) > kNormTolerance) {
            throw ProtocolError("|c0|^2 + |c1|^2 = " + std::to_string(n2) + ", expected 1");
        }
        if (!(kappa >= 0.0)) throw ProtocolError("kappa must be non-negative");
        if (!(lambda > 0.0) || !(delta != 0.0)) throw ProtocolError("lambda must be positive and delta nonzero");
        if (fock_cutoff < 1) throw ProtocolError("fock cutoff must be at least 1");
        const auto& s = schedule;
        if (!(0.0 < s.t1 && s.t1 < s.t2 && s.t2 < s.t3 && s.t3 < s.t4)) {
            throw ProtocolError("schedule must satisfy 0 < t1 < t2 < t3 < t4");
        }
        std::vector<std::string> warnings;
        if (nbar_check) {
            const double ratio = nbar_check->nbar * lambda * lambda /
                                 (delta * delta + nbar_check->gamma * nbar_check->gamma);
            if (ratio >= 0.01) {
                warnings.push_back("dispersive regime questionable: nbar*lambda^2/(delta^2+gamma^2) = " +
                                   std::to_string(ratio));
            }
        }
        return warnings;
    }
};

// ---------------------------------------------------------------------------
// States

inline StateVector prepare_input(cplx c0, cplx c1) {
    const double n2 = std::norm(c0) + std::norm(c1);
    if (std::abs(n2 - 1.0) > kNormTolerance) {
        throw ProtocolError("input coefficients are not normalized: |c0|^2 + |c1|^2 = " +
                            std::to_string(n2));
    }
    SubsystemLayout layout({atom(labels::atom1), atom(labels::atom2)});
    Vector a = Vector::Zero(4);
    a(layout.index_of(std::vector<std::size_t>{0, 1})) = c0;
    a(layout.index_of(std::vector<std::size_t>{1, 0})) = c1;
    return {std::move(layout), std::move(a)};
}

/// Atom 3 enters excited, the mode empty; a resonant pass of angle
/// `angle` (nominally pi/4) produces (|e,0> - i|g,1>)/sqrt2.
inline StateVector prepare_channel(std::size_t fock_cutoff = 1, double angle = std::numbers::pi / 4.0) {
    SubsystemLayout layout({atom(labels::atom3), mode(labels::modeA, fock_cutoff)});
    const StateVector start = StateVector::basis(layout, {1, 0});
    const std::string t[] = {labels::atom3, labels::modeA};
    return apply(resonant_unitary(angle, fock_cutoff), t, start);
}

/// input (x) channel over (atom1, atom2, atom3, modeA).
inline StateVector assemble_total(const StateVector& input, const StateVector& channel) {
    return tensor(input, channel);
}

/// Bell states of (atom1, modeA):
///   psi(+/-) = (-i|g,1> +/- |e,0>)/sqrt2,  phi(+/-) = (|g,0> +/- i|e,1>)/sqrt2.
inline StateVector bell_state(BellOutcome o, std::size_t fock_cutoff = 1) {
    SubsystemLayout layout({atom(labels::atom1), mode(labels::modeA, fock_cutoff)});
    Vector a = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
    const double s = std::numbers::sqrt2 / 2.0;
    const cplx i{0.0, 1.0};
    auto at = [&](std::size_t lvl, std::size_t n) { return layout.index_of(std::vector<std::size_t>{lvl, n}); };
    switch (o) {
    case BellOutcome::psi_plus:
    case BellOutcome::psi_minus: {
        const double sign = o == BellOutcome::psi_plus ? 1.0 : -1.0;
        a(at(0, 1)) = -i * s;
        a(at(1, 0)) = sign * s;
        break;
    }
    case BellOutcome::phi_plus:
    case BellOutcome::phi_minus: {
        const double sign = o == BellOutcome::phi_plus ? 1.0 : -1.0;
        a(at(0, 0)) = s;
        a(at(1, 1)) = sign * i * s;
        break;
    }
    }
    return {std::move(layout), std::move(a)};
}

/// The (atom3, atom2) factor paired with each Bell state in the expansion of
/// the total state, before Bob's correction.
inline StateVector bob_branch_state(BellOutcome o, cplx c0, cplx c1) {
    SubsystemLayout layout({atom(labels::atom3), atom(labels::atom2)});
    Vector a = Vector::Zero(4);
    auto at = [&](std::size_t l3, std::size_t l2) { return layout.index_of(std::vector<std::size_t>{l3, l2}); };
    switch (o) {
    case BellOutcome::psi_plus:
        a(at(0, 1)) = c0;
        a(at(1, 0)) = c1;
        break;
    case BellOutcome::psi_minus:
        a(at(0, 1)) = c0;
        a(at(1, 0)) = -c1;
        break;
    case BellOutcome::phi_plus:
        a(at(1, 1)) = c0;
        a(at(0, 0)) = -c1;
        break;
    case BellOutcome::phi_minus:
        a(at(1, 1)) = c0;
        a(at(0, 0)) = c1;
        break;
    }
    return {std::move(layout), std::move(a)};
}

/// (1/2) sum over outcomes of bell_state (x) bob_branch_state, laid out like
/// assemble_total.
inline StateVector bell_decomposition(cplx c0, cplx c1, std::size_t fock_cutoff = 1) {
    const std::vector<std::string> order = {labels::atom1, labels::atom2, labels::atom3, labels::modeA};
    Vector sum;
    SubsystemLayout layout;
    for (BellOutcome o : kAllOutcomes) {
        const StateVector term = reorder(tensor(bell_state(o, fock_cutoff), bob_branch_state(o, c0, c1)), order);
        if (sum.size() == 0) {
            sum = Vector::Zero(term.amplitudes().size());
            layout = term.layout();
        }
        sum += 0.5 * term.amplitudes();
    }
    return {std::move(layout), std::move(sum)};
}

/// The teleported target: the input state with atom 1 replaced by atom 3,
/// over (atom3, atom2).
inline StateVector teleport_target(cplx c0, cplx c1) {
    const std::pair<std::string, std::string> rename[] = {{labels::atom1, labels::atom3}};
    const StateVector relabeled = relabel(prepare_input(c0, c1), rename);
    const std::string order[] = {labels::atom3, labels::atom2};
    return reorder(relabeled, order);
}

// ---------------------------------------------------------------------------
// Alice

/// R, dispersive pass with the mode, R' on atom 1.
template <typename State>
State evolve_stage1(const State& s, const InteractionAngles& angles = {}) {
    const std::size_t cutoff = s.layout().at(labels::modeA).dim - 1;
    const std::string a1[] = {labels::atom1};
    const std::string a1m[] = {labels::atom1, labels::modeA};
    State out = apply(ramsey_unitary(), a1, s);
    out = apply(dispersive_unitary(angles.dispersive, cutoff), a1m, out);
    return apply(ramsey_unitary(), a1, out);
}

template <typename State>
Projection<State> alice_stage1(const State& s, Level atom1_level, const InteractionAngles& angles = {}) {
    return project_and_condition(evolve_stage1(s, angles), labels::atom1, atom1_level);
}

inline const std::vector<std::string>& canonical_order() {
    static const std::vector<std::string> order = {labels::atom1, labels::atom2, labels::atom3,
                                                   labels::atom4, labels::modeA};
    return order;
}

/// Adds the probe atom 4 in |g> and puts the register in canonical order.
inline StateVector join_probe_atom(const StateVector& psi) {
    const StateVector g4 = StateVector::basis(SubsystemLayout({atom(labels::atom4)}), {0});
    return reorder(tensor(psi, g4), canonical_order());
}

inline DensityMatrix join_probe_atom(const DensityMatrix& rho) {
    const DensityMatrix g4(StateVector::basis(SubsystemLayout({atom(labels::atom4)}), {0}));
    return reorder(tensor(rho, g4), canonical_order());
}

/// Resonant pass of atom 4 with the mode, then R' on atom 4 (R is off).
template <typename State>
State evolve_stage2(const State& s, const InteractionAngles& angles = {}) {
    const std::size_t cutoff = s.layout().at(labels::modeA).dim - 1;
    const std::string a4m[] = {labels::atom4, labels::modeA};
    const std::string a4[] = {labels::atom4};
    State out = apply(resonant_unitary(angles.probe, cutoff), a4m, s);
    return apply(ramsey_unitary(), a4, out);
}

/// Joins atom 4 if absent, evolves and detects it.
template <typename State>
Projection<State> alice_stage2(const State& s, Level atom4_level, const InteractionAngles& angles = {}) {
    const State joined = s.layout().contains(labels::atom4) ? s : join_probe_atom(s);
    return project_and_condition(evolve_stage2(joined, angles), labels::atom4, atom4_level);
}

// ---------------------------------------------------------------------------
// Bob

template <typename State>
State bob_correct(BellOutcome o, const State& s) {
    const auto p = correction(o);
    if (!p) return s;
    const std::string a3[] = {labels::atom3};
    return apply(pauli(*p), a3, s);
}

// ---------------------------------------------------------------------------
// Runs

struct BranchResult {
    BellOutcome outcome;
    double probability = 0.0;
    double fidelity = 0.0;
    /// Conditioned, corrected state of (atom3, atom2); absent for a zero-probability branch.
    std::optional<DensityMatrix> bob_state;
};

/// Forces the detection record of `outcome` and carries the branch through
/// correction. Nominal angles give the ideal protocol.
inline BranchResult run_branch(const ProtocolParams& params, BellOutcome outcome,
                               const InteractionAngles& angles = {}) {
    const DetectionSignature sig = signature(outcome);
    const StateVector total = assemble_total(prepare_input(params.c0, params.c1),
                                             prepare_channel(params.fock_cutoff, angles.channel));
    const auto s1 = alice_stage1(total, sig.atom1, angles);
    if (s1.empty()) return {outcome, 0.0, 0.0, std::nullopt};
    const auto s2 = alice_stage2(*s1.state, sig.atom4, angles);
    if (s2.empty()) return {outcome, 0.0, 0.0, std::nullopt};
    const std::string keep[] = {labels::atom3, labels::atom2};
    const DensityMatrix bob = bob_correct(outcome, partial_trace(*s2.state, keep));
    const double f = fidelity(bob, teleport_target(params.c0, params.c1));
    return {outcome, s1.probability * s2.probability, f, bob};
}

/// All four branches, in kAllOutcomes order, sharing the common evolution.
inline std::array<BranchResult, 4> run_all_branches(const ProtocolParams& params,
                                                    const InteractionAngles& angles = {}) {
    const StateVector total = assemble_total(prepare_input(params.c0, params.c1),
                                             prepare_channel(params.fock_cutoff, angles.channel));
    const StateVector after1 = evolve_stage1(total, angles);
    const StateVector target = teleport_target(params.c0, params.c1);
    const std::string keep[] = {labels::atom3, labels::atom2};
    std::array<BranchResult, 4> out;
    for (Level l1 : {Level::g, Level::e}) {
        const StateVector p1 = project(after1, labels::atom1, l1);
        const StateVector after2 = evolve_stage2(join_probe_atom(p1), angles);
        for (Level l4 : {Level::g, Level::e}) {
            const BellOutcome o = outcome_from({l1, l4});
            const auto k = static_cast<std::size_t>(std::find(kAllOutcomes.begin(), kAllOutcomes.end(), o) -
                                                    kAllOutcomes.begin());
            const StateVector p2 = project(after2, labels::atom4, l4);
            const double prob = p2.norm_squared();
            if (prob <= detail::kZeroProbability) {
                out[k] = {o, 0.0, 0.0, std::nullopt};
                continue;
            }
            const DensityMatrix bob = bob_correct(o, partial_trace(p2, keep)).normalized();
            out[k] = {o, prob, fidelity(bob, target), bob};
        }
    }
    return out;
}

struct IdealReport {
    std::array<BranchResult, 4> branches;
};

inline IdealReport run_ideal(const ProtocolParams& params) {
    params.validate();
    IdealReport r;
    for (std::size_t k = 0; k < kAllOutcomes.size(); ++k) r.branches[k] = run_branch(params, kAllOutcomes[k]);
    return r;
}

struct ShotResult {
    BellOutcome outcome;
    double fidelity;
    DensityMatrix bob_state;
};

/// One sampled run: detections drawn from their Born probabilities.
template <typename Rng>
ShotResult run_single_shot(const ProtocolParams& params, Rng& rng) {
    params.validate();
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    auto draw = [&](const StateVector& psi, const std::string& label) {
        const double pg = project(psi, label, Level::g).norm_squared();
        const double pe = project(psi, label, Level::e).norm_squared();
        return uniform(rng) * (pg + pe) < pg ? Level::g : Level::e;
    };
    const StateVector total = assemble_total(prepare_input(params.c0, params.c1), prepare_channel(params.fock_cutoff));
    const StateVector after1 = evolve_stage1(total);
    const Level l1 = draw(after1, labels::atom1);
    const StateVector cond1 = *project_and_condition(after1, labels::atom1, l1).state;
    const StateVector after2 = evolve_stage2(join_probe_atom(cond1));
    const Level l4 = draw(after2, labels::atom4);
    const StateVector cond2 = *project_and_condition(after2, labels::atom4, l4).state;
    const BellOutcome o = outcome_from({l1, l4});
    const std::string keep[] = {labels::atom3, labels::atom2};
    DensityMatrix bob = bob_correct(o, partial_trace(cond2, keep));
    const double f = fidelity(bob, teleport_target(params.c0, params.c1));
    return {o, f, std::move(bob)};
}

}  // namespace cqtp
