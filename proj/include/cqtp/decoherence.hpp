// decoherence.hpp
// Spontaneous decay of free atoms, applied at the protocol's event times.
//
// The atom-environment coupling |g>|E> -> |g>|E>,
// |e>|E> -> e^{-kt}|e>|E> + |g>|E'> with a vacuum environment reduces, after
// tracing the environment, to a two-element operator-sum channel:
//   K0 = diag(1, e^{-k dt}),  K1 = sqrt(1 - e^{-2k dt}) |g><e|.

#pragma once

#include "cqtp/protocol.hpp"
#include "cqtp/qstate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cqtp {

class DecoherenceError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// amplitude_damping is the decay model. dephasing keeps the populations and
/// damps only the coherences by the same factor; it exists to compare
/// against the long-time fidelity readings of the decay curve.
enum class DecayModel { amplitude_damping, dephasing };

inline const char* to_string(DecayModel m) {
    return m == DecayModel::amplitude_damping ? "amplitude_damping" : "dephasing";
}

class DampingChannel {
  public:
    DampingChannel(double kappa, double dt, DecayModel model = DecayModel::amplitude_damping)
        : kappa_(kappa), dt_(dt), model_(model) {
        if (!(dt >= 0.0)) throw DecoherenceError("damping interval must be non-negative");
        if (!(kappa >= 0.0)) throw DecoherenceError("decay rate must be non-negative");
    }

    double kappa() const { return kappa_; }
    double dt() const { return dt_; }
    DecayModel model() const { return model_; }

    /// Amplitude factor of the excited state, e^{-k dt}.
    double survival_amplitude() const { return std::exp(-kappa_ * dt_); }

    /// 1 - e^{-2 k dt}
    double jump_probability() const { return -std::expm1(-2.0 * kappa_ * dt_); }

    std::vector<Matrix> kraus() const {
        Matrix k0 = Matrix::Zero(2, 2);
        k0(0, 0) = 1.0;
        k0(1, 1) = survival_amplitude();
        Matrix k1 = Matrix::Zero(2, 2);
        const double s = std::sqrt(jump_probability());
        if (model_ == DecayModel::amplitude_damping) {
            k1(0, 1) = s;
        } else {
            k1(1, 1) = s;
        }
        return {k0, k1};
    }

  private:
    double kappa_;
    double dt_;
    DecayModel model_;
};

inline DensityMatrix apply_damping(const DensityMatrix& rho, const std::string& atom_label, double kappa,
                                   double dt, DecayModel model = DecayModel::amplitude_damping) {
    if (rho.layout().at(atom_label).kind != SubsystemKind::atom) {
        throw DecoherenceError("'" + atom_label + "' is not an atom");
    }
    const DampingChannel ch(kappa, dt, model);
    if (kappa == 0.0 || dt == 0.0) return rho;
    const auto k = ch.kraus();
    const std::string t[] = {atom_label};
    return apply_kraus(k, t, rho);
}

// ---------------------------------------------------------------------------
// Event schedule

/// Damping over the interval ending at `time` on `affected_atoms`; the protocol
/// step named by `note` follows it.
struct DampingEvent {
    double time;
    std::vector<std::string> affected_atoms;
    std::string note;
};

/// Exactly four events, one per protocol step:
///   0: R on atom 1
///   1: dispersive pass and R' on atom 1, detection of atom 1, atom 4 joins in |g>
///   2: resonant pass of atom 4
///   3: R' on atom 4, detection of atom 4
using DecaySchedule = std::vector<DampingEvent>;

inline DecaySchedule default_decay_schedule(const Schedule& s) {
    using namespace labels;
    return {
        {s.t1, {atom1, atom2, atom3}, "R on atom 1"},
        {s.t2, {atom1, atom2, atom3}, "dispersive pass and R' on atom 1; atom 1 detected"},
        {s.t3, {atom2, atom3}, "resonant pass of atom 4"},
        {s.t4, {atom2, atom3, atom4}, "R' on atom 4; atom 4 detected"},
    };
}

inline void validate(const DecaySchedule& schedule) {
    if (schedule.size() != 4) throw DecoherenceError("decay schedule needs exactly four events");
    double prev = 0.0;
    for (const auto& ev : schedule) {
        if (ev.time < prev) throw DecoherenceError("decay schedule times must be non-decreasing");
        prev = ev.time;
    }
}

struct DecayOptions {
    DecayModel model = DecayModel::amplitude_damping;
    /// Empty means default_decay_schedule(params.schedule).
    DecaySchedule schedule;
    /// Damping stops at this time; the remaining protocol steps still run.
    double t_stop = std::numeric_limits<double>::infinity();
};

struct DecayRun {
    double probability;
    double fidelity;
    /// Conditioned, corrected, normalized state of (atom3, atom2).
    DensityMatrix bob_state;
};

namespace detail {

inline DensityMatrix damp_interval(DensityMatrix rho, const DampingEvent& ev, double from, double t_stop,
                                   double kappa, DecayModel model) {
    const double to = std::min(ev.time, t_stop);
    const double dt = std::max(0.0, to - from);
    for (const auto& a : ev.affected_atoms) {
        if (!rho.layout().contains(a)) {
            throw DecoherenceError("decay event '" + ev.note + "' names '" + a + "', which is not in the register");
        }
        rho = apply_damping(rho, a, kappa, dt, model);
    }
    return rho;
}

}  // namespace detail

/// Runs the protocol on a density matrix, conditioned on `outcome`, with
/// damping interleaved according to the schedule.
inline DecayRun run_with_decay(const ProtocolParams& params, BellOutcome outcome, const DecayOptions& opts = {}) {
    using namespace labels;
    params.validate();
    const DecaySchedule schedule = opts.schedule.empty() ? default_decay_schedule(params.schedule) : opts.schedule;
    validate(schedule);
    const DetectionSignature sig = signature(outcome);
    const std::size_t cutoff = params.fock_cutoff;
    const std::string a1[] = {atom1};
    const std::string a1m[] = {atom1, modeA};
    const std::string a4[] = {atom4};
    const std::string a4m[] = {atom4, modeA};

    DensityMatrix rho(assemble_total(prepare_input(params.c0, params.c1), prepare_channel(cutoff)));
    double prev = 0.0;
    for (std::size_t step = 0; step < schedule.size(); ++step) {
        rho = detail::damp_interval(rho, schedule[step], prev, opts.t_stop, params.kappa, opts.model);
        prev = schedule[step].time;
        switch (step) {
        case 0:
            rho = apply(ramsey_unitary(), a1, rho);
            break;
        case 1:
            rho = apply(dispersive_unitary(std::numbers::pi, cutoff), a1m, rho);
            rho = apply(ramsey_unitary(), a1, rho);
            rho = project(rho, atom1, sig.atom1);
            rho = join_probe_atom(rho);
            break;
        case 2:
            rho = apply(resonant_unitary(std::numbers::pi / 2.0, cutoff), a4m, rho);
            break;
        case 3:
            rho = apply(ramsey_unitary(), a4, rho);
            rho = project(rho, atom4, sig.atom4);
            break;
        }
    }
    const std::string keep[] = {atom3, atom2};
    const DensityMatrix bob = bob_correct(outcome, partial_trace(rho, keep));
    const double p = bob.trace();
    if (p <= 0.0) throw DecoherenceError("conditioned outcome has zero probability");
    DensityMatrix normalized = bob.normalized();
    const double f = fidelity(normalized, teleport_target(params.c0, params.c1));
    return {p, f, std::move(normalized)};
}

struct FidelityPoint {
    double t;
    double fidelity;
};

/// Fidelity of Bob's corrected state as a function of time. Up to t4 the
/// damping is cut off at t and the protocol completed; beyond t4 the
/// teleported pair keeps decaying when `free_evolution_beyond_t4` is set.
inline std::vector<FidelityPoint> fidelity_vs_time(const ProtocolParams& params, BellOutcome outcome,
                                                   const std::vector<double>& t_grid,
                                                   bool free_evolution_beyond_t4 = true,
                                                   DecayModel model = DecayModel::amplitude_damping) {
    const double t4 = params.schedule.t4;
    const DensityMatrix at_t4 = run_with_decay(params, outcome, {model, {}, t4}).bob_state;
    const StateVector target = teleport_target(params.c0, params.c1);
    std::vector<FidelityPoint> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        if (t < 0.0) throw DecoherenceError("time grid must be non-negative");
        if (t <= t4) {
            out.push_back({t, run_with_decay(params, outcome, {model, {}, t}).fidelity});
            continue;
        }
        DensityMatrix rho = at_t4;
        if (free_evolution_beyond_t4) {
            rho = apply_damping(rho, labels::atom3, params.kappa, t - t4, model);
            rho = apply_damping(rho, labels::atom2, params.kappa, t - t4, model);
        }
        out.push_back({t, fidelity(rho, target)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Long-time comparison against the reference decay-curve points

struct DecayCurveVariant {
    DecayModel model;
    double fidelity_at_t4;
    double fidelity_at_tf;
    /// Time where the curve first drops to 2/3; NaN if it never does before 1 s.
    double two_thirds_time;
    bool matches_t4;  // F(t4) in [0.98, 1]
    bool matches_tf;  // F(tf) in [0.60, 0.72]
};

struct DecayDiscrepancy {
    static constexpr double reference_t4_fidelity = 0.99;
    static constexpr double reference_tf = 5.78e-3;
    static constexpr double reference_tf_fidelity = 2.0 / 3.0;
    double t4;
    std::array<DecayCurveVariant, 2> variants;

    bool any_matches_tf() const { return variants[0].matches_tf || variants[1].matches_tf; }

    std::string text() const {
        std::ostringstream os;
        os.precision(6);
        os << "decay curve comparison (outcome psi+)\n"
           << "reference: F(t4=" << t4 << " s) ~ " << reference_t4_fidelity << ", F(tf=" << reference_tf
           << " s) = 2/3\n";
        for (const auto& v : variants) {
            os << to_string(v.model) << ": F(t4) = " << v.fidelity_at_t4 << (v.matches_t4 ? " [in 0.98..1]" : " [outside 0.98..1]")
               << ", F(tf) = " << v.fidelity_at_tf << (v.matches_tf ? " [in 0.60..0.72]" : " [outside 0.60..0.72]")
               << ", F = 2/3 at t = " << v.two_thirds_time << " s\n";
        }
        os << "amplitude damping sends the single-excitation pair (atom3, atom2) to |g,g>, so the\n"
              "teleported fidelity falls roughly as e^{-2 kappa t}; pure dephasing leaves the\n"
              "populations and gives roughly (1 + e^{-2 kappa t})/2. Only the latter reaches 2/3\n"
              "near the reference tf. Neither model gives F(t4) ~ 0.99 at kappa = 100/s, since\n"
              "2 kappa t4 ~ 0.12 already.\n";
        return os.str();
    }
};

inline DecayDiscrepancy decay_discrepancy(ProtocolParams params) {
    params.c0 = params.c1 = cplx(std::numbers::sqrt2 / 2.0, 0.0);
    const double t4 = params.schedule.t4;
    DecayDiscrepancy d{t4, {}};
    const DecayModel models[] = {DecayModel::amplitude_damping, DecayModel::dephasing};
    for (std::size_t k = 0; k < 2; ++k) {
        const DecayModel m = models[k];
        auto f_at = [&](double t) {
            return fidelity_vs_time(params, BellOutcome::psi_plus, {t}, true, m).front().fidelity;
        };
        DecayCurveVariant v{m, f_at(t4), f_at(DecayDiscrepancy::reference_tf), std::nan(""), false, false};
        v.matches_t4 = v.fidelity_at_t4 >= 0.98 && v.fidelity_at_t4 <= 1.0;
        v.matches_tf = v.fidelity_at_tf >= 0.60 && v.fidelity_at_tf <= 0.72;
        double lo = 0.0;
        double hi = 1.0;
        if (f_at(hi) < 2.0 / 3.0) {
            for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
                const double mid = 0.5 * (lo + hi);
                (f_at(mid) > 2.0 / 3.0 ? lo : hi) = mid;
            }
            v.two_thirds_time = 0.5 * (lo + hi);
        }
        d.variants[k] = v;
    }
    return d;
}

}  // namespace cqtp
