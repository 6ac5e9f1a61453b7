// fluctuation.hpp
// Fidelity loss from Gaussian spread in the three atom-cavity interaction
// times, averaged by Gauss-Hermite quadrature or Monte Carlo, and the closed
// form it is compared against.

#pragma once

#include "cqtp/protocol.hpp"
#include "cqtp/qstate.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cqtp {

class FluctuationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1).
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch on the probabilists' Hermite recurrence He_{k+1} = z He_k - k He_{k-1}.
inline GaussHermiteRule gauss_hermite(std::size_t order) {
    if (order == 0) throw FluctuationError("quadrature order must be positive");
    const auto n = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (Eigen::Index k = 0; k < n; ++k) {
        rule.nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        rule.weights[k] = v0 * v0;
    }
    // The middle node of an odd rule is analytically zero.
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    return rule;
}

/// Relative spread x of each cavity interaction time: t_j ~ N(t~_j, (x t~_j)^2).
/// Truncation at t_j >= 0 is ignored; for x <= 0.05 the discarded tail is
/// beyond 20 standard deviations.
struct TimeNoiseModel {
    double x = 0.0;
    /// Channel pi/(4 lambda), dispersive pi/chi, probe pi/(2 lambda).
    std::array<double, 3> nominal_times{};

    std::array<double, 3> spreads() const {
        return {x * nominal_times[0], x * nominal_times[1], x * nominal_times[2]};
    }

    /// Angles for standardized deviations z: each angle scales with its duration.
    InteractionAngles angles(const std::array<double, 3>& z) const {
        const InteractionAngles nominal{};
        return {nominal.channel * (1.0 + x * z[0]), nominal.dispersive * (1.0 + x * z[1]),
                nominal.probe * (1.0 + x * z[2])};
    }
};

enum class Integrator { quadrature, montecarlo };

inline const char* to_string(Integrator m) { return m == Integrator::quadrature ? "quadrature" : "montecarlo"; }

struct AveragingOptions {
    Integrator method = Integrator::quadrature;
    std::size_t order = 21;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    /// Quadrature only: re-evaluate at order 2n-1 and warn if F moves by more than 1e-8.
    bool check_convergence = false;
};

struct AveragedState {
    /// Outcome-conditioned, corrected, normalized state of (atom3, atom2).
    DensityMatrix rho;
    double fidelity;
    /// Averaged probability of the outcome.
    double probability;
    /// Monte Carlo standard error of the fidelity; zero for quadrature.
    double std_error = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::size_t outcome_slot(BellOutcome o) {
    for (std::size_t k = 0; k < kAllOutcomes.size(); ++k) {
        if (kAllOutcomes[k] == o) return k;
    }
    return 0;
}

// Unnormalized conditioned state p * rho for every outcome at one set of angles.
struct BranchSample {
    std::array<Matrix, 4> weighted;
    std::array<double, 4> probability;
};

inline BranchSample sample_branches(const ProtocolParams& params, const InteractionAngles& angles) {
    BranchSample s;
    const auto branches = run_all_branches(params, angles);
    for (std::size_t k = 0; k < 4; ++k) {
        s.probability[k] = branches[k].probability;
        s.weighted[k] = branches[k].bob_state ? Matrix(branches[k].probability * branches[k].bob_state->matrix())
                                              : Matrix(Matrix::Zero(4, 4));
    }
    return s;
}

inline SubsystemLayout bob_layout() { return SubsystemLayout({atom(labels::atom3), atom(labels::atom2)}); }

// Quadrature average of all four conditioned states; accumulation order is
// the fixed lexicographic order of the node triple.
inline std::array<AveragedState, 4> quadrature_all(const ProtocolParams& params, const TimeNoiseModel& noise,
                                                   std::size_t order) {
    std::array<Matrix, 4> acc;
    std::array<double, 4> prob{};
    for (auto& m : acc) m = Matrix::Zero(4, 4);
    auto accumulate = [&](const InteractionAngles& a, double w) {
        const BranchSample s = sample_branches(params, a);
        for (std::size_t k = 0; k < 4; ++k) {
            acc[k] += w * s.weighted[k];
            prob[k] += w * s.probability[k];
        }
    };
    if (noise.x == 0.0) {
        accumulate(InteractionAngles{}, 1.0);
    } else {
        const GaussHermiteRule rule = gauss_hermite(order);
        for (std::size_t i = 0; i < order; ++i) {
            for (std::size_t j = 0; j < order; ++j) {
                for (std::size_t k = 0; k < order; ++k) {
                    const double w = rule.weights[i] * rule.weights[j] * rule.weights[k];
                    accumulate(noise.angles({rule.nodes[i], rule.nodes[j], rule.nodes[k]}), w);
                }
            }
        }
    }
    const StateVector target = teleport_target(params.c0, params.c1);
    auto finish = [&](std::size_t k) {
        if (prob[k] <= 0.0) throw FluctuationError("outcome has zero averaged probability");
        DensityMatrix rho(bob_layout(), acc[k] / prob[k]);
        const double f = fidelity(rho, target);
        return AveragedState{std::move(rho), f, prob[k], 0.0, {}};
    };
    return {finish(0), finish(1), finish(2), finish(3)};
}

inline void check_preconditions(double x, const AveragingOptions& opts) {
    if (!(x >= 0.0)) throw FluctuationError("relative spread x must be non-negative");
    if (opts.method == Integrator::quadrature && opts.order < 5) {
        throw FluctuationError("quadrature order must be at least 5");
    }
    if (opts.method == Integrator::montecarlo && opts.samples < 10000) {
        throw FluctuationError("Monte Carlo needs at least 10000 samples");
    }
}

}  // namespace detail

inline TimeNoiseModel noise_model(const ProtocolParams& params, double x) {
    return {x, params.nominal_interaction_times()};
}

/// Quadrature average for every outcome at once, in kAllOutcomes order.
inline std::array<AveragedState, 4> averaged_states(const ProtocolParams& params, double x, std::size_t order = 21) {
    detail::check_preconditions(x, {Integrator::quadrature, order});
    params.validate();
    return detail::quadrature_all(params, noise_model(params, x), order);
}

/// Outcome-conditioned state averaged over Gaussian interaction-time noise.
inline AveragedState averaged_state(const ProtocolParams& params, double x, BellOutcome outcome,
                                    const AveragingOptions& opts = {}) {
    detail::check_preconditions(x, opts);
    params.validate();
    const TimeNoiseModel noise = noise_model(params, x);
    const std::size_t slot = detail::outcome_slot(outcome);

    if (opts.method == Integrator::quadrature) {
        AveragedState r = detail::quadrature_all(params, noise, opts.order)[slot];
        if (opts.check_convergence && x > 0.0) {
            const double f2 = detail::quadrature_all(params, noise, 2 * opts.order - 1)[slot].fidelity;
            if (std::abs(f2 - r.fidelity) > 1e-8) {
                r.warnings.push_back("quadrature not converged: order " + std::to_string(opts.order) + " vs " +
                                     std::to_string(2 * opts.order - 1) + " differ by " +
                                     std::to_string(std::abs(f2 - r.fidelity)));
            }
        }
        return r;
    }

    // Ratio estimator F = E[p F_sample] / E[p]; standard error by the delta method.
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const StateVector target = teleport_target(params.c0, params.c1);
    Matrix acc = Matrix::Zero(4, 4);
    std::vector<double> a(opts.samples);
    std::vector<double> b(opts.samples);
    for (std::size_t n = 0; n < opts.samples; ++n) {
        const std::array<double, 3> z = {normal(rng), normal(rng), normal(rng)};
        const BranchResult br = run_all_branches(params, noise.angles(z))[slot];
        b[n] = br.probability;
        a[n] = br.bob_state ? br.probability * br.fidelity : 0.0;
        if (br.bob_state) acc += br.probability * br.bob_state->matrix();
    }
    double sum_b = 0.0;
    for (double v : b) sum_b += v;
    if (sum_b <= 0.0) throw FluctuationError("outcome never occurred in the Monte Carlo sample");
    const double mean_b = sum_b / static_cast<double>(opts.samples);
    AveragedState r{DensityMatrix(detail::bob_layout(), acc / sum_b), 0.0, mean_b, 0.0, {}};
    r.fidelity = fidelity(r.rho, target);
    double ss = 0.0;
    for (std::size_t n = 0; n < opts.samples; ++n) {
        const double d = a[n] - r.fidelity * b[n];
        ss += d * d;
    }
    const auto ns = static_cast<double>(opts.samples);
    r.std_error = std::sqrt(ss / (ns - 1.0) / ns) / mean_b;
    return r;
}

/// Closed-form fidelity F(c0, x) with its normalization N, as printed:
///   F = N^2 [ c0^4/2 (e^{3a} + e^{a} + 2e^{2a}) e^{-3a} + (1 - c0^2)(2 - 2c0^2)
///             - 2c0^2 (-e^{a} - 1 + c0^2 e^{a} + c0^2) e^{-3a/2} ]
///   N = (2c0^2 e^{-a} + 3 - 2c0^2 - e^{-a})^{-1/2},   a = x^2 pi^2 / 2.
inline double closed_form_fidelity(double c0, double x) {
    if (c0 < 0.0 || c0 > 1.0) throw FluctuationError("c0 must lie in [0, 1]");
    if (!(x >= 0.0)) throw FluctuationError("relative spread x must be non-negative");
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double x2 = x * x;
    const double c2 = c0 * c0;
    const double c4 = c2 * c2;
    const double n2 = 1.0 / (2.0 * c2 * std::exp(-0.5 * x2 * pi2) + 3.0 - 2.0 * c2 - std::exp(-0.5 * x2 * pi2));
    const double bracket =
        0.5 * c4 * (std::exp(1.5 * x2 * pi2) + std::exp(0.5 * x2 * pi2) + 2.0 * std::exp(x2 * pi2)) *
            std::exp(-1.5 * x2 * pi2) +
        (1.0 - c2) * (2.0 - 2.0 * c2) -
        2.0 * c2 * (-std::exp(0.5 * x2 * pi2) - 1.0 + c2 * std::exp(0.5 * x2 * pi2) + c2) * std::exp(-0.75 * x2 * pi2);
    return detail::clamp_unit(n2 * bracket);
}

struct SurfaceCell {
    double c0;
    double x;
    double f_closed;
    double f_numeric;
    double delta;
    bool flagged;  // delta > 1e-3
};

inline ProtocolParams with_real_c0(ProtocolParams p, double c0) {
    p.c0 = cplx(c0, 0.0);
    p.c1 = cplx(std::sqrt(std::max(0.0, 1.0 - c0 * c0)), 0.0);
    return p;
}

/// Closed form against the quadrature average on `outcome`, row-major in c0.
inline std::vector<SurfaceCell> fidelity_surface(const ProtocolParams& base, const std::vector<double>& c0_grid,
                                                 const std::vector<double>& x_grid,
                                                 BellOutcome outcome = BellOutcome::psi_plus,
                                                 std::size_t order = 21) {
    std::vector<SurfaceCell> cells;
    cells.reserve(c0_grid.size() * x_grid.size());
    for (double c0 : c0_grid) {
        for (double x : x_grid) {
            if (c0 < 0.0 || c0 > 1.0 || x < 0.0 || x > 0.05) {
                throw FluctuationError("surface grid must lie within [0,1] x [0,0.05]");
            }
            const double fc = closed_form_fidelity(c0, x);
            const double fn = averaged_state(with_real_c0(base, c0), x, outcome, {Integrator::quadrature, order}).fidelity;
            const double d = std::abs(fc - fn);
            cells.push_back({c0, x, fc, fn, d, d > 1e-3});
        }
    }
    return cells;
}

struct BranchStudy {
    std::array<double, 4> max_delta{};
    /// Outcome whose numeric fidelity tracks the closed form within 1e-3 on the whole grid.
    std::optional<BellOutcome> matched;

    std::string text() const {
        std::string s = "closed form vs quadrature, max |F_closed - F_numeric| per outcome:\n";
        for (std::size_t k = 0; k < 4; ++k) {
            s += "  " + std::string(name(kAllOutcomes[k])) + ": " + std::to_string(max_delta[k]) + "\n";
        }
        s += matched ? "matching outcome: " + std::string(name(*matched)) + "\n"
                     : "no outcome matches within 1e-3\n";
        return s;
    }
};

inline BranchStudy branch_study(const ProtocolParams& base, const std::vector<double>& c0_grid,
                                const std::vector<double>& x_grid, std::size_t order = 21) {
    BranchStudy study;
    for (double c0 : c0_grid) {
        const ProtocolParams p = with_real_c0(base, c0);
        for (double x : x_grid) {
            const double fc = closed_form_fidelity(c0, x);
            const auto states = averaged_states(p, x, order);
            for (std::size_t k = 0; k < 4; ++k) {
                study.max_delta[k] = std::max(study.max_delta[k], std::abs(fc - states[k].fidelity));
            }
        }
    }
    for (std::size_t k = 0; k < 4; ++k) {
        if (study.max_delta[k] > 1e-3) continue;
        if (!study.matched || study.max_delta[k] < study.max_delta[detail::outcome_slot(*study.matched)]) {
            study.matched = kAllOutcomes[k];
        }
    }
    return study;
}

}  // namespace cqtp
