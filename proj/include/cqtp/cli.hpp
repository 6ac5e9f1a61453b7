// cli.hpp
// Run configuration, flag/config-file parsing and scenario execution for the
// cqtp command-line tool. Output is CSV with a '#' provenance line.

#pragma once

#include "cqtp/decoherence.hpp"
#include "cqtp/fluctuation.hpp"
#include "cqtp/protocol.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cqtp::cli {

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int usage = 1;
inline constexpr int invariant = 2;
}  // namespace exit_code

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvariantViolation : public std::runtime_error {
  public:
    InvariantViolation(std::string property, const std::string& detail)
        : std::runtime_error("invariant '" + property + "' violated: " + detail), property_(std::move(property)) {}

    const std::string& property() const { return property_; }

  private:
    std::string property_;
};

enum class Scenario { ideal, decay, fluctuation, surface };

inline const char* to_string(Scenario s) {
    switch (s) {
    case Scenario::ideal:
        return "ideal";
    case Scenario::decay:
        return "decay";
    case Scenario::fluctuation:
        return "fluctuation";
    case Scenario::surface:
        return "surface";
    }
    return "?";
}

/// Shortest decimal that reads back to the same double.
inline std::string exact(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// CSV number format: 12 significant digits.
inline std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Inclusive grid "start:stop:steps".
struct Grid {
    double start = 0.0;
    double stop = 0.0;
    std::size_t steps = 1;

    static Grid parse(const std::string& text) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw UsageError("grid '" + text + "' must be start:stop:steps");
        Grid g;
        try {
            std::size_t used = 0;
            g.start = std::stod(parts[0]);
            g.stop = std::stod(parts[1]);
            const long long n = std::stoll(parts[2], &used);
            if (used != parts[2].size() || n < 1) throw UsageError("grid '" + text + "' needs steps >= 1");
            g.steps = static_cast<std::size_t>(n);
        } catch (const std::logic_error&) {
            throw UsageError("grid '" + text + "' is not numeric");
        }
        if (g.steps == 1 && g.start != g.stop) throw UsageError("grid '" + text + "' with one step needs start == stop");
        return g;
    }

    std::vector<double> values() const {
        if (steps == 1) return {start};
        std::vector<double> v(steps);
        for (std::size_t i = 0; i < steps; ++i) {
            v[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(steps - 1);
        }
        v.back() = stop;
        return v;
    }

    std::string text() const { return exact(start) + ":" + exact(stop) + ":" + std::to_string(steps); }

    bool operator==(const Grid&) const = default;
};

struct RunConfig {
    Scenario scenario = Scenario::ideal;
    double c0 = std::numbers::sqrt2 / 2.0;
    double c1_phase = 0.0;
    double lambda = ProtocolParams{}.lambda;
    double delta = ProtocolParams{}.delta;
    double kappa = 100.0;
    double x = 0.005;
    std::size_t fock_cutoff = 1;
    Schedule schedule{};
    /// Empty means all four outcomes.
    std::optional<BellOutcome> outcome;
    Integrator method = Integrator::quadrature;
    std::size_t order = 21;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    std::optional<Grid> t_grid;
    std::optional<Grid> c0_grid;
    std::optional<Grid> x_grid;
    std::string out;

    double c1_magnitude() const { return std::sqrt(std::max(0.0, 1.0 - c0 * c0)); }

    ProtocolParams params() const {
        ProtocolParams p;
        p.c0 = cplx(c0, 0.0);
        p.c1 = std::polar(c1_magnitude(), c1_phase);
        p.lambda = lambda;
        p.delta = delta;
        p.kappa = kappa;
        p.fock_cutoff = fock_cutoff;
        p.schedule = schedule;
        return p;
    }

    std::vector<BellOutcome> outcomes() const {
        if (outcome) return {*outcome};
        return {kAllOutcomes.begin(), kAllOutcomes.end()};
    }

    /// Every setting as key=value lines, in fixed order. Reading this text
    /// back as a config file reproduces the same normalized form. The output
    /// path is not part of it.
    std::string normalized() const {
        std::ostringstream os;
        os << "scenario=" << to_string(scenario) << "\n"
           << "c0=" << exact(c0) << "\n"
           << "c1-phase=" << exact(c1_phase) << "\n"
           << "lambda=" << exact(lambda) << "\n"
           << "delta=" << exact(delta) << "\n"
           << "kappa=" << exact(kappa) << "\n"
           << "x=" << exact(x) << "\n"
           << "fock-cutoff=" << fock_cutoff << "\n"
           << "t1=" << exact(schedule.t1) << "\n"
           << "t2=" << exact(schedule.t2) << "\n"
           << "t3=" << exact(schedule.t3) << "\n"
           << "t4=" << exact(schedule.t4) << "\n"
           << "outcome=" << (outcome ? std::string(name(*outcome)) : std::string("all")) << "\n"
           << "method=" << cqtp::to_string(method) << "\n"
           << "order=" << order << "\n"
           << "samples=" << samples << "\n"
           << "seed=" << seed << "\n";
        if (t_grid) os << "t-grid=" << t_grid->text() << "\n";
        if (c0_grid) os << "c0-grid=" << c0_grid->text() << "\n";
        if (x_grid) os << "x-grid=" << x_grid->text() << "\n";
        return os.str();
    }

    /// normalized() on a single line, for the CSV provenance comment.
    std::string provenance() const {
        std::string s = normalized();
        for (char& ch : s) {
            if (ch == '\n') ch = ' ';
        }
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return "# cqtp " + s;
    }
};

// ---------------------------------------------------------------------------
// Parsing

/// Raw option values as CLI11 binds them; finalized into a RunConfig.
struct RawOptions {
    std::string scenario = "ideal";
    std::optional<double> c0;
    std::optional<double> c1_phase;
    std::optional<double> lambda;
    std::optional<double> delta;
    std::optional<double> kappa;
    std::optional<double> kappa_inv;
    std::optional<double> x;
    std::optional<std::size_t> fock_cutoff;
    std::optional<double> t1, t2, t3, t4;
    std::string outcome = "all";
    std::string method = "quadrature";
    std::optional<std::size_t> order;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> t_grid, c0_grid, x_grid;
    std::string out;
};

inline void add_options(CLI::App& app, RawOptions& raw) {
    app.set_config("--config", "", "flat key=value config file; flags override its values");
    app.allow_config_extras(false);
    app.add_option("--scenario", raw.scenario, "ideal | decay | fluctuation | surface")
        ->check(CLI::IsMember({"ideal", "decay", "fluctuation", "surface"}));
    app.add_option("--c0", raw.c0, "real coefficient c0 in [0,1]; c1 = sqrt(1-c0^2) e^{i phase}");
    app.add_option("--c1-phase", raw.c1_phase, "phase of c1 (rad)");
    app.add_option("--lambda", raw.lambda, "atom-field coupling (rad/s)");
    app.add_option("--delta", raw.delta, "detuning for the dispersive pass (rad/s)");
    auto* kappa = app.add_option("--kappa", raw.kappa, "atomic decay rate (1/s)");
    auto* kappa_inv = app.add_option("--kappa-inv", raw.kappa_inv, "atomic lifetime 1/kappa (s)");
    kappa->excludes(kappa_inv);
    kappa_inv->excludes(kappa);
    app.add_option("--x", raw.x, "relative spread of the interaction times");
    app.add_option("--fock-cutoff", raw.fock_cutoff, "highest photon number kept for the cavity mode");
    app.add_option("--t1", raw.t1, "end of the first Ramsey zone (s)");
    app.add_option("--t2", raw.t2, "end of atom 1's dispersive pass and R' (s)");
    app.add_option("--t3", raw.t3, "end of atom 4's resonant pass (s)");
    app.add_option("--t4", raw.t4, "end of atom 4's R' (s)");
    app.add_option("--outcome", raw.outcome, "psi+ | psi- | phi+ | phi- | all")
        ->check(CLI::IsMember({"psi+", "psi-", "phi+", "phi-", "all"}));
    app.add_option("--method", raw.method, "quadrature | montecarlo")
        ->check(CLI::IsMember({"quadrature", "montecarlo"}));
    app.add_option("--order", raw.order, "Gauss-Hermite order per dimension");
    app.add_option("--samples", raw.samples, "Monte Carlo sample count");
    app.add_option("--seed", raw.seed, "Monte Carlo seed");
    app.add_option("--t-grid", raw.t_grid, "decay time grid start:stop:steps (s)");
    app.add_option("--c0-grid", raw.c0_grid, "c0 grid start:stop:steps");
    app.add_option("--x-grid", raw.x_grid, "x grid start:stop:steps");
    app.add_option("--out", raw.out, "output CSV path (stdout when omitted)");
}

inline RunConfig finalize(const RawOptions& raw) {
    RunConfig c;
    if (raw.scenario == "ideal") c.scenario = Scenario::ideal;
    else if (raw.scenario == "decay") c.scenario = Scenario::decay;
    else if (raw.scenario == "fluctuation") c.scenario = Scenario::fluctuation;
    else if (raw.scenario == "surface") c.scenario = Scenario::surface;
    else throw UsageError("unknown scenario '" + raw.scenario + "'");

    if (raw.c0) c.c0 = *raw.c0;
    if (c.c0 < 0.0 || c.c0 > 1.0) throw UsageError("--c0 must lie in [0, 1]");
    if (raw.c1_phase) c.c1_phase = *raw.c1_phase;
    if (raw.lambda) c.lambda = *raw.lambda;
    if (raw.delta) c.delta = *raw.delta;
    if (raw.kappa && raw.kappa_inv) throw UsageError("--kappa and --kappa-inv are mutually exclusive");
    if (raw.kappa) c.kappa = *raw.kappa;
    if (raw.kappa_inv) {
        if (!(*raw.kappa_inv > 0.0)) throw UsageError("--kappa-inv must be positive");
        c.kappa = 1.0 / *raw.kappa_inv;
    }
    if (raw.x) c.x = *raw.x;
    if (raw.fock_cutoff) c.fock_cutoff = *raw.fock_cutoff;
    if (raw.t1) c.schedule.t1 = *raw.t1;
    if (raw.t2) c.schedule.t2 = *raw.t2;
    if (raw.t3) c.schedule.t3 = *raw.t3;
    if (raw.t4) c.schedule.t4 = *raw.t4;
    if (raw.outcome != "all") c.outcome = parse_outcome(raw.outcome);
    c.method = raw.method == "montecarlo" ? Integrator::montecarlo : Integrator::quadrature;
    if (raw.order) c.order = *raw.order;
    if (raw.samples) c.samples = *raw.samples;
    if (raw.seed) c.seed = *raw.seed;
    if (raw.t_grid) c.t_grid = Grid::parse(*raw.t_grid);
    if (raw.c0_grid) c.c0_grid = Grid::parse(*raw.c0_grid);
    if (raw.x_grid) c.x_grid = Grid::parse(*raw.x_grid);
    c.out = raw.out;

    auto conflict = [&](const char* flag) {
        throw UsageError(std::string("--") + flag + " does not apply to scenario " + to_string(c.scenario));
    };
    if (c.t_grid && c.scenario != Scenario::decay) conflict("t-grid");
    if (c.c0_grid && c.scenario == Scenario::ideal) conflict("c0-grid");
    if (c.x_grid && (c.scenario == Scenario::ideal || c.scenario == Scenario::decay)) conflict("x-grid");
    if (c.method == Integrator::montecarlo && c.scenario == Scenario::surface) conflict("method=montecarlo");

    try {
        c.params().validate();
    } catch (const ProtocolError& e) {
        throw UsageError(e.what());
    }
    return c;
}

/// Parses flags (and the file named by --config). `args` excludes the program name.
inline RunConfig parse_config(const std::vector<std::string>& args) {
    CLI::App app{"cqtp"};
    RawOptions raw;
    add_options(app, raw);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ConfigError& e) {
        const std::string msg = e.what();
        const std::string prefix = "INI was not able to parse ";
        if (msg.rfind(prefix, 0) == 0) throw UsageError("unknown config key '" + msg.substr(prefix.size()) + "'");
        throw UsageError(msg);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    return finalize(raw);
}

// ---------------------------------------------------------------------------
// Scenarios

namespace detail {

inline void require(bool ok, const std::string& property, const std::string& detail) {
    if (!ok) throw InvariantViolation(property, detail);
}

inline void check_unit_interval(double f, const std::string& what) {
    require(f >= 0.0 && f <= 1.0, "fidelity_range", what + " = " + exact(f));
}

inline std::vector<double> default_values(const std::optional<Grid>& grid, Grid fallback) {
    return (grid ? *grid : fallback).values();
}

inline void write_ideal(const RunConfig& cfg, std::ostream& csv) {
    const IdealReport r = run_ideal(cfg.params());
    csv << "outcome,atom1,atom4,probability,fidelity\n";
    double total = 0.0;
    for (const auto& b : r.branches) {
        total += b.probability;
        if (cfg.outcome && *cfg.outcome != b.outcome) continue;
        const auto sig = signature(b.outcome);
        csv << name(b.outcome) << "," << cqtp::to_string(sig.atom1) << "," << cqtp::to_string(sig.atom4) << ","
            << csv_number(b.probability) << "," << csv_number(b.fidelity) << "\n";
        require(std::abs(b.probability - 0.25) <= 1e-10, "ideal_probability",
                std::string(name(b.outcome)) + " probability " + exact(b.probability));
        require(std::abs(b.fidelity - 1.0) <= 1e-10, "ideal_fidelity",
                std::string(name(b.outcome)) + " fidelity " + exact(b.fidelity));
    }
    require(std::abs(total - 1.0) <= 1e-10, "measurement_completeness", "probabilities sum to " + exact(total));
}

inline void write_decay(const RunConfig& cfg, std::ostream& csv, std::ostream& report) {
    const ProtocolParams base = cfg.params();
    const auto times = default_values(cfg.t_grid, {0.0, 1e-2, 101});
    const auto c0s = default_values(cfg.c0_grid, {cfg.c0, cfg.c0, 1});
    csv << "outcome,c0,t,fidelity,fidelity_dephasing\n";
    for (BellOutcome o : cfg.outcomes()) {
        for (double c0 : c0s) {
            ProtocolParams p = with_real_c0(base, c0);
            p.c1 = std::polar(std::abs(p.c1), cfg.c1_phase);
            const auto amp = fidelity_vs_time(p, o, times, true, DecayModel::amplitude_damping);
            const auto dep = fidelity_vs_time(p, o, times, true, DecayModel::dephasing);
            for (std::size_t i = 0; i < times.size(); ++i) {
                check_unit_interval(amp[i].fidelity, "decay fidelity");
                check_unit_interval(dep[i].fidelity, "dephasing fidelity");
                if (i > 0 && times[i] > p.schedule.t4 && times[i - 1] >= p.schedule.t4) {
                    require(amp[i].fidelity <= amp[i - 1].fidelity + 1e-12, "monotone_after_t4",
                            "fidelity rises at t = " + exact(times[i]));
                }
                csv << name(o) << "," << csv_number(c0) << "," << csv_number(times[i]) << ","
                    << csv_number(amp[i].fidelity) << "," << csv_number(dep[i].fidelity) << "\n";
            }
            const DecayRun run = run_with_decay(p, o);
            require(run.bob_state.is_valid(), "density_validity", "decayed state of (atom3, atom2) is not a density matrix");
        }
    }
    report << decay_discrepancy(base).text();
}

inline void write_fluctuation(const RunConfig& cfg, std::ostream& csv, std::ostream& report) {
    const ProtocolParams base = cfg.params();
    const bool surface = cfg.scenario == Scenario::surface;
    const auto c0s = default_values(cfg.c0_grid, surface ? Grid{0.0, 1.0, 11} : Grid{cfg.c0, cfg.c0, 1});
    const auto xs = default_values(cfg.x_grid, surface ? Grid{0.0, 0.05, 6} : Grid{cfg.x, cfg.x, 1});
    const bool quadrature = surface || cfg.method == Integrator::quadrature;
    csv << "outcome,c0,x,F_closed,F_numeric,delta" << (surface ? "" : ",std_error") << "\n";
    BranchStudy study;
    for (double c0 : c0s) {
        const ProtocolParams p = with_real_c0(base, c0);
        for (double x : xs) {
            if (surface && (x < 0.0 || x > 0.05)) throw UsageError("surface x grid must lie in [0, 0.05]");
            const double fc = closed_form_fidelity(c0, x);
            check_unit_interval(fc, "closed-form fidelity");
            std::optional<std::array<AveragedState, 4>> states;
            if (quadrature) {
                states = averaged_states(p, x, cfg.order);
                for (std::size_t k = 0; k < 4; ++k) {
                    study.max_delta[k] = std::max(study.max_delta[k], std::abs(fc - (*states)[k].fidelity));
                }
            }
            for (BellOutcome o : cfg.outcomes()) {
                const AveragedState st =
                    states ? (*states)[cqtp::detail::outcome_slot(o)]
                           : averaged_state(p, x, o, {Integrator::montecarlo, cfg.order, cfg.samples, cfg.seed});
                check_unit_interval(st.fidelity, "averaged fidelity");
                require(st.rho.is_valid(), "density_validity", "averaged state is not a density matrix");
                const double d = std::abs(fc - st.fidelity);
                csv << name(o) << "," << csv_number(c0) << "," << csv_number(x) << "," << csv_number(fc) << ","
                    << csv_number(st.fidelity) << "," << csv_number(d);
                if (!surface) csv << "," << csv_number(st.std_error);
                csv << "\n";
                if (surface && d > 1e-3) {
                    report << "flag: |F_closed - F_numeric| = " << csv_number(d) << " at c0 = " << csv_number(c0)
                           << ", x = " << csv_number(x) << ", outcome " << name(o) << "\n";
                }
            }
        }
    }
    if (quadrature) {
        for (std::size_t k = 0; k < 4; ++k) {
            if (study.max_delta[k] > 1e-3) continue;
            if (!study.matched || study.max_delta[k] < study.max_delta[cqtp::detail::outcome_slot(*study.matched)]) {
                study.matched = kAllOutcomes[k];
            }
        }
        report << study.text();
    }
}

}  // namespace detail

/// Runs the configured scenario, writing CSV to cfg.out (or `fallback_out`
/// when no path is set) and any report text to `<out>.report.txt` (or
/// `log`). Returns the process exit code.
inline int run_scenario(const RunConfig& cfg, std::ostream& log, std::ostream& fallback_out = std::cout) {
    std::ostringstream csv;
    std::ostringstream report;
    csv << cfg.provenance() << "\n";
    try {
        for (const auto& w : cfg.params().validate()) log << "warning: " << w << "\n";
        switch (cfg.scenario) {
        case Scenario::ideal:
            detail::write_ideal(cfg, csv);
            break;
        case Scenario::decay:
            detail::write_decay(cfg, csv, report);
            break;
        case Scenario::fluctuation:
        case Scenario::surface:
            detail::write_fluctuation(cfg, csv, report);
            break;
        }
    } catch (const InvariantViolation& e) {
        log << "error: " << e.what() << "\n";
        return exit_code::invariant;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << "\n";
        return exit_code::usage;
    }

    if (cfg.out.empty()) {
        fallback_out << csv.str();
        log << report.str();
        return exit_code::success;
    }
    std::ofstream f(cfg.out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << csv.str()) || !f.flush()) {
        log << "error: cannot write output file '" << cfg.out << "'\n";
        return exit_code::usage;
    }
    if (!report.str().empty()) {
        std::ofstream r(cfg.out + ".report.txt", std::ios::binary | std::ios::trunc);
        if (!r || !(r << report.str())) {
            log << "error: cannot write report file '" << cfg.out << ".report.txt'\n";
            return exit_code::usage;
        }
    }
    return exit_code::success;
}

}  // namespace cqtp::cli
