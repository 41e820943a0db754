#pragma once

// Scenario assembly and the four experiments behind the command-line verbs.
// Each experiment writes its files atomically and returns a key = value
// report whose `verdict.*` lines decide the exit status.

#include "memorybeam/config.hpp"
#include "memorybeam/generator.hpp"
#include "memorybeam/solver.hpp"
#include "memorybeam/stability.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace memorybeam {

struct Scenario {
    ScenarioConfig config;
    Grid grid;
    DiscreteGenerator generator;
    ForcingFunction forcing;
    MemoryKernel kernel;
    Vector initial;
    std::optional<ForcingProbe> probe;  ///< custom forcings only

    [[nodiscard]] ProblemSpec problem() const { return problem(initial); }
    [[nodiscard]] ProblemSpec problem(const Vector& v) const {
        return {generator, forcing, kernel, config.time.t0, v};
    }
    [[nodiscard]] BeamParams params() const { return {config.beam.m, config.beam.alpha, config.beam.beta}; }
};

/// Nodal samples of the polynomials p and q with eta from the compatibility
/// condition.
inline Vector polynomial_initial_state(const Grid& grid, const BeamParams& params, const std::vector<double>& p_coeffs,
                                       const std::vector<double>& q_coeffs) {
    const int n = grid.nodes();
    Vector y = Vector::Zero(grid.state_dim());
    for (int i = 1; i <= n; ++i) {
        y(i - 1) = detail::polynomial_jet(p_coeffs, grid.x(i))[0];
        y(n + i - 1) = detail::polynomial_jet(q_coeffs, grid.x(i))[0];
    }
    y(2 * n) = compatible_eta(y.head(n), y.segment(n, n), grid, params.m, params.beta);
    return y;
}

/// Reads a state CSV (optional header, one data row). The eta column is
/// replaced by the compatible value.
inline Vector read_initial_state_file(const std::filesystem::path& path, const Grid& grid, const BeamParams& params) {
    std::ifstream in(path);
    if (!in) throw ConfigError("initial.file", "cannot open '" + path.string() + "'");
    std::string line;
    std::optional<BeamState> state;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#' || t.rfind("p_", 0) == 0) continue;
        if (state) throw ConfigError("initial.file", "expected a single data row in '" + path.string() + "'");
        try {
            state = state_from_csv_row(t, grid);
        } catch (const Error& e) {
            throw ConfigError("initial.file", e.what());
        }
    }
    if (!state) throw ConfigError("initial.file", "no data row in '" + path.string() + "'");
    if (!state->all_finite()) throw ConfigError("initial.file", "non-finite entries");
    state->eta = compatible_eta(state->p, state->q, grid, params.m, params.beta);
    return flatten(*state);
}

/// Builds the discrete problem. Relative file paths resolve against base_dir.
inline Scenario build_scenario(const ScenarioConfig& cfg, const std::filesystem::path& base_dir = {}) {
    validate_config(cfg);
    const Grid grid(cfg.beam.n_interior);
    const BeamParams params{cfg.beam.m, cfg.beam.alpha, cfg.beam.beta};
    auto gen = build_beam_generator(grid, params, {cfg.energy.bend, cfg.energy.kin, cfg.energy.eta});

    ForcingFunction forcing;
    std::optional<ForcingProbe> probe;
    if (cfg.forcing.kind == "zero") {
        forcing = zero_forcing();
    } else if (cfg.forcing.kind == "linear") {
        forcing = beam_linear_forcing(grid, cfg.forcing.gamma, cfg.forcing.lambda);
    } else {
        const auto expr = Expression::parse(cfg.forcing.expr);
        bool zero = true;
        const int probes = expr.uses("t") ? 33 : 1;
        for (int k = 0; k < probes; ++k) {
            const double t = cfg.time.t0 + (cfg.time.t_end - cfg.time.t0) * k / std::max(1, probes - 1);
            if (expr(t, 0.0, 0.0) != 0.0) zero = false;
        }
        const double tl = cfg.forcing.time_lipschitz;
        forcing = beam_forcing(
            grid, [expr](double t, double a, double b) { return expr(t, a, b); }, cfg.forcing.C, zero,
            "custom(" + cfg.forcing.expr + ")", [tl](double) { return tl; });
        probe = probe_forcing(forcing, gen.norm(), cfg.time.t0, cfg.time.t_end, 2000, cfg.seed, cfg.batch.radius);
        if (!std::isfinite(probe->lipschitz_measured))
            throw ConfigError("forcing.expr", "expression is not finite on the probe samples");
        if (!probe->lipschitz_ok)
            throw ConfigError("forcing.C", "declared " + detail::format_double(cfg.forcing.C) +
                                               " is below the sampled Lipschitz ratio " +
                                               detail::format_double(probe->lipschitz_measured));
        if (!probe->time_lipschitz_ok)
            throw ConfigError("forcing.time_lipschitz",
                              "declared " + detail::format_double(tl) + " is below the sampled ratio " +
                                  detail::format_double(probe->time_lipschitz_measured));
    }

    Vector initial;
    if (cfg.initial.kind == "zero") {
        initial = Vector::Zero(grid.state_dim());
    } else if (cfg.initial.kind == "polynomial") {
        initial = polynomial_initial_state(grid, params, cfg.initial.p_coeffs, cfg.initial.q_coeffs);
    } else {
        std::filesystem::path p(cfg.initial.file);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        initial = read_initial_state_file(p, grid, params);
    }
    return {cfg, grid, std::move(gen), std::move(forcing), exp_kernel(cfg.kernel.T), std::move(initial), probe};
}

// --- shared plumbing -------------------------------------------------------------

/// Writes through a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

/// Worker count: MEMORYBEAM_THREADS when set to a positive integer, else the
/// hardware concurrency.
inline unsigned batch_threads() {
    if (const char* env = std::getenv("MEMORYBEAM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, count) on up to `threads` workers. Results are
/// stored by index so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(1, count)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// A compatible state drawn in the norm's geometry, scaled to norm
/// radius * U with U uniform on [0, 1].
inline Vector random_compatible_state(std::mt19937_64& rng, const Scenario& sc, double radius) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto& norm = sc.generator.norm();
    Vector xi(norm.dim());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = gauss(rng);
    Vector y = norm.factor().triangularView<Eigen::Upper>().solve(xi);
    const int n = sc.grid.nodes();
    y(2 * n) = compatible_eta(y.head(n), y.segment(n, n), sc.grid, sc.config.beam.m, sc.config.beam.beta);
    return y * (radius * unit(rng) / norm(y));
}

inline Trajectory run_solver(const Scenario& sc, const ProblemSpec& spec, double t_end, double dt, long stride = 1) {
    const auto& s = sc.config.solver;
    if (s.kind == "picard") return solve_mild_picard(spec, t_end, dt, {s.tol, s.max_iter, s.window});
    SteppingOptions opt;
    opt.record_stride = stride;
    return solve_strong_stepping(spec, t_end, dt, opt);
}

struct CertificatePair {
    SemigroupEstimate estimate;
    BeamStabilityCertificate beam;
    StabilityCertificate general;  ///< with the estimated D, a = b = 1/T
};

inline CertificatePair certify_scenario(const Scenario& sc) {
    CertificatePair out;
    out.estimate = estimate_semigroup_type(sc.generator, sc.config.semigroup.t_max, sc.config.semigroup.samples);
    if (sc.config.certify.omega_source == "given") {
        out.estimate.omega = sc.config.certify.omega;
        out.estimate.D = 1.0;
    }
    const double c = sc.forcing.lipschitz_C;
    const double T = sc.config.kernel.T;
    if (!(out.estimate.omega > 0.0))
        throw DomainError("semigroup is not exponentially stable (omega = " +
                          detail::format_double(out.estimate.omega) + ")");
    out.beam = certify_beam(c, out.estimate.omega, T);
    out.general = certify_general(c, out.estimate.D, out.estimate.omega, 1.0 / T, 1.0 / T);
    return out;
}

inline std::string estimate_block(const SemigroupEstimate& e) {
    std::ostringstream out;
    out << "semigroup.omega = " << detail::format_double(e.omega) << "\n"
        << "semigroup.D = " << detail::format_double(e.D) << "\n"
        << "semigroup.method = " << to_string(e.method) << "\n";
    return out.str();
}

struct ExperimentResult {
    std::string report;
    bool passed = true;
    std::vector<std::filesystem::path> files;
};

namespace detail {

inline std::string config_echo(const ScenarioConfig& cfg) {
    std::string out;
    std::istringstream in(serialize_config(cfg));
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out += "config." + line + "\n";
    return out;
}

inline std::string verdict(const std::string& name, bool ok) {
    return "verdict." + name + " = " + (ok ? "PASS" : "FAIL") + "\n";
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::string eps_tag(double eps) { return format_double(eps); }

}  // namespace detail

// --- simulate ----------------------------------------------------------------------

inline ExperimentResult run_simulate(const Scenario& sc, const std::filesystem::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    const auto& cfg = sc.config;
    const long stride = cfg.output.stride;
    const auto traj = run_solver(sc, sc.problem(), cfg.time.t_end, cfg.time.dt, stride);
    const long csv_stride = cfg.solver.kind == "picard" ? stride : 1;

    std::ostringstream csv;
    write_trajectory_csv(csv, traj, sc.generator, cfg.output.nodes, csv_stride);
    ExperimentResult res;
    const auto csv_path = out_dir / cfg.output.trajectory;
    write_file_atomic(csv_path, csv.str());
    res.files.push_back(csv_path);

    std::ostringstream rep;
    rep << "# memorybeam simulate\n" << detail::config_echo(cfg);
    rep << "solver.name = " << traj.meta.solver << "\n"
        << "solver.steps = " << traj.meta.steps << "\n";
    if (cfg.solver.kind == "picard")
        rep << "solver.iterations = " << traj.meta.iterations << "\n"
            << "solver.windows = " << traj.meta.windows << "\n"
            << "solver.final_residual = " << detail::format_double(traj.meta.final_residual) << "\n";
    rep << "forcing.name = " << sc.forcing.name << "\n"
        << "forcing.C = " << detail::format_double(sc.forcing.lipschitz_C) << "\n"
        << "forcing.zero_at_zero = " << (sc.forcing.zero_at_zero ? "true" : "false") << "\n";
    if (sc.probe)
        rep << "forcing.probe.lipschitz_measured = " << detail::format_double(sc.probe->lipschitz_measured) << "\n";

    if (sc.forcing.lipschitz_C > 0.0) {
        try {
            const auto cert = certify_scenario(sc);
            rep << estimate_block(cert.estimate) << to_key_values(cert.beam) << to_key_values(cert.general);
        } catch (const DomainError& e) {
            rep << "certificate = n/a (" << e.what() << ")\n";
        }
    } else {
        rep << "certificate = n/a (C = 0)\n";
    }

    const auto& norm = sc.generator.norm();
    try {
        rep << "trajectory.fitted_rate = " << detail::format_double(fit_decay_rate(traj, norm)) << "\n";
    } catch (const DomainError&) {
        rep << "trajectory.fitted_rate = n/a\n";
    }
    const double e0 = norm(traj.states.front());
    const double e1 = norm(traj.states.back());
    rep << "trajectory.initial_energy = " << detail::format_double(e0 * e0) << "\n"
        << "trajectory.final_energy = " << detail::format_double(e1 * e1) << "\n"
        << "trajectory.csv = " << csv_path.filename().string() << "\n"
        << "runtime.seconds = " << detail::format_double(detail::seconds_since(start)) << "\n";
    res.report = rep.str();
    return res;
}

// --- certify -----------------------------------------------------------------------

struct CertifyOverrides {
    std::optional<double> C;
    std::optional<double> omega;
    std::optional<double> T;
};

/// Certificate report. Passes when the general certificate (estimated D, or
/// D = 1 for a given omega) is certified.
inline ExperimentResult run_certify(const ScenarioConfig& cfg, const CertifyOverrides& ov) {
    ExperimentResult res;
    std::ostringstream rep;
    rep << "# memorybeam certify\n";
    double c = ov.C.value_or(0.0);
    if (!ov.C) {
        if (cfg.forcing.kind == "linear") c = std::max(cfg.forcing.lambda, cfg.forcing.gamma * cfg.forcing.gamma);
        else if (cfg.forcing.kind == "custom") c = cfg.forcing.C;
    }
    const double T = ov.T.value_or(cfg.kernel.T);
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError(ov.C ? "--C" : "forcing", "certify needs C > 0");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError(ov.T ? "--T" : "kernel.T", "must be a positive finite number");

    SemigroupEstimate est;
    if (ov.omega || cfg.certify.omega_source == "given") {
        est.omega = ov.omega.value_or(cfg.certify.omega);
        if (!(est.omega > 0.0) || !std::isfinite(est.omega))
            throw ConfigError(ov.omega ? "--omega" : "certify.omega", "must be a positive finite number");
        est.D = 1.0;
        rep << "semigroup.omega = " << detail::format_double(est.omega) << "\nsemigroup.D = 1\nsemigroup.method = given\n";
    } else {
        validate_config(cfg);
        const auto gen = build_beam_generator(Grid(cfg.beam.n_interior), {cfg.beam.m, cfg.beam.alpha, cfg.beam.beta},
                                              {cfg.energy.bend, cfg.energy.kin, cfg.energy.eta});
        est = estimate_semigroup_type(gen, cfg.semigroup.t_max, cfg.semigroup.samples);
        rep << estimate_block(est);
        if (!(est.omega > 0.0)) {
            rep << "certificate = n/a (semigroup not exponentially stable)\n" << detail::verdict("certified", false);
            res.passed = false;
            res.report = rep.str();
            return res;
        }
    }
    const auto beam = certify_beam(c, est.omega, T);
    const auto general = certify_general(c, est.D, est.omega, 1.0 / T, 1.0 / T);
    rep << to_key_values(beam) << to_key_values(general) << detail::verdict("certified", general.certified());
    res.passed = general.certified();
    res.report = rep.str();
    return res;
}

// --- stability ---------------------------------------------------------------------

/// Envelope checks on random pairs and attractor checks on random single
/// trajectories, all drawn from the ball of radius batch.radius.
inline ExperimentResult run_stability(const Scenario& sc, const std::filesystem::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    const auto& cfg = sc.config;
    const auto& b = cfg.batch;
    if (!sc.forcing.zero_at_zero)
        throw ConfigError("forcing", "stability experiment requires f(t, 0, 0) = 0 (forcing '" + sc.forcing.name + "')");
    if (!(sc.forcing.lipschitz_C > 0.0)) throw ConfigError("forcing", "stability experiment needs C > 0");

    ExperimentResult res;
    std::ostringstream rep;
    rep << "# memorybeam stability\n" << detail::config_echo(cfg);
    const auto cert = certify_scenario(sc);
    rep << estimate_block(cert.estimate) << to_key_values(cert.beam) << to_key_values(cert.general);
    if (!cert.general.certified()) {
        rep << "stability = skipped (parameters not certified)\n" << detail::verdict("certified", false);
        res.passed = false;
        res.report = rep.str();
        return res;
    }

    double horizon = b.horizon;
    const double diameter = 2.0 * b.radius;
    for (double eps : b.epsilon)
        if (b.horizon == 0.0) horizon = std::max(horizon, predicted_time(cert.general, diameter, eps) * (1.0 + b.time_slack));
    const double dt = b.dt;
    const long steps = std::max(1L, static_cast<long>(std::ceil(horizon / dt - 1e-9)));
    const double t_end = cfg.time.t0 + dt * static_cast<double>(steps);

    std::mt19937_64 rng(cfg.seed);
    std::vector<Vector> starts;
    for (int k = 0; k < b.pairs; ++k) {
        starts.push_back(random_compatible_state(rng, sc, b.radius));
        starts.push_back(b.identical_pairs ? starts.back() : random_compatible_state(rng, sc, b.radius));
    }
    for (int k = 0; k < b.trajectories; ++k) starts.push_back(random_compatible_state(rng, sc, b.radius));

    std::vector<Trajectory> runs(starts.size());
    SteppingOptions opt;
    opt.record_stride = b.stride;
    parallel_for(starts.size(), batch_threads(), [&](std::size_t i) {
        runs[i] = solve_strong_stepping(sc.problem(starts[i]), t_end, dt, opt);
    });

    const auto& norm = sc.generator.norm();
    std::ostringstream env_csv;
    env_csv << "pair,initial_distance,max_ratio,violations,checked";
    for (double eps : b.epsilon) env_csv << ",t_pred_" << detail::eps_tag(eps) << ",t_emp_" << detail::eps_tag(eps);
    env_csv << ",ok\n";
    bool envelope_ok = true;
    bool uniform_ok = true;
    double worst_ratio = 0.0;
    for (int k = 0; k < b.pairs; ++k) {
        const auto& z = runs[static_cast<std::size_t>(2 * k)];
        const auto& y = runs[static_cast<std::size_t>(2 * k + 1)];
        const auto er = verify_envelope_on_pair(z, y, cert.general, norm, b.envelope_slack, b.epsilon);
        envelope_ok = envelope_ok && er.ok();
        worst_ratio = std::max(worst_ratio, er.max_ratio);
        env_csv << k << ',' << detail::format_double(er.initial_distance) << ',' << detail::format_double(er.max_ratio)
                << ',' << er.violations << ',' << er.checked;
        for (const auto& l : er.ladder) {
            const double uniform = predicted_time(cert.general, diameter, l.epsilon) * (1.0 + b.time_slack);
            const double elapsed = l.empirical - cfg.time.t0;
            if (er.initial_distance > 0.0 && !(elapsed <= uniform)) uniform_ok = false;
            env_csv << ',' << detail::format_double(l.predicted) << ',' << detail::format_double(l.empirical);
        }
        env_csv << ',' << (er.ok() ? "true" : "false") << '\n';
    }

    const std::vector<Trajectory> singles(runs.begin() + 2 * b.pairs, runs.end());
    AttractorReport ar;
    if (!singles.empty()) ar = verify_attractor(singles, cert.general, sc.forcing, norm, b.radius, b.epsilon,
                                                b.time_slack, b.bound_slack);
    std::ostringstream att_csv;
    att_csv << "trajectory,initial_norm,sup_norm";
    for (double eps : b.epsilon) att_csv << ",settled_" << detail::eps_tag(eps);
    att_csv << '\n';
    for (std::size_t k = 0; k < singles.size(); ++k) {
        double sup = 0.0;
        for (const auto& y : singles[k].states) sup = std::max(sup, norm(y));
        att_csv << k << ',' << detail::format_double(norm(singles[k].states.front())) << ',' << detail::format_double(sup);
        for (const auto& level : ar.levels) att_csv << ',' << detail::format_double(level.settled[k]);
        att_csv << '\n';
    }
    const auto env_path = out_dir / "envelope.csv";
    const auto att_path = out_dir / "attractor.csv";
    write_file_atomic(env_path, env_csv.str());
    write_file_atomic(att_path, att_csv.str());
    res.files = {env_path, att_path};

    const bool attractor_ok = singles.empty() || ar.ok();
    rep << "batch.horizon = " << detail::format_double(t_end - cfg.time.t0) << "\n"
        << "batch.dt = " << detail::format_double(dt) << "\n"
        << "batch.threads = " << batch_threads() << "\n"
        << "envelope.pairs = " << b.pairs << "\n"
        << "envelope.max_ratio = " << detail::format_double(worst_ratio) << "\n";
    if (!singles.empty()) {
        rep << "attractor.trajectories = " << singles.size() << "\n"
            << "attractor.diameter = " << detail::format_double(ar.diameter) << "\n"
            << "attractor.bound = " << detail::format_double(ar.bound) << "\n"
            << "attractor.sup_norm = " << detail::format_double(ar.sup_norm) << "\n";
        for (const auto& level : ar.levels) {
            double latest = 0.0;
            for (double s : level.settled) latest = std::isnan(s) || std::isnan(latest) ? NAN : std::max(latest, s);
            rep << "attractor.eps_" << detail::eps_tag(level.epsilon)
                << ".predicted = " << detail::format_double(level.predicted) << "\n"
                << "attractor.eps_" << detail::eps_tag(level.epsilon)
                << ".latest_settled = " << detail::format_double(latest) << "\n";
        }
    }
    rep << detail::verdict("certified", true) << detail::verdict("envelope", envelope_ok)
        << detail::verdict("uniformity", uniform_ok) << detail::verdict("attractor", attractor_ok)
        << "runtime.seconds = " << detail::format_double(detail::seconds_since(start)) << "\n";
    res.passed = envelope_ok && uniform_ok && attractor_ok;
    res.report = rep.str();
    return res;
}

// --- converge ----------------------------------------------------------------------

struct OrderStudy {
    std::vector<double> parameters;  ///< dt, or h
    std::vector<double> errors;      ///< successive differences
    std::vector<double> orders;      ///< log2(e_k / e_{k+1})
    bool exact = false;              ///< every difference is exactly zero
};

/// Self-convergence in time: sup over the coarse grid of ||y_dt - y_{dt/2}||
/// for dt, dt/2, ..., dt/2^{levels-1}.
inline OrderStudy temporal_study(const Scenario& sc, int levels) {
    const auto& cfg = sc.config;
    std::vector<Trajectory> runs;
    OrderStudy st;
    for (int k = 0; k < levels; ++k) {
        const double dt = cfg.time.dt / static_cast<double>(1L << k);
        st.parameters.push_back(dt);
        runs.push_back(run_solver(sc, sc.problem(), cfg.time.t_end, dt));
    }
    const auto& norm = sc.generator.norm();
    for (int k = 0; k + 1 < levels; ++k) {
        const auto& a = runs[static_cast<std::size_t>(k)];
        const auto& b = runs[static_cast<std::size_t>(k + 1)];
        double sup = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) sup = std::max(sup, norm(a.states[j] - b.states[2 * j]));
        st.errors.push_back(sup);
    }
    st.exact = std::all_of(st.errors.begin(), st.errors.end(), [](double e) { return e == 0.0; });
    for (std::size_t k = 0; k + 1 < st.errors.size(); ++k)
        st.orders.push_back(st.exact ? NAN : std::log2(st.errors[k] / st.errors[k + 1]));
    return st;
}

/// Grid refinement n, 2n+1, 4n+3, ... (h halves each level) of the lowest
/// oscillatory eigenvalues; one order per eigenvalue from the last three levels.
inline OrderStudy eigen_study(const ScenarioConfig& cfg, int levels, int count) {
    OrderStudy st;
    std::vector<std::vector<std::complex<double>>> ev;
    int n = cfg.beam.n_interior;
    for (int k = 0; k < levels; ++k) {
        const Grid grid(n);
        st.parameters.push_back(grid.h());
        ev.push_back(oscillatory_eigenvalues(
            build_beam_generator(grid, {cfg.beam.m, cfg.beam.alpha, cfg.beam.beta},
                                 {cfg.energy.bend, cfg.energy.kin, cfg.energy.eta}),
            static_cast<std::size_t>(count)));
        if (ev.back().size() < static_cast<std::size_t>(count))
            throw DomainError("grid n = " + std::to_string(n) + " has fewer than " + std::to_string(count) +
                              " oscillatory eigenvalues");
        n = 2 * n + 1;
    }
    const std::size_t L = ev.size();
    for (int j = 0; j < count; ++j) {
        const auto i = static_cast<std::size_t>(j);
        const double d1 = std::abs(ev[L - 3][i] - ev[L - 2][i]);
        const double d2 = std::abs(ev[L - 2][i] - ev[L - 1][i]);
        st.errors.push_back(d1);
        st.orders.push_back(std::log2(d1 / d2));
    }
    return st;
}

inline ExperimentResult run_converge(const Scenario& sc, const std::filesystem::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    const auto& cfg = sc.config;
    const auto& c = cfg.converge;
    auto in_band = [&](double p) { return std::abs(p - c.order_target) <= c.order_tolerance; };

    const auto temporal = temporal_study(sc, c.levels);
    const bool temporal_ok =
        temporal.exact || std::all_of(temporal.orders.begin(), temporal.orders.end(), in_band);
    const auto eigen = eigen_study(cfg, 3, c.eigen_count);
    const bool eigen_ok = std::all_of(eigen.orders.begin(), eigen.orders.end(), in_band);

    std::ostringstream csv;
    csv << "study,level,parameter,difference,order\n";
    for (std::size_t k = 0; k < temporal.parameters.size(); ++k) {
        csv << "temporal," << k << ',' << detail::format_double(temporal.parameters[k]) << ',';
        csv << (k < temporal.errors.size() ? detail::format_double(temporal.errors[k]) : "") << ',';
        csv << (k < temporal.orders.size() ? detail::format_double(temporal.orders[k]) : "") << '\n';
    }
    for (std::size_t k = 0; k < eigen.orders.size(); ++k)
        csv << "eigen," << k << ',' << detail::format_double(eigen.parameters.front()) << ','
            << detail::format_double(eigen.errors[k]) << ',' << detail::format_double(eigen.orders[k]) << '\n';
    const auto path = out_dir / "convergence.csv";
    write_file_atomic(path, csv.str());

    ExperimentResult res;
    res.files.push_back(path);
    std::ostringstream rep;
    rep << "# memorybeam converge\n" << detail::config_echo(cfg);
    for (std::size_t k = 0; k < temporal.orders.size(); ++k)
        rep << "temporal.order_" << k << " = " << detail::format_double(temporal.orders[k]) << "\n";
    rep << "temporal.exact_zero = " << (temporal.exact ? "true" : "false") << "\n";
    for (std::size_t k = 0; k < eigen.orders.size(); ++k)
        rep << "eigen.order_" << k << " = " << detail::format_double(eigen.orders[k]) << "\n";
    rep << detail::verdict("temporal_order", temporal_ok) << detail::verdict("eigen_order", eigen_ok)
        << "runtime.seconds = " << detail::format_double(detail::seconds_since(start)) << "\n";
    res.passed = temporal_ok && eigen_ok;
    res.report = rep.str();
    return res;
}

}  // namespace memorybeam
