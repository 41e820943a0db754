#pragma once

// Solvers for the semilinear integro-differential Cauchy problem
//
//   y'(t) = A y(t) + f(t, y(t), int_{t0}^t k(t, s) y(s) ds),  y(t0) = v.
//
// solve_mild_picard iterates the Duhamel map on a uniform grid;
// solve_strong_stepping integrates the system augmented with the memory
// filter (exponential kernels only) by an exponential integrator.

#include "memorybeam/errors.hpp"
#include "memorybeam/generator.hpp"
#include "memorybeam/matrix_exponential.hpp"
#include "memorybeam/memory.hpp"
#include "memorybeam/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace memorybeam {

struct ForcingFunction {
    std::string name;
    std::function<Vector(double, const Vector&, const Vector&)> eval;
    /// C with ||f(t,v1,v2) - f(t,w1,w2)|| <= C (||v1-w1|| + ||v2-w2||).
    double lipschitz_C = 0.0;
    /// C_n: Lipschitz constant in t on the window [t0, n].
    std::function<double(double)> time_lipschitz;
    /// Declares f(t, 0, 0) = 0 for all t.
    bool zero_at_zero = false;

    [[nodiscard]] Vector operator()(double t, const Vector& y, const Vector& z) const { return eval(t, y, z); }
};

inline ForcingFunction zero_forcing() {
    ForcingFunction f;
    f.name = "zero";
    f.eval = [](double, const Vector& y, const Vector&) { return Vector::Zero(y.size()).eval(); };
    f.time_lipschitz = [](double) { return 0.0; };
    f.zero_at_zero = true;
    return f;
}

/// f(t, y, z) = Fy y + Fz z, with C = max(||Fy||, ||Fz||) in the Euclidean
/// norm unless a constant is supplied.
inline ForcingFunction linear_forcing(Matrix fy, Matrix fz, std::optional<double> declared_C = std::nullopt) {
    if (fy.rows() != fy.cols() || fz.rows() != fz.cols() || fy.rows() != fz.rows())
        throw DimensionError("linear forcing", static_cast<std::size_t>(fy.rows()), static_cast<std::size_t>(fz.rows()));
    ForcingFunction f;
    f.name = "linear";
    const double c = declared_C ? *declared_C
                                : std::max(Eigen::JacobiSVD<Matrix>(fy).singularValues()(0),
                                           Eigen::JacobiSVD<Matrix>(fz).singularValues()(0));
    f.eval = [fy = std::move(fy), fz = std::move(fz)](double, const Vector& y, const Vector& z) {
        return (fy * y + fz * z).eval();
    };
    f.lipschitz_C = c;
    f.time_lipschitz = [](double) { return 0.0; };
    f.zero_at_zero = true;
    return f;
}

/// Pointwise beam nonlinearity: f(t, y, z) = (0, g(t, p_y(x_i), p_z(x_i)), 0).
inline ForcingFunction beam_forcing(const Grid& grid, std::function<double(double, double, double)> g,
                                    double declared_C, bool zero_at_zero, std::string name,
                                    std::function<double(double)> time_lipschitz = {}) {
    const int n = grid.nodes();
    ForcingFunction f;
    f.name = std::move(name);
    f.eval = [n, g = std::move(g)](double t, const Vector& y, const Vector& z) {
        Vector out = Vector::Zero(y.size());
        for (int i = 0; i < n; ++i) out(n + i) = g(t, y(i), z(i));
        return out;
    };
    f.lipschitz_C = declared_C;
    f.time_lipschitz = std::move(time_lipschitz);
    f.zero_at_zero = zero_at_zero;
    return f;
}

/// g(t, p1, p2) = -gamma^2 p1 - lambda p2 with C = max(lambda, gamma^2).
inline ForcingFunction beam_linear_forcing(const Grid& grid, double gamma, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("beam_linear_forcing: lambda must be >= 0");
    const int n = grid.nodes();
    const double g2 = gamma * gamma;
    ForcingFunction f;
    f.name = "linear(gamma=" + detail::format_double(gamma) + ",lambda=" + detail::format_double(lambda) + ")";
    f.eval = [n, g2, lambda](double, const Vector& y, const Vector& z) {
        Vector out = Vector::Zero(y.size());
        out.segment(n, n) = -g2 * y.head(n) - lambda * z.head(n);
        return out;
    };
    f.lipschitz_C = std::max(lambda, g2);
    f.time_lipschitz = [](double) { return 0.0; };
    f.zero_at_zero = true;
    return f;
}

struct ProblemSpec {
    DiscreteGenerator generator;
    ForcingFunction forcing;
    MemoryKernel kernel;
    double t0 = 0.0;
    Vector initial;

    void validate() const {
        detail::require_size("initial", static_cast<std::size_t>(generator.dim()),
                             static_cast<std::size_t>(initial.size()));
        if (!initial.allFinite()) throw DomainError("initial state has non-finite entries");
        if (!forcing.eval) throw DomainError("forcing has no evaluator");
        if (!kernel.eval) throw DomainError("kernel has no evaluator");
    }
};

struct TrajectoryMeta {
    std::string solver;
    int iterations = 0;  ///< Picard iterations summed over windows
    int windows = 0;
    std::vector<double> residuals;  ///< per-iteration sup-norm change (last window)
    double final_residual = 0.0;
    long steps = 0;
    bool stopped_early = false;
};

/// Samples on a uniform grid: times[j] = t0 + j * dt.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> memory;
    TrajectoryMeta meta;

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
    [[nodiscard]] double t_end() const { return times.empty() ? t0 : times.back(); }
};

namespace detail {

inline long grid_steps(double t0, double t_end, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be a positive finite number");
    if (!(t_end > t0)) throw DomainError("t_end must exceed t0");
    const double ratio = (t_end - t0) / dt;
    const long steps = std::lround(ratio);
    if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-8 * std::max(1.0, ratio))
        throw DomainError("(t_end - t0)/dt must be a whole number of steps");
    return steps;
}

}  // namespace detail

// --- mild solutions ------------------------------------------------------------

enum class PicardStart {
    Homogeneous,  ///< y(t) = U(t - t_w) y(t_w) on each window
    Zero,
    Constant,  ///< y(t) = y(t_w)
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 200;
    /// Window length in time units; <= 0 solves the whole horizon at once.
    double window = 1.0;
    PicardStart start = PicardStart::Homogeneous;
};

/// Mild solution by fixed-point iteration of the Duhamel formula.
///
/// On each window [t_w, t_w + L] the iteration is
///   y_{k+1}(t_j) = U(t_j - t_w) y(t_w) + int_{t_w}^{t_j} U(t_j - s) f(s, y_k(s), z_k(s)) ds
/// with the outer integral by the trapezoid rule, evaluated through the
/// recursion R_{j+1} = e^{dt A} R_j + F_{j+1}, and z_k by trapezoid
/// quadrature over the full history. Stops when the sup over the window of
/// ||y_{k+1} - y_k|| drops to tol.
inline Trajectory solve_mild_picard(const ProblemSpec& spec, double t_end, double dt, const PicardOptions& opt = {}) {
    spec.validate();
    if (!(opt.tol > 0.0)) throw DomainError("Picard tol must be > 0");
    if (opt.max_iter < 1) throw DomainError("Picard max_iter must be >= 1");
    const long steps = detail::grid_steps(spec.t0, t_end, dt);
    const auto points = static_cast<std::size_t>(steps + 1);
    const auto dim = spec.generator.dim();
    const auto& norm = spec.generator.norm();
    const Matrix e_dt = expm(dt * spec.generator.matrix());

    Trajectory traj;
    traj.t0 = spec.t0;
    traj.dt = dt;
    traj.meta.solver = "picard";
    traj.meta.steps = steps;
    traj.times.resize(points);
    for (std::size_t j = 0; j < points; ++j) traj.times[j] = spec.t0 + dt * static_cast<double>(j);
    traj.states.assign(points, Vector::Zero(dim));
    traj.memory.assign(points, Vector::Zero(dim));
    traj.states[0] = spec.initial;

    const auto& t = traj.times;
    auto& y = traj.states;
    auto& z = traj.memory;
    const auto window_steps = opt.window > 0.0 ? std::max<long>(1, std::lround(opt.window / dt)) : steps;

    for (long w0 = 0; w0 < steps; w0 += window_steps) {
        const long w1 = std::min(steps, w0 + window_steps);
        const auto j0 = static_cast<std::size_t>(w0);
        const auto j1 = static_cast<std::size_t>(w1);
        const std::size_t len = j1 - j0;
        ++traj.meta.windows;

        std::vector<Vector> homogeneous(len + 1);
        homogeneous[0] = y[j0];
        for (std::size_t k = 0; k < len; ++k) homogeneous[k + 1] = e_dt * homogeneous[k];

        for (std::size_t j = j0 + 1; j <= j1; ++j) {
            switch (opt.start) {
                case PicardStart::Homogeneous: y[j] = homogeneous[j - j0]; break;
                case PicardStart::Zero: y[j].setZero(); break;
                case PicardStart::Constant: y[j] = y[j0]; break;
            }
        }

        // Memory contribution of samples 0..j0, which stay fixed in this window.
        std::vector<Vector> z_fixed(len + 1, Vector::Zero(dim));
        for (std::size_t j = std::max<std::size_t>(j0, 1); j <= j1; ++j) {
            Vector acc = Vector::Zero(dim);
            for (std::size_t i = 0; i <= j0; ++i) {
                const double wgt = (i == 0 || i == j) ? 0.5 : 1.0;
                acc.noalias() += (wgt * dt * spec.kernel(t[j], t[i])) * y[i];
            }
            z_fixed[j - j0] = std::move(acc);
        }
        // k(t_j, t_i) for j0 < i <= j <= j1, cached when affordable.
        const bool cache = len * (len + 1) / 2 <= 4'000'000;
        std::vector<double> kcache;
        if (cache) {
            kcache.reserve(len * (len + 1) / 2);
            for (std::size_t j = j0 + 1; j <= j1; ++j)
                for (std::size_t i = j0 + 1; i <= j; ++i) kcache.push_back(spec.kernel(t[j], t[i]));
        }
        auto compute_memory = [&] {
            std::size_t c = 0;
            for (std::size_t j = j0; j <= j1; ++j) {
                Vector acc = z_fixed[j - j0];
                for (std::size_t i = j0 + 1; i <= j; ++i) {
                    const double kv = cache ? kcache[c++] : spec.kernel(t[j], t[i]);
                    const double wgt = (i == j) ? 0.5 : 1.0;
                    acc.noalias() += (wgt * dt * kv) * y[i];
                }
                z[j] = std::move(acc);
            }
        };

        std::vector<double> residuals;
        std::vector<Vector> forcing(len + 1);
        bool converged = false;
        for (int iter = 1; iter <= opt.max_iter; ++iter) {
            compute_memory();
            for (std::size_t j = j0; j <= j1; ++j) forcing[j - j0] = spec.forcing(t[j], y[j], z[j]);
            Vector running = 0.5 * forcing[0];
            double change = 0.0;
            for (std::size_t k = 1; k <= len; ++k) {
                running = e_dt * running + forcing[k];
                Vector next = homogeneous[k] + dt * (running - 0.5 * forcing[k]);
                change = std::max(change, norm(next - y[j0 + k]));
                y[j0 + k] = std::move(next);
            }
            residuals.push_back(change);
            ++traj.meta.iterations;
            if (!std::isfinite(change)) break;
            if (change <= opt.tol) {
                converged = true;
                break;
            }
        }
        traj.meta.residuals = residuals;
        traj.meta.final_residual = residuals.empty() ? 0.0 : residuals.back();
        if (!converged) {
            throw ConvergenceError("Picard iteration did not reach tol " + detail::format_double(opt.tol) +
                                       " on window [" + detail::format_double(t[j0]) + ", " +
                                       detail::format_double(t[j1]) + "] after " + std::to_string(residuals.size()) +
                                       " iterations (last change " +
                                       detail::format_double(residuals.empty() ? 0.0 : residuals.back()) +
                                       "); reduce dt or the window length",
                                   residuals);
        }
        compute_memory();
    }
    return traj;
}

// --- strong solutions ------------------------------------------------------------

struct SteppingOptions {
    /// Keep every k-th step (the final step is always kept).
    long record_stride = 1;
    /// Optional early stop, evaluated after each step on (t, y).
    std::function<bool(double, const Vector&)> stop;
    /// Reject beam initial data outside the generator's domain.
    bool check_compatibility = true;
};

inline constexpr double kCompatibilityTolerance = 1e-8;

/// Strong solution of the system augmented with the memory filter,
///   Y = (y, z),  Y' = L Y + (f(t, y, z), 0),  L = [[A, 0], [I/T, -I/T]],
/// by the exponential trapezoid rule
///   Y_p     = E (Y_n + dt N_n)
///   Y_{n+1} = E Y_n + dt/2 (E N_n + N(t_{n+1}, Y_p)),   E = exp(dt L).
inline Trajectory solve_strong_stepping(const ProblemSpec& spec, double t_end, double dt,
                                        const SteppingOptions& opt = {}) {
    spec.validate();
    if (!spec.kernel.exp_width)
        throw DomainError("solve_strong_stepping requires an exponential kernel (memory filter reduction)");
    if (opt.record_stride < 1) throw DomainError("record_stride must be >= 1");
    const long steps = detail::grid_steps(spec.t0, t_end, dt);
    if (opt.check_compatibility && spec.generator.beam()) {
        const auto& b = *spec.generator.beam();
        const auto defect =
            compatibility_defect(unflatten(spec.initial, b.grid), b.grid, b.params.m, b.params.beta);
        if (std::abs(defect.defect) > kCompatibilityTolerance * defect.scale)
            throw DomainError("initial datum violates eta = -p_xxx(1) + (m/beta) q(1) (defect " +
                              detail::format_double(defect.defect) + ")");
    }

    const auto d = spec.generator.dim();
    const double width = *spec.kernel.exp_width;
    Matrix aug = Matrix::Zero(2 * d, 2 * d);
    aug.topLeftCorner(d, d) = spec.generator.matrix();
    aug.bottomLeftCorner(d, d) = Matrix::Identity(d, d) / width;
    aug.bottomRightCorner(d, d) = -Matrix::Identity(d, d) / width;
    const Matrix e_dt = expm(dt * aug);
    const Matrix e_left = e_dt.leftCols(d);

    Trajectory traj;
    traj.t0 = spec.t0;
    traj.dt = dt * static_cast<double>(opt.record_stride);
    traj.meta.solver = "exponential-trapezoid";

    Vector state(2 * d);
    state.head(d) = spec.initial;
    state.tail(d).setZero();
    auto record = [&](double time) {
        traj.times.push_back(time);
        traj.states.emplace_back(state.head(d));
        traj.memory.emplace_back(state.tail(d));
    };
    record(spec.t0);

    for (long j = 0; j < steps; ++j) {
        const double t = spec.t0 + dt * static_cast<double>(j);
        const double t_next = spec.t0 + dt * static_cast<double>(j + 1);
        const Vector forcing = spec.forcing(t, state.head(d), state.tail(d));
        const Vector e_state = e_dt * state;
        const Vector e_forcing = e_left * forcing;
        const Vector predicted = e_state + dt * e_forcing;
        const Vector forcing_next = spec.forcing(t_next, predicted.head(d), predicted.tail(d));
        state = e_state + 0.5 * dt * e_forcing;
        state.head(d) += 0.5 * dt * forcing_next;
        traj.meta.steps = j + 1;

        const bool stop = opt.stop && opt.stop(t_next, state.head(d));
        if ((j + 1) % opt.record_stride == 0 || j + 1 == steps || stop) {
            if ((j + 1) % opt.record_stride != 0 && !traj.times.empty()) traj.dt = 0.0;  // irregular tail
            record(t_next);
        }
        if (stop) {
            traj.meta.stopped_early = true;
            break;
        }
    }
    if (traj.dt == 0.0) traj.dt = traj.times.size() > 1 ? traj.times[1] - traj.times[0] : dt;
    return traj;
}

/// Max over interior samples of ||(y_{j+1} - y_{j-1})/(2 dt) - (A y_j + f_j)||.
/// Needs consecutive samples (record_stride 1).
inline double strong_residual(const ProblemSpec& spec, const Trajectory& traj) {
    if (traj.size() < 3) throw DomainError("strong_residual: need at least three samples");
    const auto& a = spec.generator.matrix();
    double worst = 0.0;
    for (std::size_t j = 1; j + 1 < traj.size(); ++j) {
        const double h2 = traj.times[j + 1] - traj.times[j - 1];
        const Vector derivative = (traj.states[j + 1] - traj.states[j - 1]) / h2;
        const Vector rhs = a * traj.states[j] + spec.forcing(traj.times[j], traj.states[j], traj.memory[j]);
        worst = std::max(worst, spec.generator.norm()(derivative - rhs));
    }
    return worst;
}

/// sup_j ||a_j - b_j|| over two trajectories on the same grid.
inline double sup_distance(const Trajectory& a, const Trajectory& b, const EnergyNorm& norm) {
    detail::require_size("trajectory length", a.size(), b.size());
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (std::abs(a.times[j] - b.times[j]) > 1e-9 * std::max(1.0, std::abs(a.times[j])))
            throw DomainError("trajectories do not share a time grid");
        worst = std::max(worst, norm(a.states[j] - b.states[j]));
    }
    return worst;
}

// --- continuous dependence ---------------------------------------------------------

enum class SolverKind { Picard, Stepping };

struct DependencePair {
    double initial_distance = 0.0;
    double sup_distance = 0.0;
    double ratio = 0.0;
    bool skipped = false;  ///< identical initial data
    bool ok = false;
};

struct DependenceReport {
    double horizon = 0.0;
    double M = 0.0;  ///< sampled sup ||U(tau)||, tau in [0, horizon]
    double K = 0.0;  ///< sampled sup k on the window triangle
    double C = 0.0;
    double gronwall_constant = 0.0;
    std::vector<DependencePair> pairs;

    [[nodiscard]] bool all_ok() const {
        return std::all_of(pairs.begin(), pairs.end(), [](const DependencePair& p) { return p.ok; });
    }
};

inline double sampled_semigroup_sup(const DiscreteGenerator& gen, double horizon, int samples = 65) {
    const Matrix e_step = expm((horizon / (samples - 1)) * gen.matrix());
    Matrix u = Matrix::Identity(gen.dim(), gen.dim());
    double sup = 0.0;
    for (int k = 0; k < samples; ++k) {
        sup = std::max(sup, gen.norm().operator_norm(u));
        u = u * e_step;
    }
    return sup;
}

inline double sampled_kernel_sup(const MemoryKernel& kernel, double t0, double t_end, int per_axis = 65) {
    double sup = 0.0;
    for (int a = 0; a < per_axis; ++a) {
        const double t = t0 + (t_end - t0) * a / (per_axis - 1);
        for (int b = 0; b <= a; ++b) sup = std::max(sup, kernel(t, t0 + (t_end - t0) * b / (per_axis - 1)));
    }
    return sup;
}

/// Solves from the base datum and from each perturbed datum, and compares
/// sup_t ||y_v(t) - y_w(t)|| / ||v - w|| with the Gronwall constant
/// M e^{M C (1 + K H) H}, H = t_end - t0.
inline DependenceReport continuous_dependence_probe(const ProblemSpec& spec, const std::vector<Vector>& perturbations,
                                                    double t_end, double dt, SolverKind solver = SolverKind::Picard,
                                                    const PicardOptions& picard = {}) {
    spec.validate();
    for (const auto& w : perturbations)
        detail::require_size("perturbation", static_cast<std::size_t>(spec.generator.dim()),
                             static_cast<std::size_t>(w.size()));
    auto solve = [&](const Vector& v) {
        ProblemSpec s = spec;
        s.initial = v;
        return solver == SolverKind::Picard ? solve_mild_picard(s, t_end, dt, picard)
                                            : solve_strong_stepping(s, t_end, dt);
    };
    DependenceReport rep;
    rep.horizon = t_end - spec.t0;
    rep.M = sampled_semigroup_sup(spec.generator, rep.horizon);
    rep.K = sampled_kernel_sup(spec.kernel, spec.t0, t_end);
    rep.C = spec.forcing.lipschitz_C;
    rep.gronwall_constant = rep.M * std::exp(rep.M * rep.C * (1.0 + rep.K * rep.horizon) * rep.horizon);

    const Trajectory base = solve(spec.initial);
    const auto& norm = spec.generator.norm();
    for (const auto& w : perturbations) {
        DependencePair pair;
        pair.initial_distance = norm(w - spec.initial);
        const Trajectory other = solve(w);
        pair.sup_distance = sup_distance(base, other, norm);
        if (pair.initial_distance == 0.0) {
            pair.skipped = true;
            pair.ok = pair.sup_distance == 0.0;
        } else {
            pair.ratio = pair.sup_distance / pair.initial_distance;
            pair.ok = pair.ratio <= rep.gronwall_constant;
        }
        rep.pairs.push_back(pair);
    }
    return rep;
}

// --- forcing probes ------------------------------------------------------------------

struct ForcingProbe {
    int samples = 0;
    double lipschitz_measured = 0.0;
    bool lipschitz_ok = false;
    double time_lipschitz_measured = 0.0;
    double time_lipschitz_declared = std::numeric_limits<double>::quiet_NaN();
    bool time_lipschitz_ok = true;
    bool zero_at_zero_holds = true;  ///< f(t, 0, 0) == 0 at every sampled t
    bool zero_at_zero_ok = true;     ///< the declaration is consistent with the samples
};

/// Sampled check of the Lipschitz constants and of f(t, 0, 0) = 0. Directions
/// are drawn uniformly in the norm's own geometry (y = R^{-1} xi, xi Gaussian).
inline ForcingProbe probe_forcing(const ForcingFunction& f, const EnergyNorm& norm, double t0, double t1, int samples,
                                  std::uint64_t seed = 7, double amplitude = 1.0) {
    if (samples < 1) throw DomainError("probe_forcing: samples must be >= 1");
    ForcingProbe rep;
    rep.samples = samples;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto d = norm.dim();
    auto draw = [&] {
        Vector xi(d);
        for (Eigen::Index i = 0; i < d; ++i) xi(i) = gauss(rng);
        xi *= amplitude / std::max(xi.norm(), 1e-300);
        return Vector(norm.factor().triangularView<Eigen::Upper>().solve(xi));
    };
    if (f.time_lipschitz) rep.time_lipschitz_declared = f.time_lipschitz(t1);
    for (int k = 0; k < samples; ++k) {
        const double t = t0 + (t1 - t0) * unit(rng);
        const Vector y1 = draw(), y2 = draw(), w1 = draw(), w2 = draw();
        const double denom = norm(y1 - w1) + norm(y2 - w2);
        if (denom > 0.0) rep.lipschitz_measured = std::max(rep.lipschitz_measured, norm(f(t, y1, y2) - f(t, w1, w2)) / denom);
        const double s = t0 + (t1 - t0) * unit(rng);
        if (s != t) rep.time_lipschitz_measured =
            std::max(rep.time_lipschitz_measured, norm(f(t, y1, y2) - f(s, y1, y2)) / std::abs(t - s));
        const Vector at_zero = f(t, Vector::Zero(d), Vector::Zero(d));
        if (at_zero.cwiseAbs().maxCoeff() != 0.0) rep.zero_at_zero_holds = false;
    }
    rep.lipschitz_ok = rep.lipschitz_measured <= f.lipschitz_C * (1.0 + 1e-9);
    if (f.time_lipschitz) rep.time_lipschitz_ok = rep.time_lipschitz_measured <= rep.time_lipschitz_declared * (1.0 + 1e-9) + 1e-12;
    rep.zero_at_zero_ok = !f.zero_at_zero || rep.zero_at_zero_holds;
    return rep;
}

// --- trajectory CSV ------------------------------------------------------------------
//
// Columns: t, energy, eta, p_1..p_k, q_1..q_k, z_norm
// Output node j (1-based) is grid node round(j N / k), so p_k is the free end.
// energy is y^T G y of the generator's norm; z_norm is the norm of the memory.

inline std::vector<int> output_nodes(const Grid& grid, int k) {
    const int n = grid.nodes();
    if (k <= 0 || k > n) k = n;
    std::vector<int> idx;
    for (int j = 1; j <= k; ++j) idx.push_back(static_cast<int>(std::lround(static_cast<double>(j) * n / k)));
    return idx;
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const DiscreteGenerator& gen,
                                 int output_node_count = 0, long time_stride = 1) {
    const auto& grid = gen.beam_layout().grid;
    const auto nodes = output_nodes(grid, output_node_count);
    const int n = grid.nodes();
    out << "t,energy,eta";
    for (std::size_t j = 1; j <= nodes.size(); ++j) out << ",p_" << j;
    for (std::size_t j = 1; j <= nodes.size(); ++j) out << ",q_" << j;
    out << ",z_norm\n";
    const auto stride = static_cast<std::size_t>(std::max<long>(1, time_stride));
    for (std::size_t r = 0; r < traj.size(); ++r) {
        if (r % stride != 0 && r + 1 != traj.size()) continue;
        const Vector& y = traj.states[r];
        const double e = gen.norm()(y);
        out << detail::format_double(traj.times[r]) << ',' << detail::format_double(e * e) << ','
            << detail::format_double(y(2 * n));
        for (int i : nodes) out << ',' << detail::format_double(y(i - 1));
        for (int i : nodes) out << ',' << detail::format_double(y(n + i - 1));
        const double zn = r < traj.memory.size() ? gen.norm()(traj.memory[r]) : 0.0;
        out << ',' << detail::format_double(zn) << '\n';
    }
}

}  // namespace memorybeam
