#pragma once

// Stability certificates for y' = Ay + f(t, y, int k y) and their
// verification on computed trajectories.
//
// With ||U(t)|| <= D e^{-omega t}, a C-Lipschitz forcing and a kernel bounded
// by a e^{-b (t - s)}, two mild solutions satisfy
//   ||z(t) - y(t)|| <= D ||z(t0) - y(t0)|| e^{kappa (t - t0)},
//   kappa = C D (1 + a/(b - omega)) - omega,
// whenever C < omega/D, b > omega and a < (b - omega)(omega - C D)/(C D).

#include "memorybeam/detail/text.hpp"
#include "memorybeam/errors.hpp"
#include "memorybeam/memory.hpp"
#include "memorybeam/solver.hpp"
#include "memorybeam/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace memorybeam {

struct StabilityCertificate {
    double C = 0.0;
    double D = 1.0;
    double omega = 0.0;
    double a = 0.0;
    double b = 0.0;

    [[nodiscard]] bool cond1() const { return C < omega / D; }
    [[nodiscard]] bool cond2() const { return b > omega; }
    [[nodiscard]] double cond3_bound() const { return (b - omega) * (omega - C * D) / (C * D); }
    [[nodiscard]] bool cond3() const { return a < cond3_bound(); }
    [[nodiscard]] double decay_exponent() const { return C * D * (1.0 + a / (b - omega)) - omega; }
    [[nodiscard]] bool certified() const { return cond1() && cond2() && cond3(); }
};

struct BeamStabilityCertificate {
    double C = 0.0;
    double omega = 0.0;
    double T = 0.0;

    [[nodiscard]] bool cond_C() const { return C < omega / 2.0; }
    [[nodiscard]] double T_bound() const { return (omega - 2.0 * C) / (omega * (omega - C)); }
    [[nodiscard]] bool cond_T() const { return T < T_bound(); }
    [[nodiscard]] bool certified() const { return cond_C() && cond_T(); }
    /// The general certificate with D = 1 and a = b = 1/T.
    [[nodiscard]] StabilityCertificate general() const { return {C, 1.0, omega, 1.0 / T, 1.0 / T}; }
};

namespace detail {

inline void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError(std::string(name) + " must be a positive finite number, got " + format_double(v));
}

inline bool near(double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), std::abs(y)); }

}  // namespace detail

inline StabilityCertificate certify_general(double C, double D, double omega, double a, double b) {
    detail::require_positive(C, "C");
    detail::require_positive(D, "D");
    detail::require_positive(omega, "omega");
    detail::require_positive(a, "a");
    detail::require_positive(b, "b");
    if (D < 1.0) throw DomainError("D must be >= 1, got " + detail::format_double(D));
    return {C, D, omega, a, b};
}

/// Raised when the beam conditions and the general conditions disagree away
/// from a boundary.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

inline BeamStabilityCertificate certify_beam(double C, double omega, double T) {
    detail::require_positive(C, "C");
    detail::require_positive(omega, "omega");
    detail::require_positive(T, "T");
    const BeamStabilityCertificate beam{C, omega, T};
    const auto gen = beam.general();
    if (beam.certified() != gen.certified()) {
        // Both sides compare against rounded bounds; only a disagreement
        // away from every boundary is a real inconsistency.
        const bool boundary = detail::near(C, omega / 2.0) || detail::near(T, beam.T_bound()) ||
                              detail::near(C, omega) || detail::near(gen.b, omega) ||
                              detail::near(gen.a, gen.cond3_bound());
        if (!boundary)
            throw ConsistencyError("beam and general certificates disagree for C=" + detail::format_double(C) +
                                   ", omega=" + detail::format_double(omega) + ", T=" + detail::format_double(T));
    }
    return beam;
}

/// D dist0 e^{kappa (t - t0)}.
inline double decay_envelope(const StabilityCertificate& cert, double dist0, double t, double t0) {
    detail::require_positive(cert.C, "C");
    detail::require_positive(cert.D, "D");
    detail::require_positive(cert.omega, "omega");
    detail::require_positive(cert.a, "a");
    detail::require_positive(cert.b, "b");
    if (!(dist0 >= 0.0)) throw DomainError("dist0 must be >= 0");
    if (t < t0) throw DomainError("decay_envelope: t must be >= t0");
    if (dist0 == 0.0) return 0.0;
    return cert.D * dist0 * std::exp(cert.decay_exponent() * (t - t0));
}

/// log(D dist/eps)/|kappa|: time after which the envelope stays below eps.
/// NaN for uncertified certificates; 0 when the envelope starts below eps.
inline double predicted_time(const StabilityCertificate& cert, double dist, double eps) {
    if (!cert.certified()) return std::numeric_limits<double>::quiet_NaN();
    if (!(eps > 0.0)) throw DomainError("epsilon must be > 0");
    const double ratio = cert.D * dist / eps;
    if (ratio <= 1.0) return 0.0;
    return std::log(ratio) / -cert.decay_exponent();
}

/// First grid time after which values stay <= eps; NaN if the last one is above.
inline double settling_time(const std::vector<double>& times, const std::vector<double>& values, double eps) {
    if (values.empty() || values.back() > eps) return std::numeric_limits<double>::quiet_NaN();
    std::size_t j = values.size();
    while (j > 0 && values[j - 1] <= eps) --j;
    return times[j];
}

struct LadderEntry {
    double epsilon = 0.0;
    double predicted = std::numeric_limits<double>::quiet_NaN();
    double empirical = std::numeric_limits<double>::quiet_NaN();
};

struct EnvelopeReport {
    double initial_distance = 0.0;
    double max_ratio = 0.0;  ///< max ||z - y|| / envelope over grid times with envelope > 0
    int violations = 0;
    int checked = 0;
    double slack = 0.0;
    std::vector<LadderEntry> ladder;

    [[nodiscard]] bool ok() const { return violations == 0; }
};

inline EnvelopeReport verify_envelope_on_pair(const Trajectory& z, const Trajectory& y, const StabilityCertificate& cert,
                                              const EnergyNorm& norm, double slack = 0.05,
                                              const std::vector<double>& eps_ladder = {}) {
    if (!(slack >= 0.0)) throw DomainError("slack must be >= 0");
    detail::require_size("trajectory length", z.size(), y.size());
    if (z.size() == 0) throw DomainError("verify_envelope_on_pair: empty trajectories");
    std::vector<double> diffs(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (std::abs(z.times[j] - y.times[j]) > 1e-9 * std::max(1.0, std::abs(z.times[j])))
            throw DomainError("verify_envelope_on_pair: trajectories do not share a time grid");
        diffs[j] = norm(z.states[j] - y.states[j]);
    }
    EnvelopeReport rep;
    rep.slack = slack;
    rep.initial_distance = diffs.front();
    const double t0 = z.times.front();
    for (std::size_t j = 0; j < diffs.size(); ++j) {
        const double env = decay_envelope(cert, rep.initial_distance, z.times[j], t0);
        ++rep.checked;
        if (env > 0.0) rep.max_ratio = std::max(rep.max_ratio, diffs[j] / env);
        if (diffs[j] > env * (1.0 + slack)) ++rep.violations;
    }
    for (double eps : eps_ladder)
        rep.ladder.push_back({eps, predicted_time(cert, rep.initial_distance, eps), settling_time(z.times, diffs, eps)});
    return rep;
}

struct AttractorReport {
    double diameter = 0.0;
    double bound = 0.0;     ///< D diam(Omega)
    double sup_norm = 0.0;  ///< over all trajectories and times
    bool bounded = false;
    double bound_slack = 0.0;
    double time_slack = 0.0;

    struct Level {
        double epsilon = 0.0;
        double predicted = 0.0;  ///< log(D diam / eps)/|kappa|
        double deadline = 0.0;   ///< predicted (1 + time_slack)
        std::vector<double> settled;  ///< per trajectory; NaN when never below eps
        bool ok = false;
    };
    std::vector<Level> levels;

    [[nodiscard]] bool ok() const {
        return bounded && std::all_of(levels.begin(), levels.end(), [](const Level& l) { return l.ok; });
    }
};

/// Checks that every trajectory settles below each epsilon by the predicted
/// time and stays within D diam(Omega), Omega the ball of the given radius.
inline AttractorReport verify_attractor(const std::vector<Trajectory>& trajectories, const StabilityCertificate& cert,
                                        const ForcingFunction& forcing, const EnergyNorm& norm, double radius,
                                        const std::vector<double>& eps_ladder, double time_slack = 0.1,
                                        double bound_slack = 0.05) {
    if (!forcing.zero_at_zero)
        throw DomainError("verify_attractor requires a forcing with f(t, 0, 0) = 0 (forcing '" + forcing.name + "')");
    detail::require_positive(radius, "radius");
    if (!cert.certified()) throw DomainError("verify_attractor requires a certified certificate");
    AttractorReport rep;
    rep.diameter = 2.0 * radius;
    rep.bound = cert.D * rep.diameter;
    rep.time_slack = time_slack;
    rep.bound_slack = bound_slack;

    std::vector<std::vector<double>> norms;
    for (const auto& tr : trajectories) {
        if (tr.size() == 0) throw DomainError("verify_attractor: empty trajectory");
        std::vector<double> ns(tr.size());
        for (std::size_t j = 0; j < tr.size(); ++j) ns[j] = norm(tr.states[j]);
        if (ns.front() > radius * (1.0 + 1e-12))
            throw DomainError("verify_attractor: initial state outside the ball of radius " +
                              detail::format_double(radius));
        rep.sup_norm = std::max(rep.sup_norm, *std::max_element(ns.begin(), ns.end()));
        norms.push_back(std::move(ns));
    }
    rep.bounded = rep.sup_norm <= rep.bound * (1.0 + bound_slack);

    for (double eps : eps_ladder) {
        AttractorReport::Level level;
        level.epsilon = eps;
        level.predicted = predicted_time(cert, rep.diameter, eps);
        level.deadline = level.predicted * (1.0 + time_slack);
        level.ok = true;
        for (std::size_t k = 0; k < trajectories.size(); ++k) {
            const auto& tr = trajectories[k];
            const double settled = settling_time(tr.times, norms[k], eps);
            level.settled.push_back(settled);
            const double elapsed = settled - tr.times.front();
            // A run that stops before the deadline must already have settled.
            if (std::isnan(settled) || elapsed > level.deadline) level.ok = false;
        }
        rep.levels.push_back(std::move(level));
    }
    return rep;
}

/// Least-squares slope of log ||y(t)|| over [t0 + t_skip, t_end], ignoring
/// samples below 1e3 machine epsilon times the initial norm.
inline double fit_decay_rate(const Trajectory& traj, const EnergyNorm& norm, double t_skip = 0.0) {
    if (traj.size() < 3) throw DomainError("fit_decay_rate: need at least three samples");
    const double t0 = traj.times.front();
    if (!(t_skip >= 0.0) || t0 + t_skip >= traj.times.back())
        throw DomainError("fit_decay_rate: t_skip must lie inside the trajectory span");
    const double initial = norm(traj.states.front());
    const double final_norm = norm(traj.states.back());
    if (!(final_norm < initial)) throw DomainError("fit_decay_rate: trajectory does not decay");
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * initial;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (std::size_t j = 0; j < traj.size(); ++j) {
        if (traj.times[j] < t0 + t_skip) continue;
        const double v = norm(traj.states[j]);
        if (!(v >= floor) || v == 0.0) continue;
        const double ly = std::log(v);
        sx += traj.times[j];
        sy += ly;
        sxx += traj.times[j] * traj.times[j];
        sxy += traj.times[j] * ly;
        ++count;
    }
    const double denom = count * sxx - sx * sx;
    if (count < 3 || denom <= 0.0) throw DomainError("fit_decay_rate: fewer than three usable samples");
    return (count * sxy - sx * sy) / denom;
}

struct KernelLemmaReport {
    int samples = 0;
    int violations = 0;
    double max_ratio = 0.0;          ///< max integral / (a/(b - omega))
    double max_closed_form_gap = 0.0;  ///< max |integral - closed-form majorant| (exp kernel only)
};

/// Samples (s, t, omega < b) and checks int_s^t k(sigma, s) e^{omega(sigma - s)} d sigma < a/(b - omega).
/// Lags are drawn so that (b - omega)(t - s) <= max_decay.
inline KernelLemmaReport check_kernel_lemma(const MemoryKernel& kernel, int samples, std::uint64_t seed = 11,
                                            double omega_min = 0.0, double max_decay = 15.0, double s_max = 10.0) {
    const double a = kernel.bound_a, b = kernel.bound_b;
    detail::require_positive(a, "kernel a");
    detail::require_positive(b, "kernel b");
    if (!(omega_min < b)) throw DomainError("check_kernel_lemma: omega_min must be below b");
    KernelLemmaReport rep;
    rep.samples = samples;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < samples; ++k) {
        const double omega = omega_min + (b - omega_min) * 0.999 * unit(rng);
        const double s = s_max * unit(rng);
        const double lag = max_decay / (b - omega) * unit(rng);
        const double integral = weighted_kernel_integral(kernel, s, s + lag, omega);
        const double limit = a / (b - omega);
        rep.max_ratio = std::max(rep.max_ratio, integral / limit);
        if (!(integral < limit)) ++rep.violations;
        if (kernel.exp_width)
            rep.max_closed_form_gap = std::max(rep.max_closed_form_gap,
                                               std::abs(integral - exponential_bound_integral(a, b, omega, lag)));
    }
    return rep;
}

// --- key-value serialization -----------------------------------------------------

inline std::string to_key_values(const StabilityCertificate& c, const std::string& prefix = "certificate") {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    auto f = [](double v) { return detail::format_double(v); };
    std::string out;
    out += prefix + ".C = " + f(c.C) + "\n";
    out += prefix + ".D = " + f(c.D) + "\n";
    out += prefix + ".omega = " + f(c.omega) + "\n";
    out += prefix + ".a = " + f(c.a) + "\n";
    out += prefix + ".b = " + f(c.b) + "\n";
    out += prefix + ".cond1 = " + b(c.cond1()) + "\n";
    out += prefix + ".cond2 = " + b(c.cond2()) + "\n";
    out += prefix + ".cond3 = " + b(c.cond3()) + "\n";
    out += prefix + ".cond3_bound = " + f(c.cond3_bound()) + "\n";
    out += prefix + ".decay_exponent = " + f(c.decay_exponent()) + "\n";
    out += prefix + ".certified = " + b(c.certified()) + "\n";
    return out;
}

inline std::string to_key_values(const BeamStabilityCertificate& c, const std::string& prefix = "beam_certificate") {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    auto f = [](double v) { return detail::format_double(v); };
    std::string out;
    out += prefix + ".C = " + f(c.C) + "\n";
    out += prefix + ".omega = " + f(c.omega) + "\n";
    out += prefix + ".T = " + f(c.T) + "\n";
    out += prefix + ".cond_C = " + b(c.cond_C()) + "\n";
    out += prefix + ".T_bound = " + f(c.T_bound()) + "\n";
    out += prefix + ".cond_T = " + b(c.cond_T()) + "\n";
    out += prefix + ".certified = " + b(c.certified()) + "\n";
    return out;
}

}  // namespace memorybeam
