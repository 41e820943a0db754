#pragma once

// Fading-memory kernels k(t, s) on t >= s and the memory term
// z(t) = int_{t0}^t k(t, s) y(s) ds.
//
// For the exponential kernel k(t, s) = e^{-(t-s)/T}/T the memory obeys the
// filter ODE z' = (y - z)/T with z(t0) = 0, so time-stepping solvers carry z
// as extra state instead of storing the history.

#include "memorybeam/errors.hpp"
#include "memorybeam/state_space.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace memorybeam {

struct MemoryKernel {
    std::string name;
    std::function<double(double, double)> eval;
    /// k(t, s) <= bound_a * exp(-bound_b (t - s)).
    double bound_a = 0.0;
    double bound_b = 0.0;
    /// Lipschitz constant in t on the window [t0, n]; empty when undeclared.
    std::function<double(double)> lip_t;
    /// Set for the exponential kernel: its width T.
    std::optional<double> exp_width;
    /// Optional log k(t, s), used where k itself would underflow.
    std::function<double(double, double)> log_eval;

    [[nodiscard]] double operator()(double t, double s) const { return eval(t, s); }
};

inline MemoryKernel exp_kernel(double width) {
    if (!(width > 0.0) || !std::isfinite(width)) throw DomainError("exp_kernel: T must be a positive finite number");
    const double inv = 1.0 / width;
    MemoryKernel k;
    k.name = "exp(T=" + detail::format_double(width) + ")";
    k.eval = [inv](double t, double s) { return std::exp(-(t - s) * inv) * inv; };
    k.bound_a = inv;
    k.bound_b = inv;
    k.lip_t = [inv](double) { return inv * inv; };
    k.exp_width = width;
    k.log_eval = [inv, lw = std::log(width)](double t, double s) { return -(t - s) * inv - lw; };
    return k;
}

/// k(t, s) = value with user-declared (a, b). Useful for exercising the
/// bound check; it never satisfies an exponential bound with b > 0.
inline MemoryKernel constant_kernel(double value, double declared_a, double declared_b) {
    MemoryKernel k;
    k.name = "constant(" + detail::format_double(value) + ")";
    k.eval = [value](double, double) { return value; };
    k.bound_a = declared_a;
    k.bound_b = declared_b;
    k.lip_t = [](double) { return 0.0; };
    return k;
}

/// Kernel identically zero; memory never contributes.
inline MemoryKernel zero_kernel() {
    MemoryKernel k;
    k.name = "zero";
    k.eval = [](double, double) { return 0.0; };
    k.bound_a = std::numeric_limits<double>::min();
    k.bound_b = 1.0;
    k.lip_t = [](double) { return 0.0; };
    return k;
}

/// Trapezoid approximation of int_{t0}^t k(t, s) y(s) ds from samples
/// ys[j] = y(t0 + j dt). A final partial interval uses linear interpolation.
inline Vector memory_integral_quadrature(const MemoryKernel& kernel, double t0, double dt,
                                         std::span<const Vector> ys, double t) {
    if (ys.empty()) throw DomainError("memory_integral_quadrature: empty trajectory");
    if (!(dt > 0.0)) throw DomainError("memory_integral_quadrature: dt must be > 0");
    const double span_end = t0 + dt * static_cast<double>(ys.size() - 1);
    const double slack = 1e-9 * dt;
    if (t < t0 - slack || t > span_end + slack)
        throw DomainError("memory_integral_quadrature: t = " + std::to_string(t) + " outside trajectory span [" +
                          std::to_string(t0) + ", " + std::to_string(span_end) + "]");
    const auto dim = ys.front().size();
    Vector z = Vector::Zero(dim);
    const double pos = (t - t0) / dt;
    auto last = static_cast<std::size_t>(std::floor(pos + 1e-9));
    last = std::min(last, ys.size() - 1);
    const double rem = t - (t0 + dt * static_cast<double>(last));

    if (last > 0) {
        for (std::size_t i = 0; i <= last; ++i) {
            const double w = (i == 0 || i == last) ? 0.5 : 1.0;
            z.noalias() += (w * dt * kernel(t, t0 + dt * static_cast<double>(i))) * ys[i];
        }
    }
    if (rem > slack && last + 1 < ys.size()) {
        const double frac = rem / dt;
        const Vector y_t = (1.0 - frac) * ys[last] + frac * ys[last + 1];
        const double t_last = t0 + dt * static_cast<double>(last);
        z.noalias() += 0.5 * rem * (kernel(t, t_last) * ys[last] + kernel(t, t) * y_t);
    }
    return z;
}

/// Right-hand side of the exponential-kernel filter, (y - z)/T.
inline Vector aux_ode_rhs(const Vector& y, const Vector& z, double width) {
    detail::require_size("z", static_cast<std::size_t>(y.size()), static_cast<std::size_t>(z.size()));
    if (!(width > 0.0)) throw DomainError("aux_ode_rhs: T must be > 0");
    return (y - z) / width;
}

/// Integrates z' = (y - z)/T, z(t0) = 0 with the trapezoid (Crank-Nicolson)
/// rule on the samples ys[j] = y(t0 + j dt).
inline std::vector<Vector> integrate_memory_filter(std::span<const Vector> ys, double dt, double width) {
    if (ys.empty()) return {};
    if (!(dt > 0.0)) throw DomainError("integrate_memory_filter: dt must be > 0");
    if (!(width > 0.0)) throw DomainError("integrate_memory_filter: T must be > 0");
    const double r = dt / (2.0 * width);
    std::vector<Vector> z;
    z.reserve(ys.size());
    z.push_back(Vector::Zero(ys.front().size()));
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
        detail::require_size("trajectory sample", static_cast<std::size_t>(ys[j].size()),
                             static_cast<std::size_t>(ys[j + 1].size()));
        z.push_back(((1.0 - r) * z.back() + r * (ys[j] + ys[j + 1])) / (1.0 + r));
    }
    return z;
}

struct KernelConditionReport {
    int samples = 0;
    double window_end = 0.0;

    bool nonnegative = true;

    double continuity_modulus = 0.0;  ///< max |k(t+d, s) - k(t, s)| at probe offset d
    double continuity_offset = 0.0;
    bool continuous = true;

    double lipschitz_declared = std::numeric_limits<double>::quiet_NaN();
    double lipschitz_measured = 0.0;
    bool lipschitz_ok = false;

    int bound_violations = 0;
    double bound_max_ratio = 0.0;  ///< max k / (a e^{-b (t-s)})
    bool bound_ok = false;

    [[nodiscard]] bool all_ok() const { return nonnegative && continuous && lipschitz_ok && bound_ok; }
};

/// Sampled verification of continuity, the Lipschitz bound in t on
/// [t0, window_end], and the exponential bound on the whole domain. Samples
/// are drawn from a seeded generator; the same seed gives the same report.
inline KernelConditionReport check_kernel_conditions(const MemoryKernel& kernel, double t0, double window_end,
                                                     int sample_count, std::uint64_t seed = 20240611) {
    if (!(window_end > t0)) throw DomainError("check_kernel_conditions: window end must exceed t0");
    if (sample_count < 1) throw DomainError("check_kernel_conditions: sample_count must be >= 1");
    KernelConditionReport rep;
    rep.samples = sample_count;
    rep.window_end = window_end;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double width = window_end - t0;

    // Continuity and Lipschitz on the window triangle.
    const double offset = 1e-7 * width;
    rep.continuity_offset = offset;
    double kmax = 0.0;
    for (int k = 0; k < sample_count; ++k) {
        const double s = t0 + width * unit(rng);
        const double t1 = s + (window_end - s) * unit(rng);
        const double t2 = s + (window_end - s) * unit(rng);
        const double k1 = kernel(t1, s);
        const double k2 = kernel(t2, s);
        if (!(k1 >= 0.0) || !(k2 >= 0.0)) rep.nonnegative = false;
        kmax = std::max({kmax, std::abs(k1), std::abs(k2)});
        if (t1 != t2) rep.lipschitz_measured = std::max(rep.lipschitz_measured, std::abs(k1 - k2) / std::abs(t1 - t2));
        const double tp = std::min(t1 + offset, window_end);
        rep.continuity_modulus = std::max(rep.continuity_modulus, std::abs(kernel(tp, s) - k1));
    }
    rep.continuous = rep.continuity_modulus <= 1e-4 * (1.0 + kmax);
    if (kernel.lip_t) {
        rep.lipschitz_declared = kernel.lip_t(window_end);
        rep.lipschitz_ok = rep.lipschitz_measured <= rep.lipschitz_declared * (1.0 + 1e-9) + 1e-300;
    }

    // Exponential bound over a lag range long enough to expose slow decay.
    const bool params_ok = kernel.bound_a > 0.0 && kernel.bound_b > 0.0;
    const double lag_max = params_ok ? std::max(width, 40.0 / kernel.bound_b) : width;
    for (int k = 0; k < sample_count; ++k) {
        const double s = t0 + width * unit(rng);
        const double lag = lag_max * unit(rng);
        const double value = kernel(s + lag, s);
        if (!(value >= 0.0)) rep.nonnegative = false;
        if (!params_ok) continue;
        const double bound = kernel.bound_a * std::exp(-kernel.bound_b * lag);
        const double ratio = bound > 0.0 ? value / bound : (value > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        rep.bound_max_ratio = std::max(rep.bound_max_ratio, ratio);
        if (value > bound * (1.0 + 1e-12)) ++rep.bound_violations;
    }
    rep.bound_ok = params_ok && rep.bound_violations == 0;
    return rep;
}

/// int_s^t k(sigma, s) e^{omega (sigma - s)} d sigma by adaptive Gauss-Kronrod.
inline double weighted_kernel_integral(const MemoryKernel& kernel, double s, double t, double omega) {
    if (t < s) throw DomainError("weighted_kernel_integral: t must be >= s");
    if (t == s) return 0.0;
    // Product taken in log space: on long lags k underflows while the weight overflows.
    auto integrand = [&](double sigma) {
        if (kernel.log_eval) return std::exp(kernel.log_eval(sigma, s) + omega * (sigma - s));
        const double kv = kernel(sigma, s);
        return kv > 0.0 ? std::exp(std::log(kv) + omega * (sigma - s)) : 0.0;
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, s, t, 15, 1e-15);
}

/// Closed form of int_s^t a e^{(omega - b)(sigma - s)} d sigma, the majorant
/// of weighted_kernel_integral under the exponential bound.
inline double exponential_bound_integral(double a, double b, double omega, double lag) {
    if (omega == b) return a * lag;
    return -a / (omega - b) * (1.0 - std::exp((omega - b) * lag));
}

}  // namespace memorybeam
