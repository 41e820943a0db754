#include "memorybeam/memory.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>

using namespace memorybeam;
using Catch::Approx;

namespace {

struct Analytic {
    const char* name;
    std::function<double(double)> y;
    std::function<double(double, double)> z;  // exact memory for kernel width T at time t
};

/// Closed forms of int_0^t e^{-(t-s)/T}/T y(s) ds.
std::vector<Analytic> analytic_trajectories() {
    return {
        {"constant", [](double) { return 2.5; }, [](double t, double T) { return 2.5 * (1.0 - std::exp(-t / T)); }},
        {"linear", [](double s) { return s; }, [](double t, double T) { return t - T * (1.0 - std::exp(-t / T)); }},
        {"decay", [](double s) { return std::exp(-s); },
         [](double t, double T) {
             return T == 1.0 ? t * std::exp(-t) : (std::exp(-t) - std::exp(-t / T)) / (1.0 - T);
         }},
        {"sine", [](double s) { return std::sin(s); },
         [](double t, double T) { return (std::sin(t) - T * std::cos(t) + T * std::exp(-t / T)) / (1.0 + T * T); }},
        {"square", [](double s) { return s * s; },
         [](double t, double T) { return t * t - 2.0 * T * t + 2.0 * T * T * (1.0 - std::exp(-t / T)); }},
    };
}

std::vector<Vector> sample(const std::function<double(double)>& y, double dt, long steps) {
    std::vector<Vector> out;
    for (long j = 0; j <= steps; ++j) out.push_back(Vector::Constant(1, y(dt * static_cast<double>(j))));
    return out;
}

}  // namespace

TEST_CASE("exponential kernel parameters") {
    const auto k = exp_kernel(0.25);
    CHECK(k.bound_a == 4.0);
    CHECK(k.bound_b == 4.0);
    CHECK(k.lip_t(3.0) == 16.0);
    CHECK(k.exp_width.value() == 0.25);
    CHECK(k(1.0, 1.0) == 4.0);
    CHECK_THROWS_AS(exp_kernel(0.0), DomainError);
    CHECK_THROWS_AS(exp_kernel(-1.0), DomainError);
}

TEST_CASE("memory of the zero trajectory is zero") {
    const std::vector<Vector> zeros(11, Vector::Zero(3));
    for (const auto& k : {exp_kernel(0.5), constant_kernel(1.0, 1.0, 1.0), zero_kernel()}) {
        for (double t : {0.0, 0.35, 1.0}) CHECK(memory_integral_quadrature(k, 0.0, 0.1, zeros, t).isZero(0.0));
    }
    for (const auto& z : integrate_memory_filter(zeros, 0.1, 0.5)) CHECK(z.isZero(0.0));
}

TEST_CASE("quadrature reproduces closed-form convolutions") {
    const double dt = 1e-3;
    for (const auto& tr : analytic_trajectories()) {
        for (double T : {0.2, 1.0}) {
            const auto ys = sample(tr.y, dt, 2000);
            for (double t : {0.5, 1.0, 2.0}) {
                const double z = memory_integral_quadrature(exp_kernel(T), 0.0, dt, ys, t)(0);
                CHECK(z == Approx(tr.z(t, T)).margin(1e-6));
            }
        }
    }
    // e^{-s} with T = 1 at t = 1 gives e^{-1}.
    const auto ys = sample([](double s) { return std::exp(-s); }, dt, 1000);
    CHECK(memory_integral_quadrature(exp_kernel(1.0), 0.0, dt, ys, 1.0)(0) == Approx(0.3678794).margin(1e-6));
}

TEST_CASE("quadrature handles a partial last interval and rejects out-of-span times") {
    const auto ys = sample([](double s) { return s; }, 0.01, 100);
    const double t = 0.505;
    const double z = memory_integral_quadrature(exp_kernel(0.5), 0.0, 0.01, ys, t)(0);
    CHECK(z == Approx(t - 0.5 * (1.0 - std::exp(-t / 0.5))).margin(1e-4));
    CHECK_THROWS_AS(memory_integral_quadrature(exp_kernel(0.5), 0.0, 0.01, ys, 1.2), DomainError);
    CHECK_THROWS_AS(memory_integral_quadrature(exp_kernel(0.5), 0.0, 0.01, ys, -0.1), DomainError);
}

TEST_CASE("aux_ode_rhs") {
    const Vector y = Vector::Constant(2, 1.0);
    CHECK(aux_ode_rhs(y, y, 0.3).isZero(0.0));
    CHECK(aux_ode_rhs(Vector::Ones(1), Vector::Zero(1), 0.5)(0) == 2.0);
    CHECK_THROWS_AS(aux_ode_rhs(Vector::Ones(2), Vector::Zero(3), 0.5), DimensionError);
}

TEST_CASE("filter matches quadrature and converges at second order") {
    for (const auto& tr : analytic_trajectories()) {
        INFO(tr.name);
        // Both schemes err by about dt^2/(12 T^2) times the size of y, so the
        // 1e-6 agreement at dt = 1e-3 is checked for T = 1.
        const auto coarse = sample(tr.y, 1e-3, 2000);
        const auto zf = integrate_memory_filter(coarse, 1e-3, 1.0);
        double gap = 0.0;
        for (long j = 0; j <= 2000; j += 50)
            gap = std::max(gap, std::abs(zf[static_cast<std::size_t>(j)](0) -
                                         memory_integral_quadrature(exp_kernel(1.0), 0.0, 1e-3, coarse, j * 1e-3)(0)));
        CHECK(gap <= 1e-6);

        const double T = 0.2;

        double err[2];
        for (int level = 0; level < 2; ++level) {
            const double dt = 1e-2 / (1 << level);
            const long steps = std::lround(2.0 / dt);
            const auto z = integrate_memory_filter(sample(tr.y, dt, steps), dt, T);
            err[level] = std::abs(z.back()(0) - tr.z(2.0, T));
        }
        CHECK(std::log2(err[0] / err[1]) == Approx(2.0).margin(0.2));
    }
}

TEST_CASE("kernel condition checks") {
    const auto rep = check_kernel_conditions(exp_kernel(1.0), 0.0, 5.0, 2000);
    CHECK(rep.all_ok());
    CHECK(rep.lipschitz_measured <= 1.0);
    CHECK(rep.bound_violations == 0);

    const auto quarter = check_kernel_conditions(exp_kernel(0.25), 0.0, 3.0, 2000);
    CHECK(quarter.bound_ok);
    CHECK(quarter.lipschitz_declared == 16.0);

    for (double b : {1e-3, 0.5, 5.0}) {
        const auto c = check_kernel_conditions(constant_kernel(1.0, 10.0, b), 0.0, 2.0, 2000);
        CHECK_FALSE(c.bound_ok);
        CHECK(c.bound_violations > 0);
    }

    // Same seed, same report.
    const auto again = check_kernel_conditions(exp_kernel(1.0), 0.0, 5.0, 2000);
    CHECK(again.lipschitz_measured == rep.lipschitz_measured);
    CHECK(again.bound_max_ratio == rep.bound_max_ratio);

    MemoryKernel negative = exp_kernel(1.0);
    negative.eval = [](double t, double s) { return -std::exp(-(t - s)); };
    CHECK_FALSE(check_kernel_conditions(negative, 0.0, 1.0, 100).nonnegative);
    CHECK_THROWS_AS(check_kernel_conditions(exp_kernel(1.0), 1.0, 1.0, 10), DomainError);
}

TEST_CASE("weighted kernel integral matches the closed-form majorant") {
    const auto k = exp_kernel(0.5);
    for (double omega : {0.0, 0.7, 1.9}) {
        for (double lag : {0.1, 1.0, 6.0}) {
            const double num = weighted_kernel_integral(k, 0.3, 0.3 + lag, omega);
            const double closed = exponential_bound_integral(2.0, 2.0, omega, lag);
            CHECK(num == Approx(closed).epsilon(1e-12));
            CHECK(num < 2.0 / (2.0 - omega));
        }
    }
    CHECK(weighted_kernel_integral(k, 1.0, 1.0, 0.5) == 0.0);
    CHECK_THROWS_AS(weighted_kernel_integral(k, 1.0, 0.5, 0.5), DomainError);
}
