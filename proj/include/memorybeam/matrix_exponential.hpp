#pragma once

// Dense matrix exponential by scaling and squaring with diagonal Pade
// approximants (degrees 3, 5, 7, 9, 13; thresholds from Higham, SIAM J.
// Matrix Anal. Appl. 26 (2005)), and an adaptive Dormand-Prince integrator
// for exp(tA) y when the matrix is too large to exponentiate densely.

#include "memorybeam/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace memorybeam {

namespace detail {

template <std::size_t K>
inline void pade_low(const Eigen::MatrixXd& a, const std::array<double, K>& b, Eigen::MatrixXd& u,
                     Eigen::MatrixXd& v) {
    // Degree m = K-1 (odd): U = A * sum_{odd j} b_j A^{j-1}, V = sum_{even j} b_j A^j.
    const auto n = a.rows();
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = a * a;
    Eigen::MatrixXd power = ident;
    Eigen::MatrixXd uo = Eigen::MatrixXd::Zero(n, n);
    v = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j + 1 < K; j += 2) {
        v += b[j] * power;
        uo += b[j + 1] * power;
        power = power * a2;
    }
    u = a * uo;
}

inline void pade13(const Eigen::MatrixXd& a, Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
    static constexpr std::array<double, 14> b{64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                              670442572800.0,      33522128640.0,       1323241920.0,
                                              40840800.0,          960960.0,            16380.0,
                                              182.0,               1.0};
    const auto n = a.rows();
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = a * a;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a4 * a2;
    const Eigen::MatrixXd u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                                    b[3] * a2 + b[1] * ident;
    u = a * u_inner;
    v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

inline Eigen::MatrixXd pade_solve(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
    return (v - u).partialPivLu().solve(v + u);
}

}  // namespace detail

/// exp(A) for a square matrix.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DimensionError("matrix", static_cast<std::size_t>(a.rows()),
                                                   static_cast<std::size_t>(a.cols()));
    if (!a.allFinite()) throw DomainError("expm: matrix has non-finite entries");
    if (a.rows() == 0) return a;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    Eigen::MatrixXd u, v;
    if (norm1 <= 1.495585217958292e-2) {
        detail::pade_low(a, std::array<double, 4>{120.0, 60.0, 12.0, 1.0}, u, v);
        return detail::pade_solve(u, v);
    }
    if (norm1 <= 2.539398330063230e-1) {
        detail::pade_low(a, std::array<double, 6>{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0}, u, v);
        return detail::pade_solve(u, v);
    }
    if (norm1 <= 9.504178996162932e-1) {
        detail::pade_low(
            a, std::array<double, 8>{17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0}, u, v);
        return detail::pade_solve(u, v);
    }
    if (norm1 <= 2.097847961257068) {
        detail::pade_low(a,
                         std::array<double, 10>{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                                2162160.0, 110880.0, 3960.0, 90.0, 1.0},
                         u, v);
        return detail::pade_solve(u, v);
    }
    constexpr double theta13 = 5.371920351148152;
    const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    const Eigen::MatrixXd scaled = a * std::ldexp(1.0, -squarings);
    detail::pade13(scaled, u, v);
    Eigen::MatrixXd result = detail::pade_solve(u, v);
    for (int k = 0; k < squarings; ++k) result = result * result;
    return result;
}

struct AdaptiveExpOptions {
    double rtol = 1e-11;
    double atol = 1e-14;
    long max_steps = 50'000'000;
};

/// exp(tA) y by integrating y' = A y with an embedded Dormand-Prince 5(4)
/// pair and standard step-size control. Used for dimensions where a dense
/// exponential is unaffordable.
inline Eigen::VectorXd expm_action_adaptive(const Eigen::MatrixXd& a, double t, const Eigen::VectorXd& y0,
                                            const AdaptiveExpOptions& opt = {}) {
    if (t < 0.0) throw DomainError("expm_action_adaptive: t must be >= 0");
    detail::require_size("y0", static_cast<std::size_t>(a.cols()), static_cast<std::size_t>(y0.size()));
    Eigen::VectorXd y = y0;
    if (t == 0.0) return y;

    // Autonomous linear system: the stage times c_i never enter.
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    double dt = std::min(t, 0.5 / std::max(norm1, 1e-300));
    double time = 0.0;
    Eigen::VectorXd k1 = a * y;
    long steps = 0;
    while (time < t) {
        if (++steps > opt.max_steps) throw DomainError("expm_action_adaptive: step budget exhausted");
        dt = std::min(dt, t - time);
        const Eigen::VectorXd k2 = a * (y + dt * a21 * k1);
        const Eigen::VectorXd k3 = a * (y + dt * (a31 * k1 + a32 * k2));
        const Eigen::VectorXd k4 = a * (y + dt * (a41 * k1 + a42 * k2 + a43 * k3));
        const Eigen::VectorXd k5 = a * (y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Eigen::VectorXd k6 = a * (y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Eigen::VectorXd y_new = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Eigen::VectorXd k7 = a * y_new;
        const Eigen::VectorXd err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const Eigen::VectorXd scale =
            (opt.atol + opt.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
        const double err_norm =
            std::sqrt((err.array() / scale.array()).square().sum() / static_cast<double>(y.size()));
        if (err_norm <= 1.0) {
            time += dt;
            y = y_new;
            k1 = k7;
        }
        const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        dt *= factor;
    }
    return y;
}

}  // namespace memorybeam
