#pragma once

// Discretized state space H = V x L^2 x R of the clamped-free beam.
//
// The beam occupies [0, 1]. A grid with n interior nodes has spacing
// h = 1/(n+1) and carries deflection p and velocity q at the nodes
// x_i = i*h, i = 1..n+1 (the free end x = 1 included, the clamped end x = 0
// excluded), plus the scalar boundary variable eta.
//
// Flattened layout used everywhere a plain vector is needed:
//   [ p_1 .. p_N | q_1 .. q_N | eta ],  N = n+1.

#include "memorybeam/detail/text.hpp"
#include "memorybeam/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>

namespace memorybeam {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Grid {
public:
    explicit Grid(int n_interior) : n_interior_(n_interior) {
        if (n_interior < 4) {
            throw DomainError("Grid: n_interior must be >= 4 for the five-point stencil, got " +
                              std::to_string(n_interior));
        }
        h_ = 1.0 / static_cast<double>(n_interior + 1);
    }

    [[nodiscard]] int n_interior() const noexcept { return n_interior_; }
    /// Nodes carried by p and q (x_1 .. x_N with x_N = 1).
    [[nodiscard]] int nodes() const noexcept { return n_interior_ + 1; }
    [[nodiscard]] double h() const noexcept { return h_; }
    [[nodiscard]] double x(int i) const noexcept { return static_cast<double>(i) * h_; }
    /// Length of a flattened state: 2N + 1.
    [[nodiscard]] int state_dim() const noexcept { return 2 * nodes() + 1; }

    friend bool operator==(const Grid& a, const Grid& b) noexcept { return a.n_interior_ == b.n_interior_; }

private:
    int n_interior_;
    double h_;
};

struct BeamState {
    Vector p;
    Vector q;
    double eta = 0.0;

    static BeamState zero(const Grid& grid) {
        return {Vector::Zero(grid.nodes()), Vector::Zero(grid.nodes()), 0.0};
    }

    [[nodiscard]] bool all_finite() const { return p.allFinite() && q.allFinite() && std::isfinite(eta); }
};

/// Weights of the three terms of the beam energy. The eta term is further
/// scaled by beta/(2m).
struct EnergyWeights {
    double bend = 1.0;
    double kin = 1.0;
    double eta = 1.0;

    void validate() const {
        if (!(bend > 0.0)) throw DomainError("EnergyWeights: bend must be > 0");
        if (!(kin > 0.0)) throw DomainError("EnergyWeights: kin must be > 0");
        if (!(eta > 0.0)) throw DomainError("EnergyWeights: eta must be > 0");
    }
};

namespace detail {

inline void check_state(const BeamState& s, const Grid& grid, const std::string& prefix = {}) {
    require_size(prefix + "p", static_cast<std::size_t>(grid.nodes()), static_cast<std::size_t>(s.p.size()));
    require_size(prefix + "q", static_cast<std::size_t>(grid.nodes()), static_cast<std::size_t>(s.q.size()));
}

inline void check_same_shape(const BeamState& x, const BeamState& y) {
    require_size("p", static_cast<std::size_t>(x.p.size()), static_cast<std::size_t>(y.p.size()));
    require_size("q", static_cast<std::size_t>(x.q.size()), static_cast<std::size_t>(y.q.size()));
}

inline void check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be a positive finite number");
}

}  // namespace detail

/// Trapezoid weights on the nodes x_0 .. x_N.
inline Vector trapezoid_weights(const Grid& grid) {
    const int n = grid.nodes();
    Vector w = Vector::Constant(n + 1, grid.h());
    w(0) = 0.5 * grid.h();
    w(n) = 0.5 * grid.h();
    return w;
}

/// Second-difference operator mapping p (nodes 1..N) to curvature at nodes
/// 0..N. The clamped end reflects the ghost value (p_{-1} = p_1, p_0 = 0);
/// the free end carries u_xx(1) = 0, so the last row is identically zero.
inline Matrix second_difference_matrix(const Grid& grid) {
    const int n = grid.nodes();
    const double s = 1.0 / (grid.h() * grid.h());
    Matrix d2 = Matrix::Zero(n + 1, n);
    d2(0, 0) = 2.0 * s;
    for (int node = 1; node < n; ++node) {
        const int c = node - 1;  // column of p at this node
        if (c - 1 >= 0) d2(node, c - 1) = s;
        d2(node, c) = -2.0 * s;
        d2(node, c + 1) = s;
    }
    return d2;
}

inline Vector second_difference(const Vector& p, const Grid& grid) {
    detail::require_size("p", static_cast<std::size_t>(grid.nodes()), static_cast<std::size_t>(p.size()));
    const int n = grid.nodes();
    const double s = 1.0 / (grid.h() * grid.h());
    Vector c(n + 1);
    c(0) = 2.0 * p(0) * s;
    for (int node = 1; node < n; ++node) {
        const double left = node >= 2 ? p(node - 2) : 0.0;
        c(node) = (left - 2.0 * p(node - 1) + p(node)) * s;
    }
    c(n) = 0.0;
    return c;
}

/// E = bend/2 * sum w (D2 p)^2 + kin/2 * sum w q^2 + eta_weight * beta/(2m) * eta^2.
inline double energy(const BeamState& state, const Grid& grid, const EnergyWeights& w, double beta, double m) {
    detail::check_state(state, grid);
    detail::check_positive(beta, "beta");
    detail::check_positive(m, "m");
    w.validate();
    const Vector tw = trapezoid_weights(grid);
    const Vector curv = second_difference(state.p, grid);
    const double bend = curv.cwiseProduct(curv).dot(tw);
    const double kin = state.q.cwiseProduct(state.q).dot(tw.tail(grid.nodes()));
    return 0.5 * w.bend * bend + 0.5 * w.kin * kin + w.eta * beta / (2.0 * m) * state.eta * state.eta;
}

inline double norm(const BeamState& state, const Grid& grid, const EnergyWeights& w, double beta, double m) {
    return std::sqrt(energy(state, grid, w, beta, m));
}

// --- vector-space operations -------------------------------------------------

inline BeamState axpy(double alpha, const BeamState& x, const BeamState& y) {
    detail::check_same_shape(x, y);
    return {alpha * x.p + y.p, alpha * x.q + y.q, alpha * x.eta + y.eta};
}

inline BeamState scale(double alpha, const BeamState& x) { return {alpha * x.p, alpha * x.q, alpha * x.eta}; }

inline BeamState sub(const BeamState& x, const BeamState& y) {
    detail::check_same_shape(x, y);
    return {x.p - y.p, x.q - y.q, x.eta - y.eta};
}

/// Euclidean inner product of the flattened states.
inline double dot(const BeamState& x, const BeamState& y) {
    detail::check_same_shape(x, y);
    return x.p.dot(y.p) + x.q.dot(y.q) + x.eta * y.eta;
}

inline Vector flatten(const BeamState& s) {
    const auto n = s.p.size();
    detail::require_size("q", static_cast<std::size_t>(n), static_cast<std::size_t>(s.q.size()));
    Vector v(2 * n + 1);
    v.head(n) = s.p;
    v.segment(n, n) = s.q;
    v(2 * n) = s.eta;
    return v;
}

inline BeamState unflatten(const Vector& v, const Grid& grid) {
    const int n = grid.nodes();
    detail::require_size("state", static_cast<std::size_t>(grid.state_dim()), static_cast<std::size_t>(v.size()));
    return {v.head(n), v.segment(n, n), v(2 * n)};
}

/// Gram matrix G of the energy: energy(s) = flatten(s)^T G flatten(s).
inline Matrix energy_gram(const Grid& grid, const EnergyWeights& w, double beta, double m) {
    detail::check_positive(beta, "beta");
    detail::check_positive(m, "m");
    w.validate();
    const int n = grid.nodes();
    const Vector tw = trapezoid_weights(grid);
    const Matrix d2 = second_difference_matrix(grid);
    Matrix g = Matrix::Zero(2 * n + 1, 2 * n + 1);
    g.topLeftCorner(n, n) = 0.5 * w.bend * d2.transpose() * tw.asDiagonal() * d2;
    g.block(n, n, n, n) = (0.5 * w.kin * tw.tail(n)).asDiagonal();
    g(2 * n, 2 * n) = w.eta * beta / (2.0 * m);
    return g;
}

/// Norm ||y||^2 = y^T G y induced by a symmetric positive definite Gram
/// matrix. Operator norms are spectral norms after the similarity R M R^{-1},
/// where G = R^T R.
class EnergyNorm {
public:
    EnergyNorm() = default;

    explicit EnergyNorm(Matrix gram) : gram_(std::move(gram)) {
        if (gram_.rows() != gram_.cols()) throw DimensionError("gram", gram_.rows(), gram_.cols());
        const Eigen::LLT<Matrix> llt(gram_);
        if (llt.info() != Eigen::Success) throw DomainError("EnergyNorm: Gram matrix is not positive definite");
        factor_ = llt.matrixU();
    }

    static EnergyNorm identity(Eigen::Index dim) { return EnergyNorm(Matrix::Identity(dim, dim)); }

    [[nodiscard]] Eigen::Index dim() const noexcept { return gram_.rows(); }
    [[nodiscard]] const Matrix& gram() const noexcept { return gram_; }
    /// Upper-triangular R with G = R^T R.
    [[nodiscard]] const Matrix& factor() const noexcept { return factor_; }

    [[nodiscard]] double operator()(const Vector& v) const {
        detail::require_size("vector", static_cast<std::size_t>(dim()), static_cast<std::size_t>(v.size()));
        return (factor_.triangularView<Eigen::Upper>() * v).norm();
    }

    [[nodiscard]] double inner(const Vector& u, const Vector& v) const { return u.dot(gram_ * v); }

    /// R M R^{-1}: the matrix whose spectral norm is the induced operator norm.
    [[nodiscard]] Matrix similarity(const Matrix& m) const {
        detail::require_size("operator", static_cast<std::size_t>(dim()), static_cast<std::size_t>(m.rows()));
        const Matrix rm = factor_.triangularView<Eigen::Upper>() * m;
        // X = rm * R^{-1}  <=>  R^T X^T = rm^T
        return factor_.transpose().triangularView<Eigen::Lower>().solve(rm.transpose()).transpose();
    }

    [[nodiscard]] double operator_norm(const Matrix& m) const {
        const Eigen::JacobiSVD<Matrix> svd(similarity(m));
        return svd.singularValues()(0);
    }

private:
    Matrix gram_;
    Matrix factor_;
};

// --- domain compatibility at the free end -----------------------------------

/// Second-order one-sided estimate of p_xxx(1) from the discrete curvature,
/// using (D2 p)_N = 0.
inline double tip_third_derivative(const Vector& p, const Grid& grid) {
    const Vector c = second_difference(p, grid);
    const int n = grid.nodes();
    return (3.0 * c(n) - 4.0 * c(n - 1) + c(n - 2)) / (2.0 * grid.h());
}

/// eta = -p_xxx(1) + (m/beta) q(1): the value that places (p, q, eta) in the
/// generator's domain.
inline double compatible_eta(const Vector& p, const Vector& q, const Grid& grid, double m, double beta) {
    detail::require_size("q", static_cast<std::size_t>(grid.nodes()), static_cast<std::size_t>(q.size()));
    detail::check_positive(beta, "beta");
    return -tip_third_derivative(p, grid) + (m / beta) * q(grid.nodes() - 1);
}

/// eta - compatible_eta, together with the magnitude used to scale tolerances.
struct CompatibilityDefect {
    double defect;
    double scale;
};

inline CompatibilityDefect compatibility_defect(const BeamState& s, const Grid& grid, double m, double beta) {
    detail::check_state(s, grid);
    const double pxxx = tip_third_derivative(s.p, grid);
    const double qtip = (m / beta) * s.q(grid.nodes() - 1);
    const double target = -pxxx + qtip;
    return {s.eta - target, std::max({1.0, std::abs(pxxx), std::abs(qtip)})};
}

// --- CSV row: p_1..p_N, q_1..q_N, eta ----------------------------------------

inline std::string state_csv_header(const Grid& grid) {
    std::string out;
    for (int i = 1; i <= grid.nodes(); ++i) out += "p_" + std::to_string(i) + ",";
    for (int i = 1; i <= grid.nodes(); ++i) out += "q_" + std::to_string(i) + ",";
    out += "eta";
    return out;
}

inline std::string state_to_csv_row(const BeamState& s) {
    std::string out;
    for (Eigen::Index i = 0; i < s.p.size(); ++i) out += detail::format_double(s.p(i)) + ",";
    for (Eigen::Index i = 0; i < s.q.size(); ++i) out += detail::format_double(s.q(i)) + ",";
    out += detail::format_double(s.eta);
    return out;
}

inline BeamState state_from_csv_row(std::string_view line, const Grid& grid) {
    const auto cells = detail::split(detail::trim(line), ',');
    detail::require_size("csv row", static_cast<std::size_t>(grid.state_dim()), cells.size());
    Vector v(grid.state_dim());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto value = detail::parse_double(cells[i]);
        if (!value) throw DomainError("state csv: cell " + std::to_string(i + 1) + " is not a number");
        v(static_cast<Eigen::Index>(i)) = *value;
    }
    return unflatten(v, grid);
}

}  // namespace memorybeam
