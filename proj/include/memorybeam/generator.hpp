#pragma once

// Discrete generator A_h of the closed-loop beam, its semigroup exp(tA_h),
// and numerical estimates of the semigroup type (D, omega).
//
// Dynamics on the flattened state [p | q | eta]:
//   p' = q
//   q' = -D4 p                           (five-point stencil with ghost closures)
//   eta' = -eta/beta - (alpha - m/beta)/beta * q(1)
// Ghost values: p_0 = 0 and p_{-1} = p_1 (clamped end), u_xx(1) = 0 and
// u_xxx(1) = (m/beta) q(1) - eta (free end, the domain compatibility
// condition solved for the third derivative).

#include "memorybeam/errors.hpp"
#include "memorybeam/matrix_exponential.hpp"
#include "memorybeam/state_space.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace memorybeam {

struct BeamParams {
    double m = 1.0;      ///< tip mass
    double alpha = 1.0;  ///< velocity feedback gain
    double beta = 1.0;   ///< rate feedback gain

    void validate() const {
        detail::check_positive(m, "m");
        detail::check_positive(alpha, "alpha");
        detail::check_positive(beta, "beta");
    }
};

struct BeamLayout {
    Grid grid;
    BeamParams params;
    EnergyWeights weights;
};

class DiscreteGenerator {
public:
    DiscreteGenerator(Matrix matrix, EnergyNorm norm, std::optional<BeamLayout> beam = std::nullopt)
        : matrix_(std::move(matrix)), norm_(std::move(norm)), beam_(std::move(beam)) {
        if (matrix_.rows() != matrix_.cols())
            throw DimensionError("generator", static_cast<std::size_t>(matrix_.rows()),
                                 static_cast<std::size_t>(matrix_.cols()));
        detail::require_size("norm", static_cast<std::size_t>(matrix_.rows()), static_cast<std::size_t>(norm_.dim()));
        if (!matrix_.allFinite()) throw DomainError("generator matrix has non-finite entries");
    }

    /// Generic generator on R^d with the Euclidean norm.
    static DiscreteGenerator from_matrix(Matrix matrix) {
        const auto d = matrix.rows();
        return {std::move(matrix), EnergyNorm::identity(d)};
    }

    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] const EnergyNorm& norm() const noexcept { return norm_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return matrix_.rows(); }
    [[nodiscard]] const std::optional<BeamLayout>& beam() const noexcept { return beam_; }

    [[nodiscard]] const BeamLayout& beam_layout() const {
        if (!beam_) throw DomainError("generator carries no beam layout");
        return *beam_;
    }

private:
    Matrix matrix_;
    EnergyNorm norm_;
    std::optional<BeamLayout> beam_;
};

namespace detail {

/// A ghost or interior nodal value expressed as a combination of state
/// entries: sum coeff_k * p[index_k] + s_coeff * u_xxx(1).
struct NodalCombination {
    std::array<std::pair<int, double>, 3> terms{};
    int count = 0;
    double s_coeff = 0.0;

    void add(int idx, double c) { terms[static_cast<std::size_t>(count++)] = {idx, c}; }
};

inline NodalCombination nodal_value(int node, int n_nodes, double h) {
    NodalCombination v;
    const int last = n_nodes - 1;  // p index of x = 1
    if (node == 0) return v;
    if (node == -1) {
        v.add(0, 1.0);
    } else if (node >= 1 && node <= n_nodes) {
        v.add(node - 1, 1.0);
    } else if (node == n_nodes + 1) {
        v.add(last, 2.0);
        v.add(last - 1, -1.0);
    } else if (node == n_nodes + 2) {
        v.add(last, 4.0);
        v.add(last - 1, -4.0);
        v.add(last - 2, 1.0);
        v.s_coeff = 2.0 * h * h * h;
    }
    return v;
}

}  // namespace detail

/// Assembles A_h for the beam with boundary feedback.
inline DiscreteGenerator build_beam_generator(const Grid& grid, const BeamParams& params,
                                              const EnergyWeights& weights = {}) {
    params.validate();
    weights.validate();
    const int n = grid.nodes();
    const int dim = grid.state_dim();
    const int q0 = n;
    const int eta = 2 * n;
    const double h = grid.h();
    const double inv_h4 = 1.0 / (h * h * h * h);
    const double m_over_beta = params.m / params.beta;
    static constexpr std::array<double, 5> stencil{1.0, -4.0, 6.0, -4.0, 1.0};

    Matrix a = Matrix::Zero(dim, dim);
    for (int i = 0; i < n; ++i) a(i, q0 + i) = 1.0;

    for (int node = 1; node <= n; ++node) {
        const int row = q0 + node - 1;
        for (int k = -2; k <= 2; ++k) {
            const double c = -stencil[static_cast<std::size_t>(k + 2)] * inv_h4;
            const auto value = detail::nodal_value(node + k, n, h);
            for (int t = 0; t < value.count; ++t) a(row, value.terms[static_cast<std::size_t>(t)].first) +=
                c * value.terms[static_cast<std::size_t>(t)].second;
            if (value.s_coeff != 0.0) {
                // u_xxx(1) = (m/beta) q_N - eta
                a(row, q0 + n - 1) += c * value.s_coeff * m_over_beta;
                a(row, eta) -= c * value.s_coeff;
            }
        }
    }

    a(eta, eta) = -1.0 / params.beta;
    a(eta, q0 + n - 1) = -(params.alpha - m_over_beta) / params.beta;

    return {std::move(a), EnergyNorm(energy_gram(grid, weights, params.beta, params.m)),
            BeamLayout{grid, params, weights}};
}

/// Largest dimension exponentiated densely; above it apply_semigroup integrates.
inline constexpr Eigen::Index kDenseExponentialLimit = 600;

enum class SemigroupEvaluation { Auto, Dense, Adaptive };

inline Matrix semigroup_matrix(const DiscreteGenerator& gen, double t) {
    if (!(t >= 0.0)) throw DomainError("semigroup: t must be >= 0");
    if (t == 0.0) return Matrix::Identity(gen.dim(), gen.dim());
    return expm(t * gen.matrix());
}

/// exp(t A) y0.
inline Vector apply_semigroup(const DiscreteGenerator& gen, double t, const Vector& y0,
                              SemigroupEvaluation how = SemigroupEvaluation::Auto) {
    if (!(t >= 0.0)) throw DomainError("apply_semigroup: t must be >= 0, got " + std::to_string(t));
    detail::require_size("y0", static_cast<std::size_t>(gen.dim()), static_cast<std::size_t>(y0.size()));
    if (t == 0.0) return y0;
    const bool dense = how == SemigroupEvaluation::Dense ||
                       (how == SemigroupEvaluation::Auto && gen.dim() <= kDenseExponentialLimit);
    if (dense) return semigroup_matrix(gen, t) * y0;
    return expm_action_adaptive(gen.matrix(), t, y0);
}

inline BeamState apply_semigroup(const DiscreteGenerator& gen, double t, const BeamState& y0) {
    const auto& grid = gen.beam_layout().grid;
    return unflatten(apply_semigroup(gen, t, flatten(y0)), grid);
}

enum class TypeEstimateMethod { Eigen, Sampled };

inline const char* to_string(TypeEstimateMethod m) { return m == TypeEstimateMethod::Eigen ? "eigen" : "sampled"; }

/// ||U(t)|| <= D e^{-omega t}.
struct SemigroupEstimate {
    double D = 1.0;
    double omega = 0.0;
    TypeEstimateMethod method = TypeEstimateMethod::Eigen;
    bool stable = false;
    double t_max = 0.0;
    int samples = 0;
};

inline std::vector<std::complex<double>> eigenvalues(const Matrix& a, bool* ok = nullptr) {
    const Eigen::EigenSolver<Matrix> solver(a, false);
    if (ok) *ok = solver.info() == Eigen::Success;
    if (solver.info() != Eigen::Success) return {};
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

/// Eigenvalues with positive imaginary part, ordered by magnitude.
inline std::vector<std::complex<double>> oscillatory_eigenvalues(const DiscreteGenerator& gen, std::size_t count) {
    auto ev = eigenvalues(gen.matrix());
    std::erase_if(ev, [](const std::complex<double>& z) { return !(z.imag() > 1e-9); });
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
    if (ev.size() > count) ev.resize(count);
    return ev;
}

enum class TypeEstimateRequest { Auto, ForceSampled };

/// Estimates (D, omega). omega is minus the spectral abscissa when the
/// eigensolve succeeds; otherwise minus the slope of log ||U(t)|| fitted
/// over the second half of the sample window. D is the sampled supremum of
/// ||U(t)|| e^{omega t} on [0, t_max] in the generator's norm.
inline SemigroupEstimate estimate_semigroup_type(const DiscreteGenerator& gen, double t_max, int samples,
                                                 TypeEstimateRequest request = TypeEstimateRequest::Auto) {
    if (!(t_max > 0.0)) throw DomainError("estimate_semigroup_type: t_max must be > 0");
    if (samples < 8) throw DomainError("estimate_semigroup_type: samples must be >= 8");

    const double step = t_max / static_cast<double>(samples - 1);
    const Matrix e_step = expm(step * gen.matrix());
    std::vector<double> times(static_cast<std::size_t>(samples));
    std::vector<double> norms(static_cast<std::size_t>(samples));
    Matrix u = Matrix::Identity(gen.dim(), gen.dim());
    for (int k = 0; k < samples; ++k) {
        times[static_cast<std::size_t>(k)] = step * k;
        norms[static_cast<std::size_t>(k)] = gen.norm().operator_norm(u);
        u = u * e_step;
    }

    SemigroupEstimate est;
    est.t_max = t_max;
    est.samples = samples;
    bool eigen_ok = false;
    if (request == TypeEstimateRequest::Auto) {
        const auto ev = eigenvalues(gen.matrix(), &eigen_ok);
        if (eigen_ok && !ev.empty()) {
            double abscissa = -std::numeric_limits<double>::infinity();
            for (const auto& z : ev) abscissa = std::max(abscissa, z.real());
            est.omega = -abscissa;
            est.method = TypeEstimateMethod::Eigen;
        } else {
            eigen_ok = false;
        }
    }
    if (!eigen_ok) {
        // least-squares slope of log ||U(t)|| over t >= t_max/2
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int count = 0;
        bool degenerate = false;
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (times[k] < 0.5 * t_max) continue;
            if (!(norms[k] > 0.0) || !std::isfinite(norms[k])) {
                degenerate = true;
                break;
            }
            const double y = std::log(norms[k]);
            sx += times[k];
            sy += y;
            sxx += times[k] * times[k];
            sxy += times[k] * y;
            ++count;
        }
        const double denom = count * sxx - sx * sx;
        est.omega = (degenerate || count < 2 || denom == 0.0) ? 0.0 : -(count * sxy - sx * sy) / denom;
        est.method = TypeEstimateMethod::Sampled;
    }

    double d = 1.0;
    bool finite = true;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double v = norms[k] * std::exp(est.omega * times[k]);
        if (!std::isfinite(v)) finite = false;
        d = std::max(d, v);
    }
    est.D = d;
    est.stable = finite && est.omega > 0.0;
    return est;
}

// --- plain-text export ---------------------------------------------------------
//
//   %%MemoryBeam generator dense row-major
//   % <free comment lines>
//   <rows> <cols>
//   a(0,0)
//   a(0,1)
//   ...
//
// One entry per line, row-major, shortest round-trip decimal form.

inline void write_generator_matrix(std::ostream& out, const DiscreteGenerator& gen) {
    out << "%%MemoryBeam generator dense row-major\n";
    if (const auto& b = gen.beam()) {
        out << "% n_interior=" << b->grid.n_interior() << " m=" << detail::format_double(b->params.m)
            << " alpha=" << detail::format_double(b->params.alpha)
            << " beta=" << detail::format_double(b->params.beta) << "\n";
        out << "% layout: p_1..p_" << b->grid.nodes() << ", q_1..q_" << b->grid.nodes() << ", eta\n";
    }
    const auto& a = gen.matrix();
    out << a.rows() << " " << a.cols() << "\n";
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out << detail::format_double(a(i, j)) << "\n";
}

inline Matrix read_generator_matrix(std::istream& in) {
    std::string line;
    Eigen::Index rows = -1, cols = -1;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '%') continue;
        const auto parts = detail::split(t, ' ');
        if (parts.size() != 2) throw DomainError("generator file: malformed size line");
        const auto r = detail::parse_double(parts[0]);
        const auto c = detail::parse_double(parts[1]);
        if (!r || !c || *r < 0 || *c < 0) throw DomainError("generator file: malformed size line");
        rows = static_cast<Eigen::Index>(*r);
        cols = static_cast<Eigen::Index>(*c);
        break;
    }
    if (rows < 0) throw DomainError("generator file: missing size line");
    Matrix a(rows, cols);
    for (Eigen::Index k = 0; k < rows * cols; ++k) {
        if (!std::getline(in, line)) throw DomainError("generator file: truncated");
        const auto v = detail::parse_double(line);
        if (!v) throw DomainError("generator file: entry " + std::to_string(k) + " is not a number");
        a(k / cols, k % cols) = *v;
    }
    return a;
}

}  // namespace memorybeam
