#include "memorybeam/state_space.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace memorybeam;
using Catch::Approx;

namespace {

BeamState random_state(std::mt19937_64& rng, const Grid& grid) {
    return unflatten(testsupport::gaussian(rng, grid.state_dim()), grid);
}

BeamState polynomial_state(const Grid& grid, const std::vector<double>& p, const std::vector<double>& q = {0.0}) {
    return {testsupport::sample_polynomial(grid, p), testsupport::sample_polynomial(grid, q), 0.0};
}

}  // namespace

TEST_CASE("grid spacing and sizes") {
    const Grid g(16);
    CHECK(g.nodes() == 17);
    CHECK(g.state_dim() == 35);
    CHECK(g.h() * 17.0 == Approx(1.0).epsilon(1e-15));
    CHECK(g.x(g.nodes()) == Approx(1.0));
    CHECK_THROWS_AS(Grid(3), DomainError);
    CHECK_NOTHROW(Grid(4));
}

TEST_CASE("energy of the zero state is zero") {
    const Grid g(10);
    CHECK(energy(BeamState::zero(g), g, {}, 1.0, 1.0) == 0.0);
    CHECK(norm(BeamState::zero(g), g, {}, 1.0, 1.0) == 0.0);
}

TEST_CASE("energy is quadratic and equals y^T G y") {
    std::mt19937_64 rng(1);
    const Grid g(12);
    const EnergyWeights w{1.3, 0.7, 2.0};
    const Matrix gram = energy_gram(g, w, 0.8, 1.5);
    for (int k = 0; k < 20; ++k) {
        const BeamState s = random_state(rng, g);
        const double e = energy(s, g, w, 0.8, 1.5);
        CHECK(energy(scale(2.0, s), g, w, 0.8, 1.5) == Approx(4.0 * e).epsilon(1e-13));
        const Vector y = flatten(s);
        CHECK(y.dot(gram * y) == Approx(e).epsilon(1e-12));
    }
}

TEST_CASE("energy of x^2 on the grid") {
    // x^2 violates u_xx(1) = 0; the free-end node carries zero curvature, so
    // the discrete energy is 2 - h instead of 2 + O(h^2).
    for (int n : {14, 30, 62}) {
        const Grid g(n);
        const double e = energy(polynomial_state(g, {0.0, 0.0, 1.0}), g, {}, 1.0, 1.0);
        CHECK(e == Approx(2.0 - g.h()).epsilon(1e-12));
    }
}

TEST_CASE("energy converges at second order for a compatible smooth state") {
    // p = x^3 - 3x^2 satisfies p(0) = p'(0) = p''(1) = 0; continuum energy 1/2 int (6x - 6)^2 = 6.
    std::vector<double> errors;
    for (int n : {15, 31, 63, 127}) {
        const Grid g(n);
        errors.push_back(std::abs(energy(polynomial_state(g, {0.0, 0.0, -3.0, 1.0}), g, {}, 1.0, 1.0) - 6.0));
    }
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
        const double order = std::log2(errors[k] / errors[k + 1]);
        CHECK(order == Approx(2.0).margin(0.1));
    }
}

TEST_CASE("kinetic and eta terms") {
    const Grid g(9);
    // q = 1: trapezoid weights on x_1..x_N sum to 1 - h/2 (node 0 excluded).
    const BeamState s{Vector::Zero(g.nodes()), Vector::Ones(g.nodes()), 0.0};
    CHECK(energy(s, g, {}, 1.0, 1.0) == Approx(0.5 * (1.0 - 0.5 * g.h())));
    const BeamState e{Vector::Zero(g.nodes()), Vector::Zero(g.nodes()), 2.0};
    CHECK(energy(e, g, {1, 1, 3.0}, 0.5, 2.0) == Approx(3.0 * 0.5 / 4.0 * 4.0));
}

TEST_CASE("energy is positive definite") {
    const Grid g(8);
    const Matrix gram = energy_gram(g, {}, 1.0, 1.0);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK_NOTHROW(EnergyNorm(gram));
}

TEST_CASE("norm properties") {
    std::mt19937_64 rng(2);
    const Grid g(10);
    for (int k = 0; k < 100; ++k) {
        const BeamState x = random_state(rng, g);
        const BeamState y = random_state(rng, g);
        CHECK(norm(sub(x, x), g, {}, 1.0, 1.0) == 0.0);
        const double lhs = norm(axpy(1.0, x, y), g, {}, 1.0, 1.0);
        CHECK(lhs <= norm(x, g, {}, 1.0, 1.0) + norm(y, g, {}, 1.0, 1.0) + 1e-12);
    }
}

TEST_CASE("vector-space operations") {
    std::mt19937_64 rng(3);
    const Grid g(6);
    const BeamState x = random_state(rng, g);
    const BeamState y = random_state(rng, g);
    const BeamState z = BeamState::zero(g);

    const BeamState a0 = axpy(0.0, x, y);
    CHECK(flatten(a0) == flatten(y));
    CHECK(flatten(axpy(1.0, x, z)) == flatten(x));
    CHECK(dot(x, x) == Approx(flatten(x).squaredNorm()).epsilon(1e-14));

    // Dyadic inputs make the axioms hold bit for bit.
    const BeamState u{Vector::Constant(g.nodes(), 0.5), Vector::Constant(g.nodes(), -0.25), 0.125};
    const BeamState v{Vector::Constant(g.nodes(), 1.5), Vector::Constant(g.nodes(), 2.0), -4.0};
    CHECK(flatten(axpy(1.0, u, v)) == flatten(axpy(1.0, v, u)));
    CHECK(flatten(scale(2.0, axpy(1.0, u, v))) == flatten(axpy(1.0, scale(2.0, u), scale(2.0, v))));
    const BeamState w{Vector::Constant(g.nodes(), -0.75), Vector::Constant(g.nodes(), 8.0), 0.5};
    CHECK(flatten(axpy(1.0, axpy(1.0, u, v), w)) == flatten(axpy(1.0, u, axpy(1.0, v, w))));
    CHECK(flatten(sub(u, u)) == flatten(z));
}

TEST_CASE("dimension mismatches name the field") {
    const Grid g(6);
    BeamState bad = BeamState::zero(g);
    bad.q = Vector::Zero(3);
    try {
        (void)energy(bad, g, {}, 1.0, 1.0);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(e.field() == "q");
        CHECK(e.expected() == 7u);
        CHECK(e.actual() == 3u);
    }
    CHECK_THROWS_AS(axpy(1.0, BeamState::zero(g), BeamState::zero(Grid(7))), DimensionError);
    CHECK_THROWS_AS(energy(BeamState::zero(g), g, {0.0, 1.0, 1.0}, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(energy(BeamState::zero(g), g, {}, -1.0, 1.0), DomainError);
}

TEST_CASE("energy norm similarity gives induced operator norms") {
    std::mt19937_64 rng(4);
    const Grid g(5);
    const EnergyNorm nrm(energy_gram(g, {}, 1.0, 1.0));
    const Matrix m = Matrix::Random(g.state_dim(), g.state_dim());
    const double op = nrm.operator_norm(m);
    for (int k = 0; k < 200; ++k) {
        const Vector v = testsupport::gaussian(rng, g.state_dim());
        CHECK(nrm(m * v) <= op * nrm(v) * (1.0 + 1e-12));
    }
    // The maximizing direction attains the bound.
    const Eigen::JacobiSVD<Matrix> svd(nrm.similarity(m), Eigen::ComputeFullV);
    const Vector best = nrm.factor().triangularView<Eigen::Upper>().solve(Vector(svd.matrixV().col(0)));
    CHECK(nrm(m * best) / nrm(best) == Approx(op).epsilon(1e-10));
}

TEST_CASE("tip third derivative and compatibility") {
    // p = x^3 - 3x^2 has p_xxx = 6; the one-sided stencil is exact for it.
    const Grid g(20);
    const Vector p = testsupport::sample_polynomial(g, {0.0, 0.0, -3.0, 1.0});
    CHECK(tip_third_derivative(p, g) == Approx(6.0).epsilon(1e-9));
    const Vector q = Vector::Constant(g.nodes(), 0.5);
    const double eta = compatible_eta(p, q, g, 2.0, 4.0);
    CHECK(eta == Approx(-6.0 + 0.25).epsilon(1e-9));
    const auto defect = compatibility_defect({p, q, eta}, g, 2.0, 4.0);
    CHECK(defect.defect == 0.0);
    CHECK(compatibility_defect({p, q, eta + 1.0}, g, 2.0, 4.0).defect == Approx(1.0));
}

TEST_CASE("state CSV round trip") {
    std::mt19937_64 rng(5);
    const Grid g(6);
    const BeamState s = random_state(rng, g);
    const std::string row = state_to_csv_row(s);
    const BeamState back = state_from_csv_row(row, g);
    CHECK(flatten(back) == flatten(s));
    CHECK(state_csv_header(g).rfind("p_1,", 0) == 0);
    CHECK(state_csv_header(g).ends_with(",q_7,eta"));
    CHECK_THROWS_AS(state_from_csv_row("1,2,3", g), DimensionError);
}
