#include "memorybeam/generator.hpp"
#include "memorybeam/solver.hpp"
#include "memorybeam/stability.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace memorybeam;
using Catch::Approx;

TEST_CASE("general certificate arithmetic") {
    const auto c = certify_general(0.1, 1.0, 1.0, 2.0, 2.0);
    CHECK(c.cond1());
    CHECK(c.cond2());
    CHECK(c.cond3_bound() == Approx(9.0));
    CHECK(c.cond3());
    CHECK(c.certified());
    CHECK(c.decay_exponent() == Approx(-0.7).epsilon(1e-14));

    const auto t02 = certify_general(0.4, 1.0, 1.0, 5.0, 5.0);
    CHECK(t02.cond3_bound() == Approx(6.0));
    CHECK(t02.certified());

    CHECK_FALSE(certify_general(1.0, 1.0, 1.0, 1.0, 2.0).cond1());
    CHECK_FALSE(certify_general(1.0, 1.0, 1.0, 1.0, 2.0).certified());
    const double omega = 0.7, d = 3.3;
    CHECK_FALSE(certify_general(omega / d, d, omega, 0.1, 2.0).certified());
    CHECK_FALSE(certify_general(0.1, 1.0, 1.0, 0.5, 1.0).cond2());

    CHECK_THROWS_AS(certify_general(0.0, 1.0, 1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(certify_general(0.1, 0.5, 1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(certify_general(0.1, 1.0, -1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(certify_general(0.1, 1.0, 1.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(certify_general(0.1, 1.0, 1.0, 1.0, std::nan("")), DomainError);
}

TEST_CASE("beam certificate arithmetic") {
    const auto half = certify_beam(0.25, 1.0, 0.5);
    CHECK(half.T_bound() == Approx(2.0 / 3.0));
    CHECK(half.certified());
    CHECK_FALSE(certify_beam(0.25, 1.0, 0.7).certified());
    for (double T : {1e-6, 0.1, 10.0}) CHECK_FALSE(certify_beam(0.5, 1.0, T).cond_C());
    CHECK_THROWS_AS(certify_beam(0.25, 1.0, 0.0), DomainError);
    CHECK_THROWS_AS(certify_beam(-0.25, 1.0, 1.0), DomainError);
}

TEST_CASE("beam and general certificates agree") {
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int certified = 0;
    for (int k = 0; k < 1000; ++k) {
        const double omega = std::exp(4.0 * u(rng) - 2.0);
        const double C = omega * u(rng);
        const double T = 2.0 / omega * u(rng) + 1e-9;
        const auto beam = certify_beam(C, omega, T);
        const auto general = certify_general(C, 1.0, omega, 1.0 / T, 1.0 / T);
        CHECK(beam.certified() == general.certified());
        certified += beam.certified() ? 1 : 0;
        if (general.certified()) CHECK(general.decay_exponent() < 0.0);
    }
    CHECK(certified > 50);
    CHECK(certified < 950);
}

TEST_CASE("decay envelope") {
    const auto c = certify_general(0.1, 1.0, 1.0, 2.0, 2.0);
    CHECK(decay_envelope(c, 0.0, 5.0, 0.0) == 0.0);
    CHECK(decay_envelope(c, 2.0, 3.0, 3.0) == 2.0);
    CHECK(decay_envelope(c, 1.0, 1.0, 0.0) == Approx(0.4965853).epsilon(1e-7));
    CHECK_THROWS_AS(decay_envelope(c, 1.0, 0.0, 1.0), DomainError);
    double prev = decay_envelope(c, 1.0, 0.0, 0.0);
    for (int k = 1; k <= 50; ++k) {
        const double cur = decay_envelope(c, 1.0, 0.1 * k, 0.0);
        CHECK(cur < prev);
        prev = cur;
    }
    const auto d2 = certify_general(0.1, 2.0, 1.0, 2.0, 2.0);
    CHECK(decay_envelope(d2, 1.5, 0.0, 0.0) == 3.0);
    CHECK(predicted_time(c, 1.0, std::exp(-0.7)) == Approx(1.0));
    CHECK(std::isnan(predicted_time(certify_general(1.0, 1.0, 1.0, 1.0, 2.0), 1.0, 0.1)));
}

TEST_CASE("settling time") {
    const std::vector<double> t{0, 1, 2, 3, 4};
    CHECK(settling_time(t, {5, 0.5, 2, 0.5, 0.1}, 1.0) == 3.0);
    CHECK(settling_time(t, {0.1, 0.1, 0.1, 0.1, 0.1}, 1.0) == 0.0);
    CHECK(std::isnan(settling_time(t, {0.1, 0.1, 0.1, 0.1, 2}, 1.0)));
}

namespace {

struct CertifiedBeam {
    Grid grid{16};
    DiscreteGenerator gen = build_beam_generator(grid, {});
    SemigroupEstimate est = estimate_semigroup_type(gen, 200.0, 2001);
    ForcingFunction forcing = beam_linear_forcing(grid, 0.05, 0.0025);
    MemoryKernel kernel = exp_kernel(0.2);
    StabilityCertificate cert = certify_general(forcing.lipschitz_C, est.D, est.omega, 5.0, 5.0);
};

Vector compatible_in_ball(std::mt19937_64& rng, const CertifiedBeam& b, double radius) {
    Vector v = testsupport::make_compatible(testsupport::random_in_norm(rng, b.gen.norm(), 1.0), b.grid, 1.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return v * (radius * u(rng) / b.gen.norm()(v));
}

}  // namespace

TEST_CASE("envelope on trajectory pairs") {
    const CertifiedBeam b;
    REQUIRE(b.cert.certified());
    std::mt19937_64 rng(31);
    const Vector v = compatible_in_ball(rng, b, 1.0);
    const Vector w = compatible_in_ball(rng, b, 1.0);
    SteppingOptions opt;
    opt.record_stride = 10;
    const auto ty = solve_strong_stepping({b.gen, b.forcing, b.kernel, 0.0, v}, 30.0, 1e-2, opt);
    const auto tz = solve_strong_stepping({b.gen, b.forcing, b.kernel, 0.0, w}, 30.0, 1e-2, opt);
    const auto rep = verify_envelope_on_pair(tz, ty, b.cert, b.gen.norm(), 0.05, {1e-1, 1e-2});
    CHECK(rep.ok());
    CHECK(rep.max_ratio <= 1.05);
    CHECK(rep.ladder.size() == 2);

    const auto self = verify_envelope_on_pair(ty, ty, b.cert, b.gen.norm());
    CHECK(self.ok());
    CHECK(self.max_ratio == 0.0);

    SteppingOptions coarse;
    coarse.record_stride = 20;
    const auto other = solve_strong_stepping({b.gen, b.forcing, b.kernel, 0.0, w}, 30.0, 1e-2, coarse);
    CHECK_THROWS_AS(verify_envelope_on_pair(other, ty, b.cert, b.gen.norm()), DimensionError);

    // Uncertified parameters are reported, never asserted.
    const auto loose = certify_general(0.09, b.est.D, b.est.omega, 5.0, 5.0);
    CHECK_FALSE(loose.certified());
    CHECK_NOTHROW(verify_envelope_on_pair(tz, ty, loose, b.gen.norm()));
}

TEST_CASE("attractor checks") {
    const CertifiedBeam b;
    std::vector<Trajectory> runs;
    SteppingOptions opt;
    opt.record_stride = 100;
    runs.push_back(solve_strong_stepping({b.gen, b.forcing, b.kernel, 0.0, Vector::Zero(b.grid.state_dim())}, 5.0,
                                         1e-2, opt));
    for (const auto& y : runs.front().states) CHECK(y.isZero(0.0));
    const auto rep = verify_attractor(runs, b.cert, b.forcing, b.gen.norm(), 1.0, {1e-3});
    CHECK(rep.ok());
    CHECK(rep.sup_norm == 0.0);

    auto shifted = beam_forcing(b.grid, [](double, double p, double) { return 1.0 + p; }, 1.0, false, "shifted");
    CHECK_THROWS_AS(verify_attractor(runs, b.cert, shifted, b.gen.norm(), 1.0, {1e-3}), DomainError);

    std::vector<Trajectory> far = runs;
    far.front().states.front() = Vector::Constant(b.grid.state_dim(), 10.0);
    CHECK_THROWS_AS(verify_attractor(far, b.cert, b.forcing, b.gen.norm(), 1.0, {1e-3}), DomainError);

    // A run that ends above epsilon fails the level.
    std::mt19937_64 rng(32);
    const Vector v = compatible_in_ball(rng, b, 1.0);
    const auto short_run = solve_strong_stepping({b.gen, b.forcing, b.kernel, 0.0, v}, 5.0, 1e-2, opt);
    const auto partial = verify_attractor({short_run}, b.cert, b.forcing, b.gen.norm(), 1.0, {1e-6});
    CHECK(partial.bounded);
    CHECK_FALSE(partial.ok());
}

TEST_CASE("fitted decay rates") {
    const auto spec = ProblemSpec{DiscreteGenerator::from_matrix(Matrix::Constant(1, 1, -2.0)), zero_forcing(),
                                  exp_kernel(1.0), 0.0, Vector::Ones(1)};
    const auto tr = solve_strong_stepping(spec, 5.0, 1e-2);
    CHECK(fit_decay_rate(tr, spec.generator.norm()) == Approx(-2.0).margin(1e-3));
    CHECK_THROWS_AS(fit_decay_rate(tr, spec.generator.norm(), 6.0), DomainError);

    auto flat = spec;
    flat.generator = DiscreteGenerator::from_matrix(Matrix::Zero(1, 1));
    CHECK_THROWS_AS(fit_decay_rate(solve_strong_stepping(flat, 1.0, 0.1), flat.generator.norm()), DomainError);

    const CertifiedBeam b;
    std::mt19937_64 rng(33);
    SteppingOptions opt;
    opt.record_stride = 100;
    const auto beam_run =
        solve_strong_stepping({b.gen, b.forcing, b.kernel, 0.0, compatible_in_ball(rng, b, 1.0)}, 200.0, 1e-2, opt);
    CHECK(fit_decay_rate(beam_run, b.gen.norm(), 20.0) <= b.cert.decay_exponent() + 0.05);
}

TEST_CASE("kernel-bound lemma") {
    for (double T : {0.2, 1.0, 3.0}) {
        const auto rep = check_kernel_lemma(exp_kernel(T), 300, 40 + static_cast<int>(T * 10));
        CHECK(rep.violations == 0);
        CHECK(rep.max_ratio < 1.0);
        CHECK(rep.max_closed_form_gap < 1e-10);
    }
}

TEST_CASE("certificate key-value blocks") {
    const auto text = to_key_values(certify_general(0.1, 1.0, 1.0, 2.0, 2.0));
    CHECK(text.find("certificate.decay_exponent = -0.7") != std::string::npos);
    CHECK(text.find("certificate.certified = true") != std::string::npos);
    const auto beam = to_key_values(certify_beam(0.25, 1.0, 0.7));
    CHECK(beam.find("beam_certificate.certified = false") != std::string::npos);
    CHECK(beam.find("beam_certificate.T = 0.7") != std::string::npos);
}
