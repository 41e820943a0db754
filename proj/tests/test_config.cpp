#include "memorybeam/config.hpp"
#include "memorybeam/expression.hpp"
#include "memorybeam/scenario.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace memorybeam;
using Catch::Approx;

TEST_CASE("expressions evaluate with the usual precedence") {
    CHECK(Expression::parse("1 + 2 * 3")(0, 0, 0) == 7.0);
    CHECK(Expression::parse("(1 + 2) * 3")(0, 0, 0) == 9.0);
    CHECK(Expression::parse("2 ^ 3 ^ 2")(0, 0, 0) == 512.0);
    CHECK(Expression::parse("-2 ^ 2")(0, 0, 0) == -4.0);
    CHECK(Expression::parse("8 / 4 / 2")(0, 0, 0) == 1.0);
    CHECK(Expression::parse("1 - 2 - 3")(0, 0, 0) == -4.0);
    CHECK(Expression::parse("1.5e-1 * p1 - p2")(0, 2.0, 0.5) == Approx(-0.2));
    CHECK(Expression::parse("-0.09*p1 - 0.05*p2")(3.0, 1.0, 2.0) == Approx(-0.19));
    CHECK(Expression::parse("t")(4.0, 0, 0) == 4.0);
    CHECK(Expression::parse("sin(t) + cos(0) + exp(0) + log(1) + sqrt(4) + abs(-1) + tanh(0) + tan(0)")(0, 0, 0) ==
          5.0);

    const auto e = Expression::parse("-sin(p1)");
    CHECK(e.uses("p1"));
    CHECK_FALSE(e.uses("t"));
    CHECK_FALSE(e.uses("p2"));
    CHECK(e.text() == "-sin(p1)");
}

TEST_CASE("malformed expressions are rejected with a position") {
    for (const char* bad : {"", "1 +", "(1", "foo(1)", "p3", "1 2", "sin 1", "2 * * 3", "$"}) {
        INFO(bad);
        CHECK_THROWS_AS(Expression::parse(bad), ParseError);
    }
    try {
        (void)Expression::parse("1 + q");
        FAIL("no throw");
    } catch (const ParseError& e) {
        CHECK(e.position() == 4);
    }
}

TEST_CASE("defaults parse from empty text and validate") {
    const auto cfg = parse_config("");
    CHECK(cfg == ScenarioConfig{});
    CHECK_NOTHROW(validate_config(cfg));
    CHECK(parse_config("# only a comment\n\n   \n") == ScenarioConfig{});
}

TEST_CASE("config round trip is exact") {
    ScenarioConfig c;
    c.beam.n_interior = 31;
    c.beam.m = 0.1 + 0.2;  // not a short decimal
    c.forcing.kind = "custom";
    c.forcing.expr = "-0.01 * sin(p1) - 0.002 * p2";
    c.forcing.C = 1.0 / 3.0;
    c.kernel.T = 0.2;
    c.initial.p_coeffs = {0.0, 0.0, 1e-300, -std::nextafter(1.0, 2.0)};
    c.batch.epsilon = {0.1, 0.01, 1e-3};
    c.batch.identical_pairs = true;
    c.seed = 18446744073709551615ull;
    const auto text = serialize_config(c);
    CHECK(parse_config(text) == c);
    CHECK(serialize_config(parse_config(text)) == text);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int k = 0; k < 200; ++k) {
        ScenarioConfig r;
        r.beam.alpha = u(rng);
        r.time.dt = std::abs(u(rng)) * 1e-9;
        r.batch.radius = std::ldexp(u(rng), static_cast<int>(k) - 100);
        r.initial.q_coeffs = {u(rng), u(rng)};
        r.seed = rng();
        CHECK(parse_config(serialize_config(r)) == r);
    }
}

TEST_CASE("parse errors name the key") {
    auto field_of = [](const std::string& text) {
        try {
            (void)parse_config(text);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    CHECK(field_of("kernel.T = abc") == "kernel.T");
    CHECK(field_of("beam.n_interior = 3.5") == "beam.n_interior");
    CHECK(field_of("kernel.width = 1") == "kernel.width");
    CHECK(field_of("kernel.T = 1\nkernel.T = 2") == "kernel.T");
    CHECK(field_of("batch.identical_pairs = maybe") == "batch.identical_pairs");
    CHECK(field_of("batch.epsilon = 0.1, x") == "batch.epsilon");
    CHECK(field_of("output.nodes = 3000000000") == "output.nodes");
    CHECK(field_of("just some words") == "line 1");
    CHECK(parse_config("kernel.T = 0.5 # trailing comment").kernel.T == 0.5);
}

TEST_CASE("validation errors name the key") {
    auto field_of = [](const std::string& text) {
        try {
            validate_config(parse_config(text));
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    CHECK(field_of("kernel.T = -0.2") == "kernel.T");
    CHECK(field_of("kernel.T = 0") == "kernel.T");
    CHECK(field_of("beam.n_interior = 3") == "beam.n_interior");
    CHECK(field_of("beam.beta = 0") == "beam.beta");
    CHECK(field_of("forcing.kind = cubic") == "forcing.kind");
    CHECK(field_of("forcing.lambda = -1\nforcing.kind = linear") == "forcing.lambda");
    CHECK(field_of("forcing.kind = custom") == "forcing.expr");
    CHECK(field_of("forcing.kind = custom\nforcing.expr = p1 +") == "forcing.expr");
    CHECK(field_of("forcing.kind = custom\nforcing.expr = -p1") == "forcing.C");
    CHECK(field_of("time.t_end = 0") == "time.t_end");
    CHECK(field_of("time.dt = 0.3") == "time.dt");
    CHECK(field_of("solver.kind = euler") == "solver.kind");
    CHECK(field_of("initial.kind = file") == "initial.file");
    CHECK(field_of("output.nodes = 40") == "output.nodes");
    CHECK(field_of("batch.epsilon = ") == "batch.epsilon");
    CHECK(field_of("certify.omega_source = given\ncertify.omega = 0") == "certify.omega");
    CHECK(field_of("converge.levels = 2") == "converge.levels");
}

TEST_CASE("polynomial initial data must satisfy the boundary conditions") {
    auto field_of = [](const std::string& text) {
        try {
            validate_config(parse_config(text));
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    // 0.3 x^2 - 0.1 x^3: p''(1) = 0.6 - 0.6 = 0
    CHECK(field_of("initial.p_coeffs = 0, 0, 0.3, -0.1") == "<none>");
    CHECK(field_of("initial.p_coeffs = 0, 0, 1") == "initial.p_coeffs");
    CHECK(field_of("initial.p_coeffs = 1, 0, 0") == "initial.p_coeffs");
    CHECK(field_of("initial.p_coeffs = 0, 1") == "initial.p_coeffs");
    CHECK(field_of("initial.q_coeffs = 0, 0.5") == "initial.q_coeffs");
    CHECK(field_of("initial.q_coeffs = 0, 0, 0.5, 1") == "<none>");
    // 6 x^2 - 4 x^3 + x^4 has p''(1) = 12 - 24 + 12 = 0
    CHECK(field_of("initial.p_coeffs = 0, 0, 6, -4, 1") == "<none>");

    const auto jet = detail::polynomial_jet({0, 0, 6, -4, 1}, 0.5);
    CHECK(jet[0] == Approx(6 * 0.25 - 4 * 0.125 + 0.0625));
    CHECK(jet[1] == Approx(12 * 0.5 - 12 * 0.25 + 4 * 0.125));
    CHECK(jet[2] == Approx(12 - 24 * 0.5 + 12 * 0.25));
}

TEST_CASE("scenario initial states are compatible") {
    const auto sc = build_scenario(parse_config("initial.p_coeffs = 0, 0, 0.3, -0.1\ninitial.q_coeffs = 0, 0, 0.2"));
    const auto d = compatibility_defect(unflatten(sc.initial, sc.grid), sc.grid, 1.0, 1.0);
    CHECK(d.defect == 0.0);
    CHECK(sc.initial(0) == Approx(0.3 / 289.0 - 0.1 / 4913.0));

    std::mt19937_64 rng(8);
    for (int k = 0; k < 20; ++k) {
        const Vector y = random_compatible_state(rng, sc, 1.0);
        CHECK(sc.generator.norm()(y) <= 1.0 + 1e-12);
        const auto dd = compatibility_defect(unflatten(y, sc.grid), sc.grid, 1.0, 1.0);
        CHECK(std::abs(dd.defect) <= 1e-12 * dd.scale);
    }
}

TEST_CASE("initial state files recompute eta") {
    const auto dir = std::filesystem::temp_directory_path() / "memorybeam_test_config";
    std::filesystem::create_directories(dir);
    const Grid grid(4);
    BeamState s = BeamState::zero(grid);
    for (int i = 0; i < grid.nodes(); ++i) s.p(i) = 0.01 * i * i;
    s.eta = 123.0;
    {
        std::ofstream out(dir / "state.csv");
        out << state_csv_header(grid) << "\n" << state_to_csv_row(s) << "\n";
    }
    auto cfg = parse_config("beam.n_interior = 4\ninitial.kind = file\ninitial.file = state.csv\noutput.nodes = 5");
    const auto sc = build_scenario(cfg, dir);
    CHECK(sc.initial(2 * grid.nodes()) == Approx(compatible_eta(s.p, s.q, grid, 1.0, 1.0)));
    CHECK(sc.initial(2 * grid.nodes()) != 123.0);

    cfg.initial.file = "missing.csv";
    CHECK_THROWS_AS(build_scenario(cfg, dir), ConfigError);
    {
        std::ofstream out(dir / "short.csv");
        out << "1,2,3\n";
    }
    cfg.initial.file = "short.csv";
    CHECK_THROWS_AS(build_scenario(cfg, dir), ConfigError);
}

TEST_CASE("custom forcings are probe-verified") {
    const auto ok = build_scenario(
        parse_config("forcing.kind = custom\nforcing.expr = -0.01 * sin(p1) - 0.002 * p2\nforcing.C = 0.01"));
    REQUIRE(ok.probe);
    CHECK(ok.probe->lipschitz_ok);
    CHECK(ok.forcing.zero_at_zero);

    try {
        (void)build_scenario(parse_config("forcing.kind = custom\nforcing.expr = -5 * p1\nforcing.C = 0.01"));
        FAIL("declared C accepted");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "forcing.C");
    }

    const auto shifted = build_scenario(parse_config("forcing.kind = custom\nforcing.expr = 0.01 + 0.01 * p1\nforcing.C = 0.02"));
    CHECK_FALSE(shifted.forcing.zero_at_zero);
    const auto timed = build_scenario(parse_config(
        "forcing.kind = custom\nforcing.expr = 0.01 * sin(t) * p1\nforcing.C = 0.02\nforcing.time_lipschitz = 1"));
    CHECK(timed.forcing.zero_at_zero);
    CHECK_THROWS_AS(build_scenario(parse_config("forcing.kind = custom\nforcing.expr = sin(5 * t) * 0.01 * p1\n"
                                                "forcing.C = 0.02")),
                    ConfigError);
}

TEST_CASE("certify experiment reproduces the beam examples") {
    const ScenarioConfig cfg;
    const auto yes = run_certify(cfg, {0.25, 1.0, 0.5});
    CHECK(yes.passed);
    CHECK(yes.report.find("beam_certificate.T_bound = 0.6666666666666666") != std::string::npos);
    CHECK_FALSE(run_certify(cfg, {0.25, 1.0, 0.7}).passed);
    const auto edge = run_certify(cfg, {0.5, 1.0, 0.01});
    CHECK_FALSE(edge.passed);
    CHECK(edge.report.find("beam_certificate.cond_C = false") != std::string::npos);
    CHECK_THROWS_AS(run_certify(cfg, {}), ConfigError);  // zero forcing has no C
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw DomainError("boom");
                    }),
                    DomainError);
}
