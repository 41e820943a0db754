#pragma once

// Scenario configuration: flat `key = value` text with dotted section names.
//
//   # comment
//   beam.n_interior = 16
//   forcing.kind = linear
//   batch.epsilon = 0.1, 0.01, 0.001
//
// Every key is optional and defaults as in ScenarioConfig. Unknown keys and
// malformed values raise ConfigError naming the key. serialize() writes every
// key in a fixed order with shortest round-trip numbers, so
// parse(serialize(c)) == c.

#include "memorybeam/detail/text.hpp"
#include "memorybeam/errors.hpp"
#include "memorybeam/expression.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

namespace memorybeam {

struct ScenarioConfig {
    struct Beam {
        int n_interior = 16;
        double m = 1.0;
        double alpha = 1.0;
        double beta = 1.0;
        bool operator==(const Beam&) const = default;
    } beam;
    struct Energy {
        double bend = 1.0;
        double kin = 1.0;
        double eta = 1.0;
        bool operator==(const Energy&) const = default;
    } energy;
    struct Forcing {
        std::string kind = "zero";  ///< zero | linear | custom
        double gamma = 0.0;
        double lambda = 0.0;
        std::string expr;           ///< custom: g(t, p1, p2)
        double C = 0.0;             ///< custom: declared Lipschitz constant
        double time_lipschitz = 0.0;  ///< custom: declared C_n
        bool operator==(const Forcing&) const = default;
    } forcing;
    struct Kernel {
        double T = 0.2;
        bool operator==(const Kernel&) const = default;
    } kernel;
    struct Time {
        double t0 = 0.0;
        double t_end = 2.0;
        double dt = 1e-3;
        bool operator==(const Time&) const = default;
    } time;
    struct Solver {
        std::string kind = "stepping";  ///< stepping | picard
        double tol = 1e-10;
        int max_iter = 200;
        double window = 1.0;
        bool operator==(const Solver&) const = default;
    } solver;
    struct Initial {
        std::string kind = "polynomial";  ///< zero | polynomial | file
        std::vector<double> p_coeffs{0.0, 0.0, 0.3, -0.1};
        std::vector<double> q_coeffs{0.0};
        std::string file;
        bool operator==(const Initial&) const = default;
    } initial;
    struct Output {
        int nodes = 8;
        int stride = 10;
        std::string trajectory = "trajectory.csv";
        std::string report = "report.txt";
        bool operator==(const Output&) const = default;
    } output;
    struct Semigroup {
        double t_max = 20.0;
        int samples = 201;
        bool operator==(const Semigroup&) const = default;
    } semigroup;
    struct Certify {
        std::string omega_source = "estimate";  ///< estimate | given
        double omega = 1.0;
        bool operator==(const Certify&) const = default;
    } certify;
    struct Batch {
        int pairs = 10;
        int trajectories = 8;
        double radius = 1.0;
        std::vector<double> epsilon{1e-3};
        double envelope_slack = 0.05;
        double time_slack = 0.1;
        double bound_slack = 0.05;
        double dt = 1e-2;
        int stride = 10;
        bool identical_pairs = false;
        double horizon = 0.0;  ///< 0: run to the attractor deadline
        bool operator==(const Batch&) const = default;
    } batch;
    struct Converge {
        int levels = 3;
        int eigen_count = 5;
        double order_target = 2.0;
        double order_tolerance = 0.3;
        bool operator==(const Converge&) const = default;
    } converge;
    std::uint64_t seed = 20240611;

    bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
}

struct ConfigField {
    std::string key;
    std::function<std::string(const ScenarioConfig&)> get;
    std::function<void(ScenarioConfig&, std::string_view)> set;
};

inline double parse_number(const std::string& key, std::string_view raw) {
    const auto v = parse_double(raw);
    if (!v) throw ConfigError(key, "expected a number, got '" + std::string(raw) + "'");
    return *v;
}

template <class T>
T parse_integer(const std::string& key, std::string_view raw) {
    T v{};
    const auto* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
    if (ec == std::errc::result_out_of_range) throw ConfigError(key, "integer out of range");
    if (ec != std::errc{} || ptr != end || raw.empty())
        throw ConfigError(key, "expected an integer, got '" + std::string(raw) + "'");
    return v;
}

inline bool parse_bool(const std::string& key, std::string_view raw) {
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + std::string(raw) + "'");
}

inline std::vector<double> parse_list(const std::string& key, std::string_view raw) {
    std::vector<double> out;
    if (trim(raw).empty()) return out;
    for (auto cell : split(raw, ',')) out.push_back(parse_number(key, cell));
    return out;
}

template <class Get>
ConfigField number_field(std::string key, Get get) {
    return {key, [get](const ScenarioConfig& c) { return format_double(get(const_cast<ScenarioConfig&>(c))); },
            [get, key](ScenarioConfig& c, std::string_view raw) { get(c) = parse_number(key, raw); }};
}

template <class Get>
ConfigField int_field(std::string key, Get get) {
    return {key, [get](const ScenarioConfig& c) { return std::to_string(get(const_cast<ScenarioConfig&>(c))); },
            [get, key](ScenarioConfig& c, std::string_view raw) {
                using T = std::remove_reference_t<decltype(get(c))>;
                get(c) = parse_integer<T>(key, raw);
            }};
}

template <class Get>
ConfigField string_field(std::string key, Get get) {
    return {key, [get](const ScenarioConfig& c) { return get(const_cast<ScenarioConfig&>(c)); },
            [get](ScenarioConfig& c, std::string_view raw) { get(c) = std::string(raw); }};
}

template <class Get>
ConfigField list_field(std::string key, Get get) {
    return {key, [get](const ScenarioConfig& c) { return format_list(get(const_cast<ScenarioConfig&>(c))); },
            [get, key](ScenarioConfig& c, std::string_view raw) { get(c) = parse_list(key, raw); }};
}

template <class Get>
ConfigField bool_field(std::string key, Get get) {
    return {key, [get](const ScenarioConfig& c) { return std::string(get(const_cast<ScenarioConfig&>(c)) ? "true" : "false"); },
            [get, key](ScenarioConfig& c, std::string_view raw) { get(c) = parse_bool(key, raw); }};
}

#define MEMORYBEAM_FIELD(kind, key, member) kind##_field(key, [](ScenarioConfig& c) -> auto& { return c.member; })

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields{
        MEMORYBEAM_FIELD(int, "beam.n_interior", beam.n_interior),
        MEMORYBEAM_FIELD(number, "beam.m", beam.m),
        MEMORYBEAM_FIELD(number, "beam.alpha", beam.alpha),
        MEMORYBEAM_FIELD(number, "beam.beta", beam.beta),
        MEMORYBEAM_FIELD(number, "energy.bend", energy.bend),
        MEMORYBEAM_FIELD(number, "energy.kin", energy.kin),
        MEMORYBEAM_FIELD(number, "energy.eta", energy.eta),
        MEMORYBEAM_FIELD(string, "forcing.kind", forcing.kind),
        MEMORYBEAM_FIELD(number, "forcing.gamma", forcing.gamma),
        MEMORYBEAM_FIELD(number, "forcing.lambda", forcing.lambda),
        MEMORYBEAM_FIELD(string, "forcing.expr", forcing.expr),
        MEMORYBEAM_FIELD(number, "forcing.C", forcing.C),
        MEMORYBEAM_FIELD(number, "forcing.time_lipschitz", forcing.time_lipschitz),
        MEMORYBEAM_FIELD(number, "kernel.T", kernel.T),
        MEMORYBEAM_FIELD(number, "time.t0", time.t0),
        MEMORYBEAM_FIELD(number, "time.t_end", time.t_end),
        MEMORYBEAM_FIELD(number, "time.dt", time.dt),
        MEMORYBEAM_FIELD(string, "solver.kind", solver.kind),
        MEMORYBEAM_FIELD(number, "solver.tol", solver.tol),
        MEMORYBEAM_FIELD(int, "solver.max_iter", solver.max_iter),
        MEMORYBEAM_FIELD(number, "solver.window", solver.window),
        MEMORYBEAM_FIELD(string, "initial.kind", initial.kind),
        MEMORYBEAM_FIELD(list, "initial.p_coeffs", initial.p_coeffs),
        MEMORYBEAM_FIELD(list, "initial.q_coeffs", initial.q_coeffs),
        MEMORYBEAM_FIELD(string, "initial.file", initial.file),
        MEMORYBEAM_FIELD(int, "output.nodes", output.nodes),
        MEMORYBEAM_FIELD(int, "output.stride", output.stride),
        MEMORYBEAM_FIELD(string, "output.trajectory", output.trajectory),
        MEMORYBEAM_FIELD(string, "output.report", output.report),
        MEMORYBEAM_FIELD(number, "semigroup.t_max", semigroup.t_max),
        MEMORYBEAM_FIELD(int, "semigroup.samples", semigroup.samples),
        MEMORYBEAM_FIELD(string, "certify.omega_source", certify.omega_source),
        MEMORYBEAM_FIELD(number, "certify.omega", certify.omega),
        MEMORYBEAM_FIELD(int, "batch.pairs", batch.pairs),
        MEMORYBEAM_FIELD(int, "batch.trajectories", batch.trajectories),
        MEMORYBEAM_FIELD(number, "batch.radius", batch.radius),
        MEMORYBEAM_FIELD(list, "batch.epsilon", batch.epsilon),
        MEMORYBEAM_FIELD(number, "batch.envelope_slack", batch.envelope_slack),
        MEMORYBEAM_FIELD(number, "batch.time_slack", batch.time_slack),
        MEMORYBEAM_FIELD(number, "batch.bound_slack", batch.bound_slack),
        MEMORYBEAM_FIELD(number, "batch.dt", batch.dt),
        MEMORYBEAM_FIELD(int, "batch.stride", batch.stride),
        MEMORYBEAM_FIELD(bool, "batch.identical_pairs", batch.identical_pairs),
        MEMORYBEAM_FIELD(number, "batch.horizon", batch.horizon),
        MEMORYBEAM_FIELD(int, "converge.levels", converge.levels),
        MEMORYBEAM_FIELD(int, "converge.eigen_count", converge.eigen_count),
        MEMORYBEAM_FIELD(number, "converge.order_target", converge.order_target),
        MEMORYBEAM_FIELD(number, "converge.order_tolerance", converge.order_tolerance),
        MEMORYBEAM_FIELD(int, "seed", seed),
    };
    return fields;
}

#undef MEMORYBEAM_FIELD

}  // namespace detail

/// Parses configuration text; keys not present keep their defaults.
inline ScenarioConfig parse_config(std::string_view text) {
    ScenarioConfig cfg;
    std::map<std::string, const detail::ConfigField*, std::less<>> index;
    for (const auto& f : detail::config_fields()) index.emplace(f.key, &f);
    std::map<std::string, int, std::less<>> seen;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        const auto it = index.find(key);
        if (it == index.end()) throw ConfigError(std::string(key), "unknown key (line " + std::to_string(line_no) + ")");
        if (const auto [pos, fresh] = seen.emplace(std::string(key), line_no); !fresh)
            throw ConfigError(std::string(key), "duplicate key (lines " + std::to_string(pos->second) + " and " +
                                                    std::to_string(line_no) + ")");
        it->second->set(cfg, value);
    }
    return cfg;
}

inline std::string serialize_config(const ScenarioConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& f : detail::config_fields()) {
        const auto dot = f.key.find('.');
        const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
        if (sec != section && !out.empty()) out += "\n";
        section = sec;
        out += f.key + " = " + f.get(cfg) + "\n";
    }
    return out;
}

namespace detail {

inline void require_positive_field(const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(key, "must be a positive finite number (got " + format_double(v) + ")");
}

inline void require_nonnegative_field(const std::string& key, double v) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError(key, "must be a nonnegative finite number (got " + format_double(v) + ")");
}

inline void require_finite_field(const std::string& key, double v) {
    if (!std::isfinite(v)) throw ConfigError(key, "must be finite (got " + format_double(v) + ")");
}

inline void require_one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    std::string names;
    for (const char* a : allowed) {
        if (v == a) return;
        names += (names.empty() ? "" : " | ") + std::string(a);
    }
    throw ConfigError(key, "must be one of " + names + " (got '" + v + "')");
}

/// p(x) = sum c_k x^k: value and first two derivatives at x.
inline std::array<double, 3> polynomial_jet(const std::vector<double>& c, double x) {
    double v = 0, d1 = 0, d2 = 0;
    for (std::size_t k = c.size(); k-- > 0;) {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + v;
        v = v * x + c[k];
    }
    return {v, d1, d2};
}

}  // namespace detail

/// Checks every constraint that does not need the filesystem.
inline void validate_config(const ScenarioConfig& c) {
    using namespace detail;
    if (c.beam.n_interior < 4 || c.beam.n_interior > 256)
        throw ConfigError("beam.n_interior", "must lie in [4, 256] (got " + std::to_string(c.beam.n_interior) + ")");
    require_positive_field("beam.m", c.beam.m);
    require_positive_field("beam.alpha", c.beam.alpha);
    require_positive_field("beam.beta", c.beam.beta);
    require_positive_field("energy.bend", c.energy.bend);
    require_positive_field("energy.kin", c.energy.kin);
    require_positive_field("energy.eta", c.energy.eta);

    require_one_of("forcing.kind", c.forcing.kind, {"zero", "linear", "custom"});
    require_finite_field("forcing.gamma", c.forcing.gamma);
    require_nonnegative_field("forcing.lambda", c.forcing.lambda);
    if (c.forcing.kind == "custom") {
        if (trim(c.forcing.expr).empty()) throw ConfigError("forcing.expr", "required when forcing.kind = custom");
        try {
            (void)Expression::parse(c.forcing.expr);
        } catch (const ParseError& e) {
            throw ConfigError("forcing.expr", e.what());
        }
        require_positive_field("forcing.C", c.forcing.C);
        require_nonnegative_field("forcing.time_lipschitz", c.forcing.time_lipschitz);
    }
    require_positive_field("kernel.T", c.kernel.T);

    require_finite_field("time.t0", c.time.t0);
    require_finite_field("time.t_end", c.time.t_end);
    require_positive_field("time.dt", c.time.dt);
    if (!(c.time.t_end > c.time.t0)) throw ConfigError("time.t_end", "must exceed time.t0");
    const double ratio = (c.time.t_end - c.time.t0) / c.time.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-8 * std::max(1.0, ratio))
        throw ConfigError("time.dt", "must divide t_end - t0 into a whole number of steps");

    require_one_of("solver.kind", c.solver.kind, {"stepping", "picard"});
    require_positive_field("solver.tol", c.solver.tol);
    if (c.solver.max_iter < 1) throw ConfigError("solver.max_iter", "must be >= 1");
    require_finite_field("solver.window", c.solver.window);

    require_one_of("initial.kind", c.initial.kind, {"zero", "polynomial", "file"});
    if (c.initial.kind == "polynomial") {
        for (double v : c.initial.p_coeffs) require_finite_field("initial.p_coeffs", v);
        for (double v : c.initial.q_coeffs) require_finite_field("initial.q_coeffs", v);
        const auto p0 = polynomial_jet(c.initial.p_coeffs, 0.0);
        const auto p1 = polynomial_jet(c.initial.p_coeffs, 1.0);
        const auto q0 = polynomial_jet(c.initial.q_coeffs, 0.0);
        double scale = 1.0;
        for (double v : c.initial.p_coeffs) scale = std::max(scale, std::abs(v));
        if (p0[0] != 0.0 || p0[1] != 0.0)
            throw ConfigError("initial.p_coeffs", "clamped end needs p(0) = p'(0) = 0 (first two coefficients zero)");
        if (std::abs(p1[2]) > 1e-12 * scale * static_cast<double>(c.initial.p_coeffs.size() * c.initial.p_coeffs.size()))
            throw ConfigError("initial.p_coeffs", "free end needs p''(1) = 0 (got " + format_double(p1[2]) + ")");
        if (q0[0] != 0.0 || q0[1] != 0.0)
            throw ConfigError("initial.q_coeffs", "clamped end needs q(0) = q'(0) = 0 (first two coefficients zero)");
    }
    if (c.initial.kind == "file" && trim(c.initial.file).empty())
        throw ConfigError("initial.file", "required when initial.kind = file");

    if (c.output.nodes < 0) throw ConfigError("output.nodes", "must be >= 0 (0 writes every node)");
    if (c.output.nodes > c.beam.n_interior + 1)
        throw ConfigError("output.nodes", "exceeds the node count " + std::to_string(c.beam.n_interior + 1));
    if (c.output.stride < 1) throw ConfigError("output.stride", "must be >= 1");
    if (c.output.trajectory.empty()) throw ConfigError("output.trajectory", "must not be empty");
    if (c.output.report.empty()) throw ConfigError("output.report", "must not be empty");

    require_positive_field("semigroup.t_max", c.semigroup.t_max);
    if (c.semigroup.samples < 8) throw ConfigError("semigroup.samples", "must be >= 8");
    require_one_of("certify.omega_source", c.certify.omega_source, {"estimate", "given"});
    if (c.certify.omega_source == "given") require_positive_field("certify.omega", c.certify.omega);

    if (c.batch.pairs < 0) throw ConfigError("batch.pairs", "must be >= 0");
    if (c.batch.trajectories < 0) throw ConfigError("batch.trajectories", "must be >= 0");
    require_positive_field("batch.radius", c.batch.radius);
    if (c.batch.epsilon.empty()) throw ConfigError("batch.epsilon", "needs at least one value");
    for (double e : c.batch.epsilon) require_positive_field("batch.epsilon", e);
    require_nonnegative_field("batch.envelope_slack", c.batch.envelope_slack);
    require_nonnegative_field("batch.time_slack", c.batch.time_slack);
    require_nonnegative_field("batch.bound_slack", c.batch.bound_slack);
    require_positive_field("batch.dt", c.batch.dt);
    if (c.batch.stride < 1) throw ConfigError("batch.stride", "must be >= 1");
    require_nonnegative_field("batch.horizon", c.batch.horizon);

    if (c.converge.levels < 3) throw ConfigError("converge.levels", "must be >= 3");
    if (c.converge.eigen_count < 1) throw ConfigError("converge.eigen_count", "must be >= 1");
    require_positive_field("converge.order_target", c.converge.order_target);
    require_nonnegative_field("converge.order_tolerance", c.converge.order_tolerance);
}

}  // namespace memorybeam
