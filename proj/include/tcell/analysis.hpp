#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "tcell/engine.hpp"
#include "tcell/errors.hpp"
#include "tcell/metrics.hpp"
#include "tcell/model.hpp"

namespace tcell {

// ---------------------------------------------------------------------------
// Parameter paths
// ---------------------------------------------------------------------------

namespace detail {

inline double* numeric_param_field(ParameterSet& p, std::string_view path) {
    if (path == "s0") return &p.s0;
    if (path == "lambda_t") return &p.lambda_t;
    if (path == "lambda_n") return &p.lambda_n;
    if (path == "mu_n") return &p.mu_n;
    if (path == "b") return &p.b;
    if (path == "s_bar") return &p.s_bar;
    if (path == "Np_bar") return &p.Np_bar;
    if (path == "lambda_mn") return &p.lambda_mn;
    if (path == "lambda_a") return &p.lambda_a;
    if (path == "mu_m") return &p.mu_m;
    if (path == "A_input") return &p.A_input;
    return nullptr;
}

inline std::string_view strip_params_prefix(std::string_view path) {
    constexpr std::string_view prefix = "params.";
    if (path.substr(0, prefix.size()) == prefix) return path.substr(prefix.size());
    return path;
}

} // namespace detail

inline const char* numeric_parameter_paths() {
    return "s0, lambda_t, lambda_n, mu_n, b, s_bar, Np_bar, lambda_mn, lambda_a, mu_m, A_input";
}

/// Writes one numeric rate constant addressed by name (optionally prefixed
/// "params."). Sweep axes, sensitivity probes and fit parameters all resolve
/// through here.
inline void set_parameter(ScenarioSpec& s, std::string_view path, double value) {
    if (double* f = detail::numeric_param_field(s.params, detail::strip_params_prefix(path))) {
        *f = value;
        return;
    }
    throw ConfigError("unknown parameter path '" + std::string(path) + "'; expected one of: " +
                      numeric_parameter_paths());
}

inline double get_parameter(const ScenarioSpec& s, std::string_view path) {
    ParameterSet copy = s.params;
    if (const double* f = detail::numeric_param_field(copy, detail::strip_params_prefix(path)))
        return *f;
    throw ConfigError("unknown parameter path '" + std::string(path) + "'; expected one of: " +
                      numeric_parameter_paths());
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

struct ScenarioResult {
    Trajectory trajectory;
    std::vector<MetricValue> metrics;
};

namespace detail {

/// `check_params = false` is used by sensitivity probes, which may step a
/// rate slightly outside its admissible range; the equations stay defined.
inline ScenarioResult run_scenario_impl(const ScenarioSpec& s,
                                        const std::vector<MetricSpec>& metrics,
                                        bool check_params) {
    if (s.name.empty()) throw ConfigError("scenario name must be non-empty");
    if (check_params) {
        validate(s.params);
        validate(s.initial);
    }
    validate(s.integration);

    const std::string prefix = "scenario '" + s.name + "': ";
    ScenarioResult out;
    try {
        out.trajectory = integrate(make_derivative(s.params), initial_state(s), s.integration);
    } catch (const IntegrationError& e) {
        throw IntegrationError(prefix + e.what());
    } catch (const ModelError& e) {
        throw ModelError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    }
    out.metrics.reserve(metrics.size());
    for (const auto& m : metrics) out.metrics.push_back(evaluate_metric(m, out.trajectory));
    return out;
}

} // namespace detail

/// Integrates the scenario and attaches the requested metrics.
inline ScenarioResult run_scenario(const ScenarioSpec& s, const std::vector<MetricSpec>& metrics) {
    return detail::run_scenario_impl(s, metrics, true);
}

inline ScenarioResult run_scenario(const ScenarioSpec& s) {
    return run_scenario(s, default_metrics());
}

// ---------------------------------------------------------------------------
// Cartesian sweeps
// ---------------------------------------------------------------------------

struct SweepAxis {
    std::string path;
    std::vector<double> values;
};

struct SweepSpec {
    ScenarioSpec base;
    std::vector<SweepAxis> axes;
    std::vector<MetricSpec> metrics;
};

struct SweepRow {
    std::vector<double> coords;
    std::vector<std::optional<double>> values;
    std::string error; // empty on success
};

struct SweepResult {
    std::vector<std::string> axis_names;
    std::vector<std::string> metric_names;
    std::vector<SweepRow> rows;
};

inline void validate(const SweepSpec& spec) {
    validate(spec.base);
    if (spec.axes.empty()) throw ConfigError("sweep requires at least one axis");
    for (const auto& axis : spec.axes) {
        if (axis.values.empty())
            throw ConfigError("sweep axis '" + axis.path + "' has an empty value list");
        get_parameter(spec.base, axis.path); // rejects unknown paths
    }
    if (spec.metrics.empty()) throw ConfigError("sweep requires at least one metric");
}

/// Evaluates every grid point (first axis slowest, lexicographic order).
/// A failing point records its error in the row; other points are
/// unaffected. With threads > 1 the points run concurrently; rows are
/// assembled by grid index, so the result is identical for any thread count.
inline SweepResult sweep(const SweepSpec& spec, unsigned threads = 1) {
    validate(spec);

    std::size_t grid = 1;
    for (const auto& axis : spec.axes) grid *= axis.values.size();

    SweepResult result;
    for (const auto& axis : spec.axes) result.axis_names.push_back(axis.path);
    for (const auto& m : spec.metrics) result.metric_names.push_back(metric_name(m));
    result.rows.resize(grid);

    auto eval_point = [&](std::size_t index) {
        SweepRow& row = result.rows[index];
        row.coords.resize(spec.axes.size());
        std::size_t rest = index;
        for (std::size_t a = spec.axes.size(); a-- > 0;) {
            const auto& values = spec.axes[a].values;
            row.coords[a] = values[rest % values.size()];
            rest /= values.size();
        }
        ScenarioSpec point = spec.base;
        for (std::size_t a = 0; a < spec.axes.size(); ++a)
            set_parameter(point, spec.axes[a].path, row.coords[a]);
        try {
            validate(point.params);
            const auto res = run_scenario(point, spec.metrics);
            row.values.reserve(res.metrics.size());
            for (const auto& m : res.metrics) row.values.push_back(m.value);
        } catch (const std::exception& e) {
            row.values.assign(spec.metrics.size(), std::nullopt);
            row.error = e.what();
        }
    };

    const unsigned workers = std::min<std::size_t>(std::max(1u, threads), grid);
    if (workers <= 1) {
        for (std::size_t i = 0; i < grid; ++i) eval_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= grid) return;
                    eval_point(i);
                }
            });
        for (auto& th : pool) th.join();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Local sensitivity
// ---------------------------------------------------------------------------

/// Central finite difference of a metric with respect to one parameter:
/// (m(p*(1+delta)) - m(p*(1-delta))) / (2*p*delta). When the parameter is
/// exactly zero, delta is interpreted as an absolute step instead.
inline double sensitivity(const ScenarioSpec& s, const std::string& parameter_path,
                          const MetricSpec& metric, double rel_delta = 1e-3) {
    if (!(rel_delta > 0.0)) throw ConfigError("sensitivity delta must be positive");
    validate(s);
    const double p0 = get_parameter(s, parameter_path);
    const double step = (p0 != 0.0) ? p0 * rel_delta : rel_delta;

    auto probe = [&](double value) -> std::optional<double> {
        ScenarioSpec probe_spec = s;
        set_parameter(probe_spec, parameter_path, value);
        const auto res = detail::run_scenario_impl(probe_spec, {metric}, false);
        return res.metrics.front().value;
    };

    const auto upper = probe(p0 + step);
    const auto lower = probe(p0 - step);
    if (!upper || !lower)
        throw SensitivityError("metric '" + metric_name(metric) + "' is undefined at a probe of '" +
                               parameter_path + "' around " + format_double(p0));
    return (*upper - *lower) / (2.0 * step);
}

} // namespace tcell
