#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcell/engine.hpp"
#include "tcell/errors.hpp"
#include "tcell/numfmt.hpp"

namespace tcell {

/// Whether the proliferation rate c is switched off or takes its
/// density-dependent form mu_n * (1 + 300/Np).
enum class CMode { off, density_dependent };

inline const char* to_string(CMode m) {
    return m == CMode::off ? "off" : "density_dependent";
}

inline CMode parse_c_mode(std::string_view s) {
    if (s == "off") return CMode::off;
    if (s == "density_dependent") return CMode::density_dependent;
    throw ConfigError("unknown c_mode '" + std::string(s) +
                      "' (expected off or density_dependent)");
}

/// Rate constants and structural switches of the three-stock model.
///
/// Constants with an established published value default to it (s0, lambda_t,
/// mu_n, mu_m, and the first listed lambda_n). b, s_bar, Np_bar, lambda_a and
/// A_input have no published values; their defaults are illustrative and are
/// flagged as such in scenario metadata and exported file headers.
struct ParameterSet {
    double s0 = 1.65;                      // thymic output scale (cells/year)
    double lambda_t = std::log(2.0) / 15.7; // thymic decay rate (1/year)
    double lambda_n = 0.22;                // naive proliferation-recruitment rate (1/year)
    double mu_n = 4.4;                     // thymic-naive death rate (1/year)
    double b = 1.0;                        // death-rate scaling (1/cells)
    double s_bar = 1.0;                    // scaling value (dimensionless)
    double Np_bar = 100.0;                 // equilibrium value (cells)
    CMode c_mode = CMode::off;             // proliferation switch
    double lambda_mn = 0.0;                // memory -> Np reversion rate (1/year)
    double lambda_a = 0.0;                 // activated -> memory reversion rate (1/year)
    double mu_m = 0.05;                    // memory death rate (1/year)
    double A_input = 0.0;                  // exogenous activated-cell level (cells)
};

inline void validate(const ParameterSet& p) {
    const std::array<std::pair<const char*, double>, 10> nonneg{{
        {"s0", p.s0}, {"lambda_t", p.lambda_t}, {"lambda_n", p.lambda_n}, {"mu_n", p.mu_n},
        {"b", p.b}, {"s_bar", p.s_bar}, {"lambda_mn", p.lambda_mn}, {"lambda_a", p.lambda_a},
        {"mu_m", p.mu_m}, {"A_input", p.A_input},
    }};
    for (const auto& [name, v] : nonneg) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("params.") + name + " must be finite and >= 0");
    }
    if (!(p.Np_bar > 0.0) || !std::isfinite(p.Np_bar))
        throw ConfigError("params.Np_bar must be finite and > 0");
}

/// The three stocks at one time point.
struct TCellState {
    double N = 0.0;  // thymic-origin naive cells
    double Np = 0.0; // proliferation-origin naive cells
    double M = 0.0;  // memory cells
};

inline void validate(const TCellState& y) {
    const std::array<std::pair<const char*, double>, 3> stocks{{
        {"N", y.N}, {"Np", y.Np}, {"M", y.M}}};
    for (const auto& [name, v] : stocks)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("initial.") + name + " must be finite and >= 0");
}

/// s0 * exp(-lambda_t * t): thymic export before crowding suppression.
/// Strictly decreasing in t whenever lambda_t > 0; halves every
/// log(2)/lambda_t years.
inline double raw_thymic_export(double t, const ParameterSet& p) {
    return p.s0 * std::exp(-p.lambda_t * t);
}

/// Export suppression factor in (0, 1]: 1 / (1 + s_bar * Np / Np_bar).
/// Equals 1 for an empty proliferating pool and falls toward 0 as Np grows.
inline double export_suppression(double Np, const ParameterSet& p) {
    return 1.0 / (1.0 + p.s_bar * Np / p.Np_bar);
}

/// Death-rate multiplier >= 1: 1 + b * Np / (1 + s_bar * Np / Np_bar).
/// Rises from 1 at Np = 0 toward the bound 1 + b * Np_bar / s_bar.
inline double death_rate_multiplier(double Np, const ParameterSet& p) {
    return 1.0 + p.b * Np / (1.0 + p.s_bar * Np / p.Np_bar);
}

/// Dilution of thymic-origin naive cells through proliferation.
/// The printed formula uses only Np; N is accepted so an N-dependent
/// variant stays a local change.
inline double proliferation_dilution(double /*N*/, double Np, const ParameterSet& p) {
    return 1.0 / (1.0 + p.s_bar * Np / p.Np_bar);
}

/// The c * h * Np inflow into the proliferating pool. The density-dependent
/// form c = mu_n * (1 + 300/Np) is evaluated as mu_n * (Np + 300) * h, which
/// removes the 1/Np singularity and is continuous at Np = 0.
inline double proliferation_flow(double N, double Np, const ParameterSet& p) {
    if (p.c_mode == CMode::off) return 0.0;
    return p.mu_n * (Np + 300.0) * proliferation_dilution(N, Np, p);
}

struct Rates {
    double dN = 0.0;
    double dNp = 0.0;
    double dM = 0.0;
};

/// Stock derivatives at time t. The activated-cell level A is the constant
/// exogenous input carried by the parameter set.
inline Rates derivatives(double t, const TCellState& y, const ParameterSet& p) {
    const double s = export_suppression(y.Np, p);
    const double g = death_rate_multiplier(y.Np, p);
    Rates r;
    r.dN = raw_thymic_export(t, p) * s - (p.lambda_n + p.mu_n * g) * y.N;
    r.dNp = p.lambda_n * y.N + proliferation_flow(y.N, y.Np, p) - p.mu_n * y.Np +
            p.lambda_mn * y.M;
    r.dM = p.lambda_a * p.A_input - (p.mu_m + p.lambda_mn) * y.M;
    const std::array<std::pair<const char*, double>, 3> terms{{
        {"dN", r.dN}, {"dNp", r.dNp}, {"dM", r.dM}}};
    for (const auto& [name, v] : terms)
        if (!std::isfinite(v))
            throw ModelError(std::string("non-finite ") + name + " at t = " + format_double(t));
    return r;
}

inline constexpr double kTrecEpsilon = 1e-12;

/// Thymic-origin share of the naive pool, N / (N + Np).
/// Missing when the naive pool is (numerically) empty.
inline std::optional<double> trec_fraction(const TCellState& y) {
    const double total = y.N + y.Np;
    if (total < kTrecEpsilon) return std::nullopt;
    return y.N / total;
}

inline const std::vector<std::string>& stock_labels() {
    static const std::vector<std::string> labels{"N", "Np", "M"};
    return labels;
}

/// One runnable experiment: parameters, initial stocks and integration
/// settings. `unpublished_defaults` lists every field that was left at a
/// default lacking a published value; exported files carry the list in
/// their header.
struct ScenarioSpec {
    std::string name;
    ParameterSet params;
    TCellState initial{100.0, 0.0, 0.0};
    IntegrationConfig integration;
    std::vector<std::string> unpublished_defaults;
};

inline void validate(const ScenarioSpec& s) {
    if (s.name.empty()) throw ConfigError("scenario name must be non-empty");
    validate(s.params);
    validate(s.initial);
    validate(s.integration);
}

inline StateVector initial_state(const ScenarioSpec& s) {
    return StateVector({s.initial.N, s.initial.Np, s.initial.M}, stock_labels());
}

/// Adapts a parameter set to the engine's derivative-function interface.
inline auto make_derivative(const ParameterSet& p) {
    return [p](double t, const StateVector& y) -> std::vector<double> {
        const Rates r = derivatives(t, TCellState{y[0], y[1], y[2]}, p);
        return {r.dN, r.dNp, r.dM};
    };
}

inline const std::vector<std::string>& unpublished_default_keys() {
    static const std::vector<std::string> keys{
        "b", "s_bar", "Np_bar", "lambda_a", "A_input",
        "initial.N", "initial.Np", "initial.M"};
    return keys;
}

/// The 16 built-in presets: the cartesian family of the published value sets
/// lambda_n in {0.003, 0.005, 0.22, 2.1} x c_mode in {off, on} x
/// lambda_mn in {0, 0.5}, named e.g. "ln0.22_cON_mn0.5".
///
/// The presets integrate with rk4 at dt = 0.0025 years: with the illustrative
/// defaults the density-dependent death multiplier reaches mu_n * g ~ 300/year,
/// which puts dt = 0.01 outside the rk4 stability region.
inline std::vector<ScenarioSpec> builtin_scenarios() {
    std::vector<ScenarioSpec> out;
    out.reserve(16);
    for (const double ln : {0.003, 0.005, 0.22, 2.1}) {
        for (const CMode c : {CMode::off, CMode::density_dependent}) {
            for (const double mn : {0.0, 0.5}) {
                ScenarioSpec s;
                s.name = "ln" + format_double(ln) + "_c" +
                         (c == CMode::density_dependent ? "ON" : "OFF") + "_mn" +
                         format_double(mn);
                s.params.lambda_n = ln;
                s.params.c_mode = c;
                s.params.lambda_mn = mn;
                s.initial = TCellState{100.0, 0.0, 0.0};
                s.integration.t0 = 0.0;
                s.integration.t_end = 100.0;
                s.integration.method = Method::rk4;
                s.integration.dt = 0.0025;
                s.integration.record_interval = 0.1;
                s.integration.negativity_policy = NegativityPolicy::clamp;
                s.unpublished_defaults = unpublished_default_keys();
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

inline ScenarioSpec find_builtin(std::string_view name) {
    const auto all = builtin_scenarios();
    for (const auto& s : all)
        if (s.name == name) return s;
    std::string msg = "unknown preset '" + std::string(name) + "'; available presets:";
    for (const auto& s : all) msg += "\n  " + s.name;
    throw ConfigError(msg);
}

} // namespace tcell
