#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcell/engine.hpp"
#include "tcell/errors.hpp"
#include "tcell/model.hpp"
#include "tcell/numfmt.hpp"

namespace tcell {

/// Scalar summaries of a trajectory. The *_at kinds carry a time argument,
/// e.g. "total_naive_at(50)".
struct MetricSpec {
    enum class Kind {
        final_N,
        final_Np,
        final_M,
        total_naive_at,
        trec_fraction_at,
        half_trec_age,
        peak_total_naive,
    };
    Kind kind = Kind::final_N;
    double arg = 0.0;
};

inline std::string metric_name(const MetricSpec& m) {
    switch (m.kind) {
        case MetricSpec::Kind::final_N: return "final_N";
        case MetricSpec::Kind::final_Np: return "final_Np";
        case MetricSpec::Kind::final_M: return "final_M";
        case MetricSpec::Kind::total_naive_at:
            return "total_naive_at(" + format_double(m.arg) + ")";
        case MetricSpec::Kind::trec_fraction_at:
            return "trec_fraction_at(" + format_double(m.arg) + ")";
        case MetricSpec::Kind::half_trec_age: return "half_trec_age";
        case MetricSpec::Kind::peak_total_naive: return "peak_total_naive";
    }
    return "final_N";
}

inline std::string metric_units(const MetricSpec& m) {
    switch (m.kind) {
        case MetricSpec::Kind::trec_fraction_at: return "dimensionless";
        case MetricSpec::Kind::half_trec_age: return "years";
        default: return "model-units";
    }
}

inline MetricSpec parse_metric(std::string_view name) {
    auto parametric = [&](std::string_view prefix,
                          MetricSpec::Kind kind) -> std::optional<MetricSpec> {
        if (name.size() <= prefix.size() + 1 || name.substr(0, prefix.size()) != prefix ||
            name[prefix.size()] != '(' || name.back() != ')')
            return std::nullopt;
        const auto inner = name.substr(prefix.size() + 1, name.size() - prefix.size() - 2);
        const auto t = parse_double(inner);
        if (!t) throw ConfigError("metric '" + std::string(name) + "' has a non-numeric argument");
        return MetricSpec{kind, *t};
    };
    if (name == "final_N") return {MetricSpec::Kind::final_N, 0.0};
    if (name == "final_Np") return {MetricSpec::Kind::final_Np, 0.0};
    if (name == "final_M") return {MetricSpec::Kind::final_M, 0.0};
    if (name == "half_trec_age") return {MetricSpec::Kind::half_trec_age, 0.0};
    if (name == "peak_total_naive") return {MetricSpec::Kind::peak_total_naive, 0.0};
    if (auto m = parametric("total_naive_at", MetricSpec::Kind::total_naive_at)) return *m;
    if (auto m = parametric("trec_fraction_at", MetricSpec::Kind::trec_fraction_at)) return *m;
    throw ConfigError("unknown metric '" + std::string(name) +
                      "'; available: final_N, final_Np, final_M, total_naive_at(t), "
                      "trec_fraction_at(t), half_trec_age, peak_total_naive");
}

struct MetricValue {
    std::string name;
    std::optional<double> value;
    std::string units;
};

namespace detail {

/// Linear interpolation of all stocks at time t (exact hit returns the row).
inline std::vector<double> interpolate_state(const Trajectory& traj, double t) {
    if (traj.times.empty()) throw ConfigError("trajectory is empty");
    const double eps = 1e-9 * std::max(1.0, std::abs(t));
    if (t < traj.times.front() - eps || t > traj.times.back() + eps)
        throw ConfigError("time " + format_double(t) + " is outside the trajectory range [" +
                          format_double(traj.times.front()) + ", " +
                          format_double(traj.times.back()) + "]");
    const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - traj.times.begin());
    if (hi >= traj.times.size()) hi = traj.times.size() - 1;
    if (std::abs(traj.times[hi] - t) <= eps) return traj.states[hi];
    if (hi == 0) return traj.states[0];
    const std::size_t lo = hi - 1;
    const double w = (t - traj.times[lo]) / (traj.times[hi] - traj.times[lo]);
    std::vector<double> out(traj.states[lo].size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = traj.states[lo][i] + w * (traj.states[hi][i] - traj.states[lo][i]);
    return out;
}

inline std::optional<double> trec_of_row(const std::vector<double>& row, std::size_t iN,
                                         std::size_t iNp) {
    return trec_fraction(TCellState{row[iN], row[iNp], 0.0});
}

/// First time the TREC fraction drops below one half, linearly interpolated
/// between the bracketing records. Missing when it never crosses.
inline std::optional<double> half_trec_age(const Trajectory& traj, std::size_t iN,
                                           std::size_t iNp) {
    std::optional<double> prev;
    double prev_t = 0.0;
    for (std::size_t r = 0; r < traj.size(); ++r) {
        const auto f = trec_of_row(traj.states[r], iN, iNp);
        if (f) {
            if (*f < 0.5) {
                if (!prev || !(*prev >= 0.5)) return traj.times[r];
                const double w = (0.5 - *prev) / (*f - *prev);
                return prev_t + w * (traj.times[r] - prev_t);
            }
        }
        prev = f;
        prev_t = traj.times[r];
    }
    return std::nullopt;
}

} // namespace detail

inline MetricValue evaluate_metric(const MetricSpec& m, const Trajectory& traj) {
    if (traj.times.empty()) throw ConfigError("cannot evaluate metrics on an empty trajectory");
    const std::size_t iN = traj.stock_index("N");
    const std::size_t iNp = traj.stock_index("Np");
    const std::size_t iM = traj.stock_index("M");

    MetricValue out{metric_name(m), std::nullopt, metric_units(m)};
    switch (m.kind) {
        case MetricSpec::Kind::final_N: out.value = traj.states.back()[iN]; break;
        case MetricSpec::Kind::final_Np: out.value = traj.states.back()[iNp]; break;
        case MetricSpec::Kind::final_M: out.value = traj.states.back()[iM]; break;
        case MetricSpec::Kind::total_naive_at: {
            const auto row = detail::interpolate_state(traj, m.arg);
            out.value = row[iN] + row[iNp];
            break;
        }
        case MetricSpec::Kind::trec_fraction_at: {
            const auto row = detail::interpolate_state(traj, m.arg);
            out.value = detail::trec_of_row(row, iN, iNp);
            break;
        }
        case MetricSpec::Kind::half_trec_age:
            out.value = detail::half_trec_age(traj, iN, iNp);
            break;
        case MetricSpec::Kind::peak_total_naive: {
            double peak = traj.states.front()[iN] + traj.states.front()[iNp];
            for (const auto& row : traj.states) peak = std::max(peak, row[iN] + row[iNp]);
            out.value = peak;
            break;
        }
    }
    return out;
}

inline std::vector<MetricSpec> default_metrics() {
    return {
        {MetricSpec::Kind::final_N, 0.0},
        {MetricSpec::Kind::final_Np, 0.0},
        {MetricSpec::Kind::final_M, 0.0},
        {MetricSpec::Kind::peak_total_naive, 0.0},
        {MetricSpec::Kind::half_trec_age, 0.0},
    };
}

} // namespace tcell
