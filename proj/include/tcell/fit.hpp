#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "tcell/analysis.hpp"
#include "tcell/errors.hpp"
#include "tcell/metrics.hpp"
#include "tcell/model.hpp"

namespace tcell {

struct FreeParameter {
    std::string path;
    double lower = 0.0;
    double upper = 0.0;
};

/// One observed value of a trajectory observable at a given time.
/// Observables: N, Np, M, total_naive, trec_fraction.
struct ReferencePoint {
    double t = 0.0;
    std::string observable;
    double value = 0.0;
};

struct FitSpec {
    ScenarioSpec base;
    std::vector<FreeParameter> free;
    std::vector<ReferencePoint> reference;
};

struct FitResult {
    ParameterSet params;
    double loss = 0.0;
    std::uint64_t evaluations = 0;
};

namespace detail {

inline double observable_of_row(const std::vector<double>& row, const Trajectory& traj,
                                const std::string& name) {
    if (name == "total_naive")
        return row[traj.stock_index("N")] + row[traj.stock_index("Np")];
    if (name == "trec_fraction") {
        const auto f = trec_of_row(row, traj.stock_index("N"), traj.stock_index("Np"));
        return f ? *f : std::numeric_limits<double>::quiet_NaN();
    }
    return row[traj.stock_index(name)]; // N, Np, M (ConfigError if unknown)
}

inline void validate_observable_name(const std::string& name) {
    static const char* names[] = {"N", "Np", "M", "total_naive", "trec_fraction"};
    for (const char* n : names)
        if (name == n) return;
    throw ConfigError("unknown observable '" + name +
                      "'; expected N, Np, M, total_naive or trec_fraction");
}

} // namespace detail

inline void validate(const FitSpec& spec) {
    validate(spec.base);
    if (spec.free.empty()) throw ConfigError("fit requires at least one free parameter");
    for (const auto& f : spec.free) {
        get_parameter(spec.base, f.path);
        if (!std::isfinite(f.lower) || !std::isfinite(f.upper) || !(f.lower < f.upper))
            throw ConfigError("fit bounds for '" + f.path +
                              "' must be finite with lower < upper");
    }
    if (spec.reference.size() < 2 * spec.free.size())
        throw ConfigError("fit requires at least " + std::to_string(2 * spec.free.size()) +
                          " reference points for " + std::to_string(spec.free.size()) +
                          " free parameters");
    const double eps = 1e-9 * std::max(1.0, std::abs(spec.base.integration.t_end));
    for (const auto& r : spec.reference) {
        detail::validate_observable_name(r.observable);
        if (r.t < spec.base.integration.t0 - eps || r.t > spec.base.integration.t_end + eps)
            throw ConfigError("reference time " + format_double(r.t) +
                              " lies outside the integration window");
    }
}

/// Sum of squared residuals of the scenario against the reference series.
/// Returns +inf when the candidate cannot be evaluated.
inline double fit_loss(const ScenarioSpec& s, const std::vector<ReferencePoint>& reference) {
    Trajectory traj;
    try {
        traj = integrate(make_derivative(s.params), initial_state(s), s.integration);
    } catch (const NumericError&) {
        return std::numeric_limits<double>::infinity();
    }
    double loss = 0.0;
    for (const auto& r : reference) {
        const auto row = detail::interpolate_state(traj, r.t);
        const double predicted = detail::observable_of_row(row, traj, r.observable);
        if (!std::isfinite(predicted)) return std::numeric_limits<double>::infinity();
        const double residual = predicted - r.value;
        loss += residual * residual;
    }
    return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
}

namespace detail {

struct FitProblem {
    const FitSpec& spec;
    std::uint64_t evaluations = 0;

    double operator()(const std::vector<double>& x) {
        ScenarioSpec candidate = spec.base;
        for (std::size_t i = 0; i < spec.free.size(); ++i)
            set_parameter(candidate, spec.free[i].path, x[i]);
        ++evaluations;
        return fit_loss(candidate, spec.reference);
    }
};

inline std::vector<double> clip_to_bounds(std::vector<double> x,
                                          const std::vector<FreeParameter>& free) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], free[i].lower, free[i].upper);
    return x;
}

/// 7 grid points per axis, log-spaced when the axis bounds are positive.
inline std::vector<double> grid_axis(const FreeParameter& f) {
    constexpr int kPoints = 7;
    std::vector<double> out(kPoints);
    const bool log_spaced = f.lower > 0.0;
    for (int j = 0; j < kPoints; ++j) {
        const double w = static_cast<double>(j) / (kPoints - 1);
        out[j] = log_spaced ? std::exp(std::log(f.lower) + w * (std::log(f.upper) - std::log(f.lower)))
                            : f.lower + w * (f.upper - f.lower);
    }
    out.front() = f.lower;
    out.back() = f.upper;
    return out;
}

} // namespace detail

/// Coarse grid search followed by bounded Nelder-Mead refinement from the
/// best grid point. Fully deterministic: the initial simplex steps each
/// coordinate by 5% of its bound range (flipped at the upper bound), ties
/// break by insertion order. Refinement stops when the simplex diameter
/// falls below 1e-6 relative or after 500 refinement evaluations.
inline FitResult fit(const FitSpec& spec) {
    validate(spec);
    const std::size_t n = spec.free.size();
    detail::FitProblem problem{spec};

    // Grid phase.
    std::vector<std::vector<double>> axes;
    axes.reserve(n);
    std::size_t grid = 1;
    for (const auto& f : spec.free) {
        axes.push_back(detail::grid_axis(f));
        grid *= axes.back().size();
    }
    std::vector<double> best_x;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t index = 0; index < grid; ++index) {
        std::vector<double> x(n);
        std::size_t rest = index;
        for (std::size_t a = n; a-- > 0;) {
            x[a] = axes[a][rest % axes[a].size()];
            rest /= axes[a].size();
        }
        const double loss = problem(x);
        if (loss < best_loss) {
            best_loss = loss;
            best_x = x;
        }
    }
    if (!std::isfinite(best_loss))
        throw FitError("every grid evaluation failed; cannot start refinement");

    // Nelder-Mead phase.
    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
    constexpr double kDiameterTol = 1e-6;
    constexpr std::uint64_t kMaxRefineEvals = 500;

    struct Vertex {
        std::vector<double> x;
        double loss;
    };
    std::vector<Vertex> simplex;
    simplex.push_back({best_x, best_loss});
    const std::uint64_t refine_start = problem.evaluations;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x = best_x;
        const double step = 0.05 * (spec.free[i].upper - spec.free[i].lower);
        x[i] = (x[i] + step <= spec.free[i].upper) ? x[i] + step : x[i] - step;
        simplex.push_back({x, problem(x)});
    }

    auto track = [&](const std::vector<double>& x, double loss) {
        if (loss < best_loss) {
            best_loss = loss;
            best_x = x;
        }
    };
    for (const auto& v : simplex) track(v.x, v.loss);

    auto order = [&] {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const Vertex& a, const Vertex& b) { return a.loss < b.loss; });
    };
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = std::max(1.0, std::abs(simplex.front().x[i]));
            for (const auto& v : simplex)
                d = std::max(d, std::abs(v.x[i] - simplex.front().x[i]) / scale);
        }
        return d;
    };

    order();
    while (problem.evaluations - refine_start < kMaxRefineEvals && diameter() >= kDiameterTol) {
        const Vertex& worst = simplex.back();
        std::vector<double> centroid(n, 0.0);
        for (std::size_t v = 0; v + 1 < simplex.size(); ++v)
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].x[i];
        for (double& c : centroid) c /= static_cast<double>(n);

        auto along = [&](double coef) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = centroid[i] + coef * (centroid[i] - worst.x[i]);
            return detail::clip_to_bounds(std::move(x), spec.free);
        };

        std::vector<double> xr = along(kReflect);
        const double fr = problem(xr);
        track(xr, fr);

        if (fr < simplex.front().loss) {
            std::vector<double> xe = along(kExpand);
            const double fe = problem(xe);
            track(xe, fe);
            simplex.back() = (fe < fr) ? Vertex{std::move(xe), fe} : Vertex{std::move(xr), fr};
        } else if (fr < simplex[simplex.size() - 2].loss) {
            simplex.back() = Vertex{std::move(xr), fr};
        } else {
            const bool outside = fr < worst.loss;
            std::vector<double> xc = outside ? along(kContract) : along(-kContract);
            const double fc = problem(xc);
            track(xc, fc);
            if (fc < std::min(fr, worst.loss)) {
                simplex.back() = Vertex{std::move(xc), fc};
            } else {
                for (std::size_t v = 1; v < simplex.size(); ++v) {
                    for (std::size_t i = 0; i < n; ++i)
                        simplex[v].x[i] =
                            simplex.front().x[i] + kShrink * (simplex[v].x[i] - simplex.front().x[i]);
                    simplex[v].loss = problem(simplex[v].x);
                    track(simplex[v].x, simplex[v].loss);
                }
            }
        }
        order();
    }

    FitResult result;
    ScenarioSpec best = spec.base;
    for (std::size_t i = 0; i < n; ++i) set_parameter(best, spec.free[i].path, best_x[i]);
    result.params = best.params;
    result.loss = best_loss;
    result.evaluations = problem.evaluations;
    return result;
}

} // namespace tcell
