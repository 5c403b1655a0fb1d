#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "tcell/errors.hpp"
#include "tcell/numfmt.hpp"

namespace tcell {

/// Labeled vector of stock levels. Labels travel with the values so that
/// numeric failures can name the offending stock.
struct StateVector {
    std::vector<double> values;
    std::vector<std::string> labels;

    StateVector() = default;

    explicit StateVector(std::vector<double> v) : values(std::move(v)) {
        labels.reserve(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            labels.push_back("y" + std::to_string(i));
    }

    StateVector(std::vector<double> v, std::vector<std::string> l)
        : values(std::move(v)), labels(std::move(l)) {
        if (values.size() != labels.size())
            throw ConfigError("state vector has " + std::to_string(values.size()) +
                              " values but " + std::to_string(labels.size()) + " labels");
    }

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const noexcept { return values[i]; }
    double& operator[](std::size_t i) noexcept { return values[i]; }
};

enum class Method { euler, rk4, rkf45 };
enum class NegativityPolicy { clamp, reject };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::euler: return "euler";
        case Method::rk4: return "rk4";
        case Method::rkf45: return "rkf45";
    }
    return "rk4";
}

inline const char* to_string(NegativityPolicy p) {
    return p == NegativityPolicy::clamp ? "clamp" : "reject";
}

inline Method parse_method(std::string_view s) {
    if (s == "euler") return Method::euler;
    if (s == "rk4") return Method::rk4;
    if (s == "rkf45") return Method::rkf45;
    throw ConfigError("unknown integration method '" + std::string(s) +
                      "' (expected euler, rk4 or rkf45)");
}

inline NegativityPolicy parse_negativity_policy(std::string_view s) {
    if (s == "clamp") return NegativityPolicy::clamp;
    if (s == "reject") return NegativityPolicy::reject;
    throw ConfigError("unknown negativity_policy '" + std::string(s) +
                      "' (expected clamp or reject)");
}

/// Integration settings. `dt` is the step of the fixed-step methods and the
/// initial step of rkf45; the tolerances and dt bounds apply to rkf45 only.
struct IntegrationConfig {
    double t0 = 0.0;
    double t_end = 100.0;
    Method method = Method::rk4;
    double dt = 0.01;
    double abs_tol = 1e-8;
    double rel_tol = 1e-8;
    double dt_min = 1e-9;
    double dt_max = 1.0;
    double record_interval = 0.1;
    NegativityPolicy negativity_policy = NegativityPolicy::clamp;
};

inline void validate(const IntegrationConfig& cfg) {
    if (!(cfg.t_end > cfg.t0))
        throw ConfigError("integration.t_end must be greater than integration.t0");
    if (!(cfg.dt > 0.0)) throw ConfigError("integration.dt must be positive");
    if (!(cfg.dt_min > 0.0)) throw ConfigError("integration.dt_min must be positive");
    if (!(cfg.dt_max >= cfg.dt_min))
        throw ConfigError("integration.dt_max must be >= integration.dt_min");
    if (!(cfg.abs_tol > 0.0)) throw ConfigError("integration.abs_tol must be positive");
    if (!(cfg.rel_tol > 0.0)) throw ConfigError("integration.rel_tol must be positive");
    if (!(cfg.record_interval > 0.0))
        throw ConfigError("integration.record_interval must be positive");
    const double span = cfg.t_end - cfg.t0;
    if (span / cfg.dt > 1e9)
        throw ConfigError("integration.dt is too small for the integration span (over 1e9 steps)");
    if (span / cfg.record_interval > 1e8)
        throw ConfigError(
            "integration.record_interval is too small for the integration span (over 1e8 records)");
}

/// One stock going below zero and being pinned back to it.
struct ClampEvent {
    double t = 0.0;
    std::size_t stock = 0;
    double undershoot = 0.0; // value before clamping
};

struct StepLog {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::vector<ClampEvent> clamps;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<std::string> labels;
    StepLog step_log;

    std::size_t stock_index(std::string_view label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return i;
        throw ConfigError("trajectory has no stock named '" + std::string(label) + "'");
    }

    std::size_t size() const noexcept { return times.size(); }
};

template <typename F>
concept derivative_fn =
    std::invocable<F&, double, const StateVector&> &&
    std::convertible_to<std::invoke_result_t<F&, double, const StateVector&>,
                        std::vector<double>>;

namespace detail {

template <typename F>
std::vector<double> eval_derivative(F& f, double t, const StateVector& y) {
    std::vector<double> k = f(t, y);
    if (k.size() != y.size())
        throw IntegrationError("derivative returned " + std::to_string(k.size()) +
                               " components for a " + std::to_string(y.size()) +
                               "-stock state at t = " + format_double(t));
    for (std::size_t i = 0; i < k.size(); ++i)
        if (!std::isfinite(k[i]))
            throw IntegrationError("non-finite derivative for stock '" + y.labels[i] +
                                   "' at t = " + format_double(t));
    return k;
}

inline StateVector offset_state(const StateVector& y, const std::vector<double>& k, double h) {
    StateVector out = y;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += h * k[i];
    return out;
}

} // namespace detail

/// One explicit Euler step: y + dt * f(t, y).
template <derivative_fn F>
StateVector step_euler(F&& f, double t, const StateVector& y, double dt) {
    const auto k = detail::eval_derivative(f, t, y);
    return detail::offset_state(y, k, dt);
}

/// One classical fourth-order Runge-Kutta step (stage weights 1/6, 2/6, 2/6, 1/6).
template <derivative_fn F>
StateVector step_rk4(F&& f, double t, const StateVector& y, double dt) {
    const auto k1 = detail::eval_derivative(f, t, y);
    const auto k2 = detail::eval_derivative(f, t + dt / 2.0, detail::offset_state(y, k1, dt / 2.0));
    const auto k3 = detail::eval_derivative(f, t + dt / 2.0, detail::offset_state(y, k2, dt / 2.0));
    const auto k4 = detail::eval_derivative(f, t + dt, detail::offset_state(y, k3, dt));
    StateVector out = y;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

namespace detail {

/// Fehlberg 4(5) embedded pair. Returns the fifth-order solution together
/// with the componentwise |y5 - y4| local error estimate.
template <typename F>
std::pair<StateVector, std::vector<double>> step_rkf45(F& f, double t, const StateVector& y,
                                                       double h) {
    const std::size_t n = y.size();
    const auto k1 = eval_derivative(f, t, y);

    StateVector s = y;
    for (std::size_t i = 0; i < n; ++i)
        s.values[i] = y[i] + h * (k1[i] / 4.0);
    const auto k2 = eval_derivative(f, t + h / 4.0, s);

    for (std::size_t i = 0; i < n; ++i)
        s.values[i] = y[i] + h * (3.0 / 32.0 * k1[i] + 9.0 / 32.0 * k2[i]);
    const auto k3 = eval_derivative(f, t + 3.0 * h / 8.0, s);

    for (std::size_t i = 0; i < n; ++i)
        s.values[i] = y[i] + h * (1932.0 / 2197.0 * k1[i] - 7200.0 / 2197.0 * k2[i] +
                                  7296.0 / 2197.0 * k3[i]);
    const auto k4 = eval_derivative(f, t + 12.0 * h / 13.0, s);

    for (std::size_t i = 0; i < n; ++i)
        s.values[i] = y[i] + h * (439.0 / 216.0 * k1[i] - 8.0 * k2[i] +
                                  3680.0 / 513.0 * k3[i] - 845.0 / 4104.0 * k4[i]);
    const auto k5 = eval_derivative(f, t + h, s);

    for (std::size_t i = 0; i < n; ++i)
        s.values[i] = y[i] + h * (-8.0 / 27.0 * k1[i] + 2.0 * k2[i] - 3544.0 / 2565.0 * k3[i] +
                                  1859.0 / 4104.0 * k4[i] - 11.0 / 40.0 * k5[i]);
    const auto k6 = eval_derivative(f, t + h / 2.0, s);

    StateVector y5 = y;
    std::vector<double> err(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double fourth = y[i] + h * (25.0 / 216.0 * k1[i] + 1408.0 / 2565.0 * k3[i] +
                                          2197.0 / 4104.0 * k4[i] - 1.0 / 5.0 * k5[i]);
        y5.values[i] = y[i] + h * (16.0 / 135.0 * k1[i] + 6656.0 / 12825.0 * k3[i] +
                                   28561.0 / 56430.0 * k4[i] - 9.0 / 50.0 * k5[i] +
                                   2.0 / 55.0 * k6[i]);
        err[i] = std::abs(y5.values[i] - fourth);
    }
    return {std::move(y5), std::move(err)};
}

struct Recorder {
    Trajectory& traj;
    double t0;
    double record_interval;
    double eps;
    std::size_t next_index = 1;

    explicit Recorder(Trajectory& out, const IntegrationConfig& cfg)
        : traj(out), t0(cfg.t0), record_interval(cfg.record_interval),
          eps(cfg.record_interval * 1e-9) {}

    double next_time() const { return t0 + static_cast<double>(next_index) * record_interval; }

    void record(double t, const StateVector& y) {
        if (!traj.times.empty() && !(t > traj.times.back())) return;
        traj.times.push_back(t);
        traj.states.push_back(y.values);
    }

    void on_step(double t, const StateVector& y) {
        if (t >= next_time() - eps) {
            record(t, y);
            while (next_time() <= t + eps) ++next_index;
        }
    }
};

/// Finiteness and negativity handling for a freshly accepted state.
inline void apply_state_policy(StateVector& y, double t, const IntegrationConfig& cfg,
                               StepLog& log) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = y[i];
        if (!std::isfinite(v))
            throw IntegrationError("non-finite value for stock '" + y.labels[i] +
                                   "' at t = " + format_double(t));
        if (v < 0.0) {
            if (cfg.negativity_policy == NegativityPolicy::reject)
                throw IntegrationError("stock '" + y.labels[i] + "' went negative (" +
                                       format_double(v) + ") at t = " + format_double(t));
            log.clamps.push_back({t, i, v});
            y[i] = 0.0;
        }
    }
}

template <typename F>
void integrate_fixed(F& f, const IntegrationConfig& cfg, StateVector& y, Trajectory& traj,
                     Recorder& rec) {
    const double span = cfg.t_end - cfg.t0;
    const auto n_steps =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(span / cfg.dt - 1e-9)));
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double t = cfg.t0 + static_cast<double>(k) * cfg.dt;
        const double t_next =
            (k + 1 == n_steps) ? cfg.t_end : cfg.t0 + static_cast<double>(k + 1) * cfg.dt;
        const double h = t_next - t;
        if (!(h > 0.0)) continue;
        y = (cfg.method == Method::euler) ? step_euler(f, t, y, h) : step_rk4(f, t, y, h);
        ++traj.step_log.accepted;
        apply_state_policy(y, t_next, cfg, traj.step_log);
        rec.on_step(t_next, y);
    }
}

template <typename F>
void integrate_adaptive(F& f, const IntegrationConfig& cfg, StateVector& y, Trajectory& traj,
                        Recorder& rec) {
    const double end_eps = 1e-12 * std::max(1.0, std::abs(cfg.t_end));
    double t = cfg.t0;
    double h_ctrl = std::clamp(cfg.dt, cfg.dt_min, cfg.dt_max);

    while (t < cfg.t_end - end_eps) {
        // Steps never straddle a record boundary, so records land exactly
        // on the t0 + j*record_interval grid.
        const double bound = std::min(rec.next_time(), cfg.t_end);
        const double remaining = bound - t;
        if (remaining <= end_eps) {
            t = bound;
            rec.on_step(t, y);
            continue;
        }
        const bool clipped = h_ctrl >= remaining;
        const double h = clipped ? remaining : h_ctrl;

        auto [y_new, err] = step_rkf45(f, t, y, h);

        double ratio = 0.0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            const double scale =
                std::max(cfg.abs_tol, cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i])));
            ratio = std::max(ratio, err[i] / scale);
        }

        if (ratio <= 1.0) {
            t = clipped ? bound : t + h;
            y = std::move(y_new);
            ++traj.step_log.accepted;
            apply_state_policy(y, t, cfg, traj.step_log);
            rec.on_step(t, y);
            const double grow = (ratio > 0.0)
                                    ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0)
                                    : 5.0;
            h_ctrl = std::clamp(h * grow, cfg.dt_min, cfg.dt_max);
        } else {
            ++traj.step_log.rejected;
            const double shrink = std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 0.9);
            h_ctrl = h * shrink;
            if (h_ctrl < cfg.dt_min)
                throw IntegrationError("step size underflow: error control requires dt = " +
                                       format_double(h_ctrl) + " < dt_min = " +
                                       format_double(cfg.dt_min) + " at t = " + format_double(t));
        }
    }
}

} // namespace detail

/// Integrates dy/dt = f(t, y) from cfg.t0 to cfg.t_end, sampling the state
/// every cfg.record_interval. Inputs are never mutated; two calls with the
/// same arguments produce bit-identical trajectories.
template <derivative_fn F>
Trajectory integrate(F&& f, const StateVector& y0, const IntegrationConfig& cfg) {
    validate(cfg);
    if (y0.size() == 0) throw ConfigError("initial state is empty");
    for (std::size_t i = 0; i < y0.size(); ++i)
        if (!std::isfinite(y0[i]))
            throw ConfigError("initial value for stock '" + y0.labels[i] + "' is not finite");

    Trajectory traj;
    traj.labels = y0.labels;

    StateVector y = y0;
    detail::Recorder rec(traj, cfg);
    rec.record(cfg.t0, y);

    if (cfg.method == Method::rkf45)
        detail::integrate_adaptive(f, cfg, y, traj, rec);
    else
        detail::integrate_fixed(f, cfg, y, traj, rec);

    rec.record(cfg.t_end, y); // no-op when the final step already recorded it
    return traj;
}

} // namespace tcell
