#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "tcell/analysis.hpp"
#include "tcell/fit.hpp"
#include "tcell/metrics.hpp"
#include "tcell/model.hpp"

using namespace tcell;

namespace {

ScenarioSpec memory_decay_scenario(double mu_m) {
    ScenarioSpec s;
    s.name = "memory_decay";
    s.params.s0 = 0.0;
    s.params.lambda_n = 0.0;
    s.params.lambda_mn = 0.0;
    s.params.lambda_a = 0.0;
    s.params.A_input = 0.0;
    s.params.mu_m = mu_m;
    s.initial = TCellState{0.0, 0.0, 100.0};
    s.integration.t_end = 10.0;
    s.integration.dt = 0.01;
    return s;
}

/// Noiseless reference series at t = 1..10 read off the truth trajectory.
std::vector<ReferencePoint> self_reference(const ScenarioSpec& truth) {
    const auto traj =
        integrate(make_derivative(truth.params), initial_state(truth), truth.integration);
    const std::size_t iM = traj.stock_index("M");
    std::vector<ReferencePoint> ref;
    for (double t = 1.0; t <= 10.0; t += 1.0) {
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            if (std::abs(traj.times[i] - t) < 1e-9) {
                ref.push_back({traj.times[i], "M", traj.states[i][iM]});
                break;
            }
        }
    }
    REQUIRE(ref.size() == 10);
    return ref;
}

/// The same 7-point axis the fit's grid phase uses.
std::vector<double> grid_points(double lower, double upper) {
    std::vector<double> out(7);
    for (int j = 0; j < 7; ++j) {
        const double w = j / 6.0;
        out[j] = lower > 0.0 ? std::exp(std::log(lower) + w * (std::log(upper) - std::log(lower)))
                             : lower + w * (upper - lower);
    }
    out.front() = lower;
    out.back() = upper;
    return out;
}

} // namespace

TEST_CASE("fit recovers a known decay rate from its own output") {
    const ScenarioSpec truth = memory_decay_scenario(0.05);
    FitSpec spec;
    spec.base = memory_decay_scenario(0.123); // search starts from a wrong rate
    spec.free = {{"mu_m", 0.01, 0.2}};
    spec.reference = self_reference(truth);

    const FitResult result = fit(spec);
    CHECK(std::abs(result.params.mu_m - 0.05) / 0.05 < 0.01);
    // The simplex stops at 1e-6 relative diameter, so the loss floor is
    // curvature * (1e-6)^2, not machine precision.
    CHECK(result.loss < 1e-6);
    CHECK(result.evaluations > 7); // grid plus refinement

    SECTION("the result dominates every coarse grid point") {
        for (const double p : grid_points(0.01, 0.2)) {
            ScenarioSpec candidate = spec.base;
            set_parameter(candidate, "mu_m", p);
            CHECK(result.loss <= fit_loss(candidate, spec.reference));
        }
    }
    SECTION("deterministic across repeat calls") {
        const FitResult again = fit(spec);
        CHECK(again.params.mu_m == result.params.mu_m);
        CHECK(again.loss == result.loss);
        CHECK(again.evaluations == result.evaluations);
    }
}

TEST_CASE("fit respects declared bounds") {
    const ScenarioSpec truth = memory_decay_scenario(0.05);
    FitSpec spec;
    spec.base = memory_decay_scenario(0.123);
    spec.free = {{"mu_m", 0.1, 0.2}}; // the true value lies outside
    spec.reference = self_reference(truth);

    const FitResult result = fit(spec);
    CHECK(result.params.mu_m >= 0.1);
    CHECK(result.params.mu_m <= 0.2);
    // Pushed against the boundary nearest the truth.
    CHECK(result.params.mu_m == Approx(0.1).margin(1e-3));
}

TEST_CASE("fit loss is a plain sum of squared residuals") {
    // mu_m = 0 freezes M at 100, so residuals are 10 and -10.
    ScenarioSpec constant = memory_decay_scenario(0.0);
    const std::vector<ReferencePoint> ref{{1.0, "M", 90.0}, {2.0, "M", 110.0}};
    CHECK(fit_loss(constant, ref) == 200.0);
}

TEST_CASE("fit validation") {
    const ScenarioSpec truth = memory_decay_scenario(0.05);
    FitSpec spec;
    spec.base = truth;
    SECTION("at least one free parameter") {
        spec.reference = self_reference(truth);
        CHECK_THROWS_AS(fit(spec), ConfigError);
    }
    SECTION("enough reference points") {
        spec.free = {{"mu_m", 0.01, 0.2}};
        spec.reference = {{1.0, "M", 50.0}};
        CHECK_THROWS_AS(fit(spec), ConfigError);
    }
    SECTION("bounds must be ordered") {
        spec.free = {{"mu_m", 0.2, 0.1}};
        spec.reference = self_reference(truth);
        CHECK_THROWS_AS(fit(spec), ConfigError);
    }
    SECTION("reference times must lie inside the window") {
        spec.free = {{"mu_m", 0.01, 0.2}};
        spec.reference = {{1.0, "M", 50.0}, {99.0, "M", 1.0}};
        CHECK_THROWS_AS(fit(spec), ConfigError);
    }
    SECTION("observables must be known") {
        spec.free = {{"mu_m", 0.01, 0.2}};
        spec.reference = {{1.0, "Q", 50.0}, {2.0, "Q", 40.0}};
        CHECK_THROWS_WITH(fit(spec), Catch::Contains("observable"));
    }
    SECTION("unknown free-parameter path") {
        spec.free = {{"mu_x", 0.01, 0.2}};
        spec.reference = self_reference(truth);
        CHECK_THROWS_AS(fit(spec), ConfigError);
    }
}

TEST_CASE("two-parameter fit stays within bounds and improves on the grid") {
    // M only senses mu_m + lambda_mn, so the loss valley is the line
    // mu_m + lambda_mn = 0.05; the fit must land on it inside the box.
    const ScenarioSpec truth = memory_decay_scenario(0.05);
    FitSpec spec;
    spec.base = memory_decay_scenario(0.123);
    spec.free = {{"mu_m", 0.01, 0.2}, {"lambda_mn", 0.0, 0.4}};
    spec.reference = self_reference(truth);

    const FitResult result = fit(spec);
    CHECK(result.params.mu_m >= 0.01);
    CHECK(result.params.mu_m <= 0.2);
    CHECK(result.params.lambda_mn >= 0.0);
    CHECK(result.params.lambda_mn <= 0.4);
    CHECK(result.params.mu_m + result.params.lambda_mn == Approx(0.05).margin(2e-3));
    CHECK(result.loss < 1e-4);
}
