// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria with a stated runtime budget are timed.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tcell/analysis.hpp"
#include "tcell/engine.hpp"
#include "tcell/fit.hpp"
#include "tcell/metrics.hpp"
#include "tcell/model.hpp"
#include "tcell/numfmt.hpp"

namespace fs = std::filesystem;
using namespace tcell;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double elapsed_ms, double budget_ms) {
    const bool in_budget = budget_ms <= 0.0 || elapsed_ms < budget_ms;
    const bool ok = pass && in_budget;
    if (!ok) ++g_failures;
    std::cout << "[" << std::setw(2) << id << "] " << (ok ? "PASS" : "FAIL") << "  " << name
              << " -- " << detail;
    if (budget_ms > 0.0)
        std::cout << " (" << format_double(elapsed_ms) << " ms, budget "
                  << format_double(budget_ms) << " ms)";
    std::cout << "\n";
}

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double rel_err(double got, double expected) {
    return std::abs(got - expected) / std::abs(expected);
}

ScenarioSpec base_scenario(const std::string& name) {
    ScenarioSpec s;
    s.name = name;
    s.integration.t_end = 100.0;
    s.integration.dt = 0.01;
    s.integration.record_interval = 0.1;
    return s;
}

double record_at(const Trajectory& traj, double t, std::size_t stock) {
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        if (std::abs(traj.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return traj.states[i][stock];
    return std::numeric_limits<double>::quiet_NaN();
}

// --- criterion 1 -----------------------------------------------------------

void thymic_half_life() {
    const ParameterSet p;
    const auto start = Clock::now();
    double worst = 0.0;
    for (const double t : {0.0, 10.0, 50.0}) {
        const double ratio = raw_thymic_export(t + 15.7, p) / raw_thymic_export(t, p);
        worst = std::max(worst, std::abs(ratio - 0.5));
    }
    const double elapsed = ms_since(start);
    report(1, "thymic export halves every 15.7 years", worst <= 1e-12,
           "max |ratio - 0.5| = " + format_double(worst) + " (tol 1e-12)", elapsed, 1.0);
}

// --- criterion 2 -----------------------------------------------------------

void thymic_only_closed_form() {
    const auto start = Clock::now();
    ScenarioSpec s = base_scenario("thymic_only");
    s.params.lambda_n = 0.0;
    s.params.lambda_mn = 0.0;
    s.params.c_mode = CMode::off;
    s.initial = TCellState{100.0, 0.0, 0.0};

    const auto traj = integrate(make_derivative(s.params), initial_state(s), s.integration);
    auto exact = [&](double t) {
        const double a = s.params.mu_n - s.params.lambda_t;
        return std::exp(-s.params.mu_n * t) *
               (100.0 + s.params.s0 * (std::exp(a * t) - 1.0) / a);
    };
    double worst = 0.0;
    for (const double t : {1.0, 20.0, 50.0, 100.0})
        worst = std::max(worst, rel_err(record_at(traj, t, 0), exact(t)));
    report(2, "integrated N matches the linear closed form", worst < 1e-6,
           "max rel err = " + format_double(worst) + " (tol 1e-6)", ms_since(start), 1000.0);
}

// --- criterion 3 -----------------------------------------------------------

void memory_half_life() {
    const auto start = Clock::now();
    ScenarioSpec s = base_scenario("memory");
    s.params.lambda_mn = 0.0;
    s.params.lambda_a = 0.0;
    s.params.A_input = 0.0;
    s.initial = TCellState{0.0, 0.0, 100.0};
    s.integration.t_end = std::log(2.0) / 0.05;

    const auto traj = integrate(make_derivative(s.params), initial_state(s), s.integration);
    const double got = traj.states.back()[2];
    report(3, "memory halves at log(2)/0.05 years", rel_err(got, 50.0) < 1e-6,
           "M(t_half) = " + format_double(got) + " (target 50, tol 1e-6 rel)", ms_since(start),
           1000.0);
}

// --- criterion 4 -----------------------------------------------------------

void conservation() {
    const auto start = Clock::now();
    ScenarioSpec s = base_scenario("conservation");
    s.params.s0 = 0.0;
    s.params.mu_n = 0.0;
    s.params.mu_m = 0.0;
    s.params.c_mode = CMode::off;
    s.params.lambda_n = 0.22;
    s.params.lambda_mn = 0.5;
    s.params.A_input = 0.0;
    s.initial = TCellState{60.0, 30.0, 10.0};

    const auto traj = integrate(make_derivative(s.params), initial_state(s), s.integration);
    double worst = 0.0;
    for (const auto& row : traj.states)
        worst = std::max(worst, std::abs(row[0] + row[1] + row[2] - 100.0) / 100.0);
    report(4, "pure transfers conserve N + Np + M over a century", worst < 1e-9,
           "max rel drift = " + format_double(worst) + " (tol 1e-9)", ms_since(start), 1000.0);
}

// --- criterion 5 -----------------------------------------------------------

void integrator_order() {
    const auto start = Clock::now();
    auto rhs = [](double, const StateVector& y) { return std::vector<double>{-y[0]}; };
    auto global_error = [&](Method m, double dt) {
        IntegrationConfig cfg;
        cfg.method = m;
        cfg.t0 = 0.0;
        cfg.t_end = 1.0;
        cfg.dt = dt;
        cfg.record_interval = 1.0;
        const auto traj = integrate(rhs, StateVector({1.0}), cfg);
        return std::abs(traj.states.back()[0] - std::exp(-1.0));
    };
    const double dts[] = {0.1, 0.05, 0.025, 0.0125};
    bool pass = true;
    std::ostringstream detail;
    detail << "rk4 ratios:";
    for (int i = 0; i + 1 < 4; ++i) {
        const double r = global_error(Method::rk4, dts[i]) / global_error(Method::rk4, dts[i + 1]);
        pass = pass && r >= 12.0 && r <= 20.0;
        detail << ' ' << format_double(r);
    }
    detail << "; euler ratios:";
    for (int i = 0; i + 1 < 4; ++i) {
        const double r =
            global_error(Method::euler, dts[i]) / global_error(Method::euler, dts[i + 1]);
        pass = pass && r >= 1.8 && r <= 2.2;
        detail << ' ' << format_double(r);
    }
    report(5, "error-reduction per dt halving: rk4 in [12,20], euler in [1.8,2.2]", pass,
           detail.str(), ms_since(start), 1000.0);
}

// --- criterion 6 -----------------------------------------------------------

void qualitative_thymic_decay() {
    const auto start = Clock::now();
    bool pass = true;
    std::string offender;
    for (const auto& preset : builtin_scenarios()) {
        const auto traj =
            integrate(make_derivative(preset.params), initial_state(preset), preset.integration);
        double peak = 0.0;
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const double n = traj.states[i][0];
            peak = std::max(peak, n);
            if (traj.times[i] >= 25.0) {
                if (n > prev) monotone = false;
                prev = n;
            }
        }
        const double final_n = traj.states.back()[0];
        if (!(monotone && final_n < 0.1 * peak)) {
            pass = false;
            offender = preset.name + " (monotone=" + (monotone ? "yes" : "no") +
                       ", final/peak = " + format_double(final_n / peak) + ")";
            break;
        }
    }
    report(6, "every preset: N non-increasing past age 25 and N(100) < 0.1 * peak", pass,
           pass ? "all 16 presets decay" : offender, ms_since(start), 10000.0);
}

// --- criterion 7 -----------------------------------------------------------

void singularity_guard() {
    const auto start = Clock::now();
    ParameterSet p;
    p.c_mode = CMode::density_dependent;
    const double at_zero = proliferation_flow(7.0, 0.0, p);
    const bool exact = (at_zero == p.mu_n * 300.0) && std::abs(at_zero - 1320.0) < 1e-9;

    bool integrates = true;
    std::string err;
    try {
        ScenarioSpec s = find_builtin("ln0.22_cON_mn0");
        s.integration.t_end = 5.0; // starts at Np = 0 and passes through it
        (void)integrate(make_derivative(s.params), initial_state(s), s.integration);
    } catch (const std::exception& e) {
        integrates = false;
        err = e.what();
    }
    report(7, "proliferation flow is regular at Np = 0", exact && integrates,
           "flow(Np=0) = " + format_double(at_zero) + " (target 1320)" +
               (integrates ? "; integration through Np = 0 clean" : "; integration failed: " + err),
           ms_since(start), 0.0);
}

// --- criterion 8 -----------------------------------------------------------

void fit_self_consistency() {
    const auto start = Clock::now();
    ScenarioSpec truth = base_scenario("memory_truth");
    truth.params.s0 = 0.0;
    truth.params.lambda_n = 0.0;
    truth.params.lambda_mn = 0.0;
    truth.params.lambda_a = 0.0;
    truth.params.A_input = 0.0;
    truth.params.mu_m = 0.05;
    truth.initial = TCellState{0.0, 0.0, 100.0};
    truth.integration.t_end = 10.0;

    const auto traj =
        integrate(make_derivative(truth.params), initial_state(truth), truth.integration);
    FitSpec spec;
    spec.base = truth;
    spec.base.params.mu_m = 0.123; // wrong starting value
    spec.free = {{"mu_m", 0.01, 0.2}};
    for (double t = 1.0; t <= 10.0; t += 1.0)
        spec.reference.push_back({t, "M", record_at(traj, t, 2)});

    const FitResult result = fit(spec);
    const double err = rel_err(result.params.mu_m, 0.05);
    report(8, "fit recovers mu_m = 0.05 from noiseless self-data within 1%", err < 0.01,
           "recovered " + format_double(result.params.mu_m) + " (rel err " + format_double(err) +
               ", " + std::to_string(result.evaluations) + " evaluations)",
           ms_since(start), 30000.0);
}

// --- criterion 9 -----------------------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<unreadable:" + path.string() + ">";
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TCELL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void cli_determinism() {
    const auto start = Clock::now();
    const fs::path work = "acceptance_work";
    fs::remove_all(work);
    fs::create_directories(work);

    bool pass = true;
    std::string detail = "run and sweep outputs byte-identical";
    const std::string run_args = "run --preset ln0.22_cON_mn0.5 --out ";
    if (run_cli(run_args + (work / "r1").string()) != 0 ||
        run_cli(run_args + (work / "r2").string()) != 0) {
        pass = false;
        detail = "cli run failed";
    } else {
        const std::string a = slurp(work / "r1" / "ln0.22_cON_mn0.5_trajectory.csv");
        const std::string b = slurp(work / "r2" / "ln0.22_cON_mn0.5_trajectory.csv");
        if (a != b || a.empty()) {
            pass = false;
            detail = "trajectory bytes differ between runs";
        }
    }
    const std::string sweep_args =
        "sweep --preset ln0.22_cOFF_mn0 --axis lambda_n=0.003,0.005,0.22,2.1 "
        "--metric final_N --metric final_Np --threads 4 --out ";
    if (pass) {
        if (run_cli(sweep_args + (work / "s1").string()) != 0 ||
            run_cli(sweep_args + (work / "s2").string()) != 0) {
            pass = false;
            detail = "cli sweep failed";
        } else {
            const std::string a = slurp(work / "s1" / "sweep.csv");
            const std::string b = slurp(work / "s2" / "sweep.csv");
            if (a != b || a.empty()) {
                pass = false;
                detail = "sweep bytes differ between concurrent runs";
            }
        }
    }
    report(9, "cmd_run and cmd_sweep are byte-deterministic (sweep on 4 threads)", pass, detail,
           ms_since(start), 0.0);
}

// --- criterion 10 ----------------------------------------------------------

void preset_census() {
    const auto start = Clock::now();
    const auto presets = builtin_scenarios();
    bool pass = presets.size() == 16;
    std::set<std::tuple<double, bool, double>> combos;
    for (const auto& s : presets) {
        combos.insert({s.params.lambda_n, s.params.c_mode == CMode::density_dependent,
                       s.params.lambda_mn});
        pass = pass && s.params.mu_n == 4.4 && s.params.mu_m == 0.05 && s.params.s0 == 1.65;
    }
    pass = pass && combos.size() == 16;
    const std::set<double> lns{0.003, 0.005, 0.22, 2.1};
    for (const double ln : lns)
        for (const bool c : {false, true})
            for (const double mn : {0.0, 0.5}) pass = pass && combos.count({ln, c, mn}) == 1;
    report(10, "16 presets cover {0.003,0.005,0.22,2.1} x {c off,on} x {mn 0,0.5}", pass,
           std::to_string(presets.size()) + " presets, " + std::to_string(combos.size()) +
               " distinct combinations, shared constants mu_n=4.4 mu_m=0.05 s0=1.65",
           ms_since(start), 0.0);
}

} // namespace

int main() {
    thymic_half_life();
    thymic_only_closed_form();
    memory_half_life();
    conservation();
    integrator_order();
    qualitative_thymic_decay();
    singularity_guard();
    fit_self_consistency();
    cli_determinism();
    preset_census();

    if (g_failures == 0) {
        std::cout << "acceptance: all 10 criteria passed\n";
        return 0;
    }
    std::cout << "acceptance: " << g_failures << " criterion(s) failed\n";
    return 1;
}
