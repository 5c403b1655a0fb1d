#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcell/analysis.hpp"
#include "tcell/csv.hpp"
#include "tcell/engine.hpp"
#include "tcell/errors.hpp"
#include "tcell/fit.hpp"
#include "tcell/metrics.hpp"
#include "tcell/model.hpp"
#include "tcell/numfmt.hpp"
#include "tcell/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace tcell;

namespace {

// ---------------------------------------------------------------------------
// Scenario selection and overrides
// ---------------------------------------------------------------------------

struct ScenarioOptions {
    std::string preset;
    std::string scenario_file;
    std::string scenario_name;
    std::optional<double> t_end;
    std::optional<double> dt;
    std::string method;
    std::vector<std::string> sets;
};

void add_scenario_options(CLI::App* cmd, ScenarioOptions& opt) {
    cmd->add_option("--preset", opt.preset, "Built-in scenario preset name");
    cmd->add_option("--scenario-file", opt.scenario_file, "Scenario JSON file");
    cmd->add_option("--scenario", opt.scenario_name, "Scenario name inside --scenario-file");
    cmd->add_option("--t-end", opt.t_end, "Override integration end time (years)");
    cmd->add_option("--dt", opt.dt, "Override integration step (years)");
    cmd->add_option("--method", opt.method, "Override integration method (euler|rk4|rkf45)");
    cmd->add_option("--set", opt.sets,
                    "Override a parameter, c_mode or initial stock, e.g. --set mu_m=0.1 "
                    "--set initial.N=50 (repeatable)");
}

void drop_unpublished_flag(ScenarioSpec& s, const std::string& key) {
    auto& list = s.unpublished_defaults;
    list.erase(std::remove(list.begin(), list.end(), key), list.end());
}

void apply_set_override(ScenarioSpec& s, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= assignment.size())
        throw ConfigError("--set expects <path>=<value>, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    if (path == "c_mode" || path == "params.c_mode") {
        s.params.c_mode = parse_c_mode(value);
        return;
    }
    const auto number = parse_double(value);
    if (path == "initial.N" || path == "initial.Np" || path == "initial.M") {
        if (!number) throw ConfigError("--set " + path + " expects a numeric value");
        if (path == "initial.N") s.initial.N = *number;
        if (path == "initial.Np") s.initial.Np = *number;
        if (path == "initial.M") s.initial.M = *number;
        drop_unpublished_flag(s, path);
        return;
    }
    if (!number) throw ConfigError("--set " + path + " expects a numeric value");
    set_parameter(s, path, *number);
    drop_unpublished_flag(s, std::string(detail::strip_params_prefix(path)));
}

ScenarioSpec resolve_scenario(const ScenarioOptions& opt) {
    if (!opt.preset.empty() && !opt.scenario_file.empty())
        throw ConfigError("--preset and --scenario-file are mutually exclusive");

    ScenarioSpec s;
    if (!opt.preset.empty()) {
        s = find_builtin(opt.preset);
    } else if (!opt.scenario_file.empty()) {
        const auto all = load_scenarios(opt.scenario_file);
        if (all.empty()) throw ConfigError("scenario file defines no scenarios");
        if (opt.scenario_name.empty()) {
            if (all.size() > 1) {
                std::string msg = "scenario file defines several scenarios; pick one with "
                                  "--scenario. Available:";
                for (const auto& item : all) msg += "\n  " + item.name;
                throw ConfigError(msg);
            }
            s = all.front();
        } else {
            const auto it = std::find_if(all.begin(), all.end(), [&](const ScenarioSpec& item) {
                return item.name == opt.scenario_name;
            });
            if (it == all.end()) {
                std::string msg = "no scenario named '" + opt.scenario_name +
                                  "' in scenario file. Available:";
                for (const auto& item : all) msg += "\n  " + item.name;
                throw ConfigError(msg);
            }
            s = *it;
        }
    } else {
        throw ConfigError("select a scenario with --preset <name> or --scenario-file <file>");
    }

    if (opt.t_end) s.integration.t_end = *opt.t_end;
    if (opt.dt) s.integration.dt = *opt.dt;
    if (!opt.method.empty()) s.integration.method = parse_method(opt.method);
    for (const auto& assignment : opt.sets) apply_set_override(s, assignment);
    validate(s);
    return s;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

std::string safe_file_stem(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_' && c != '-')
            c = '_';
    return out;
}

void write_header_block(std::ostream& os, const ScenarioSpec& s) {
    os << "# scenario = " << s.name << "\n";
    os << "# params.s0 = " << format_double(s.params.s0) << "\n";
    os << "# params.lambda_t = " << format_double(s.params.lambda_t) << "\n";
    os << "# params.lambda_n = " << format_double(s.params.lambda_n) << "\n";
    os << "# params.mu_n = " << format_double(s.params.mu_n) << "\n";
    os << "# params.b = " << format_double(s.params.b) << "\n";
    os << "# params.s_bar = " << format_double(s.params.s_bar) << "\n";
    os << "# params.Np_bar = " << format_double(s.params.Np_bar) << "\n";
    os << "# params.c_mode = " << to_string(s.params.c_mode) << "\n";
    os << "# params.lambda_mn = " << format_double(s.params.lambda_mn) << "\n";
    os << "# params.lambda_a = " << format_double(s.params.lambda_a) << "\n";
    os << "# params.mu_m = " << format_double(s.params.mu_m) << "\n";
    os << "# params.A_input = " << format_double(s.params.A_input) << "\n";
    os << "# initial.N = " << format_double(s.initial.N) << "\n";
    os << "# initial.Np = " << format_double(s.initial.Np) << "\n";
    os << "# initial.M = " << format_double(s.initial.M) << "\n";
    os << "# integration.t0 = " << format_double(s.integration.t0) << "\n";
    os << "# integration.t_end = " << format_double(s.integration.t_end) << "\n";
    os << "# integration.method = " << to_string(s.integration.method) << "\n";
    os << "# integration.dt = " << format_double(s.integration.dt) << "\n";
    os << "# integration.abs_tol = " << format_double(s.integration.abs_tol) << "\n";
    os << "# integration.rel_tol = " << format_double(s.integration.rel_tol) << "\n";
    os << "# integration.dt_min = " << format_double(s.integration.dt_min) << "\n";
    os << "# integration.dt_max = " << format_double(s.integration.dt_max) << "\n";
    os << "# integration.record_interval = " << format_double(s.integration.record_interval)
       << "\n";
    os << "# integration.negativity_policy = " << to_string(s.integration.negativity_policy)
       << "\n";
    os << "# non-paper-defaults: ";
    if (s.unpublished_defaults.empty()) {
        os << "none";
    } else {
        for (std::size_t i = 0; i < s.unpublished_defaults.size(); ++i) {
            if (i > 0) os << ", ";
            os << s.unpublished_defaults[i];
        }
    }
    os << "\n";
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write output file '" + path.string() + "'");
    return os;
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

std::string optional_field(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunOptions {
    ScenarioOptions scenario;
    std::vector<std::string> metrics;
    std::string out = ".";
};

std::vector<MetricSpec> resolve_metrics(const std::vector<std::string>& extra) {
    std::vector<MetricSpec> specs = default_metrics();
    std::vector<std::string> names;
    for (const auto& m : specs) names.push_back(metric_name(m));
    for (const auto& raw : extra) {
        MetricSpec m = parse_metric(raw);
        if (std::find(names.begin(), names.end(), metric_name(m)) == names.end()) {
            names.push_back(metric_name(m));
            specs.push_back(m);
        }
    }
    return specs;
}

int cmd_run(const RunOptions& opt) {
    const ScenarioSpec s = resolve_scenario(opt.scenario);
    const auto metrics = resolve_metrics(opt.metrics);
    const ScenarioResult result = run_scenario(s, metrics);
    const Trajectory& traj = result.trajectory;

    const fs::path dir = prepare_out_dir(opt.out);
    const std::string stem = safe_file_stem(s.name);
    const fs::path traj_path = dir / (stem + "_trajectory.csv");
    const fs::path metrics_path = dir / (stem + "_metrics.csv");

    {
        auto os = open_output(traj_path);
        write_header_block(os, s);
        os << "t,N,Np,M,total_naive,trec_fraction,thymic_export\n";
        const std::size_t iN = traj.stock_index("N");
        const std::size_t iNp = traj.stock_index("Np");
        const std::size_t iM = traj.stock_index("M");
        for (std::size_t r = 0; r < traj.size(); ++r) {
            const auto& row = traj.states[r];
            const double t = traj.times[r];
            const TCellState y{row[iN], row[iNp], row[iM]};
            const double export_flow =
                raw_thymic_export(t, s.params) * export_suppression(y.Np, s.params);
            os << format_double(t) << ',' << format_double(y.N) << ',' << format_double(y.Np)
               << ',' << format_double(y.M) << ',' << format_double(y.N + y.Np) << ','
               << optional_field(trec_fraction(y)) << ',' << format_double(export_flow) << "\n";
        }
    }
    {
        auto os = open_output(metrics_path);
        write_header_block(os, s);
        os << "# note.half_trec_age = first t where trec_fraction < 0.5 "
              "(artifact-defined diagnostic)\n";
        os << "metric,value,units\n";
        for (const auto& m : result.metrics)
            os << m.name << ',' << optional_field(m.value) << ',' << m.units << "\n";
    }

    std::cout << "wrote " << traj_path.string() << " (" << traj.size() << " rows)\n";
    std::cout << "wrote " << metrics_path.string() << "\n";
    if (!traj.step_log.clamps.empty())
        std::cout << "clamped " << traj.step_log.clamps.size()
                  << " negative undershoots to zero\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepOptions {
    ScenarioOptions scenario;
    std::vector<std::string> axes;
    std::vector<std::string> metrics;
    std::string sweep_file;
    unsigned threads = 1;
    std::string out = ".";
};

SweepAxis parse_axis_flag(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--axis expects <path>=<v1,v2,...>, got '" + text + "'");
    SweepAxis axis;
    axis.path = text.substr(0, eq);
    for (const auto& field : split_fields(text.substr(eq + 1))) {
        if (field.empty()) continue;
        const auto v = parse_double(field);
        if (!v) throw ConfigError("--axis " + axis.path + ": non-numeric value '" + field + "'");
        axis.values.push_back(*v);
    }
    if (axis.values.empty())
        throw ConfigError("--axis " + axis.path + " has an empty value list");
    return axis;
}

SweepSpec load_sweep_file(const std::string& path, const ScenarioSpec& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sweep file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("sweep file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("sweep file must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (key != "axes" && key != "metrics")
            throw ConfigError("sweep file: unknown key '" + key + "'");
    }
    if (!doc.contains("axes") || !doc.at("axes").is_array())
        throw ConfigError("sweep file requires an 'axes' array");

    SweepSpec spec;
    spec.base = base;
    for (const auto& item : doc.at("axes")) {
        if (!item.is_object() || !item.contains("path") || !item.contains("values"))
            throw ConfigError("each sweep axis requires 'path' and 'values'");
        SweepAxis axis;
        axis.path = item.at("path").get<std::string>();
        for (const auto& v : item.at("values")) {
            if (!v.is_number())
                throw ConfigError("sweep axis '" + axis.path + "' has a non-numeric value");
            axis.values.push_back(v.get<double>());
        }
        spec.axes.push_back(std::move(axis));
    }
    if (doc.contains("metrics"))
        for (const auto& m : doc.at("metrics"))
            spec.metrics.push_back(parse_metric(m.get<std::string>()));
    return spec;
}

int cmd_sweep(const SweepOptions& opt) {
    const ScenarioSpec base = resolve_scenario(opt.scenario);

    SweepSpec spec;
    if (!opt.sweep_file.empty()) {
        if (!opt.axes.empty())
            throw ConfigError("--sweep-file and --axis are mutually exclusive");
        spec = load_sweep_file(opt.sweep_file, base);
    } else {
        spec.base = base;
        for (const auto& text : opt.axes) spec.axes.push_back(parse_axis_flag(text));
    }
    for (const auto& raw : opt.metrics) spec.metrics.push_back(parse_metric(raw));
    if (spec.metrics.empty()) spec.metrics = default_metrics();

    const SweepResult result = sweep(spec, opt.threads);

    const fs::path dir = prepare_out_dir(opt.out);
    const fs::path path = dir / "sweep.csv";
    auto os = open_output(path);
    write_header_block(os, spec.base);
    for (const auto& axis : spec.axes) {
        os << "# axis." << axis.path << " = ";
        for (std::size_t i = 0; i < axis.values.size(); ++i) {
            if (i > 0) os << ',';
            os << format_double(axis.values[i]);
        }
        os << "\n";
    }
    os << "# metrics = ";
    for (std::size_t i = 0; i < result.metric_names.size(); ++i) {
        if (i > 0) os << ',';
        os << result.metric_names[i];
    }
    os << "\n";

    std::vector<std::string> header = result.axis_names;
    header.insert(header.end(), result.metric_names.begin(), result.metric_names.end());
    header.push_back("error");
    os << join_fields(header) << "\n";
    for (const auto& row : result.rows) {
        std::vector<std::string> fields;
        fields.reserve(header.size());
        for (const double c : row.coords) fields.push_back(format_double(c));
        for (const auto& v : row.values) fields.push_back(optional_field(v));
        fields.push_back(sanitize_csv_field(row.error));
        os << join_fields(fields) << "\n";
    }
    os.flush();

    std::size_t failed = 0;
    for (const auto& row : result.rows)
        if (!row.error.empty()) ++failed;
    std::cout << "wrote " << path.string() << " (" << result.rows.size() << " grid points";
    if (failed > 0) std::cout << ", " << failed << " failed";
    std::cout << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sensitivity
// ---------------------------------------------------------------------------

struct SensitivityOptions {
    ScenarioOptions scenario;
    std::string parameter;
    std::string metric;
    double delta = 1e-3;
    std::string out = ".";
};

int cmd_sensitivity(const SensitivityOptions& opt) {
    const ScenarioSpec s = resolve_scenario(opt.scenario);
    const MetricSpec metric = parse_metric(opt.metric);
    const double value = sensitivity(s, opt.parameter, metric, opt.delta);

    const std::string units = metric_units(metric) + " per " + opt.parameter + "-unit";
    std::cout << "sensitivity of " << metric_name(metric) << " to " << opt.parameter
              << " (delta = " << format_double(opt.delta) << "): " << format_double(value) << " "
              << units << "\n";

    const fs::path dir = prepare_out_dir(opt.out);
    const fs::path path = dir / "sensitivity.csv";
    auto os = open_output(path);
    write_header_block(os, s);
    os << "scenario,parameter,metric,delta,sensitivity,units\n";
    os << s.name << ',' << opt.parameter << ',' << metric_name(metric) << ','
       << format_double(opt.delta) << ',' << format_double(value) << ','
       << sanitize_csv_field(units) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// plotdata
// ---------------------------------------------------------------------------

struct PlotdataOptions {
    std::string csv_path;
    std::string columns = "t,N";
};

int cmd_plotdata(const PlotdataOptions& opt) {
    std::ifstream in(opt.csv_path);
    if (!in) throw ConfigError("cannot open trajectory file '" + opt.csv_path + "'");
    const CsvFile csv = read_csv(in);
    if (csv.columns.empty()) throw ConfigError("'" + opt.csv_path + "' has no header row");

    const auto requested = split_fields(opt.columns);
    if (requested.size() < 2)
        throw ConfigError("--columns expects an x column and at least one series, e.g. t,N");

    std::vector<std::size_t> indices;
    for (const auto& name : requested) {
        const auto idx = csv.column_index(name);
        if (!idx)
            throw ConfigError("no column '" + name + "' in '" + opt.csv_path +
                              "'; available: " + join_fields(csv.columns));
        indices.push_back(*idx);
    }

    const std::size_t x = indices.front();
    for (std::size_t series = 1; series < indices.size(); ++series) {
        if (series > 1) std::cout << "\n";
        const std::size_t y = indices[series];
        for (const auto& row : csv.rows) {
            if (x >= row.size() || y >= row.size()) continue;
            if (row[x].empty() || row[y].empty()) continue;
            std::cout << row[x] << ' ' << row[y] << "\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic stock-and-flow simulator for naive T-cell maintenance"};
    app.require_subcommand(1);

    RunOptions run_opt;
    CLI::App* run_cmd = app.add_subcommand("run", "Integrate one scenario and export CSVs");
    add_scenario_options(run_cmd, run_opt.scenario);
    run_cmd->add_option("--metric", run_opt.metrics, "Additional metric (repeatable)");
    run_cmd->add_option("--out", run_opt.out, "Output directory (default: .)");

    SweepOptions sweep_opt;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a cartesian parameter sweep");
    add_scenario_options(sweep_cmd, sweep_opt.scenario);
    sweep_cmd->add_option("--axis", sweep_opt.axes,
                          "Sweep axis <path>=<v1,v2,...> (repeatable)");
    sweep_cmd->add_option("--metric", sweep_opt.metrics, "Metric to tabulate (repeatable)");
    sweep_cmd->add_option("--sweep-file", sweep_opt.sweep_file,
                          "JSON sweep spec with axes and metrics");
    sweep_cmd->add_option("--threads", sweep_opt.threads,
                          "Evaluate grid points on this many threads");
    sweep_cmd->add_option("--out", sweep_opt.out, "Output directory (default: .)");

    SensitivityOptions sens_opt;
    CLI::App* sens_cmd =
        app.add_subcommand("sensitivity", "Central-difference sensitivity of one metric");
    add_scenario_options(sens_cmd, sens_opt.scenario);
    sens_cmd->add_option("--parameter", sens_opt.parameter, "Parameter path")->required();
    sens_cmd->add_option("--metric", sens_opt.metric, "Metric name")->required();
    sens_cmd->add_option("--delta", sens_opt.delta,
                         "Relative probe offset (absolute when the parameter is 0)");
    sens_cmd->add_option("--out", sens_opt.out, "Output directory (default: .)");

    PlotdataOptions plot_opt;
    CLI::App* plot_cmd = app.add_subcommand(
        "plotdata", "Emit two-column blocks from a trajectory CSV for external plotting");
    plot_cmd->add_option("csv", plot_opt.csv_path, "Trajectory CSV path")->required();
    plot_cmd->add_option("--columns", plot_opt.columns,
                         "x column followed by series columns (default: t,N)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run_cmd) return cmd_run(run_opt);
        if (*sweep_cmd) return cmd_sweep(sweep_opt);
        if (*sens_cmd) return cmd_sensitivity(sens_opt);
        if (*plot_cmd) return cmd_plotdata(plot_opt);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
