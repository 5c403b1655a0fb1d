#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcell/errors.hpp"
#include "tcell/model.hpp"

namespace tcell {

namespace detail {

using json = nlohmann::json;

inline bool is_default_marker(const json& v) {
    return v.is_string() && v.get<std::string>() == "default";
}

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (known.count(key) == 0)
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

inline double number_or_default(const json& obj, const std::string& key, double default_value,
                                const std::string& where, bool* used_default = nullptr) {
    const json& v = obj.at(key);
    if (is_default_marker(v)) {
        if (used_default) *used_default = true;
        return default_value;
    }
    if (!v.is_number())
        throw ConfigError(where + "." + key + " must be a number or \"default\"");
    return v.get<double>();
}

inline ParameterSet parse_params(const json& obj, const std::string& where,
                                 std::vector<std::string>& unpublished) {
    static const std::set<std::string> keys{
        "s0", "lambda_t", "lambda_n", "mu_n", "b", "s_bar", "Np_bar",
        "c_mode", "lambda_mn", "lambda_a", "mu_m", "A_input"};
    if (!obj.is_object()) throw ConfigError(where + ": params must be an object");
    reject_unknown_keys(obj, keys, where + ".params");
    for (const auto& key : keys)
        if (!obj.contains(key))
            throw ConfigError(where + ".params." + key +
                              " is required (set a value or \"default\")");

    const ParameterSet defaults;
    ParameterSet p;
    auto scalar = [&](const char* key, double def, double& out, bool unpub) {
        bool used_default = false;
        out = number_or_default(obj, key, def, where + ".params", &used_default);
        if (used_default && unpub) unpublished.push_back(key);
    };
    scalar("s0", defaults.s0, p.s0, false);
    scalar("lambda_t", defaults.lambda_t, p.lambda_t, false);
    scalar("lambda_n", defaults.lambda_n, p.lambda_n, false);
    scalar("mu_n", defaults.mu_n, p.mu_n, false);
    scalar("b", defaults.b, p.b, true);
    scalar("s_bar", defaults.s_bar, p.s_bar, true);
    scalar("Np_bar", defaults.Np_bar, p.Np_bar, true);
    scalar("lambda_mn", defaults.lambda_mn, p.lambda_mn, false);
    scalar("lambda_a", defaults.lambda_a, p.lambda_a, true);
    scalar("mu_m", defaults.mu_m, p.mu_m, false);
    scalar("A_input", defaults.A_input, p.A_input, true);

    const json& cm = obj.at("c_mode");
    if (is_default_marker(cm)) {
        p.c_mode = defaults.c_mode;
    } else if (cm.is_string()) {
        p.c_mode = parse_c_mode(cm.get<std::string>());
    } else {
        throw ConfigError(where + ".params.c_mode must be a string");
    }
    return p;
}

inline TCellState parse_initial(const json& obj, const std::string& where,
                                std::vector<std::string>& unpublished) {
    static const std::set<std::string> keys{"N", "Np", "M"};
    if (!obj.is_object()) throw ConfigError(where + ": initial must be an object");
    reject_unknown_keys(obj, keys, where + ".initial");
    for (const auto& key : keys)
        if (!obj.contains(key))
            throw ConfigError(where + ".initial." + key +
                              " is required (set a value or \"default\")");
    const TCellState defaults{100.0, 0.0, 0.0};
    TCellState y;
    auto stock = [&](const char* key, double def, double& out) {
        bool used_default = false;
        out = number_or_default(obj, key, def, where + ".initial", &used_default);
        if (used_default) unpublished.push_back(std::string("initial.") + key);
    };
    stock("N", defaults.N, y.N);
    stock("Np", defaults.Np, y.Np);
    stock("M", defaults.M, y.M);
    return y;
}

inline IntegrationConfig parse_integration(const json& obj, const std::string& where) {
    static const std::set<std::string> keys{
        "t0", "t_end", "method", "dt", "abs_tol", "rel_tol",
        "dt_min", "dt_max", "record_interval", "negativity_policy"};
    if (!obj.is_object()) throw ConfigError(where + ": integration must be an object");
    reject_unknown_keys(obj, keys, where + ".integration");

    IntegrationConfig cfg;
    auto scalar = [&](const char* key, double& out) {
        if (obj.contains(key))
            out = number_or_default(obj, key, out, where + ".integration");
    };
    scalar("t0", cfg.t0);
    scalar("t_end", cfg.t_end);
    scalar("dt", cfg.dt);
    scalar("abs_tol", cfg.abs_tol);
    scalar("rel_tol", cfg.rel_tol);
    scalar("dt_min", cfg.dt_min);
    scalar("dt_max", cfg.dt_max);
    scalar("record_interval", cfg.record_interval);
    if (obj.contains("method") && !is_default_marker(obj.at("method"))) {
        if (!obj.at("method").is_string())
            throw ConfigError(where + ".integration.method must be a string");
        cfg.method = parse_method(obj.at("method").get<std::string>());
    }
    if (obj.contains("negativity_policy") && !is_default_marker(obj.at("negativity_policy"))) {
        if (!obj.at("negativity_policy").is_string())
            throw ConfigError(where + ".integration.negativity_policy must be a string");
        cfg.negativity_policy =
            parse_negativity_policy(obj.at("negativity_policy").get<std::string>());
    }
    return cfg;
}

inline ScenarioSpec parse_scenario(const json& obj) {
    static const std::set<std::string> keys{"name", "params", "initial", "integration"};
    if (!obj.is_object()) throw ConfigError("each scenario must be an object");
    if (!obj.contains("name") || !obj.at("name").is_string() ||
        obj.at("name").get<std::string>().empty())
        throw ConfigError("each scenario requires a non-empty string 'name'");

    ScenarioSpec s;
    s.name = obj.at("name").get<std::string>();
    const std::string where = "scenario '" + s.name + "'";
    reject_unknown_keys(obj, keys, where);
    if (!obj.contains("params")) throw ConfigError(where + ": params is required");
    s.params = parse_params(obj.at("params"), where, s.unpublished_defaults);
    if (!obj.contains("initial")) throw ConfigError(where + ": initial is required");
    s.initial = parse_initial(obj.at("initial"), where, s.unpublished_defaults);
    if (obj.contains("integration"))
        s.integration = parse_integration(obj.at("integration"), where);
    validate(s);
    return s;
}

} // namespace detail

/// Parses a scenario document: {"scenarios": [ ... ]}. Every parameter and
/// initial-stock field must be given explicitly or as the string "default";
/// unknown keys anywhere are an error.
inline std::vector<ScenarioSpec> parse_scenarios(const std::string& text) {
    detail::json doc;
    try {
        doc = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        throw ConfigError(std::string("scenario file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("scenario file must be a JSON object");
    detail::reject_unknown_keys(doc, {"scenarios"}, "scenario file");
    if (!doc.contains("scenarios") || !doc.at("scenarios").is_array())
        throw ConfigError("scenario file requires a top-level 'scenarios' array");

    std::vector<ScenarioSpec> out;
    std::set<std::string> names;
    for (const auto& item : doc.at("scenarios")) {
        ScenarioSpec s = detail::parse_scenario(item);
        if (!names.insert(s.name).second)
            throw ConfigError("duplicate scenario name '" + s.name + "'");
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenarios(buf.str());
}

/// Serializes a scenario with every field explicit except the ones listed in
/// unpublished_defaults, which are written as "default" so that a round trip
/// preserves the flag list.
inline nlohmann::json to_json(const ScenarioSpec& s) {
    using detail::json;
    auto flagged = [&](std::string_view key) {
        return std::find(s.unpublished_defaults.begin(), s.unpublished_defaults.end(), key) !=
               s.unpublished_defaults.end();
    };
    auto field = [&](const char* key, double v) -> json {
        if (flagged(key)) return json("default");
        return json(v);
    };
    json params{
        {"s0", s.params.s0},
        {"lambda_t", s.params.lambda_t},
        {"lambda_n", s.params.lambda_n},
        {"mu_n", s.params.mu_n},
        {"b", field("b", s.params.b)},
        {"s_bar", field("s_bar", s.params.s_bar)},
        {"Np_bar", field("Np_bar", s.params.Np_bar)},
        {"c_mode", to_string(s.params.c_mode)},
        {"lambda_mn", s.params.lambda_mn},
        {"lambda_a", field("lambda_a", s.params.lambda_a)},
        {"mu_m", s.params.mu_m},
        {"A_input", field("A_input", s.params.A_input)},
    };
    json initial{
        {"N", flagged("initial.N") ? json("default") : json(s.initial.N)},
        {"Np", flagged("initial.Np") ? json("default") : json(s.initial.Np)},
        {"M", flagged("initial.M") ? json("default") : json(s.initial.M)},
    };
    json integration{
        {"t0", s.integration.t0},
        {"t_end", s.integration.t_end},
        {"method", to_string(s.integration.method)},
        {"dt", s.integration.dt},
        {"abs_tol", s.integration.abs_tol},
        {"rel_tol", s.integration.rel_tol},
        {"dt_min", s.integration.dt_min},
        {"dt_max", s.integration.dt_max},
        {"record_interval", s.integration.record_interval},
        {"negativity_policy", to_string(s.integration.negativity_policy)},
    };
    return json{{"name", s.name},
                {"params", std::move(params)},
                {"initial", std::move(initial)},
                {"integration", std::move(integration)}};
}

inline nlohmann::json to_json(const std::vector<ScenarioSpec>& scenarios) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : scenarios) arr.push_back(to_json(s));
    return nlohmann::json{{"scenarios", std::move(arr)}};
}

} // namespace tcell
