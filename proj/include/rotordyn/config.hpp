#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/floquet.hpp"
#include "rotordyn/lyapunov.hpp"
#include "rotordyn/many_body.hpp"
#include "rotordyn/observables.hpp"
#include "rotordyn/propagator.hpp"

namespace rotordyn {

/// Parse or schema failure in a run configuration. Maps to the validation exit code.
struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};

inline const std::vector<std::string>& known_commands()
{
    static const std::vector<std::string> c{"evolve", "lyapunov", "nekhoroshev", "ed-scan", "analyze"};
    return c;
}

struct RunConfig {
    std::string command;
    std::uint64_t seed = 0;
    ModelParams params;

    // evolve
    std::int64_t n_kicks = 10000;
    std::int64_t record_every = 1;
    int m0 = 0;
    PropagatorOptions propagation;
    NoiseModel noise;
    CoarseGrainConfig coarse;
    std::optional<std::int64_t> fit_t_min, fit_t_max;

    // lyapunov
    LyapunovConfig lyapunov;
    std::vector<int> M_list;

    // nekhoroshev
    NekhoroshevConfig nekhoroshev;

    // ed-scan
    int N = 4;
    std::vector<double> K_grid;
    RScanConfig ed;
    bool dump_quasienergies = false;

    // analyze
    std::filesystem::path input;
    std::string analysis = "power_law"; ///< power_law | sigma

    /// Resolved key/value pairs after overrides, for provenance.
    std::map<std::string, std::string> resolved;
};

namespace detail {

inline std::string where(const YAML::Node& n)
{
    const auto m = n.Mark();
    if (m.line < 0) return "";
    return " (line " + std::to_string(m.line + 1) + ")";
}

template <class T>
T as(const std::string& key, const YAML::Node& n)
{
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("config key '" + key + "'" + where(n) + ": cannot read value '" + YAML::Dump(n) + "'");
    }
}

template <class T>
T one_of(const std::string& key, const YAML::Node& n, const std::map<std::string, T>& choices)
{
    const auto s = as<std::string>(key, n);
    const auto it = choices.find(s);
    if (it != choices.end()) return it->second;
    std::string list;
    for (const auto& [name, v] : choices) list += (list.empty() ? "" : ", ") + name;
    throw ConfigError("config key '" + key + "'" + where(n) + ": '" + s + "' is not one of {" + list + "}");
}

struct KeySpec {
    std::set<std::string> commands; ///< empty = every command
    std::function<void(const std::string&, const YAML::Node&, RunConfig&)> apply;
};

inline const std::map<std::string, KeySpec>& schema()
{
    using C = std::set<std::string>;
    static const C dyn{"evolve", "lyapunov"}, all{};
    static const std::map<std::string, KeySpec> s{
        {"command", {all, [](auto&, auto&, auto&) {}}},
        {"seed", {all, [](auto& k, auto& n, RunConfig& c) { c.seed = as<std::uint64_t>(k, n); }}},
        {"K", {all, [](auto& k, auto& n, RunConfig& c) { c.params.K = as<double>(k, n); }}},
        {"epsilon", {all, [](auto& k, auto& n, RunConfig& c) { c.params.epsilon = as<double>(k, n); }}},
        {"kbar", {all, [](auto& k, auto& n, RunConfig& c) { c.params.kbar = as<double>(k, n); }}},
        {"M", {all, [](auto& k, auto& n, RunConfig& c) { c.params.M = as<int>(k, n); }}},
        {"n_kicks", {C{"evolve", "lyapunov", "nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.n_kicks = as<std::int64_t>(k, n); }}},
        {"record_every", {C{"evolve", "lyapunov", "nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.record_every = as<std::int64_t>(k, n); }}},
        {"m0", {dyn, [](auto& k, auto& n, RunConfig& c) { c.m0 = as<int>(k, n); }}},
        {"method", {C{"evolve"}, [](auto& k, auto& n, RunConfig& c) {
             c.propagation.method = one_of<KickMethod>(k, n, {{"spectral", KickMethod::spectral}, {"bessel", KickMethod::bessel}});
         }}},
        {"coupling", {dyn, [](auto& k, auto& n, RunConfig& c) {
             c.propagation.coupling = one_of<Coupling>(k, n, {{"real_part", Coupling::real_part}, {"full", Coupling::full}});
         }}},
        {"noise", {dyn, [](auto& k, auto& n, RunConfig& c) {
             c.noise.kind = one_of<NoiseModel::Kind>(k, n, {{"none", NoiseModel::Kind::none}, {"gaussian_iid", NoiseModel::Kind::gaussian_iid}});
         }}},
        {"noise_sigma", {dyn, [](auto& k, auto& n, RunConfig& c) { c.noise.sigma = as<double>(k, n); }}},
        {"sigma_window", {C{"evolve", "analyze"}, [](auto& k, auto& n, RunConfig& c) { c.coarse.window = as<int>(k, n); }}},
        {"sigma_stride", {C{"evolve", "analyze"}, [](auto& k, auto& n, RunConfig& c) { c.coarse.stride = as<int>(k, n); }}},
        {"fit_t_min", {C{"evolve", "nekhoroshev", "analyze"}, [](auto& k, auto& n, RunConfig& c) { c.fit_t_min = as<std::int64_t>(k, n); }}},
        {"fit_t_max", {C{"evolve", "analyze"}, [](auto& k, auto& n, RunConfig& c) { c.fit_t_max = as<std::int64_t>(k, n); }}},
        {"delta", {C{"lyapunov"}, [](auto& k, auto& n, RunConfig& c) { c.lyapunov.delta = as<double>(k, n); }}},
        {"pairing", {C{"lyapunov"}, [](auto& k, auto& n, RunConfig& c) {
             c.lyapunov.pairing = one_of<Pairing>(k, n, {{"m0_perturbed", Pairing::m0_perturbed}, {"uniform_perturbed", Pairing::uniform_perturbed}});
         }}},
        {"M_list", {C{"lyapunov"}, [](auto& k, auto& n, RunConfig& c) { c.M_list = as<std::vector<int>>(k, n); }}},
        {"eps_list", {C{"nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.nekhoroshev.eps_list = as<std::vector<double>>(k, n); }}},
        {"n_diso", {C{"nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.nekhoroshev.n_diso = as<int>(k, n); }}},
        {"b", {C{"nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.nekhoroshev.b = as<double>(k, n); }}},
        {"log_points", {C{"nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.nekhoroshev.log_points = as<int>(k, n); }}},
        {"min_segment", {C{"nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.nekhoroshev.min_segment = as<int>(k, n); }}},
        {"chunk", {C{"nekhoroshev"}, [](auto& k, auto& n, RunConfig& c) { c.nekhoroshev.chunk = as<int>(k, n); }}},
        {"N", {C{"ed-scan"}, [](auto& k, auto& n, RunConfig& c) { c.N = as<int>(k, n); }}},
        {"K_grid", {C{"ed-scan"}, [](auto& k, auto& n, RunConfig& c) { c.K_grid = as<std::vector<double>>(k, n); }}},
        {"check_convergence", {C{"ed-scan"}, [](auto& k, auto& n, RunConfig& c) { c.ed.check_convergence = as<bool>(k, n); }}},
        {"convergence_tol", {C{"ed-scan"}, [](auto& k, auto& n, RunConfig& c) { c.ed.convergence_tol = as<double>(k, n); }}},
        {"max_dim", {C{"ed-scan"}, [](auto& k, auto& n, RunConfig& c) { c.ed.max_sector_dim = as<std::size_t>(k, n); }}},
        {"dump_quasienergies", {C{"ed-scan"}, [](auto& k, auto& n, RunConfig& c) { c.dump_quasienergies = as<bool>(k, n); }}},
        {"input", {C{"analyze"}, [](auto& k, auto& n, RunConfig& c) { c.input = as<std::string>(k, n); }}},
        {"analysis", {C{"analyze"}, [](auto& k, auto& n, RunConfig& c) {
             c.analysis = one_of<std::string>(k, n, {{"power_law", "power_law"}, {"sigma", "sigma"}});
         }}},
    };
    return s;
}

inline std::string scalar_text(const YAML::Node& n)
{
    if (n.IsScalar()) return n.Scalar();
    YAML::Emitter e;
    e << YAML::Flow << n;
    return e.c_str();
}

} // namespace detail

/// Splits "key=value" and parses value as a YAML scalar or flow sequence.
inline std::pair<std::string, YAML::Node> parse_override(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not of the form key=value");
    const std::string key = text.substr(0, eq);
    try {
        return {key, YAML::Load(text.substr(eq + 1))};
    } catch (const YAML::Exception& e) {
        throw ConfigError("override '" + text + "': " + e.msg);
    }
}

/// Builds a validated RunConfig from YAML text plus key=value overrides.
/// Unknown keys and keys that do not belong to the command are errors.
inline RunConfig parse_config_text(const std::string& yaml_text, const std::vector<std::string>& overrides = {},
                                   const std::optional<std::string>& command_override = std::nullopt)
{
    YAML::Node root;
    try {
        root = yaml_text.empty() ? YAML::Node(YAML::NodeType::Map) : YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config parse error at line " + std::to_string(e.mark.line + 1) + ", column " + std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ConfigError("config must be a mapping of key: value pairs");

    std::map<std::string, YAML::Node> entries;
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (entries.count(key)) throw ConfigError("config key '" + key + "'" + detail::where(kv.first) + " appears twice");
        entries[key] = kv.second;
    }
    std::set<std::string> overridden;
    for (const auto& o : overrides) {
        auto [k, v] = parse_override(o);
        entries[k] = v;
        overridden.insert(k);
    }
    auto origin = [&](const std::string& key, const YAML::Node& n) { return overridden.count(key) ? std::string(" (from --set)") : detail::where(n); };
    if (command_override) {
        const auto it = entries.find("command");
        if (it != entries.end() && detail::as<std::string>("command", it->second) != *command_override)
            throw ConfigError("config command '" + it->second.as<std::string>() + "' does not match the requested command '" + *command_override + "'");
        entries["command"] = YAML::Node(*command_override);
    }

    RunConfig cfg;
    const auto cmd_it = entries.find("command");
    if (cmd_it == entries.end()) throw ConfigError("config needs a 'command' key");
    cfg.command = detail::as<std::string>("command", cmd_it->second);
    const auto& cmds = known_commands();
    if (std::find(cmds.begin(), cmds.end(), cfg.command) == cmds.end()) throw ConfigError("unknown command '" + cfg.command + "'");
    if (!entries.count("seed")) throw ConfigError("config needs an explicit 'seed'");

    const auto& sch = detail::schema();
    for (const auto& [key, node] : entries) {
        const auto it = sch.find(key);
        if (it == sch.end()) throw ConfigError("unknown config key '" + key + "'" + origin(key, node));
        if (!it->second.commands.empty() && !it->second.commands.count(cfg.command))
            throw ConfigError("config key '" + key + "'" + origin(key, node) + " does not apply to command '" + cfg.command + "'");
        it->second.apply(key, node, cfg);
        cfg.resolved[key] = detail::scalar_text(node);
    }

    // Propagate shared settings into the module configs, then validate with the modules' own rules.
    cfg.params.validate();
    cfg.noise.seed = cfg.seed;
    cfg.noise.validate();
    if (cfg.noise.kind == NoiseModel::Kind::gaussian_iid && !entries.count("noise_sigma"))
        throw ConfigError("noise: gaussian_iid needs noise_sigma");
    cfg.lyapunov.n_periods = cfg.n_kicks;
    cfg.lyapunov.record_every = cfg.record_every;
    cfg.lyapunov.m0 = cfg.m0;
    cfg.lyapunov.coupling = cfg.propagation.coupling;
    cfg.lyapunov.noise = cfg.noise;
    cfg.nekhoroshev.seed = cfg.seed;
    cfg.nekhoroshev.n_kicks = cfg.n_kicks;
    cfg.nekhoroshev.record_every = entries.count("record_every") ? cfg.record_every : 0;
    if (cfg.fit_t_min) cfg.nekhoroshev.fit_t_min = *cfg.fit_t_min;

    if (cfg.command == "evolve") {
        require(cfg.n_kicks >= 1, "evolve: n_kicks must be >= 1");
        require(cfg.record_every >= 1, "evolve: record_every must be >= 1");
        require(cfg.m0 >= -cfg.params.M && cfg.m0 <= cfg.params.M, "evolve: m0 must lie in [-M, M]");
    } else if (cfg.command == "lyapunov") {
        for (int M : cfg.M_list) require(M >= 1, "lyapunov: every entry of M_list must be >= 1");
        cfg.lyapunov.validate(cfg.params);
    } else if (cfg.command == "nekhoroshev") {
        cfg.nekhoroshev.validate();
    } else if (cfg.command == "ed-scan") {
        ManyBodyParams mbp{cfg.N, cfg.params.M, cfg.params.K, cfg.params.epsilon, cfg.params.kbar};
        mbp.validate();
        if (cfg.K_grid.empty()) cfg.K_grid = {cfg.params.K};
        for (double K : cfg.K_grid) require(std::isfinite(K) && K >= 0.0, "ed-scan: K_grid values must be finite and >= 0");
        require(cfg.ed.convergence_tol > 0.0, "ed-scan: convergence_tol must be > 0");
    } else if (cfg.command == "analyze") {
        require(!cfg.input.empty(), "analyze: 'input' is required");
        if (!std::filesystem::is_regular_file(cfg.input)) throw ConfigError("analyze: input file '" + cfg.input.string() + "' does not exist");
        require(cfg.coarse.window >= 1 && cfg.coarse.stride >= 1, "analyze: sigma_window and sigma_stride must be >= 1");
    }
    if (cfg.fit_t_min && cfg.fit_t_max) require(*cfg.fit_t_min < *cfg.fit_t_max, "fit_t_min must be < fit_t_max");
    return cfg;
}

inline RunConfig parse_config_file(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                                   const std::optional<std::string>& command_override = std::nullopt)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), overrides, command_override);
}

} // namespace rotordyn
