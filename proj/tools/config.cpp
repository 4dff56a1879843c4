#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace estkit::cli {
namespace {

enum class Check { any, positive, nonneg, negative, probability, count, text };

struct Field {
    std::string key;  // "run.dt", "params.p_detect"
    Check check;
    std::optional<Value> fallback;  // absent means required
    std::vector<std::string> choices = {};
};

struct Scenario {
    std::string name;
    bool stochastic;
    std::vector<Field> fields;
};

Field req(std::string key, Check c) { return {std::move(key), c, std::nullopt}; }
Field opt(std::string key, Check c, double v) { return {std::move(key), c, Value{v}}; }
Field choice(std::string key, std::string v, std::vector<std::string> choices) {
    return {std::move(key), Check::text, Value{std::move(v)}, std::move(choices)};
}

const std::vector<Scenario>& schema() {
    using C = Check;
    static const std::vector<Scenario> s{
        {"observability",
         false,
         {opt("params.v", C::positive, 2), opt("params.wheelbase", C::positive, 1),
          opt("params.tau_beta", C::positive, 0.5), opt("params.g", C::positive, 10), opt("params.m1", C::positive, 1),
          opt("params.m2", C::positive, 1), opt("params.L1", C::positive, 1), opt("params.L2", C::positive, 1),
          opt("params.pendulum_length", C::positive, 1)}},
        {"sip-control",
         true,
         {opt("run.dt", C::positive, 0.001), opt("run.horizon", C::positive, 4.0), opt("params.g", C::positive, 10),
          opt("params.pendulum_length", C::positive, 1), opt("params.pole", C::negative, -4),
          opt("params.meas_sigma", C::nonneg, 0.01), opt("params.init_sigma", C::nonneg, 0.2),
          opt("params.theta0", C::any, 0.2), opt("params.x0", C::any, 0.2),
          choice("params.observer", "luenberger", {"luenberger", "kalman_bucy"}),
          {"params.sigma_e", C::nonneg, Value{std::string{}}}, opt("params.record_every", C::count, 10)}},
        {"imm-track",
         true,
         {opt("run.dt", C::positive, 1), opt("run.steps", C::count, 60), opt("params.speed", C::any, 1),
          opt("params.meas_var", C::positive, 1), opt("params.var_p", C::positive, 0.5),
          opt("params.var_v", C::positive, 0.03), opt("params.var_a", C::positive, 0.0001),
          opt("params.p_stay", C::probability, 0.9), opt("params.init_var", C::positive, 10),
          choice("params.likelihood", "posterior", {"posterior", "prior"})}},
        {"pf-vs-kf",
         true,
         {opt("run.dt", C::positive, 1), opt("run.steps", C::count, 30), opt("params.particles", C::count, 20000),
          opt("params.q_p", C::positive, 1), opt("params.q_v", C::positive, 1),
          opt("params.meas_var", C::positive, 0.25), opt("params.init_var", C::positive, 1),
          opt("params.resample_fraction", C::probability, 0.5),
          choice("params.method", "systematic", {"systematic", "multinomial"}),
          choice("params.proposal", "optimal", {"optimal", "transition"}),
          choice("params.observed", "state", {"state", "position"})}},
        {"cif-network",
         true,
         {opt("run.dt", C::positive, 1), opt("run.steps", C::count, 30), opt("params.nodes", C::count, 3),
          opt("params.runs", C::count, 200), opt("params.q", C::positive, 0.01),
          opt("params.meas_var", C::positive, 1), opt("params.init_var", C::positive, 10)}},
        {"circular-reasoning",
         false,
         {opt("params.rounds", C::count, 5), opt("params.variance", C::positive, 1)}},
        {"phd-track",
         true,
         {opt("run.dt", C::positive, 1), opt("run.steps", C::count, 50), req("params.p_detect", C::probability),
          opt("params.p_survive", C::probability, 0.99), opt("params.clutter_rate", C::nonneg, 2),
          opt("params.region", C::positive, 100), opt("params.meas_var", C::positive, 1),
          opt("params.q", C::positive, 0.05), opt("params.birth_weight", C::probability, 0.03),
          opt("params.prune", C::positive, 1e-5), opt("params.merge", C::positive, 4),
          opt("params.max_components", C::count, 100)}},
        {"ukf-ckf-landmark",
         true,
         {opt("run.dt", C::positive, 0.1), opt("run.steps", C::count, 100), opt("params.v", C::positive, 1),
          opt("params.wheelbase", C::positive, 2.5), opt("params.x_L", C::any, 5), opt("params.y_L", C::any, 5),
          opt("params.var_r", C::positive, 0.01), opt("params.var_u", C::positive, 0.001),
          opt("params.steer", C::any, 0.2), opt("params.init_var", C::positive, 0.5)}},
    };
    return s;
}

const Scenario* find_scenario(const std::string& name) {
    for (const auto& s : schema())
        if (s.name == name) return &s;
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

Value parse_value(const std::string& text, int line) {
    if (text.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"' || text.find('"', 1) != text.size() - 1)
            throw ConfigError("line " + std::to_string(line) + ": unterminated string");
        return text.substr(1, text.size() - 2);
    }
    if (text == "true") return true;
    if (text == "false") return false;
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size()) throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + text + "'");
    return v;
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::string describe(Check c) {
    switch (c) {
    case Check::positive: return "must be positive";
    case Check::nonneg: return "must be non-negative";
    case Check::negative: return "must be negative";
    case Check::probability: return "must lie in [0, 1]";
    case Check::count: return "must be a positive integer";
    default: return "is invalid";
    }
}

bool passes(Check c, double v) {
    if (!std::isfinite(v)) return false;
    switch (c) {
    case Check::positive: return v > 0;
    case Check::nonneg: return v >= 0;
    case Check::negative: return v < 0;
    case Check::probability: return v >= 0 && v <= 1;
    case Check::count: return v >= 1 && v == std::floor(v) && v < 1e12;
    default: return true;
    }
}

// Short name used in diagnostics: "dt" rather than "run.dt".
std::string leaf(const std::string& key) {
    const auto dot = key.find('.');
    return dot == std::string::npos ? key : key.substr(dot + 1);
}

} // namespace

RawConfig parse_config(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line, table;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3)
                throw ConfigError("line " + std::to_string(number) + ": malformed table header");
            table = trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty() || key.find_first_of(" \t.\"") != std::string::npos)
            throw ConfigError("line " + std::to_string(number) + ": invalid key '" + key + "'");
        const std::string full = table.empty() ? key : table + "." + key;
        if (raw.entries.count(full)) throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + full + "'");
        raw.entries[full] = parse_value(trim(body.substr(eq + 1)), number);
        raw.lines[full] = number;
    }
    return raw;
}

RawConfig read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<std::string> validate(const RawConfig& raw) {
    std::vector<std::string> diag;
    const auto& e = raw.entries;
    auto number_of = [&](const std::string& key) -> const double* { return std::get_if<double>(&e.at(key)); };

    if (!e.count("schema_version")) {
        diag.push_back("missing required field 'schema_version'");
    } else if (const double* v = number_of("schema_version"); !v || *v != schema_version) {
        diag.push_back("unsupported schema_version (expected " + std::to_string(schema_version) + ")");
    }

    const Scenario* sc = nullptr;
    if (!e.count("scenario")) {
        diag.push_back("missing required field 'scenario'");
    } else if (const auto* name = std::get_if<std::string>(&e.at("scenario")); !name) {
        diag.push_back("scenario must be a string");
    } else if (sc = find_scenario(*name); !sc) {
        diag.push_back("unknown scenario '" + *name + "'");
    }

    if (e.count("seed")) {
        const double* v = number_of("seed");
        if (!v || *v < 0 || *v != std::floor(*v) || *v > 9.0e15) diag.push_back("seed must be a non-negative integer");
    } else if (sc && sc->stochastic) {
        diag.push_back("missing required field 'seed' (scenario '" + sc->name + "' is stochastic)");
    }

    std::set<std::string> known{"schema_version", "scenario", "seed", "output.dir", "output.format"};
    if (e.count("output.dir") && !std::holds_alternative<std::string>(e.at("output.dir")))
        diag.push_back("output.dir must be a string");
    if (e.count("output.format")) {
        const auto* f = std::get_if<std::string>(&e.at("output.format"));
        if (!f || (*f != "csv" && *f != "jsonl")) diag.push_back("output.format must be \"csv\" or \"jsonl\"");
    }

    if (sc) {
        for (const auto& f : sc->fields) {
            known.insert(f.key);
            const auto it = e.find(f.key);
            if (it == e.end()) {
                if (!f.fallback) diag.push_back("missing required field '" + f.key + "'");
                continue;
            }
            if (f.check == Check::text) {
                const auto* s = std::get_if<std::string>(&it->second);
                if (!s || std::find(f.choices.begin(), f.choices.end(), *s) == f.choices.end()) {
                    std::string opts;
                    for (const auto& c : f.choices) opts += (opts.empty() ? "" : ", ") + c;
                    diag.push_back(leaf(f.key) + " must be one of: " + opts);
                }
                continue;
            }
            const auto* v = std::get_if<double>(&it->second);
            if (!v) {
                diag.push_back(leaf(f.key) + " must be a number");
            } else if (!passes(f.check, *v)) {
                diag.push_back(leaf(f.key) + " " + describe(f.check));
            }
        }
        // Cross-field rule: the Kalman-Bucy observer needs a modelling-noise level.
        if (sc->name == "sip-control" && e.count("params.observer") &&
            e.at("params.observer") == Value{std::string{"kalman_bucy"}} && !e.count("params.sigma_e"))
            diag.push_back("missing required field 'params.sigma_e' (needed by observer = \"kalman_bucy\")");
    }

    std::vector<std::pair<int, std::string>> unknown;
    for (const auto& [key, value] : e)
        if (!known.count(key)) unknown.emplace_back(raw.lines.at(key), key);
    std::sort(unknown.begin(), unknown.end());
    for (const auto& [line, key] : unknown) diag.push_back("unknown key '" + key + "' (line " + std::to_string(line) + ")");
    return diag;
}

double Config::num(const std::string& key) const {
    const auto it = numbers.find(key);
    if (it == numbers.end()) throw ConfigError("config has no numeric field '" + key + "'");
    return it->second;
}

long Config::integer(const std::string& key) const { return std::lround(num(key)); }

const std::string& Config::str(const std::string& key) const {
    const auto it = strings.find(key);
    if (it == strings.end()) throw ConfigError("config has no string field '" + key + "'");
    return it->second;
}

Config resolve(const RawConfig& raw) {
    const auto diag = validate(raw);
    if (!diag.empty()) {
        std::string msg = "invalid config:";
        for (const auto& d : diag) msg += "\n  " + d;
        throw ConfigError(msg);
    }
    Config cfg;
    cfg.scenario = std::get<std::string>(raw.entries.at("scenario"));
    if (raw.entries.count("seed")) cfg.seed = static_cast<std::uint64_t>(std::get<double>(raw.entries.at("seed")));
    if (raw.entries.count("output.dir")) cfg.out_dir = std::get<std::string>(raw.entries.at("output.dir"));
    if (raw.entries.count("output.format")) cfg.format = std::get<std::string>(raw.entries.at("output.format"));
    for (const auto& f : find_scenario(cfg.scenario)->fields) {
        const auto it = raw.entries.find(f.key);
        const Value* v = it != raw.entries.end() ? &it->second : (f.fallback ? &*f.fallback : nullptr);
        if (!v) continue;
        const std::string name = leaf(f.key);
        if (const auto* d = std::get_if<double>(v)) {
            cfg.numbers[name] = *d;
        } else if (const auto* s = std::get_if<std::string>(v); s && !s->empty()) {
            cfg.strings[name] = *s;
        }
    }
    return cfg;
}

Config load(const std::filesystem::path& path) { return resolve(read_config(path)); }

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& s : schema()) n.push_back(s.name);
        return n;
    }();
    return names;
}

bool is_stochastic(const std::string& scenario) {
    const Scenario* s = find_scenario(scenario);
    return s && s->stochastic;
}

} // namespace estkit::cli
