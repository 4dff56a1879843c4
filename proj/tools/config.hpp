#pragma once

// Scenario configuration files.
//
// Dialect (schema_version = 1): one `key = value` per line, `[table]` headers,
// `#` comments. Values are numbers, booleans, or double-quoted strings.
// Top-level keys: schema_version, scenario, seed. Tables: [run] for time
// stepping, [params] for scenario parameters, [output] for dir and format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace estkit::cli {

inline constexpr int schema_version = 1;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Value = std::variant<double, bool, std::string>;

struct RawConfig {
    std::map<std::string, Value> entries;  // keys are "table.key" or bare top-level names
    std::map<std::string, int> lines;
};

// Throws ConfigError on syntax errors, naming the line.
[[nodiscard]] RawConfig parse_config(const std::string& text);
[[nodiscard]] RawConfig read_config(const std::filesystem::path& path);

struct Config {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::map<std::string, double> numbers;       // resolved [run] and [params] numbers, defaults applied
    std::map<std::string, std::string> strings;  // resolved string-valued params
    std::filesystem::path out_dir = ".";
    std::string format = "csv";

    [[nodiscard]] double num(const std::string& key) const;
    [[nodiscard]] long integer(const std::string& key) const;
    [[nodiscard]] const std::string& str(const std::string& key) const;
    [[nodiscard]] bool has(const std::string& key) const { return numbers.count(key) || strings.count(key); }
};

// Every problem found, in file order; empty means the file is clean.
[[nodiscard]] std::vector<std::string> validate(const RawConfig& raw);

// Validates and resolves; throws ConfigError listing the diagnostics.
[[nodiscard]] Config resolve(const RawConfig& raw);
[[nodiscard]] Config load(const std::filesystem::path& path);

[[nodiscard]] const std::vector<std::string>& scenario_names();
[[nodiscard]] bool is_stochastic(const std::string& scenario);

} // namespace estkit::cli
