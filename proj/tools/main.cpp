// estkit command-line runner.
//
//   estkit run <config> [--seed N] [--out DIR] [--format csv|jsonl]
//   estkit validate <config>
//   estkit list-scenarios
//
// ESTKIT_OUT_DIR overrides the output directory (config value and --out).
// Exit codes: 0 success, 2 config error, 3 scenario failure.

#include "config.hpp"
#include "scenarios.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

namespace {

constexpr int exit_config = 2;
constexpr int exit_failure = 3;

int cmd_validate(const std::string& path) {
    using namespace estkit::cli;
    RawConfig raw;
    try {
        raw = read_config(path);
    } catch (const ConfigError& e) {
        std::cout << path << ": " << e.what() << "\n";
        return exit_config;
    }
    const auto diag = validate(raw);
    for (const auto& d : diag) std::cout << path << ": " << d << "\n";
    if (diag.empty()) std::cout << path << ": ok\n";
    return diag.empty() ? 0 : exit_config;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
            std::optional<std::string> format) {
    using namespace estkit::cli;
    Config cfg;
    try {
        cfg = load(path);
    } catch (const ConfigError& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return exit_config;
    }
    if (seed) cfg.seed = seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (const char* env = std::getenv("ESTKIT_OUT_DIR"); env && *env) cfg.out_dir = env;
    if (format) cfg.format = *format;

    RunResult res;
    try {
        res = run_scenario(cfg);
    } catch (const estkit::Error& e) {
        std::cerr << "scenario failed: " << e.what() << "\n";
        return exit_failure;
    }
    Json files = Json::array();
    for (const auto& t : res.traces) files.push_back(write_trace(t, cfg.out_dir, cfg.format).string());
    res.summary["traces"] = files;
    std::cout << render_summary(res.summary);
    if (res.exit_code == exit_failure) std::cerr << "Control failure!\n";
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recursive state estimation scenarios"};
    app.require_subcommand(1);

    std::string run_path, validate_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir, format;

    auto* run = app.add_subcommand("run", "Run a scenario and write its traces");
    run->add_option("config", run_path, "Scenario config file")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out_dir, "Output directory for traces");
    run->add_option("--format", format, "Trace format")->check(CLI::IsMember({"csv", "jsonl"}));

    auto* val = app.add_subcommand("validate", "Check a config file and list problems");
    val->add_option("config", validate_path, "Scenario config file")->required();

    auto* list = app.add_subcommand("list-scenarios", "Print the available scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*list) {
            for (const auto& name : estkit::cli::scenario_names()) std::cout << name << "\n";
            return 0;
        }
        if (*val) return cmd_validate(validate_path);
        return cmd_run(run_path, seed, out_dir, format);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
}
