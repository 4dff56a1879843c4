#include "config.hpp"
#include "scenarios.hpp"
#include "trace.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace estkit::cli;

namespace {

namespace fs = std::filesystem;

bool mentions(const std::vector<std::string>& diag, const std::string& needle) {
    return std::any_of(diag.begin(), diag.end(), [&](const auto& d) { return d.find(needle) != std::string::npos; });
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("estkit_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Config config_from(const std::string& text) { return resolve(parse_config(text)); }

} // namespace

TEST(ConfigParse, TablesCommentsAndTypes) {
    const auto raw = parse_config(R"(# leading comment
schema_version = 1
scenario = "imm-track"   # trailing comment
seed = 12

[run]
steps = 40
dt = 0.5e0

[params]
likelihood = "prior"
)");
    EXPECT_EQ(std::get<double>(raw.entries.at("run.steps")), 40.0);
    EXPECT_EQ(std::get<double>(raw.entries.at("run.dt")), 0.5);
    EXPECT_EQ(std::get<std::string>(raw.entries.at("params.likelihood")), "prior");
    EXPECT_EQ(raw.lines.at("run.dt"), 8);
    EXPECT_TRUE(validate(raw).empty());
}

TEST(ConfigParse, SyntaxErrorsNameTheLine) {
    try {
        (void)parse_config("schema_version = 1\nscenario \"x\"\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
    }
    EXPECT_THROW((void)parse_config("[run\n"), ConfigError);
    EXPECT_THROW((void)parse_config("a = \"unterminated\n"), ConfigError);
}

TEST(ConfigValidate, NegativeDt) {
    const auto diag = validate(read_config(ESTKIT_TEST_DATA "/negative_dt.toml"));
    EXPECT_TRUE(mentions(diag, "dt must be positive"));
}

TEST(ConfigValidate, MissingDetectionProbability) {
    const auto diag = validate(read_config(ESTKIT_TEST_DATA "/phd_missing_pd.toml"));
    EXPECT_TRUE(mentions(diag, "p_detect"));
}

TEST(ConfigValidate, StochasticScenarioNeedsSeed) {
    const auto diag = validate(parse_config("schema_version = 1\nscenario = \"pf-vs-kf\"\n"));
    EXPECT_TRUE(mentions(diag, "seed"));
    EXPECT_TRUE(validate(parse_config("schema_version = 1\nscenario = \"observability\"\n")).empty());
    EXPECT_TRUE(is_stochastic("pf-vs-kf"));
    EXPECT_FALSE(is_stochastic("circular-reasoning"));
}

TEST(ConfigValidate, UnknownKeysAndScenario) {
    const auto diag = validate(parse_config("schema_version = 1\nscenario = \"observability\"\n[params]\nbogus = 3\n"));
    EXPECT_TRUE(mentions(diag, "bogus"));
    EXPECT_TRUE(mentions(diag, "4"));
    EXPECT_FALSE(validate(parse_config("schema_version = 1\nscenario = \"nope\"\n")).empty());
    EXPECT_FALSE(validate(parse_config("schema_version = 2\nscenario = \"observability\"\n")).empty());
    EXPECT_FALSE(validate(parse_config("scenario = \"observability\"\n")).empty());
}

TEST(ConfigValidate, ChoicesAndRanges) {
    const std::string head = "schema_version = 1\nscenario = \"pf-vs-kf\"\nseed = 1\n[params]\n";
    EXPECT_FALSE(validate(parse_config(head + "method = \"stratified\"\n")).empty());
    EXPECT_FALSE(validate(parse_config(head + "resample_fraction = 1.5\n")).empty());
    EXPECT_FALSE(validate(parse_config(head + "particles = 2.5\n")).empty());
    EXPECT_TRUE(validate(parse_config(head + "method = \"multinomial\"\n")).empty());
}

TEST(ConfigValidate, KalmanBucyObserverNeedsNoiseLevel) {
    const std::string head = "schema_version = 1\nscenario = \"sip-control\"\nseed = 1\n[params]\n";
    EXPECT_TRUE(mentions(validate(parse_config(head + "observer = \"kalman_bucy\"\n")), "sigma_e"));
    EXPECT_TRUE(validate(parse_config(head + "observer = \"kalman_bucy\"\nsigma_e = 0.01\n")).empty());
}

TEST(ConfigResolve, DefaultsAndOverrides) {
    const auto cfg = config_from(
        "schema_version = 1\nscenario = \"phd-track\"\nseed = 4\n[params]\np_detect = 0.95\n"
        "[output]\ndir = \"somewhere\"\nformat = \"jsonl\"\n");
    EXPECT_EQ(cfg.scenario, "phd-track");
    EXPECT_EQ(*cfg.seed, 4u);
    EXPECT_EQ(cfg.num("p_detect"), 0.95);
    EXPECT_EQ(cfg.num("prune"), 1e-5);
    EXPECT_EQ(cfg.num("merge"), 4.0);
    EXPECT_EQ(cfg.integer("max_components"), 100);
    EXPECT_EQ(cfg.out_dir, fs::path("somewhere"));
    EXPECT_EQ(cfg.format, "jsonl");
    EXPECT_THROW((void)config_from("schema_version = 1\nscenario = \"phd-track\"\nseed = 4\n"), ConfigError);
}

TEST(ConfigResolve, ShippedConfigsAreClean) {
    for (const auto& name : scenario_names()) {
        const auto path = fs::path(ESTKIT_CONFIG_DIR) / (name + ".toml");
        ASSERT_TRUE(fs::exists(path)) << path;
        EXPECT_TRUE(validate(read_config(path)).empty()) << name;
    }
}

TEST(Trace, NumberFormatting) {
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-2.5e-7), "-2.5e-07");
    const double v = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(Trace, CsvColumnOrder) {
    Trace t{"demo", {}};
    for (int k = 0; k < 2; ++k) {
        TraceRecord r;
        r.t = k;
        r.truth = Eigen::Vector2d(1, 2);
        r.estimate = Eigen::Vector2d(3, 4);
        r.cov_diag = Eigen::Vector2d(5, 6);
        r.extras = {{"zeta", 7}, {"alpha", 8}};
        t.records.push_back(r);
    }
    const auto csv = to_csv(t);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,truth_0,truth_1,est_0,est_1,covdiag_0,covdiag_1,alpha,zeta");
    EXPECT_NE(csv.find("\n1,1,2,3,4,5,6,8,7\n"), std::string::npos);
    const auto jsonl = to_jsonl(t);
    EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 2);
    EXPECT_NE(jsonl.find("\"alpha\":8"), std::string::npos);
}

TEST(Trace, RejectsNonMonotoneTime) {
    Trace t{"bad", {}};
    TraceRecord r;
    r.estimate = Eigen::VectorXd::Zero(1);
    r.cov_diag = Eigen::VectorXd::Zero(1);
    r.t = 1;
    t.records.push_back(r);
    r.t = 0;
    t.records.push_back(r);
    EXPECT_THROW((void)to_csv(t), std::logic_error);
}

TEST(Scenarios, ObservabilityReport) {
    const auto lines = observability(config_from("schema_version = 1\nscenario = \"observability\"\n"
                                                 "[params]\nv = 2\nwheelbase = 1\n"));
    ASSERT_EQ(lines.size(), 3u);
    int observable = 0;
    for (const auto& l : lines) observable += l.observable;
    EXPECT_EQ(observable, 2);
}

TEST(Scenarios, CircularReasoningSummary) {
    const auto res = run_scenario(config_from("schema_version = 1\nscenario = \"circular-reasoning\"\n"));
    EXPECT_EQ(res.exit_code, 0);
    const auto text = render_summary(res.summary);
    EXPECT_NE(text.find("[1, 1, 3, 3, 8, 8]"), std::string::npos) << text;
    EXPECT_NE(text.find("[1, 2, 2, 5, 5, 13]"), std::string::npos) << text;
}

TEST(Scenarios, FallingPendulumReportsFailure) {
    const auto res = run_scenario(config_from("schema_version = 1\nscenario = \"sip-control\"\nseed = 1\n"
                                              "[run]\nhorizon = 2\n[params]\ntheta0 = 1.5\n"));
    EXPECT_EQ(res.exit_code, 3);
    EXPECT_NE(res.summary.dump().find("Control failure!"), std::string::npos);
}

TEST(Scenarios, IdenticalSeedGivesIdenticalTraces) {
    for (const std::string name : {"imm-track", "pf-vs-kf", "phd-track", "ukf-ckf-landmark"}) {
        auto cfg = load(fs::path(ESTKIT_CONFIG_DIR) / (name + ".toml"));
        if (name == "pf-vs-kf") cfg.numbers["particles"] = 500;
        const auto dir_a = scratch(name + "_a"), dir_b = scratch(name + "_b");
        const auto a = run_scenario(cfg), b = run_scenario(cfg);
        ASSERT_FALSE(a.traces.empty());
        ASSERT_EQ(a.traces.size(), b.traces.size());
        for (std::size_t i = 0; i < a.traces.size(); ++i) {
            const auto pa = write_trace(a.traces[i], dir_a, "csv");
            const auto pb = write_trace(b.traces[i], dir_b, "csv");
            EXPECT_EQ(slurp(pa), slurp(pb)) << name;
        }
        cfg.seed = *cfg.seed + 1;
        const auto c = run_scenario(cfg);
        EXPECT_NE(to_csv(a.traces[0]), to_csv(c.traces[0])) << name;
    }
}

TEST(Cli, ExitCodesAndOutputOverride) {
    const auto out = scratch("cli_env");
    const std::string exe = ESTKIT_CLI_PATH;
    const std::string cfg = std::string(ESTKIT_CONFIG_DIR) + "/circular-reasoning.toml";
    const std::string quiet = " > " + (out / "stdout.txt").string() + " 2>&1";
    auto run = [](const std::string& cmd) {
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    EXPECT_EQ(run("ESTKIT_OUT_DIR=" + (out / "env").string() + " " + exe + " run " + cfg + " --out " +
                  (out / "flag").string() + quiet),
              0);
    EXPECT_TRUE(fs::exists(out / "env" / "circular-reasoning.csv"));
    EXPECT_FALSE(fs::exists(out / "flag"));
    EXPECT_EQ(run(exe + " run " + cfg + " --format jsonl --out " + (out / "j").string() + quiet), 0);
    EXPECT_TRUE(fs::exists(out / "j" / "circular-reasoning.jsonl"));
    EXPECT_EQ(run(exe + " validate " + ESTKIT_TEST_DATA "/negative_dt.toml" + quiet), 2);
    EXPECT_NE(slurp(out / "stdout.txt").find("dt must be positive"), std::string::npos);
    EXPECT_EQ(run(exe + " run " + ESTKIT_TEST_DATA "/phd_missing_pd.toml" + quiet), 2);
    EXPECT_EQ(run(exe + " frobnicate" + quiet), 2);
    EXPECT_EQ(run(exe + " list-scenarios" + quiet), 0);
    EXPECT_NE(slurp(out / "stdout.txt").find("ukf-ckf-landmark"), std::string::npos);
}
