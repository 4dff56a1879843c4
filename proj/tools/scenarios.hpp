#pragma once

#include "config.hpp"
#include "trace.hpp"

#include "estkit/fusion.hpp"
#include "estkit/statespace.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace estkit::cli {

using Json = nlohmann::ordered_json;

// A scenario ran but did not achieve what it simulates (e.g. the pendulum fell).
struct ScenarioFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ObservabilityLine {
    std::string system;
    Matrix O;
    Eigen::Index rank = 0;
    Eigen::Index states = 0;
    bool observable = false;
};
[[nodiscard]] std::vector<ObservabilityLine> observability(const Config& cfg);

struct SipOutcome {
    bool failed = false;
    double t_end = 0.0;
    Vector final_truth;
    Vector K;
    Matrix L;
    Poles controller_eigs, observer_eigs, augmented_eigs;
    Trace trace;
};
[[nodiscard]] SipOutcome sip_control(const Config& cfg, std::uint64_t seed);

struct ImmOutcome {
    Vector final_weights;  // CP, CV, CA
    Trace trace;
};
[[nodiscard]] ImmOutcome imm_track(const Config& cfg, std::uint64_t seed);

struct PfOutcome {
    std::size_t steps = 0;
    std::size_t within = 0;  // steps where every coordinate is inside 3 sigma_KF / sqrt(N_eff)
    double min_neff = 0.0;
    Trace trace;
};
[[nodiscard]] PfOutcome pf_vs_kf(const Config& cfg, std::uint64_t seed);

struct CifOutcome {
    ConsistencyReport split, naive, federated;
    Trace trace;
};
[[nodiscard]] CifOutcome cif_network(const Config& cfg, std::uint64_t seed);

[[nodiscard]] CircularReasoningTable circular_reasoning(const Config& cfg);

struct PhdOutcome {
    std::size_t steps = 0;
    std::size_t correct = 0;  // steps whose extracted count equals the true count
    Trace trace;
};
[[nodiscard]] PhdOutcome phd_track(const Config& cfg, std::uint64_t seed);

struct LandmarkOutcome {
    std::size_t steps = 0;
    std::size_t ekf_reduced = 0, ukf_reduced = 0, ckf_reduced = 0;
    double ekf_rmse = 0.0, ukf_rmse = 0.0, ckf_rmse = 0.0;
    Trace trace;
};
[[nodiscard]] LandmarkOutcome ukf_ckf_landmark(const Config& cfg, std::uint64_t seed);

struct RunResult {
    int exit_code = 0;
    Json summary;
    std::vector<Trace> traces;
};

// Dispatches on cfg.scenario. A ScenarioFailure is reported through
// exit_code 3 and the summary; other errors propagate.
[[nodiscard]] RunResult run_scenario(const Config& cfg);

// JSON with objects indented and numeric arrays kept on one line.
[[nodiscard]] std::string render_summary(const Json& j);

} // namespace estkit::cli
