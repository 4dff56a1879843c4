#pragma once

// Per-step trace records and their CSV / JSON-lines serialization.
//
// CSV columns: t, truth_0..n, est_0..n, covdiag_0..n, then extras sorted by
// name. Numbers use the shortest round-trip decimal form, so a fixed
// (config, seed) pair always yields byte-identical files.

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace estkit::cli {

struct TraceRecord {
    double t = 0.0;
    std::optional<Eigen::VectorXd> truth;
    Eigen::VectorXd estimate;
    Eigen::VectorXd cov_diag;
    std::map<std::string, double> extras;
};

struct Trace {
    std::string name;  // file stem
    std::vector<TraceRecord> records;
};

[[nodiscard]] std::string format_number(double v);
[[nodiscard]] std::string to_csv(const Trace& trace);
[[nodiscard]] std::string to_jsonl(const Trace& trace);

// Writes <dir>/<name>.csv or .jsonl and returns the path.
std::filesystem::path write_trace(const Trace& trace, const std::filesystem::path& dir, const std::string& format);

} // namespace estkit::cli
