#include "trace.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace estkit::cli {
namespace {

struct Layout {
    Eigen::Index truth = 0, est = 0, cov = 0;
    std::vector<std::string> extras;
};

// Column layout is fixed by the first record; later records must agree.
Layout layout_of(const Trace& trace) {
    Layout l;
    if (trace.records.empty()) return l;
    const auto& first = trace.records.front();
    l.truth = first.truth ? first.truth->size() : 0;
    l.est = first.estimate.size();
    l.cov = first.cov_diag.size();
    for (const auto& [k, v] : first.extras) l.extras.push_back(k);
    double last_t = -INFINITY;
    for (const auto& r : trace.records) {
        if ((r.truth ? r.truth->size() : 0) != l.truth || r.estimate.size() != l.est || r.cov_diag.size() != l.cov ||
            r.extras.size() != l.extras.size())
            throw std::logic_error("trace '" + trace.name + "' has records of differing shape");
        if (!(r.t >= last_t)) throw std::logic_error("trace '" + trace.name + "' time is not monotone");
        last_t = r.t;
    }
    return l;
}

void append_vector(std::string& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out += ',';
        out += format_number(v(i));
    }
}

void append_json_array(std::string& out, const Eigen::VectorXd& v) {
    out += '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::isfinite(v(i)) ? format_number(v(i)) : "null";
    }
    out += ']';
}

} // namespace

std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string to_csv(const Trace& trace) {
    const Layout l = layout_of(trace);
    std::string out = "t";
    for (Eigen::Index i = 0; i < l.truth; ++i) out += ",truth_" + std::to_string(i);
    for (Eigen::Index i = 0; i < l.est; ++i) out += ",est_" + std::to_string(i);
    for (Eigen::Index i = 0; i < l.cov; ++i) out += ",covdiag_" + std::to_string(i);
    for (const auto& k : l.extras) out += "," + k;
    out += '\n';
    for (const auto& r : trace.records) {
        out += format_number(r.t);
        if (r.truth) append_vector(out, *r.truth);
        append_vector(out, r.estimate);
        append_vector(out, r.cov_diag);
        for (const auto& [k, v] : r.extras) {
            out += ',';
            out += format_number(v);
        }
        out += '\n';
    }
    return out;
}

std::string to_jsonl(const Trace& trace) {
    layout_of(trace);
    std::string out;
    for (const auto& r : trace.records) {
        out += "{\"t\":" + format_number(r.t);
        if (r.truth) {
            out += ",\"truth\":";
            append_json_array(out, *r.truth);
        }
        out += ",\"estimate\":";
        append_json_array(out, r.estimate);
        out += ",\"cov_diag\":";
        append_json_array(out, r.cov_diag);
        out += ",\"extras\":{";
        bool first = true;
        for (const auto& [k, v] : r.extras) {
            if (!first) out += ',';
            first = false;
            out += "\"" + k + "\":" + (std::isfinite(v) ? format_number(v) : "null");
        }
        out += "}}\n";
    }
    return out;
}

std::filesystem::path write_trace(const Trace& trace, const std::filesystem::path& dir, const std::string& format) {
    std::filesystem::create_directories(dir);
    const bool csv = format == "csv";
    const auto path = dir / (trace.name + (csv ? ".csv" : ".jsonl"));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file '" + path.string() + "'");
    out << (csv ? to_csv(trace) : to_jsonl(trace));
    if (!out) throw std::runtime_error("failed writing trace file '" + path.string() + "'");
    return path;
}

} // namespace estkit::cli
