#pragma once

#include "estkit/core.hpp"
#include "estkit/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace estkit {

struct GaussianComponent {
    double weight = 0.0;
    Vector mean;
    Matrix cov;
};

// An intensity's weights integrate to an expected count; a density's sum to 1.
enum class MixtureKind { intensity, density };

struct GaussianMixture {
    std::vector<GaussianComponent> components;
    MixtureKind kind = MixtureKind::intensity;

    [[nodiscard]] std::size_t size() const { return components.size(); }

    [[nodiscard]] double total_weight() const {
        double s = 0.0;
        for (const auto& c : components) s += c.weight;
        return s;
    }
};

struct SpawnTerm {
    double weight = 0.0;
    Matrix A;
    Vector offset;
    Matrix cov;
};

struct PhdConfig {
    double p_survive = 0.99;
    double p_detect = 0.9;
    double clutter_density = 0.0;  // uniform clutter intensity per unit measurement volume
    GaussianMixture birth;
    std::vector<SpawnTerm> spawn;
    Matrix A;
    Matrix sigma_eps;
    Matrix H;
    Matrix sigma_z;
    double prune_threshold = 1e-5;
    double merge_threshold = 4.0;  // squared Mahalanobis distance
    std::size_t max_components = 100;
};

inline void check_phd_config(const PhdConfig& cfg) {
    if (!(cfg.p_survive >= 0 && cfg.p_survive <= 1) || !(cfg.p_detect >= 0 && cfg.p_detect <= 1))
        throw Error("survival and detection probabilities must lie in [0, 1]");
    if (!(cfg.clutter_density >= 0)) throw Error("clutter density must be non-negative");
    if (!(cfg.prune_threshold > 0) || !(cfg.merge_threshold > 0) || cfg.max_components == 0)
        throw Error("prune/merge thresholds must be positive");
    require_square(cfg.A, cfg.A.rows(), "A");
    require_square(cfg.sigma_eps, cfg.A.rows(), "sigma_eps");
    require(cfg.H.cols() == cfg.A.rows(), "H column count must equal the state dimension");
    require_square(cfg.sigma_z, cfg.H.rows(), "sigma_z");
}

// Births, then survivors, then one spawned copy per (component, spawn term).
[[nodiscard]] inline GaussianMixture phd_predict(const GaussianMixture& intensity, const PhdConfig& cfg) {
    check_phd_config(cfg);
    GaussianMixture out;
    out.components.reserve(cfg.birth.size() + intensity.size() * (1 + cfg.spawn.size()));
    for (const auto& b : cfg.birth.components) out.components.push_back(b);
    for (const auto& c : intensity.components)
        out.components.push_back({cfg.p_survive * c.weight, cfg.A * c.mean,
                                  symmetrize(cfg.A * c.cov * cfg.A.transpose() + cfg.sigma_eps)});
    for (const auto& c : intensity.components)
        for (const auto& s : cfg.spawn)
            out.components.push_back(
                {c.weight * s.weight, s.A * c.mean + s.offset, symmetrize(s.A * c.cov * s.A.transpose() + s.cov)});
    return out;
}

// Missed-detection copies first, then one block of updated components per detection.
[[nodiscard]] inline GaussianMixture phd_update(const GaussianMixture& predicted, const std::vector<Vector>& detections,
                                                const PhdConfig& cfg) {
    check_phd_config(cfg);
    const LinearMeasurementModel meas{cfg.H, cfg.sigma_z};
    GaussianMixture out;
    out.components.reserve(predicted.size() * (1 + detections.size()));
    for (const auto& c : predicted.components) out.components.push_back({(1 - cfg.p_detect) * c.weight, c.mean, c.cov});

    std::vector<GaussianEstimate> posts;
    std::vector<Vector> zhat;
    std::vector<Matrix> S;
    for (const auto& c : predicted.components) {
        zhat.push_back(cfg.H * c.mean);
        S.push_back(symmetrize(cfg.H * c.cov * cfg.H.transpose() + cfg.sigma_z));
    }
    for (const auto& z : detections) {
        require(z.size() == cfg.H.rows(), "detection dimension mismatch");
        if (!z.allFinite()) throw NumericError("detection contains non-finite values");
        std::vector<double> w(predicted.size());
        double total = 0.0;
        for (std::size_t j = 0; j < predicted.size(); ++j) {
            w[j] = cfg.p_detect * predicted.components[j].weight * gaussian_pdf(z, zhat[j], S[j]);
            total += w[j];
        }
        const double denom = cfg.clutter_density + total;
        for (std::size_t j = 0; j < predicted.size(); ++j) {
            const auto& c = predicted.components[j];
            const GaussianEstimate post = kf_update({c.mean, c.cov}, meas, z);
            out.components.push_back({denom > 0 ? w[j] / denom : 0.0, post.mean, post.cov});
        }
    }
    return out;
}

// Drop light components, then greedily merge everything within the
// Mahalanobis gate of the heaviest remaining component.
[[nodiscard]] inline GaussianMixture phd_prune_merge(const GaussianMixture& intensity, const PhdConfig& cfg) {
    std::vector<GaussianComponent> pool;
    for (const auto& c : intensity.components)
        if (c.weight >= cfg.prune_threshold) pool.push_back(c);

    GaussianMixture out;
    out.kind = intensity.kind;
    std::vector<bool> used(pool.size(), false);
    std::size_t remaining = pool.size();
    while (remaining > 0) {
        std::size_t lead = pool.size();
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (!used[i] && (lead == pool.size() || pool[i].weight > pool[lead].weight)) lead = i;

        std::vector<std::size_t> cluster;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i]) continue;
            const Vector d = pool[i].mean - pool[lead].mean;
            const double dist = (d.transpose() * spd_solve(pool[i].cov, d, "component covariance"))(0, 0);
            if (i == lead || dist <= cfg.merge_threshold) cluster.push_back(i);
        }
        GaussianComponent merged{0.0, Vector::Zero(pool[lead].mean.size()),
                                 Matrix::Zero(pool[lead].cov.rows(), pool[lead].cov.cols())};
        for (auto i : cluster) {
            merged.weight += pool[i].weight;
            merged.mean += pool[i].weight * pool[i].mean;
        }
        merged.mean /= merged.weight;
        for (auto i : cluster) {
            const Vector d = pool[i].mean - merged.mean;
            merged.cov += pool[i].weight * (pool[i].cov + d * d.transpose());
            used[i] = true;
        }
        merged.cov = symmetrize(merged.cov / merged.weight);
        remaining -= cluster.size();
        out.components.push_back(std::move(merged));
    }
    if (out.components.size() > cfg.max_components) {
        std::stable_sort(out.components.begin(), out.components.end(),
                         [](const auto& a, const auto& b) { return a.weight > b.weight; });
        out.components.resize(cfg.max_components);
    }
    return out;
}

// round(w) copies of every component heavier than 0.5, halves rounding up.
[[nodiscard]] inline std::vector<Vector> phd_extract(const GaussianMixture& intensity) {
    std::vector<Vector> targets;
    for (const auto& c : intensity.components) {
        if (!(c.weight > 0.5)) continue;
        const auto copies = static_cast<std::size_t>(std::floor(c.weight + 0.5));
        for (std::size_t k = 0; k < copies; ++k) targets.push_back(c.mean);
    }
    return targets;
}

// Single-track probabilistic data association over gated detections, with
// association probabilities proportional to the innovation likelihoods.
[[nodiscard]] inline GaussianEstimate pda_update(const GaussianEstimate& track, const std::vector<Vector>& detections,
                                                 const LinearMeasurementModel& meas, double gate_threshold) {
    check_estimate(track);
    validate(meas, track.dim());
    const Vector zhat = meas.H * track.mean;
    const Matrix S = symmetrize(meas.H * track.cov * meas.H.transpose() + meas.sigma_z);
    std::vector<Vector> gated;
    for (const auto& z : detections) {
        const Vector d = z - zhat;
        if ((d.transpose() * spd_solve(S, d, "innovation covariance"))(0, 0) <= gate_threshold) gated.push_back(z);
    }
    if (gated.empty()) return track;

    std::vector<double> logl;
    for (const auto& z : gated) logl.push_back(gaussian_log_pdf(z, zhat, S));
    const double top = *std::max_element(logl.begin(), logl.end());
    std::vector<double> beta;
    for (double l : logl) beta.push_back(std::exp(l - top));
    const double sum = std::accumulate(beta.begin(), beta.end(), 0.0);

    std::vector<GaussianEstimate> branches;
    for (const auto& z : gated) branches.push_back(kf_update(track, meas, z));
    Vector mean = Vector::Zero(track.dim());
    for (std::size_t k = 0; k < gated.size(); ++k) mean += (beta[k] / sum) * branches[k].mean;
    Matrix cov = Matrix::Zero(track.dim(), track.dim());
    for (std::size_t k = 0; k < gated.size(); ++k) {
        const Vector d = branches[k].mean - mean;
        cov += (beta[k] / sum) * (branches[k].cov + d * d.transpose());
    }
    return {mean, symmetrize(cov)};
}

} // namespace estkit
