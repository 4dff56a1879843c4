#pragma once

#include "estkit/core.hpp"
#include "estkit/kalman.hpp"
#include "estkit/nonlinear.hpp"
#include "estkit/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

namespace estkit {

struct TrackStarvation : Error { using Error::Error; };
struct DegenerateLikelihood : Error { using Error::Error; };

// One candidate motion hypothesis. Linear pairs run a KF, nonlinear ones an EKF.
struct ImmModel {
    std::variant<LinearStateSpace, NonlinearSystemModel> system;
    std::variant<LinearMeasurementModel, NonlinearMeasurementModel> measurement;
};

enum class ImmLikelihood {
    posterior,  // innovation evaluated at the updated track estimate
    prior,      // conventional innovation at the predicted estimate
};

struct ImmConfig {
    ImmLikelihood likelihood = ImmLikelihood::posterior;
    double weight_floor = 1e-12;
};

struct ImmBank {
    std::vector<ImmModel> models;
    Matrix transition;  // C(i, k): probability of switching from model i to k
    Vector weights;
    std::vector<GaussianEstimate> estimates;
};

inline void check_bank(const ImmBank& bank) {
    const auto m = static_cast<Eigen::Index>(bank.models.size());
    if (m == 0) throw Error("IMM bank needs at least one model");
    require_square(bank.transition, m, "transition matrix");
    require(bank.weights.size() == m, "one weight per model");
    require(static_cast<Eigen::Index>(bank.estimates.size()) == m, "one estimate per model");
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(bank.transition.row(i).sum() - 1.0) > 1e-12 || (bank.transition.row(i).array() < 0).any())
            throw Error("transition matrix rows must be probability vectors");
    if (std::abs(bank.weights.sum() - 1.0) > 1e-9 || (bank.weights.array() < 0).any())
        throw Error("model weights must form a probability vector");
    const auto n = bank.estimates.front().dim();
    for (const auto& e : bank.estimates) {
        check_estimate(e);
        require(e.dim() == n, "all tracks must share the state dimension");
    }
}

struct ImmMix {
    std::vector<GaussianEstimate> estimates;
    Vector weights;
};

[[nodiscard]] inline ImmMix imm_mix(const ImmBank& bank) {
    check_bank(bank);
    const auto m = static_cast<Eigen::Index>(bank.models.size());
    const auto n = bank.estimates.front().dim();
    ImmMix out;
    out.weights = bank.transition.transpose() * bank.weights;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double wk = out.weights(k);
        if (wk < 1e-300) throw TrackStarvation("merged weight of model " + std::to_string(k) + " vanished");
        Vector mean = Vector::Zero(n);
        for (Eigen::Index i = 0; i < m; ++i)
            mean += bank.estimates[static_cast<std::size_t>(i)].mean * (bank.transition(i, k) * bank.weights(i));
        mean /= wk;
        Matrix cov = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& e = bank.estimates[static_cast<std::size_t>(i)];
            const Vector d = e.mean - mean;
            cov += (bank.transition(i, k) * bank.weights(i)) * (e.cov + d * d.transpose());
        }
        out.estimates.push_back({mean, symmetrize(cov / wk)});
    }
    return out;
}

namespace detail {

inline GaussianEstimate imm_predict(const ImmModel& model, const GaussianEstimate& e, const Vector& u) {
    if (const auto* lin = std::get_if<LinearStateSpace>(&model.system)) return kf_predict(e, *lin, u);
    return ekf_predict(e, std::get<NonlinearSystemModel>(model.system), u);
}

inline GaussianEstimate imm_update(const ImmModel& model, const GaussianEstimate& e, const Vector& z) {
    if (const auto* lin = std::get_if<LinearMeasurementModel>(&model.measurement)) return kf_update(e, *lin, z);
    return ekf_update(e, std::get<NonlinearMeasurementModel>(model.measurement), z);
}

// log N(z; h(x), J Sigma J^T + Sigma_z) at the given estimate.
inline double imm_log_likelihood(const ImmModel& model, const GaussianEstimate& e, const Vector& z) {
    Vector predicted;
    Matrix J, sz;
    if (const auto* lin = std::get_if<LinearMeasurementModel>(&model.measurement)) {
        predicted = lin->H * e.mean;
        J = lin->H;
        sz = lin->sigma_z;
    } else {
        const auto& nl = std::get<NonlinearMeasurementModel>(model.measurement);
        predicted = nl.h(e.mean);
        J = nl.jac(e.mean);
        sz = nl.sigma_z;
    }
    return gaussian_log_pdf(z, predicted, J * e.cov * J.transpose() + sz);
}

} // namespace detail

// Normalized weights w_k proportional to merged weight times innovation
// likelihood. `evaluated` holds the estimates the innovations are taken at.
[[nodiscard]] inline Vector imm_weight_update(const ImmBank& bank, const Vector& merged_weights,
                                              const std::vector<GaussianEstimate>& evaluated, const Vector& z,
                                              double weight_floor = 1e-12) {
    const auto m = static_cast<Eigen::Index>(bank.models.size());
    require(merged_weights.size() == m && static_cast<Eigen::Index>(evaluated.size()) == m,
            "one weight and estimate per model");
    Vector logw(m);
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k) {
        const double ll = detail::imm_log_likelihood(bank.models[static_cast<std::size_t>(k)],
                                                     evaluated[static_cast<std::size_t>(k)], z);
        logw(k) = merged_weights(k) > 0 ? ll + std::log(merged_weights(k)) : -std::numeric_limits<double>::infinity();
        if (std::isfinite(logw(k))) best = std::max(best, logw(k));
    }
    if (!std::isfinite(best)) throw DegenerateLikelihood("every model likelihood underflowed");
    Vector w = (logw.array() - best).exp().matrix();
    for (Eigen::Index k = 0; k < m; ++k)
        if (!std::isfinite(w(k))) w(k) = 0.0;
    w /= w.sum();
    const double floor = std::clamp(weight_floor, 0.0, 1.0 / static_cast<double>(m));
    return (floor + (1.0 - static_cast<double>(m) * floor) * w.array()).matrix();
}

// Weighted mixture collapse including the spread of the means.
[[nodiscard]] inline GaussianEstimate imm_output(const Vector& weights, const std::vector<GaussianEstimate>& tracks) {
    const auto n = tracks.front().dim();
    Vector mean = Vector::Zero(n);
    for (std::size_t k = 0; k < tracks.size(); ++k) mean += weights(static_cast<Eigen::Index>(k)) * tracks[k].mean;
    Matrix cov = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        const Vector d = tracks[k].mean - mean;
        cov += weights(static_cast<Eigen::Index>(k)) * (tracks[k].cov + d * d.transpose());
    }
    return {mean, symmetrize(cov)};
}

struct ImmStep {
    ImmBank bank;
    GaussianEstimate output;
};

[[nodiscard]] inline ImmStep imm_step(const ImmBank& bank, const Vector& u, const Vector& z,
                                      const ImmConfig& cfg = {}) {
    const ImmMix mixed = imm_mix(bank);
    std::vector<GaussianEstimate> priors, posts;
    for (std::size_t k = 0; k < bank.models.size(); ++k) {
        priors.push_back(detail::imm_predict(bank.models[k], mixed.estimates[k], u));
        posts.push_back(detail::imm_update(bank.models[k], priors.back(), z));
    }
    const auto& evaluated = cfg.likelihood == ImmLikelihood::posterior ? posts : priors;
    ImmStep out{bank, {}};
    out.bank.weights = imm_weight_update(bank, mixed.weights, evaluated, z, cfg.weight_floor);
    out.bank.estimates = std::move(posts);
    out.output = imm_output(out.bank.weights, out.bank.estimates);
    return out;
}

} // namespace estkit
