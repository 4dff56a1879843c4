#pragma once

#include "estkit/core.hpp"
#include "estkit/statespace.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace estkit {

// ---------------------------------------------------------------------------
// EKF

[[nodiscard]] inline GaussianEstimate ekf_predict(const GaussianEstimate& est, const NonlinearSystemModel& model,
                                                  const Vector& u) {
    check_estimate(est);
    const Vector mean = model.g(est.mean, u);
    if (!mean.allFinite()) throw NumericError("system function returned non-finite values");
    require(mean.size() == est.dim(), "system function changed the state dimension");
    const Matrix Gx = model.jac_x(est.mean, u);
    const Matrix Gu = model.jac_u(est.mean, u);
    require(Gx.rows() == est.dim() && Gx.cols() == est.dim(), "jac_x has the wrong shape");
    require(Gu.rows() == est.dim() && Gu.cols() == model.sigma_u.rows(), "jac_u has the wrong shape");
    Matrix cov = Gx * est.cov * Gx.transpose() + Gu * model.sigma_u * Gu.transpose();
    if (model.sigma_eps) cov += *model.sigma_eps;
    return {mean, symmetrize(cov)};
}

[[nodiscard]] inline GaussianEstimate ekf_update(const GaussianEstimate& prior, const NonlinearMeasurementModel& meas,
                                                 const Vector& z) {
    check_estimate(prior);
    if (!z.allFinite()) throw NumericError("measurement contains non-finite values");
    const Vector predicted = meas.h(prior.mean);
    const Matrix H = meas.jac(prior.mean);
    require(predicted.size() == z.size() && H.rows() == z.size() && H.cols() == prior.dim(),
            "measurement model shapes disagree");
    const Matrix PHt = prior.cov * H.transpose();
    const Matrix S = H * PHt + meas.sigma_z;
    const Matrix K = spd_solve(S, PHt.transpose(), "innovation covariance").transpose();
    const Matrix I = Matrix::Identity(prior.dim(), prior.dim());
    return {prior.mean + K * (z - predicted), symmetrize((I - K * H) * prior.cov)};
}

// ---------------------------------------------------------------------------
// Deterministic sampling

struct SigmaPointSet {
    std::vector<Vector> points;
    std::vector<double> weights;
};

// Lower-triangular S with S S^T = cov. Falls back to diagonal jitter, then to
// a pivoted LDL^T with clamped pivots for exactly singular PSD input.
[[nodiscard]] inline Matrix covariance_sqrt(const Matrix& cov) {
    const auto n = cov.rows();
    const Matrix sym = symmetrize(cov);
    Eigen::LLT<Matrix> llt(sym);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const double jitter = 1e-12 * std::max(sym.trace(), 0.0) / static_cast<double>(std::max<Eigen::Index>(n, 1));
    if (jitter > 0.0) {
        llt.compute(sym + jitter * Matrix::Identity(n, n));
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    Eigen::LDLT<Matrix> ldlt(sym);
    if (ldlt.info() != Eigen::Success) throw NumericError("covariance factorization failed");
    Vector d = ldlt.vectorD();
    const double floor = -1e-9 * std::max(1.0, sym.norm());
    if (d.minCoeff() < floor) throw NumericError("covariance is indefinite");
    d = d.cwiseMax(0.0);
    Matrix L = ldlt.matrixL();
    Matrix root = ldlt.transpositionsP().transpose() * (L * d.cwiseSqrt().asDiagonal());
    return root;
}

// Unscented transform points: mean, mean +- sqrt(n + kappa) * columns of the
// covariance square root. Default kappa = 3 - n.
[[nodiscard]] inline SigmaPointSet ut_sigma_points(const GaussianEstimate& est, std::optional<double> kappa = {}) {
    check_estimate(est);
    const auto n = est.dim();
    const double k = kappa.value_or(3.0 - static_cast<double>(n));
    const double spread = static_cast<double>(n) + k;
    if (!(spread > 0.0)) throw NumericError("unscented transform needs n + kappa > 0");
    const Matrix root = std::sqrt(spread) * covariance_sqrt(est.cov);
    SigmaPointSet set;
    set.points.reserve(static_cast<std::size_t>(2 * n + 1));
    set.points.push_back(est.mean);
    set.weights.push_back(k / spread);
    for (Eigen::Index i = 0; i < n; ++i) {
        set.points.push_back(est.mean + root.col(i));
        set.weights.push_back(0.5 / spread);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        set.points.push_back(est.mean - root.col(i));
        set.weights.push_back(0.5 / spread);
    }
    return set;
}

// Third-degree spherical-radial cubature: 2n points at +- sqrt(n) columns.
[[nodiscard]] inline SigmaPointSet cubature_points(const GaussianEstimate& est) {
    check_estimate(est);
    const auto n = est.dim();
    if (n == 0) throw DimensionMismatch("cubature points need a non-empty state");
    const Matrix root = std::sqrt(static_cast<double>(n)) * covariance_sqrt(est.cov);
    SigmaPointSet set;
    const double w = 1.0 / (2.0 * static_cast<double>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        set.points.push_back(est.mean + root.col(i));
        set.weights.push_back(w);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        set.points.push_back(est.mean - root.col(i));
        set.weights.push_back(w);
    }
    return set;
}

[[nodiscard]] inline GaussianEstimate weighted_moments(const std::vector<Vector>& pts, const std::vector<double>& w) {
    Vector mean = Vector::Zero(pts.front().size());
    for (std::size_t i = 0; i < pts.size(); ++i) mean += w[i] * pts[i];
    Matrix cov = Matrix::Zero(mean.size(), mean.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vector d = pts[i] - mean;
        cov += w[i] * d * d.transpose();
    }
    return {mean, symmetrize(cov)};
}

// ---------------------------------------------------------------------------
// UKF / CKF

struct UkfConfig {
    std::optional<double> kappa;
    // Add sigma_eps to the predicted covariance instead of augmenting it,
    // then redraw the points from the predicted moments.
    bool additive_process_noise = false;
    // Redraw the points from the predicted moments before the measurement
    // transform, as the CKF always does.
    bool resample_predicted = false;
};

namespace detail {

enum class Rule { unscented, cubature };

struct Augmented {
    GaussianEstimate est;
    Eigen::Index n = 0, m = 0, e = 0;
};

inline Augmented augment(const GaussianEstimate& est, const NonlinearSystemModel& sys, bool include_eps) {
    Augmented a;
    a.n = est.dim();
    a.m = sys.sigma_u.rows();
    a.e = include_eps && sys.sigma_eps ? a.n : 0;
    const auto total = a.n + a.m + a.e;
    a.est.mean = Vector::Zero(total);
    a.est.mean.head(a.n) = est.mean;
    a.est.cov = Matrix::Zero(total, total);
    a.est.cov.topLeftCorner(a.n, a.n) = est.cov;
    a.est.cov.block(a.n, a.n, a.m, a.m) = sys.sigma_u;
    if (a.e) a.est.cov.bottomRightCorner(a.e, a.e) = *sys.sigma_eps;
    return a;
}

inline SigmaPointSet draw(const GaussianEstimate& est, Rule rule, std::optional<double> kappa) {
    return rule == Rule::unscented ? ut_sigma_points(est, kappa) : cubature_points(est);
}

// Predicted moments plus the points the measurement transform will use.
struct SigmaPrediction {
    GaussianEstimate predicted;
    std::vector<Vector> points;
    std::vector<double> weights;
};

inline SigmaPrediction sigma_predict(const GaussianEstimate& est, const NonlinearSystemModel& sys, const Vector& u,
                                     Rule rule, const UkfConfig& cfg) {
    check_estimate(est);
    const bool additive = cfg.additive_process_noise;
    const Augmented aug = augment(est, sys, !additive);
    require(u.size() == aug.m, "control input dimension must match sigma_u");
    const SigmaPointSet set = draw(aug.est, rule, cfg.kappa);

    std::vector<Vector> propagated;
    propagated.reserve(set.points.size());
    for (const auto& p : set.points) {
        Vector x = sys.g(p.head(aug.n), u + p.segment(aug.n, aug.m));
        if (aug.e) x += p.tail(aug.e);
        if (!x.allFinite()) throw NumericError("system function returned non-finite values");
        propagated.push_back(std::move(x));
    }
    SigmaPrediction out{weighted_moments(propagated, set.weights), std::move(propagated), set.weights};
    if (additive && sys.sigma_eps) out.predicted.cov = symmetrize(out.predicted.cov + *sys.sigma_eps);

    if (rule == Rule::cubature || additive || cfg.resample_predicted) {
        const std::optional<double> kappa = additive || !cfg.kappa ? std::nullopt : cfg.kappa;
        SigmaPointSet again = draw(out.predicted, rule, kappa);
        out.points = std::move(again.points);
        out.weights = std::move(again.weights);
    }
    return out;
}

inline GaussianEstimate sigma_update(const SigmaPrediction& pred, const NonlinearMeasurementModel& meas,
                                     const Vector& z) {
    if (!z.allFinite()) throw NumericError("measurement contains non-finite values");
    const auto& xs = pred.points;
    const auto& ws = pred.weights;
    std::vector<Vector> ys;
    ys.reserve(xs.size());
    for (const auto& x : xs) ys.push_back(meas.h(x));
    require(ys.front().size() == z.size(), "measurement dimension mismatch");
    const GaussianEstimate ym = weighted_moments(ys, ws);
    const Matrix syy = ym.cov + meas.sigma_z;
    const auto n = pred.predicted.dim();
    Matrix sxz = Matrix::Zero(n, z.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        sxz += ws[i] * (xs[i] - pred.predicted.mean) * (ys[i] - ym.mean).transpose();

    const Matrix K = spd_solve(syy, sxz.transpose(), "innovation covariance").transpose();
    return {pred.predicted.mean + K * (z - ym.mean), symmetrize(pred.predicted.cov - K * syy * K.transpose())};
}

inline GaussianEstimate sigma_step(const GaussianEstimate& est, const NonlinearSystemModel& sys,
                                   const NonlinearMeasurementModel& meas, const Vector& u, const Vector& z, Rule rule,
                                   const UkfConfig& cfg) {
    if (!z.allFinite()) throw NumericError("measurement contains non-finite values");
    return sigma_update(sigma_predict(est, sys, u, rule, cfg), meas, z);
}

} // namespace detail

[[nodiscard]] inline GaussianEstimate ukf_step(const GaussianEstimate& est, const NonlinearSystemModel& sys,
                                               const NonlinearMeasurementModel& meas, const Vector& u, const Vector& z,
                                               const UkfConfig& cfg = {}) {
    return detail::sigma_step(est, sys, meas, u, z, detail::Rule::unscented, cfg);
}

[[nodiscard]] inline GaussianEstimate ckf_step(const GaussianEstimate& est, const NonlinearSystemModel& sys,
                                               const NonlinearMeasurementModel& meas, const Vector& u,
                                               const Vector& z) {
    return detail::sigma_step(est, sys, meas, u, z, detail::Rule::cubature, {});
}

// Prediction halves, for callers that need the prior moments.
[[nodiscard]] inline GaussianEstimate ukf_predict(const GaussianEstimate& est, const NonlinearSystemModel& sys,
                                                  const Vector& u, const UkfConfig& cfg = {}) {
    return detail::sigma_predict(est, sys, u, detail::Rule::unscented, cfg).predicted;
}

[[nodiscard]] inline GaussianEstimate ckf_predict(const GaussianEstimate& est, const NonlinearSystemModel& sys,
                                                  const Vector& u) {
    return detail::sigma_predict(est, sys, u, detail::Rule::cubature, {}).predicted;
}

// ---------------------------------------------------------------------------
// Jacobian checks

template <typename F>
[[nodiscard]] Matrix numeric_jacobian(F&& f, const Vector& x) {
    const Vector f0 = f(x);
    Matrix J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(x(j)));
        Vector lo = x, hi = x;
        lo(j) -= h;
        hi(j) += h;
        J.col(j) = (f(hi) - f(lo)) / (2 * h);
    }
    return J;
}

[[nodiscard]] inline double relative_error(const Matrix& got, const Matrix& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

// Largest relative discrepancy between supplied and finite-difference Jacobians.
[[nodiscard]] inline double jacobian_error(const NonlinearSystemModel& m, const Vector& x, const Vector& u) {
    const Matrix jx = numeric_jacobian([&](const Vector& s) { return m.g(s, u); }, x);
    const Matrix ju = numeric_jacobian([&](const Vector& v) { return m.g(x, v); }, u);
    return std::max(relative_error(m.jac_x(x, u), jx), relative_error(m.jac_u(x, u), ju));
}

[[nodiscard]] inline double jacobian_error(const NonlinearMeasurementModel& m, const Vector& x) {
    return relative_error(m.jac(x), numeric_jacobian(m.h, x));
}

} // namespace estkit
