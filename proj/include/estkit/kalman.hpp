#pragma once

#include "estkit/core.hpp"
#include "estkit/statespace.hpp"

namespace estkit {

enum class CovarianceUpdate { standard, joseph };

// Constant gain for filters that carry no covariance (alpha-beta family).
struct ConstantGain {
    Matrix K;

    [[nodiscard]] static ConstantGain alpha_beta(double alpha, double beta, double dt) {
        Matrix K(2, 1);
        K << alpha, beta / dt;
        return {K};
    }

    [[nodiscard]] static ConstantGain alpha_beta_gamma(double alpha, double beta, double gamma, double dt) {
        Matrix K(3, 1);
        K << alpha, beta / dt, gamma / (2 * dt * dt);
        return {K};
    }
};

[[nodiscard]] inline GaussianEstimate kf_predict(const GaussianEstimate& est, const LinearStateSpace& model,
                                                 const Vector& u) {
    check_estimate(est);
    validate(model);
    require(model.A.rows() == est.dim(), "model and estimate dimensions differ");
    require(u.size() == model.B.cols(), "control input dimension mismatch");
    Matrix cov = model.A * est.cov * model.A.transpose() + model.B * model.sigma_u * model.B.transpose();
    if (model.sigma_eps) cov += *model.sigma_eps;
    return {model.A * est.mean + model.B * u, symmetrize(cov)};
}

[[nodiscard]] inline GaussianEstimate kf_update(const GaussianEstimate& prior, const LinearMeasurementModel& meas,
                                                const Vector& z,
                                                CovarianceUpdate form = CovarianceUpdate::standard) {
    check_estimate(prior);
    validate(meas, prior.dim());
    require(z.size() == meas.H.rows(), "measurement dimension mismatch");
    if (!z.allFinite()) throw NumericError("measurement contains non-finite values");

    const Matrix& H = meas.H;
    const Matrix PHt = prior.cov * H.transpose();
    const Matrix S = H * PHt + meas.sigma_z;
    // K = P H^T S^-1, solved as S K^T = H P
    const Matrix K = spd_solve(S, PHt.transpose(), "innovation covariance").transpose();
    const Matrix I = Matrix::Identity(prior.dim(), prior.dim());
    const Matrix IKH = I - K * H;
    Matrix cov = form == CovarianceUpdate::joseph
                     ? Matrix(IKH * prior.cov * IKH.transpose() + K * meas.sigma_z * K.transpose())
                     : Matrix(IKH * prior.cov);
    return {prior.mean + K * (z - H * prior.mean), symmetrize(cov)};
}

// Information-weighted average of two estimates of the same state.
[[nodiscard]] inline GaussianEstimate fuse_full(const GaussianEstimate& a, const GaussianEstimate& b) {
    check_estimate(a);
    check_estimate(b);
    require(a.dim() == b.dim(), "fused estimates must share a dimension");
    (void)spd_inverse(a.cov, "first covariance");
    (void)spd_inverse(b.cov, "second covariance");
    // Gain form: same posterior as summing information, but exact on
    // representable inputs and free of the double inversion.
    const Matrix gain = spd_solve(a.cov + b.cov, a.cov, "summed covariance").transpose();
    return {a.mean + gain * (b.mean - a.mean), symmetrize(a.cov - gain * a.cov)};
}

[[nodiscard]] inline Vector constant_gain_update(const Vector& predicted, const ConstantGain& gain, const Matrix& H,
                                                 const Vector& z) {
    require(H.cols() == predicted.size(), "H column count must equal the state dimension");
    require(gain.K.rows() == predicted.size() && gain.K.cols() == H.rows(), "gain dimensions mismatch");
    require(z.size() == H.rows(), "measurement dimension mismatch");
    return predicted + gain.K * (z - H * predicted);
}

} // namespace estkit
