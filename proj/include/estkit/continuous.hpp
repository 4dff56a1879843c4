#pragma once

#include "estkit/core.hpp"
#include "estkit/statespace.hpp"

#include <algorithm>
#include <cmath>

namespace estkit {

// Continuous-time estimator state; sigma_hat is only carried by Kalman-Bucy.
struct ContinuousEstimatorState {
    Vector x_hat;
    Matrix sigma_hat;
    double t = 0.0;
};

namespace detail {

inline Matrix riccati_rate(const Matrix& A, const Matrix& sigma, const Matrix& HtRinvH, const Matrix& sigma_e) {
    return A * sigma + sigma * A.transpose() - sigma * HtRinvH * sigma + sigma_e;
}

} // namespace detail

// Forward-Euler step of the Kalman-Bucy mean and Riccati equations. dt must
// be small relative to the system's fastest time constant.
[[nodiscard]] inline ContinuousEstimatorState kalman_bucy_step(const ContinuousEstimatorState& s,
                                                               const LinearStateSpace& model,
                                                               const LinearMeasurementModel& meas,
                                                               const Matrix& sigma_e, const Vector& u,
                                                               const Vector& z, double dt) {
    if (!(dt > 0)) throw InvalidModel("dt must be positive");
    const auto n = s.x_hat.size();
    require_square(s.sigma_hat, n, "sigma_hat");
    require_square(sigma_e, n, "sigma_e");
    validate(meas, n);
    const Matrix Rinv = spd_inverse(meas.sigma_z, "sigma_z");
    const Matrix gain = s.sigma_hat * meas.H.transpose() * Rinv;
    const Vector dx = model.A * s.x_hat + model.B * u + gain * (z - meas.H * s.x_hat);
    const Matrix dP = detail::riccati_rate(model.A, s.sigma_hat, meas.H.transpose() * Rinv * meas.H, sigma_e);
    return {s.x_hat + dt * dx, symmetrize(s.sigma_hat + dt * dP), s.t + dt};
}

struct RiccatiSolution {
    Matrix sigma;
    double residual = 0.0;
    long steps = 0;
};

// Stationary Riccati solution by integrating the differential equation until
// its rate is below tol relative to max(|Sigma|, 1). The floor keeps the test
// meaningful when the solution itself is zero.
[[nodiscard]] inline RiccatiSolution riccati_stationary(const Matrix& A, const LinearMeasurementModel& meas,
                                                        const Matrix& sigma_e, double tol = 1e-10,
                                                        long max_steps = 10'000'000) {
    const auto n = A.rows();
    require_square(A, n, "A");
    require_square(sigma_e, n, "sigma_e");
    validate(meas, n);
    if (!is_observable(A, meas.H)) throw NumericError("Riccati integration needs an observable pair");
    const Matrix Rinv = spd_inverse(meas.sigma_z, "sigma_z");
    const Matrix HtRinvH = meas.H.transpose() * Rinv * meas.H;

    Matrix sigma = Matrix::Identity(n, n);
    for (long k = 0; k < max_steps; ++k) {
        const Matrix rate = detail::riccati_rate(A, sigma, HtRinvH, sigma_e);
        const double scale = std::max(sigma.norm(), 1.0);
        if (rate.norm() < tol * scale) {
            const Matrix closed = A - sigma * HtRinvH;
            for (const auto& ev : eigenvalues(closed))
                if (ev.real() >= 0) throw NumericError("Riccati solution does not stabilize the filter");
            return {sigma, rate.norm() / scale, k};
        }
        // Step bounded by the current stiffness of the linearized flow.
        const double stiffness = 2 * A.norm() + 2 * (sigma * HtRinvH).norm() + 1.0;
        sigma = symmetrize(sigma + (0.2 / stiffness) * rate);
        if (!sigma.allFinite()) break;
    }
    throw NumericError("Riccati integration did not converge");
}

[[nodiscard]] inline ContinuousEstimatorState luenberger_step(const ContinuousEstimatorState& s,
                                                              const LinearStateSpace& model,
                                                              const LinearMeasurementModel& meas, const Matrix& L,
                                                              const Vector& u, const Vector& z, double dt) {
    require(L.rows() == s.x_hat.size() && L.cols() == meas.H.rows(), "L must be n x p");
    const Vector dx = model.A * s.x_hat + model.B * u + L * (z - meas.H * s.x_hat);
    return {s.x_hat + dt * dx, s.sigma_hat, s.t + dt};
}

struct ControlStep {
    ContinuousEstimatorState state;
    Vector u;
};

// Full-state feedback on the estimate: u = -K^T x_hat, with the observer
// driven only by the measurement.
[[nodiscard]] inline ControlStep integrated_control_step(const ContinuousEstimatorState& s,
                                                         const LinearStateSpace& model,
                                                         const LinearMeasurementModel& meas, const Vector& K,
                                                         const Matrix& L, const Vector& z, double dt) {
    const auto n = s.x_hat.size();
    require(K.size() == n && model.B.cols() == 1, "single-input gain K must have n entries");
    require(L.rows() == n && L.cols() == meas.H.rows(), "L must be n x p");
    const Matrix closed = model.A - model.B * K.transpose() - L * meas.H;
    Vector u(1);
    u(0) = -K.dot(s.x_hat);
    return {{s.x_hat + dt * (closed * s.x_hat + L * z), s.sigma_hat, s.t + dt}, u};
}

// [[A - B K^T, -B K^T], [0, A - L H]] in (state, estimation error) coordinates.
[[nodiscard]] inline Matrix augmented_matrix(const Matrix& A, const Matrix& B, const Vector& K, const Matrix& L,
                                             const Matrix& H) {
    const auto n = A.rows();
    Matrix M = Matrix::Zero(2 * n, 2 * n);
    const Matrix BK = B * K.transpose();
    M.topLeftCorner(n, n) = A - BK;
    M.topRightCorner(n, n) = -BK;
    M.bottomRightCorner(n, n) = A - L * H;
    return M;
}

struct AugmentedStability {
    Poles controller_eigs;
    Poles observer_eigs;
    bool stable = false;
};

[[nodiscard]] inline AugmentedStability augmented_stability(const Matrix& A, const Matrix& B, const Vector& K,
                                                            const Matrix& L, const Matrix& H) {
    const auto n = A.rows();
    require_square(A, n, "A");
    require(B.rows() == n && B.cols() == 1 && K.size() == n, "single-input B and K must match A");
    require(L.rows() == n && H.cols() == n && L.cols() == H.rows(), "L and H shapes must match");
    AugmentedStability out;
    out.controller_eigs = eigenvalues(A - B * K.transpose());
    out.observer_eigs = eigenvalues(A - L * H);
    auto negative = [](const Poles& p) {
        return std::all_of(p.begin(), p.end(), [](const auto& e) { return e.real() < 0; });
    };
    out.stable = negative(out.controller_eigs) && negative(out.observer_eigs);
    return out;
}

} // namespace estkit
