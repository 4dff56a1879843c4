#pragma once

#include "estkit/core.hpp"
#include "estkit/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace estkit {

struct InconsistentInputs : Error { using Error::Error; };
struct DegenerateCorrelation : Error { using Error::Error; };

// Estimate whose covariance is split into a part that may be correlated with
// other estimates (cov_d) and a part known to be independent (cov_i).
struct SplitEstimate {
    Vector mean;
    Matrix cov_d;
    Matrix cov_i;

    [[nodiscard]] Matrix total() const { return cov_d + cov_i; }
    [[nodiscard]] GaussianEstimate gaussian() const { return {mean, total()}; }
};

inline void check_split(const SplitEstimate& s) {
    const auto n = s.mean.size();
    require_square(s.cov_d, n, "cov_d");
    require_square(s.cov_i, n, "cov_i");
    if (!is_covariance(s.cov_d) || !is_covariance(s.cov_i)) throw InconsistentInputs("split covariances must be PSD");
    const Matrix t = s.total();
    if (min_eigenvalue(t) <= 1e-12 * std::abs(t.trace()) / static_cast<double>(std::max<Eigen::Index>(n, 1)))
        throw InconsistentInputs("split total covariance must be positive definite");
}

// ---------------------------------------------------------------------------

// Fuse two estimates that both contain the common estimate e0, removing the
// doubly counted information.
[[nodiscard]] inline GaussianEstimate imf_fuse(const GaussianEstimate& e1, const GaussianEstimate& e2,
                                               const GaussianEstimate& common) {
    check_estimate(e1);
    check_estimate(e2);
    check_estimate(common);
    require(e1.dim() == e2.dim() && e1.dim() == common.dim(), "fused estimates must share a dimension");
    const Matrix i1 = spd_inverse(e1.cov, "first covariance");
    const Matrix i2 = spd_inverse(e2.cov, "second covariance");
    const Matrix i0 = spd_inverse(common.cov, "common covariance");
    const Matrix info = symmetrize(i1 + i2 - i0);
    Eigen::LLT<Matrix> llt(info);
    if (llt.info() != Eigen::Success) throw InconsistentInputs("information sum is not positive definite");
    const Matrix cov = spd_inverse(info, "information sum");
    return {cov * (i1 * e1.mean + i2 * e2.mean - i0 * common.mean), cov};
}

[[nodiscard]] inline GaussianEstimate fuse_known_correlation(const GaussianEstimate& e1, const GaussianEstimate& e2,
                                                             const Matrix& sigma_12) {
    check_estimate(e1);
    check_estimate(e2);
    require(e1.dim() == e2.dim(), "fused estimates must share a dimension");
    require_square(sigma_12, e1.dim(), "sigma_12");
    const Matrix gain_num = e1.cov - sigma_12;
    const Matrix denom = e1.cov + e2.cov - sigma_12 - sigma_12.transpose();
    Matrix solved;  // denom^-1 (Sigma1 - Sigma21)
    try {
        solved = spd_solve(denom, gain_num.transpose(), "difference covariance");
    } catch (const NumericError&) {
        throw DegenerateCorrelation("Sigma1 + Sigma2 - Sigma12 - Sigma21 is singular");
    }
    const Matrix K = solved.transpose();  // (Sigma1 - Sigma12) denom^-1
    return {e1.mean + K * (e2.mean - e1.mean), symmetrize(e1.cov - gain_num * solved)};
}

// Covariance expansion of a shared prior across N local filters.
[[nodiscard]] inline std::vector<Matrix> federated_expand(const Matrix& sigma_0, const std::vector<double>& w) {
    require_square(sigma_0, sigma_0.rows(), "sigma_0");
    double sum = 0.0;
    for (double wi : w) {
        if (!(wi > 0.0)) throw InconsistentInputs("federated weights must be positive");
        sum += wi;
    }
    if (w.empty() || std::abs(sum - 1.0) > 1e-12) throw InconsistentInputs("federated weights must sum to 1");
    std::vector<Matrix> out;
    out.reserve(w.size());
    for (double wi : w) out.push_back(sigma_0 / wi);
    return out;
}

// Smallest eigenvalue of blockdiag(Sigma0 / w_i) - (ones * ones^T) kron Sigma0.
[[nodiscard]] inline double federated_margin(const Matrix& sigma_0, const std::vector<double>& w) {
    const auto n = sigma_0.rows();
    const auto N = static_cast<Eigen::Index>(w.size());
    const auto blocks = federated_expand(sigma_0, w);
    Matrix big(n * N, n * N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            big.block(i * n, j * n, n, n) = (i == j ? blocks[static_cast<std::size_t>(i)] - sigma_0 : Matrix(-sigma_0));
    return min_eigenvalue(big);
}

// ---------------------------------------------------------------------------
// Weight search

inline constexpr double weight_eps = 1e-11;
inline constexpr double default_weight_tol = 1e-5;
// Inflating by 1/w near the clamp makes covariances legitimately lopsided.
inline constexpr double inflated_condition = 1e16;

[[nodiscard]] inline double clamp_weight(double w) { return std::clamp(w, weight_eps, 1.0 - weight_eps); }

// Golden-section search on [0, 1]. The objective is only ever evaluated on
// [weight_eps, 1 - weight_eps]; the endpoints win when they beat both probes.
[[nodiscard]] inline double golden_section_w(const std::function<double(double)>& objective,
                                             double err_tol = default_weight_tol) {
    auto f = [&](double w) { return objective(clamp_weight(w)); };
    double wL = 0.0, wR = 1.0;
    double fwL = f(wL), fwR = f(wR);
    double sL = 0.382, sR = 0.618;
    double fsL = f(sL), fsR = f(sR);
    while (wR - wL > err_tol) {
        if (fsL < fsR) {
            wR = sR;
            fwR = fsR;
            sR = sL;
            fsR = fsL;
            sL = wL + 0.618 * (sL - wL);
            fsL = f(sL);
        } else {
            wL = sL;
            fwL = fsL;
            sL = sR;
            fsL = fsR;
            sR = wR - 0.618 * (wR - sR);
            fsR = f(sR);
        }
    }
    const double fmin = std::min({fwL, fsL, fsR, fwR});
    if (fwL == fmin) return wL;
    if (fwR == fmin) return wR;
    return 0.5 * (wL + wR);
}

// ---------------------------------------------------------------------------
// Covariance intersection

[[nodiscard]] inline Matrix ci_information(const Matrix& i1, const Matrix& i2, double w) {
    return symmetrize(w * i1 + (1.0 - w) * i2);
}

struct CiResult {
    GaussianEstimate estimate;
    double w = 0.0;
};

// CI with an explicit weight, or the determinant-minimizing weight when none
// is given.
[[nodiscard]] inline CiResult ci_fuse_weighted(const GaussianEstimate& e1, const GaussianEstimate& e2,
                                               std::optional<double> w = {}) {
    check_estimate(e1);
    check_estimate(e2);
    require(e1.dim() == e2.dim(), "fused estimates must share a dimension");
    if (w && !(*w >= 0.0 && *w <= 1.0)) throw InconsistentInputs("CI weight must lie in [0, 1]");
    const Matrix i1 = spd_inverse(e1.cov, "first covariance");
    const Matrix i2 = spd_inverse(e2.cov, "second covariance");
    const double weight = w ? *w : golden_section_w([&](double x) {
        return 1.0 / ci_information(i1, i2, x).determinant();
    });
    const Matrix cov = spd_inverse(ci_information(i1, i2, weight), "CI information");
    return {{cov * (weight * i1 * e1.mean + (1.0 - weight) * i2 * e2.mean), cov}, weight};
}

[[nodiscard]] inline GaussianEstimate ci_fuse(const GaussianEstimate& e1, const GaussianEstimate& e2,
                                              std::optional<double> w = {}) {
    return ci_fuse_weighted(e1, e2, w).estimate;
}

// ---------------------------------------------------------------------------
// Split covariance intersection

struct SplitFusion {
    SplitEstimate estimate;
    double w = 0.0;
};

// Boundary handling from the reference implementation, then golden section.
[[nodiscard]] inline double split_weight(const Matrix& p1d, const Matrix& p2d,
                                         const std::function<double(double)>& objective,
                                         double err_tol = default_weight_tol) {
    if (p2d.cwiseAbs().trace() < weight_eps) return 1.0;
    if (p1d.cwiseAbs().trace() < weight_eps) return 0.0;
    return golden_section_w(objective, err_tol);
}

// Full-observation Split CIF in information form.
[[nodiscard]] inline SplitFusion split_cif_fuse_weighted(const SplitEstimate& e1, const SplitEstimate& e2,
                                                         double err_tol = default_weight_tol) {
    check_split(e1);
    check_split(e2);
    require(e1.mean.size() == e2.mean.size(), "fused estimates must share a dimension");
    auto inflated = [&](double w) {
        return std::pair<Matrix, Matrix>{e1.cov_d / w + e1.cov_i, e2.cov_d / (1.0 - w) + e2.cov_i};
    };
    auto fused_cov = [&](double w) {
        const auto [s1, s2] = inflated(w);
        return spd_inverse(spd_inverse(s1, "inflated covariance", inflated_condition) +
                               spd_inverse(s2, "inflated covariance", inflated_condition),
                           "fused information", inflated_condition);
    };
    const double w = clamp_weight(
        split_weight(e1.cov_d, e2.cov_d, [&](double x) { return fused_cov(x).determinant(); }, err_tol));

    const auto [s1, s2] = inflated(w);
    const Matrix i1 = spd_inverse(s1, "inflated covariance", inflated_condition);
    const Matrix i2 = spd_inverse(s2, "inflated covariance", inflated_condition);
    const Matrix cov = spd_inverse(i1 + i2, "fused information", inflated_condition);
    const Matrix cov_i = symmetrize(cov * (i1 * e1.cov_i * i1 + i2 * e2.cov_i * i2) * cov);
    return {{cov * (i1 * e1.mean + i2 * e2.mean), symmetrize(cov - cov_i), cov_i}, w};
}

[[nodiscard]] inline SplitEstimate split_cif_fuse(const SplitEstimate& e1, const SplitEstimate& e2) {
    return split_cif_fuse_weighted(e1, e2).estimate;
}

// Split measurement z = H x + noise with split noise covariance.
struct SplitMeasurement {
    Vector z;
    Matrix cov_d;
    Matrix cov_i;
};

// Partial-observation Split CIF in gain form.
[[nodiscard]] inline SplitFusion split_cif_partial_weighted(const SplitEstimate& e1, const SplitMeasurement& meas,
                                                            const Matrix& H, double err_tol = default_weight_tol) {
    check_split(e1);
    const auto n = e1.mean.size();
    const auto p = meas.z.size();
    require(H.rows() == p && H.cols() == n, "H shape must be p x n");
    require_square(meas.cov_d, p, "measurement cov_d");
    require_square(meas.cov_i, p, "measurement cov_i");
    const Matrix I = Matrix::Identity(n, n);

    auto gain = [&](double w) {
        const Matrix P1 = e1.cov_d / w + e1.cov_i;
        const Matrix P2 = meas.cov_d / (1.0 - w) + meas.cov_i;
        const Matrix PHt = P1 * H.transpose();
        const Matrix K = spd_solve(H * PHt + P2, PHt.transpose(), "innovation covariance", inflated_condition).transpose();
        return std::pair<Matrix, Matrix>{K, P1};
    };
    const double w = clamp_weight(split_weight(
        e1.cov_d, meas.cov_d,
        [&](double x) {
            const auto [K, P1] = gain(x);
            return Matrix((I - K * H) * P1).determinant();
        },
        err_tol));

    const auto [K, P1] = gain(w);
    const Matrix IKH = I - K * H;
    const Matrix P = symmetrize(IKH * P1);
    const Matrix Pi = symmetrize(IKH * e1.cov_i * IKH.transpose() + K * meas.cov_i * K.transpose());
    return {{e1.mean + K * (meas.z - H * e1.mean), symmetrize(P - Pi), Pi}, w};
}

[[nodiscard]] inline SplitEstimate split_cif_partial(const SplitEstimate& e1, const SplitMeasurement& meas,
                                                     const Matrix& H) {
    return split_cif_partial_weighted(e1, meas, H).estimate;
}

// ---------------------------------------------------------------------------
// Consistency

struct ConsistencyReport {
    Matrix empirical_cov;
    Matrix reported_cov;
    double min_eigenvalue_of_difference = 0.0;
    double tolerance = 0.0;
    bool consistent = false;
};

// Compares the mean reported covariance against the empirical second moment
// of the errors. Each empirical entry carries a 3-standard-error slack; the
// Frobenius norm of that slack bounds the eigenvalue shift it can cause.
[[nodiscard]] inline ConsistencyReport consistency_audit(const std::vector<std::pair<GaussianEstimate, Vector>>& run) {
    if (run.size() < 30) throw Error("consistency audit needs at least 30 samples");
    const auto n = run.front().first.dim();
    const auto N = static_cast<double>(run.size());
    std::vector<Vector> errors;
    errors.reserve(run.size());
    Matrix reported = Matrix::Zero(n, n);
    for (const auto& [est, truth] : run) {
        check_estimate(est);
        require(est.dim() == n && truth.size() == n, "audit samples must share a dimension");
        errors.push_back(est.mean - truth);
        reported += est.cov;
    }
    reported /= N;
    Matrix second = Matrix::Zero(n, n);
    for (const auto& e : errors) second += e * e.transpose();
    second /= N;
    Matrix var = Matrix::Zero(n, n);
    for (const auto& e : errors) {
        const Matrix d = e * e.transpose() - second;
        var += d.cwiseProduct(d);
    }
    var /= (N - 1.0);
    const Matrix stderr_ = (var / N).cwiseSqrt();

    ConsistencyReport r;
    r.empirical_cov = symmetrize(second);
    r.reported_cov = symmetrize(reported);
    r.min_eigenvalue_of_difference = min_eigenvalue(r.reported_cov - r.empirical_cov);
    r.tolerance = 3.0 * stderr_.norm();
    r.consistent = r.min_eigenvalue_of_difference >= -r.tolerance;
    return r;
}

// ---------------------------------------------------------------------------
// Circular reasoning

struct CircularReasoningTable {
    // Entry k is Sigma divided by the covariance after round k (entry 0 is the seed).
    std::vector<double> naive_a, naive_b;
    std::vector<double> ci_a, ci_b;
};

// Two nodes start from the same estimate and repeatedly fuse each other's
// output, B first. Naive fusion double counts; CI does not.
[[nodiscard]] inline CircularReasoningTable circular_reasoning_demo(int rounds, const GaussianEstimate& seed) {
    if (rounds < 1) throw Error("rounds must be at least 1");
    check_estimate(seed);
    const double base = seed.cov.trace();
    auto divisor = [&](const GaussianEstimate& e) { return base / e.cov.trace(); };

    CircularReasoningTable t;
    GaussianEstimate a = seed, b = seed, ca = seed, cb = seed;
    t.naive_a.push_back(divisor(a));
    t.naive_b.push_back(divisor(b));
    t.ci_a.push_back(divisor(ca));
    t.ci_b.push_back(divisor(cb));
    for (int r = 1; r <= rounds; ++r) {
        if (r % 2 == 1) {
            b = fuse_full(b, a);
            cb = ci_fuse(cb, ca);
        } else {
            a = fuse_full(a, b);
            ca = ci_fuse(ca, cb);
        }
        t.naive_a.push_back(divisor(a));
        t.naive_b.push_back(divisor(b));
        t.ci_a.push_back(divisor(ca));
        t.ci_b.push_back(divisor(cb));
    }
    return t;
}

} // namespace estkit
