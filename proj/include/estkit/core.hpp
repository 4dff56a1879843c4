#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace estkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionMismatch : Error { using Error::Error; };
struct InvalidModel : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct GainDesignError : Error { using Error::Error; };

// Mean and covariance of a Gaussian belief.
struct GaussianEstimate {
    Vector mean;
    Matrix cov;

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

template <typename Derived>
[[nodiscard]] bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

[[nodiscard]] inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

[[nodiscard]] inline double min_eigenvalue(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Symmetric within 1e-9 relative and min eigenvalue >= -1e-9 * norm.
[[nodiscard]] inline bool is_covariance(const Matrix& m, double tol = 1e-9) {
    if (m.rows() != m.cols() || !m.allFinite()) return false;
    const double scale = std::max(1.0, m.norm());
    if ((m - m.transpose()).norm() > tol * scale) return false;
    return min_eigenvalue(m) >= -tol * scale;
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DimensionMismatch(what);
}

inline void require_square(const Matrix& m, Eigen::Index n, const char* name) {
    if (m.rows() != n || m.cols() != n)
        throw DimensionMismatch(std::string(name) + " must be " + std::to_string(n) + "x" +
                                std::to_string(n));
}

inline void check_estimate(const GaussianEstimate& e) {
    require_square(e.cov, e.mean.size(), "estimate covariance");
}

// Solve S X = B for symmetric positive definite S. Pivot ratios beyond
// max_condition are reported as singular.
[[nodiscard]] inline Matrix spd_solve(const Matrix& s, const Matrix& b, const char* what = "matrix",
                                      double max_condition = 1e12) {
    const Matrix sym = symmetrize(s);
    Eigen::LDLT<Matrix> ldlt(sym);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericError(std::string(what) + " is not positive definite");
    const auto d = ldlt.vectorD().cwiseAbs();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0) || d.minCoeff() < dmax / max_condition)
        throw NumericError(std::string(what) + " is singular or ill-conditioned");
    Matrix x = ldlt.solve(b);
    if (!x.allFinite()) throw NumericError(std::string(what) + " solve produced non-finite values");
    return x;
}

[[nodiscard]] inline Matrix spd_inverse(const Matrix& s, const char* what = "matrix", double max_condition = 1e12) {
    return symmetrize(spd_solve(s, Matrix::Identity(s.rows(), s.cols()), what, max_condition));
}

// Log density of N(x; mean, cov).
[[nodiscard]] inline double gaussian_log_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
    const Eigen::LLT<Matrix> llt(symmetrize(cov));
    if (llt.info() != Eigen::Success) throw NumericError("density covariance is not positive definite");
    const Vector d = x - mean;
    const Vector y = llt.matrixL().solve(d);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    constexpr double log_2pi = 1.8378770664093454836;
    return -0.5 * (y.squaredNorm() + logdet + static_cast<double>(x.size()) * log_2pi);
}

[[nodiscard]] inline double gaussian_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
    return std::exp(gaussian_log_pdf(x, mean, cov));
}

} // namespace estkit
