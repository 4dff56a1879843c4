#pragma once

#include "estkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace estkit {

// x' = A x + B u (+ eps). sigma_eps left empty means no additive process noise.
struct LinearStateSpace {
    Matrix A;
    Matrix B;
    Matrix sigma_u;
    std::optional<Matrix> sigma_eps;

    [[nodiscard]] Eigen::Index state_dim() const { return A.rows(); }
    [[nodiscard]] Eigen::Index input_dim() const { return B.cols(); }
};

struct LinearMeasurementModel {
    Matrix H;
    Matrix sigma_z;
};

// Callables must be reentrant: filters may call them from several threads.
struct NonlinearSystemModel {
    std::function<Vector(const Vector&, const Vector&)> g;
    std::function<Matrix(const Vector&, const Vector&)> jac_x;
    std::function<Matrix(const Vector&, const Vector&)> jac_u;
    Matrix sigma_u;
    std::optional<Matrix> sigma_eps;
};

struct NonlinearMeasurementModel {
    std::function<Vector(const Vector&)> h;
    std::function<Matrix(const Vector&)> jac;
    Matrix sigma_z;
};

inline void validate(const LinearStateSpace& m) {
    const auto n = m.A.rows();
    require_square(m.A, n, "A");
    require(m.B.rows() == n, "B must have as many rows as A");
    require_square(m.sigma_u, m.B.cols(), "sigma_u");
    if (m.sigma_eps) require_square(*m.sigma_eps, n, "sigma_eps");
    if (!m.A.allFinite() || !m.B.allFinite()) throw InvalidModel("model matrices contain non-finite entries");
}

inline void validate(const LinearMeasurementModel& m, Eigen::Index n) {
    require(m.H.cols() == n, "H column count must equal the state dimension");
    require(m.H.rows() >= 1, "H needs at least one row");
    require_square(m.sigma_z, m.H.rows(), "sigma_z");
}

// ---------------------------------------------------------------------------
// Discretization

struct DiscreteModel {
    Matrix A;
    Matrix B;
};

// Zero-order-hold discretization. exp(A dt) and int_0^dt exp(A s) ds are
// summed as power series on a scaled-down step, then doubled back up.
[[nodiscard]] inline DiscreteModel discretize(const LinearStateSpace& model, double dt, double tol = 1e-14) {
    if (!(dt > 0.0)) throw InvalidModel("dt must be positive");
    if (!(tol > 0.0)) throw InvalidModel("tol must be positive");
    if (!model.A.allFinite() || !model.B.allFinite()) throw InvalidModel("model matrices contain non-finite entries");
    const auto n = model.A.rows();
    require_square(model.A, n, "A");
    require(model.B.rows() == n, "B must have as many rows as A");

    const double norm = (model.A * dt).lpNorm<Eigen::Infinity>();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const double h = dt / std::ldexp(1.0, squarings);
    const Matrix M = model.A * h;

    // E = sum M^k / k!, G = h * sum M^k / (k+1)!
    const Matrix I = Matrix::Identity(n, n);
    Matrix E = I;
    Matrix phi = I;
    Matrix power = I;
    double fact = 1.0;
    for (int k = 1; k < 200; ++k) {
        power = power * M;
        fact *= k;
        const Matrix term_e = power / fact;
        const Matrix term_phi = power / (fact * (k + 1));
        E += term_e;
        phi += term_phi;
        if (term_e.norm() < tol && term_phi.norm() < tol) break;
    }
    Matrix G = h * phi;
    for (int s = 0; s < squarings; ++s) {
        G = (I + E) * G;
        E = E * E;
    }
    return {E, G * model.B};
}

// ---------------------------------------------------------------------------
// Observability and controllability

[[nodiscard]] inline Matrix observability_matrix(const Matrix& A, const Matrix& H) {
    const auto n = A.rows();
    require_square(A, n, "A");
    require(H.cols() == n, "H column count must equal the state dimension");
    const auto p = H.rows();
    Matrix O(p * n, n);
    Matrix block = H;
    for (Eigen::Index k = 0; k < n; ++k) {
        O.middleRows(k * p, p) = block;
        block = block * A;
    }
    return O;
}

[[nodiscard]] inline Matrix controllability_matrix(const Matrix& A, const Matrix& B) {
    const auto n = A.rows();
    require_square(A, n, "A");
    require(B.rows() == n, "B must have as many rows as A");
    const auto m = B.cols();
    Matrix C(n, m * n);
    Matrix block = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        C.middleCols(k * m, m) = block;
        block = A * block;
    }
    return C;
}

// Count of singular values above rank_tol * sigma_max.
[[nodiscard]] inline Eigen::Index numeric_rank(const Matrix& m, double rank_tol = 1e-8) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    return static_cast<Eigen::Index>((s.array() > rank_tol * s(0)).count());
}

[[nodiscard]] inline bool is_observable(const Matrix& A, const Matrix& H, double rank_tol = 1e-8) {
    if (!(rank_tol > 0.0)) throw InvalidModel("rank_tol must be positive");
    return numeric_rank(observability_matrix(A, H), rank_tol) == A.rows();
}

[[nodiscard]] inline bool is_controllable(const Matrix& A, const Matrix& B, double rank_tol = 1e-8) {
    return numeric_rank(controllability_matrix(A, B), rank_tol) == A.rows();
}

// ---------------------------------------------------------------------------
// Pole placement

using Poles = std::vector<std::complex<double>>;

// Monic polynomial coefficients, lowest order first, of prod (s - r).
// Complex roots must come in conjugate pairs.
[[nodiscard]] inline Vector monic_from_roots(const Poles& roots) {
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    Vector out(static_cast<Eigen::Index>(c.size()));
    double scale = 1.0;
    for (const auto& v : c) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (std::abs(c[i].imag()) > 1e-9 * scale)
            throw GainDesignError("desired eigenvalues must be real or come in conjugate pairs");
        out(static_cast<Eigen::Index>(i)) = c[i].real();
    }
    return out;
}

namespace detail {

// A cluster of k computed eigenvalues is a genuine k-fold eigenvalue when
// (M - c I)^k, with c the cluster centroid, has k negligible singular values.
inline bool is_multiple_eigenvalue(const Matrix& m, std::complex<double> c, std::size_t k) {
    const auto n = m.rows();
    const Eigen::MatrixXcd shifted =
        m.cast<std::complex<double>>() - c * Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd power = shifted;
    for (std::size_t i = 1; i < k; ++i) power = power * shifted;
    const double scale = std::pow(shifted.norm(), static_cast<double>(k));
    if (scale == 0.0) return true;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(power);
    const auto& s = svd.singularValues();
    const auto small = (s.array() <= 1e-12 * scale).count();
    return small >= static_cast<Eigen::Index>(k);
}

// Single-linkage clusters at radius delta; verified clusters collapse to their
// centroid, rejected ones are re-split at a tenth of the radius.
inline void refine_clusters(const Matrix& m, std::vector<std::complex<double>>& ev, std::vector<std::size_t> idx,
                            double delta) {
    std::vector<int> label(idx.size(), -1);
    int next = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        if (label[a] >= 0) continue;
        label[a] = next;
        std::vector<std::size_t> stack{a};
        while (!stack.empty()) {
            const auto cur = stack.back();
            stack.pop_back();
            for (std::size_t b = 0; b < idx.size(); ++b)
                if (label[b] < 0 && std::abs(ev[idx[cur]] - ev[idx[b]]) <= delta * std::max(1.0, std::abs(ev[idx[cur]]))) {
                    label[b] = next;
                    stack.push_back(b);
                }
        }
        ++next;
    }
    for (int c = 0; c < next; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t a = 0; a < idx.size(); ++a)
            if (label[a] == c) members.push_back(idx[a]);
        if (members.size() < 2) continue;
        std::complex<double> centroid = 0.0;
        for (auto i : members) centroid += ev[i];
        centroid /= static_cast<double>(members.size());
        if (is_multiple_eigenvalue(m, centroid, members.size())) {
            for (auto i : members) ev[i] = centroid;
        } else if (delta > 1e-9) {
            refine_clusters(m, ev, members, delta / 10);
        }
    }
}

} // namespace detail

// Spectrum sorted by real then imaginary part. Defective multiple eigenvalues,
// which a QR sweep scatters by roughly eps^(1/k), are reported at the verified
// cluster centroid instead.
[[nodiscard]] inline Poles eigenvalues(const Matrix& m) {
    Eigen::EigenSolver<Matrix> es(m, false);
    if (es.info() != Eigen::Success) throw NumericError("eigenvalue solve failed");
    Poles out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::vector<std::size_t> idx(out.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    detail::refine_clusters(m, out, idx, 0.05);
    for (auto& e : out)
        if (std::abs(e.imag()) <= 1e-14 * std::max(1.0, std::abs(e))) e = {e.real(), 0.0};
    std::sort(out.begin(), out.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

// Characteristic polynomial of m from its computed spectrum. The
// coefficients stay accurate even when individual roots are clustered.
[[nodiscard]] inline Vector characteristic_polynomial(const Matrix& m) {
    return monic_from_roots(eigenvalues(m));
}

[[nodiscard]] inline bool same_spectrum(const Matrix& m, const Poles& desired, double rel_tol) {
    if (m.rows() != static_cast<Eigen::Index>(desired.size())) return false;
    const Vector got = characteristic_polynomial(m);
    const Vector want = monic_from_roots(desired);
    for (Eigen::Index i = 0; i < want.size(); ++i)
        if (std::abs(got(i) - want(i)) > rel_tol * std::max(1.0, std::abs(want(i)))) return false;
    return true;
}

// Ackermann's formula for single-input pole placement. Returns K with the
// closed loop A - b K^T.
[[nodiscard]] inline Vector pole_placement_gain(const Matrix& A, const Vector& b, const Poles& desired,
                                                double rank_tol = 1e-8) {
    const auto n = A.rows();
    require_square(A, n, "A");
    require(b.size() == n, "b must have as many entries as A has rows");
    require(static_cast<Eigen::Index>(desired.size()) == n, "need one desired eigenvalue per state");
    const Matrix C = controllability_matrix(A, b);
    if (numeric_rank(C, rank_tol) != n) throw GainDesignError("pair (A, b) is not controllable");

    const Vector coeffs = monic_from_roots(desired);
    Matrix phi = Matrix::Zero(n, n);
    Matrix power = Matrix::Identity(n, n);
    for (Eigen::Index k = 0; k <= n; ++k) {
        phi += coeffs(k) * power;
        power = power * A;
    }
    Vector e_last = Vector::Zero(n);
    e_last(n - 1) = 1.0;
    // row = e_n^T C^{-1}  <=>  C^T row^T = e_n
    const Vector row = C.transpose().fullPivLu().solve(e_last);
    Vector K = phi.transpose() * row;
    if (!K.allFinite()) throw GainDesignError("gain computation produced non-finite values");
    return K;
}

// States driven by one measured output when designing a multi-output observer
// one decoupled subsystem at a time.
struct ObserverBlock {
    std::vector<Eigen::Index> states;
    Eigen::Index output = 0;
};

// L such that A - L H has the requested spectrum. With more than one output
// the caller supplies the decoupling; desired eigenvalues are consumed in
// block order.
[[nodiscard]] inline Matrix observer_gain(const Matrix& A, const Matrix& H, const Poles& desired,
                                          const std::vector<ObserverBlock>& blocks = {},
                                          double rank_tol = 1e-8) {
    const auto n = A.rows();
    require_square(A, n, "A");
    require(H.cols() == n, "H column count must equal the state dimension");
    require(static_cast<Eigen::Index>(desired.size()) == n, "need one desired eigenvalue per state");
    const auto p = H.rows();
    if (numeric_rank(observability_matrix(A, H), rank_tol) != n)
        throw GainDesignError("pair (A, H) is not observable");

    if (p == 1 && blocks.empty()) {
        const Vector l = pole_placement_gain(A.transpose(), H.row(0).transpose(), desired, rank_tol);
        return l;
    }
    if (blocks.empty()) throw GainDesignError("multi-output observer design needs a decoupling partition");

    std::vector<int> seen_state(static_cast<std::size_t>(n), 0);
    std::vector<int> seen_output(static_cast<std::size_t>(p), 0);
    for (const auto& blk : blocks) {
        if (blk.states.empty() || blk.output < 0 || blk.output >= p)
            throw GainDesignError("invalid partition: bad block");
        if (seen_output[static_cast<std::size_t>(blk.output)]++)
            throw GainDesignError("invalid partition: output used twice");
        for (auto s : blk.states) {
            if (s < 0 || s >= n || seen_state[static_cast<std::size_t>(s)]++)
                throw GainDesignError("invalid partition: states must be covered exactly once");
        }
    }
    if (std::find(seen_state.begin(), seen_state.end(), 0) != seen_state.end())
        throw GainDesignError("invalid partition: states must be covered exactly once");

    Matrix L = Matrix::Zero(n, p);
    std::size_t next_pole = 0;
    for (const auto& blk : blocks) {
        const auto m = static_cast<Eigen::Index>(blk.states.size());
        Matrix sub_a(m, m);
        Vector sub_h(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            sub_h(i) = H(blk.output, blk.states[static_cast<std::size_t>(i)]);
            for (Eigen::Index j = 0; j < m; ++j)
                sub_a(i, j) = A(blk.states[static_cast<std::size_t>(i)], blk.states[static_cast<std::size_t>(j)]);
        }
        const Poles sub_poles(desired.begin() + static_cast<std::ptrdiff_t>(next_pole),
                              desired.begin() + static_cast<std::ptrdiff_t>(next_pole + blk.states.size()));
        next_pole += blk.states.size();
        Vector sub_l;
        try {
            sub_l = pole_placement_gain(sub_a.transpose(), sub_h, sub_poles, rank_tol);
        } catch (const GainDesignError&) {
            throw GainDesignError("invalid partition: a block is not observable from its output");
        }
        for (Eigen::Index i = 0; i < m; ++i) L(blk.states[static_cast<std::size_t>(i)], blk.output) = sub_l(i);
    }
    if (!same_spectrum(A - L * H, desired, 1e-6))
        throw GainDesignError("invalid partition: blocks are coupled, spectrum not achieved");
    return L;
}

// ---------------------------------------------------------------------------
// Model library

enum class ModelName {
    cp,
    cv,
    ca,
    unified,
    dip,
    lateral,
    sip,
    bicycle,
    bicycle_reduced,
    landmark_range,
};

using ModelParams = std::map<std::string, double>;
using LibraryModel = std::variant<LinearStateSpace, NonlinearSystemModel, NonlinearMeasurementModel>;

namespace detail {

inline double param(const ModelParams& p, const std::string& key) {
    const auto it = p.find(key);
    if (it == p.end()) throw InvalidModel("missing model parameter '" + key + "'");
    return it->second;
}

inline double param_or(const ModelParams& p, const std::string& key, double fallback) {
    const auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

inline Matrix ca_transition(double dt) {
    Matrix A(3, 3);
    A << 1, dt, dt * dt / 2, 0, 1, dt, 0, 0, 1;
    return A;
}

} // namespace detail

inline std::optional<ModelName> model_name_from_string(const std::string& s) {
    static const std::map<std::string, ModelName> names{
        {"cp", ModelName::cp},
        {"cv", ModelName::cv},
        {"ca", ModelName::ca},
        {"unified", ModelName::unified},
        {"dip", ModelName::dip},
        {"lateral", ModelName::lateral},
        {"sip", ModelName::sip},
        {"bicycle", ModelName::bicycle},
        {"bicycle_reduced", ModelName::bicycle_reduced},
        {"landmark_range", ModelName::landmark_range},
    };
    const auto it = names.find(s);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

// Discrete motion models take "dt"; perturbation variances ("var_p",
// "var_v", "var_a") default to zero. Continuous models (dip, lateral, sip)
// are returned in dx/dt form.
[[nodiscard]] inline LibraryModel model_library(ModelName name, const ModelParams& p) {
    using detail::param;
    using detail::param_or;
    switch (name) {
    case ModelName::cp: {
        param(p, "dt");
        return LinearStateSpace{Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                Matrix::Constant(1, 1, param_or(p, "var_p", 0.0)), std::nullopt};
    }
    case ModelName::cv: {
        const double dt = param(p, "dt");
        Matrix A(2, 2);
        A << 1, dt, 0, 1;
        Matrix B(2, 1);
        B << 0, 1;
        return LinearStateSpace{A, B, Matrix::Constant(1, 1, param_or(p, "var_v", 0.0)), std::nullopt};
    }
    case ModelName::ca: {
        const double dt = param(p, "dt");
        Matrix B(3, 1);
        B << 0, 0, 1;
        return LinearStateSpace{detail::ca_transition(dt), B, Matrix::Constant(1, 1, param_or(p, "var_a", 0.0)),
                                std::nullopt};
    }
    case ModelName::unified: {
        const double dt = param(p, "dt");
        Vector var(3);
        var << param_or(p, "var_p", 0.0), param_or(p, "var_v", 0.0), param_or(p, "var_a", 0.0);
        return LinearStateSpace{detail::ca_transition(dt), Matrix::Identity(3, 3), var.asDiagonal(), std::nullopt};
    }
    case ModelName::dip: {
        // state [theta1, dtheta1, theta2, dtheta2, x, dx], input cart acceleration
        const double g = param(p, "g"), m1 = param(p, "m1"), m2 = param(p, "m2");
        const double l1 = param(p, "L1"), l2 = param(p, "L2");
        Matrix A = Matrix::Zero(6, 6);
        A(0, 1) = 1;
        A(1, 0) = (1 + m2 / m1) * g / l1;
        A(1, 2) = -m2 * g / (m1 * l1);
        A(2, 3) = 1;
        A(3, 0) = -(m1 + m2) * g / (m1 * l2);
        A(3, 2) = (m1 + m2) * g / (m1 * l2);
        A(4, 5) = 1;
        Matrix B = Matrix::Zero(6, 1);
        B(1, 0) = -1 / l1;
        B(5, 0) = 1;
        return LinearStateSpace{A, B, Matrix::Zero(1, 1), std::nullopt};
    }
    case ModelName::lateral: {
        // state [lateral offset, heading, steering angle], input steering command
        const double v = param(p, "v"), L = param(p, "L"), tau = param(p, "tau_beta");
        Matrix A(3, 3);
        A << 0, v, 0, 0, 0, v / L, 0, 0, -1 / tau;
        Matrix B(3, 1);
        B << 0, 0, 1 / tau;
        return LinearStateSpace{A, B, Matrix::Zero(1, 1), std::nullopt};
    }
    case ModelName::sip: {
        // state [theta, dtheta, x, dx], input cart acceleration
        const double g = param(p, "g"), L = param(p, "L");
        Matrix A = Matrix::Zero(4, 4);
        A(0, 1) = 1;
        A(1, 0) = g / L;
        A(2, 3) = 1;
        Matrix B(4, 1);
        B << 0, -1 / L, 0, 1;
        return LinearStateSpace{A, B, Matrix::Zero(1, 1), std::nullopt};
    }
    case ModelName::bicycle: {
        // state [x, y, heading, steering angle], input steering command; Euler step dt
        const double v = param(p, "v"), L = param(p, "L"), tau = param(p, "tau_beta"), dt = param(p, "dt");
        NonlinearSystemModel m;
        m.g = [=](const Vector& s, const Vector& u) {
            Vector next = s;
            next(0) += dt * v * std::cos(s(2));
            next(1) += dt * v * std::sin(s(2));
            next(2) += dt * v / L * std::tan(s(3));
            next(3) += dt * (u(0) - s(3)) / tau;
            return next;
        };
        m.jac_x = [=](const Vector& s, const Vector&) {
            Matrix J = Matrix::Identity(4, 4);
            J(0, 2) = -dt * v * std::sin(s(2));
            J(1, 2) = dt * v * std::cos(s(2));
            const double c = std::cos(s(3));
            J(2, 3) = dt * v / (L * c * c);
            J(3, 3) = 1 - dt / tau;
            return J;
        };
        m.jac_u = [=](const Vector&, const Vector&) {
            Matrix J = Matrix::Zero(4, 1);
            J(3, 0) = dt / tau;
            return J;
        };
        m.sigma_u = Matrix::Constant(1, 1, param_or(p, "var_u", 0.0));
        return m;
    }
    case ModelName::bicycle_reduced: {
        // state [x, y, heading], input steering angle; Euler step dt
        const double v = param(p, "v"), L = param(p, "L"), dt = param(p, "dt");
        NonlinearSystemModel m;
        m.g = [=](const Vector& s, const Vector& u) {
            Vector next = s;
            next(0) += dt * v * std::cos(s(2));
            next(1) += dt * v * std::sin(s(2));
            next(2) += dt * v / L * std::tan(u(0));
            return next;
        };
        m.jac_x = [=](const Vector& s, const Vector&) {
            Matrix J = Matrix::Identity(3, 3);
            J(0, 2) = -dt * v * std::sin(s(2));
            J(1, 2) = dt * v * std::cos(s(2));
            return J;
        };
        m.jac_u = [=](const Vector&, const Vector& u) {
            Matrix J = Matrix::Zero(3, 1);
            const double c = std::cos(u(0));
            J(2, 0) = dt * v / (L * c * c);
            return J;
        };
        m.sigma_u = Matrix::Constant(1, 1, param_or(p, "var_u", 0.0));
        return m;
    }
    case ModelName::landmark_range: {
        const double xl = param(p, "x_L"), yl = param(p, "y_L");
        NonlinearMeasurementModel m;
        m.h = [=](const Vector& s) {
            Vector r(1);
            r(0) = std::hypot(s(0) - xl, s(1) - yl);
            return r;
        };
        m.jac = [=](const Vector& s) {
            Matrix J = Matrix::Zero(1, s.size());
            const double r = std::hypot(s(0) - xl, s(1) - yl);
            if (r > 0) {
                J(0, 0) = (s(0) - xl) / r;
                J(0, 1) = (s(1) - yl) / r;
            }
            return J;
        };
        m.sigma_z = Matrix::Constant(1, 1, param_or(p, "var_r", 0.0));
        return m;
    }
    }
    throw InvalidModel("unknown model name");
}

[[nodiscard]] inline LibraryModel model_library(const std::string& name, const ModelParams& p) {
    const auto id = model_name_from_string(name);
    if (!id) throw InvalidModel("unknown model name '" + name + "'");
    return model_library(*id, p);
}

// Measurement matrices that accompany the named continuous models.
[[nodiscard]] inline Matrix dip_measurement() {
    Matrix H = Matrix::Zero(2, 6);
    H(0, 0) = 1;
    H(1, 4) = 1;
    return H;
}

[[nodiscard]] inline Matrix lateral_measurement() {
    Matrix H = Matrix::Zero(1, 3);
    H(0, 0) = 1;
    return H;
}

[[nodiscard]] inline Matrix sip_measurement() {
    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = 1;
    H(1, 2) = 1;
    return H;
}

// Linear model viewed through the nonlinear interface.
[[nodiscard]] inline NonlinearSystemModel as_nonlinear(const LinearStateSpace& m) {
    NonlinearSystemModel out;
    const Matrix A = m.A, B = m.B;
    out.g = [A, B](const Vector& x, const Vector& u) -> Vector { return A * x + B * u; };
    out.jac_x = [A](const Vector&, const Vector&) -> Matrix { return A; };
    out.jac_u = [B](const Vector&, const Vector&) -> Matrix { return B; };
    out.sigma_u = m.sigma_u;
    out.sigma_eps = m.sigma_eps;
    return out;
}

[[nodiscard]] inline NonlinearMeasurementModel as_nonlinear(const LinearMeasurementModel& m) {
    NonlinearMeasurementModel out;
    const Matrix H = m.H;
    out.h = [H](const Vector& x) -> Vector { return H * x; };
    out.jac = [H](const Vector&) -> Matrix { return H; };
    out.sigma_z = m.sigma_z;
    return out;
}

} // namespace estkit
