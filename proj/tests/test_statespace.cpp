#include "estkit/nonlinear.hpp"
#include "estkit/statespace.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace estkit;

namespace {

LinearStateSpace linear(const Matrix& A, const Matrix& B) {
    return {A, B, Matrix::Zero(B.cols(), B.cols()), std::nullopt};
}

LinearStateSpace sip() { return std::get<LinearStateSpace>(model_library("sip", {{"g", 10}, {"L", 1}})); }

Poles all_at(double v, int n) { return Poles(static_cast<std::size_t>(n), {v, 0.0}); }

} // namespace

TEST(Discretize, ZeroDynamicsCollapse) {
    Matrix B(3, 2);
    B << 1, 2, 3, 4, 5, 6;
    const auto d = discretize(linear(Matrix::Zero(3, 3), B), 0.25);
    EXPECT_TRUE(d.A.isApprox(Matrix::Identity(3, 3)));
    EXPECT_LT((d.B - 0.25 * B).norm(), 1e-15);
}

TEST(Discretize, DoubleIntegratorIsConstantVelocity) {
    Matrix A(2, 2), B(2, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    const double dt = 0.1;
    const auto d = discretize(linear(A, B), dt);
    Matrix expected(2, 2);
    expected << 1, dt, 0, 1;
    EXPECT_LT((d.A - expected).norm(), 1e-15);
    EXPECT_NEAR(d.B(0, 0), dt * dt / 2, 1e-15);
    EXPECT_NEAR(d.B(1, 0), dt, 1e-15);
}

TEST(Discretize, ScalarMatchesSeriesOracle) {
    for (double a : {-3.0, -0.5, 0.0, 0.7, 2.0, 5.0}) {
        const auto d = discretize(linear(Matrix::Constant(1, 1, a), Matrix::Ones(1, 1)), 1.0, 1e-15);
        EXPECT_NEAR(d.A(0, 0), oracle::exp_series(a), 1e-12 * oracle::exp_series(a)) << a;
        const double b = a == 0 ? 1.0 : (oracle::exp_series(a) - 1) / a;
        EXPECT_NEAR(d.B(0, 0), b, 1e-11 * std::max(1.0, b)) << a;
    }
}

TEST(Discretize, LargeStepDoesNotDiverge) {
    // scaling-and-squaring keeps ||A dt|| large inputs accurate
    const auto d = discretize(linear(Matrix::Constant(1, 1, -30.0), Matrix::Ones(1, 1)), 1.0);
    EXPECT_NEAR(d.A(0, 0), std::exp(-30.0), 1e-20);
}

TEST(Discretize, SemigroupProperty) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix A = oracle::random_matrix(rng, 4, 4);
        const auto m = linear(A, Matrix::Identity(4, 1));
        const double t1 = 0.3 + 0.1 * trial / 50.0, t2 = 0.7;
        const Matrix lhs = discretize(m, t1 + t2).A;
        const Matrix rhs = discretize(m, t1).A * discretize(m, t2).A;
        EXPECT_LT(oracle::rel_diff(lhs, rhs), 1e-8);
    }
}

TEST(Discretize, RejectsBadInput) {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = std::nan("");
    EXPECT_THROW((void)discretize(linear(A, Matrix::Zero(2, 1)), 0.1), InvalidModel);
    EXPECT_THROW((void)discretize(linear(Matrix::Zero(2, 2), Matrix::Zero(2, 1)), 0.0), InvalidModel);
}

TEST(Observability, LateralModelMatrix) {
    const double v = 2, L = 1;
    const auto m = std::get<LinearStateSpace>(model_library("lateral", {{"v", v}, {"L", L}, {"tau_beta", 0.5}}));
    const Matrix O = observability_matrix(m.A, lateral_measurement());
    Matrix expected(3, 3);
    expected << 1, 0, 0, 0, v, 0, 0, 0, v * v / L;
    EXPECT_EQ(O, expected);
    EXPECT_TRUE(is_observable(m.A, lateral_measurement()));
}

TEST(Observability, IdentityAndScalar) {
    std::mt19937_64 rng(2);
    const Matrix A = oracle::random_matrix(rng, 3, 3);
    EXPECT_EQ(observability_matrix(A, Matrix::Identity(3, 3)).topRows(3), Matrix::Identity(3, 3));
    EXPECT_TRUE(is_observable(A, Matrix::Identity(3, 3)));
    const Matrix H = Matrix::Constant(1, 1, 2.5);
    EXPECT_EQ(observability_matrix(Matrix::Constant(1, 1, 7.0), H), H);
}

TEST(Observability, DoublePendulumObservable) {
    const auto dip =
        std::get<LinearStateSpace>(model_library("dip", {{"g", 10}, {"m1", 1}, {"m2", 1}, {"L1", 1}, {"L2", 1}}));
    EXPECT_TRUE(is_observable(dip.A, dip_measurement()));
    EXPECT_EQ(oracle::rank(observability_matrix(dip.A, dip_measurement())), 6);
}

TEST(Observability, CartOnlyPendulumUnobservable) {
    Matrix H = Matrix::Zero(1, 4);
    H(0, 2) = 1;
    const Matrix O = observability_matrix(sip().A, H);
    EXPECT_FALSE(is_observable(sip().A, H));
    EXPECT_EQ(numeric_rank(O), 2);
    EXPECT_EQ(oracle::rank(O), 2);
}

TEST(Observability, DualityWithControllability) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(1, 5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng), p = dim(rng);
        Matrix A = oracle::random_matrix(rng, n, n);
        Matrix H = oracle::random_matrix(rng, p, n);
        if (trial % 3 == 0) H.col(0).setZero(), A.row(0).setZero(), A.col(0).setZero();  // force some deficiency
        EXPECT_EQ(numeric_rank(observability_matrix(A, H)),
                  numeric_rank(controllability_matrix(A.transpose(), H.transpose())));
    }
}

TEST(PolePlacement, ScalarClosedForm) {
    const Vector K = pole_placement_gain(Matrix::Constant(1, 1, 3.0), Vector::Constant(1, 2.0), {{-1.0, 0.0}});
    EXPECT_NEAR(K(0), (3.0 - -1.0) / 2.0, 1e-14);
}

TEST(PolePlacement, InvertedPendulumGains) {
    const auto m = sip();
    const Vector K = pole_placement_gain(m.A, m.B.col(0), all_at(-4, 4));
    const double expected[] = {-131.60, -41.60, -25.60, -25.60};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(K(i), expected[i], 0.005);
    // (s+4)^4 = s^4 + 16 s^3 + 96 s^2 + 256 s + 256
    const auto c = oracle::char_poly(m.A - m.B * K.transpose());
    const double want[] = {256, 256, 96, 16, 1};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(static_cast<double>(c[static_cast<std::size_t>(i)]), want[i], 1e-9);
}

TEST(PolePlacement, RandomInstancesHitDesiredSpectrum) {
    std::mt19937_64 rng(3);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix A = oracle::random_matrix(rng, 3, 3);
        const Vector b = oracle::random_vector(rng, 3);
        if (oracle::rank(controllability_matrix(A, b), 1e-6) < 3) continue;
        const Vector K = pole_placement_gain(A, b, {{-1, 0}, {-2, 0}, {-3, 0}});
        Eigen::EigenSolver<Matrix> es(A - b * K.transpose());
        std::vector<double> ev;
        for (const auto& e : es.eigenvalues()) {
            EXPECT_NEAR(e.imag(), 0.0, 1e-6);
            ev.push_back(e.real());
        }
        std::sort(ev.begin(), ev.end());
        EXPECT_NEAR(ev[0], -3, 3e-6);
        EXPECT_NEAR(ev[1], -2, 2e-6);
        EXPECT_NEAR(ev[2], -1, 1e-6);
        ++checked;
    }
    EXPECT_GT(checked, 90);
}

TEST(PolePlacement, ComplexPairs) {
    std::mt19937_64 rng(8);
    const Matrix A = oracle::random_matrix(rng, 4, 4);
    const Vector b = oracle::random_vector(rng, 4);
    const Poles desired{{-1, 2}, {-1, -2}, {-3, 0.5}, {-3, -0.5}};
    const Vector K = pole_placement_gain(A, b, desired);
    EXPECT_TRUE(same_spectrum(A - b * K.transpose(), desired, 1e-6));
    const auto got = eigenvalues(A - b * K.transpose());
    for (const auto& d : desired) {
        double best = 1e9;
        for (const auto& g : got) best = std::min(best, std::abs(g - d));
        EXPECT_LT(best, 1e-6 * std::abs(d));
    }
}

TEST(PolePlacement, RepeatedPolesReportedExactly) {
    const auto m = sip();
    const Vector K = pole_placement_gain(m.A, m.B.col(0), all_at(-4, 4));
    for (const auto& e : eigenvalues(m.A - m.B * K.transpose())) EXPECT_NEAR(std::abs(e - std::complex<double>(-4, 0)), 0.0, 1e-6);
}

TEST(PolePlacement, UncontrollableRejected) {
    Matrix A = Matrix::Identity(2, 2);
    Vector b(2);
    b << 1, 0;
    EXPECT_THROW((void)pole_placement_gain(A, b, {{-1, 0}, {-2, 0}}), GainDesignError);
    EXPECT_THROW((void)pole_placement_gain(A, b, {{-1, 1}, {-2, 0}}), GainDesignError);
}

TEST(ObserverGain, DecoupledPendulumGains) {
    const auto m = sip();
    const Matrix L = observer_gain(m.A, sip_measurement(), all_at(-4, 4), {{{0, 1}, 0}, {{2, 3}, 1}});
    Matrix expected(4, 2);
    expected << 8, 0, 26, 0, 0, 8, 0, 16;
    EXPECT_LT((L - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ObserverGain, ThetaSubsystemHandExpansion) {
    Matrix A1(2, 2);
    A1 << 0, 1, 10, 0;
    Matrix H1(1, 2);
    H1 << 1, 0;
    const Matrix L = observer_gain(A1, H1, all_at(-4, 2));
    // s^2 + l1 s + (l2 - 10) = s^2 + 8 s + 16
    EXPECT_NEAR(L(0, 0), 8, 1e-10);
    EXPECT_NEAR(L(1, 0), 26, 1e-10);
}

TEST(ObserverGain, SingleOutputIsDual) {
    std::mt19937_64 rng(4);
    const Matrix A = oracle::random_matrix(rng, 3, 3);
    const Matrix H = oracle::random_matrix(rng, 1, 3);
    const Poles p{{-1, 0}, {-2, 0}, {-5, 0}};
    const Matrix L = observer_gain(A, H, p);
    const Vector dual = pole_placement_gain(A.transpose(), H.transpose(), p);
    EXPECT_LT((L.col(0) - dual).norm(), 1e-12);
    EXPECT_TRUE(same_spectrum(A - L * H, p, 1e-6));
}

TEST(ObserverGain, Rejections) {
    const auto m = sip();
    EXPECT_THROW((void)observer_gain(m.A, sip_measurement(), all_at(-4, 4)), GainDesignError);
    EXPECT_THROW((void)observer_gain(m.A, sip_measurement(), all_at(-4, 4), {{{0, 1, 2}, 0}, {{2, 3}, 1}}),
                 GainDesignError);
    // a block that cannot see its states
    EXPECT_THROW((void)observer_gain(m.A, sip_measurement(), all_at(-4, 4), {{{0, 1}, 1}, {{2, 3}, 0}}),
                 GainDesignError);
    Matrix H = Matrix::Zero(1, 4);
    H(0, 2) = 1;
    EXPECT_THROW((void)observer_gain(m.A, H, all_at(-4, 4)), GainDesignError);
}

TEST(ModelLibrary, MotionModels) {
    const double dt = 0.5;
    const auto ca = std::get<LinearStateSpace>(model_library("ca", {{"dt", dt}}));
    Matrix expected(3, 3);
    expected << 1, dt, dt * dt / 2, 0, 1, dt, 0, 0, 1;
    EXPECT_EQ(ca.A, expected);
    const auto unified = std::get<LinearStateSpace>(model_library("unified", {{"dt", dt}, {"var_a", 0.3}}));
    EXPECT_EQ(unified.A, ca.A);
    EXPECT_EQ(unified.B, Matrix::Identity(3, 3));
    // with dp = dv = 0 the unified model is the CA model driven by da
    Vector x(3), da(3);
    x << 1, 2, 3;
    da << 0, 0, 0.7;
    EXPECT_LT((unified.A * x + unified.B * da - (ca.A * x + ca.B * Vector::Constant(1, 0.7))).norm(), 1e-15);
    EXPECT_NEAR(unified.sigma_u(2, 2), 0.3, 0);
    EXPECT_EQ(unified.sigma_u(0, 0), 0.0);

    const auto cv = std::get<LinearStateSpace>(model_library("cv", {{"dt", dt}}));
    Vector pv(2);
    pv << 4, -2;
    const Vector next = cv.A * pv;
    EXPECT_DOUBLE_EQ(next(0), 4 + -2 * dt);
    EXPECT_DOUBLE_EQ(next(1), -2);
    const auto cp = std::get<LinearStateSpace>(model_library("cp", {{"dt", dt}}));
    EXPECT_EQ(cp.A, Matrix::Identity(1, 1));
}

TEST(ModelLibrary, LandmarkRange) {
    const auto m = std::get<NonlinearMeasurementModel>(model_library("landmark_range", {{"x_L", 0}, {"y_L", 0}}));
    Vector s(3);
    s << 3, 4, 0.3;
    EXPECT_DOUBLE_EQ(m.h(s)(0), 5.0);
    const Matrix J = m.jac(s);
    EXPECT_NEAR(J(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(J(0, 1), 0.8, 1e-15);
    EXPECT_EQ(J(0, 2), 0.0);
}

TEST(ModelLibrary, ErrorsOnUnknownOrMissing) {
    EXPECT_THROW((void)model_library("warp_drive", {}), InvalidModel);
    EXPECT_THROW((void)model_library("ca", {}), InvalidModel);
    EXPECT_THROW((void)model_library("sip", {{"g", 10}}), InvalidModel);
}

TEST(ModelLibrary, BicycleEulerStepAndJacobians) {
    const auto bike = std::get<NonlinearSystemModel>(
        model_library("bicycle", {{"v", 2}, {"L", 2.5}, {"tau_beta", 0.3}, {"dt", 0.05}}));
    Vector s(4), u(1);
    s << 1, 2, 0.4, 0.1;
    u << 0.2;
    const Vector next = bike.g(s, u);
    EXPECT_NEAR(next(0), 1 + 0.05 * 2 * std::cos(0.4), 1e-15);
    EXPECT_NEAR(next(2), 0.4 + 0.05 * 2 / 2.5 * std::tan(0.1), 1e-15);
    EXPECT_NEAR(next(3), 0.1 + 0.05 * (0.2 - 0.1) / 0.3, 1e-15);

    const auto reduced =
        std::get<NonlinearSystemModel>(model_library("bicycle_reduced", {{"v", 2}, {"L", 2.5}, {"dt", 0.05}}));
    const auto range = std::get<NonlinearMeasurementModel>(model_library("landmark_range", {{"x_L", -1}, {"y_L", 3}}));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        Vector x4(4), x3(3), v(1);
        x4 << 5 * ud(rng), 5 * ud(rng), 3 * ud(rng), 0.5 * ud(rng);
        x3 = x4.head(3);
        v << 0.5 * ud(rng);
        EXPECT_LE(jacobian_error(bike, x4, v), 1e-4);
        EXPECT_LE(jacobian_error(reduced, x3, v), 1e-4);
        EXPECT_LE(jacobian_error(range, x3), 1e-4);
    }
}
