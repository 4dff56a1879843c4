#include "estkit/kalman.hpp"
#include "estkit/particle.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace estkit;

namespace {

std::vector<Vector> scalars(std::initializer_list<double> v) {
    std::vector<Vector> out;
    for (double x : v) out.push_back(Vector::Constant(1, x));
    return out;
}

ParticleSet weighted(std::vector<Vector> pts, Vector w, std::uint64_t seed) {
    auto s = ParticleSet::from_samples(std::move(pts), Rng(seed));
    s.weights = w / w.sum();
    return s;
}

ProposalModel random_walk(double step_sd, double meas_sd) {
    ProposalModel p;
    p.sample = [=](const Vector& x, Rng& rng) {
        std::normal_distribution<double> nd(0.0, step_sd);
        Vector y = x;
        for (auto& v : y) v += nd(rng);
        return y;
    };
    p.likelihood = [=](const Vector& z, const Vector& x) {
        return oracle::normal_pdf(z(0), x(0), meas_sd * meas_sd);
    };
    return p;
}

} // namespace

TEST(EffectiveSampleSize, Bounds) {
    EXPECT_DOUBLE_EQ(effective_sample_size(Vector::Constant(8, 1.0 / 8)), 8.0);
    EXPECT_DOUBLE_EQ(effective_sample_size(Vector::Unit(8, 3)), 1.0);
    Vector w(2);
    w << 0.8, 0.2;
    EXPECT_NEAR(effective_sample_size(w), 1.0 / 0.68, 1e-14);
}

TEST(Resample, OneHotCopies) {
    Vector w = Vector::Zero(5);
    w(2) = 1;
    const auto out = resample(weighted(scalars({0, 1, 2, 3, 4}), w, 1));
    for (const auto& p : out.particles) EXPECT_EQ(p(0), 2.0);
    for (double v : out.weights) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Resample, MultinomialFrequencies) {
    const int N = 10000;
    std::vector<Vector> pts;
    Vector w(N);
    for (int i = 0; i < N; ++i) {
        pts.push_back(Vector::Constant(1, i % 4));
        w(i) = 1 + i % 4;
    }
    const auto out = resample(weighted(pts, w, 7));
    std::array<int, 4> counts{};
    for (const auto& p : out.particles) ++counts[static_cast<std::size_t>(p(0))];
    for (int k = 0; k < 4; ++k) {
        const double prob = 0.1 * (k + 1);
        const double sd = std::sqrt(N * prob * (1 - prob));
        EXPECT_NEAR(counts[static_cast<std::size_t>(k)], N * prob, 3 * sd) << k;
    }
}

TEST(Resample, PreservesMeanInExpectation) {
    std::mt19937_64 rng(3);
    const int N = 200;
    std::vector<Vector> pts;
    Vector w(N);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int i = 0; i < N; ++i) {
        pts.push_back(oracle::random_vector(rng, 1, 2.0));
        w(i) = unit(rng);
    }
    auto set = weighted(pts, w, 11);
    const double target = set.mean()(0);
    std::vector<double> means;
    for (int r = 0; r < 200; ++r) {
        const auto out = resample(set);
        means.push_back(out.mean()(0));
        set.rng = out.rng;
    }
    double avg = 0, var = 0;
    for (double m : means) avg += m / 200;
    for (double m : means) var += (m - avg) * (m - avg) / 199;
    EXPECT_NEAR(avg, target, 3 * std::sqrt(var / 200));
}

TEST(Resample, SystematicIsUniformAndDeterministic) {
    const auto set = weighted(scalars({0, 1, 2, 3}), Vector::Constant(4, 0.25), 9);
    const auto a = resample(set, ResampleMethod::systematic);
    const auto b = resample(set, ResampleMethod::systematic);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.particles[i](0), static_cast<double>(i));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.particles[i], b.particles[i]);
}

TEST(PfStep, ThresholdRangeChecked) {
    const auto set = ParticleSet::from_samples(scalars({0, 1}), Rng(1));
    const auto prop = random_walk(1, 1);
    EXPECT_THROW((void)pf_step(set, prop, Vector::Zero(1), 0.5), Error);
    EXPECT_THROW((void)pf_step(set, prop, Vector::Zero(1), 3.0), Error);
}

TEST(PfStep, ConstantLikelihoodLeavesWeights) {
    auto prop = random_walk(1, 1);
    prop.likelihood = [](const Vector&, const Vector&) { return 0.3; };
    Vector w(3);
    w << 0.2, 0.3, 0.5;
    const auto out = pf_step(weighted(scalars({0, 1, 2}), w, 2), prop, Vector::Zero(1), 1.0);
    EXPECT_LT((out.weights - w).norm(), 1e-15);
}

TEST(PfStep, TransitionProposalWeightsAreLikelihoods) {
    const auto prop = random_walk(0.5, 1.0);
    const auto set = ParticleSet::from_samples(scalars({-1, 0, 1, 2}), Rng(4));
    const Vector z = Vector::Constant(1, 0.7);
    const auto out = pf_step(set, prop, z, 1.0);
    Vector expect(4);
    for (int i = 0; i < 4; ++i) expect(i) = oracle::normal_pdf(0.7, out.particles[static_cast<std::size_t>(i)](0), 1);
    expect /= expect.sum();
    EXPECT_LT((out.weights - expect).norm(), 1e-14);
}

TEST(PfStep, ExplicitDensitiesMatchBootstrap) {
    // q = p written out explicitly must reweight exactly as the bootstrap form.
    auto boot = random_walk(0.5, 1.0);
    auto expl = boot;
    const auto dens = [](const Vector& x, const Vector& o) { return oracle::normal_pdf(x(0), o(0), 0.25); };
    expl.density = dens;
    expl.transition_density = dens;
    const auto set = ParticleSet::from_samples(scalars({-1, 0, 1, 2}), Rng(4));
    const auto a = pf_step(set, boot, Vector::Constant(1, 0.7), 1.0);
    const auto b = pf_step(set, expl, Vector::Constant(1, 0.7), 1.0);
    EXPECT_LT((a.weights - b.weights).norm(), 1e-14);
}

TEST(PfStep, LogDomainFallback) {
    // Each factor is representable but their product is not.
    auto prop = random_walk(0.0, 1.0);
    prop.likelihood = [](const Vector&, const Vector& x) { return 1e-200 * std::exp(-x(0)); };
    prop.transition_density = [](const Vector&, const Vector&) { return 1e-150; };
    prop.density = [](const Vector&, const Vector&) { return 1.0; };
    const auto out = pf_step(ParticleSet::from_samples(scalars({0, 1}), Rng(1)), prop, Vector::Zero(1), 1.0);
    EXPECT_NEAR(out.weights(0), 1 / (1 + std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(out.weights.sum(), 1.0, 1e-12);
}

TEST(PfStep, TotalUnderflowThrows) {
    auto prop = random_walk(0.0, 1.0);
    prop.likelihood = [](const Vector&, const Vector&) { return 0.0; };
    EXPECT_THROW((void)pf_step(ParticleSet::from_samples(scalars({0, 1}), Rng(1)), prop, Vector::Zero(1), 1.0),
                 Degeneracy);
}

TEST(PfStep, SeedDeterminism) {
    const auto prop = random_walk(1.0, 0.5);
    auto run = [&] {
        auto set = ParticleSet::from_samples(scalars({0, 0, 0, 0, 0, 0, 0, 0}), Rng(42));
        for (int k = 0; k < 20; ++k) set = pf_step(set, prop, Vector::Constant(1, 0.1 * k), 6.0);
        return set;
    };
    const auto a = run(), b = run();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.particles[i], b.particles[i]);
    EXPECT_EQ(a.weights, b.weights);
}

TEST(PfStep, TracksScalarKalmanFilter) {
    const int N = 20000;
    const double q = 0.5, r = 0.5;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<Vector> init;
    for (int i = 0; i < N; ++i) init.push_back(Vector::Constant(1, nd(rng)));
    auto set = ParticleSet::from_samples(init, Rng(6));
    GaussianEstimate kf{Vector::Zero(1), Matrix::Identity(1, 1)};
    const LinearStateSpace sys{Matrix::Identity(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                               Matrix::Constant(1, 1, q * q)};
    const LinearMeasurementModel meas{Matrix::Identity(1, 1), Matrix::Constant(1, 1, r * r)};
    const auto prop = random_walk(q, r);
    double x = 0;
    int within = 0;
    for (int k = 0; k < 30; ++k) {
        x += q * nd(rng);
        const Vector z = Vector::Constant(1, x + r * nd(rng));
        set = pf_step(set, prop, z, 1.0);
        const double neff = effective_sample_size(set.weights);
        kf = kf_update(kf_predict(kf, sys, Vector::Zero(1)), meas, z);
        within += std::abs(set.mean()(0) - kf.mean(0)) <= 3 * std::sqrt(kf.cov(0, 0)) / std::sqrt(neff);
        if (neff < N / 2.0) set = resample(set, ResampleMethod::systematic);
    }
    EXPECT_GE(within, 28);
}

TEST(SisStep, UnitRatioKeepsUniformWeights) {
    const auto prop = random_walk(1.0, 1.0);
    const auto set = ParticleSet::from_samples(scalars({0, 1, 2}), Rng(1));
    const auto same = sis_step(set, prop, [](const Vector&, const Vector&) { return 1.0; });
    const auto scaled = sis_step(set, prop, [](const Vector&, const Vector&) { return 7.5; });
    for (double w : same.weights) EXPECT_NEAR(w, 1.0 / 3, 1e-15);
    for (double w : scaled.weights) EXPECT_NEAR(w, 1.0 / 3, 1e-15);
}

TEST(SisStep, UniformProposalGaussianTarget) {
    const int N = 100000;
    ProposalModel prop;
    prop.sample = [](const Vector&, Rng& rng) {
        return Vector::Constant(1, std::uniform_real_distribution<double>(-5, 5)(rng));
    };
    std::vector<Vector> init(N, Vector::Zero(1));
    const auto out = sis_step(ParticleSet::from_samples(init, Rng(8)), prop,
                              [](const Vector& x, const Vector&) { return oracle::normal_pdf(x(0), 0, 1) / 0.1; });
    EXPECT_NEAR(out.mean()(0), 0.0, 0.02);
    EXPECT_NEAR(out.weights.sum(), 1.0, 1e-9);
}
