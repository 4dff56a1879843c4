#pragma once

#include "estkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace estkit {

struct Degeneracy : Error { using Error::Error; };

using Rng = std::mt19937_64;

// Weighted samples plus the generator that produced them. Copying a set
// copies the generator state, so replaying from a copy is bit-identical.
struct ParticleSet {
    std::vector<Vector> particles;
    Vector weights;
    Rng rng;

    [[nodiscard]] std::size_t size() const { return particles.size(); }

    [[nodiscard]] static ParticleSet from_samples(std::vector<Vector> samples, Rng rng) {
        const auto n = static_cast<Eigen::Index>(samples.size());
        if (n == 0) throw Error("particle set needs at least one particle");
        return {std::move(samples), Vector::Constant(n, 1.0 / static_cast<double>(n)), rng};
    }

    [[nodiscard]] Vector mean() const {
        Vector m = Vector::Zero(particles.front().size());
        for (std::size_t i = 0; i < particles.size(); ++i) m += weights(static_cast<Eigen::Index>(i)) * particles[i];
        return m;
    }

    [[nodiscard]] Matrix covariance() const {
        const Vector m = mean();
        Matrix c = Matrix::Zero(m.size(), m.size());
        for (std::size_t i = 0; i < particles.size(); ++i) {
            const Vector d = particles[i] - m;
            c += weights(static_cast<Eigen::Index>(i)) * d * d.transpose();
        }
        return c;
    }
};

// Importance proposal q(x | x'). Leaving density and transition_density empty
// declares q equal to the transition prior, so only the likelihood reweights.
struct ProposalModel {
    std::function<Vector(const Vector& old, Rng& rng)> sample;
    std::function<double(const Vector& next, const Vector& old)> density;
    std::function<double(const Vector& next, const Vector& old)> transition_density;
    std::function<double(const Vector& z, const Vector& particle)> likelihood;

    [[nodiscard]] bool is_transition() const { return !density && !transition_density; }
};

enum class ResampleMethod { multinomial, systematic };

[[nodiscard]] inline double effective_sample_size(const Vector& weights) {
    return 1.0 / weights.squaredNorm();
}

namespace detail {

inline std::vector<double> cumulative(const Vector& w) {
    std::vector<double> c(static_cast<std::size_t>(w.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) c[static_cast<std::size_t>(i)] = (acc += w(i));
    c.back() = std::numeric_limits<double>::infinity();  // absorb rounding in the last bin
    return c;
}

inline std::size_t pick(const std::vector<double>& cdf, double u) {
    return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

} // namespace detail

[[nodiscard]] inline ParticleSet resample(const ParticleSet& set,
                                          ResampleMethod method = ResampleMethod::multinomial) {
    const auto n = set.size();
    ParticleSet out{{}, Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)), set.rng};
    out.particles.reserve(n);
    const auto cdf = detail::cumulative(set.weights / set.weights.sum());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (method == ResampleMethod::multinomial) {
        for (std::size_t i = 0; i < n; ++i) out.particles.push_back(set.particles[detail::pick(cdf, unit(out.rng))]);
    } else {
        const double start = unit(out.rng) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            out.particles.push_back(
                set.particles[detail::pick(cdf, start + static_cast<double>(i) / static_cast<double>(n))]);
    }
    return out;
}

namespace detail {

// Multiplies the weights by the per-particle factors and normalizes. If the
// products underflow, the same update is redone on logs.
inline Vector reweight(const Vector& prior, const std::vector<std::vector<double>>& factors) {
    const auto n = prior.size();
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = prior(i);
        for (double f : factors[static_cast<std::size_t>(i)]) v *= f;
        w(i) = v;
    }
    if (!w.allFinite() || (w.array() < 0).any()) throw Degeneracy("weight update produced invalid values");
    if (w.maxCoeff() >= 1e-250) return w / w.sum();

    Vector logw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = std::log(prior(i));
        for (double f : factors[static_cast<std::size_t>(i)]) v += std::log(f);
        logw(i) = v;
    }
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) throw Degeneracy("total particle weight underflowed");
    w = (logw.array() - top).exp().matrix();
    return w / w.sum();
}

} // namespace detail

struct PfOptions {
    ResampleMethod method = ResampleMethod::multinomial;
};

// Propose, reweight by p(z|x) p(x|x') / q(x|x'), normalize, and resample when
// the effective sample size drops below n_thr.
[[nodiscard]] inline ParticleSet pf_step(const ParticleSet& set, const ProposalModel& proposal, const Vector& z,
                                         double n_thr, const PfOptions& opt = {}) {
    const auto n = set.size();
    if (n == 0) throw Error("particle set is empty");
    if (!(n_thr >= 1.0 && n_thr <= static_cast<double>(n))) throw Error("n_thr must lie in [1, N]");
    ParticleSet next{{}, set.weights, set.rng};
    next.particles.reserve(n);
    std::vector<std::vector<double>> factors(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector& old = set.particles[i];
        Vector x = proposal.sample(old, next.rng);
        factors[i].push_back(proposal.likelihood(z, x));
        if (!proposal.is_transition()) {
            factors[i].push_back(proposal.transition_density(x, old));
            factors[i].push_back(1.0 / proposal.density(x, old));
        }
        next.particles.push_back(std::move(x));
    }
    next.weights = detail::reweight(set.weights, factors);
    if (effective_sample_size(next.weights) < n_thr) return resample(next, opt.method);
    return next;
}

// Generic sequential importance sampling step: the caller supplies the
// target-over-proposal ratio for each propagated particle.
[[nodiscard]] inline ParticleSet sis_step(const ParticleSet& set, const ProposalModel& proposal,
                                          const std::function<double(const Vector& next, const Vector& old)>& ratio,
                                          std::optional<double> n_thr = {}, const PfOptions& opt = {}) {
    const auto n = set.size();
    if (n == 0) throw Error("particle set is empty");
    ParticleSet next{{}, set.weights, set.rng};
    next.particles.reserve(n);
    std::vector<std::vector<double>> factors(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vector x = proposal.sample(set.particles[i], next.rng);
        factors[i].push_back(ratio(x, set.particles[i]));
        next.particles.push_back(std::move(x));
    }
    next.weights = detail::reweight(set.weights, factors);
    if (n_thr && effective_sample_size(next.weights) < *n_thr) return resample(next, opt.method);
    return next;
}

} // namespace estkit
