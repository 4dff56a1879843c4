#include "scenarios.hpp"

#include "estkit/continuous.hpp"
#include "estkit/imm.hpp"
#include "estkit/kalman.hpp"
#include "estkit/mtt.hpp"
#include "estkit/nonlinear.hpp"
#include "estkit/particle.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace estkit::cli {
namespace {

using Rng = std::mt19937_64;

Vector gaussian_noise(Rng& rng, Eigen::Index n, double sigma = 1.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = sigma * nd(rng);
    return v;
}

// Draw from N(0, cov) with a possibly singular cov.
Vector correlated_noise(Rng& rng, const Matrix& sqrt_cov) { return sqrt_cov * gaussian_noise(rng, sqrt_cov.cols()); }

// Continuous white-acceleration noise of intensity q over one step, per axis.
Matrix cv_noise(double q, double dt) {
    Matrix Q(2, 2);
    Q << dt * dt * dt / 3, dt * dt / 2, dt * dt / 2, dt;
    return q * Q;
}

Matrix cv_transition(double dt) {
    Matrix A(2, 2);
    A << 1, dt, 0, 1;
    return A;
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Json json_vector(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json json_matrix(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(json_vector(m.row(i).transpose()));
    return a;
}

Json json_poles(const Poles& p) {
    Json a = Json::array();
    for (const auto& e : p) a.push_back(Json::array({e.real(), e.imag()}));
    return a;
}

Json json_report(const ConsistencyReport& r) {
    return Json{{"consistent", r.consistent},
                {"min_eigenvalue_of_difference", r.min_eigenvalue_of_difference},
                {"tolerance", r.tolerance},
                {"empirical_cov", json_matrix(r.empirical_cov)},
                {"reported_cov", json_matrix(r.reported_cov)}};
}

// Rounded for display; the exact values are what the library returns.
double tidy(double v) { return std::round(v * 1e9) / 1e9; }

std::size_t steps_of(const Config& cfg) { return static_cast<std::size_t>(cfg.integer("steps")); }

} // namespace

// ---------------------------------------------------------------------------

std::vector<ObservabilityLine> observability(const Config& cfg) {
    std::vector<ObservabilityLine> out;
    auto add = [&](std::string name, const Matrix& A, const Matrix& H) {
        ObservabilityLine l{std::move(name), observability_matrix(A, H), 0, A.rows(), false};
        l.rank = numeric_rank(l.O);
        l.observable = l.rank == l.states;
        out.push_back(std::move(l));
    };
    const auto dip = std::get<LinearStateSpace>(model_library(
        ModelName::dip,
        {{"g", cfg.num("g")}, {"m1", cfg.num("m1")}, {"m2", cfg.num("m2")}, {"L1", cfg.num("L1")}, {"L2", cfg.num("L2")}}));
    add("dip", dip.A, dip_measurement());
    const auto lateral = std::get<LinearStateSpace>(model_library(
        ModelName::lateral, {{"v", cfg.num("v")}, {"L", cfg.num("wheelbase")}, {"tau_beta", cfg.num("tau_beta")}}));
    add("lateral", lateral.A, lateral_measurement());
    const auto sip = std::get<LinearStateSpace>(
        model_library(ModelName::sip, {{"g", cfg.num("g")}, {"L", cfg.num("pendulum_length")}}));
    Matrix cart = Matrix::Zero(1, 4);
    cart(0, 2) = 1;
    add("sip_cart_only", sip.A, cart);
    return out;
}

// ---------------------------------------------------------------------------

SipOutcome sip_control(const Config& cfg, std::uint64_t seed) {
    const double dt = cfg.num("dt");
    const double g = cfg.num("g"), len = cfg.num("pendulum_length");
    const auto model = std::get<LinearStateSpace>(model_library(ModelName::sip, {{"g", g}, {"L", len}}));
    const Matrix H = sip_measurement();
    const Poles desired(4, {cfg.num("pole"), 0.0});

    SipOutcome out;
    out.K = pole_placement_gain(model.A, model.B.col(0), desired);
    out.L = observer_gain(model.A, H, desired, {{{0, 1}, 0}, {{2, 3}, 1}});
    const auto stability = augmented_stability(model.A, model.B, out.K, out.L, H);
    out.controller_eigs = stability.controller_eigs;
    out.observer_eigs = stability.observer_eigs;
    out.augmented_eigs = eigenvalues(augmented_matrix(model.A, model.B, out.K, out.L, H));

    Rng rng(seed);
    const double meas_sigma = cfg.num("meas_sigma"), init_sigma = cfg.num("init_sigma");
    Vector x = vec({cfg.num("theta0"), 0.0, cfg.num("x0"), 0.0});
    ContinuousEstimatorState s{x + gaussian_noise(rng, 4, init_sigma), Matrix::Identity(4, 4) * init_sigma * init_sigma,
                               0.0};

    const bool bucy = cfg.str("observer") == "kalman_bucy";
    // Sampled noise of standard deviation sigma every dt has spectral density sigma^2 dt.
    const LinearMeasurementModel meas{H, Matrix::Identity(2, 2) * std::max(meas_sigma * meas_sigma * dt, 1e-300)};
    const Matrix sigma_e = bucy ? Matrix(Matrix::Identity(4, 4) * cfg.num("sigma_e")) : Matrix();

    const auto steps = static_cast<long>(std::llround(cfg.num("horizon") / dt));
    const long every = cfg.integer("record_every");
    out.trace.name = "sip-control";
    auto record = [&](double u) {
        TraceRecord r{s.t, x, s.x_hat, bucy ? Vector(s.sigma_hat.diagonal()) : Vector(), {{"u", u}}};
        out.trace.records.push_back(std::move(r));
    };
    record(0.0);
    for (long k = 1; k <= steps; ++k) {
        const Vector z = H * x + gaussian_noise(rng, 2, meas_sigma);
        double u = 0.0;
        if (bucy) {
            u = -out.K.dot(s.x_hat);
            s = kalman_bucy_step(s, model, meas, sigma_e, Vector::Constant(1, u), z, dt);
        } else {
            const ControlStep step = integrated_control_step(s, model, meas, out.K, out.L, z, dt);
            u = step.u(0);
            s = step.state;
        }
        // nonlinear cart-pendulum truth, forward Euler
        const double theta_dd = (g * std::sin(x(0)) - u * std::cos(x(0))) / len;
        x += dt * vec({x(1), theta_dd, x(3), u});
        s.t = static_cast<double>(k) * dt;
        if (k % every == 0 || k == steps) record(u);
        if (std::abs(x(0)) >= std::numbers::pi / 2) {
            out.failed = true;
            if (k % every != 0 && k != steps) record(u);
            break;
        }
    }
    out.t_end = s.t;
    out.final_truth = x;
    return out;
}

// ---------------------------------------------------------------------------

ImmOutcome imm_track(const Config& cfg, std::uint64_t seed) {
    const double dt = cfg.num("dt"), speed = cfg.num("speed"), r = cfg.num("meas_var");
    const Matrix B = Matrix::Identity(3, 3);
    // CP and CV are embedded in the CA state [p, v, a] with the unused rates pinned to zero.
    Matrix cp = Matrix::Zero(3, 3), cv = Matrix::Zero(3, 3);
    cp(0, 0) = 1;
    cv.topLeftCorner(2, 2) = cv_transition(dt);
    const Matrix ca = std::get<LinearStateSpace>(model_library(ModelName::ca, {{"dt", dt}})).A;
    auto noise = [](Eigen::Index i, double v) {
        Matrix m = Matrix::Zero(3, 3);
        m(i, i) = v;
        return m;
    };
    const LinearMeasurementModel meas{(Matrix(1, 3) << 1, 0, 0).finished(), Matrix::Constant(1, 1, r)};

    ImmBank bank;
    bank.models = {{LinearStateSpace{cp, B, noise(0, cfg.num("var_p")), std::nullopt}, meas},
                   {LinearStateSpace{cv, B, noise(1, cfg.num("var_v")), std::nullopt}, meas},
                   {LinearStateSpace{ca, B, noise(2, cfg.num("var_a")), std::nullopt}, meas}};
    const double stay = cfg.num("p_stay");
    bank.transition = Matrix::Constant(3, 3, (1 - stay) / 2);
    bank.transition.diagonal().setConstant(stay);
    bank.weights = Vector::Constant(3, 1.0 / 3.0);
    const GaussianEstimate init{Vector::Zero(3), Matrix::Identity(3, 3) * cfg.num("init_var")};
    bank.estimates = {init, init, init};

    ImmConfig icfg;
    icfg.likelihood = cfg.str("likelihood") == "prior" ? ImmLikelihood::prior : ImmLikelihood::posterior;

    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(r));
    ImmOutcome out;
    out.trace.name = "imm-track";
    const Vector u = Vector::Zero(3);
    for (std::size_t k = 1; k <= steps_of(cfg); ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vector truth = vec({speed * t, speed, 0.0});
        const Vector z = Vector::Constant(1, truth(0) + nd(rng));
        const ImmStep step = imm_step(bank, u, z, icfg);
        bank = step.bank;
        out.trace.records.push_back({t,
                                     truth,
                                     step.output.mean,
                                     step.output.cov.diagonal(),
                                     {{"w_ca", bank.weights(2)}, {"w_cp", bank.weights(0)}, {"w_cv", bank.weights(1)}}});
    }
    out.final_weights = bank.weights;
    return out;
}

// ---------------------------------------------------------------------------

PfOutcome pf_vs_kf(const Config& cfg, std::uint64_t seed) {
    const double dt = cfg.num("dt"), r = cfg.num("meas_var");
    const auto n_particles = static_cast<std::size_t>(cfg.integer("particles"));
    const Matrix A = cv_transition(dt);
    const Matrix Q = vec({cfg.num("q_p"), cfg.num("q_v")}).asDiagonal();
    const Matrix Qs = Q.cwiseSqrt();
    const LinearStateSpace model{A, Matrix::Identity(2, 2), Q, std::nullopt};
    // Position only, or both coordinates with independent noise.
    const bool full = cfg.str("observed") == "state";
    const Matrix H = full ? Matrix(Matrix::Identity(2, 2)) : Matrix((Matrix(1, 2) << 1, 0).finished());
    const LinearMeasurementModel meas{H, Matrix::Identity(H.rows(), H.rows()) * r};
    const ResampleMethod method =
        cfg.str("method") == "multinomial" ? ResampleMethod::multinomial : ResampleMethod::systematic;

    Rng rng(seed);
    GaussianEstimate kf{vec({0.0, 1.0}), Matrix::Identity(2, 2) * cfg.num("init_var")};
    const Matrix P0s = kf.cov.cwiseSqrt();
    Vector truth = kf.mean + correlated_noise(rng, P0s);

    std::vector<Vector> samples;
    samples.reserve(n_particles);
    for (std::size_t i = 0; i < n_particles; ++i) samples.push_back(kf.mean + correlated_noise(rng, P0s));
    ParticleSet pf = ParticleSet::from_samples(std::move(samples), Rng(seed ^ 0x9e3779b97f4a7c15ULL));

    // Either the transition prior (bootstrap filter) or the locally optimal
    // proposal p(x_k | x_{k-1}, z_k), which is Gaussian for this model.
    Vector z_now = Vector::Zero(H.rows());
    const Matrix Qinv = spd_inverse(Q, "process noise");
    const Matrix opt_cov = spd_inverse(Qinv + meas.H.transpose() * meas.H / r, "proposal information");
    const Matrix opt_sqrt = Eigen::LLT<Matrix>(opt_cov).matrixL();
    auto opt_mean = [&](const Vector& old) -> Vector {
        return opt_cov * (Qinv * (A * old) + meas.H.transpose() * z_now / r);
    };
    auto draw = [](estkit::Rng& g, const Vector& mean, const Matrix& sqrt_cov) -> Vector {
        std::normal_distribution<double> nd(0.0, 1.0);
        const double e0 = nd(g), e1 = nd(g);
        return mean + sqrt_cov * vec({e0, e1});
    };
    ProposalModel proposal;
    const double norm = std::pow(2 * std::numbers::pi * r, -0.5 * static_cast<double>(H.rows()));
    proposal.likelihood = [&](const Vector& z, const Vector& x) {
        return norm * std::exp(-0.5 * (z - H * x).squaredNorm() / r);
    };
    if (cfg.str("proposal") == "optimal") {
        proposal.sample = [&](const Vector& old, estkit::Rng& g) { return draw(g, opt_mean(old), opt_sqrt); };
        proposal.density = [&](const Vector& x, const Vector& old) { return gaussian_pdf(x, opt_mean(old), opt_cov); };
        proposal.transition_density = [&](const Vector& x, const Vector& old) {
            return gaussian_pdf(x, A * old, Q);
        };
    } else {
        proposal.sample = [&](const Vector& old, estkit::Rng& g) { return draw(g, A * old, Qs); };
    }

    PfOutcome out;
    out.trace.name = "pf-vs-kf";
    out.min_neff = static_cast<double>(n_particles);
    for (std::size_t k = 1; k <= steps_of(cfg); ++k) {
        truth = A * truth + correlated_noise(rng, Qs);
        const Vector z = H * truth + gaussian_noise(rng, H.rows(), std::sqrt(r));
        kf = kf_update(kf_predict(kf, model, Vector::Zero(2)), meas, z);
        // n_thr = 1 never triggers resampling inside the step, so the weighted
        // set (and its N_eff) is available for the comparison.
        z_now = z;
        pf = pf_step(pf, proposal, z, 1.0);
        const Vector mean = pf.mean();
        const double neff = effective_sample_size(pf.weights);
        out.min_neff = std::min(out.min_neff, neff);
        bool inside = true;
        Vector bound(2);
        for (Eigen::Index i = 0; i < 2; ++i) {
            bound(i) = 3 * std::sqrt(kf.cov(i, i)) / std::sqrt(neff);
            inside = inside && std::abs(mean(i) - kf.mean(i)) <= bound(i);
        }
        ++out.steps;
        if (inside) ++out.within;
        out.trace.records.push_back({static_cast<double>(k) * dt,
                                     truth,
                                     mean,
                                     pf.covariance().diagonal(),
                                     {{"bound_0", bound(0)},
                                      {"bound_1", bound(1)},
                                      {"kf_0", kf.mean(0)},
                                      {"kf_1", kf.mean(1)},
                                      {"kf_var_0", kf.cov(0, 0)},
                                      {"kf_var_1", kf.cov(1, 1)},
                                      {"n_eff", neff}}});
        if (neff < cfg.num("resample_fraction") * static_cast<double>(n_particles)) pf = resample(pf, method);
    }
    return out;
}

// ---------------------------------------------------------------------------

// Nodes on a ring track one constant-velocity target, each measuring position
// with its own sensor and exchanging estimates with the next node every step.
// Three pipelines run on identical data: Split CIF, naive fusion that treats
// the neighbour as independent, and a federated filter (shared prior expanded
// by 1/beta_i, local KF updates, information-sum master).
CifOutcome cif_network(const Config& cfg, std::uint64_t seed) {
    const double dt = cfg.num("dt"), r = cfg.num("meas_var"), init_var = cfg.num("init_var");
    const auto nodes = static_cast<std::size_t>(cfg.integer("nodes"));
    const auto runs = static_cast<std::size_t>(cfg.integer("runs"));
    const std::size_t steps = steps_of(cfg);
    require(nodes >= 2, "cif-network needs at least two nodes");

    const Matrix A = cv_transition(dt);
    const Matrix Q = cv_noise(cfg.num("q"), dt);
    const Matrix Qs = Eigen::LLT<Matrix>(Q).matrixL();
    const Matrix H = (Matrix(1, 2) << 1, 0).finished();
    const Matrix R = Matrix::Constant(1, 1, r);
    const LinearStateSpace model{A, Matrix::Zero(2, 1), Matrix::Zero(1, 1), Q};
    const LinearMeasurementModel meas{H, R};
    const std::vector<double> beta(nodes, 1.0 / static_cast<double>(nodes));
    const LinearStateSpace local_model{A, Matrix::Zero(2, 1), Matrix::Zero(1, 1), Q / beta[0]};
    const Vector u0 = Vector::Zero(1);

    std::vector<std::pair<GaussianEstimate, Vector>> split_final, naive_final, fed_final;
    CifOutcome out;
    out.trace.name = "cif-network";
    Rng rng(seed);
    for (std::size_t run = 0; run < runs; ++run) {
        Vector truth = vec({0.0, 1.0});
        const Vector m0 = truth + gaussian_noise(rng, 2, std::sqrt(init_var));
        const Matrix P0 = Matrix::Identity(2, 2) * init_var;
        // The shared initial error is common to every node, so it is dependent.
        std::vector<SplitEstimate> split(nodes, SplitEstimate{m0, P0, Matrix::Zero(2, 2)});
        std::vector<GaussianEstimate> naive(nodes, GaussianEstimate{m0, P0});
        GaussianEstimate master{m0, P0};

        for (std::size_t k = 1; k <= steps; ++k) {
            truth = A * truth + Qs * gaussian_noise(rng, 2);
            std::vector<Vector> z(nodes);
            for (auto& zi : z) zi = H * truth + gaussian_noise(rng, 1, std::sqrt(r));

            std::vector<SplitEstimate> split_local(nodes);
            std::vector<GaussianEstimate> naive_local(nodes);
            for (std::size_t i = 0; i < nodes; ++i) {
                // Process noise hits every node's error identically: dependent.
                SplitEstimate pred{A * split[i].mean, symmetrize(A * split[i].total() * A.transpose() + Q),
                                   Matrix::Zero(2, 2)};
                split_local[i] = split_cif_partial(pred, {z[i], Matrix::Zero(1, 1), R}, H);
                naive_local[i] = kf_update(kf_predict(naive[i], model, u0), meas, z[i]);
            }
            double w_sum = 0.0;
            for (std::size_t i = 0; i < nodes; ++i) {
                const std::size_t j = (i + 1) % nodes;
                const SplitFusion f = split_cif_fuse_weighted(split_local[i], split_local[j]);
                split[i] = f.estimate;
                w_sum += f.w;
                naive[i] = fuse_full(naive_local[i], naive_local[j]);
            }

            const auto expanded = federated_expand(master.cov, beta);
            GaussianEstimate fused;
            for (std::size_t i = 0; i < nodes; ++i) {
                const GaussianEstimate local =
                    kf_update(kf_predict({master.mean, expanded[i]}, local_model, u0), meas, z[i]);
                fused = i == 0 ? local : fuse_full(fused, local);
            }
            master = fused;

            if (run == 0) {
                out.trace.records.push_back({static_cast<double>(k) * dt,
                                             truth,
                                             split[0].mean,
                                             split[0].total().diagonal(),
                                             {{"fed_p", master.mean(0)},
                                              {"fed_var_p", master.cov(0, 0)},
                                              {"mean_w", w_sum / static_cast<double>(nodes)},
                                              {"naive_p", naive[0].mean(0)},
                                              {"naive_var_p", naive[0].cov(0, 0)}}});
            }
        }
        split_final.emplace_back(split[0].gaussian(), truth);
        naive_final.emplace_back(naive[0], truth);
        fed_final.emplace_back(master, truth);
    }
    out.split = consistency_audit(split_final);
    out.naive = consistency_audit(naive_final);
    out.federated = consistency_audit(fed_final);
    return out;
}

// ---------------------------------------------------------------------------

CircularReasoningTable circular_reasoning(const Config& cfg) {
    const GaussianEstimate seed{Vector::Zero(1), Matrix::Constant(1, 1, cfg.num("variance"))};
    return circular_reasoning_demo(static_cast<int>(cfg.integer("rounds")), seed);
}

// ---------------------------------------------------------------------------

// Two constant-velocity targets in the plane whose paths cross mid-run.
PhdOutcome phd_track(const Config& cfg, std::uint64_t seed) {
    const double dt = cfg.num("dt"), region = cfg.num("region"), r = cfg.num("meas_var");
    const double pd = cfg.num("p_detect"), clutter_rate = cfg.num("clutter_rate");
    const std::size_t steps = steps_of(cfg);

    Matrix A = Matrix::Zero(4, 4), Q = Matrix::Zero(4, 4);
    for (int axis = 0; axis < 2; ++axis) {
        A.block(2 * axis, 2 * axis, 2, 2) = cv_transition(dt);
        Q.block(2 * axis, 2 * axis, 2, 2) = cv_noise(cfg.num("q"), dt);
    }
    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = 1;
    H(1, 2) = 1;

    // Both paths meet at the origin halfway through the run.
    const double half = static_cast<double>(steps) * dt / 2;
    const std::vector<Vector> starts{vec({-40, 40 / half, -10, 10 / half}), vec({-40, 40 / half, 10, -10 / half})};

    PhdConfig pc;
    pc.p_survive = cfg.num("p_survive");
    pc.p_detect = pd;
    pc.clutter_density = clutter_rate / (4 * region * region);
    pc.A = A;
    pc.sigma_eps = Q;
    pc.H = H;
    pc.sigma_z = Matrix::Identity(2, 2) * r;
    pc.prune_threshold = cfg.num("prune");
    pc.merge_threshold = cfg.num("merge");
    pc.max_components = static_cast<std::size_t>(cfg.integer("max_components"));
    const Matrix birth_cov = vec({10, 4, 10, 4}).asDiagonal();
    for (const auto& s : starts)
        pc.birth.components.push_back({cfg.num("birth_weight"), vec({s(0), 0, s(2), 0}), birth_cov});

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::poisson_distribution<int> clutter(clutter_rate);
    const Matrix Qs = Eigen::LLT<Matrix>(Q).matrixL();
    std::vector<Vector> truth = starts;

    PhdOutcome out;
    out.trace.name = "phd-track";
    GaussianMixture intensity;
    for (std::size_t k = 0; k < steps; ++k) {
        if (k > 0)
            for (auto& x : truth) x = A * x + Qs * gaussian_noise(rng, 4);
        std::vector<Vector> detections;
        for (const auto& x : truth)
            if (unit(rng) < pd) detections.push_back(H * x + gaussian_noise(rng, 2, std::sqrt(r)));
        const int n_clutter = clutter(rng);
        for (int c = 0; c < n_clutter; ++c)
            detections.push_back(vec({region * (2 * unit(rng) - 1), region * (2 * unit(rng) - 1)}));

        intensity = phd_prune_merge(phd_update(phd_predict(intensity, pc), detections, pc), pc);
        const auto targets = phd_extract(intensity);
        ++out.steps;
        if (targets.size() == truth.size()) ++out.correct;
        out.trace.records.push_back(
            {static_cast<double>(k) * dt,
             vec({truth[0](0), truth[0](2), truth[1](0), truth[1](2)}),
             vec({static_cast<double>(targets.size()), intensity.total_weight()}),
             Vector(),
             {{"components", static_cast<double>(intensity.size())},
              {"detections", static_cast<double>(detections.size())}}});
    }
    return out;
}

// ---------------------------------------------------------------------------

LandmarkOutcome ukf_ckf_landmark(const Config& cfg, std::uint64_t seed) {
    const double dt = cfg.num("dt"), var_u = cfg.num("var_u"), var_r = cfg.num("var_r");
    const std::size_t steps = steps_of(cfg);
    const auto sys = std::get<NonlinearSystemModel>(model_library(
        ModelName::bicycle_reduced, {{"v", cfg.num("v")}, {"L", cfg.num("wheelbase")}, {"dt", dt}, {"var_u", var_u}}));
    const auto meas = std::get<NonlinearMeasurementModel>(
        model_library(ModelName::landmark_range, {{"x_L", cfg.num("x_L")}, {"y_L", cfg.num("y_L")}, {"var_r", var_r}}));

    Rng rng(seed);
    Vector truth = Vector::Zero(3);
    const double init_var = cfg.num("init_var");
    const GaussianEstimate init{truth + gaussian_noise(rng, 3, std::sqrt(init_var)), Matrix::Identity(3, 3) * init_var};
    GaussianEstimate ekf = init, ukf = init, ckf = init;

    LandmarkOutcome out;
    out.trace.name = "ukf-ckf-landmark";
    double se_ekf = 0, se_ukf = 0, se_ckf = 0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double phase = 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(steps);
        const Vector u = Vector::Constant(1, cfg.num("steer") * std::sin(phase));
        truth = sys.g(truth, u + gaussian_noise(rng, 1, std::sqrt(var_u)));
        const Vector z = meas.h(truth) + gaussian_noise(rng, 1, std::sqrt(var_r));

        const GaussianEstimate ekf_prior = ekf_predict(ekf, sys, u);
        ekf = ekf_update(ekf_prior, meas, z);
        const GaussianEstimate ukf_prior = ukf_predict(ukf, sys, u);
        ukf = ukf_step(ukf, sys, meas, u, z);
        const GaussianEstimate ckf_prior = ckf_predict(ckf, sys, u);
        ckf = ckf_step(ckf, sys, meas, u, z);

        ++out.steps;
        out.ekf_reduced += ekf.cov.trace() < ekf_prior.cov.trace();
        out.ukf_reduced += ukf.cov.trace() < ukf_prior.cov.trace();
        out.ckf_reduced += ckf.cov.trace() < ckf_prior.cov.trace();
        se_ekf += (ekf.mean - truth).head(2).squaredNorm();
        se_ukf += (ukf.mean - truth).head(2).squaredNorm();
        se_ckf += (ckf.mean - truth).head(2).squaredNorm();
        out.trace.records.push_back({static_cast<double>(k) * dt,
                                     truth,
                                     ukf.mean,
                                     ukf.cov.diagonal(),
                                     {{"ckf_x", ckf.mean(0)},
                                      {"ckf_y", ckf.mean(1)},
                                      {"ekf_x", ekf.mean(0)},
                                      {"ekf_y", ekf.mean(1)},
                                      {"range", z(0)},
                                      {"ukf_prior_trace", ukf_prior.cov.trace()}}});
    }
    const double n = static_cast<double>(std::max<std::size_t>(steps, 1));
    out.ekf_rmse = std::sqrt(se_ekf / n);
    out.ukf_rmse = std::sqrt(se_ukf / n);
    out.ckf_rmse = std::sqrt(se_ckf / n);
    return out;
}

// ---------------------------------------------------------------------------

RunResult run_scenario(const Config& cfg) {
    RunResult res;
    const std::uint64_t seed = cfg.seed.value_or(0);
    res.summary["scenario"] = cfg.scenario;
    if (cfg.seed) res.summary["seed"] = *cfg.seed;
    res.summary["status"] = "ok";
    auto& s = res.summary;

    if (cfg.scenario == "observability") {
        Json systems = Json::array();
        Json report = Json::array();
        for (const auto& l : observability(cfg)) {
            systems.push_back({{"system", l.system},
                               {"states", l.states},
                               {"rank", l.rank},
                               {"observable", l.observable},
                               {"observability_matrix", json_matrix(l.O)}});
            report.push_back(l.system + ": " + (l.observable ? "observable" : "unobservable") + " (rank " +
                             std::to_string(l.rank) + " of " + std::to_string(l.states) + ")");
        }
        s["report"] = report;
        s["systems"] = systems;
    } else if (cfg.scenario == "sip-control") {
        SipOutcome o = sip_control(cfg, seed);
        s["K"] = json_vector(o.K);
        s["L"] = json_matrix(o.L);
        s["controller_eigenvalues"] = json_poles(o.controller_eigs);
        s["observer_eigenvalues"] = json_poles(o.observer_eigs);
        s["augmented_eigenvalues"] = json_poles(o.augmented_eigs);
        s["t_end"] = o.t_end;
        s["final_state"] = json_vector(o.final_truth);
        const bool converged = !o.failed && std::abs(o.final_truth(0)) < 0.01 && std::abs(o.final_truth(2)) < 0.01;
        s["converged"] = converged;
        res.traces.push_back(std::move(o.trace));
        if (o.failed) {
            s["status"] = "Control failure!";
            res.exit_code = 3;
        }
    } else if (cfg.scenario == "imm-track") {
        ImmOutcome o = imm_track(cfg, seed);
        Eigen::Index best = 0;
        o.final_weights.maxCoeff(&best);
        s["final_weights"] = {{"cp", o.final_weights(0)}, {"cv", o.final_weights(1)}, {"ca", o.final_weights(2)}};
        s["most_likely_model"] = std::array{"cp", "cv", "ca"}[static_cast<std::size_t>(best)];
        res.traces.push_back(std::move(o.trace));
    } else if (cfg.scenario == "pf-vs-kf") {
        PfOutcome o = pf_vs_kf(cfg, seed);
        s["steps"] = o.steps;
        s["steps_within_bound"] = o.within;
        s["fraction_within_bound"] = static_cast<double>(o.within) / static_cast<double>(o.steps);
        s["min_effective_sample_size"] = o.min_neff;
        res.traces.push_back(std::move(o.trace));
    } else if (cfg.scenario == "cif-network") {
        CifOutcome o = cif_network(cfg, seed);
        s["split_cif"] = json_report(o.split);
        s["naive"] = json_report(o.naive);
        s["federated"] = json_report(o.federated);
        res.traces.push_back(std::move(o.trace));
    } else if (cfg.scenario == "circular-reasoning") {
        const auto t = circular_reasoning(cfg);
        auto arr = [](const std::vector<double>& v) {
            Json a = Json::array();
            for (double x : v) a.push_back(tidy(x));
            return a;
        };
        s["naive_a"] = arr(t.naive_a);
        s["naive_b"] = arr(t.naive_b);
        s["ci_a"] = arr(t.ci_a);
        s["ci_b"] = arr(t.ci_b);
        Trace trace{"circular-reasoning", {}};
        for (std::size_t k = 0; k < t.naive_a.size(); ++k)
            trace.records.push_back({static_cast<double>(k),
                                     std::nullopt,
                                     vec({t.naive_a[k], t.naive_b[k]}),
                                     Vector(),
                                     {{"ci_a", t.ci_a[k]}, {"ci_b", t.ci_b[k]}}});
        res.traces.push_back(std::move(trace));
    } else if (cfg.scenario == "phd-track") {
        PhdOutcome o = phd_track(cfg, seed);
        s["steps"] = o.steps;
        s["cardinality_correct_steps"] = o.correct;
        s["fraction_correct"] = static_cast<double>(o.correct) / static_cast<double>(o.steps);
        res.traces.push_back(std::move(o.trace));
    } else if (cfg.scenario == "ukf-ckf-landmark") {
        LandmarkOutcome o = ukf_ckf_landmark(cfg, seed);
        s["steps"] = o.steps;
        s["trace_reduced_steps"] = {{"ekf", o.ekf_reduced}, {"ukf", o.ukf_reduced}, {"ckf", o.ckf_reduced}};
        s["position_rmse"] = {{"ekf", o.ekf_rmse}, {"ukf", o.ukf_rmse}, {"ckf", o.ckf_rmse}};
        res.traces.push_back(std::move(o.trace));
    } else {
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
    }
    return res;
}

// ---------------------------------------------------------------------------

namespace {

void render(const Json& j, int indent, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += pad + Json(k).dump() + ": ";
            render(v, indent + 2, out);
        }
        out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "}";
    } else if (j.is_array()) {
        const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
        const bool short_rows =
            std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_array() && e.size() <= 8; }) &&
            std::all_of(j.begin(), j.end(), [](const Json& e) {
                return std::none_of(e.begin(), e.end(), [](const Json& x) { return x.is_structured(); });
            });
        if (flat || (short_rows && !j.empty())) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                render(j[i], indent, out);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            render(j[i], indent + 2, out);
        }
        out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "]";
    } else if (j.is_number_float()) {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_number(v) : "null";
    } else {
        out += j.dump();
    }
}

} // namespace

std::string render_summary(const Json& j) {
    std::string out;
    render(j, 0, out);
    return out + "\n";
}

} // namespace estkit::cli
