// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "modp/diffusion.hpp"
#include "modp/normalize.hpp"
#include "testutil.hpp"

using namespace modp;
using namespace modp::test;

namespace {

Segment constant_segment(double value, int horizon, double w1, double g) {
    Segment s;
    s.x0 = MatX::Constant(horizon, 2, value);
    s.omega = VecX(2);
    s.omega << w1, 1.0 - w1;
    s.g = VecX::Constant(2, g);
    s.next_state_index = 1;
    return s;
}

Denoiser<Real> live_net(DenoiserConfig cfg = {}) {
    cfg.embed_dim = 16;
    cfg.n_heads = 2;
    cfg.zero_output_head = false;
    return Denoiser<Real>(cfg);
}

// Synthetic dataset of near-constant trajectories for degenerate-distribution
// training checks.
Dataset jitter_dataset(double center, double jitter, int n_traj, uint64_t seed) {
    Dataset ds;
    Rng rng(seed);
    for (int i = 0; i < n_traj; ++i) {
        Trajectory t;
        t.id = i;
        t.omega = VecX(2);
        t.omega << 0.5, 0.5;
        t.states = MatX::Constant(8, 2, center);
        for (Eigen::Index k = 0; k < t.states.size(); ++k)
            t.states.data()[k] += rng.normal(0.0, jitter);
        t.actions = MatX::Zero(8, 1);
        t.rewards = MatX::Constant(8, 2, 0.1);
        compute_rtg(t);
        t.g_norm = VecX::Constant(2, 0.5);
        ds.trajs.push_back(std::move(t));
    }
    ds.manifest.env.n_objectives = 2;
    ds.manifest.n_traj = n_traj;
    return ds;
}

}  // namespace

TEST_CASE("noise schedule boundaries and variance preservation") {
    NoiseSchedule sched;
    CHECK(sched.alpha(0.0) == 1.0);
    CHECK(sched.sigma(0.0) == 0.0);
    CHECK(sched.alpha(1.0) < 0.01);
    CHECK(sched.sigma(1.0) > 0.99);

    double prev_a = 2.0, prev_s = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double t = i / 1000.0;
        const double a = sched.alpha(t), s = sched.sigma(t);
        CHECK(std::abs(a * a + s * s - 1.0) <= 1e-12);
        CHECK(a < prev_a);
        CHECK(s > prev_s);
        prev_a = a;
        prev_s = s;
    }
}

TEST_CASE("forward noising interpolates between data and noise") {
    NoiseSchedule sched;
    Rng rng(3);
    MatX x0(4, 2), eps(4, 2);
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        x0.data()[i] = rng.normal();
        eps.data()[i] = rng.normal();
    }
    CHECK(bitwise_equal(add_noise(sched, x0, 0.0, eps), x0));
    CHECK((add_noise(sched, x0, 1.0, eps) - eps).cwiseAbs().maxCoeff() < 0.05);

    const double t = 0.4;
    MatX mean_acc = MatX::Zero(4, 2);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        MatX e(4, 2);
        for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
        mean_acc += add_noise(sched, x0, t, e);
    }
    mean_acc /= draws;
    const double band = 3.0 * sched.sigma(t) / std::sqrt(static_cast<double>(draws));
    CHECK((mean_acc - sched.alpha(t) * x0).cwiseAbs().maxCoeff() < band);

    CHECK_THROWS_AS(add_noise(sched, x0, -0.1, eps), ConfigError);
    CHECK_THROWS_AS(add_noise(sched, x0, 0.5, MatX::Zero(1, 2)), ConfigError);
}

TEST_CASE("loss batches carry the noised windows, masks, and weights") {
    NoiseSchedule sched;
    std::vector<Segment> segs;
    for (int i = 0; i < 2000; ++i) segs.push_back(constant_segment(0.7, 4, 0.3, 0.9));
    Rng rng(11);
    LossBatch lb = make_loss_batch(sched, segs, 0.2, 10.0, rng);

    REQUIRE(lb.x_t.rows() == 2000 * 4);
    int masked = 0;
    for (int b = 0; b < 2000; ++b) {
        MatX eps = lb.eps.middleRows(b * 4, 4);
        MatX expect = sched.alpha(lb.t(b)) * segs[0].x0 + sched.sigma(lb.t(b)) * eps;
        CHECK((lb.x_t.middleRows(b * 4, 4) - expect).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(lb.t(b) >= 0.0);
        CHECK(lb.t(b) <= 1.0);

        if (lb.cond.row(b).cwiseAbs().maxCoeff() == 0.0) {
            ++masked;
        } else {
            CHECK(lb.cond(b, 0) == 0.3);
            CHECK(lb.cond(b, 1) == 0.7);
            CHECK(lb.cond(b, 2) == 0.9);
            CHECK(lb.cond(b, 3) == 0.9);
        }
        for (int h = 0; h < 4; ++h) {
            const double expect_w = h == 1 ? 10.0 : 1.0;
            CHECK(lb.weight(b * 4 + h, 0) == expect_w);
            CHECK(lb.weight(b * 4 + h, 1) == expect_w);
        }
    }
    const double frac = masked / 2000.0;
    CHECK(std::abs(frac - 0.2) < 3.0 * std::sqrt(0.2 * 0.8 / 2000.0));

    Rng r1(4), r2(4);
    LossBatch a = make_loss_batch(sched, segs, 0.2, 10.0, r1);
    LossBatch b2 = make_loss_batch(sched, segs, 0.2, 10.0, r2);
    CHECK(bitwise_equal(a.x_t, b2.x_t));
    CHECK(bitwise_equal(a.cond, b2.cond));
}

TEST_CASE("diffusion loss equals the hand-weighted squared error") {
    NoiseSchedule sched;
    std::vector<Segment> segs;
    for (int i = 0; i < 8; ++i) segs.push_back(constant_segment(0.2 * i, 4, 0.4, 0.5));
    Rng rng(9);
    LossBatch lb = make_loss_batch(sched, segs, 0.2, 10.0, rng);

    // zero-head net predicts 0, so the loss reduces to the weighted noise power
    DenoiserConfig cfg;
    cfg.embed_dim = 16;
    cfg.n_heads = 2;
    Denoiser<Real> net(cfg);
    Rng ir(1);
    ParamSet<Real> ps = net.init_params(ir);

    Tape<Real> tape;
    Bound<Real> bound = bind(tape, ps);
    Var<Real> loss = diffusion_loss(tape, bound, net, lb);
    const double by_hand =
        (lb.weight.array() * lb.eps.array().square()).sum() / static_cast<double>(lb.eps.size());
    CHECK(loss.val()(0, 0) == doctest::Approx(by_hand).epsilon(1e-12));

    // a batch whose target noise matches the prediction exactly has zero loss
    LossBatch perfect = lb;
    perfect.eps.setZero();
    Tape<Real> tape2;
    Bound<Real> bound2 = bind(tape2, ps);
    CHECK(diffusion_loss(tape2, bound2, net, perfect).val()(0, 0) == 0.0);

    // the s1 row is the only difference between weighted and unweighted loss
    LossBatch flat = lb;
    flat.weight.setOnes();
    Tape<Real> tape3;
    Bound<Real> bound3 = bind(tape3, ps);
    const double l_flat = diffusion_loss(tape3, bound3, net, flat).val()(0, 0);
    double s1_power = 0.0;
    for (int b = 0; b < 8; ++b) s1_power += lb.eps.middleRows(b * 4, 4).row(1).array().square().sum();
    const double expect = l_flat + 9.0 * s1_power / static_cast<double>(lb.eps.size());
    CHECK(loss.val()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("classifier-free guidance is affine in the guidance weight") {
    Denoiser<Real> net = live_net();
    Rng rng(17);
    ParamSet<Real> ps = net.init_params(rng);

    MatX x(4, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    VecX cond(4);
    cond << 0.3, 0.7, 0.8, 0.6;

    MatX e_cond = cfg_noise(net, ps, x, 0.37, cond, 0.0);
    MatX e1 = cfg_noise(net, ps, x, 0.37, cond, 1.0);
    MatX e15 = cfg_noise(net, ps, x, 0.37, cond, 1.5);

    VecX tv(1);
    tv << 0.37;
    MatX c(1, 4);
    c.row(0) = cond;
    CHECK(bitwise_equal(e_cond, net.predict(ps, x, tv, c)));

    MatX e_uncond = cfg_noise(net, ps, x, 0.37, cond, -1.0);
    MatX null_tok = MatX::Zero(1, 4);
    CHECK((e_uncond - net.predict(ps, x, tv, null_tok)).cwiseAbs().maxCoeff() < 1e-14);

    MatX extrapolated = e_cond + 1.5 * (e1 - e_cond);
    CHECK((e15 - extrapolated).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("a single solver step applies the update formula verbatim") {
    NoiseSchedule sched;
    SamplerConfig sc;
    sc.steps = 1;
    sc.temperature = 1.0;
    MatX c = MatX::Constant(3, 2, 0.3);
    NoiseFn fn = [&](const MatX&, double, int) { return c; };

    Rng rng(5);
    MatX out = ddim_core(sched, sc, 3, 2, fn, rng);

    Rng replay(5);
    MatX x1(3, 2);
    for (Eigen::Index i = 0; i < x1.size(); ++i) x1.data()[i] = replay.normal();
    MatX expect = (sched.alpha(0.0) / sched.alpha(1.0)) * (x1 - sched.sigma(1.0) * c) +
                  sched.sigma(0.0) * c;
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the solver recovers the mean of a point mass exactly") {
    NoiseSchedule sched;
    SamplerConfig sc;
    sc.steps = 10;
    sc.temperature = 1.0;
    Rng mu_rng(21);
    MatX mu(4, 2);
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu.data()[i] = mu_rng.normal();

    NoiseFn oracle = [&](const MatX& x, double t, int) {
        return MatX(((x - sched.alpha(t) * mu) / sched.sigma(t)));
    };
    Rng rng(6);
    MatX out = ddim_core(sched, sc, 4, 2, oracle, rng);
    CHECK((out - mu).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero sampling temperature makes the solver deterministic") {
    Denoiser<Real> net = live_net();
    Rng ir(17);
    ParamSet<Real> ps = net.init_params(ir);
    NoiseSchedule sched;
    SamplerConfig sc;
    sc.temperature = 0.0;
    StateStats stats;
    stats.mean = VecX::Zero(2);
    stats.std = VecX::Ones(2);
    VecX omega(2), g(2);
    omega << 0.4, 0.6;
    g << 0.8, 0.7;

    Rng r1(1), r2(999);
    MatX a = ddim_sample(net, ps, sched, sc, stats, omega, g, std::nullopt, r1);
    MatX b = ddim_sample(net, ps, sched, sc, stats, omega, g, std::nullopt, r2);
    CHECK(bitwise_equal(a, b));
}

TEST_CASE("inpainting pins the first row to the provided state") {
    Denoiser<Real> net = live_net();
    Rng ir(17);
    ParamSet<Real> ps = net.init_params(ir);
    NoiseSchedule sched;
    SamplerConfig sc;
    StateStats stats;
    stats.mean = VecX::Constant(2, 0.3);
    stats.std = VecX::Constant(2, 1.7);
    VecX omega(2), g(2);
    omega << 0.5, 0.5;
    g << 1.0, 1.0;
    VecX s0(2);
    s0 << 0.123456789, -0.987654321;

    Rng rng(8);
    MatX out = ddim_sample(net, ps, sched, sc, stats, omega, g, s0, rng);
    CHECK(out(0, 0) == s0(0));
    CHECK(out(0, 1) == s0(1));
    CHECK(out.rows() == net.cfg.horizon);
}

TEST_CASE("non-finite solver states report the failing step") {
    NoiseSchedule sched;
    SamplerConfig sc;
    sc.steps = 4;
    NoiseFn bad = [&](const MatX& x, double, int step) {
        return step == 2 ? MatX(MatX::Constant(x.rows(), x.cols(),
                                               std::numeric_limits<double>::quiet_NaN()))
                         : MatX(MatX::Zero(x.rows(), x.cols()));
    };
    Rng rng(2);
    CHECK_THROWS_WITH_AS(ddim_core(sched, sc, 2, 2, bad, rng),
                         doctest::Contains("step 2"), DataError);
}

TEST_CASE("classifier guidance reduces to the unconditional prediction") {
    Denoiser<Real> net = live_net();
    Rng ir(3);
    ParamSet<Real> theta = net.init_params(ir);
    GuidanceClassifier<Real> cls(ClassifierConfig{4, 2, 2, 16, 8});
    ParamSet<Real> phi = cls.init_params(ir);
    NoiseSchedule sched;

    MatX x(4, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = ir.normal();
    VecX cond(4);
    cond << 0.2, 0.8, 0.5, 0.5;

    VecX tv(1);
    tv << 0.5;
    MatX uncond = net.predict(theta, x, tv, MatX(MatX::Zero(1, 4)));
    CHECK(bitwise_equal(cg_noise(net, theta, cls, phi, sched, x, 0.5, cond, 0.0), uncond));

    ParamSet<Real> flat_phi = phi;
    for (auto& m : flat_phi.values) m.setZero();
    MatX guided = cg_noise(net, theta, cls, phi, sched, x, 0.5, cond, 2.0);
    MatX flat = cg_noise(net, theta, cls, flat_phi, sched, x, 0.5, cond, 2.0);
    CHECK((flat - uncond).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((guided - uncond).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("classifier guidance climbs the classifier score") {
    GuidanceClassifier<Real> cls(ClassifierConfig{1, 1, 1, 16, 8});
    Rng ir(13);
    ParamSet<Real> phi = cls.init_params(ir);
    for (Eigen::Index i = 0; i < phi.at("head.W").size(); ++i)
        phi.at("head.W").data()[i] = ir.normal(0.0, 0.4);
    VecX cond(2);
    cond << 0.5, 0.5;
    NoiseSchedule sched;

    auto score = [&](const MatX& x) {
        Tape<Real> tp;
        tp.grad_enabled = false;
        Bound<Real> b = bind(tp, phi);
        VecX tv(1);
        tv << 0.0;
        MatX pred = cls.forward(tp, b, input(tp, x), tv).val();
        return -(pred.row(0).transpose() - cond).squaredNorm();
    };

    SamplerConfig sc;
    sc.steps = 5;
    sc.temperature = 1.0;
    auto mean_score = [&](double w, uint64_t seed) {
        double total = 0.0;
        Rng rng(seed);
        for (int k = 0; k < 1000; ++k) {
            NoiseFn fn = [&](const MatX& x, double t, int) {
                return MatX(-w * sched.sigma(t) * classifier_grad(cls, phi, x, t, cond));
            };
            total += score(ddim_core(sched, sc, 1, 1, fn, rng));
        }
        return total / 1000.0;
    };
    CHECK(mean_score(2.0, 77) > mean_score(0.0, 77));
}

TEST_CASE("training reduces the loss and is reproducible per seed") {
    EnvConfig env;
    CollectConfig cc;
    cc.n_traj = 50;
    Dataset ds = make_dataset(env, cc, 19);
    normalize_global(ds);
    StateStats stats = compute_state_stats(ds);

    DiffusionTrainConfig cfg;
    cfg.net.embed_dim = 32;
    cfg.net.n_heads = 2;
    cfg.grad_steps = 400;
    cfg.batch = 16;
    cfg.seed = 7;

    TrainedDenoiser td = train_diffusion(ds, stats, cfg);
    REQUIRE(td.loss_log.size() == 400);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 50; ++i) {
        head += td.loss_log[static_cast<size_t>(i)];
        tail += td.loss_log[td.loss_log.size() - 1 - static_cast<size_t>(i)];
    }
    CHECK(tail < head);

    cfg.grad_steps = 30;
    TrainedDenoiser a = train_diffusion(ds, stats, cfg);
    TrainedDenoiser b = train_diffusion(ds, stats, cfg);
    CHECK(param_hash(a.params) == param_hash(b.params));
    cfg.seed = 8;
    TrainedDenoiser c = train_diffusion(ds, stats, cfg);
    CHECK(param_hash(a.params) != param_hash(c.params));
}

TEST_CASE("a model trained on constant data reproduces the constant") {
    Dataset ds = jitter_dataset(0.4, 0.0, 30, 5);
    StateStats stats = compute_state_stats(ds);

    DiffusionTrainConfig cfg;
    cfg.net.embed_dim = 32;
    cfg.net.n_heads = 2;
    cfg.grad_steps = 600;
    cfg.batch = 16;
    cfg.seed = 3;
    TrainedDenoiser td = train_diffusion(ds, stats, cfg);

    Denoiser<Real> net(td.cfg);
    NoiseSchedule sched;
    SamplerConfig sc;
    sc.guidance_w = 0.0;  // unconditional check
    VecX omega(2), g(2);
    omega << 0.5, 0.5;
    g << 0.5, 0.5;
    Rng rng(10);
    for (int k = 0; k < 5; ++k) {
        MatX out = ddim_sample(net, td.params, sched, sc, stats, omega, g, std::nullopt, rng);
        REQUIRE(out.allFinite());
        CHECK((out.array() - 0.4).abs().maxCoeff() < 0.05);
    }
}
