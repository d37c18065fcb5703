// SPDX-License-Identifier: MIT
#include "modp/diffusion.hpp"

namespace modp {

MatX add_noise(const NoiseSchedule& sched, const MatX& x0, double t, const MatX& eps) {
    if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
        throw ConfigError("add_noise: eps shape mismatch");
    if (t < 0.0 || t > 1.0) throw ConfigError("add_noise: t outside [0, 1]");
    return sched.alpha(t) * x0 + sched.sigma(t) * eps;
}

LossBatch make_loss_batch(const NoiseSchedule& sched, const std::vector<Segment>& segs,
                          double mask_prob, double next_state_weight, Rng& rng) {
    if (segs.empty()) throw ConfigError("make_loss_batch: empty batch");
    if (mask_prob <= 0.0 || mask_prob >= 1.0)
        throw ConfigError("make_loss_batch: mask_prob must lie in (0, 1)");
    if (next_state_weight < 1.0)
        throw ConfigError("make_loss_batch: next_state_weight must be >= 1");

    const int B = static_cast<int>(segs.size());
    const Eigen::Index H = segs.front().x0.rows();
    const Eigen::Index sd = segs.front().x0.cols();
    const Eigen::Index n = segs.front().omega.size();

    LossBatch lb;
    lb.x_t.resize(B * H, sd);
    lb.t.resize(B);
    lb.cond.resize(B, 2 * n);
    lb.eps.resize(B * H, sd);
    lb.weight = MatX::Ones(B * H, sd);

    for (int b = 0; b < B; ++b) {
        const Segment& seg = segs[static_cast<size_t>(b)];
        const double t = rng.uniform();
        lb.t(b) = t;
        MatX eps(H, sd);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
        lb.eps.middleRows(b * H, H) = eps;
        lb.x_t.middleRows(b * H, H) = add_noise(sched, seg.x0, t, eps);
        if (rng.uniform() < mask_prob) {
            lb.cond.row(b).setZero();
        } else {
            lb.cond.row(b).head(n) = seg.omega;
            lb.cond.row(b).tail(n) = seg.g;
        }
        lb.weight.row(b * H + seg.next_state_index).setConstant(next_state_weight);
    }
    return lb;
}

Var<Real> diffusion_loss(Tape<Real>& tape, const Bound<Real>& bound, const Denoiser<Real>& net,
                         const LossBatch& batch) {
    Var<Real> pred = net.forward(tape, bound, batch.x_t, batch.t, batch.cond);
    return weighted_mse(pred, batch.eps, batch.weight);
}

TrainedDenoiser train_diffusion(const Dataset& ds, const StateStats& stats,
                                const DiffusionTrainConfig& cfg) {
    Denoiser<Real> net(cfg.net);
    Rng rng(cfg.seed);

    TrainedDenoiser out;
    out.cfg = cfg.net;
    out.raw_params = net.init_params(rng);

    AdamW<Real> opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    Ema<Real> ema(cfg.ema_rate);
    NoiseSchedule sched;

    for (int step = 0; step < cfg.grad_steps; ++step) {
        std::vector<Segment> segs = batch_segments(ds, cfg.net.horizon, cfg.batch, rng);
        for (auto& s : segs) s.x0 = stats.normalize_rows(s.x0);
        LossBatch lb = make_loss_batch(sched, segs, cfg.mask_prob, cfg.next_state_weight, rng);

        Tape<Real> tape;
        Bound<Real> bound = bind(tape, out.raw_params);
        Var<Real> loss = diffusion_loss(tape, bound, net, lb);
        const double lv = loss.val()(0, 0);
        if (!std::isfinite(lv))
            throw TrainingDivergence("diffusion loss non-finite at step " +
                                     std::to_string(step));
        out.loss_log.push_back(lv);
        tape.backward(loss.id);
        opt.step(out.raw_params, collect_grads(tape, bound));
        ema.update(out.raw_params);
    }
    out.params = ema.shadow.values.empty() ? out.raw_params : ema.shadow;
    return out;
}

MatX cfg_noise(const Denoiser<Real>& net, const ParamSet<Real>& params, const MatX& x_t,
               double t, const VecX& cond, double w) {
    VecX tv(1);
    tv << t;
    MatX c(1, cond.size());
    c.row(0) = cond;
    MatX eps_cond = net.predict(params, x_t, tv, c);
    if (w == 0.0) return eps_cond;
    MatX null_tok = MatX::Zero(1, cond.size());
    MatX eps_null = net.predict(params, x_t, tv, null_tok);
    return (1.0 + w) * eps_cond - w * eps_null;
}

MatX classifier_grad(const GuidanceClassifier<Real>& cls, const ParamSet<Real>& phi,
                     const MatX& x_t, double t, const VecX& cond) {
    Tape<Real> tape;
    Bound<Real> bound = bind(tape, phi);
    Var<Real> x = input(tape, x_t);
    VecX tv(1);
    tv << t;
    Var<Real> pred = cls.forward(tape, bound, x, tv);
    MatX target(1, cond.size());
    target.row(0) = cond;
    // score = -||pred - cond||^2, so the mse node (scaled by element count)
    // carries the gradient up to a negative constant
    Var<Real> err = mse(pred, target);
    tape.backward(err.id);
    return -static_cast<double>(cond.size()) * tape.grad(x.id);
}

MatX cg_noise(const Denoiser<Real>& net, const ParamSet<Real>& theta,
              const GuidanceClassifier<Real>& cls, const ParamSet<Real>& phi,
              const NoiseSchedule& sched, const MatX& x_t, double t, const VecX& cond,
              double w) {
    VecX tv(1);
    tv << t;
    MatX null_tok = MatX::Zero(1, cond.size());
    MatX eps = net.predict(theta, x_t, tv, null_tok);
    if (w == 0.0) return eps;
    return eps - w * sched.sigma(t) * classifier_grad(cls, phi, x_t, t, cond);
}

MatX ddim_core(const NoiseSchedule& sched, const SamplerConfig& sc, int horizon, int state_dim,
               const NoiseFn& noise_fn, Rng& rng, const std::optional<VecX>& fixed_s0_norm,
               const PostStep& post_step) {
    if (sc.steps < 1) throw ConfigError("ddim_core: steps must be >= 1");
    const int S = sc.steps;

    MatX x(horizon, state_dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = sc.temperature * rng.normal();

    VecX nu;
    if (fixed_s0_norm) {
        nu = x.row(0);
        x.row(0) = sched.alpha(1.0) * fixed_s0_norm->transpose() + sched.sigma(1.0) * nu.transpose();
    }

    for (int i = S; i >= 1; --i) {
        const double s = static_cast<double>(i) / S;
        const double t = static_cast<double>(i - 1) / S;
        MatX eps_hat = noise_fn(x, s, S - i);
        x = (sched.alpha(t) / sched.alpha(s)) * (x - sched.sigma(s) * eps_hat) +
            sched.sigma(t) * eps_hat;
        if (fixed_s0_norm)
            x.row(0) =
                sched.alpha(t) * fixed_s0_norm->transpose() + sched.sigma(t) * nu.transpose();
        if (post_step) post_step(x, t, S - i);
        if (!x.allFinite())
            throw DataError("ddim_core: non-finite state after step " + std::to_string(S - i));
    }
    return x;
}

MatX sample_with_noise_fn(const NoiseSchedule& sched, const SamplerConfig& sc,
                          const StateStats& stats, int horizon, int state_dim,
                          const NoiseFn& noise_fn, const std::optional<VecX>& fixed_s0,
                          Rng& rng) {
    std::optional<VecX> s0_norm;
    if (fixed_s0) s0_norm = stats.normalize(*fixed_s0);
    MatX x = ddim_core(sched, sc, horizon, state_dim, noise_fn, rng, s0_norm);
    MatX out = stats.denormalize_rows(x);
    if (fixed_s0) out.row(0) = fixed_s0->transpose();
    return out;
}

MatX ddim_sample(const Denoiser<Real>& net, const ParamSet<Real>& params,
                 const NoiseSchedule& sched, const SamplerConfig& sc, const StateStats& stats,
                 const VecX& omega, const VecX& g, const std::optional<VecX>& fixed_s0,
                 Rng& rng) {
    const Eigen::Index n = omega.size();
    VecX cond(2 * n);
    cond.head(n) = omega;
    cond.tail(n) = g;

    NoiseFn noise_fn = [&](const MatX& x, double t, int) {
        return cfg_noise(net, params, x, t, cond, sc.guidance_w);
    };
    return sample_with_noise_fn(sched, sc, stats, net.cfg.horizon, net.cfg.state_dim, noise_fn,
                                fixed_s0, rng);
}

}  // namespace modp
