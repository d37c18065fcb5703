// SPDX-License-Identifier: MIT
#include "modp/slider.hpp"

#include <string>

namespace modp {

VecX tangent_direction(int n_obj) {
    if (n_obj < 2) throw ConfigError("tangent_direction: need at least two objectives");
    VecX d = VecX::Zero(n_obj);
    d(0) = 1.0;
    d(1) = -1.0;
    return d;
}

PrefShift sample_pref_shift(Rng& rng, double delta_max, int n_obj) {
    if (delta_max <= 0.0) throw ConfigError("sample_pref_shift: delta_max must be positive");
    PrefShift s;
    s.delta = rng.uniform(-delta_max, delta_max);
    s.direction = tangent_direction(n_obj);
    return s;
}

bool shift_valid(const VecX& omega, const PrefShift& shift) {
    VecX p = shift.plus(omega), m = shift.minus(omega);
    return (p.array() >= 0.0).all() && (p.array() <= 1.0).all() && (m.array() >= 0.0).all() &&
           (m.array() <= 1.0).all();
}

SliderBatch make_slider_batch(const NoiseSchedule& sched, const std::vector<Segment>& segs,
                              const Denoiser<Real>& net, const ParamSet<Real>& theta,
                              double delta_max, Rng& rng, int max_retries) {
    if (segs.empty()) throw ConfigError("make_slider_batch: empty batch");
    const Eigen::Index H = segs.front().x0.rows();
    const Eigen::Index sd = segs.front().x0.cols();
    const Eigen::Index n = segs.front().omega.size();

    SliderBatch sb;
    std::vector<const Segment*> kept;
    std::vector<PrefShift> shifts;
    for (const Segment& seg : segs) {
        PrefShift shift = sample_pref_shift(rng, delta_max, static_cast<int>(n));
        int tries = 0;
        while ((shift.delta == 0.0 || !shift_valid(seg.omega, shift)) && tries < max_retries) {
            shift.delta = rng.uniform(-delta_max, delta_max);
            ++tries;
        }
        if (shift.delta == 0.0 || !shift_valid(seg.omega, shift)) {
            ++sb.skipped;
            continue;
        }
        kept.push_back(&seg);
        shifts.push_back(shift);
    }
    if (kept.empty()) throw DataError("make_slider_batch: every sample was skipped");

    const int B = static_cast<int>(kept.size());
    sb.x_t.resize(B * H, sd);
    sb.t.resize(B);
    sb.cond.resize(B, 2 * n);
    sb.delta.resize(B);
    MatX cond_plus(B, 2 * n), cond_minus(B, 2 * n);

    for (int b = 0; b < B; ++b) {
        const Segment& seg = *kept[static_cast<size_t>(b)];
        const double t = rng.uniform();
        sb.t(b) = t;
        MatX eps(H, sd);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
        sb.x_t.middleRows(b * H, H) = add_noise(sched, seg.x0, t, eps);

        sb.cond.row(b).head(n) = seg.omega;
        sb.cond.row(b).tail(n) = seg.g;
        cond_plus.row(b) = sb.cond.row(b);
        cond_minus.row(b) = sb.cond.row(b);
        cond_plus.row(b).head(n) = shifts[static_cast<size_t>(b)].plus(seg.omega);
        cond_minus.row(b).head(n) = shifts[static_cast<size_t>(b)].minus(seg.omega);
        sb.delta(b) = shifts[static_cast<size_t>(b)].delta;
    }

    MatX eps_plus = net.predict(theta, sb.x_t, sb.t, cond_plus);
    MatX eps_minus = net.predict(theta, sb.x_t, sb.t, cond_minus);
    sb.target.resize(B * H, sd);
    for (int b = 0; b < B; ++b)
        sb.target.middleRows(b * H, H) =
            (eps_plus.middleRows(b * H, H) - eps_minus.middleRows(b * H, H)) /
            (2.0 * sb.delta(b));
    return sb;
}

Var<Real> slider_loss(Tape<Real>& tape, const Bound<Real>& bound, const Denoiser<Real>& net,
                      const SliderBatch& batch) {
    Var<Real> pred = net.forward(tape, bound, batch.x_t, batch.t, batch.cond);
    return mse(pred, batch.target);
}

TrainedSlider train_slider(const Dataset& ds, const StateStats& stats, const Denoiser<Real>& net,
                           const ParamSet<Real>& theta, const SliderTrainConfig& cfg) {
    Rng rng(cfg.seed);

    TrainedSlider out;
    out.cfg = net.cfg;
    out.raw_params = net.init_params(rng);

    AdamW<Real> opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    Ema<Real> ema(cfg.ema_rate);
    NoiseSchedule sched;

    for (int step = 0; step < cfg.grad_steps; ++step) {
        std::vector<Segment> segs = batch_segments(ds, net.cfg.horizon, cfg.batch, rng);
        for (auto& s : segs) s.x0 = stats.normalize_rows(s.x0);
        SliderBatch sb = make_slider_batch(sched, segs, net, theta, cfg.delta_max, rng,
                                           cfg.max_retries);

        Tape<Real> tape;
        Bound<Real> bound = bind(tape, out.raw_params);
        Var<Real> loss = slider_loss(tape, bound, net, sb);
        const double lv = loss.val()(0, 0);
        if (!std::isfinite(lv))
            throw TrainingDivergence("slider loss non-finite at step " + std::to_string(step));
        out.loss_log.push_back(lv);
        tape.backward(loss.id);
        opt.step(out.raw_params, collect_grads(tape, bound));
        ema.update(out.raw_params);
    }
    out.params = ema.shadow.values.empty() ? out.raw_params : ema.shadow;
    return out;
}

int nearest_preference(const std::vector<VecX>& prefs, const VecX& omega) {
    if (prefs.empty()) throw DataError("nearest_preference: empty preference list");
    int best = 0;
    double best_d = (prefs[0] - omega).squaredNorm();
    for (int i = 1; i < static_cast<int>(prefs.size()); ++i) {
        const double d = (prefs[static_cast<size_t>(i)] - omega).squaredNorm();
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

VecX slide_schedule(const VecX& omega0, double delta_total, const VecX& direction, int steps,
                    int step) {
    const double frac = static_cast<double>(steps - step) / steps;
    return omega0 + frac * delta_total * direction;
}

MatX sliding_sample(const Denoiser<Real>& net, const ParamSet<Real>& theta,
                    const ParamSet<Real>& theta_star, const NoiseSchedule& sched,
                    const SamplerConfig& sc, const StateStats& stats, const VecX& omega_target,
                    const std::vector<VecX>& dataset_prefs, const std::optional<VecX>& fixed_s0,
                    Rng& rng, double eta_scale) {
    const Eigen::Index n = omega_target.size();
    const VecX& omega0 = dataset_prefs[static_cast<size_t>(
        nearest_preference(dataset_prefs, omega_target))];
    const VecX dir = tangent_direction(static_cast<int>(n));
    const double delta_total = (omega_target - omega0).dot(dir) / dir.squaredNorm();
    const VecX g = VecX::Ones(n);

    NoiseFn noise_fn = [&](const MatX& x, double t, int step) {
        VecX cond(2 * n);
        cond.head(n) = slide_schedule(omega0, delta_total, dir, sc.steps, step);
        cond.tail(n) = g;
        MatX eps = cfg_noise(net, theta, x, t, cond, sc.guidance_w);
        if (delta_total != 0.0) {
            VecX tv(1);
            tv << t;
            MatX c(1, 2 * n);
            c.row(0) = cond;
            eps += eta_scale * (delta_total / sc.steps) * net.predict(theta_star, x, tv, c);
        }
        return eps;
    };
    return sample_with_noise_fn(sched, sc, stats, net.cfg.horizon, net.cfg.state_dim, noise_fn,
                                fixed_s0, rng);
}

}  // namespace modp
