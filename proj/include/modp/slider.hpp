// SPDX-License-Identifier: MIT
#ifndef MODP_SLIDER_HPP
#define MODP_SLIDER_HPP

#include "modp/diffusion.hpp"

namespace modp {

// Signed shift of a preference along a fixed simplex-tangent direction. The
// direction sums to zero, so omega + delta * direction stays on the simplex
// whenever its components stay in [0, 1].
struct PrefShift {
    double delta = 0.0;
    VecX direction;

    VecX plus(const VecX& omega) const { return omega + delta * direction; }
    VecX minus(const VecX& omega) const { return omega - delta * direction; }
};

// Tangent axis used throughout: e0 - e1, stored unnormalized.
VecX tangent_direction(int n_obj);

PrefShift sample_pref_shift(Rng& rng, double delta_max, int n_obj);

// Both shifted preferences keep every component inside [0, 1].
bool shift_valid(const VecX& omega, const PrefShift& shift);

// Training batch for the adapter. target holds the finite-difference noise
// response of the frozen base model, already divided by 2*delta.
struct SliderBatch {
    MatX x_t;
    VecX t;
    MatX cond;
    MatX target;
    VecX delta;
    int skipped = 0;
};

// Draws (t, eps, delta) per segment and computes frozen-model targets
// [eps(x,t,omega+dw) - eps(x,t,omega-dw)] / (2 delta). Segments whose
// preference sits too close to a simplex vertex for any drawn shift are
// skipped after max_retries redraws.
SliderBatch make_slider_batch(const NoiseSchedule& sched, const std::vector<Segment>& segs,
                              const Denoiser<Real>& net, const ParamSet<Real>& theta,
                              double delta_max, Rng& rng, int max_retries = 16);

// Mean squared error between the adapter prediction and the frozen targets.
Var<Real> slider_loss(Tape<Real>& tape, const Bound<Real>& bound, const Denoiser<Real>& net,
                      const SliderBatch& batch);

struct SliderTrainConfig {
    double delta_max = 1e-3;
    int grad_steps = 10000;
    int batch = 64;
    double lr = 2e-4;
    double weight_decay = 1e-5;
    double ema_rate = 0.995;
    uint64_t seed = 0;
    int max_retries = 16;
};

struct TrainedSlider {
    DenoiserConfig cfg;
    ParamSet<Real> params;      // EMA snapshot used for inference
    ParamSet<Real> raw_params;  // last optimizer iterate
    std::vector<double> loss_log;
};

// Trains the adapter against a frozen base model; the base parameters are
// never touched.
TrainedSlider train_slider(const Dataset& ds, const StateStats& stats, const Denoiser<Real>& net,
                           const ParamSet<Real>& theta, const SliderTrainConfig& cfg);

// Index of the closest preference by L2 distance; ties go to the lowest index.
int nearest_preference(const std::vector<VecX>& prefs, const VecX& omega);

// Conditioning preference at solver step i (from S down to 1): omega0 plus the
// fraction (S-i)/S of the tangent component of the requested shift.
VecX slide_schedule(const VecX& omega0, double delta_total, const VecX& direction, int steps,
                    int step);

// Sampling toward omega_target from its nearest in-distribution preference:
// CFG conditioning walks along the shift while eta_scale * (delta/S) times the
// adapter prediction is added at every step. The return condition is fixed at
// the all-ones vector. A zero shift reproduces ddim_sample exactly.
MatX sliding_sample(const Denoiser<Real>& net, const ParamSet<Real>& theta,
                    const ParamSet<Real>& theta_star, const NoiseSchedule& sched,
                    const SamplerConfig& sc, const StateStats& stats, const VecX& omega_target,
                    const std::vector<VecX>& dataset_prefs, const std::optional<VecX>& fixed_s0,
                    Rng& rng, double eta_scale = 1.0);

}  // namespace modp

#endif
