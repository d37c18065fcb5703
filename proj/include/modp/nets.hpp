// SPDX-License-Identifier: MIT
#ifndef MODP_NETS_HPP
#define MODP_NETS_HPP

#include "modp/optim.hpp"

namespace modp {

enum class DenoiserArch { Auto, Mlp, Transformer };

inline std::string arch_name(DenoiserArch a) {
    switch (a) {
        case DenoiserArch::Mlp: return "mlp";
        case DenoiserArch::Transformer: return "transformer";
        default: return "auto";
    }
}

inline DenoiserArch arch_from_name(const std::string& s) {
    if (s == "mlp") return DenoiserArch::Mlp;
    if (s == "transformer") return DenoiserArch::Transformer;
    if (s == "auto") return DenoiserArch::Auto;
    throw ConfigError("unknown denoiser arch: " + s);
}

// Sinusoidal features of continuous time in [0, 1]. The time is spread over
// the frequency bank by time_scale before the sin/cos projection.
inline MatX sin_time_embed(const VecX& t, int dim, double time_scale = 1000.0) {
    if (dim % 2 != 0) throw ConfigError("sin_time_embed: dim must be even");
    const int half = dim / 2;
    MatX out(t.size(), dim);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        double pos = t(i) * time_scale;
        for (int j = 0; j < half; ++j) {
            double freq = std::exp(-std::log(10000.0) * j / half);
            out(i, j) = std::sin(pos * freq);
            out(i, half + j) = std::cos(pos * freq);
        }
    }
    return out;
}

namespace detail {

template <class S>
void add_linear(ParamSet<S>& ps, const std::string& prefix, int in, int out, Rng& rng,
                double init_sd = 0.02, bool zero = false) {
    {
        Mat<S>& W = ps.add(prefix + ".W", in, out);
        if (!zero)
            for (Eigen::Index i = 0; i < W.size(); ++i)
                W.data()[i] = static_cast<S>(rng.trunc_normal(init_sd));
    }
    ps.add(prefix + ".b", 1, out);
}

template <class S>
Var<S> apply_linear(const Bound<S>& b, const std::string& prefix, Var<S> x) {
    return linear(x, b[prefix + ".W"], b[prefix + ".b"]);
}

// Two-layer MLP head used to embed timesteps and conditions.
template <class S>
void add_embed_mlp(ParamSet<S>& ps, const std::string& prefix, int in, int width, Rng& rng) {
    add_linear(ps, prefix + ".l0", in, width, rng);
    add_linear(ps, prefix + ".l1", width, width, rng);
}

template <class S>
Var<S> apply_embed_mlp(const Bound<S>& b, const std::string& prefix, Var<S> x) {
    return apply_linear(b, prefix + ".l1", mish(apply_linear(b, prefix + ".l0", x)));
}

}  // namespace detail

// Noise-prediction network conditioned on timestep and a [omega | rtg] vector.
// Two interchangeable trunks: a pure MLP over the flattened window (default
// for short horizons) and a temporal transformer with adaptive layer-norm
// modulation (default for long horizons).
struct DenoiserConfig {
    int horizon = 4;
    int state_dim = 2;
    int n_obj = 2;
    int embed_dim = 64;
    int n_heads = 4;
    int n_blocks = 2;
    int time_embed_dim = 32;
    DenoiserArch arch = DenoiserArch::Auto;
    bool zero_output_head = true;

    // horizons of a few steps do not benefit from attention
    DenoiserArch resolved_arch() const {
        if (arch != DenoiserArch::Auto) return arch;
        return horizon <= 4 ? DenoiserArch::Mlp : DenoiserArch::Transformer;
    }

    int cond_dim() const { return 2 * n_obj; }

    static DenoiserConfig desk_preset() { return DenoiserConfig{}; }

    static DenoiserConfig large_preset() {
        DenoiserConfig c;
        c.horizon = 32;
        c.embed_dim = 128;
        c.n_heads = 8;
        c.n_blocks = 4;
        c.arch = DenoiserArch::Transformer;
        return c;
    }
};

template <class S>
struct Denoiser {
    DenoiserConfig cfg;

    explicit Denoiser(DenoiserConfig c = {}) : cfg(c) {
        if (cfg.embed_dim % cfg.n_heads != 0)
            throw ConfigError("denoiser: embed_dim must be divisible by n_heads");
    }

    ParamSet<S> init_params(Rng& rng) const {
        ParamSet<S> ps;
        const int E = cfg.embed_dim;
        detail::add_embed_mlp(ps, "temb", cfg.time_embed_dim, E, rng);
        detail::add_embed_mlp(ps, "cemb", cfg.cond_dim(), E, rng);
        if (cfg.resolved_arch() == DenoiserArch::Mlp) {
            const int flat = cfg.horizon * cfg.state_dim;
            detail::add_linear(ps, "trunk.l0", flat + E, E, rng);
            detail::add_linear(ps, "trunk.l1", E, E, rng);
            detail::add_linear(ps, "head", E, flat, rng, 0.02, cfg.zero_output_head);
        } else {
            detail::add_linear(ps, "tok", cfg.state_dim, E, rng);
            Mat<S>& pos = ps.add("pos", cfg.horizon, E);
            for (Eigen::Index i = 0; i < pos.size(); ++i)
                pos.data()[i] = static_cast<S>(rng.trunc_normal(0.02));
            for (int k = 0; k < cfg.n_blocks; ++k) {
                std::string p = "blk" + std::to_string(k);
                detail::add_linear(ps, p + ".mod", E, 6 * E, rng, 0.02, true);
                detail::add_linear(ps, p + ".q", E, E, rng);
                detail::add_linear(ps, p + ".k", E, E, rng);
                detail::add_linear(ps, p + ".v", E, E, rng);
                detail::add_linear(ps, p + ".o", E, E, rng);
                detail::add_linear(ps, p + ".ffn0", E, 2 * E, rng);
                detail::add_linear(ps, p + ".ffn1", 2 * E, E, rng);
            }
            detail::add_linear(ps, "final.mod", E, 2 * E, rng, 0.02, true);
            detail::add_linear(ps, "head", E, cfg.state_dim, rng, 0.02, cfg.zero_output_head);
        }
        return ps;
    }

    // x_t: [B*H x state_dim], t: [B], cond: [B x 2n] (all-zero row = null token)
    Var<S> forward(Tape<S>& tp, const Bound<S>& b, const Mat<S>& x_t, const VecX& t,
                   const Mat<S>& cond) const {
        const int B = static_cast<int>(t.size());
        const int H = cfg.horizon;
        if (x_t.rows() != static_cast<Eigen::Index>(B) * H || x_t.cols() != cfg.state_dim)
            throw ConfigError("denoiser: bad x_t shape");
        if (cond.rows() != B || cond.cols() != cfg.cond_dim())
            throw ConfigError("denoiser: bad cond shape");

        Var<S> te = input(tp, Mat<S>(sin_time_embed(t, cfg.time_embed_dim).cast<S>()));
        Var<S> ce = input(tp, Mat<S>(cond));
        Var<S> e = add(detail::apply_embed_mlp(b, "temb", te),
                       detail::apply_embed_mlp(b, "cemb", ce));

        if (cfg.resolved_arch() == DenoiserArch::Mlp) {
            Var<S> xf = reshape(input(tp, Mat<S>(x_t)), B, H * cfg.state_dim);
            Var<S> h = concat_cols(xf, e);
            h = mish(detail::apply_linear(b, "trunk.l0", h));
            h = mish(detail::apply_linear(b, "trunk.l1", h));
            Var<S> out = detail::apply_linear(b, "head", h);
            return reshape(out, B * H, cfg.state_dim);
        }

        const int E = cfg.embed_dim;
        Var<S> tok = detail::apply_linear(b, "tok", input(tp, Mat<S>(x_t)));
        tok = add_tile_rows(tok, b["pos"]);
        Var<S> em = mish(e);
        for (int k = 0; k < cfg.n_blocks; ++k) {
            std::string p = "blk" + std::to_string(k);
            Var<S> m = detail::apply_linear(b, p + ".mod", em);
            Var<S> sh1 = slice_cols(m, 0, E), sc1 = slice_cols(m, E, E),
                   g1 = slice_cols(m, 2 * E, E), sh2 = slice_cols(m, 3 * E, E),
                   sc2 = slice_cols(m, 4 * E, E), g2 = slice_cols(m, 5 * E, E);
            Var<S> h = layer_norm_rows(tok);
            h = add(cmul(h, repeat_rows(add_scalar(sc1, S(1)), H)), repeat_rows(sh1, H));
            Var<S> q = detail::apply_linear(b, p + ".q", h);
            Var<S> kk = detail::apply_linear(b, p + ".k", h);
            Var<S> v = detail::apply_linear(b, p + ".v", h);
            Var<S> attn = self_attention(q, kk, v, H, cfg.n_heads);
            attn = detail::apply_linear(b, p + ".o", attn);
            tok = add(tok, cmul(repeat_rows(g1, H), attn));
            Var<S> h2 = layer_norm_rows(tok);
            h2 = add(cmul(h2, repeat_rows(add_scalar(sc2, S(1)), H)), repeat_rows(sh2, H));
            Var<S> f = detail::apply_linear(
                b, p + ".ffn1", mish(detail::apply_linear(b, p + ".ffn0", h2)));
            tok = add(tok, cmul(repeat_rows(g2, H), f));
        }
        Var<S> m = detail::apply_linear(b, "final.mod", em);
        Var<S> sh = slice_cols(m, 0, E), sc = slice_cols(m, E, E);
        Var<S> h = layer_norm_rows(tok);
        h = add(cmul(h, repeat_rows(add_scalar(sc, S(1)), H)), repeat_rows(sh, H));
        return detail::apply_linear(b, "head", h);
    }

    // Inference without gradient tracking.
    Mat<S> predict(const ParamSet<S>& ps, const Mat<S>& x_t, const VecX& t,
                   const Mat<S>& cond) const {
        Tape<S> tp;
        tp.grad_enabled = false;
        Bound<S> b = bind(tp, ps);
        return forward(tp, b, x_t, t, cond).val();
    }
};

// Maps a preference vector to an estimated best achievable return vector.
struct PredictorConfig {
    int n_obj = 2;
    int hidden = 64;
};

template <class S>
struct ReturnPredictor {
    PredictorConfig cfg;

    explicit ReturnPredictor(PredictorConfig c = {}) : cfg(c) {}

    ParamSet<S> init_params(Rng& rng) const {
        ParamSet<S> ps;
        detail::add_linear(ps, "l0", cfg.n_obj, cfg.hidden, rng);
        detail::add_linear(ps, "l1", cfg.hidden, cfg.hidden, rng);
        detail::add_linear(ps, "head", cfg.hidden, cfg.n_obj, rng, 0.02, true);
        return ps;
    }

    Var<S> forward(Tape<S>&, const Bound<S>& b, Var<S> omega) const {
        Var<S> h = mish(detail::apply_linear(b, "l0", omega));
        h = mish(detail::apply_linear(b, "l1", h));
        return detail::apply_linear(b, "head", h);
    }

    Mat<S> predict(const ParamSet<S>& ps, const Mat<S>& omega) const {
        Tape<S> tp;
        tp.grad_enabled = false;
        Bound<S> b = bind(tp, ps);
        return forward(tp, b, input(tp, omega)).val();
    }
};

// Recovers the action connecting two consecutive states. Hidden blocks are
// Linear -> Mish -> LayerNorm (affine); the bounded head keeps outputs in
// [-1, 1].
struct InvDynConfig {
    int state_dim = 2;
    int action_dim = 1;
    int hidden = 64;
};

template <class S>
struct InvDyn {
    InvDynConfig cfg;

    explicit InvDyn(InvDynConfig c = {}) : cfg(c) {}

    ParamSet<S> init_params(Rng& rng) const {
        ParamSet<S> ps;
        detail::add_linear(ps, "l0", 2 * cfg.state_dim, cfg.hidden, rng);
        ps.add("ln0.g", 1, cfg.hidden).setOnes();
        ps.add("ln0.b", 1, cfg.hidden);
        detail::add_linear(ps, "l1", cfg.hidden, cfg.hidden, rng);
        ps.add("ln1.g", 1, cfg.hidden).setOnes();
        ps.add("ln1.b", 1, cfg.hidden);
        detail::add_linear(ps, "head", cfg.hidden, cfg.action_dim, rng, 0.02, true);
        return ps;
    }

    Var<S> forward(Tape<S>&, const Bound<S>& b, Var<S> s_pair) const {
        Var<S> h = mish(detail::apply_linear(b, "l0", s_pair));
        h = add_rowvec(cmul_rowvec(layer_norm_rows(h), b["ln0.g"]), b["ln0.b"]);
        h = mish(detail::apply_linear(b, "l1", h));
        h = add_rowvec(cmul_rowvec(layer_norm_rows(h), b["ln1.g"]), b["ln1.b"]);
        return tanh_act(detail::apply_linear(b, "head", h));
    }

    Mat<S> predict(const ParamSet<S>& ps, const Mat<S>& s_pair) const {
        Tape<S> tp;
        tp.grad_enabled = false;
        Bound<S> b = bind(tp, ps);
        return forward(tp, b, input(tp, s_pair)).val();
    }
};

// Predicts the condition vector from a noisy window, for classifier guidance.
struct ClassifierConfig {
    int horizon = 4;
    int state_dim = 2;
    int n_obj = 2;
    int hidden = 64;
    int time_embed_dim = 32;
};

template <class S>
struct GuidanceClassifier {
    ClassifierConfig cfg;

    explicit GuidanceClassifier(ClassifierConfig c = {}) : cfg(c) {}

    ParamSet<S> init_params(Rng& rng) const {
        ParamSet<S> ps;
        const int flat = cfg.horizon * cfg.state_dim;
        detail::add_embed_mlp(ps, "temb", cfg.time_embed_dim, cfg.hidden, rng);
        detail::add_linear(ps, "l0", flat + cfg.hidden, cfg.hidden, rng);
        detail::add_linear(ps, "l1", cfg.hidden, cfg.hidden, rng);
        detail::add_linear(ps, "head", cfg.hidden, 2 * cfg.n_obj, rng);
        return ps;
    }

    // x_t enters as a tape variable so callers can differentiate w.r.t. it.
    Var<S> forward(Tape<S>& tp, const Bound<S>& b, Var<S> x_t, const VecX& t) const {
        const int B = static_cast<int>(t.size());
        Var<S> te = input(tp, Mat<S>(sin_time_embed(t, cfg.time_embed_dim).cast<S>()));
        Var<S> e = detail::apply_embed_mlp(b, "temb", te);
        Var<S> xf = reshape(x_t, B, cfg.horizon * cfg.state_dim);
        Var<S> h = concat_cols(xf, e);
        h = mish(detail::apply_linear(b, "l0", h));
        h = mish(detail::apply_linear(b, "l1", h));
        return detail::apply_linear(b, "head", h);
    }
};

}  // namespace modp

#endif
