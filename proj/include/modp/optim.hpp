// SPDX-License-Identifier: MIT
#ifndef MODP_OPTIM_HPP
#define MODP_OPTIM_HPP

#include "modp/params.hpp"

namespace modp {

// AdamW with decoupled weight decay: the decay term multiplies the parameter
// directly and is not folded into the moment estimates.
template <class S>
class AdamW {
public:
    S lr = S(2e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);
    S weight_decay = S(1e-5);

    void step(ParamSet<S>& params, const std::vector<Mat<S>>& grads) {
        if (grads.size() != params.size()) throw ConfigError("AdamW: gradient count mismatch");
        if (m_.empty()) {
            for (const auto& p : params.values) {
                m_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
                v_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
            }
        }
        ++t_;
        const S bc1 = S(1) - std::pow(beta1, static_cast<S>(t_));
        const S bc2 = S(1) - std::pow(beta2, static_cast<S>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Mat<S>& p = params.values[i];
            const Mat<S>& g = grads[i];
            m_[i] = beta1 * m_[i] + (S(1) - beta1) * g;
            v_[i] = beta2 * v_[i] + (S(1) - beta2) * g.cwiseAbs2();
            Mat<S> mhat = m_[i] / bc1;
            Mat<S> vhat = v_[i] / bc2;
            p.array() -= lr * (mhat.array() / (vhat.array().sqrt() + eps) +
                               weight_decay * p.array());
        }
    }

    int64_t step_count() const { return t_; }
    const std::vector<Mat<S>>& m() const { return m_; }
    const std::vector<Mat<S>>& v() const { return v_; }

    void restore(int64_t t, std::vector<Mat<S>> m, std::vector<Mat<S>> v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    int64_t t_ = 0;
    std::vector<Mat<S>> m_;
    std::vector<Mat<S>> v_;
};

// Exponential moving average of parameters: shadow' = rate*shadow + (1-rate)*p.
template <class S>
class Ema {
public:
    S rate = S(0.995);

    explicit Ema(S r = S(0.995)) : rate(r) {}

    void update(const ParamSet<S>& params) {
        if (shadow.values.empty()) {
            shadow = params;
            return;
        }
        for (size_t i = 0; i < params.size(); ++i)
            shadow.values[i] = rate * shadow.values[i] + (S(1) - rate) * params.values[i];
    }

    ParamSet<S> shadow;
};

}  // namespace modp

#endif
