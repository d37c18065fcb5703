// SPDX-License-Identifier: MIT
#ifndef MODP_TAPE_HPP
#define MODP_TAPE_HPP

#include <functional>
#include <utility>

#include "modp/common.hpp"

namespace modp {

// Reverse-mode automatic differentiation over dense row-major matrices.
// Each operation appends a node holding its value and a closure that scatters
// the node's adjoint into its parents. backward() walks the nodes in reverse
// creation order, so the tape must be rebuilt for every new function
// evaluation. With grad enabled off, ops compute values only (inference mode).
template <class S>
class Tape {
public:
    struct Node {
        Mat<S> val;
        Mat<S> grad;
        std::function<void(Tape&, const Mat<S>&)> back;
    };

    bool grad_enabled = true;

    void reset() { nodes_.resize(0); }

    int size() const { return static_cast<int>(nodes_.size()); }

    int push(Mat<S> val, std::function<void(Tape&, const Mat<S>&)> back = nullptr) {
        Node n;
        n.val = std::move(val);
        if (grad_enabled) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Mat<S>& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }

    // Adjoint accumulator, lazily sized to the node's value shape.
    Mat<S>& grad(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.val.rows(), n.val.cols());
        return n.grad;
    }

    void backward(int loss_id) {
        if (!grad_enabled) throw ConfigError("backward() called on a no-grad tape");
        const Node& loss = nodes_[static_cast<size_t>(loss_id)];
        if (loss.val.size() != 1) throw ConfigError("backward() requires a scalar loss node");
        grad(loss_id).setConstant(S(1));
        for (int i = loss_id; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.back && n.grad.size() != 0) n.back(*this, n.grad);
        }
    }

private:
    std::vector<Node> nodes_;
};

template <class S>
struct Var {
    Tape<S>* tape = nullptr;
    int id = -1;

    const Mat<S>& val() const { return tape->val(id); }
    const Mat<S>& grad() const { return tape->grad(id); }
    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }
};

namespace detail {

template <class S>
void check_same_tape(Var<S> a, Var<S> b) {
    if (a.tape != b.tape) throw ConfigError("operands live on different tapes");
}

template <class S>
void check_same_shape(Var<S> a, Var<S> b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ConfigError(std::string(op) + ": shape mismatch");
}

}  // namespace detail

template <class S>
Var<S> input(Tape<S>& t, Mat<S> m) {
    return {&t, t.push(std::move(m))};
}

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimension mismatch");
    Tape<S>& t = *a.tape;
    Mat<S> out = a.val() * b.val();
    int ia = a.id, ib = b.id;
    return {&t, t.push(std::move(out), [ia, ib](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia).noalias() += g * tp.val(ib).transpose();
                tp.grad(ib).noalias() += tp.val(ia).transpose() * g;
            })};
}

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b, "add");
    Tape<S>& t = *a.tape;
    int ia = a.id, ib = b.id;
    return {&t, t.push(a.val() + b.val(), [ia, ib](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia) += g;
                tp.grad(ib) += g;
            })};
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b, "sub");
    Tape<S>& t = *a.tape;
    int ia = a.id, ib = b.id;
    return {&t, t.push(a.val() - b.val(), [ia, ib](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia) += g;
                tp.grad(ib) -= g;
            })};
}

template <class S>
Var<S> cmul(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b, "cmul");
    Tape<S>& t = *a.tape;
    int ia = a.id, ib = b.id;
    return {&t, t.push(a.val().cwiseProduct(b.val()), [ia, ib](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia) += g.cwiseProduct(tp.val(ib));
                tp.grad(ib) += g.cwiseProduct(tp.val(ia));
            })};
}

template <class S>
Var<S> scale(Var<S> a, S c) {
    Tape<S>& t = *a.tape;
    int ia = a.id;
    return {&t, t.push(a.val() * c, [ia, c](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia) += g * c;
            })};
}

template <class S>
Var<S> add_scalar(Var<S> a, S c) {
    Tape<S>& t = *a.tape;
    int ia = a.id;
    Mat<S> out = (a.val().array() + c).matrix();
    return {&t, t.push(std::move(out), [ia](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia) += g;
            })};
}

// y = x + broadcast of row vector b over all rows
template <class S>
Var<S> add_rowvec(Var<S> x, Var<S> b) {
    detail::check_same_tape(x, b);
    if (b.rows() != 1 || b.cols() != x.cols()) throw ConfigError("add_rowvec: shape mismatch");
    Tape<S>& t = *x.tape;
    Mat<S> out = x.val().rowwise() + b.val().row(0);
    int ix = x.id, ib = b.id;
    return {&t, t.push(std::move(out), [ix, ib](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ix) += g;
                tp.grad(ib) += g.colwise().sum();
            })};
}

// y = x (.*) broadcast of row vector w over all rows
template <class S>
Var<S> cmul_rowvec(Var<S> x, Var<S> w) {
    detail::check_same_tape(x, w);
    if (w.rows() != 1 || w.cols() != x.cols()) throw ConfigError("cmul_rowvec: shape mismatch");
    Tape<S>& t = *x.tape;
    Mat<S> out = (x.val().array().rowwise() * w.val().row(0).array()).matrix();
    int ix = x.id, iw = w.id;
    return {&t, t.push(std::move(out), [ix, iw](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ix).array() += g.array().rowwise() * tp.val(iw).row(0).array();
                tp.grad(iw) += g.cwiseProduct(tp.val(ix)).colwise().sum();
            })};
}

// x has rows B*k (k consecutive rows per group); p has k rows added to every group.
template <class S>
Var<S> add_tile_rows(Var<S> x, Var<S> p) {
    detail::check_same_tape(x, p);
    const Eigen::Index k = p.rows();
    if (k == 0 || x.rows() % k != 0 || x.cols() != p.cols())
        throw ConfigError("add_tile_rows: shape mismatch");
    Tape<S>& t = *x.tape;
    Mat<S> out = x.val();
    const Eigen::Index groups = x.rows() / k;
    for (Eigen::Index g = 0; g < groups; ++g) out.middleRows(g * k, k) += p.val();
    int ix = x.id, ip = p.id;
    return {&t, t.push(std::move(out), [ix, ip, k, groups](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ix) += g;
                Mat<S>& gp = tp.grad(ip);
                for (Eigen::Index i = 0; i < groups; ++i) gp += g.middleRows(i * k, k);
            })};
}

// [B x C] -> [B*k x C], each row repeated k times consecutively.
template <class S>
Var<S> repeat_rows(Var<S> e, int k) {
    if (k <= 0) throw ConfigError("repeat_rows: k must be positive");
    Tape<S>& t = *e.tape;
    const Eigen::Index B = e.rows(), C = e.cols();
    Mat<S> out(B * k, C);
    for (Eigen::Index i = 0; i < B; ++i)
        for (int j = 0; j < k; ++j) out.row(i * k + j) = e.val().row(i);
    int ie = e.id;
    return {&t, t.push(std::move(out), [ie, k, B](Tape<S>& tp, const Mat<S>& g) {
                Mat<S>& ge = tp.grad(ie);
                for (Eigen::Index i = 0; i < B; ++i)
                    for (int j = 0; j < k; ++j) ge.row(i) += g.row(i * k + j);
            })};
}

template <class S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    if (a.rows() != b.rows()) throw ConfigError("concat_cols: row count mismatch");
    Tape<S>& t = *a.tape;
    Mat<S> out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a.val();
    out.rightCols(b.cols()) = b.val();
    int ia = a.id, ib = b.id;
    Eigen::Index ca = a.cols(), cb = b.cols();
    return {&t, t.push(std::move(out), [ia, ib, ca, cb](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ia) += g.leftCols(ca);
                tp.grad(ib) += g.rightCols(cb);
            })};
}

template <class S>
Var<S> slice_cols(Var<S> x, int c0, int n) {
    if (c0 < 0 || n <= 0 || c0 + n > x.cols()) throw ConfigError("slice_cols: out of range");
    Tape<S>& t = *x.tape;
    int ix = x.id;
    return {&t, t.push(x.val().middleCols(c0, n), [ix, c0, n](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ix).middleCols(c0, n) += g;
            })};
}

// Row-major logical reshape; with row-major storage this is a flat copy.
template <class S>
Var<S> reshape(Var<S> x, int r, int c) {
    if (static_cast<Eigen::Index>(r) * c != x.val().size()) throw ConfigError("reshape: element count mismatch");
    Tape<S>& t = *x.tape;
    Mat<S> out = Eigen::Map<const Mat<S>>(x.val().data(), r, c);
    int ix = x.id;
    return {&t, t.push(std::move(out), [ix](Tape<S>& tp, const Mat<S>& g) {
                Mat<S>& gx = tp.grad(ix);
                gx += Eigen::Map<const Mat<S>>(g.data(), gx.rows(), gx.cols());
            })};
}

template <class S>
Var<S> mish(Var<S> x) {
    Tape<S>& t = *x.tape;
    auto softplus = [](S v) { return v > S(20) ? v : std::log1p(std::exp(v)); };
    Mat<S> out = x.val().unaryExpr([&](S v) { return v * std::tanh(softplus(v)); });
    int ix = x.id;
    return {&t, t.push(std::move(out), [ix, softplus](Tape<S>& tp, const Mat<S>& g) {
                const Mat<S>& xv = tp.val(ix);
                tp.grad(ix) += g.cwiseProduct(xv.unaryExpr([&](S v) {
                    S th = std::tanh(softplus(v));
                    S sig = S(1) / (S(1) + std::exp(-v));
                    return th + v * (S(1) - th * th) * sig;
                }));
            })};
}

template <class S>
Var<S> tanh_act(Var<S> x) {
    Tape<S>& t = *x.tape;
    Mat<S> out = x.val().array().tanh().matrix();
    int ix = x.id;
    Mat<S> y = out;
    return {&t, t.push(std::move(out), [ix, y = std::move(y)](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ix).array() += g.array() * (S(1) - y.array().square());
            })};
}

template <class S>
Var<S> sum_all(Var<S> x) {
    Tape<S>& t = *x.tape;
    Mat<S> out(1, 1);
    out(0, 0) = x.val().sum();
    int ix = x.id;
    return {&t, t.push(std::move(out), [ix](Tape<S>& tp, const Mat<S>& g) {
                tp.grad(ix).array() += g(0, 0);
            })};
}

// Row-wise layer normalization without affine parameters.
template <class S>
Var<S> layer_norm_rows(Var<S> x, S eps = S(1e-5)) {
    Tape<S>& t = *x.tape;
    const Eigen::Index R = x.rows(), C = x.cols();
    Mat<S> out(R, C);
    Mat<S> inv_sd(R, 1);
    for (Eigen::Index i = 0; i < R; ++i) {
        S mu = x.val().row(i).mean();
        S var = (x.val().row(i).array() - mu).square().mean();
        S is = S(1) / std::sqrt(var + eps);
        inv_sd(i, 0) = is;
        out.row(i) = ((x.val().row(i).array() - mu) * is).matrix();
    }
    int ix = x.id;
    Mat<S> y = out;
    return {&t, t.push(std::move(out), [ix, y = std::move(y), inv_sd = std::move(inv_sd)](
                           Tape<S>& tp, const Mat<S>& g) {
                Mat<S>& gx = tp.grad(ix);
                for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    S mg = g.row(i).mean();
                    S mgy = (g.row(i).array() * y.row(i).array()).mean();
                    gx.row(i).array() +=
                        inv_sd(i, 0) * (g.row(i).array() - mg - y.row(i).array() * mgy);
                }
            })};
}

// Fused multi-head self-attention. q, k, v are [B*T x E] with E divisible by
// heads; attention runs independently per (sample, head) block.
template <class S>
Var<S> self_attention(Var<S> q, Var<S> k, Var<S> v, int tokens, int heads) {
    detail::check_same_tape(q, k);
    detail::check_same_tape(q, v);
    detail::check_same_shape(q, k, "self_attention");
    detail::check_same_shape(q, v, "self_attention");
    const Eigen::Index E = q.cols();
    if (tokens <= 0 || heads <= 0 || q.rows() % tokens != 0 || E % heads != 0)
        throw ConfigError("self_attention: bad token/head layout");
    Tape<S>& t = *q.tape;
    const Eigen::Index B = q.rows() / tokens;
    const Eigen::Index dh = E / heads;
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));

    Mat<S> out(q.rows(), E);
    std::vector<Mat<S>> probs;
    probs.reserve(static_cast<size_t>(B * heads));
    for (Eigen::Index b = 0; b < B; ++b) {
        for (Eigen::Index h = 0; h < heads; ++h) {
            auto Q = q.val().block(b * tokens, h * dh, tokens, dh);
            auto K = k.val().block(b * tokens, h * dh, tokens, dh);
            auto V = v.val().block(b * tokens, h * dh, tokens, dh);
            Mat<S> scores = Q * K.transpose() * inv_sqrt;
            for (Eigen::Index r = 0; r < tokens; ++r) {
                S mx = scores.row(r).maxCoeff();
                scores.row(r) = (scores.row(r).array() - mx).exp().matrix();
                scores.row(r) /= scores.row(r).sum();
            }
            out.block(b * tokens, h * dh, tokens, dh) = scores * V;
            if (t.grad_enabled) probs.push_back(std::move(scores));
        }
    }
    int iq = q.id, ik = k.id, iv = v.id;
    return {&t, t.push(std::move(out),
                       [iq, ik, iv, probs = std::move(probs), B, tokens, heads, dh, inv_sqrt](
                           Tape<S>& tp, const Mat<S>& g) {
                           Mat<S>& gq = tp.grad(iq);
                           Mat<S>& gk = tp.grad(ik);
                           Mat<S>& gv = tp.grad(iv);
                           size_t pi = 0;
                           for (Eigen::Index b = 0; b < B; ++b) {
                               for (Eigen::Index h = 0; h < heads; ++h, ++pi) {
                                   const Mat<S>& P = probs[pi];
                                   auto Q = tp.val(iq).block(b * tokens, h * dh, tokens, dh);
                                   auto K = tp.val(ik).block(b * tokens, h * dh, tokens, dh);
                                   auto V = tp.val(iv).block(b * tokens, h * dh, tokens, dh);
                                   auto dO = g.block(b * tokens, h * dh, tokens, dh);
                                   Mat<S> dP = dO * V.transpose();
                                   Mat<S> dS(tokens, tokens);
                                   for (Eigen::Index r = 0; r < tokens; ++r) {
                                       S dot = P.row(r).dot(dP.row(r));
                                       dS.row(r) =
                                           (P.row(r).array() * (dP.row(r).array() - dot)).matrix();
                                   }
                                   gv.block(b * tokens, h * dh, tokens, dh).noalias() +=
                                       P.transpose() * dO;
                                   gq.block(b * tokens, h * dh, tokens, dh).noalias() +=
                                       dS * K * inv_sqrt;
                                   gk.block(b * tokens, h * dh, tokens, dh).noalias() +=
                                       dS.transpose() * Q * inv_sqrt;
                               }
                           }
                       })};
}

// mean over all elements of w (.*) (pred - target)^2; target and w are constants.
template <class S>
Var<S> weighted_mse(Var<S> pred, const Mat<S>& target, const Mat<S>& w) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
        w.rows() != target.rows() || w.cols() != target.cols())
        throw ConfigError("weighted_mse: shape mismatch");
    Tape<S>& t = *pred.tape;
    Mat<S> diff = pred.val() - target;
    Mat<S> out(1, 1);
    out(0, 0) = w.cwiseProduct(diff.cwiseAbs2()).sum() / static_cast<S>(diff.size());
    int ip = pred.id;
    const S invN = S(2) / static_cast<S>(diff.size());
    return {&t, t.push(std::move(out), [ip, diff = std::move(diff), w, invN](Tape<S>& tp,
                                                                             const Mat<S>& g) {
                tp.grad(ip) += g(0, 0) * invN * w.cwiseProduct(diff);
            })};
}

template <class S>
Var<S> mse(Var<S> pred, const Mat<S>& target) {
    Mat<S> ones = Mat<S>::Ones(target.rows(), target.cols());
    return weighted_mse(pred, target, ones);
}

template <class S>
Var<S> linear(Var<S> x, Var<S> W, Var<S> b) {
    return add_rowvec(matmul(x, W), b);
}

}  // namespace modp

#endif
