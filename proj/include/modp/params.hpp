// SPDX-License-Identifier: MIT
#ifndef MODP_PARAMS_HPP
#define MODP_PARAMS_HPP

#include <map>
#include <string>

#include "modp/tape.hpp"

namespace modp {

// Ordered, named collection of dense parameter matrices. Iteration order is
// insertion order so optimizer state and serialization stay aligned.
template <class S>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Mat<S>> values;
    std::map<std::string, int> index;

    // The returned reference is invalidated by the next add().
    Mat<S>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        if (index.count(name)) throw ConfigError("duplicate parameter name: " + name);
        index[name] = static_cast<int>(values.size());
        names.push_back(name);
        values.push_back(Mat<S>::Zero(rows, cols));
        return values.back();
    }

    int idx(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError("unknown parameter name: " + name);
        return it->second;
    }

    Mat<S>& at(const std::string& name) { return values[static_cast<size_t>(idx(name))]; }
    const Mat<S>& at(const std::string& name) const {
        return values[static_cast<size_t>(idx(name))];
    }

    size_t size() const { return values.size(); }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& m : values) n += m.size();
        return n;
    }

    Vec<S> flatten() const {
        Vec<S> out(param_count());
        Eigen::Index k = 0;
        for (const auto& m : values) {
            for (Eigen::Index i = 0; i < m.size(); ++i) out(k++) = m.data()[i];
        }
        return out;
    }

    void unflatten(const Vec<S>& flat) {
        if (flat.size() != param_count()) throw ConfigError("unflatten: size mismatch");
        Eigen::Index k = 0;
        for (auto& m : values) {
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = flat(k++);
        }
    }

    void fill_trunc_normal(Rng& rng, S sd) {
        for (auto& m : values)
            for (Eigen::Index i = 0; i < m.size(); ++i)
                m.data()[i] = static_cast<S>(rng.trunc_normal(sd));
    }
};

// Parameters inserted into a tape as leaves for one forward/backward pass.
template <class S>
struct Bound {
    const ParamSet<S>* ps = nullptr;
    std::vector<Var<S>> vars;

    Var<S> operator[](const std::string& name) const {
        return vars[static_cast<size_t>(ps->idx(name))];
    }
};

template <class S>
Bound<S> bind(Tape<S>& t, const ParamSet<S>& ps) {
    Bound<S> b;
    b.ps = &ps;
    b.vars.reserve(ps.size());
    for (const auto& m : ps.values) b.vars.push_back(input(t, m));
    return b;
}

// Gradients for every parameter, aligned with ParamSet order. Call after
// tape.backward().
template <class S>
std::vector<Mat<S>> collect_grads(Tape<S>& t, const Bound<S>& b) {
    std::vector<Mat<S>> out;
    out.reserve(b.vars.size());
    for (const auto& v : b.vars) out.push_back(t.grad(v.id));
    return out;
}

}  // namespace modp

#endif
