// SPDX-License-Identifier: MIT
#ifndef MODP_TESTUTIL_HPP
#define MODP_TESTUTIL_HPP

#include <filesystem>
#include <functional>
#include <string>

#include "modp/params.hpp"

namespace modp::test {

template <class A, class B>
bool bitwise_equal(const A& a, const B& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return (a.array() == b.array()).all();
}

inline std::string param_hash(const ParamSet<Real>& ps) {
    VecX flat = ps.flatten();
    return fnv1a_hex(std::string_view(reinterpret_cast<const char*>(flat.data()),
                                      sizeof(Real) * static_cast<size_t>(flat.size())));
}

// Central finite differences against an analytic gradient, parameter by
// parameter. loss(ps) must be a pure function of the parameter values.
// Returns the maximum guarded relative error over all parameter scalars.
inline double max_grad_rel_err(ParamSet<Real>& ps,
                               const std::function<double(const ParamSet<Real>&)>& loss,
                               const std::function<std::vector<MatX>(const ParamSet<Real>&)>& grad,
                               double h = 1e-5, double floor = 1e-6) {
    std::vector<MatX> analytic = grad(ps);
    double worst = 0.0;
    for (size_t p = 0; p < ps.size(); ++p) {
        MatX& m = ps.values[p];
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double orig = m.data()[i];
            m.data()[i] = orig + h;
            const double up = loss(ps);
            m.data()[i] = orig - h;
            const double dn = loss(ps);
            m.data()[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            const double an = analytic[p].data()[i];
            const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// Same check restricted to a random sample of coordinates per parameter, for
// networks where full finite differencing is too slow.
inline double sampled_grad_max_rel_err(
    ParamSet<Real>& ps, const std::function<double(const ParamSet<Real>&)>& loss,
    const std::function<std::vector<MatX>(const ParamSet<Real>&)>& grad, Rng& rng,
    int n_per_param, double h = 1e-5, double floor = 1e-6) {
    std::vector<MatX> analytic = grad(ps);
    double worst = 0.0;
    for (size_t p = 0; p < ps.size(); ++p) {
        MatX& m = ps.values[p];
        const int n = static_cast<int>(std::min<Eigen::Index>(m.size(), n_per_param));
        for (int k = 0; k < n; ++k) {
            const auto i = static_cast<Eigen::Index>(
                rng.uniform_int(0, static_cast<int>(m.size()) - 1));
            const double orig = m.data()[i];
            m.data()[i] = orig + h;
            const double up = loss(ps);
            m.data()[i] = orig - h;
            const double dn = loss(ps);
            m.data()[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            const double an = analytic[p].data()[i];
            const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// Analytic gradient of a tape-built loss for use with max_grad_rel_err.
template <class BuildLoss>
std::vector<MatX> tape_grads(const ParamSet<Real>& ps, BuildLoss build) {
    Tape<Real> tape;
    Bound<Real> b = bind(tape, ps);
    Var<Real> loss = build(tape, b);
    tape.backward(loss.id);
    return collect_grads(tape, b);
}

template <class BuildLoss>
double tape_loss(const ParamSet<Real>& ps, BuildLoss build) {
    Tape<Real> tape;
    tape.grad_enabled = false;
    Bound<Real> b = bind(tape, ps);
    return build(tape, b).val()(0, 0);
}

// Unique scratch directory under the build tree, cleaned on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("modp_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string str() const { return path.string(); }
};

}  // namespace modp::test

#endif
