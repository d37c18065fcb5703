// SPDX-License-Identifier: MIT
#ifndef MODP_METRICS_HPP
#define MODP_METRICS_HPP

#include <algorithm>
#include <numeric>

#include "modp/common.hpp"

namespace modp {

// p dominates q when p is strictly greater in every component.
template <class S>
bool dominates(const Vec<S>& p, const Vec<S>& q) {
    return (p.array() > q.array()).all();
}

// Keeps the non-dominated rows, deduplicated, sorted by the first objective
// descending (ties by later objectives) so the result is order-invariant.
template <class S>
Mat<S> non_dominated(const Mat<S>& pts) {
    const Eigen::Index n = pts.rows();
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        bool dominated = false;
        for (Eigen::Index j = 0; j < n && !dominated; ++j) {
            if (j == i) continue;
            dominated = (pts.row(j).array() > pts.row(i).array()).all();
        }
        if (!dominated) keep.push_back(static_cast<int>(i));
    }
    auto row_less = [&](int a, int b) {
        for (Eigen::Index c = 0; c < pts.cols(); ++c) {
            if (pts(a, c) != pts(b, c)) return pts(a, c) > pts(b, c);
        }
        return false;
    };
    std::sort(keep.begin(), keep.end(), row_less);
    keep.erase(std::unique(keep.begin(), keep.end(),
                           [&](int a, int b) {
                               return (pts.row(a).array() == pts.row(b).array()).all();
                           }),
               keep.end());
    Mat<S> out(static_cast<Eigen::Index>(keep.size()), pts.cols());
    for (size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = pts.row(keep[k]);
    return out;
}

// Exact two-objective hypervolume by a descending staircase sweep. Points not
// strictly dominating the reference are excluded; excluded_count reports them.
template <class S>
S hypervolume_2d(const Mat<S>& pts, const Vec<S>& r0, int* excluded_count = nullptr) {
    if (r0.size() != 2 || (pts.rows() > 0 && pts.cols() != 2))
        throw ConfigError("hypervolume_2d: two objectives required");
    std::vector<int> idx;
    int excluded = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        if ((pts.row(i).array() > r0.array()).all())
            idx.push_back(static_cast<int>(i));
        else
            ++excluded;
    }
    if (excluded_count) *excluded_count = excluded;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return pts(a, 0) > pts(b, 0); });
    S hv = S(0);
    S y_cover = r0(1);
    for (int i : idx) {
        if (pts(i, 1) > y_cover) {
            hv += (pts(i, 0) - r0(0)) * (pts(i, 1) - y_cover);
            y_cover = pts(i, 1);
        }
    }
    return hv;
}

// Monte-Carlo hypervolume for any objective count: uniform samples over the
// bounding box [r0, componentwise max] counted when dominated by some point.
template <class S>
S hypervolume_mc(const Mat<S>& pts, const Vec<S>& r0, int64_t n_samples, Rng& rng) {
    if (n_samples <= 0) throw ConfigError("hypervolume_mc: n_samples must be positive");
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        if ((pts.row(i).array() > r0.array()).all()) idx.push_back(static_cast<int>(i));
    if (idx.empty()) return S(0);
    Vec<S> hi = pts.row(idx[0]);
    for (int i : idx) hi = hi.cwiseMax(Vec<S>(pts.row(i)));
    S box = S(1);
    for (Eigen::Index c = 0; c < r0.size(); ++c) box *= hi(c) - r0(c);
    if (box <= S(0)) return S(0);
    int64_t hit = 0;
    Vec<S> z(r0.size());
    for (int64_t s = 0; s < n_samples; ++s) {
        for (Eigen::Index c = 0; c < r0.size(); ++c)
            z(c) = r0(c) + (hi(c) - r0(c)) * static_cast<S>(rng.uniform());
        for (int i : idx) {
            if ((z.array() <= pts.row(i).array()).all()) {
                ++hit;
                break;
            }
        }
    }
    return box * static_cast<S>(hit) / static_cast<S>(n_samples);
}

// Mean squared gap between consecutive front points, per objective:
// S(P) = (1/(|P|-1)) * sum_j sum_k (P_j(k) - P_j(k+1))^2, zero when |P| <= 1.
template <class S>
S sparsity(const Mat<S>& front) {
    const Eigen::Index n = front.rows();
    if (n <= 1) return S(0);
    S total = S(0);
    std::vector<S> col(static_cast<size_t>(n));
    for (Eigen::Index c = 0; c < front.cols(); ++c) {
        for (Eigen::Index i = 0; i < n; ++i) col[static_cast<size_t>(i)] = front(i, c);
        std::sort(col.begin(), col.end());
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            S d = col[static_cast<size_t>(i)] - col[static_cast<size_t>(i + 1)];
            total += d * d;
        }
    }
    return total / static_cast<S>(n - 1);
}

}  // namespace modp

#endif
