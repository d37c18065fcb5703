// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "modp/metrics.hpp"
#include "testutil.hpp"

using namespace modp;
using namespace modp::test;

namespace {

MatX points(std::initializer_list<std::pair<double, double>> ps) {
    MatX m(static_cast<Eigen::Index>(ps.size()), 2);
    Eigen::Index i = 0;
    for (const auto& [a, b] : ps) {
        m(i, 0) = a;
        m(i, 1) = b;
        ++i;
    }
    return m;
}

VecX origin() { return VecX::Zero(2); }

}  // namespace

TEST_CASE("non-dominated filtering uses strict componentwise dominance") {
    MatX single = points({{1, 1}});
    CHECK(bitwise_equal(non_dominated(single), single));

    MatX three = points({{2, 3}, {3, 1}, {1, 1}});
    MatX front = non_dominated(three);
    REQUIRE(front.rows() == 2);
    CHECK(front(0, 0) == 3.0);
    CHECK(front(1, 0) == 2.0);

    // ties in one component survive (dominance must be strict everywhere)
    MatX tied = points({{2, 3}, {2, 1}});
    CHECK(non_dominated(tied).rows() == 2);

    MatX dup = points({{2, 3}, {2, 3}, {1, 4}});
    MatX dedup = non_dominated(dup);
    CHECK(dedup.rows() == 2);

    // idempotent and order-invariant
    MatX shuffled = points({{1, 1}, {3, 1}, {2, 3}});
    CHECK(bitwise_equal(non_dominated(shuffled), front));
    CHECK(bitwise_equal(non_dominated(front), front));
}

TEST_CASE("exact hypervolume matches hand-computed rectangles") {
    VecX r0 = origin();
    CHECK(hypervolume_2d(points({{2, 3}}), r0) == 6.0);
    CHECK(hypervolume_2d(points({{2, 3}, {3, 1}}), r0) == 7.0);

    // a dominated point adds no area
    CHECK(hypervolume_2d(points({{2, 3}, {3, 1}, {1, 1}}), r0) == 7.0);

    // points not dominating the reference are excluded and counted
    int excluded = 0;
    CHECK(hypervolume_2d(points({{2, 3}, {-1, 5}}), r0, &excluded) == 6.0);
    CHECK(excluded == 1);

    VecX shifted(2);
    shifted << 1, 1;
    CHECK(hypervolume_2d(points({{2, 3}}), shifted) == 2.0);
}

TEST_CASE("adding a non-dominated point never shrinks the hypervolume") {
    Rng rng(3);
    VecX r0 = origin();
    for (int trial = 0; trial < 20; ++trial) {
        MatX pts(6, 2);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform() + 0.05;
        MatX front = non_dominated(pts);
        double hv = hypervolume_2d(front, r0);

        MatX extra(front.rows() + 1, 2);
        extra.topRows(front.rows()) = front;
        extra(front.rows(), 0) = front.col(0).maxCoeff() + 0.1;
        extra(front.rows(), 1) = 0.01;
        CHECK(hypervolume_2d(extra, r0) >= hv);
    }
}

TEST_CASE("monte-carlo hypervolume agrees with the exact sweep") {
    Rng rng(9);
    VecX r0 = origin();
    for (int trial = 0; trial < 20; ++trial) {
        MatX pts(5, 2);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = 0.1 + rng.uniform();
        MatX front = non_dominated(pts);
        const double exact = hypervolume_2d(front, r0);

        const int64_t n = 20000;
        Rng mc(100 + static_cast<uint64_t>(trial));
        const double est = hypervolume_mc(front, r0, n, mc);

        double box = front.col(0).maxCoeff() * front.col(1).maxCoeff();
        double p = exact / box;
        double se = box * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        CHECK(std::abs(est - exact) < 3.0 * se + 1e-12);
    }

    Rng mc(1);
    CHECK_THROWS_AS(hypervolume_mc(points({{1, 1}}), r0, 0, mc), ConfigError);

    Rng m1(5), m2(5);
    CHECK(hypervolume_mc(points({{1, 2}, {2, 1}}), r0, 1000, m1) ==
          hypervolume_mc(points({{1, 2}, {2, 1}}), r0, 1000, m2));
}

TEST_CASE("sparsity is the mean squared staircase gap") {
    CHECK(sparsity(points({{1, 3}, {3, 1}})) == 8.0);
    CHECK(sparsity(points({{2, 2}, {2, 2}, {2, 2}})) == 0.0);
    CHECK(sparsity(points({{5, 7}})) == 0.0);
    CHECK(sparsity(MatX(0, 2)) == 0.0);

    // invariant to duplication once the front is deduplicated
    MatX front = points({{1, 3}, {3, 1}});
    MatX dup = points({{1, 3}, {3, 1}, {1, 3}});
    CHECK(sparsity(non_dominated(dup)) == sparsity(front));
}
