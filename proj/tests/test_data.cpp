// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <algorithm>
#include <set>

#include "modp/dataset.hpp"
#include "testutil.hpp"

using namespace modp;
using namespace modp::test;

namespace {

Dataset toy_dataset(int n_traj, Quality q, uint64_t seed) {
    EnvConfig env;
    CollectConfig cc;
    cc.n_traj = n_traj;
    cc.quality = q;
    return make_dataset(env, cc, seed);
}

std::vector<double> sorted_omega1(const Dataset& ds) {
    std::vector<double> w;
    for (const auto& t : ds.trajs) w.push_back(t.omega(0));
    std::sort(w.begin(), w.end());
    return w;
}

std::vector<double> gaps(const std::vector<double>& w) {
    std::vector<double> g;
    for (size_t i = 0; i + 1 < w.size(); ++i) g.push_back(w[i + 1] - w[i]);
    return g;
}

}  // namespace

TEST_CASE("returns-to-go are suffix sums with per-step mean") {
    Trajectory t;
    t.rewards = MatX(1, 2);
    t.rewards << 2, 3;
    compute_rtg(t);
    CHECK(t.rtg(0, 0) == 2.0);
    CHECK(t.rtg(0, 1) == 3.0);
    CHECK(t.traj_rtg(0) == 2.0);
    CHECK(t.traj_rtg(1) == 3.0);

    t.rewards = MatX(2, 2);
    t.rewards << 1, 0, 1, 0;
    compute_rtg(t);
    CHECK(t.rtg(0, 0) == 2.0);
    CHECK(t.rtg(1, 0) == 1.0);
    CHECK(t.rtg(0, 1) == 0.0);
    CHECK(t.traj_rtg(0) == 1.5);
    CHECK(t.traj_rtg(1) == 0.0);

    Rng rng(4);
    t.rewards = MatX(32, 2);
    for (Eigen::Index i = 0; i < t.rewards.size(); ++i) t.rewards.data()[i] = rng.normal();
    compute_rtg(t);
    VecX total = t.rewards.colwise().sum();
    CHECK((t.rtg.row(0).transpose() - total).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index k = 0; k + 1 < t.rewards.rows(); ++k)
        CHECK((t.rtg.row(k) - t.rtg.row(k + 1) - t.rewards.row(k)).cwiseAbs().maxCoeff() <
              1e-12);

    MatX before = t.rtg;
    compute_rtg(t);
    CHECK(bitwise_equal(before, t.rtg));
}

TEST_CASE("shattered slicing removes the documented counts") {
    Dataset ds = toy_dataset(100, Quality::Expert, 11);
    SliceResult res = slice_shattered(ds, 30.0, 3);
    CHECK(res.ds.trajs.size() == 70);
    CHECK(res.removed_ids.size() == 30);
    CHECK(res.ds.manifest.slice.kind == "shattered");
    CHECK(res.ds.manifest.slice.removed_regions.size() == 3);

    std::set<int> removed(res.removed_ids.begin(), res.removed_ids.end());
    std::set<int> kept;
    for (const auto& t : res.ds.trajs) kept.insert(t.id);
    CHECK(kept.size() + removed.size() == 100);
    for (int id : removed) CHECK(kept.count(id) == 0);

    // survivors keep their original contents
    for (const auto& t : res.ds.trajs) {
        const Trajectory& orig = ds.trajs[static_cast<size_t>(t.id)];
        CHECK(bitwise_equal(t.states, orig.states));
        CHECK(bitwise_equal(t.omega, orig.omega));
    }

    SliceResult none = slice_shattered(ds, 0.0, 3);
    CHECK(none.ds.trajs.size() == 100);
    CHECK(none.removed_ids.empty());
}

TEST_CASE("shattered slicing opens gaps wider than any natural gap") {
    Dataset ds = toy_dataset(100, Quality::Expert, 23);
    auto pre = gaps(sorted_omega1(ds));
    const double pre_max = *std::max_element(pre.begin(), pre.end());

    SliceResult res = slice_shattered(ds, 30.0, 3);
    auto post = gaps(sorted_omega1(res.ds));
    int wide = 0;
    for (double g : post) wide += g > pre_max ? 1 : 0;
    CHECK(wide == 3);
}

TEST_CASE("narrow slicing trims both ends of the preference axis") {
    Dataset ds = toy_dataset(100, Quality::Expert, 12);
    SliceResult res = slice_narrow(ds, 30.0);
    CHECK(res.ds.trajs.size() == 70);
    CHECK(res.removed_ids.size() == 30);
    CHECK(res.ds.manifest.slice.removed_regions.size() == 2);

    auto pre = sorted_omega1(ds);
    auto post = sorted_omega1(res.ds);
    CHECK(post.front() > pre.front());
    CHECK(post.back() < pre.back());

    CHECK(slice_narrow(ds, 0.0).ds.trajs.size() == 100);
    CHECK_THROWS_AS(slice_narrow(ds, 100.0), ConfigError);
}

TEST_CASE("ood flags come from the recorded removal intervals") {
    Dataset ds = toy_dataset(100, Quality::Expert, 31);
    SliceResult res = slice_narrow(ds, 30.0);
    const auto& slice = res.ds.manifest.slice;
    REQUIRE(slice.removed_regions.size() == 2);

    VecX w(2);
    w << slice.removed_regions[0][0], 1.0 - slice.removed_regions[0][0];
    CHECK(preference_is_ood(slice, w));
    double mid = 0.5 * (slice.removed_regions[0][1] + slice.removed_regions[1][0]);
    w << mid, 1.0 - mid;
    CHECK(!preference_is_ood(slice, w));
    CHECK(!preference_is_ood(ds.manifest.slice, w));
}

TEST_CASE("segments window the trajectory and edge-pad at the end") {
    Trajectory t;
    t.states = MatX(4, 2);
    t.states << 0, 0, 1, 10, 2, 20, 3, 30;
    t.omega = VecX(2);
    t.omega << 0.25, 0.75;
    t.g_norm = VecX(2);
    t.g_norm << 0.5, 0.5;

    Segment s = make_segment(t, 1, 2);
    CHECK(s.x0(0, 0) == 1.0);
    CHECK(s.x0(1, 0) == 2.0);
    CHECK(s.next_state_index == 1);

    Segment padded = make_segment(t, 2, 4);
    CHECK(padded.x0(0, 0) == 2.0);
    CHECK(padded.x0(1, 0) == 3.0);
    CHECK(padded.x0(2, 0) == 3.0);
    CHECK(padded.x0(3, 0) == 3.0);
}

TEST_CASE("batching covers full episodes from the start when H equals T") {
    Dataset ds = toy_dataset(5, Quality::Expert, 3);
    for (auto& t : ds.trajs) t.g_norm = VecX::Zero(2);
    Rng rng(1);
    auto batch = batch_segments(ds, 32, 16, rng);
    for (const auto& seg : batch) {
        bool found = false;
        for (const auto& t : ds.trajs)
            if (bitwise_equal(seg.x0, t.states)) found = true;
        CHECK(found);
    }
}

TEST_CASE("batching is deterministic and uniform over trajectories") {
    Dataset ds = toy_dataset(20, Quality::Expert, 3);
    for (auto& t : ds.trajs) {
        t.g_norm = VecX::Zero(2);
        t.g_norm(0) = t.id;  // tag so segments can be attributed
    }
    Rng r1(77), r2(77);
    auto a = batch_segments(ds, 4, 64, r1);
    auto b = batch_segments(ds, 4, 64, r2);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(bitwise_equal(a[i].x0, b[i].x0));
        CHECK(bitwise_equal(a[i].omega, b[i].omega));
    }

    Rng r3(5);
    const int n_samples = 100000;
    std::vector<int> count(20, 0);
    auto big = batch_segments(ds, 4, n_samples, r3);
    for (const auto& seg : big) count[static_cast<size_t>(seg.g(0))]++;
    const double expect = n_samples / 20.0;
    const double sd = std::sqrt(n_samples * (1.0 / 20.0) * (19.0 / 20.0));
    for (int c : count) CHECK(std::abs(c - expect) < 3.0 * sd);

    Dataset empty;
    Rng r4(1);
    CHECK_THROWS_AS(batch_segments(empty, 4, 1, r4), ConfigError);
    CHECK_THROWS_AS(batch_segments(ds, 1, 1, r4), ConfigError);
}

TEST_CASE("state statistics normalize to zero mean and unit variance") {
    Dataset ds = toy_dataset(50, Quality::Amateur, 8);
    StateStats st = compute_state_stats(ds);

    int64_t n = 0;
    VecX sum = VecX::Zero(2), sq = VecX::Zero(2);
    for (const auto& t : ds.trajs) {
        MatX z = st.normalize_rows(t.states);
        sum += z.colwise().sum();
        sq += z.array().square().colwise().sum().matrix();
        n += z.rows();
        CHECK((st.denormalize_rows(z) - t.states).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK((sum / n).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(((sq / n).array() - 1.0).abs().maxCoeff() < 1e-10);

    VecX one_state = ds.trajs[0].states.row(3);
    CHECK((st.denormalize(st.normalize(one_state)) - one_state).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dataset save and load round-trip exactly") {
    Dataset ds = toy_dataset(10, Quality::Amateur, 44);
    SliceResult sliced = slice_shattered(ds, 30.0, 3);
    TempDir dir("dataset");
    save_dataset(sliced.ds, dir.str());
    Dataset back = load_dataset(dir.str());

    REQUIRE(back.trajs.size() == sliced.ds.trajs.size());
    for (size_t i = 0; i < back.trajs.size(); ++i) {
        CHECK(bitwise_equal(back.trajs[i].omega, sliced.ds.trajs[i].omega));
        CHECK(bitwise_equal(back.trajs[i].states, sliced.ds.trajs[i].states));
        CHECK(bitwise_equal(back.trajs[i].actions, sliced.ds.trajs[i].actions));
        CHECK(bitwise_equal(back.trajs[i].rewards, sliced.ds.trajs[i].rewards));
        CHECK(bitwise_equal(back.trajs[i].rtg, sliced.ds.trajs[i].rtg));
        CHECK(back.trajs[i].perturbed == sliced.ds.trajs[i].perturbed);
    }
    CHECK(back.manifest.quality == "amateur");
    CHECK(back.manifest.slice.kind == "shattered");
    CHECK(back.manifest.slice.removed_regions.size() == 3);
    CHECK(back.manifest.n_traj == static_cast<int>(back.trajs.size()));

    TempDir dir2("dataset2");
    save_dataset(back, dir2.str());
    CHECK(dataset_digest(dir.str()) == dataset_digest(dir2.str()));
}

TEST_CASE("perturbed counts reach the manifest") {
    Dataset ds = toy_dataset(200, Quality::Amateur, 15);
    int n = 0;
    for (const auto& t : ds.trajs) n += t.perturbed ? 1 : 0;
    CHECK(ds.manifest.n_perturbed == n);
    CHECK(n > 0);

    Dataset expert = toy_dataset(50, Quality::Expert, 15);
    CHECK(expert.manifest.n_perturbed == 0);
}
