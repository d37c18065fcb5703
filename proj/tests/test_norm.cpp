// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "modp/normalize.hpp"
#include "testutil.hpp"

using namespace modp;
using namespace modp::test;

namespace {

// Minimal dataset whose trajectory returns are set directly; a single-step
// reward row makes traj_rtg equal the given vector.
Dataset synthetic(const std::vector<std::pair<double, double>>& rtgs,
                  const std::vector<double>& omega1 = {}) {
    Dataset ds;
    ds.manifest.env.n_objectives = 2;
    int id = 0;
    for (const auto& [a, b] : rtgs) {
        Trajectory t;
        t.id = id;
        t.omega = VecX(2);
        double w = omega1.empty() ? 0.5 : omega1[static_cast<size_t>(id)];
        t.omega << w, 1.0 - w;
        t.rewards = MatX(1, 2);
        t.rewards << a, b;
        t.states = MatX::Zero(1, 2);
        t.actions = MatX::Zero(1, 1);
        compute_rtg(t);
        ds.trajs.push_back(std::move(t));
        ++id;
    }
    ds.manifest.n_traj = id;
    return ds;
}

Dataset collected(int n, Quality q, uint64_t seed) {
    EnvConfig env;
    CollectConfig cc;
    cc.n_traj = n;
    cc.quality = q;
    return make_dataset(env, cc, seed);
}

TrainedPredictor constant_predictor(double c0, double c1) {
    TrainedPredictor tp;
    tp.cfg = PredictorConfig{2, 8};
    Rng rng(1);
    tp.params = ReturnPredictor<Real>(tp.cfg).init_params(rng);
    tp.params.at("head.b")(0, 0) = c0;
    tp.params.at("head.b")(0, 1) = c1;
    return tp;
}

double predictor_rel_err(const Dataset& ds, const TrainedPredictor& tp) {
    auto subset = pareto_subset(ds);
    double total = 0.0;
    for (int i : subset) {
        const Trajectory& t = ds.trajs[static_cast<size_t>(i)];
        MatX pred = tp.predict(MatX(t.omega));
        total += (pred.row(0).transpose() - t.traj_rtg).norm() / t.traj_rtg.norm();
    }
    return total / static_cast<double>(subset.size());
}

}  // namespace

TEST_CASE("global normalization is an affine map onto dataset extrema") {
    Dataset ds = synthetic({{0, 10}, {4, 6}, {8, 2}});
    NormParams p = normalize_global(ds);
    CHECK(ds.trajs[0].g_norm(0) == 0.0);
    CHECK(ds.trajs[0].g_norm(1) == 1.0);
    CHECK(ds.trajs[1].g_norm(0) == 0.5);
    CHECK(ds.trajs[1].g_norm(1) == 0.5);
    CHECK(ds.trajs[2].g_norm(0) == 1.0);
    CHECK(ds.trajs[2].g_norm(1) == 0.0);
    CHECK(p.kind == "global");
    CHECK(p.g_min(0) == 0.0);
    CHECK(p.g_max(1) == 10.0);
    CHECK(ds.manifest.normalization_json.find("global") != std::string::npos);

    NormParams back = NormParams::from_json(p.to_json());
    CHECK(back.g_min(0) == p.g_min(0));
    CHECK(back.g_max(1) == p.g_max(1));
}

TEST_CASE("global normalization maps a degenerate objective to zero") {
    Dataset ds = synthetic({{1, 7}, {2, 7}, {3, 7}});
    normalize_global(ds);
    for (const auto& t : ds.trajs) CHECK(t.g_norm(1) == 0.0);
    CHECK(ds.trajs[1].g_norm(0) == 0.5);
}

TEST_CASE("neighborhood normalization uses local extrema") {
    // all preferences identical, so every trajectory shares one neighborhood
    Dataset ds = synthetic({{10, 20}, {15, 15}, {20, 10}});
    normalize_npn(ds, 1e-3);
    CHECK(ds.trajs[0].g_norm(0) == 0.0);
    CHECK(ds.trajs[0].g_norm(1) == 1.0);
    CHECK(ds.trajs[1].g_norm(0) == 0.5);
    CHECK(ds.trajs[1].g_norm(1) == 0.5);
    CHECK(ds.trajs[2].g_norm(0) == 1.0);
    CHECK(ds.trajs[2].g_norm(1) == 0.0);
}

TEST_CASE("singleton neighborhoods normalize to the midpoint convention") {
    Dataset ds = synthetic({{10, 20}, {30, 5}}, {0.1, 0.9});
    normalize_npn(ds, 1e-3);
    for (const auto& t : ds.trajs) {
        CHECK(t.g_norm(0) == 0.5);
        CHECK(t.g_norm(1) == 0.5);
    }
}

TEST_CASE("wide neighborhoods reduce to global normalization") {
    Dataset npn_ds = collected(200, Quality::Amateur, 5);
    Dataset glob_ds = npn_ds;
    normalize_npn(npn_ds, 1e9);
    normalize_global(glob_ds);
    for (size_t i = 0; i < npn_ds.trajs.size(); ++i)
        CHECK((npn_ds.trajs[i].g_norm - glob_ds.trajs[i].g_norm).cwiseAbs().maxCoeff() <=
              1e-12);
}

TEST_CASE("neighborhood normalization always lands in the unit box") {
    Dataset ds = collected(300, Quality::Amateur, 6);
    normalize_npn(ds, 1e-3);
    for (const auto& t : ds.trajs) {
        CHECK(t.g_norm.minCoeff() >= 0.0);
        CHECK(t.g_norm.maxCoeff() <= 1.0);
    }
    CHECK_THROWS_AS(normalize_npn(ds, 0.0), ConfigError);
}

TEST_CASE("return predictor fits a constant target everywhere") {
    std::vector<std::pair<double, double>> rtgs;
    std::vector<double> omega1;
    for (int i = 0; i < 40; ++i) {
        rtgs.push_back({3.0, 5.0});
        omega1.push_back(i / 39.0);
    }
    Dataset ds = synthetic(rtgs, omega1);
    PredictorTrainConfig cfg;
    cfg.steps = 1500;
    cfg.seed = 2;
    TrainedPredictor tp = train_return_predictor(ds, cfg);

    for (double w : {0.05, 0.35, 0.7, 0.95}) {
        MatX om(1, 2);
        om << w, 1.0 - w;
        MatX pred = tp.predict(om);
        CHECK(std::abs(pred(0, 0) - 3.0) / 3.0 < 0.05);
        CHECK(std::abs(pred(0, 1) - 5.0) / 5.0 < 0.05);
    }
}

TEST_CASE("return predictor fit is tight on expert data, looser on amateur") {
    PredictorTrainConfig cfg;
    cfg.steps = 3000;
    cfg.seed = 4;

    Dataset expert = collected(400, Quality::Expert, 21);
    TrainedPredictor tpe = train_return_predictor(expert, cfg);
    const double expert_err = predictor_rel_err(expert, tpe);
    CHECK(expert_err < 0.10);

    Dataset amateur = collected(400, Quality::Amateur, 21);
    TrainedPredictor tpa = train_return_predictor(amateur, cfg);
    const double amateur_err = predictor_rel_err(amateur, tpa);
    CHECK(amateur_err > expert_err);

    Dataset tiny = synthetic({{1, 1}});
    CHECK_THROWS_AS(train_return_predictor(tiny, cfg), DataError);
}

TEST_CASE("predictor normalization divides by the predicted best return") {
    Dataset ds = synthetic({{3, 5}, {1.5, 2.5}, {0, 0}}, {0.2, 0.5, 0.8});
    TrainedPredictor tp = constant_predictor(3.0, 5.0);
    NormParams p = normalize_ppn(ds, tp);
    CHECK(ds.trajs[0].g_norm(0) == 1.0);
    CHECK(ds.trajs[0].g_norm(1) == 1.0);
    CHECK(ds.trajs[1].g_norm(0) == 0.5);
    CHECK(ds.trajs[1].g_norm(1) == 0.5);
    CHECK(ds.trajs[2].g_norm(0) == 0.0);
    CHECK(ds.trajs[2].g_norm(1) == 0.0);
    CHECK(p.kind == "ppn");
    CHECK(!p.predictor_digest.empty());

    TrainedPredictor bad = constant_predictor(1.0, -0.5);
    CHECK_THROWS_AS(normalize_ppn(ds, bad), DataError);
}

TEST_CASE("some amateur trajectories normalize above one") {
    Dataset ds = collected(500, Quality::Amateur, 33);
    PredictorTrainConfig cfg;
    cfg.steps = 3000;
    cfg.seed = 9;
    TrainedPredictor tp = train_return_predictor(ds, cfg);
    normalize_ppn(ds, tp);

    int over = 0;
    double worst = 0.0;
    for (const auto& t : ds.trajs) {
        over += (t.g_norm.array() > 1.0).any() ? 1 : 0;
        worst = std::max(worst, t.g_norm.maxCoeff());
    }
    const double frac = static_cast<double>(over) / static_cast<double>(ds.trajs.size());
    CHECK(frac > 0.0);
    CHECK(worst > 1.0);
    CHECK(worst < 4.0);
}

TEST_CASE("neighborhood normalization concentrates mass near the ones vector") {
    Dataset npn_ds = collected(500, Quality::Expert, 51);
    Dataset glob_ds = npn_ds;
    normalize_npn(npn_ds, 1e-3);
    normalize_global(glob_ds);
    CHECK(mass_near_ones(npn_ds) > mass_near_ones(glob_ds));
}
