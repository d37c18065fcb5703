// SPDX-License-Identifier: MIT
#include "modp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "modp/checkpoint.hpp"
#include "modp/config.hpp"
#include "modp/evaluate.hpp"

namespace modp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kUsage =
    "usage: modp <command> [flags]\n"
    "\n"
    "commands:\n"
    "  collect          sample trajectories into a dataset directory\n"
    "  slice            remove preference regions from a dataset\n"
    "  train-predictor  fit the best-return regressor on a dataset\n"
    "  train            train the conditional denoiser\n"
    "  train-slider     fit the preference-shift adapter against a denoiser\n"
    "  train-invdyn     fit the inverse dynamics model\n"
    "  eval             sweep preferences, roll out plans, emit reports\n"
    "  report           print the summary table for finished eval runs\n"
    "\n"
    "common flags:\n"
    "  --config FILE    load key=value settings (defaults otherwise)\n"
    "  --set KEY=VALUE  override one setting (repeatable, wins over --config)\n"
    "  --out DIR        output directory\n"
    "  --seed N         global seed\n"
    "\n"
    "command flags:\n"
    "  collect: --quality expert|amateur, --n COUNT\n"
    "  slice:   --in DIR, --kind complete|shattered|narrow, --m PCT, --n REGIONS\n"
    "  train:   --data DIR, --normalize global|ppn|npn, --predictor CK\n"
    "  train-predictor/train-invdyn: --data DIR\n"
    "  train-slider: --data DIR, --base CK, --predictor CK\n"
    "  eval:    --data DIR, --denoiser CK, --invdyn CK, --slider CK,\n"
    "           --eval-predictor CK, --no-slider, --prefs N, --threads N\n"
    "  report:  --in DIR (repeatable)\n";

struct ParsedArgs {
    std::string command;
    RunConfig cfg;
    std::map<std::string, std::string> paths;
    std::vector<std::string> inputs;
    bool no_slider = false;
};

const std::map<std::string, std::string>& key_flags(const std::string& command) {
    static const std::map<std::string, std::map<std::string, std::string>> table = {
        {"collect", {{"--quality", "collect.quality"}, {"--n", "collect.n_traj"}}},
        {"slice", {{"--kind", "slice.kind"}, {"--m", "slice.m"}, {"--n", "slice.n_regions"}}},
        {"train", {{"--normalize", "normalize.scheme"}}},
        {"train-predictor", {}},
        {"train-slider", {}},
        {"train-invdyn", {}},
        {"eval", {{"--prefs", "eval.n_prefs"}, {"--threads", "eval.threads"}}},
        {"report", {}},
    };
    return table.at(command);
}

const std::set<std::string>& path_flags(const std::string& command) {
    static const std::map<std::string, std::set<std::string>> table = {
        {"collect", {}},
        {"slice", {"--in"}},
        {"train", {"--data", "--predictor"}},
        {"train-predictor", {"--data"}},
        {"train-slider", {"--data", "--base", "--predictor"}},
        {"train-invdyn", {"--data"}},
        {"eval", {"--data", "--denoiser", "--invdyn", "--slider", "--eval-predictor"}},
        {"report", {"--in"}},
    };
    return table.at(command);
}

ParsedArgs parse_args(const std::vector<std::string>& args) {
    ParsedArgs pa;
    pa.command = args[0];

    auto value_of = [&](size_t& i) -> const std::string& {
        if (i + 1 >= args.size()) throw ConfigError("flag " + args[i] + " needs a value");
        return args[++i];
    };

    pa.cfg = default_config();
    for (size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            pa.cfg = load_config_file(value_of(i));
            break;
        }
    }

    const auto& keys = key_flags(pa.command);
    const auto& paths = path_flags(pa.command);
    for (size_t i = 1; i < args.size(); ++i) {
        const std::string& flag = args[i];
        if (flag == "--config") {
            ++i;
        } else if (flag == "--set") {
            apply_override(pa.cfg, value_of(i));
        } else if (flag == "--out") {
            pa.cfg.set("out", value_of(i));
        } else if (flag == "--seed") {
            pa.cfg.set("seed", value_of(i));
        } else if (flag == "--no-slider" && pa.command == "eval") {
            pa.no_slider = true;
        } else if (auto it = keys.find(flag); it != keys.end()) {
            pa.cfg.set(it->second, value_of(i));
        } else if (paths.count(flag)) {
            const std::string& value = value_of(i);
            if (flag == "--in") pa.inputs.push_back(value);
            pa.paths[flag.substr(2)] = value;
        } else {
            throw ConfigError("unknown flag for " + pa.command + ": " + flag);
        }
    }
    return pa;
}

const std::string& require_path(const ParsedArgs& pa, const std::string& name) {
    auto it = pa.paths.find(name);
    if (it == pa.paths.end())
        throw ConfigError(pa.command + " requires --" + name);
    return it->second;
}

// ---- serialization helpers ----

json vec_to_json(const VecX& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

VecX vec_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json stats_to_json(const StateStats& st) {
    return json{{"mean", vec_to_json(st.mean)}, {"std", vec_to_json(st.std)}};
}

StateStats stats_from_json(const json& j) {
    StateStats st;
    st.mean = vec_from_json(j.at("mean"));
    st.std = vec_from_json(j.at("std"));
    return st;
}

json denoiser_cfg_to_json(const DenoiserConfig& c) {
    return json{{"horizon", c.horizon},
                {"state_dim", c.state_dim},
                {"n_obj", c.n_obj},
                {"embed_dim", c.embed_dim},
                {"n_heads", c.n_heads},
                {"n_blocks", c.n_blocks},
                {"time_embed_dim", c.time_embed_dim},
                {"arch", arch_name(c.resolved_arch())}};
}

DenoiserConfig denoiser_cfg_from_json(const std::string& text) {
    json j = json::parse(text);
    DenoiserConfig c;
    c.horizon = j.at("horizon").get<int>();
    c.state_dim = j.at("state_dim").get<int>();
    c.n_obj = j.at("n_obj").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_blocks = j.at("n_blocks").get<int>();
    c.time_embed_dim = j.at("time_embed_dim").get<int>();
    c.arch = arch_from_name(j.at("arch").get<std::string>());
    return c;
}

json invdyn_cfg_to_json(const InvDynConfig& c) {
    return json{{"state_dim", c.state_dim}, {"action_dim", c.action_dim}, {"hidden", c.hidden}};
}

InvDynConfig invdyn_cfg_from_json(const std::string& text) {
    json j = json::parse(text);
    InvDynConfig c;
    c.state_dim = j.at("state_dim").get<int>();
    c.action_dim = j.at("action_dim").get<int>();
    c.hidden = j.at("hidden").get<int>();
    return c;
}

json predictor_cfg_to_json(const PredictorConfig& c) {
    return json{{"n_obj", c.n_obj}, {"hidden", c.hidden}};
}

PredictorConfig predictor_cfg_from_json(const std::string& text) {
    json j = json::parse(text);
    PredictorConfig c;
    c.n_obj = j.at("n_obj").get<int>();
    c.hidden = j.at("hidden").get<int>();
    return c;
}

std::string param_digest(const ParamSet<Real>& ps) {
    VecX flat = ps.flatten();
    return fnv1a_hex(std::string_view(reinterpret_cast<const char*>(flat.data()),
                                      sizeof(Real) * static_cast<size_t>(flat.size())));
}

Checkpoint require_checkpoint(const std::string& path, const std::string& kind,
                              const std::string& what) {
    if (!fs::exists(path)) throw MissingArtifact(what + " checkpoint not found: " + path);
    Checkpoint ck = load_checkpoint(path);
    if (ck.kind != kind)
        throw ConfigError(what + " checkpoint " + path + " has kind '" + ck.kind +
                          "', expected '" + kind + "'");
    return ck;
}

const ParamSet<Real>& infer_params(const Checkpoint& ck) {
    return ck.ema ? *ck.ema : ck.params;
}

TrainedPredictor predictor_from_checkpoint(const Checkpoint& ck) {
    TrainedPredictor tp;
    tp.cfg = predictor_cfg_from_json(ck.config_json);
    tp.params = infer_params(ck);
    return tp;
}

// ---- pieces shared by the training commands ----

EnvConfig env_from_config(const RunConfig& cfg) {
    EnvConfig env;
    env.episode_len = cfg.geti("env.episode_len");
    env.drag = cfg.getd("env.drag");
    env.gain = cfg.getd("env.gain");
    return env;
}

double final_loss(const std::vector<double>& log) { return log.empty() ? 0.0 : log.back(); }

// Tail average over the last tenth of the loss curve, for progress reporting.
double tail_loss(const std::vector<double>& log) {
    if (log.empty()) return 0.0;
    size_t n = std::max<size_t>(1, log.size() / 10);
    double s = 0.0;
    for (size_t i = log.size() - n; i < log.size(); ++i) s += log[i];
    return s / static_cast<double>(n);
}

NormParams apply_normalization(Dataset& ds, const RunConfig& cfg, const ParsedArgs& pa) {
    const std::string scheme = cfg.str("normalize.scheme");
    if (scheme == "global") return normalize_global(ds);
    if (scheme == "npn") return normalize_npn(ds, cfg.getd("normalize.epsilon"));
    if (scheme == "ppn") {
        auto it = pa.paths.find("predictor");
        if (it == pa.paths.end())
            throw MissingArtifact("normalize.scheme=ppn needs --predictor CHECKPOINT");
        Checkpoint pck = require_checkpoint(it->second, "predictor", "return predictor");
        TrainedPredictor tp = predictor_from_checkpoint(pck);
        return normalize_ppn(ds, tp);
    }
    throw ConfigError("unknown normalization scheme: " + scheme);
}

// Re-applies the scheme a denoiser checkpoint recorded so downstream training
// sees identical g values. The caller has already verified the dataset digest.
void reapply_normalization(Dataset& ds, const NormParams& np, const ParsedArgs& pa) {
    if (np.kind == "global") {
        normalize_global(ds);
    } else if (np.kind == "npn") {
        normalize_npn(ds, np.epsilon);
    } else if (np.kind == "ppn") {
        auto it = pa.paths.find("predictor");
        if (it == pa.paths.end())
            throw MissingArtifact(
                "the base checkpoint used ppn normalization; pass the same --predictor "
                "CHECKPOINT");
        Checkpoint pck = require_checkpoint(it->second, "predictor", "return predictor");
        TrainedPredictor tp = predictor_from_checkpoint(pck);
        if (param_digest(tp.params) != np.predictor_digest)
            throw ConfigError("predictor " + it->second +
                              " does not match the one recorded in the base checkpoint "
                              "(parameter digest mismatch)");
        normalize_ppn(ds, tp);
    } else {
        throw ConfigError("unknown normalization kind in checkpoint: " + np.kind);
    }
}

SamplerConfig sampler_from_config(const RunConfig& cfg) {
    SamplerConfig sc;
    sc.steps = cfg.geti("sampler.steps");
    sc.guidance_w = cfg.getd("sampler.guidance_w");
    sc.temperature = cfg.getd("sampler.temperature");
    return sc;
}

// ---- commands ----

int cmd_collect(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    EnvConfig env = env_from_config(cfg);
    CollectConfig cc;
    cc.n_traj = cfg.geti("collect.n_traj");
    cc.quality = quality_from_name(cfg.str("collect.quality"));
    cc.expert_noise = cfg.getd("collect.expert_noise");
    cc.perturb_prob = cfg.getd("collect.perturb_prob");
    cc.perturb_width = cfg.getd("collect.perturb_width");

    Dataset ds = make_dataset(env, cc, cfg.getu("seed"));
    ds.manifest.config_digest = config_digest(cfg);

    const std::string dir = cfg.str("out");
    save_dataset(ds, dir);
    write_resolved_config(cfg, dir);

    MatX rets = dataset_episode_returns(ds);
    out << "collected " << ds.size() << " " << cfg.str("collect.quality")
        << " trajectories (seed " << cfg.getu("seed") << ") into " << dir << "\n";
    for (Eigen::Index c = 0; c < rets.cols(); ++c) {
        out << "  objective " << c << " return: mean " << rets.col(c).mean() << ", min "
            << rets.col(c).minCoeff() << ", max " << rets.col(c).maxCoeff() << "\n";
    }
    return 0;
}

int cmd_slice(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    Dataset ds = load_dataset(require_path(pa, "in"));
    const std::string kind = cfg.str("slice.kind");
    const int before = static_cast<int>(ds.size());

    SliceResult res;
    if (kind == "complete") {
        res.ds = std::move(ds);
    } else if (kind == "shattered") {
        res = slice_shattered(ds, cfg.getd("slice.m"), cfg.geti("slice.n_regions"));
    } else if (kind == "narrow") {
        res = slice_narrow(ds, cfg.getd("slice.m"));
    } else {
        throw ConfigError("unknown slice kind: " + kind);
    }
    res.ds.manifest.config_digest = config_digest(cfg);

    const std::string dir = cfg.str("out");
    save_dataset(res.ds, dir);
    write_resolved_config(cfg, dir);

    out << "sliced " << kind << ": kept " << res.ds.size() << " of " << before
        << " trajectories (removed " << res.removed_ids.size() << ") into " << dir << "\n";
    for (const auto& r : res.ds.manifest.slice.removed_regions)
        out << "  removed omega_1 region [" << r[0] << ", " << r[1] << "]\n";
    return 0;
}

int cmd_train_predictor(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    const std::string data = require_path(pa, "data");
    Dataset ds = load_dataset(data);

    PredictorTrainConfig ptc;
    ptc.net.n_obj = ds.n_obj();
    ptc.net.hidden = cfg.geti("predictor.hidden");
    ptc.steps = cfg.geti("predictor.grad_steps");
    ptc.batch = cfg.geti("predictor.batch");
    ptc.lr = cfg.getd("predictor.lr");
    ptc.seed = cfg.getu("seed");
    TrainedPredictor tp = train_return_predictor(ds, ptc);

    Checkpoint ck;
    ck.kind = "predictor";
    ck.config_json = predictor_cfg_to_json(tp.cfg).dump();
    ck.params = tp.params;
    ck.extra_json = json{{"dataset_digest", dataset_digest(data)},
                         {"config_digest", config_digest(cfg)},
                         {"param_digest", param_digest(tp.params)},
                         {"loss_final", final_loss(tp.loss_log)}}
                        .dump();

    const std::string dir = cfg.str("out");
    fs::create_directories(dir);
    save_checkpoint(ck, dir + "/predictor.ck");
    write_resolved_config(cfg, dir);
    out << "trained return predictor for " << ptc.steps << " steps, final loss "
        << final_loss(tp.loss_log) << "; wrote " << dir << "/predictor.ck\n";
    return 0;
}

int cmd_train(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    const std::string data = require_path(pa, "data");
    Dataset ds = load_dataset(data);

    NormParams np = apply_normalization(ds, cfg, pa);
    StateStats stats = compute_state_stats(ds);

    DiffusionTrainConfig dtc;
    dtc.net.horizon = cfg.geti("diffusion.horizon");
    dtc.net.state_dim = ds.manifest.env.state_dim;
    dtc.net.n_obj = ds.n_obj();
    dtc.net.embed_dim = cfg.geti("diffusion.embed_dim");
    dtc.net.n_heads = cfg.geti("diffusion.n_heads");
    dtc.net.n_blocks = cfg.geti("diffusion.n_blocks");
    dtc.net.time_embed_dim = cfg.geti("diffusion.time_embed_dim");
    dtc.net.arch = arch_from_name(cfg.str("diffusion.arch"));
    dtc.grad_steps = cfg.geti("diffusion.grad_steps");
    dtc.batch = cfg.geti("diffusion.batch");
    dtc.lr = cfg.getd("diffusion.lr");
    dtc.weight_decay = cfg.getd("diffusion.weight_decay");
    dtc.ema_rate = cfg.getd("diffusion.ema");
    dtc.mask_prob = cfg.getd("diffusion.mask_prob");
    dtc.next_state_weight = cfg.getd("diffusion.next_state_weight");
    dtc.seed = cfg.getu("seed");
    TrainedDenoiser td = train_diffusion(ds, stats, dtc);

    Checkpoint ck;
    ck.kind = "denoiser";
    ck.config_json = denoiser_cfg_to_json(td.cfg).dump();
    ck.params = td.raw_params;
    ck.ema = td.params;
    ck.extra_json = json{{"dataset_digest", dataset_digest(data)},
                         {"config_digest", config_digest(cfg)},
                         {"normalization", json::parse(np.to_json())},
                         {"stats", stats_to_json(stats)},
                         {"loss_final", final_loss(td.loss_log)}}
                        .dump();

    const std::string dir = cfg.str("out");
    fs::create_directories(dir);
    save_checkpoint(ck, dir + "/denoiser.ck");
    write_resolved_config(cfg, dir);
    out << "trained denoiser (" << cfg.str("normalize.scheme") << " normalization) for "
        << dtc.grad_steps << " steps, tail loss " << tail_loss(td.loss_log) << "; wrote " << dir
        << "/denoiser.ck\n";
    return 0;
}

int cmd_train_slider(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    const std::string data = require_path(pa, "data");
    const std::string base_path = require_path(pa, "base");
    Checkpoint base = require_checkpoint(base_path, "denoiser", "base denoiser");
    json base_extra = json::parse(base.extra_json);

    const std::string ds_digest = dataset_digest(data);
    if (base_extra.at("dataset_digest").get<std::string>() != ds_digest)
        throw ConfigError("base denoiser was trained on a different dataset (digest " +
                          base_extra.at("dataset_digest").get<std::string>() + " vs " +
                          ds_digest + ")");

    Dataset ds = load_dataset(data);
    NormParams np = NormParams::from_json(base_extra.at("normalization").dump());
    reapply_normalization(ds, np, pa);
    StateStats stats = stats_from_json(base_extra.at("stats"));
    DenoiserConfig dc = denoiser_cfg_from_json(base.config_json);

    SliderTrainConfig stc;
    stc.delta_max = cfg.getd("slider.delta_max");
    stc.grad_steps = cfg.geti("slider.grad_steps");
    stc.batch = cfg.geti("slider.batch");
    stc.lr = cfg.getd("slider.lr");
    stc.weight_decay = cfg.getd("slider.weight_decay");
    stc.ema_rate = cfg.getd("slider.ema");
    stc.seed = cfg.getu("seed");
    stc.max_retries = cfg.geti("slider.max_retries");
    TrainedSlider ts = train_slider(ds, stats, Denoiser<Real>(dc), infer_params(base), stc);

    Checkpoint ck;
    ck.kind = "slider";
    ck.config_json = base.config_json;
    ck.params = ts.raw_params;
    ck.ema = ts.params;
    ck.extra_json = json{{"base_digest", file_digest(base_path)},
                         {"dataset_digest", ds_digest},
                         {"config_digest", config_digest(cfg)},
                         {"normalization", base_extra.at("normalization")},
                         {"stats", base_extra.at("stats")},
                         {"loss_final", final_loss(ts.loss_log)}}
                        .dump();

    const std::string dir = cfg.str("out");
    fs::create_directories(dir);
    save_checkpoint(ck, dir + "/slider.ck");
    write_resolved_config(cfg, dir);
    out << "trained slider for " << stc.grad_steps << " steps, tail loss "
        << tail_loss(ts.loss_log) << "; wrote " << dir << "/slider.ck\n";
    return 0;
}

int cmd_train_invdyn(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    const std::string data = require_path(pa, "data");
    Dataset ds = load_dataset(data);
    StateStats stats = compute_state_stats(ds);

    InvDynTrainConfig itc;
    itc.net.state_dim = ds.manifest.env.state_dim;
    itc.net.action_dim = ds.manifest.env.action_dim;
    itc.net.hidden = cfg.geti("invdyn.hidden");
    itc.grad_steps = cfg.geti("invdyn.grad_steps");
    itc.batch = cfg.geti("invdyn.batch");
    itc.lr = cfg.getd("invdyn.lr");
    itc.weight_decay = cfg.getd("invdyn.weight_decay");
    itc.seed = cfg.getu("seed");
    TrainedInvDyn ti = train_inverse_dynamics(ds, stats, itc);

    Checkpoint ck;
    ck.kind = "invdyn";
    ck.config_json = invdyn_cfg_to_json(ti.cfg).dump();
    ck.params = ti.params;
    ck.extra_json = json{{"dataset_digest", dataset_digest(data)},
                         {"config_digest", config_digest(cfg)},
                         {"stats", stats_to_json(ti.stats)},
                         {"loss_final", final_loss(ti.loss_log)}}
                        .dump();

    const std::string dir = cfg.str("out");
    fs::create_directories(dir);
    save_checkpoint(ck, dir + "/invdyn.ck");
    write_resolved_config(cfg, dir);
    out << "trained inverse dynamics for " << itc.grad_steps << " steps, tail loss "
        << tail_loss(ti.loss_log) << "; wrote " << dir << "/invdyn.ck\n";
    return 0;
}

int cmd_eval(const ParsedArgs& pa, std::ostream& out) {
    const RunConfig& cfg = pa.cfg;
    const std::string data = require_path(pa, "data");
    const std::string denoiser_path = require_path(pa, "denoiser");
    const std::string invdyn_path = require_path(pa, "invdyn");

    Checkpoint dck = require_checkpoint(denoiser_path, "denoiser", "denoiser");
    Checkpoint ick = require_checkpoint(invdyn_path, "invdyn", "inverse dynamics");
    json dex = json::parse(dck.extra_json);
    json iex = json::parse(ick.extra_json);

    const std::string ds_digest = dataset_digest(data);
    if (dex.at("dataset_digest").get<std::string>() != ds_digest)
        throw ConfigError(
            "denoiser normalization does not match the dataset (trained on digest " +
            dex.at("dataset_digest").get<std::string>() + ", got " + ds_digest + ")");
    if (iex.at("dataset_digest").get<std::string>() !=
        dex.at("dataset_digest").get<std::string>())
        throw ConfigError("inverse dynamics and denoiser were trained on different datasets");

    Dataset ds = load_dataset(data);

    Planner p{Denoiser<Real>(denoiser_cfg_from_json(dck.config_json))};
    p.theta = infer_params(dck);
    p.invdyn.cfg = invdyn_cfg_from_json(ick.config_json);
    p.invdyn.stats = stats_from_json(iex.at("stats"));
    p.invdyn.params = infer_params(ick);
    p.stats = stats_from_json(dex.at("stats"));
    p.dataset_prefs = preference_list(ds);
    p.sampler = sampler_from_config(cfg);
    p.replan_every = cfg.geti("planner.replan_every");
    p.eta_scale = cfg.getd("slider.eta_scale");

    if (auto it = pa.paths.find("slider"); it != pa.paths.end() && !pa.no_slider) {
        Checkpoint sck = require_checkpoint(it->second, "slider", "slider");
        json sex = json::parse(sck.extra_json);
        if (sex.at("base_digest").get<std::string>() != file_digest(denoiser_path))
            throw ConfigError("slider " + it->second +
                              " was trained against a different denoiser checkpoint");
        p.theta_star = infer_params(sck);
        p.use_slider = true;
    }

    TrainedPredictor psi;
    bool have_psi = false;
    if (auto it = pa.paths.find("eval-predictor"); it != pa.paths.end()) {
        Checkpoint pck = require_checkpoint(it->second, "predictor", "evaluation predictor");
        psi = predictor_from_checkpoint(pck);
        have_psi = true;
    }

    const EnvConfig env = ds.manifest.env;
    SweepConfig sc;
    sc.n_prefs = cfg.geti("eval.n_prefs");
    sc.seed = cfg.getu("seed");
    sc.threads = cfg.geti("eval.threads");
    sc.ref_point = cfg.getv("eval.ref");
    SweepPolicy policy = [&](const VecX& omega, uint64_t seed) {
        Rng rng(seed);
        return rollout(env, p, omega, env.episode_len, rng);
    };
    SweepResult sr = evaluate_sweep(policy, ds.manifest.slice, have_psi ? &psi : nullptr, sc);

    const std::string dir = cfg.str("out");
    fs::create_directories(dir);
    const std::string digest = config_digest(cfg);
    write_sweep_csv(dir + "/sweep.csv", sr);
    write_summary_json(dir + "/summary.json", sr, digest);
    write_front_svg(dir + "/front.svg", sr, dataset_episode_returns(ds));
    write_trace_jsonl(dir + "/traces.jsonl", sr, sc, digest);
    write_resolved_config(cfg, dir);

    out << "evaluated " << sc.n_prefs << " preferences (slider "
        << (p.use_slider ? "on" : "off") << "): hv " << sr.hv << ", sp " << sr.sp << ", rd "
        << sr.rd << "; reports in " << dir << "\n";
    return 0;
}

int cmd_report(const ParsedArgs& pa, std::ostream& out) {
    if (pa.inputs.empty()) throw ConfigError("report requires at least one --in DIR");
    out << std::left << std::setw(24) << "run" << std::right << std::setw(12) << "hv"
        << std::setw(12) << "sp" << std::setw(12) << "rd" << std::setw(9) << "prefs"
        << "  digest\n";
    for (const std::string& dir : pa.inputs) {
        const std::string path = dir + "/summary.json";
        std::ifstream in(path);
        if (!in) throw MissingArtifact("summary not found: " + path);
        json j = json::parse(in);
        out << std::left << std::setw(24) << dir << std::right << std::setw(12)
            << j.at("hv").get<double>() << std::setw(12) << j.at("sp").get<double>()
            << std::setw(12) << j.at("rd").get<double>() << std::setw(9)
            << j.at("n_prefs").get<int>() << "  " << j.at("config_digest").get<std::string>()
            << "\n";
    }
    return 0;
}

int dispatch(const ParsedArgs& pa, std::ostream& out) {
    if (pa.command == "collect") return cmd_collect(pa, out);
    if (pa.command == "slice") return cmd_slice(pa, out);
    if (pa.command == "train-predictor") return cmd_train_predictor(pa, out);
    if (pa.command == "train") return cmd_train(pa, out);
    if (pa.command == "train-slider") return cmd_train_slider(pa, out);
    if (pa.command == "train-invdyn") return cmd_train_invdyn(pa, out);
    if (pa.command == "eval") return cmd_eval(pa, out);
    if (pa.command == "report") return cmd_report(pa, out);
    throw ConfigError("unknown command: " + pa.command);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.empty() || args[0] == "--help" || args[0] == "help") {
            out << kUsage;
            return args.empty() ? 2 : 0;
        }
        if (args[0] != "collect" && args[0] != "slice" && args[0] != "train" &&
            args[0] != "train-predictor" && args[0] != "train-slider" &&
            args[0] != "train-invdyn" && args[0] != "eval" && args[0] != "report")
            throw ConfigError("unknown command: " + args[0]);
        return dispatch(parse_args(args), out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifact& e) {
        err << "missing prerequisite: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace modp::cli
