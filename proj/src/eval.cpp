#include "wog/eval.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef WOG_GIT_SHA
#define WOG_GIT_SHA "unknown"
#endif

namespace wog {

const char* setup_name(Setup s) {
    switch (s) {
        case Setup::id: return "id";
        case Setup::background: return "background";
        case Setup::light: return "light";
        case Setup::novel_object: return "novel_object";
    }
    return "?";
}

Setup setup_from_name(const std::string& s) {
    if (s == "id") return Setup::id;
    if (s == "background") return Setup::background;
    if (s == "light") return Setup::light;
    if (s == "novel_object") return Setup::novel_object;
    throw ConfigError("unknown eval setup: " + s);
}

std::vector<SuiteCell> parse_suite(const std::string& text, Task task) {
    std::vector<SuiteCell> suite;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) suite.push_back({task, setup_from_name(part)});
    }
    if (suite.empty()) throw ConfigError("empty eval suite");
    return suite;
}

std::string build_fingerprint() { return std::string("wog-") + WOG_GIT_SHA; }

// ---------------------------------------------------------------- policies

LearnedPolicy::LearnedPolicy(const Checkpoint& ckpt, int sampler_steps)
    : bundle_(restore_models(ckpt)), sampler_steps_(sampler_steps) {}

std::vector<std::array<double, 3>> LearnedPolicy::plan(const WorldState& state,
                                                       const EnvParams& params,
                                                       uint64_t chunk_seed) {
    NoGradGuard ng;
    Image obs = render(state, params.render);
    Tensor obs_t = image_to_tensor(obs);
    const auto instruction = instruction_for(state.task, state);
    auto enc = bundle_.backbone->encode(obs_t, instruction);
    Tensor chunk = bundle_.dit->sample(enc.z, std::nullopt, sampler_steps_, chunk_seed);

    std::vector<std::array<double, 3>> actions(static_cast<size_t>(bundle_.config.horizon));
    for (int t = 0; t < bundle_.config.horizon; ++t) {
        std::array<double, 3> a{};
        for (int d = 0; d < kActionDim; ++d)
            a[static_cast<size_t>(d)] =
                chunk.data()[(static_cast<size_t>(t)) * kActionDim + static_cast<size_t>(d)];
        a = bundle_.norm.denormalize(a);
        for (auto& v : a) v = std::clamp(v, -1.0, 1.0);
        actions[static_cast<size_t>(t)] = a;
    }
    return actions;
}

std::vector<std::array<double, 3>> ExpertPolicy::plan(const WorldState& state,
                                                      const EnvParams& params,
                                                      uint64_t chunk_seed) {
    (void)params;
    (void)chunk_seed;
    std::vector<std::array<double, 3>> actions;
    WorldState sim = state;
    for (int t = 0; t < horizon_; ++t) {
        const auto a = expert_action(sim);
        sim = step(sim, a);
        actions.push_back(a);
    }
    return actions;
}

// ---------------------------------------------------------------- rollout

RolloutResult rollout(ChunkPolicy& policy, Task task, uint64_t env_seed, const EnvParams& params,
                      int max_steps, int exec_horizon) {
    if (exec_horizon < 1 || exec_horizon > policy.horizon())
        throw ValueError("rollout: exec_horizon must lie in [1, policy horizon]");
    WorldState state = reset(task, env_seed, params);
    RolloutResult out;
    while (!success(state) && out.steps < max_steps) {
        const auto chunk = policy.plan(state, params, derive_seed(env_seed, 7700 + out.chunks));
        ++out.chunks;
        for (int k = 0; k < exec_horizon && out.steps < max_steps; ++k) {
            state = step(state, chunk[static_cast<size_t>(k)]);
            ++out.steps;
            ++out.executed_actions;
            if (success(state)) break;
        }
    }
    out.success = success(state);
    return out;
}

// ---------------------------------------------------------------- evaluate

const EvalCell* EvalReport::find(Task task, Setup setup) const {
    for (const auto& c : cells) {
        if (c.task == task && c.setup == setup) return &c;
    }
    return nullptr;
}

EvalReport evaluate(ChunkPolicy& policy, const std::vector<SuiteCell>& suite, int n_trials,
                    uint64_t seed, const EnvParams& base_params, int max_steps,
                    int exec_horizon) {
    if (suite.empty()) throw ValueError("evaluate: empty suite");

    // pair every OOD cell with an ID baseline for the same task
    std::vector<SuiteCell> cells;
    auto contains = [&cells](Task t, Setup s) {
        for (const auto& c : cells)
            if (c.task == t && c.setup == s) return true;
        return false;
    };
    for (const auto& c : suite) {
        if (c.setup != Setup::id && !contains(c.task, Setup::id) ) {
            bool has_id = false;
            for (const auto& o : suite)
                if (o.task == c.task && o.setup == Setup::id) has_id = true;
            if (!has_id) cells.push_back({c.task, Setup::id});
        }
        if (!contains(c.task, c.setup)) cells.push_back(c);
    }

    const auto vision_before = vision_call_counters();
    const uint64_t encoder_before = future_encoder_call_count();

    EvalReport report;
    report.n_trials = n_trials;
    report.seed = seed;
    report.fingerprint = build_fingerprint();
    for (const auto& cell : cells) {
        EnvParams params = base_params;
        switch (cell.setup) {
            case Setup::id: break;
            case Setup::background:
                params = ood_transform(params, cell.task, OodKind::background);
                break;
            case Setup::light: params = ood_transform(params, cell.task, OodKind::light); break;
            case Setup::novel_object:
                params = ood_transform(params, cell.task, OodKind::novel_object);
                break;
        }
        EvalCell out;
        out.task = cell.task;
        out.setup = cell.setup;
        out.trials = n_trials;
        double steps_total = 0.0;
        for (int i = 0; i < n_trials; ++i) {
            // scene seeds shared across cells: trial i sees matched scenes
            const uint64_t env_seed = derive_seed(seed, static_cast<uint64_t>(i));
            const auto r = rollout(policy, cell.task, env_seed, params, max_steps, exec_horizon);
            out.successes += r.success ? 1 : 0;
            steps_total += r.steps;
        }
        out.mean_steps = n_trials ? steps_total / n_trials : 0.0;
        report.cells.push_back(out);
    }

    const auto vision_after = vision_call_counters();
    report.vision_calls = (vision_after.semantic - vision_before.semantic) +
                          (vision_after.dynamic - vision_before.dynamic);
    report.encoder_calls = future_encoder_call_count() - encoder_before;
    return report;
}

std::string report_to_jsonl(const EvalReport& report) {
    std::string out;
    for (const auto& c : report.cells) {
        nlohmann::json j;
        j["task"] = task_name(c.task);
        j["setup"] = setup_name(c.setup);
        j["trials"] = c.trials;
        j["successes"] = c.successes;
        j["success_rate"] = c.rate();
        j["mean_steps"] = c.mean_steps;
        j["seed"] = report.seed;
        j["fingerprint"] = report.fingerprint;
        out += j.dump();
        out += "\n";
    }
    return out;
}

std::string report_to_table(const EvalReport& report) {
    std::ostringstream os;
    char buf[128];
    os << "task          setup          success      (ID -> OOD)\n";
    for (const auto& c : report.cells) {
        const EvalCell* id_cell = report.find(c.task, Setup::id);
        if (c.setup == Setup::id) {
            std::snprintf(buf, sizeof(buf), "%-13s %-14s %5.1f%%\n", task_name(c.task),
                          setup_name(c.setup), 100.0 * c.rate());
        } else {
            std::snprintf(buf, sizeof(buf), "%-13s %-14s %5.1f%%      (%.1f%% -> %.1f%%)\n",
                          task_name(c.task), setup_name(c.setup), 100.0 * c.rate(),
                          id_cell ? 100.0 * id_cell->rate() : 0.0, 100.0 * c.rate());
        }
        os << buf;
    }
    return os.str();
}

void write_report(const EvalReport& report, const std::string& jsonl_path,
                  const std::string& table_path) {
    if (!jsonl_path.empty()) {
        std::ofstream out(jsonl_path, std::ios::trunc);
        if (!out) throw ValueError("cannot open " + jsonl_path);
        out << report_to_jsonl(report);
    }
    if (!table_path.empty()) {
        std::ofstream out(table_path, std::ios::trunc);
        if (!out) throw ValueError("cannot open " + table_path);
        out << report_to_table(report);
    }
}

// ---------------------------------------------------------------- ablation

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::vanilla: return "vanilla";
        case Variant::wog_wo_cotrain: return "wog_wo_cotrain";
        case Variant::wog_full: return "wog_full";
    }
    return "?";
}

void check_budgets_match(const std::vector<VariantBudget>& budgets) {
    for (size_t i = 1; i < budgets.size(); ++i) {
        if (budgets[i].total_steps != budgets[0].total_steps)
            throw TrainError("ablation: training budgets differ across variants (" +
                             std::to_string(budgets[0].total_steps) + " vs " +
                             std::to_string(budgets[i].total_steps) + ")");
    }
}

RunConfig ablation_run_config(const RunConfig& cfg, int seed_index) {
    RunConfig out = cfg;
    out.master_seed = derive_seed(cfg.master_seed, 9000 + static_cast<uint64_t>(seed_index));
    return out;
}

std::string ablation_checkpoint_path(const std::string& artifacts_dir, const RunConfig& cfg,
                                     Variant v, int seed_index) {
    const uint64_t cfg_hash = fnv1a64(serialize_config(cfg).data(), serialize_config(cfg).size());
    return artifacts_dir + "/" + variant_name(v) + "_s" + std::to_string(seed_index) + "_" +
           hex64(cfg_hash).substr(0, 8) + ".ckpt";
}

std::vector<Episode> ablation_demos(const RunConfig& cfg, const std::string& artifacts_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(artifacts_dir);
    const uint64_t data_seed = derive_seed(cfg.master_seed, 0xDA7A);
    const std::string cache = artifacts_dir + "/" + cfg.task + "_n" +
                              std::to_string(cfg.n_demos) + "_s" + std::to_string(data_seed) +
                              ".wogep";
    if (fs::exists(cache)) return load_episodes(cache);
    auto demos = generate_demos(task_from_name(cfg.task), cfg.n_demos, data_seed,
                                cfg.env_params(), SourceTag::robot, cfg.label_fraction);
    save_episodes(cache, task_from_name(cfg.task), data_seed, demos);
    append_manifest(artifacts_dir + "/manifest.txt", cache, task_from_name(cfg.task), cfg.n_demos,
                    data_seed);
    return demos;
}

double AblationResult::mean_rate(Variant v, Task task, Setup setup) const {
    const auto& rs = reports[static_cast<size_t>(v)];
    double acc = 0.0;
    for (const auto& r : rs) {
        const EvalCell* c = r.find(task, setup);
        acc += c ? c->rate() : 0.0;
    }
    return rs.empty() ? 0.0 : acc / static_cast<double>(rs.size());
}

double AblationResult::min_rate(Variant v, Task task, Setup setup) const {
    const auto& rs = reports[static_cast<size_t>(v)];
    double best = 1.0;
    for (const auto& r : rs) {
        const EvalCell* c = r.find(task, setup);
        best = std::min(best, c ? c->rate() : 0.0);
    }
    return rs.empty() ? 0.0 : best;
}

double AblationResult::max_rate(Variant v, Task task, Setup setup) const {
    const auto& rs = reports[static_cast<size_t>(v)];
    double best = 0.0;
    for (const auto& r : rs) {
        const EvalCell* c = r.find(task, setup);
        best = std::max(best, c ? c->rate() : 0.0);
    }
    return best;
}

std::string AblationResult::table() const {
    std::ostringstream os;
    os << "variant           ";
    for (const auto& cell : suite) os << setup_name(cell.setup) << "  ";
    os << "\n";
    char buf[64];
    for (Variant v : {Variant::vanilla, Variant::wog_wo_cotrain, Variant::wog_full}) {
        os << variant_name(v);
        for (size_t pad = std::string(variant_name(v)).size(); pad < 18; ++pad) os << ' ';
        for (const auto& cell : suite) {
            std::snprintf(buf, sizeof(buf), "%.1f%% [%.0f-%.0f]  ",
                          100.0 * mean_rate(v, cell.task, cell.setup),
                          100.0 * min_rate(v, cell.task, cell.setup),
                          100.0 * max_rate(v, cell.task, cell.setup));
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

AblationResult run_ablation(const RunConfig& cfg, const std::string& artifacts_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(artifacts_dir);

    check_budgets_match({{cfg.stage1_steps + cfg.stage2_steps},
                         {cfg.stage1_steps + cfg.stage2_steps},
                         {cfg.stage1_steps + cfg.stage2_steps}});

    const auto demos = ablation_demos(cfg, artifacts_dir);
    const Task task = task_from_name(cfg.task);

    AblationResult result;
    result.seeds = cfg.ablation_seeds;
    result.suite = {{task, Setup::id},
                    {task, Setup::background},
                    {task, Setup::light},
                    {task, Setup::novel_object}};

    for (int s = 0; s < cfg.ablation_seeds; ++s) {
        RunConfig run_cfg = ablation_run_config(cfg, s);
        run_cfg.out_dir = artifacts_dir;
        for (Variant v : {Variant::vanilla, Variant::wog_wo_cotrain, Variant::wog_full}) {
            const std::string path = ablation_checkpoint_path(artifacts_dir, cfg, v, s);
            Checkpoint ckpt;
            if (fs::exists(path)) {
                ckpt = load_checkpoint(path);
            } else {
                RunConfig variant_cfg = run_cfg;
                variant_cfg.out_dir = "";  // per-variant metrics files are not kept here
                switch (v) {
                    case Variant::vanilla:
                        ckpt = train_vanilla(demos, variant_cfg.mix_spec(), variant_cfg);
                        break;
                    case Variant::wog_wo_cotrain:
                        ckpt = train_wo_cotrain(demos, variant_cfg.mix_spec(), variant_cfg);
                        break;
                    case Variant::wog_full: {
                        Checkpoint s1 = train_stage1(demos, variant_cfg.mix_spec(), variant_cfg);
                        ckpt = train_stage2(demos, variant_cfg.mix_spec(), variant_cfg, s1);
                        break;
                    }
                }
                save_checkpoint(path, ckpt);
            }
            LearnedPolicy policy(ckpt, cfg.sampler_steps);
            EvalReport report =
                evaluate(policy, result.suite, cfg.n_trials, derive_seed(cfg.master_seed, 0xE7A1),
                         cfg.env_params(), cfg.max_steps, cfg.exec_horizon);
            result.reports[static_cast<size_t>(v)].push_back(std::move(report));
        }
    }
    return result;
}

// ---------------------------------------------------------------- probe

ProbeResult probe_statistics(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape() || pred.rank() != 3)
        throw ShapeError("probe_statistics: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    NoGradGuard ng;
    const int n = pred.dim(0), nq = pred.dim(1), d = pred.dim(2);
    Tensor cos = cosine_rowwise(reshape(pred, {n * nq, d}), reshape(target, {n * nq, d}));

    ProbeResult out;
    out.per_token_mean.assign(static_cast<size_t>(nq), 0.0);
    out.samples = n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int q = 0; q < nq; ++q) {
            const double c = cos.data()[static_cast<size_t>(i) * nq + static_cast<size_t>(q)];
            total += c;
            out.per_token_mean[static_cast<size_t>(q)] += c;
            const int bin = std::clamp(static_cast<int>((c + 1.0) / 2.0 * 20.0), 0, 19);
            ++out.histogram[static_cast<size_t>(bin)];
        }
    }
    if (n > 0) {
        out.mean_token_cosine = total / (static_cast<double>(n) * nq);
        for (auto& v : out.per_token_mean) v /= static_cast<double>(n);
    }
    return out;
}

ProbeResult condition_probe(const Checkpoint& ckpt, const std::vector<Episode>& episodes) {
    if (ckpt.stage == StageTag::stage1)
        throw ValueError("condition_probe: stage-I checkpoint has no trained query head");
    ModelBundle bundle = restore_models(ckpt);
    TrainingData data(episodes, ckpt.config, bundle.norm);
    data.build_condition_targets(*bundle.vision, *bundle.future_encoder);

    NoGradGuard ng;
    const auto& sites = data.sites();
    std::vector<Tensor> preds, targets;
    const size_t chunk = 32;
    for (size_t begin = 0; begin < sites.size(); begin += chunk) {
        const size_t end = std::min(begin + chunk, sites.size());
        std::vector<int> idx;
        for (size_t i = begin; i < end; ++i) idx.push_back(static_cast<int>(i));
        Rng rng(1);  // taus/noise unused by the probe path
        BatchTensors batch = assemble_batch(data, idx, rng, false, true);
        auto enc = bundle.backbone->encode(batch.obs, batch.tokens);
        preds.push_back(bundle.cond_head->predict(enc.h));
        targets.push_back(batch.cond_target);
    }
    return probe_statistics(concat(preds, 0), concat(targets, 0));
}

}  // namespace wog
