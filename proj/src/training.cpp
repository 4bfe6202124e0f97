#include "wog/training.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "wog/optim.hpp"

namespace wog {

FlowTarget make_flow_target(const Tensor& a1, Rng& rng) {
    for (double v : a1.data()) {
        if (v < -1.0 - 1e-9 || v > 1.0 + 1e-9)
            throw ValueError("make_flow_target: action entries must lie in [-1,1]");
    }
    FlowTarget out;
    out.tau = rng.uniform01();
    Tensor a0 = Tensor::randn(a1.shape(), rng);
    out.a_tau = add(scale(a0, 1.0 - out.tau), scale(a1, out.tau));
    out.v_star = sub(a1, a0);
    return out;
}

// ---------------------------------------------------------------- dataset

TrainingData::TrainingData(std::vector<Episode> episodes, const RunConfig& cfg,
                           const ActionNormStats& norm)
    : episodes_(std::move(episodes)), cfg_(cfg) {
    const int horizon = cfg.horizon;
    for (size_t ei = 0; ei < episodes_.size(); ++ei) {
        const Episode& ep = episodes_[ei];
        const int len = ep.length();
        for (int t = 0; t < len; t += cfg.site_stride) {
            Site s;
            s.episode = static_cast<int>(ei);
            s.t = t;
            s.labeled = ep.has_action_labels;
            s.tag = ep.source_tag;
            s.actions_norm.assign(static_cast<size_t>(horizon) * kActionDim, 0.0);
            s.valid.assign(static_cast<size_t>(horizon), 0.0);
            for (int k = 0; k < horizon; ++k) {
                if (t + k < len) {
                    s.valid[static_cast<size_t>(k)] = 1.0;
                    const auto a = norm.normalize(ep.actions[static_cast<size_t>(t + k)]);
                    for (int d = 0; d < kActionDim; ++d)
                        s.actions_norm[static_cast<size_t>(k) * kActionDim + d] =
                            a[static_cast<size_t>(d)];
                }
            }
            by_tag_[static_cast<size_t>(s.tag)].push_back(static_cast<int>(sites_.size()));
            sites_.push_back(std::move(s));
        }
    }
    if (sites_.empty()) throw TrainError("TrainingData: no sites (empty episode set?)");
}

namespace {

// frame stacks for a chunk of sites: current plus the four future offsets
struct WindowBatch {
    Tensor current;
    std::vector<Tensor> futures;
};

WindowBatch gather_windows(const std::vector<Episode>& episodes, const std::vector<Site>& sites,
                           size_t begin, size_t end, int horizon) {
    std::vector<const Image*> cur;
    std::array<std::vector<const Image*>, 4> fut;
    for (size_t i = begin; i < end; ++i) {
        const Site& s = sites[i];
        const Episode& ep = episodes[static_cast<size_t>(s.episode)];
        const int last = static_cast<int>(ep.frames.size()) - 1;
        cur.push_back(&ep.frames[static_cast<size_t>(s.t)]);
        for (int k = 1; k <= 4; ++k) {
            const int idx = std::min(s.t + k * horizon / 4, last);
            fut[static_cast<size_t>(k - 1)].push_back(&ep.frames[static_cast<size_t>(idx)]);
        }
    }
    WindowBatch out;
    out.current = images_to_tensor(cur);
    for (const auto& f : fut) out.futures.push_back(images_to_tensor(f));
    return out;
}

}  // namespace

void TrainingData::build_stage1_features(const VisionStack& vision) {
    NoGradGuard ng;
    const size_t chunk = 32;
    for (size_t begin = 0; begin < sites_.size(); begin += chunk) {
        const size_t end = std::min(begin + chunk, sites_.size());
        WindowBatch wb = gather_windows(episodes_, sites_, begin, end, cfg_.horizon);
        auto grids = vision.encode_future(wb.current, wb.futures);
        if (grid_tokens.empty()) {
            for (const auto& g : grids) grid_tokens.push_back(g.dim(1));
        }
        for (size_t i = begin; i < end; ++i) {
            Site& s = sites_[i];
            s.grids.resize(grids.size());
            for (size_t h = 0; h < grids.size(); ++h) {
                const int per = grids[h].dim(1) * grids[h].dim(2);
                const double* src = grids[h].data().data() + (i - begin) * per;
                s.grids[h].assign(src, src + per);
            }
        }
    }
}

void TrainingData::build_condition_targets(const VisionStack& vision,
                                           const FutureEncoder& encoder) {
    NoGradGuard ng;
    const size_t chunk = 32;
    for (size_t begin = 0; begin < sites_.size(); begin += chunk) {
        const size_t end = std::min(begin + chunk, sites_.size());
        WindowBatch wb = gather_windows(episodes_, sites_, begin, end, cfg_.horizon);
        Tensor cond = encoder.encode(vision.encode_future(wb.current, wb.futures));
        const int per = cond.dim(1) * cond.dim(2);
        for (size_t i = begin; i < end; ++i) {
            const double* src = cond.data().data() + (i - begin) * per;
            sites_[i].cond_target.assign(src, src + per);
        }
    }
}

// ---------------------------------------------------------------- batches

std::vector<int> sample_batch_indices(const TrainingData& data, const MixSpec& mix, int batch_size,
                                      Rng& rng) {
    const MixSpec norm = normalized(mix);
    for (const auto& e : norm) {
        if (e.weight > 0.0 && data.sites_for(e.tag).empty())
            throw TrainError(std::string("mix requests source '") + source_tag_name(e.tag) +
                             "' but the dataset has no such episodes");
    }
    std::vector<int> out;
    out.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const double r = rng.uniform01();
        double acc = 0.0;
        SourceTag tag = norm.back().tag;
        for (const auto& e : norm) {
            acc += e.weight;
            if (r < acc) {
                tag = e.tag;
                break;
            }
        }
        const auto& pool = data.sites_for(tag);
        out.push_back(pool[static_cast<size_t>(rng.index(static_cast<int>(pool.size())))]);
    }
    return out;
}

BatchTensors assemble_batch(const TrainingData& data, const std::vector<int>& site_indices,
                            Rng& rng, bool want_grids, bool want_cond_targets) {
    const RunConfig& cfg = data.config();
    const int b = static_cast<int>(site_indices.size());
    const int t_len = cfg.horizon, a_dim = kActionDim;

    BatchTensors out;
    std::vector<double> obs_data;
    obs_data.reserve(static_cast<size_t>(b) * cfg.image_size * cfg.image_size * 3);
    std::vector<double> a_tau(static_cast<size_t>(b) * t_len * a_dim);
    std::vector<double> v_star(static_cast<size_t>(b) * t_len * a_dim);
    std::vector<double> mask(static_cast<size_t>(b) * t_len * a_dim, 0.0);
    std::vector<double> taus(static_cast<size_t>(b));
    std::vector<double> cond(want_cond_targets
                                 ? static_cast<size_t>(b) * cfg.n_queries * cfg.cond_dim
                                 : 0);
    std::vector<std::vector<double>> grids;

    for (int i = 0; i < b; ++i) {
        const Site& s = data.sites()[static_cast<size_t>(site_indices[static_cast<size_t>(i)])];
        const Episode& ep = data.episodes()[static_cast<size_t>(s.episode)];

        const Image& frame = data.obs_frame(s);
        obs_data.insert(obs_data.end(), frame.px.begin(), frame.px.end());
        out.tokens.insert(out.tokens.end(), ep.instruction.begin(), ep.instruction.end());
        out.labeled.push_back(s.labeled);
        if (s.labeled) ++out.n_labeled;

        const double tau = rng.uniform01();
        taus[static_cast<size_t>(i)] = tau;
        double* at = a_tau.data() + static_cast<size_t>(i) * t_len * a_dim;
        double* vs = v_star.data() + static_cast<size_t>(i) * t_len * a_dim;
        double* mk = mask.data() + static_cast<size_t>(i) * t_len * a_dim;
        for (int j = 0; j < t_len * a_dim; ++j) {
            const double a0 = rng.normal();
            const double a1 = s.actions_norm[static_cast<size_t>(j)];
            at[j] = (1.0 - tau) * a0 + tau * a1;
            vs[j] = a1 - a0;
            if (s.labeled && s.valid[static_cast<size_t>(j / a_dim)] > 0.5) mk[j] = 1.0;
        }

        if (want_grids) {
            if (s.grids.empty())
                throw TrainError("assemble_batch: stage-I features not built for this dataset");
            if (grids.empty()) grids.resize(s.grids.size());
            for (size_t h = 0; h < s.grids.size(); ++h)
                grids[h].insert(grids[h].end(), s.grids[h].begin(), s.grids[h].end());
        }
        if (want_cond_targets) {
            if (s.cond_target.empty())
                throw TrainError("assemble_batch: condition targets not built for this dataset");
            std::copy(s.cond_target.begin(), s.cond_target.end(),
                      cond.data() + static_cast<size_t>(i) * cfg.n_queries * cfg.cond_dim);
        }
    }

    out.obs = Tensor::from_data({b, cfg.image_size, cfg.image_size, 3}, std::move(obs_data));
    out.a_tau = Tensor::from_data({b, t_len, a_dim}, std::move(a_tau));
    out.v_star = Tensor::from_data({b, t_len, a_dim}, std::move(v_star));
    out.mask = Tensor::from_data({b, t_len, a_dim}, std::move(mask));
    out.taus = Tensor::from_data({b}, std::move(taus));
    if (want_grids) {
        for (size_t h = 0; h < grids.size(); ++h) {
            const int tokens = data.grid_tokens[h];
            out.grids.push_back(Tensor::from_data({b, tokens, cfg.vision_embed_dim},
                                                  std::move(grids[h])));
        }
    }
    if (want_cond_targets)
        out.cond_target = Tensor::from_data({b, cfg.n_queries, cfg.cond_dim}, std::move(cond));
    return out;
}

// ---------------------------------------------------------------- losses

Tensor flow_loss(const Tensor& v_pred, const Tensor& v_star, const Tensor& mask, int n_labeled) {
    const auto& s = v_pred.shape();
    const double denom = static_cast<double>(std::max(1, n_labeled)) * s[1] * s[2];
    Tensor diff = sub(v_pred, v_star);
    return scale(sum_all(mul(mul(diff, diff), mask)), 1.0 / denom);
}

Tensor align_loss(const Tensor& pred, const Tensor& target) {
    const int rows = pred.dim(0) * pred.dim(1);
    Tensor p = reshape(pred, {rows, pred.dim(2)});
    Tensor t = reshape(target, {rows, target.dim(2)});
    Tensor cos = cosine_rowwise(p, t);
    return add_scalar(scale(mean_all(cos), -1.0), 1.0);
}

std::pair<Tensor, LossBreakdown> loss_stage1(const ModelBundle& bundle,
                                             const BatchTensors& batch) {
    for (bool l : batch.labeled) {
        if (!l)
            throw TrainError("loss_stage1: batch contains an unlabeled sample (contract "
                             "violation: the first stage consumes action-supervised data)");
    }
    Tensor cond = bundle.future_encoder->encode(batch.grids);
    auto enc = bundle.backbone->encode(batch.obs, batch.tokens);
    Tensor v = bundle.dit->velocity(batch.a_tau, batch.taus, enc.z, cond);
    Tensor flow = flow_loss(v, batch.v_star, batch.mask, batch.n_labeled);
    LossBreakdown lb;
    lb.flow_term = flow.item();
    lb.total = lb.flow_term;
    return {flow, lb};
}

std::pair<Tensor, LossBreakdown> loss_stage2(const ModelBundle& bundle, const BatchTensors& batch,
                                             double align_weight) {
    if (!bundle.future_encoder->frozen())
        throw TrainError("loss_stage2: future encoder is not frozen");
    auto enc = bundle.backbone->encode(batch.obs, batch.tokens);
    Tensor v = bundle.dit->velocity(batch.a_tau, batch.taus, enc.z, std::nullopt);
    Tensor flow = flow_loss(v, batch.v_star, batch.mask, batch.n_labeled);
    Tensor pred = bundle.cond_head->predict(enc.h);
    Tensor align = align_loss(pred, batch.cond_target);
    Tensor total = add(flow, scale(align, align_weight));
    LossBreakdown lb;
    lb.flow_term = flow.item();
    lb.align_term = align.item();
    lb.total = total.item();
    return {total, lb};
}

std::pair<Tensor, LossBreakdown> loss_flow_only(const ModelBundle& bundle,
                                                const BatchTensors& batch) {
    auto enc = bundle.backbone->encode(batch.obs, batch.tokens);
    Tensor v = bundle.dit->velocity(batch.a_tau, batch.taus, enc.z, std::nullopt);
    Tensor flow = flow_loss(v, batch.v_star, batch.mask, batch.n_labeled);
    LossBreakdown lb;
    lb.flow_term = flow.item();
    lb.total = lb.flow_term;
    return {flow, lb};
}

// ---------------------------------------------------------------- loop

namespace {

class MetricsWriter {
  public:
    explicit MetricsWriter(const std::string& path) {
        if (!path.empty()) {
            out_.open(path, std::ios::trunc);
            if (!out_) throw ValueError("cannot open metrics file " + path);
        }
    }
    void write(int step, const std::string& stage, const LossBreakdown& lb, double lr,
               double wall_ms) {
        if (!out_.is_open()) return;
        nlohmann::json j;
        j["step"] = step;
        j["stage"] = stage;
        j["flow_term"] = lb.flow_term;
        if (lb.align_term.has_value())
            j["align_term"] = *lb.align_term;
        else
            j["align_term"] = nullptr;
        j["total"] = lb.total;
        j["lr"] = lr;
        j["wall_ms"] = wall_ms;
        out_ << j.dump() << "\n";
    }

  private:
    std::ofstream out_;
};

}  // namespace

std::vector<StepRecord> train_loop(ModelBundle& bundle, const TrainingData& data,
                                   const MixSpec& mix, const TrainOptions& opt) {
    if (opt.use_conditions && opt.use_align)
        throw TrainError("train_loop: conditions in the action head and alignment supervision "
                         "are mutually exclusive objectives");

    std::vector<Parameter> params;
    auto absorb = [&params](ParamStore& store) {
        for (auto& p : store.params()) params.push_back(p);
    };
    absorb(bundle.backbone->params());
    absorb(bundle.dit->params());
    if (opt.use_conditions && !bundle.future_encoder->frozen())
        absorb(bundle.future_encoder->params());
    if (opt.use_align) absorb(bundle.cond_head->params());

    Adam adam(params, opt.lr);
    Rng rng(opt.seed);
    MetricsWriter metrics(opt.metrics_path);
    std::vector<StepRecord> records;

    auto t_last = std::chrono::steady_clock::now();
    for (int step = 1; step <= opt.steps; ++step) {
        const auto idx = sample_batch_indices(data, mix, opt.batch_size, rng);
        BatchTensors batch =
            assemble_batch(data, idx, rng, opt.use_conditions, opt.use_align);

        adam.zero_grad();
        Tensor loss;
        LossBreakdown lb;
        if (opt.use_conditions) {
            std::tie(loss, lb) = loss_stage1(bundle, batch);
        } else if (opt.use_align) {
            std::tie(loss, lb) = loss_stage2(bundle, batch, opt.align_weight);
        } else {
            std::tie(loss, lb) = loss_flow_only(bundle, batch);
        }
        if (!std::isfinite(lb.total) || !std::isfinite(lb.flow_term) ||
            (lb.align_term && !std::isfinite(*lb.align_term))) {
            throw TrainError("train_loop: non-finite loss at step " + std::to_string(step) +
                             " (flow=" + std::to_string(lb.flow_term) + ", align=" +
                             (lb.align_term ? std::to_string(*lb.align_term) : "absent") + ")");
        }
        backward(loss);
        adam.step();

        if (step % opt.log_interval == 0 || step == opt.steps) {
            const auto now = std::chrono::steady_clock::now();
            const double wall_ms =
                std::chrono::duration<double, std::milli>(now - t_last).count();
            t_last = now;
            metrics.write(step, opt.stage_label, lb, opt.lr, wall_ms);
            records.push_back({step, lb});
        }
    }
    return records;
}

// ---------------------------------------------------------------- stages

namespace {

TrainOptions options_for(const RunConfig& cfg, int steps, bool use_conditions, bool use_align,
                         uint64_t seed_tag, const std::string& label,
                         const std::string& metrics_path) {
    TrainOptions opt;
    opt.steps = steps;
    opt.batch_size = cfg.batch_size;
    opt.lr = cfg.lr;
    opt.seed = derive_seed(cfg.master_seed, seed_tag);
    opt.use_conditions = use_conditions;
    opt.use_align = use_align;
    opt.align_weight = cfg.align_weight;
    opt.log_interval = cfg.log_interval;
    opt.stage_label = label;
    opt.metrics_path = metrics_path;
    return opt;
}

std::string metrics_file(const RunConfig& cfg, const std::string& label) {
    if (cfg.out_dir.empty()) return "";
    return cfg.out_dir + "/metrics_" + label + ".jsonl";
}

}  // namespace

Checkpoint train_stage1(const std::vector<Episode>& demos, const MixSpec& mix,
                        const RunConfig& cfg) {
    ModelBundle bundle = build_models(cfg);
    bundle.norm = compute_norm_stats(demos);
    TrainingData data(demos, cfg, bundle.norm);
    data.build_stage1_features(*bundle.vision);
    const auto opt =
        options_for(cfg, cfg.stage1_steps, true, false, 0xA1, "I", metrics_file(cfg, "I"));
    train_loop(bundle, data, mix, opt);
    return make_checkpoint(StageTag::stage1, bundle);
}

Checkpoint train_stage2(const std::vector<Episode>& demos, const MixSpec& mix,
                        const RunConfig& cfg, const Checkpoint& init) {
    if (init.stage != StageTag::stage1)
        throw TrainError("train_stage2: requires a stage-I checkpoint");
    ModelBundle bundle = restore_models(init);
    bundle.future_encoder->freeze();
    TrainingData data(demos, cfg, bundle.norm);
    data.build_condition_targets(*bundle.vision, *bundle.future_encoder);
    const auto opt =
        options_for(cfg, cfg.stage2_steps, false, true, 0xA2, "II", metrics_file(cfg, "II"));
    train_loop(bundle, data, mix, opt);
    return make_checkpoint(StageTag::stage2, bundle);
}

Checkpoint finetune(const std::vector<Episode>& demos, const MixSpec& mix, const RunConfig& cfg,
                    const Checkpoint& init) {
    if (init.stage != StageTag::stage2 && init.stage != StageTag::finetuned)
        throw TrainError("finetune: requires stage-II init");
    ModelBundle bundle = restore_models(init);
    TrainingData data(demos, cfg, bundle.norm);
    data.build_condition_targets(*bundle.vision, *bundle.future_encoder);
    const auto opt = options_for(cfg, cfg.stage2_steps, false, true, 0xA3, "finetune",
                                 metrics_file(cfg, "finetune"));
    train_loop(bundle, data, mix, opt);
    return make_checkpoint(StageTag::finetuned, bundle);
}

Checkpoint train_vanilla(const std::vector<Episode>& demos, const MixSpec& mix,
                         const RunConfig& cfg) {
    ModelBundle bundle = build_models(cfg);
    bundle.norm = compute_norm_stats(demos);
    TrainingData data(demos, cfg, bundle.norm);
    const auto opt = options_for(cfg, cfg.stage1_steps + cfg.stage2_steps, false, false, 0xA4,
                                 "vanilla", metrics_file(cfg, "vanilla"));
    train_loop(bundle, data, mix, opt);
    bundle.future_encoder->freeze();  // untrained; frozen so the container stage is uniform
    return make_checkpoint(StageTag::stage2, bundle);
}

Checkpoint train_wo_cotrain(const std::vector<Episode>& demos, const MixSpec& mix,
                            const RunConfig& cfg) {
    Checkpoint stage1 = train_stage1(demos, mix, cfg);
    ModelBundle bundle = restore_models(stage1);
    bundle.future_encoder->freeze();
    TrainingData data(demos, cfg, bundle.norm);
    const auto opt = options_for(cfg, cfg.stage2_steps, false, false, 0xA5, "II_wo_cotrain",
                                 metrics_file(cfg, "II_wo_cotrain"));
    train_loop(bundle, data, mix, opt);
    return make_checkpoint(StageTag::stage2, bundle);
}

}  // namespace wog
