#pragma once

// Two-stage training: flow-matching targets, the stage objectives (future-
// conditioned flow; self-guided flow + condition alignment), label masking
// for video-only sources, seeded dataset mixing, and the stage wrappers.

#include <optional>

#include "wog/checkpoint.hpp"

namespace wog {

// ---------------------------------------------------------------- targets

struct FlowTarget {
    Tensor a_tau;   // [T,A]
    double tau;
    Tensor v_star;  // [T,A]
};

// draws a0 ~ N(0,1) elementwise and tau ~ U[0,1];
// a_tau = (1-tau) a0 + tau a1, v_star = a1 - a0
FlowTarget make_flow_target(const Tensor& a1, Rng& rng);

struct LossBreakdown {
    double flow_term = 0.0;
    std::optional<double> align_term;
    double total = 0.0;
};

// ---------------------------------------------------------------- dataset

// one training sample: an episode position with cached features
struct Site {
    int episode = 0;
    int t = 0;
    bool labeled = true;
    SourceTag tag = SourceTag::robot;
    std::vector<double> actions_norm;              // T*A, zero-padded past the end
    std::vector<double> valid;                     // T, 1/0 episode-tail mask
    std::vector<std::vector<double>> grids;        // per vision head, P_i*in_dim
    std::vector<double> cond_target;               // Nq*cond_dim
};

class TrainingData {
  public:
    TrainingData(std::vector<Episode> episodes, const RunConfig& cfg,
                 const ActionNormStats& norm);

    void build_stage1_features(const VisionStack& vision);
    void build_condition_targets(const VisionStack& vision, const FutureEncoder& encoder);

    const std::vector<Episode>& episodes() const { return episodes_; }
    const std::vector<Site>& sites() const { return sites_; }
    const std::vector<int>& sites_for(SourceTag tag) const {
        return by_tag_[static_cast<size_t>(tag)];
    }
    const Image& obs_frame(const Site& s) const {
        return episodes_[static_cast<size_t>(s.episode)].frames[static_cast<size_t>(s.t)];
    }
    const RunConfig& config() const { return cfg_; }

    std::vector<int> grid_tokens;  // per vision head

  private:
    std::vector<Episode> episodes_;
    std::vector<Site> sites_;
    std::array<std::vector<int>, 3> by_tag_;
    RunConfig cfg_;
};

// ---------------------------------------------------------------- batches

struct BatchTensors {
    Tensor obs;               // [B,H,W,3]
    std::vector<int> tokens;  // B * instr_len
    Tensor a_tau;             // [B,T,A]
    Tensor taus;              // [B]
    Tensor v_star;            // [B,T,A]
    Tensor mask;              // [B,T,A], labeled AND valid
    int n_labeled = 0;
    std::vector<bool> labeled;
    std::vector<Tensor> grids;  // stage I contexts, per head [B,P,in_dim]
    Tensor cond_target;         // stage II alignment targets [B,Nq,D]
};

std::vector<int> sample_batch_indices(const TrainingData& data, const MixSpec& mix, int batch_size,
                                      Rng& rng);
BatchTensors assemble_batch(const TrainingData& data, const std::vector<int>& site_indices,
                            Rng& rng, bool want_grids, bool want_cond_targets);

// ---------------------------------------------------------------- losses

// squared error summed over masked entries, divided by max(1,n_labeled)*T*A;
// masked entries contribute exactly zero gradient
Tensor flow_loss(const Tensor& v_pred, const Tensor& v_star, const Tensor& mask, int n_labeled);

// 1 - mean over batch*tokens of row-wise cosine similarity
Tensor align_loss(const Tensor& pred, const Tensor& target);

// future-conditioned flow objective; every sample must be labeled
std::pair<Tensor, LossBreakdown> loss_stage1(const ModelBundle& bundle,
                                             const BatchTensors& batch);
// self-guided flow + condition alignment; the future encoder must be frozen
std::pair<Tensor, LossBreakdown> loss_stage2(const ModelBundle& bundle, const BatchTensors& batch,
                                             double align_weight = 1.0);
// flow-only objective with no condition context (vanilla / no-cotrain stage II)
std::pair<Tensor, LossBreakdown> loss_flow_only(const ModelBundle& bundle,
                                                const BatchTensors& batch);

// ---------------------------------------------------------------- loop

struct TrainOptions {
    int steps = 0;
    int batch_size = 16;
    double lr = 1e-3;
    uint64_t seed = 1;
    bool use_conditions = false;  // inject encoder output into the action head
    bool use_align = false;       // condition-prediction objective
    double align_weight = 1.0;
    int log_interval = 50;
    std::string metrics_path;  // empty: no metrics file
    std::string stage_label = "I";
};

struct StepRecord {
    int step;
    LossBreakdown loss;
};

// seeded loop: sample batch per mix, compute the configured objective, Adam
// step; aborts with diagnostics on non-finite losses
std::vector<StepRecord> train_loop(ModelBundle& bundle, const TrainingData& data,
                                   const MixSpec& mix, const TrainOptions& opt);

// ---------------------------------------------------------------- stages

Checkpoint train_stage1(const std::vector<Episode>& demos, const MixSpec& mix,
                        const RunConfig& cfg);
Checkpoint train_stage2(const std::vector<Episode>& demos, const MixSpec& mix,
                        const RunConfig& cfg, const Checkpoint& init);
Checkpoint finetune(const std::vector<Episode>& demos, const MixSpec& mix, const RunConfig& cfg,
                    const Checkpoint& init);

// budget-matched single-objective baseline (no conditions, no alignment),
// trained for stage1_steps + stage2_steps
Checkpoint train_vanilla(const std::vector<Episode>& demos, const MixSpec& mix,
                         const RunConfig& cfg);
// stage I as usual, stage II flow-only (condition supervision removed)
Checkpoint train_wo_cotrain(const std::vector<Episode>& demos, const MixSpec& mix,
                            const RunConfig& cfg);

}  // namespace wog
