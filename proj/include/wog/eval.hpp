#pragma once

// Closed-loop receding-horizon evaluation, ID/OOD suites, the three-variant
// training ablation, and the condition-prediction probe.

#include <memory>

#include "wog/training.hpp"

namespace wog {

enum class Setup : uint8_t { id = 0, background = 1, light = 2, novel_object = 3 };
const char* setup_name(Setup s);
Setup setup_from_name(const std::string& s);

struct SuiteCell {
    Task task;
    Setup setup;
};

// parses "id,background,light,novel_object" against one task
std::vector<SuiteCell> parse_suite(const std::string& text, Task task);

// policies plan a T-step chunk from the current world state
class ChunkPolicy {
  public:
    virtual ~ChunkPolicy() = default;
    virtual std::vector<std::array<double, 3>> plan(const WorldState& state,
                                                    const EnvParams& params,
                                                    uint64_t chunk_seed) = 0;
    virtual int horizon() const = 0;
};

// self-guided inference: a single rendered observation and the instruction;
// no future-frame machinery anywhere on this path
class LearnedPolicy : public ChunkPolicy {
  public:
    LearnedPolicy(const Checkpoint& ckpt, int sampler_steps);

    std::vector<std::array<double, 3>> plan(const WorldState& state, const EnvParams& params,
                                            uint64_t chunk_seed) override;
    int horizon() const override { return bundle_.config.horizon; }
    const ModelBundle& bundle() const { return bundle_; }

  private:
    ModelBundle bundle_;
    int sampler_steps_;
};

// oracle baseline: simulates the scripted controller forward
class ExpertPolicy : public ChunkPolicy {
  public:
    explicit ExpertPolicy(int horizon) : horizon_(horizon) {}
    std::vector<std::array<double, 3>> plan(const WorldState& state, const EnvParams& params,
                                            uint64_t chunk_seed) override;
    int horizon() const override { return horizon_; }

  private:
    int horizon_;
};

struct RolloutResult {
    bool success = false;
    int steps = 0;
    int chunks = 0;
    int executed_actions = 0;
};

RolloutResult rollout(ChunkPolicy& policy, Task task, uint64_t env_seed, const EnvParams& params,
                      int max_steps, int exec_horizon);

struct EvalCell {
    Task task;
    Setup setup;
    int trials = 0;
    int successes = 0;
    double mean_steps = 0.0;

    double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

struct EvalReport {
    std::vector<EvalCell> cells;
    int n_trials = 0;
    uint64_t seed = 0;
    std::string fingerprint;
    // call-counter deltas observed while evaluating; zero for learned policies
    uint64_t vision_calls = 0;
    uint64_t encoder_calls = 0;

    const EvalCell* find(Task task, Setup setup) const;
};

// Every task with an OOD cell gets an ID baseline cell prepended if missing,
// so relative drops are always well defined. Scene seeds are shared across
// cells: trial i uses the same reset seed in every cell.
EvalReport evaluate(ChunkPolicy& policy, const std::vector<SuiteCell>& suite, int n_trials,
                    uint64_t seed, const EnvParams& base_params, int max_steps, int exec_horizon);

std::string report_to_jsonl(const EvalReport& report);
std::string report_to_table(const EvalReport& report);
void write_report(const EvalReport& report, const std::string& jsonl_path,
                  const std::string& table_path);

// ---------------------------------------------------------------- ablation

enum class Variant : uint8_t { vanilla = 0, wog_wo_cotrain = 1, wog_full = 2 };
const char* variant_name(Variant v);

struct VariantBudget {
    int total_steps;
};

struct AblationResult {
    // [variant][seed] evaluation reports over the shared suite
    std::array<std::vector<EvalReport>, 3> reports;
    std::vector<SuiteCell> suite;
    int seeds = 0;

    double mean_rate(Variant v, Task task, Setup setup) const;
    double min_rate(Variant v, Task task, Setup setup) const;
    double max_rate(Variant v, Task task, Setup setup) const;
    std::string table() const;
};

// trains (or reuses cached checkpoints for) every variant x seed with matched
// budgets and shared demo caches, then evaluates all of them on one suite
AblationResult run_ablation(const RunConfig& cfg, const std::string& artifacts_dir);

// budget guard used by run_ablation; exposed so the mismatch contract is
// testable
void check_budgets_match(const std::vector<VariantBudget>& budgets);

// checkpoint paths used by the ablation cache (variant x seed index)
std::string ablation_checkpoint_path(const std::string& artifacts_dir, const RunConfig& cfg,
                                     Variant v, int seed_index);
RunConfig ablation_run_config(const RunConfig& cfg, int seed_index);
std::vector<Episode> ablation_demos(const RunConfig& cfg, const std::string& artifacts_dir);

// ---------------------------------------------------------------- probe

struct ProbeResult {
    double mean_token_cosine = 0.0;
    std::vector<double> per_token_mean;  // one entry per query token
    std::array<int, 20> histogram{};     // cosine values binned over [-1,1]
    int samples = 0;
};

// cosine statistics between predicted and target condition tokens, both
// [N,Nq,D]; the aggregation behind condition_probe
ProbeResult probe_statistics(const Tensor& pred, const Tensor& target);

// compares predicted condition tokens against the frozen-encoder targets on
// the given episodes; rejects stage-I checkpoints (no trained query head)
ProbeResult condition_probe(const Checkpoint& ckpt, const std::vector<Episode>& episodes);

std::string build_fingerprint();

}  // namespace wog
