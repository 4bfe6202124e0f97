#pragma once

// Run configuration: defaults, key=value file parsing, CLI overrides.
// Precedence: defaults < file < flags. Unknown keys are errors.

#include <string>
#include <utility>
#include <vector>

#include "wog/future_encoder.hpp"
#include "wog/policy.hpp"
#include "wog/vision.hpp"
#include "wog/world.hpp"

namespace wog {

struct MixEntry {
    SourceTag tag;
    double weight;
};
using MixSpec = std::vector<MixEntry>;

MixSpec parse_mix(const std::string& text);  // e.g. "robot:0.5,human_video:0.5"
std::string mix_to_string(const MixSpec& mix);
MixSpec normalized(const MixSpec& mix);  // weights sum to 1; rejects empty/zero

struct RunConfig {
    // scenario
    std::string task = "pick_place";
    int image_size = 32;
    int patch = 8;
    int background_color_id = 0;
    double brightness = 1.0;

    // model
    std::string encoder_setup = "sem+dyn";
    int vision_embed_dim = 48;
    int model_dim = 64;
    int heads = 4;
    int backbone_blocks = 3;
    int dit_blocks = 3;
    int fe_blocks = 2;
    int fe_hidden = 64;
    int ffn_mult = 4;
    int n_queries = 16;
    int cond_dim = 32;
    int cond_window = 4;
    int horizon = 16;
    int exec_horizon = 8;

    // training (desk-scale; full-scale reference: 100k/50k steps at batch 1024)
    int stage1_steps = 5000;
    int stage2_steps = 3000;
    int batch_size = 32;
    double lr = 1e-3;
    double align_weight = 1.0;
    int site_stride = 4;
    int log_interval = 50;
    std::string mix = "robot:1.0";

    // data
    int n_demos = 64;
    double label_fraction = 1.0;

    // evaluation
    int n_trials = 50;
    int max_steps = 80;
    int sampler_steps = 10;
    int ablation_seeds = 3;

    uint64_t master_seed = 1;
    std::string out_dir = "runs/default";

    EnvParams env_params() const;
    VisionConfig vision_config() const;
    PolicyConfig policy_config() const;
    FutureEncoderConfig future_encoder_config() const;
    MixSpec mix_spec() const { return normalized(parse_mix(mix)); }
};

// defaults, then file (optional), then flag overrides; validates at the end
RunConfig parse_config(const std::string& path_or_empty,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

void validate(const RunConfig& cfg);

// canonical key=value text (stable key order, full double precision)
std::string serialize_config(const RunConfig& cfg);
RunConfig config_from_text(const std::string& text);

const std::vector<std::string>& config_keys();

}  // namespace wog
