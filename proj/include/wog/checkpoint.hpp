#pragma once

// Model bundle (the full parameter set for one run) and the versioned binary
// checkpoint container with per-blob checksums.

#include <memory>
#include <optional>

#include "wog/config.hpp"

namespace wog {

enum class StageTag : uint8_t { stage1 = 1, stage2 = 2, finetuned = 3 };
const char* stage_name(StageTag s);

struct ActionNormStats {
    std::array<double, 3> lo{-1.0, -1.0, -1.0};
    std::array<double, 3> hi{1.0, 1.0, 1.0};

    std::array<double, 3> normalize(const std::array<double, 3>& a) const;
    std::array<double, 3> denormalize(const std::array<double, 3>& a) const;
};

ActionNormStats compute_norm_stats(const std::vector<Episode>& episodes);

struct ModelBundle {
    RunConfig config;
    std::unique_ptr<VisionStack> vision;
    std::unique_ptr<FutureEncoder> future_encoder;
    std::unique_ptr<Backbone> backbone;
    std::unique_ptr<DiT> dit;
    std::unique_ptr<CondQueryHead> cond_head;
    ActionNormStats norm;
};

ModelBundle build_models(const RunConfig& cfg);

struct Checkpoint {
    uint32_t version = 1;
    StageTag stage = StageTag::stage1;
    RunConfig config;
    ActionNormStats norm;
    uint64_t encoder_checksum = 0;  // frozen future-encoder checksum, stage >= II

    struct Blob {
        std::string name;  // "<model>/<param>"
        Shape shape;
        bool frozen = false;
        std::vector<double> data;
    };
    std::vector<Blob> blobs;
};

// snapshot of the bundle's current parameters; stage1 excludes the condition
// query head (it is untrained until the second stage)
Checkpoint make_checkpoint(StageTag stage, const ModelBundle& bundle);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// throws SerializationError (version / checksum / truncated); verifies the
// recorded frozen-encoder checksum for stage >= II
Checkpoint load_checkpoint(const std::string& path);

// rebuild models from a checkpoint: fresh bundle from the config echo, then
// parameters restored by name (shape-checked); freezes the future encoder for
// stage >= II and re-verifies its checksum
ModelBundle restore_models(const Checkpoint& ckpt);

}  // namespace wog
