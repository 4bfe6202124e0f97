#pragma once

// Frozen stand-in vision encoders for future-frame features, plus the
// quarter-frequency future-frame sampler. Both encoders are pure functions of
// their inputs: parameters are drawn once from a seed and never trained.
// Gradients still flow to image inputs when those require grad.

#include "wog/nn.hpp"
#include "wog/world.hpp"

namespace wog {

enum class EncoderSetup : uint8_t {
    semantic_only = 0,        // single patch-feature head
    semantic_contrastive = 1, // two patch-feature heads with distinct seeds
    semantic_dynamic = 2,     // patch-feature head + temporal-stack head
};

const char* encoder_setup_name(EncoderSetup s);
EncoderSetup encoder_setup_from_name(const std::string& s);

struct VisionConfig {
    int image_size = 32;
    int patch = 8;
    int embed_dim = 48;
    int dyn_downsample = 4;
    int future_frames = 4;  // K
    EncoderSetup setup = EncoderSetup::semantic_dynamic;
    uint64_t seed = 7001;
};

// per-process counters used to assert the inference path never touches the
// future-observation machinery
struct VisionCallCounters {
    uint64_t semantic = 0;
    uint64_t dynamic = 0;
};
VisionCallCounters vision_call_counters();
void reset_vision_call_counters();

struct FutureFrameSample {
    std::vector<Image> frames;  // K frames
    std::vector<int> offsets;   // strictly increasing, last == horizon
};

// offsets {T/4, 2T/4, 3T/4, T} relative to t; indices past the episode end
// repeat the final frame
FutureFrameSample sample_future_frames(const Episode& episode, int t, int horizon);

class SemanticEncoder {
  public:
    SemanticEncoder(const VisionConfig& cfg, uint64_t seed);

    // images [B,H,W,3] -> tokens [B,P,embed_dim]
    Tensor encode(const Tensor& images) const;
    int tokens_per_image() const { return tokens_; }
    uint64_t checksum() const { return store_.checksum(); }

  private:
    VisionConfig cfg_;
    int tokens_;
    ParamStore store_;
    Tensor w_proj_, b_proj_, w_mix_, b_mix_;
};

class DynamicEncoder {
  public:
    DynamicEncoder(const VisionConfig& cfg, uint64_t seed);

    // current [B,H,W,3] + K futures (each [B,H,W,3]) -> [B,Q,embed_dim]
    Tensor encode(const Tensor& current, const std::vector<Tensor>& futures) const;
    int tokens() const { return tokens_; }
    uint64_t checksum() const { return store_.checksum(); }

  private:
    VisionConfig cfg_;
    int tokens_;
    ParamStore store_;
    Tensor w1_, b1_, w2_, b2_;
};

// the frozen encoder bank for one run configuration
class VisionStack {
  public:
    explicit VisionStack(const VisionConfig& cfg);

    const VisionConfig& config() const { return cfg_; }

    // token grids for one future-frame window; the semantic head runs per
    // future frame (grids concatenated), the second head depends on setup
    std::vector<Tensor> encode_future(const Tensor& current,
                                      const std::vector<Tensor>& futures) const;

    int head_count() const;
    // total context tokens produced for one sample
    int total_tokens() const;
    uint64_t checksum() const;

  private:
    VisionConfig cfg_;
    std::unique_ptr<SemanticEncoder> semantic_;
    std::unique_ptr<SemanticEncoder> contrastive_;
    std::unique_ptr<DynamicEncoder> dynamic_;
};

// [B=1,H,W,3] constant tensor from an image (no grad)
Tensor image_to_tensor(const Image& img);
Tensor images_to_tensor(const std::vector<const Image*>& imgs);

}  // namespace wog
