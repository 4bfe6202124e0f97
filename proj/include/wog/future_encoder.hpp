#pragma once

// Query-based compressor: a small stack of cross-attention blocks whose
// learnable queries pool the frozen vision features of a future-frame window
// into a fixed-size condition representation (n_queries x cond_dim).
// Trainable in the first stage, frozen from the second stage onward.

#include "wog/nn.hpp"

namespace wog {

struct FutureEncoderConfig {
    int n_queries = 16;
    int cond_dim = 32;
    int hidden = 64;
    int blocks = 2;
    int heads = 4;
    int ffn_mult = 4;
    int in_dim = 48;    // vision embed dim
    int in_heads = 2;   // unify projections, one per vision head
    uint64_t seed = 7101;
};

uint64_t future_encoder_call_count();
void reset_future_encoder_call_count();

class FutureEncoder {
  public:
    explicit FutureEncoder(const FutureEncoderConfig& cfg);

    // grids: one [B,P_i,in_dim] tensor per vision head -> [B,n_queries,cond_dim]
    Tensor encode(const std::vector<Tensor>& grids) const;

    // idempotent; records the post-freeze checksum
    void freeze();
    bool frozen() const { return frozen_; }
    uint64_t frozen_checksum() const { return frozen_checksum_; }
    uint64_t checksum() const { return store_.checksum(); }

    const FutureEncoderConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

  private:
    struct Block {
        LayerNormParams ln_q;
        AttentionParams attn;
        LayerNormParams ln_f;
        FfnParams ffn;
    };

    FutureEncoderConfig cfg_;
    ParamStore store_;
    Tensor queries_;
    std::vector<Tensor> unify_w_, unify_b_;
    LayerNormParams ctx_norm_;
    std::vector<Block> blocks_;
    LayerNormParams out_norm_;
    Tensor out_w_, out_b_;
    bool frozen_ = false;
    uint64_t frozen_checksum_ = 0;
};

}  // namespace wog
