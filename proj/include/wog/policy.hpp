#pragma once

// The trainable policy: a small causal transformer over image patches,
// instruction tokens and a trailing summary token; a DiT-style action head
// predicting flow-matching velocities over a T-step action chunk; and the
// query head that predicts condition tokens from the backbone hidden states.

#include <optional>

#include "wog/nn.hpp"

namespace wog {

struct PolicyConfig {
    int image_size = 32;
    int patch = 8;
    int model_dim = 64;
    int heads = 4;
    int backbone_blocks = 3;
    int dit_blocks = 3;
    int ffn_mult = 4;
    int vocab = 19;
    int instr_len = 6;
    int horizon = 16;  // T
    int action_dim = 3;
    int n_queries = 16;
    int cond_dim = 32;
    int cond_window = 4;  // trailing hidden-state rows visible to the query head
    uint64_t seed = 7201;

    int patches() const {
        const int g = image_size / patch;
        return g * g;
    }
    int seq_len() const { return patches() + instr_len + 1; }
};

// ---------------------------------------------------------------- backbone

class Backbone {
  public:
    explicit Backbone(const PolicyConfig& cfg, uint64_t seed);

    struct Output {
        Tensor z;  // [B,1,D] trailing-token feature
        Tensor h;  // [B,S,D] final-layer sequence
    };

    // obs [B,H,W,3]; tokens row-major [B * instr_len]
    Output encode(const Tensor& obs, const std::vector<int>& tokens) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const PolicyConfig& config() const { return cfg_; }

  private:
    struct Block {
        LayerNormParams ln_a;
        AttentionParams attn;
        LayerNormParams ln_f;
        FfnParams ffn;
    };

    PolicyConfig cfg_;
    ParamStore store_;
    Tensor patch_w_, patch_b_;
    Tensor token_table_;
    Tensor summary_token_;
    Tensor pos_embed_;
    std::vector<Block> blocks_;
    LayerNormParams final_norm_;
    Tensor mask_;
};

// ---------------------------------------------------------------- DiT head

class DiT {
  public:
    explicit DiT(const PolicyConfig& cfg, uint64_t seed);

    // a_tau [B,T,A], taus [B] in [0,1], z [B,1,D], cond optional [B,Nq,cond_dim]
    Tensor velocity(const Tensor& a_tau, const Tensor& taus, const Tensor& z,
                    const std::optional<Tensor>& cond) const;

    // Euler integration from seeded standard-normal noise; returns [B,T,A]
    Tensor sample(const Tensor& z, const std::optional<Tensor>& cond, int n_steps,
                  uint64_t noise_seed) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

  private:
    struct Block {
        Tensor mod_w, mod_b;  // timestep embedding -> 6 modulation vectors
        LayerNormParams ln_a;
        AttentionParams self_attn;
        LayerNormParams ln_x;
        AttentionParams cross_attn;
        LayerNormParams ln_f;
        FfnParams ffn;
    };

    PolicyConfig cfg_;
    ParamStore store_;
    Tensor action_in_w_, action_in_b_;
    Tensor pos_embed_;
    Tensor time_w1_, time_b1_, time_w2_, time_b2_;
    Tensor cond_in_w_, cond_in_b_;
    std::vector<Block> blocks_;
    LayerNormParams final_norm_;
    Tensor out_w_, out_b_;
};

// ---------------------------------------------------------------- query head

class CondQueryHead {
  public:
    explicit CondQueryHead(const PolicyConfig& cfg, uint64_t seed);

    // h [B,S,D] with S >= cond_window -> [B,Nq,cond_dim]
    Tensor predict(const Tensor& h) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

  private:
    PolicyConfig cfg_;
    ParamStore store_;
    Tensor queries_;
    LayerNormParams ln_q_;
    AttentionParams attn_;
    LayerNormParams ln_f_;
    FfnParams ffn_;
    LayerNormParams out_norm_;
    Tensor out_w_, out_b_;
};

}  // namespace wog
