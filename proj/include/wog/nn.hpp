#pragma once

// Parameter registry and the layer helpers shared by the models: linear,
// multi-head attention, feed-forward blocks.

#include <string>
#include <vector>

#include "wog/tensor.hpp"

namespace wog {

struct Parameter {
    std::string name;
    Tensor tensor;
    bool frozen() const { return !tensor.requires_grad(); }
};

enum class Init { zeros, ones, normal_fan_in, normal_002, normal_02 };

// Owns a model's named parameters in registration order; the order is the
// serialization order and the checksum order.
class ParamStore {
  public:
    Tensor add(const std::string& name, const Shape& shape, Init init, Rng& rng);

    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }

    int64_t element_count() const;
    uint64_t checksum() const;

    // set requires_grad=false on every parameter; idempotent
    void freeze_all();
    bool all_frozen() const;

    const Parameter& find(const std::string& name) const;

  private:
    std::vector<Parameter> params_;
};

// y = x W + b ; x [..,K] row-major, W [K,N], b [N] (b optional: undefined skips)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

AttentionParams make_attention(ParamStore& store, const std::string& prefix, int dim, Rng& rng);

// q_in [B,Sq,D], kv_in [B,Sk,D]; mask, when defined, is [Sq,Sk] added to the
// pre-softmax scores (use large negatives to block).
Tensor multihead_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                           int heads, const Tensor& mask = Tensor());

struct FfnParams {
    Tensor w1, b1, w2, b2;
};

FfnParams make_ffn(ParamStore& store, const std::string& prefix, int dim, int hidden, Rng& rng);
Tensor ffn_forward(const Tensor& x, const FfnParams& p);

struct LayerNormParams {
    Tensor gain, shift;
};

LayerNormParams make_layer_norm(ParamStore& store, const std::string& prefix, int dim, Rng& rng);
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

// [Sq,Sk] additive causal mask (0 where kv <= q, -1e30 above the diagonal)
Tensor causal_mask(int s);

}  // namespace wog
