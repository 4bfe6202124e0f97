#include "wog/future_encoder.hpp"

namespace wog {

namespace {
uint64_t g_calls = 0;
}

uint64_t future_encoder_call_count() { return g_calls; }
void reset_future_encoder_call_count() { g_calls = 0; }

FutureEncoder::FutureEncoder(const FutureEncoderConfig& cfg) : cfg_(cfg) {
    Rng rng(cfg.seed);
    queries_ = store_.add("queries", {cfg.n_queries, cfg.hidden}, Init::normal_02, rng);
    for (int h = 0; h < cfg.in_heads; ++h) {
        const std::string p = "unify" + std::to_string(h);
        unify_w_.push_back(store_.add(p + ".w", {cfg.in_dim, cfg.hidden}, Init::normal_fan_in, rng));
        unify_b_.push_back(store_.add(p + ".b", {cfg.hidden}, Init::zeros, rng));
    }
    ctx_norm_ = make_layer_norm(store_, "ctx_norm", cfg.hidden, rng);
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        Block blk;
        blk.ln_q = make_layer_norm(store_, p + ".ln_q", cfg.hidden, rng);
        blk.attn = make_attention(store_, p + ".attn", cfg.hidden, rng);
        blk.ln_f = make_layer_norm(store_, p + ".ln_f", cfg.hidden, rng);
        blk.ffn = make_ffn(store_, p + ".ffn", cfg.hidden, cfg.hidden * cfg.ffn_mult, rng);
        blocks_.push_back(std::move(blk));
    }
    out_norm_ = make_layer_norm(store_, "out_norm", cfg.hidden, rng);
    out_w_ = store_.add("out.w", {cfg.hidden, cfg.cond_dim}, Init::normal_fan_in, rng);
    out_b_ = store_.add("out.b", {cfg.cond_dim}, Init::zeros, rng);
}

Tensor FutureEncoder::encode(const std::vector<Tensor>& grids) const {
    if (grids.empty()) throw ShapeError("FutureEncoder: no input grids");
    if (static_cast<int>(grids.size()) > cfg_.in_heads)
        throw ShapeError("FutureEncoder: got " + std::to_string(grids.size()) +
                         " grids but only " + std::to_string(cfg_.in_heads) + " projections");
    ++g_calls;
    const int b = grids[0].dim(0);
    std::vector<Tensor> projected;
    projected.reserve(grids.size());
    for (size_t h = 0; h < grids.size(); ++h) {
        const Tensor& g = grids[h];
        if (g.rank() != 3 || g.dim(2) != cfg_.in_dim)
            throw ShapeError("FutureEncoder: grid " + shape_str(g.shape()) + " expected [B,P," +
                             std::to_string(cfg_.in_dim) + "]");
        projected.push_back(linear(g, unify_w_[h], unify_b_[h]));
    }
    Tensor context = projected.size() == 1 ? projected[0] : concat(projected, 1);
    context = layer_norm(context, ctx_norm_);

    Tensor x = expand_axis(queries_, 0, b);  // [B,Nq,hidden]
    for (const auto& blk : blocks_) {
        x = add(x, multihead_attention(layer_norm(x, blk.ln_q), context, blk.attn, cfg_.heads));
        x = add(x, ffn_forward(layer_norm(x, blk.ln_f), blk.ffn));
    }
    return linear(layer_norm(x, out_norm_), out_w_, out_b_);
}

void FutureEncoder::freeze() {
    store_.freeze_all();
    frozen_ = true;
    frozen_checksum_ = store_.checksum();
}

}  // namespace wog
