#include "wog/policy.hpp"

namespace wog {

// ---------------------------------------------------------------- backbone

Backbone::Backbone(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int d = cfg.model_dim;
    patch_w_ = store_.add("patch.w", {cfg.patch * cfg.patch * 3, d}, Init::normal_fan_in, rng);
    patch_b_ = store_.add("patch.b", {d}, Init::zeros, rng);
    token_table_ = store_.add("tokens", {cfg.vocab, d}, Init::normal_02, rng);
    summary_token_ = store_.add("summary_token", {1, d}, Init::normal_02, rng);
    pos_embed_ = store_.add("pos", {cfg.seq_len(), d}, Init::normal_02, rng);
    for (int b = 0; b < cfg.backbone_blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        Block blk;
        blk.ln_a = make_layer_norm(store_, p + ".ln_a", d, rng);
        blk.attn = make_attention(store_, p + ".attn", d, rng);
        blk.ln_f = make_layer_norm(store_, p + ".ln_f", d, rng);
        blk.ffn = make_ffn(store_, p + ".ffn", d, d * cfg.ffn_mult, rng);
        blocks_.push_back(std::move(blk));
    }
    final_norm_ = make_layer_norm(store_, "final_norm", d, rng);
    mask_ = causal_mask(cfg.seq_len());
}

Backbone::Output Backbone::encode(const Tensor& obs, const std::vector<int>& tokens) const {
    if (obs.rank() != 4 || obs.dim(1) != cfg_.image_size || obs.dim(2) != cfg_.image_size ||
        obs.dim(3) != 3)
        throw ShapeError("Backbone: observation " + shape_str(obs.shape()) + " expected [B," +
                         std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) +
                         ",3]");
    const int b = obs.dim(0);
    if (static_cast<int>(tokens.size()) != b * cfg_.instr_len)
        throw ShapeError("Backbone: expected " + std::to_string(b * cfg_.instr_len) +
                         " instruction tokens, got " + std::to_string(tokens.size()));

    Tensor patches = extract_patches(obs, cfg_.patch);              // [B,P,p*p*3]
    Tensor img_tokens = linear(patches, patch_w_, patch_b_);        // [B,P,D]
    Tensor txt = embed_rows(token_table_, tokens);                  // [B*L,D]
    txt = reshape(txt, {b, cfg_.instr_len, cfg_.model_dim});
    Tensor summary = expand_axis(summary_token_, 0, b);             // [B,1,D]

    Tensor x = concat({img_tokens, txt, summary}, 1);               // [B,S,D]
    x = add(x, expand_axis(pos_embed_, 0, b));
    for (const auto& blk : blocks_) {
        Tensor q = layer_norm(x, blk.ln_a);
        x = add(x, multihead_attention(q, q, blk.attn, cfg_.heads, mask_));
        x = add(x, ffn_forward(layer_norm(x, blk.ln_f), blk.ffn));
    }
    Tensor h = layer_norm(x, final_norm_);
    Tensor z = slice(h, 1, cfg_.seq_len() - 1, 1);
    return {z, h};
}

// ---------------------------------------------------------------- DiT head

DiT::DiT(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int d = cfg.model_dim;
    action_in_w_ = store_.add("action_in.w", {cfg.action_dim, d}, Init::normal_fan_in, rng);
    action_in_b_ = store_.add("action_in.b", {d}, Init::zeros, rng);
    pos_embed_ = store_.add("pos", {cfg.horizon, d}, Init::normal_02, rng);
    time_w1_ = store_.add("time.w1", {d, d}, Init::normal_fan_in, rng);
    time_b1_ = store_.add("time.b1", {d}, Init::zeros, rng);
    time_w2_ = store_.add("time.w2", {d, d}, Init::normal_fan_in, rng);
    time_b2_ = store_.add("time.b2", {d}, Init::zeros, rng);
    cond_in_w_ = store_.add("cond_in.w", {cfg.cond_dim, d}, Init::normal_fan_in, rng);
    cond_in_b_ = store_.add("cond_in.b", {d}, Init::zeros, rng);
    for (int b = 0; b < cfg.dit_blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        Block blk;
        // zero-init modulation: blocks start as identity, gates learn to open
        blk.mod_w = store_.add(p + ".mod.w", {d, 6 * d}, Init::zeros, rng);
        blk.mod_b = store_.add(p + ".mod.b", {6 * d}, Init::zeros, rng);
        blk.ln_a = make_layer_norm(store_, p + ".ln_a", d, rng);
        blk.self_attn = make_attention(store_, p + ".self_attn", d, rng);
        blk.ln_x = make_layer_norm(store_, p + ".ln_x", d, rng);
        blk.cross_attn = make_attention(store_, p + ".cross_attn", d, rng);
        blk.ln_f = make_layer_norm(store_, p + ".ln_f", d, rng);
        blk.ffn = make_ffn(store_, p + ".ffn", d, d * cfg.ffn_mult, rng);
        blocks_.push_back(std::move(blk));
    }
    final_norm_ = make_layer_norm(store_, "final_norm", d, rng);
    out_w_ = store_.add("out.w", {d, cfg.action_dim}, Init::normal_fan_in, rng);
    out_b_ = store_.add("out.b", {cfg.action_dim}, Init::zeros, rng);
}

namespace {

// x [B,T,D] modulated per batch element: x * (1 + scale) + shift
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale, int t) {
    Tensor sc = expand_axis(scale, 1, t);
    Tensor sh = expand_axis(shift, 1, t);
    return add(mul(x, add_scalar(sc, 1.0)), sh);
}

}  // namespace

Tensor DiT::velocity(const Tensor& a_tau, const Tensor& taus, const Tensor& z,
                     const std::optional<Tensor>& cond) const {
    if (a_tau.rank() != 3 || a_tau.dim(1) != cfg_.horizon || a_tau.dim(2) != cfg_.action_dim)
        throw ShapeError("DiT: action chunk " + shape_str(a_tau.shape()) + " expected [B," +
                         std::to_string(cfg_.horizon) + "," + std::to_string(cfg_.action_dim) +
                         "]");
    const int b = a_tau.dim(0);
    if (taus.rank() != 1 || taus.dim(0) != b)
        throw ShapeError("DiT: taus " + shape_str(taus.shape()) + " expected [" +
                         std::to_string(b) + "]");
    for (double t : taus.data()) {
        if (!(t >= 0.0 && t <= 1.0))
            throw ValueError("DiT: tau " + std::to_string(t) + " outside [0,1]");
    }

    Tensor temb = sinusoidal_embedding(taus, cfg_.model_dim);
    temb = linear(silu(linear(temb, time_w1_, time_b1_)), time_w2_, time_b2_);  // [B,D]

    Tensor context = z;  // [B,1,D]
    if (cond.has_value()) {
        Tensor c = linear(*cond, cond_in_w_, cond_in_b_);  // [B,Nq,D]
        context = concat({z, c}, 1);
    }

    Tensor x = add(linear(a_tau, action_in_w_, action_in_b_),
                   expand_axis(pos_embed_, 0, b));  // [B,T,D]
    const int d = cfg_.model_dim;
    for (const auto& blk : blocks_) {
        Tensor mod = linear(temb, blk.mod_w, blk.mod_b);  // [B,6D]
        Tensor shift_a = slice(mod, 1, 0, d);
        Tensor scale_a = slice(mod, 1, d, d);
        Tensor gate_a = slice(mod, 1, 2 * d, d);
        Tensor shift_f = slice(mod, 1, 3 * d, d);
        Tensor scale_f = slice(mod, 1, 4 * d, d);
        Tensor gate_f = slice(mod, 1, 5 * d, d);

        Tensor qa = modulate(layer_norm(x, blk.ln_a), shift_a, scale_a, cfg_.horizon);
        Tensor attn_out = multihead_attention(qa, qa, blk.self_attn, cfg_.heads);
        x = add(x, mul(attn_out, expand_axis(gate_a, 1, cfg_.horizon)));

        x = add(x, multihead_attention(layer_norm(x, blk.ln_x), context, blk.cross_attn,
                                       cfg_.heads));

        Tensor qf = modulate(layer_norm(x, blk.ln_f), shift_f, scale_f, cfg_.horizon);
        Tensor ffn_out = ffn_forward(qf, blk.ffn);
        x = add(x, mul(ffn_out, expand_axis(gate_f, 1, cfg_.horizon)));
    }
    return linear(layer_norm(x, final_norm_), out_w_, out_b_);
}

Tensor DiT::sample(const Tensor& z, const std::optional<Tensor>& cond, int n_steps,
                   uint64_t noise_seed) const {
    if (n_steps < 1) throw ValueError("DiT::sample: n_steps must be >= 1");
    const int b = z.dim(0);
    Rng rng(noise_seed);
    Tensor a = Tensor::randn({b, cfg_.horizon, cfg_.action_dim}, rng);

    NoGradGuard ng;
    const double dt = 1.0 / n_steps;
    for (int k = 0; k < n_steps; ++k) {
        Tensor taus = Tensor::full({b}, static_cast<double>(k) / n_steps);
        Tensor v = velocity(a, taus, z, cond);
        a = add(a, scale(v, dt));
    }
    return a;
}

// ---------------------------------------------------------------- query head

CondQueryHead::CondQueryHead(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int d = cfg.model_dim;
    queries_ = store_.add("queries", {cfg.n_queries, d}, Init::normal_02, rng);
    ln_q_ = make_layer_norm(store_, "ln_q", d, rng);
    attn_ = make_attention(store_, "attn", d, rng);
    ln_f_ = make_layer_norm(store_, "ln_f", d, rng);
    ffn_ = make_ffn(store_, "ffn", d, d * cfg.ffn_mult, rng);
    out_norm_ = make_layer_norm(store_, "out_norm", d, rng);
    out_w_ = store_.add("out.w", {d, cfg.cond_dim}, Init::normal_fan_in, rng);
    out_b_ = store_.add("out.b", {cfg.cond_dim}, Init::zeros, rng);
}

Tensor CondQueryHead::predict(const Tensor& h) const {
    if (h.rank() != 3) throw ShapeError("CondQueryHead: expected [B,S,D]");
    const int s = h.dim(1);
    if (s < cfg_.cond_window)
        throw ShapeError("CondQueryHead: sequence length " + std::to_string(s) + " shorter than " +
                         std::to_string(cfg_.cond_window));
    const int b = h.dim(0);
    Tensor window = slice(h, 1, s - cfg_.cond_window, cfg_.cond_window);
    Tensor x = expand_axis(queries_, 0, b);
    x = add(x, multihead_attention(layer_norm(x, ln_q_), window, attn_, cfg_.heads));
    x = add(x, ffn_forward(layer_norm(x, ln_f_), ffn_));
    return linear(layer_norm(x, out_norm_), out_w_, out_b_);
}

}  // namespace wog
