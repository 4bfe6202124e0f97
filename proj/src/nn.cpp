#include "wog/nn.hpp"

#include <cmath>

namespace wog {

Tensor ParamStore::add(const std::string& name, const Shape& shape, Init init, Rng& rng) {
    for (const auto& p : params_) {
        if (p.name == name) throw ValueError("ParamStore: duplicate parameter " + name);
    }
    Tensor t = Tensor::zeros(shape, /*requires_grad=*/true);
    switch (init) {
        case Init::zeros:
            break;
        case Init::ones:
            std::fill(t.data().begin(), t.data().end(), 1.0);
            break;
        case Init::normal_fan_in: {
            // fan-in is the second-to-last extent for matrices, else the last
            int fan = shape.size() >= 2 ? shape[shape.size() - 2] : shape.back();
            double stdev = 1.0 / std::sqrt(static_cast<double>(fan));
            for (auto& v : t.data()) v = rng.normal() * stdev;
            break;
        }
        case Init::normal_002:
            for (auto& v : t.data()) v = rng.normal() * 0.02;
            break;
        case Init::normal_02:
            for (auto& v : t.data()) v = rng.normal() * 0.2;
            break;
    }
    params_.push_back(Parameter{name, t});
    return t;
}

int64_t ParamStore::element_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

uint64_t ParamStore::checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params_) {
        h = fnv1a64(p.name.data(), p.name.size(), h);
        h = fnv1a64(p.tensor.data(), h);
    }
    return h;
}

void ParamStore::freeze_all() {
    for (auto& p : params_) p.tensor.set_requires_grad(false);
}

bool ParamStore::all_frozen() const {
    for (const auto& p : params_)
        if (!p.frozen()) return false;
    return true;
}

const Parameter& ParamStore::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw ValueError("ParamStore: no parameter named " + name);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y = matmul(x, w);
    if (b.defined()) y = add_bias(y, b);
    return y;
}

AttentionParams make_attention(ParamStore& store, const std::string& prefix, int dim, Rng& rng) {
    AttentionParams p;
    p.wq = store.add(prefix + ".wq", {dim, dim}, Init::normal_fan_in, rng);
    p.bq = store.add(prefix + ".bq", {dim}, Init::zeros, rng);
    p.wk = store.add(prefix + ".wk", {dim, dim}, Init::normal_fan_in, rng);
    p.bk = store.add(prefix + ".bk", {dim}, Init::zeros, rng);
    p.wv = store.add(prefix + ".wv", {dim, dim}, Init::normal_fan_in, rng);
    p.bv = store.add(prefix + ".bv", {dim}, Init::zeros, rng);
    p.wo = store.add(prefix + ".wo", {dim, dim}, Init::normal_fan_in, rng);
    p.bo = store.add(prefix + ".bo", {dim}, Init::zeros, rng);
    return p;
}

static Tensor split_heads(const Tensor& x, int heads) {
    // [B,S,D] -> [B*H, S, D/H]
    const int b = x.dim(0), s = x.dim(1), d = x.dim(2);
    const int hd = d / heads;
    Tensor t = reshape(x, {b, s, heads, hd});
    t = transpose(t, 1, 2);
    return reshape(t, {b * heads, s, hd});
}

static Tensor merge_heads(const Tensor& x, int b, int heads) {
    // [B*H, S, hd] -> [B, S, D]
    const int s = x.dim(1), hd = x.dim(2);
    Tensor t = reshape(x, {b, heads, s, hd});
    t = transpose(t, 1, 2);
    return reshape(t, {b, s, heads * hd});
}

Tensor multihead_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                           int heads, const Tensor& mask) {
    if (q_in.rank() != 3 || kv_in.rank() != 3)
        throw ShapeError("attention: expected [B,S,D] inputs, got " + shape_str(q_in.shape()) +
                         " / " + shape_str(kv_in.shape()));
    if (q_in.dim(0) != kv_in.dim(0))
        throw ShapeError("attention: batch mismatch " + shape_str(q_in.shape()) + " vs " +
                         shape_str(kv_in.shape()));
    const int b = q_in.dim(0), sq = q_in.dim(1), d = q_in.dim(2);
    const int sk = kv_in.dim(1);
    if (d % heads != 0) throw ShapeError("attention: dim not divisible by heads");
    const int hd = d / heads;

    Tensor q = split_heads(linear(q_in, p.wq, p.bq), heads);
    Tensor k = split_heads(linear(kv_in, p.wk, p.bk), heads);
    Tensor v = split_heads(linear(kv_in, p.wv, p.bv), heads);

    Tensor scores = matmul(q, transpose(k, 1, 2));
    scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(hd)));
    if (mask.defined()) {
        if (mask.rank() != 2 || mask.dim(0) != sq || mask.dim(1) != sk)
            throw ShapeError("attention: mask " + shape_str(mask.shape()) + " vs scores [" +
                             std::to_string(sq) + "," + std::to_string(sk) + "]");
        scores = add(scores, expand_axis(mask, 0, b * heads));
    }
    Tensor attn = softmax_lastdim(scores);
    Tensor out = matmul(attn, v);
    out = merge_heads(out, b, heads);
    return linear(out, p.wo, p.bo);
}

FfnParams make_ffn(ParamStore& store, const std::string& prefix, int dim, int hidden, Rng& rng) {
    FfnParams p;
    p.w1 = store.add(prefix + ".w1", {dim, hidden}, Init::normal_fan_in, rng);
    p.b1 = store.add(prefix + ".b1", {hidden}, Init::zeros, rng);
    p.w2 = store.add(prefix + ".w2", {hidden, dim}, Init::normal_fan_in, rng);
    p.b2 = store.add(prefix + ".b2", {dim}, Init::zeros, rng);
    return p;
}

Tensor ffn_forward(const Tensor& x, const FfnParams& p) {
    return linear(silu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

LayerNormParams make_layer_norm(ParamStore& store, const std::string& prefix, int dim, Rng& rng) {
    LayerNormParams p;
    p.gain = store.add(prefix + ".gain", {dim}, Init::ones, rng);
    p.shift = store.add(prefix + ".shift", {dim}, Init::zeros, rng);
    return p;
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
    return layer_norm_lastdim(x, p.gain, p.shift);
}

Tensor causal_mask(int s) {
    Tensor m = Tensor::zeros({s, s});
    for (int i = 0; i < s; ++i)
        for (int j = i + 1; j < s; ++j) m.data()[static_cast<size_t>(i) * s + j] = -1e30;
    return m;
}

}  // namespace wog
