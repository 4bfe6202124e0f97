#include "wog/vision.hpp"

namespace wog {

const char* encoder_setup_name(EncoderSetup s) {
    switch (s) {
        case EncoderSetup::semantic_only: return "sem";
        case EncoderSetup::semantic_contrastive: return "sem+contrastive";
        case EncoderSetup::semantic_dynamic: return "sem+dyn";
    }
    return "?";
}

EncoderSetup encoder_setup_from_name(const std::string& s) {
    if (s == "sem") return EncoderSetup::semantic_only;
    if (s == "sem+contrastive") return EncoderSetup::semantic_contrastive;
    if (s == "sem+dyn") return EncoderSetup::semantic_dynamic;
    throw ConfigError("unknown encoder setup: " + s);
}

namespace {
VisionCallCounters g_counters;
}

VisionCallCounters vision_call_counters() { return g_counters; }
void reset_vision_call_counters() { g_counters = {}; }

FutureFrameSample sample_future_frames(const Episode& episode, int t, int horizon) {
    if (horizon % 4 != 0) throw ValueError("sample_future_frames: horizon must be divisible by 4");
    const int last = static_cast<int>(episode.frames.size()) - 1;
    if (t < 0 || t > last)
        throw ValueError("sample_future_frames: t=" + std::to_string(t) +
                         " outside episode with last frame " + std::to_string(last));
    FutureFrameSample out;
    const int k = horizon / 4;
    for (int i = 1; i <= 4; ++i) {
        const int off = i * k;
        out.offsets.push_back(off);
        out.frames.push_back(episode.frames[static_cast<size_t>(std::min(t + off, last))]);
    }
    return out;
}

// ---------------------------------------------------------------- semantic

SemanticEncoder::SemanticEncoder(const VisionConfig& cfg, uint64_t seed) : cfg_(cfg) {
    const int grid = cfg.image_size / cfg.patch;
    tokens_ = grid * grid;
    const int in_dim = cfg.patch * cfg.patch * 3;
    Rng rng(seed);
    w_proj_ = store_.add("proj.w", {in_dim, cfg.embed_dim}, Init::normal_fan_in, rng);
    b_proj_ = store_.add("proj.b", {cfg.embed_dim}, Init::normal_002, rng);
    w_mix_ = store_.add("mix.w", {cfg.embed_dim, cfg.embed_dim}, Init::normal_fan_in, rng);
    b_mix_ = store_.add("mix.b", {cfg.embed_dim}, Init::normal_002, rng);
    store_.freeze_all();
}

Tensor SemanticEncoder::encode(const Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != cfg_.image_size ||
        images.dim(2) != cfg_.image_size || images.dim(3) != 3)
        throw ShapeError("SemanticEncoder: expected [B," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + ",3], got " + shape_str(images.shape()));
    ++g_counters.semantic;
    Tensor patches = extract_patches(images, cfg_.patch);
    Tensor tokens = linear(patches, w_proj_, b_proj_);
    return linear(silu(tokens), w_mix_, b_mix_);
}

// ---------------------------------------------------------------- dynamic

DynamicEncoder::DynamicEncoder(const VisionConfig& cfg, uint64_t seed) : cfg_(cfg) {
    const int grid = cfg.image_size / cfg.dyn_downsample;
    tokens_ = grid * grid;
    const int in_dim = (cfg.future_frames + 1) * 3;
    Rng rng(seed);
    w1_ = store_.add("proj.w", {in_dim, cfg.embed_dim}, Init::normal_fan_in, rng);
    b1_ = store_.add("proj.b", {cfg.embed_dim}, Init::normal_002, rng);
    w2_ = store_.add("mix.w", {cfg.embed_dim, cfg.embed_dim}, Init::normal_fan_in, rng);
    b2_ = store_.add("mix.b", {cfg.embed_dim}, Init::normal_002, rng);
    store_.freeze_all();
}

Tensor DynamicEncoder::encode(const Tensor& current, const std::vector<Tensor>& futures) const {
    if (static_cast<int>(futures.size()) != cfg_.future_frames)
        throw ShapeError("DynamicEncoder: expected " + std::to_string(cfg_.future_frames) +
                         " future frames, got " + std::to_string(futures.size()));
    ++g_counters.dynamic;
    std::vector<Tensor> stack;
    stack.push_back(current);
    for (const auto& f : futures) stack.push_back(f);
    Tensor volume = concat(stack, 3);  // [B,H,W,(K+1)*3]
    Tensor pooled = avg_pool_hw(volume, cfg_.dyn_downsample);
    const int b = pooled.dim(0);
    Tensor cells = reshape(pooled, {b, tokens_, (cfg_.future_frames + 1) * 3});
    Tensor tokens = linear(cells, w1_, b1_);
    return linear(silu(tokens), w2_, b2_);
}

// ---------------------------------------------------------------- stack

VisionStack::VisionStack(const VisionConfig& cfg) : cfg_(cfg) {
    semantic_ = std::make_unique<SemanticEncoder>(cfg, derive_seed(cfg.seed, 1));
    if (cfg.setup == EncoderSetup::semantic_contrastive)
        contrastive_ = std::make_unique<SemanticEncoder>(cfg, derive_seed(cfg.seed, 2));
    if (cfg.setup == EncoderSetup::semantic_dynamic)
        dynamic_ = std::make_unique<DynamicEncoder>(cfg, derive_seed(cfg.seed, 3));
}

std::vector<Tensor> VisionStack::encode_future(const Tensor& current,
                                               const std::vector<Tensor>& futures) const {
    std::vector<Tensor> grids;
    std::vector<Tensor> per_frame;
    per_frame.reserve(futures.size());
    for (const auto& f : futures) per_frame.push_back(semantic_->encode(f));
    grids.push_back(concat(per_frame, 1));
    if (contrastive_) {
        std::vector<Tensor> alt;
        alt.reserve(futures.size());
        for (const auto& f : futures) alt.push_back(contrastive_->encode(f));
        grids.push_back(concat(alt, 1));
    }
    if (dynamic_) grids.push_back(dynamic_->encode(current, futures));
    return grids;
}

int VisionStack::head_count() const { return 1 + (contrastive_ || dynamic_ ? 1 : 0); }

int VisionStack::total_tokens() const {
    int total = semantic_->tokens_per_image() * cfg_.future_frames;
    if (contrastive_) total += semantic_->tokens_per_image() * cfg_.future_frames;
    if (dynamic_) total += dynamic_->tokens();
    return total;
}

uint64_t VisionStack::checksum() const {
    uint64_t h = semantic_->checksum();
    if (contrastive_) h = splitmix64(h ^ contrastive_->checksum());
    if (dynamic_) h = splitmix64(h ^ dynamic_->checksum());
    return h;
}

// ---------------------------------------------------------------- adapters

Tensor image_to_tensor(const Image& img) {
    return Tensor::from_data({1, img.h, img.w, 3}, img.px);
}

Tensor images_to_tensor(const std::vector<const Image*>& imgs) {
    if (imgs.empty()) throw ValueError("images_to_tensor: empty batch");
    const int h = imgs[0]->h, w = imgs[0]->w;
    std::vector<double> data;
    data.reserve(imgs.size() * imgs[0]->px.size());
    for (const Image* img : imgs) {
        if (img->h != h || img->w != w) throw ShapeError("images_to_tensor: mixed sizes");
        data.insert(data.end(), img->px.begin(), img->px.end());
    }
    return Tensor::from_data({static_cast<int>(imgs.size()), h, w, 3}, std::move(data));
}

}  // namespace wog
