#include "wog/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace wog {

const char* stage_name(StageTag s) {
    switch (s) {
        case StageTag::stage1: return "I";
        case StageTag::stage2: return "II";
        case StageTag::finetuned: return "finetune";
    }
    return "?";
}

std::array<double, 3> ActionNormStats::normalize(const std::array<double, 3>& a) const {
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
        const double span = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] =
            span < 1e-12 ? 0.0
                         : 2.0 * (a[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]) / span -
                               1.0;
    }
    return out;
}

std::array<double, 3> ActionNormStats::denormalize(const std::array<double, 3>& a) const {
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
        const double span = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] =
            span < 1e-12 ? lo[static_cast<size_t>(i)]
                         : lo[static_cast<size_t>(i)] + (a[static_cast<size_t>(i)] + 1.0) * span / 2.0;
    }
    return out;
}

ActionNormStats compute_norm_stats(const std::vector<Episode>& episodes) {
    ActionNormStats s;
    bool any = false;
    for (const auto& ep : episodes) {
        if (!ep.has_action_labels) continue;
        for (const auto& a : ep.actions) {
            for (int i = 0; i < 3; ++i) {
                const double v = a[static_cast<size_t>(i)];
                if (!any) {
                    s.lo[static_cast<size_t>(i)] = v;
                    s.hi[static_cast<size_t>(i)] = v;
                } else {
                    s.lo[static_cast<size_t>(i)] = std::min(s.lo[static_cast<size_t>(i)], v);
                    s.hi[static_cast<size_t>(i)] = std::max(s.hi[static_cast<size_t>(i)], v);
                }
            }
            any = true;
        }
    }
    if (!any) throw TrainError("compute_norm_stats: no labeled actions in the dataset");
    return s;
}

ModelBundle build_models(const RunConfig& cfg) {
    ModelBundle b;
    b.config = cfg;
    b.vision = std::make_unique<VisionStack>(cfg.vision_config());
    b.future_encoder = std::make_unique<FutureEncoder>(cfg.future_encoder_config());
    b.backbone = std::make_unique<Backbone>(cfg.policy_config(), derive_seed(cfg.master_seed, 0xF3));
    b.dit = std::make_unique<DiT>(cfg.policy_config(), derive_seed(cfg.master_seed, 0xF4));
    b.cond_head =
        std::make_unique<CondQueryHead>(cfg.policy_config(), derive_seed(cfg.master_seed, 0xF5));
    return b;
}

// ---------------------------------------------------------------- snapshot

namespace {

void snapshot_store(const std::string& prefix, const ParamStore& store,
                    std::vector<Checkpoint::Blob>& out) {
    for (const auto& p : store.params()) {
        Checkpoint::Blob blob;
        blob.name = prefix + "/" + p.name;
        blob.shape = p.tensor.shape();
        blob.frozen = p.frozen();
        blob.data = p.tensor.data();
        out.push_back(std::move(blob));
    }
}

void restore_store(const std::string& prefix, ParamStore& store, const Checkpoint& ckpt,
                   bool* any_missing = nullptr) {
    for (auto& p : store.params()) {
        const std::string want = prefix + "/" + p.name;
        const Checkpoint::Blob* found = nullptr;
        for (const auto& b : ckpt.blobs) {
            if (b.name == want) {
                found = &b;
                break;
            }
        }
        if (!found) {
            if (any_missing) {
                *any_missing = true;
                continue;
            }
            throw SerializationError(SerializationError::Kind::truncated,
                                     "checkpoint: missing parameter " + want);
        }
        if (found->shape != p.tensor.shape())
            throw ShapeError("checkpoint: shape mismatch for " + want + ": " +
                             shape_str(found->shape) + " vs " + shape_str(p.tensor.shape()));
        p.tensor.data() = found->data;
    }
}

}  // namespace

Checkpoint make_checkpoint(StageTag stage, const ModelBundle& bundle) {
    Checkpoint ckpt;
    ckpt.stage = stage;
    ckpt.config = bundle.config;
    ckpt.norm = bundle.norm;
    snapshot_store("backbone", bundle.backbone->params(), ckpt.blobs);
    snapshot_store("dit", bundle.dit->params(), ckpt.blobs);
    snapshot_store("future_encoder", bundle.future_encoder->params(), ckpt.blobs);
    if (stage != StageTag::stage1)
        snapshot_store("cond_head", bundle.cond_head->params(), ckpt.blobs);
    if (stage != StageTag::stage1) {
        if (!bundle.future_encoder->frozen())
            throw TrainError("make_checkpoint: future encoder must be frozen past stage I");
        ckpt.encoder_checksum = bundle.future_encoder->frozen_checksum();
    }
    return ckpt;
}

// ---------------------------------------------------------------- container

namespace {

constexpr char kMagic[8] = {'W', 'O', 'G', 'C', 'K', 'P', 'T', '1'};

struct Writer {
    std::vector<uint8_t> buf;
    void bytes(const void* p, size_t n) {
        const auto* c = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;
    void bytes(void* p, size_t n) {
        if (pos + n > buf.size())
            throw SerializationError(SerializationError::Kind::truncated,
                                     "checkpoint: truncated file");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    std::string str() {
        const uint32_t n = u32();
        if (n > (1u << 24))
            throw SerializationError(SerializationError::Kind::truncated,
                                     "checkpoint: absurd string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(ckpt.version);
    w.u8(static_cast<uint8_t>(ckpt.stage));
    w.str(serialize_config(ckpt.config));
    for (double v : ckpt.norm.lo) w.f64(v);
    for (double v : ckpt.norm.hi) w.f64(v);
    w.u64(ckpt.encoder_checksum);
    w.u32(static_cast<uint32_t>(ckpt.blobs.size()));
    for (const auto& b : ckpt.blobs) {
        w.str(b.name);
        w.u8(b.frozen ? 1 : 0);
        w.u32(static_cast<uint32_t>(b.shape.size()));
        for (int d : b.shape) w.u32(static_cast<uint32_t>(d));
        w.u64(fnv1a64(b.data));
        for (double v : b.data) w.f64(v);
    }
    w.u64(fnv1a64(w.buf.data(), w.buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValueError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(w.buf.data()),
              static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw ValueError("cannot write " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("cannot open checkpoint " + path);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(size));
    in.read(reinterpret_cast<char*>(buf.data()), size);
    if (!in) throw ValueError("cannot read " + path);

    if (buf.size() < sizeof(kMagic) + 13)
        throw SerializationError(SerializationError::Kind::truncated,
                                 "checkpoint: file too small");
    uint64_t file_sum;
    std::memcpy(&file_sum, buf.data() + buf.size() - 8, 8);
    if (file_sum != fnv1a64(buf.data(), buf.size() - 8))
        throw SerializationError(SerializationError::Kind::checksum,
                                 "checkpoint: file checksum mismatch in " + path);

    Reader r{buf};
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw SerializationError(SerializationError::Kind::version,
                                 "checkpoint: bad magic in " + path);
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != 1)
        throw SerializationError(SerializationError::Kind::version,
                                 "checkpoint: unsupported version " +
                                     std::to_string(ckpt.version));
    ckpt.stage = static_cast<StageTag>(r.u8());
    ckpt.config = config_from_text(r.str());
    for (auto& v : ckpt.norm.lo) v = r.f64();
    for (auto& v : ckpt.norm.hi) v = r.f64();
    ckpt.encoder_checksum = r.u64();
    const uint32_t n_blobs = r.u32();
    ckpt.blobs.resize(n_blobs);
    for (auto& b : ckpt.blobs) {
        b.name = r.str();
        b.frozen = r.u8() != 0;
        const uint32_t rank = r.u32();
        b.shape.resize(rank);
        for (auto& d : b.shape) d = static_cast<int>(r.u32());
        const uint64_t want = r.u64();
        b.data.resize(static_cast<size_t>(shape_numel(b.shape)));
        for (auto& v : b.data) v = r.f64();
        if (fnv1a64(b.data) != want)
            throw SerializationError(SerializationError::Kind::checksum,
                                     "checkpoint: blob checksum mismatch for " + b.name);
    }
    return ckpt;
}

ModelBundle restore_models(const Checkpoint& ckpt) {
    ModelBundle bundle = build_models(ckpt.config);
    bundle.norm = ckpt.norm;
    restore_store("backbone", bundle.backbone->params(), ckpt);
    restore_store("dit", bundle.dit->params(), ckpt);
    restore_store("future_encoder", bundle.future_encoder->params(), ckpt);
    if (ckpt.stage != StageTag::stage1) {
        restore_store("cond_head", bundle.cond_head->params(), ckpt);
        bundle.future_encoder->freeze();
        if (bundle.future_encoder->frozen_checksum() != ckpt.encoder_checksum)
            throw SerializationError(
                SerializationError::Kind::checksum,
                "checkpoint: frozen encoder checksum does not match the recorded value");
    }
    return bundle;
}

}  // namespace wog
