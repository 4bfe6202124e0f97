#include <cstdio>
#include <cstring>
#include <fstream>

#include "wog/world.hpp"

// Episode cache container. Layout (little-endian):
//   magic "WOGEP1", u16 version, u8 task, u8 source_tag, u64 seed, u32 count,
//   u16 h, u16 w, u16 channels, u16 a_dim, u16 instr_len,
//   per episode: u64 seed, u8 success, u8 has_labels, u32 length,
//                u16 instruction[instr_len],
//                f32 frames[(L+1)*h*w*3], f64 actions[L*a_dim]
//   u64 fnv1a of all preceding bytes

namespace wog {

namespace {

constexpr char kMagic[6] = {'W', 'O', 'G', 'E', 'P', '1'};
constexpr uint16_t kVersion = 1;

struct Writer {
    std::vector<uint8_t> buf;

    void bytes(const void* p, size_t n) {
        const auto* c = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u16(uint16_t v) { bytes(&v, 2); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
};

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void bytes(void* p, size_t n) {
        if (pos + n > buf.size())
            throw SerializationError(SerializationError::Kind::truncated,
                                     "episode cache: truncated file");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
    uint16_t u16() { uint16_t v; bytes(&v, 2); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
    float f32() { float v; bytes(&v, 4); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
};

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(size));
    in.read(reinterpret_cast<char*>(buf.data()), size);
    if (!in) throw ValueError("cannot read " + path);
    return buf;
}

}  // namespace

void save_episodes(const std::string& path, Task task, uint64_t seed,
                   const std::vector<Episode>& episodes) {
    if (episodes.empty()) throw ValueError("save_episodes: empty set");
    const Image& f0 = episodes[0].frames[0];

    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u16(kVersion);
    w.u8(static_cast<uint8_t>(task));
    w.u8(static_cast<uint8_t>(episodes[0].source_tag));
    w.u64(seed);
    w.u32(static_cast<uint32_t>(episodes.size()));
    w.u16(static_cast<uint16_t>(f0.h));
    w.u16(static_cast<uint16_t>(f0.w));
    w.u16(3);
    w.u16(kActionDim);
    w.u16(kInstructionLen);

    for (const auto& ep : episodes) {
        w.u64(ep.seed);
        w.u8(ep.success ? 1 : 0);
        w.u8(ep.has_action_labels ? 1 : 0);
        w.u32(static_cast<uint32_t>(ep.actions.size()));
        for (int tok : ep.instruction) w.u16(static_cast<uint16_t>(tok));
        for (const auto& frame : ep.frames)
            for (double v : frame.px) w.f32(static_cast<float>(v));
        for (const auto& a : ep.actions)
            for (double v : a) w.f64(v);
    }
    w.u64(fnv1a64(w.buf.data(), w.buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValueError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(w.buf.data()),
              static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw ValueError("cannot write " + path);
}

std::vector<Episode> load_episodes(const std::string& path, Task* task_out, uint64_t* seed_out) {
    const auto buf = read_file(path);
    if (buf.size() < sizeof(kMagic) + 10)
        throw SerializationError(SerializationError::Kind::truncated,
                                 "episode cache: file too small");
    const uint64_t want = fnv1a64(buf.data(), buf.size() - 8);
    uint64_t got;
    std::memcpy(&got, buf.data() + buf.size() - 8, 8);
    if (want != got)
        throw SerializationError(SerializationError::Kind::checksum,
                                 "episode cache: checksum mismatch in " + path);

    Reader r{buf};
    char magic[6];
    r.bytes(magic, 6);
    if (std::memcmp(magic, kMagic, 6) != 0)
        throw SerializationError(SerializationError::Kind::version,
                                 "episode cache: bad magic in " + path);
    if (r.u16() != kVersion)
        throw SerializationError(SerializationError::Kind::version,
                                 "episode cache: unsupported version in " + path);

    const Task task = static_cast<Task>(r.u8());
    const SourceTag tag = static_cast<SourceTag>(r.u8());
    const uint64_t seed = r.u64();
    const uint32_t count = r.u32();
    const int h = r.u16(), w_ = r.u16();
    const int channels = r.u16(), a_dim = r.u16(), instr_len = r.u16();
    if (channels != 3 || a_dim != kActionDim || instr_len != kInstructionLen)
        throw SerializationError(SerializationError::Kind::version,
                                 "episode cache: unexpected dims in " + path);

    std::vector<Episode> episodes(count);
    for (auto& ep : episodes) {
        ep.source_tag = tag;
        ep.seed = r.u64();
        ep.success = r.u8() != 0;
        ep.has_action_labels = r.u8() != 0;
        const uint32_t len = r.u32();
        ep.instruction.resize(kInstructionLen);
        for (auto& tok : ep.instruction) tok = r.u16();
        ep.frames.assign(len + 1, Image(h, w_));
        for (auto& frame : ep.frames)
            for (auto& v : frame.px) v = static_cast<double>(r.f32());
        ep.actions.resize(len);
        for (auto& a : ep.actions)
            for (auto& v : a) v = r.f64();
    }
    if (task_out) *task_out = task;
    if (seed_out) *seed_out = seed;
    return episodes;
}

uint64_t file_checksum(const std::string& path) {
    const auto buf = read_file(path);
    return fnv1a64(buf.data(), buf.size());
}

void append_manifest(const std::string& manifest_path, const std::string& cache_file, Task task,
                     int n, uint64_t seed) {
    std::ofstream out(manifest_path, std::ios::app);
    if (!out) throw ValueError("cannot open " + manifest_path);
    out << cache_file << " task=" << task_name(task) << " n=" << n << " seed=" << seed
        << " fnv64=" << hex64(file_checksum(cache_file)) << "\n";
}

}  // namespace wog
