#include "wog/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace wog {

MixSpec parse_mix(const std::string& text) {
    MixSpec mix;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw ConfigError("mix entry '" + part + "' must look like source:weight");
        const std::string name = part.substr(0, colon);
        const double w = std::stod(part.substr(colon + 1));
        if (w < 0.0) throw ConfigError("mix weight for " + name + " must be nonnegative");
        mix.push_back({source_tag_from_name(name), w});
    }
    return mix;
}

std::string mix_to_string(const MixSpec& mix) {
    std::string out;
    for (size_t i = 0; i < mix.size(); ++i) {
        if (i) out += ",";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s:%.17g", source_tag_name(mix[i].tag), mix[i].weight);
        out += buf;
    }
    return out;
}

MixSpec normalized(const MixSpec& mix) {
    double total = 0.0;
    for (const auto& e : mix) total += e.weight;
    if (mix.empty() || total <= 0.0)
        throw ConfigError("mix must contain at least one source with positive weight");
    MixSpec out = mix;
    for (auto& e : out) e.weight /= total;
    return out;
}

EnvParams RunConfig::env_params() const {
    EnvParams p;
    p.render.width = image_size;
    p.render.height = image_size;
    p.render.background_color_id = background_color_id;
    p.render.brightness = brightness;
    return p;
}

VisionConfig RunConfig::vision_config() const {
    VisionConfig v;
    v.image_size = image_size;
    v.patch = patch;
    v.embed_dim = vision_embed_dim;
    v.future_frames = 4;
    v.setup = encoder_setup_from_name(encoder_setup);
    v.seed = derive_seed(master_seed, 0xF0);
    return v;
}

PolicyConfig RunConfig::policy_config() const {
    PolicyConfig p;
    p.image_size = image_size;
    p.patch = patch;
    p.model_dim = model_dim;
    p.heads = heads;
    p.backbone_blocks = backbone_blocks;
    p.dit_blocks = dit_blocks;
    p.ffn_mult = ffn_mult;
    p.vocab = vocab::size;
    p.instr_len = kInstructionLen;
    p.horizon = horizon;
    p.action_dim = kActionDim;
    p.n_queries = n_queries;
    p.cond_dim = cond_dim;
    p.cond_window = cond_window;
    p.seed = derive_seed(master_seed, 0xF1);
    return p;
}

FutureEncoderConfig RunConfig::future_encoder_config() const {
    FutureEncoderConfig f;
    f.n_queries = n_queries;
    f.cond_dim = cond_dim;
    f.hidden = fe_hidden;
    f.blocks = fe_blocks;
    f.heads = heads;
    f.ffn_mult = ffn_mult;
    f.in_dim = vision_embed_dim;
    f.in_heads = encoder_setup_from_name(encoder_setup) == EncoderSetup::semantic_only ? 1 : 2;
    f.seed = derive_seed(master_seed, 0xF2);
    return f;
}

// ---------------------------------------------------------------- parsing

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("invalid seed for " + key + ": '" + v + "'");
    }
}

const std::map<std::string, Field>& field_table() {
#define WOG_INT_FIELD(name)                                                            \
    {#name, Field{[](RunConfig& c, const std::string& v) { c.name = parse_int(#name, v); }, \
                  [](const RunConfig& c) { return std::to_string(c.name); }}}
#define WOG_DBL_FIELD(name)                                                            \
    {#name, Field{[](RunConfig& c, const std::string& v) { c.name = parse_double(#name, v); }, \
                  [](const RunConfig& c) { return fmt_double(c.name); }}}
#define WOG_STR_FIELD(name)                                           \
    {#name, Field{[](RunConfig& c, const std::string& v) { c.name = v; }, \
                  [](const RunConfig& c) { return c.name; }}}
    static const std::map<std::string, Field> table = {
        WOG_STR_FIELD(task),
        WOG_INT_FIELD(image_size),
        WOG_INT_FIELD(patch),
        WOG_INT_FIELD(background_color_id),
        WOG_DBL_FIELD(brightness),
        WOG_STR_FIELD(encoder_setup),
        WOG_INT_FIELD(vision_embed_dim),
        WOG_INT_FIELD(model_dim),
        WOG_INT_FIELD(heads),
        WOG_INT_FIELD(backbone_blocks),
        WOG_INT_FIELD(dit_blocks),
        WOG_INT_FIELD(fe_blocks),
        WOG_INT_FIELD(fe_hidden),
        WOG_INT_FIELD(ffn_mult),
        WOG_INT_FIELD(n_queries),
        WOG_INT_FIELD(cond_dim),
        WOG_INT_FIELD(cond_window),
        WOG_INT_FIELD(horizon),
        WOG_INT_FIELD(exec_horizon),
        WOG_INT_FIELD(stage1_steps),
        WOG_INT_FIELD(stage2_steps),
        WOG_INT_FIELD(batch_size),
        WOG_DBL_FIELD(lr),
        WOG_DBL_FIELD(align_weight),
        WOG_INT_FIELD(site_stride),
        WOG_INT_FIELD(log_interval),
        WOG_STR_FIELD(mix),
        WOG_INT_FIELD(n_demos),
        WOG_DBL_FIELD(label_fraction),
        WOG_INT_FIELD(n_trials),
        WOG_INT_FIELD(max_steps),
        WOG_INT_FIELD(sampler_steps),
        WOG_INT_FIELD(ablation_seeds),
        {"master_seed",
         Field{[](RunConfig& c, const std::string& v) { c.master_seed = parse_u64("master_seed", v); },
               [](const RunConfig& c) { return std::to_string(c.master_seed); }}},
        WOG_STR_FIELD(out_dir),
    };
#undef WOG_INT_FIELD
#undef WOG_DBL_FIELD
#undef WOG_STR_FIELD
    return table;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = field_table();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key: " + key);
    it->second.set(cfg, value);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, f] : field_table()) out.push_back(k);
        return out;
    }();
    return keys;
}

void validate(const RunConfig& cfg) {
    if (cfg.horizon % 4 != 0) throw ConfigError("horizon must be divisible by 4");
    if (cfg.exec_horizon < 1 || cfg.exec_horizon > cfg.horizon)
        throw ConfigError("exec_horizon must lie in [1, horizon]");
    if (cfg.image_size % cfg.patch != 0) throw ConfigError("patch must divide image_size");
    if (cfg.image_size % 4 != 0) throw ConfigError("image_size must be divisible by 4");
    if (cfg.model_dim % cfg.heads != 0) throw ConfigError("heads must divide model_dim");
    if (cfg.fe_hidden % cfg.heads != 0) throw ConfigError("heads must divide fe_hidden");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.n_demos < 1) throw ConfigError("n_demos must be >= 1");
    if (cfg.label_fraction < 0.0 || cfg.label_fraction > 1.0)
        throw ConfigError("label_fraction must lie in [0,1]");
    if (cfg.site_stride < 1) throw ConfigError("site_stride must be >= 1");
    if (cfg.sampler_steps < 1) throw ConfigError("sampler_steps must be >= 1");
    if (cfg.cond_window < 1) throw ConfigError("cond_window must be >= 1");
    task_from_name(cfg.task);
    encoder_setup_from_name(cfg.encoder_setup);
    normalized(parse_mix(cfg.mix));
}

RunConfig parse_config(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": expected key = value");
            apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    for (const auto& [k, v] : overrides) apply_kv(cfg, k, v);
    validate(cfg);
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : field_table()) {
        out += key;
        out += " = ";
        out += field.get(cfg);
        out += "\n";
    }
    return out;
}

RunConfig config_from_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config echo: expected key = value");
        apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate(cfg);
    return cfg;
}

}  // namespace wog
