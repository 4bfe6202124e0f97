#pragma once

// Deterministic 2-D manipulation world: three tasks (rigid pick-and-place
// with an obstacle, articulated door closing, two-corner alignment), scripted
// experts, a tiny rasterizer, and demo generation with label masking.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wog/common.hpp"

namespace wog {

enum class Task : uint8_t { pick_place = 0, close_door = 1, fold_corners = 2 };
enum class ObjectKind : uint8_t { cup = 0, block = 1, corner_marker = 2 };
enum class SourceTag : uint8_t { robot = 0, human_video = 1, umi = 2 };

const char* task_name(Task t);
Task task_from_name(const std::string& s);
const char* source_tag_name(SourceTag t);
SourceTag source_tag_from_name(const std::string& s);

struct Vec2 {
    double x = 0.0, y = 0.0;
};
double dist(const Vec2& a, const Vec2& b);

struct SceneObject {
    Vec2 pos;
    ObjectKind kind = ObjectKind::cup;
    int color_id = 0;
    bool held = false;
};

struct Obstacle {
    Vec2 pos;
    double radius = 0.0;
};

struct GoalRegion {
    Vec2 pos;
    double radius = 0.0;
};

struct WorldState {
    Vec2 agent_pos;
    double gripper = 0.0;  // 0 open, 1 closed
    std::vector<SceneObject> objects;
    std::vector<Obstacle> obstacles;
    bool has_door = false;
    double door_angle = 0.0;  // present iff task == close_door
    Vec2 door_hinge;
    double door_base_angle = 0.0;
    GoalRegion goal;
    Task task = Task::pick_place;
    int step_count = 0;
};

struct RenderConfig {
    int width = 32;
    int height = 32;
    int background_color_id = 0;
    double brightness = 1.0;
};

// scenario knobs the OOD transforms act on
struct EnvParams {
    RenderConfig render;
    std::vector<int> object_colors = {0, 1, 2, 3};
};

enum class OodKind : uint8_t { background = 0, light = 1, novel_object = 2 };

struct Image {
    int h = 0, w = 0;
    std::vector<double> px;  // h*w*3, row-major, values in [0,1]

    Image() = default;
    Image(int hh, int ww) : h(hh), w(ww), px(static_cast<size_t>(hh) * ww * 3, 0.0) {}
    double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

struct Episode {
    std::vector<int> instruction;  // fixed length kInstructionLen
    std::vector<Image> frames;     // length L+1
    std::vector<std::array<double, 3>> actions;  // length L, entries in [-1,1]
    bool success = false;
    uint64_t seed = 0;
    SourceTag source_tag = SourceTag::robot;
    bool has_action_labels = true;

    int length() const { return static_cast<int>(actions.size()); }
};

// ---------------------------------------------------------------- constants

inline constexpr int kActionDim = 3;
inline constexpr int kInstructionLen = 6;
inline constexpr double kMaxStep = 0.05;       // per-axis position delta scale
inline constexpr double kGripperRate = 0.6;    // gripper delta scale
inline constexpr double kGrabRadius = 0.05;    // grab/release proximity
inline constexpr double kFoldSuccessDist = 0.05;
inline constexpr double kDoorClosedAngle = 0.05;
inline constexpr double kDoorContact = 0.06;
inline constexpr double kDoorPushRate = 0.12;
inline constexpr double kDoorLength = 0.25;
inline constexpr int kMaxEpisodeSteps = 80;

// token vocabulary (fixed)
namespace vocab {
inline constexpr int pad = 0, pick = 1, place = 2, close = 3, fold = 4, the = 5, door = 6,
                     corners = 7, goal = 8, in = 9, cup = 10, block = 11, two = 12,
                     color_base = 13;  // color token = color_base + color_id
inline constexpr int size = 19;       // 6 color slots
}  // namespace vocab

// ---------------------------------------------------------------- operations

WorldState reset(Task task, uint64_t seed, const EnvParams& params);
WorldState step(const WorldState& state, const std::array<double, 3>& action);
Image render(const WorldState& state, const RenderConfig& cfg,
             SourceTag skin = SourceTag::robot);
std::array<double, 3> expert_action(const WorldState& state);
bool success(const WorldState& state);

// scripted-controller progress measure; strictly decreases along expert
// rollouts except on gripper-toggle steps (exposed for tests)
double expert_potential(const WorldState& state);

std::vector<int> instruction_for(Task task, const WorldState& state);

Vec2 door_edge(const WorldState& state);

std::vector<Episode> generate_demos(Task task, int n, uint64_t seed, const EnvParams& params,
                                    SourceTag source_tag = SourceTag::robot,
                                    double label_fraction = 1.0);

EnvParams ood_transform(const EnvParams& params, Task task, OodKind kind);

// ---------------------------------------------------------------- cache io

// versioned binary container ("WOGEP1") + human-readable manifest
void save_episodes(const std::string& path, Task task, uint64_t seed,
                   const std::vector<Episode>& episodes);
std::vector<Episode> load_episodes(const std::string& path, Task* task_out = nullptr,
                                   uint64_t* seed_out = nullptr);
uint64_t file_checksum(const std::string& path);
void append_manifest(const std::string& manifest_path, const std::string& cache_file, Task task,
                     int n, uint64_t seed);

}  // namespace wog
