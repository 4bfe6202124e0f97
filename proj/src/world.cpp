#include "wog/world.hpp"

#include <algorithm>
#include <cmath>

namespace wog {

const char* task_name(Task t) {
    switch (t) {
        case Task::pick_place: return "pick_place";
        case Task::close_door: return "close_door";
        case Task::fold_corners: return "fold_corners";
    }
    return "?";
}

Task task_from_name(const std::string& s) {
    if (s == "pick_place") return Task::pick_place;
    if (s == "close_door") return Task::close_door;
    if (s == "fold_corners") return Task::fold_corners;
    throw ConfigError("unknown task: " + s);
}

const char* source_tag_name(SourceTag t) {
    switch (t) {
        case SourceTag::robot: return "robot";
        case SourceTag::human_video: return "human_video";
        case SourceTag::umi: return "umi";
    }
    return "?";
}

SourceTag source_tag_from_name(const std::string& s) {
    if (s == "robot") return SourceTag::robot;
    if (s == "human_video") return SourceTag::human_video;
    if (s == "umi") return SourceTag::umi;
    throw ConfigError("unknown source tag: " + s);
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

static Vec2 clamp01(Vec2 v) {
    return {std::clamp(v.x, 0.0, 1.0), std::clamp(v.y, 0.0, 1.0)};
}

Vec2 door_edge(const WorldState& s) {
    const double a = s.door_base_angle + s.door_angle;
    return {s.door_hinge.x + kDoorLength * std::cos(a),
            s.door_hinge.y + kDoorLength * std::sin(a)};
}

// ---------------------------------------------------------------- palettes

namespace {

struct Rgb {
    double r, g, b;
};

constexpr Rgb kObjectPalette[6] = {
    {0.85, 0.20, 0.20},  // 0 red
    {0.20, 0.80, 0.25},  // 1 green
    {0.25, 0.35, 0.90},  // 2 blue
    {0.90, 0.85, 0.20},  // 3 yellow
    {0.65, 0.25, 0.80},  // 4 purple (held out for novel-object evals)
    {0.95, 0.55, 0.15},  // 5 orange (held out)
};

constexpr Rgb kBackgroundPalette[4] = {
    {0.12, 0.12, 0.14},  // 0 default
    {0.16, 0.12, 0.10},
    {0.10, 0.14, 0.12},
    {0.20, 0.16, 0.22},  // 3 held out for background shift evals
};

constexpr int kOodBackgroundId = 3;
constexpr double kOodBrightness = 1.35;

constexpr double kObjectRadius = 0.055;
constexpr double kMarkerRadius = 0.045;
constexpr double kGoalRadius = 0.10;
constexpr double kObstacleRadius = 0.09;

}  // namespace

// ---------------------------------------------------------------- reset

namespace {

Vec2 random_pos(Rng& rng, double margin) {
    return {rng.uniform(margin, 1.0 - margin), rng.uniform(margin, 1.0 - margin)};
}

}  // namespace

WorldState reset(Task task, uint64_t seed, const EnvParams& params) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(task) + 101));
    WorldState s;
    s.task = task;
    s.gripper = 0.0;
    s.step_count = 0;

    const double margin = 0.12;
    switch (task) {
        case Task::pick_place: {
            SceneObject obj;
            obj.kind = rng.uniform01() < 0.5 ? ObjectKind::cup : ObjectKind::block;
            obj.color_id = params.object_colors[static_cast<size_t>(
                rng.index(static_cast<int>(params.object_colors.size())))];
            Vec2 goal_pos;
            for (int tries = 0;; ++tries) {
                obj.pos = random_pos(rng, margin);
                goal_pos = random_pos(rng, margin);
                if (dist(obj.pos, goal_pos) > 0.5) break;
                if (tries > 1000) throw ValueError("reset: placement failed");
            }
            s.objects.push_back(obj);
            s.goal = {goal_pos, kGoalRadius};

            // obstacle on the object->goal segment so detours matter; the
            // parameter range keeps it clear of both endpoints by construction
            Obstacle ob;
            ob.radius = kObstacleRadius;
            Vec2 dir{goal_pos.x - obj.pos.x, goal_pos.y - obj.pos.y};
            const double len = std::hypot(dir.x, dir.y);
            Vec2 perp{-dir.y / len, dir.x / len};
            const double along = rng.uniform(0.35, 0.58);
            const double side = rng.uniform(-0.05, 0.05);
            ob.pos = {obj.pos.x + dir.x * along + perp.x * side,
                      obj.pos.y + dir.y * along + perp.y * side};
            s.obstacles.push_back(ob);

            for (int tries = 0;; ++tries) {
                s.agent_pos = random_pos(rng, margin);
                const bool ok = dist(s.agent_pos, ob.pos) > ob.radius + 0.06 &&
                                dist(s.agent_pos, obj.pos) > 0.1;
                if (ok) break;
                if (tries > 1000) throw ValueError("reset: agent placement failed");
            }
            break;
        }
        case Task::close_door: {
            s.has_door = true;
            s.door_hinge = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
            s.door_base_angle = rng.uniform(0.0, 6.283185307179586);
            s.door_angle = rng.uniform(0.6, 1.5707963267948966);
            for (int tries = 0;; ++tries) {
                s.agent_pos = random_pos(rng, margin);
                if (dist(s.agent_pos, door_edge(s)) > 0.15) break;
                if (tries > 1000) throw ValueError("reset: agent placement failed");
            }
            break;
        }
        case Task::fold_corners: {
            SceneObject a, b;
            a.kind = b.kind = ObjectKind::corner_marker;
            const int ci = rng.index(static_cast<int>(params.object_colors.size()));
            const int cj = (ci + 1) % static_cast<int>(params.object_colors.size());
            a.color_id = params.object_colors[static_cast<size_t>(ci)];
            b.color_id = params.object_colors[static_cast<size_t>(cj)];
            for (int tries = 0;; ++tries) {
                a.pos = random_pos(rng, margin);
                b.pos = random_pos(rng, margin);
                const double d = dist(a.pos, b.pos);
                if (d > 0.3 && d < 0.6) break;
                if (tries > 1000) throw ValueError("reset: marker placement failed");
            }
            s.objects.push_back(a);
            s.objects.push_back(b);
            for (int tries = 0;; ++tries) {
                s.agent_pos = random_pos(rng, margin);
                if (dist(s.agent_pos, a.pos) > 0.1) break;
                if (tries > 1000) throw ValueError("reset: agent placement failed");
            }
            break;
        }
    }
    return s;
}

// ---------------------------------------------------------------- dynamics

WorldState step(const WorldState& state, const std::array<double, 3>& action) {
    for (double a : action) {
        if (!std::isfinite(a)) throw ValueError("step: non-finite action component");
    }
    const double ax = std::clamp(action[0], -1.0, 1.0);
    const double ay = std::clamp(action[1], -1.0, 1.0);
    const double ag = std::clamp(action[2], -1.0, 1.0);

    WorldState s = state;
    Vec2 pos = clamp01({state.agent_pos.x + kMaxStep * ax, state.agent_pos.y + kMaxStep * ay});

    // push the agent out of obstacle interiors
    for (const auto& ob : s.obstacles) {
        const double d = dist(pos, ob.pos);
        if (d < ob.radius) {
            if (d < 1e-12) {
                pos = clamp01({ob.pos.x + ob.radius, ob.pos.y});
            } else {
                pos = clamp01({ob.pos.x + (pos.x - ob.pos.x) / d * ob.radius,
                               ob.pos.y + (pos.y - ob.pos.y) / d * ob.radius});
            }
        }
    }
    s.agent_pos = pos;

    const double g_old = state.gripper;
    const double g_new = std::clamp(g_old + kGripperRate * ag, 0.0, 1.0);
    s.gripper = g_new;
    const bool crossed_up = g_old < 0.5 && g_new >= 0.5;
    const bool crossed_down = g_old >= 0.5 && g_new < 0.5;

    int held_idx = -1;
    for (size_t i = 0; i < s.objects.size(); ++i) {
        if (s.objects[i].held) held_idx = static_cast<int>(i);
    }

    if (crossed_up && held_idx < 0) {
        int best = -1;
        double best_d = kGrabRadius;
        for (size_t i = 0; i < s.objects.size(); ++i) {
            const double d = dist(s.agent_pos, s.objects[i].pos);
            if (d < best_d) {
                best = static_cast<int>(i);
                best_d = d;
            }
        }
        if (best >= 0) {
            s.objects[static_cast<size_t>(best)].held = true;
            held_idx = best;
        }
    } else if (crossed_down && held_idx >= 0) {
        s.objects[static_cast<size_t>(held_idx)].held = false;
        held_idx = -1;
    }

    if (held_idx >= 0) s.objects[static_cast<size_t>(held_idx)].pos = s.agent_pos;

    if (s.has_door && s.door_angle > 0.0) {
        if (dist(s.agent_pos, door_edge(state)) < kDoorContact) {
            s.door_angle = std::max(0.0, s.door_angle - kDoorPushRate);
        }
    }

    s.step_count = state.step_count + 1;
    return s;
}

bool success(const WorldState& s) {
    switch (s.task) {
        case Task::pick_place:
            return !s.objects[0].held && dist(s.objects[0].pos, s.goal.pos) < s.goal.radius;
        case Task::close_door:
            return s.door_angle < kDoorClosedAngle;
        case Task::fold_corners:
            return dist(s.objects[0].pos, s.objects[1].pos) < kFoldSuccessDist;
    }
    return false;
}

// ---------------------------------------------------------------- expert

namespace {

constexpr double kInflate = 0.035;   // obstacle clearance for planned paths
constexpr double kWaypointPad = 0.025;
constexpr double kGrabZone = 0.03;   // commit to grabbing inside this range
constexpr double kReleasePad = 0.03; // release this far inside the goal edge

// straight segment a->b blocked by ob? out: detour waypoint
bool segment_blocked(const Vec2& a, const Vec2& b, const Obstacle& ob, Vec2* waypoint) {
    const double r = ob.radius + kInflate;
    Vec2 ab{b.x - a.x, b.y - a.y};
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    if (len2 < 1e-18) return false;
    double t = ((ob.pos.x - a.x) * ab.x + (ob.pos.y - a.y) * ab.y) / len2;
    t = std::clamp(t, 0.0, 1.0);
    Vec2 closest{a.x + t * ab.x, a.y + t * ab.y};
    const double d = dist(closest, ob.pos);
    if (d >= r) return false;
    Vec2 away{closest.x - ob.pos.x, closest.y - ob.pos.y};
    double an = std::hypot(away.x, away.y);
    if (an < 1e-12) {  // segment passes through the center; pick a fixed side
        const double len = std::sqrt(len2);
        away = {-ab.y / len, ab.x / len};
        an = 1.0;
    }
    *waypoint = {ob.pos.x + away.x / an * (r + kWaypointPad),
                 ob.pos.y + away.y / an * (r + kWaypointPad)};
    return true;
}

// path agent->target with at most one detour per obstacle
std::vector<Vec2> plan_path(const Vec2& from, const Vec2& to,
                            const std::vector<Obstacle>& obstacles) {
    for (const auto& ob : obstacles) {
        Vec2 wp;
        if (segment_blocked(from, to, ob, &wp)) return {wp, to};
    }
    return {to};
}

double path_length(const Vec2& from, const std::vector<Vec2>& path) {
    double total = 0.0;
    Vec2 cur = from;
    for (const auto& p : path) {
        total += dist(cur, p);
        cur = p;
    }
    return total;
}

std::array<double, 3> move_along(const Vec2& from, const std::vector<Vec2>& path) {
    const Vec2& next = path.front();
    const double d = dist(from, next);
    if (d < 1e-12) return {0.0, 0.0, 0.0};
    const double step_len = std::min(kMaxStep, d);
    return {(next.x - from.x) / d * step_len / kMaxStep,
            (next.y - from.y) / d * step_len / kMaxStep, 0.0};
}

int held_index(const WorldState& s) {
    for (size_t i = 0; i < s.objects.size(); ++i)
        if (s.objects[i].held) return static_cast<int>(i);
    return -1;
}

}  // namespace

std::array<double, 3> expert_action(const WorldState& s) {
    if (success(s)) return {0.0, 0.0, 0.0};
    switch (s.task) {
        case Task::pick_place: {
            const int held = held_index(s);
            if (held < 0) {
                if (dist(s.agent_pos, s.objects[0].pos) <= kGrabZone) return {0.0, 0.0, 1.0};
                return move_along(s.agent_pos, plan_path(s.agent_pos, s.objects[0].pos, s.obstacles));
            }
            if (dist(s.agent_pos, s.goal.pos) <= s.goal.radius - kReleasePad)
                return {0.0, 0.0, -1.0};
            return move_along(s.agent_pos, plan_path(s.agent_pos, s.goal.pos, s.obstacles));
        }
        case Task::close_door: {
            const Vec2 edge = door_edge(s);
            return move_along(s.agent_pos, {edge});
        }
        case Task::fold_corners: {
            const int held = held_index(s);
            if (held < 0) {
                if (dist(s.agent_pos, s.objects[0].pos) <= kGrabZone) return {0.0, 0.0, 1.0};
                return move_along(s.agent_pos, plan_path(s.agent_pos, s.objects[0].pos, s.obstacles));
            }
            return move_along(s.agent_pos, plan_path(s.agent_pos, s.objects[1].pos, s.obstacles));
        }
    }
    return {0.0, 0.0, 0.0};
}

double expert_potential(const WorldState& s) {
    if (success(s)) return 0.0;
    switch (s.task) {
        case Task::pick_place: {
            if (held_index(s) < 0)
                return 2.0 + path_length(s.agent_pos,
                                         plan_path(s.agent_pos, s.objects[0].pos, s.obstacles));
            return 1.0 +
                   path_length(s.agent_pos, plan_path(s.agent_pos, s.goal.pos, s.obstacles));
        }
        case Task::close_door:
            return s.door_angle + std::max(0.0, dist(s.agent_pos, door_edge(s)) - kDoorContact);
        case Task::fold_corners: {
            if (held_index(s) < 0)
                return 2.0 + path_length(s.agent_pos,
                                         plan_path(s.agent_pos, s.objects[0].pos, s.obstacles));
            return 1.0 +
                   path_length(s.agent_pos, plan_path(s.agent_pos, s.objects[1].pos, s.obstacles));
        }
    }
    return 0.0;
}

std::vector<int> instruction_for(Task task, const WorldState& s) {
    switch (task) {
        case Task::pick_place: {
            const auto& obj = s.objects[0];
            const int kind_tok = obj.kind == ObjectKind::cup ? vocab::cup : vocab::block;
            return {vocab::pick, vocab::color_base + obj.color_id, kind_tok, vocab::place,
                    vocab::in, vocab::goal};
        }
        case Task::close_door:
            return {vocab::close, vocab::the, vocab::door, vocab::pad, vocab::pad, vocab::pad};
        case Task::fold_corners:
            return {vocab::fold, vocab::the, vocab::two, vocab::corners, vocab::pad, vocab::pad};
    }
    return std::vector<int>(kInstructionLen, vocab::pad);
}

// ---------------------------------------------------------------- rendering

namespace {

double world_to_px(double v, int extent) { return v * extent - 0.5; }

void blend(Image& img, int y, int x, const Rgb& c, double alpha) {
    if (alpha <= 0.0) return;
    img.at(y, x, 0) = (1.0 - alpha) * img.at(y, x, 0) + alpha * c.r;
    img.at(y, x, 1) = (1.0 - alpha) * img.at(y, x, 1) + alpha * c.g;
    img.at(y, x, 2) = (1.0 - alpha) * img.at(y, x, 2) + alpha * c.b;
}

// soft-edged disc; edge width ~one pixel for sub-pixel position cues
void draw_disc(Image& img, const Vec2& center, double radius, const Rgb& c) {
    const double cx = world_to_px(center.x, img.w), cy = world_to_px(center.y, img.h);
    const double rp = radius * img.w;
    const double aa = 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - rp - 2)));
    const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + rp + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - rp - 2)));
    const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + rp + 2)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x - cx, y - cy);
            blend(img, y, x, c, std::clamp((rp - d) / aa + 0.5, 0.0, 1.0));
        }
}

void draw_square(Image& img, const Vec2& center, double half, const Rgb& c) {
    const double cx = world_to_px(center.x, img.w), cy = world_to_px(center.y, img.h);
    const double hp = half * img.w;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - hp - 2)));
    const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + hp + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - hp - 2)));
    const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + hp + 2)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::max(std::abs(x - cx), std::abs(y - cy));
            blend(img, y, x, c, std::clamp((hp - d) + 0.5, 0.0, 1.0));
        }
}

void draw_segment(Image& img, const Vec2& a, const Vec2& b, double width, const Rgb& c) {
    const double ax = world_to_px(a.x, img.w), ay = world_to_px(a.y, img.h);
    const double bx = world_to_px(b.x, img.w), by = world_to_px(b.y, img.h);
    const double wp = width * img.w;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - wp - 2)));
    const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(std::max(ax, bx) + wp + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - wp - 2)));
    const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(std::max(ay, by) + wp + 2)));
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double t = len2 < 1e-12 ? 0.0 : ((x - ax) * dx + (y - ay) * dy) / len2;
            t = std::clamp(t, 0.0, 1.0);
            const double d = std::hypot(x - (ax + t * dx), y - (ay + t * dy));
            blend(img, y, x, c, std::clamp((wp - d) + 0.5, 0.0, 1.0));
        }
}

void draw_cross(Image& img, const Vec2& center, const Rgb& c) {
    const double arm = 0.07, thick = 0.012;
    draw_segment(img, {center.x - arm, center.y}, {center.x + arm, center.y}, thick, c);
    draw_segment(img, {center.x, center.y - arm}, {center.x, center.y + arm}, thick, c);
}

void draw_ring(Image& img, const Vec2& center, double radius, const Rgb& c) {
    const double cx = world_to_px(center.x, img.w), cy = world_to_px(center.y, img.h);
    const double rp = radius * img.w;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - rp - 2)));
    const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + rp + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - rp - 2)));
    const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + rp + 2)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::abs(std::hypot(x - cx, y - cy) - rp);
            blend(img, y, x, c, std::clamp(1.2 - d, 0.0, 1.0));
        }
}

}  // namespace

Image render(const WorldState& s, const RenderConfig& cfg, SourceTag skin) {
    Image img(cfg.height, cfg.width);
    const Rgb bg = kBackgroundPalette[static_cast<size_t>(cfg.background_color_id) %
                                      (sizeof(kBackgroundPalette) / sizeof(Rgb))];
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            img.at(y, x, 0) = bg.r;
            img.at(y, x, 1) = bg.g;
            img.at(y, x, 2) = bg.b;
        }

    if (s.task == Task::pick_place) draw_disc(img, s.goal.pos, s.goal.radius, {0.22, 0.45, 0.45});
    for (const auto& ob : s.obstacles) draw_disc(img, ob.pos, ob.radius, {0.45, 0.45, 0.48});
    if (s.has_door) {
        draw_segment(img, s.door_hinge, door_edge(s), 0.018, {0.72, 0.55, 0.28});
        draw_disc(img, s.door_hinge, 0.02, {0.85, 0.70, 0.40});
    }
    for (const auto& obj : s.objects) {
        const Rgb c = kObjectPalette[static_cast<size_t>(obj.color_id) %
                                     (sizeof(kObjectPalette) / sizeof(Rgb))];
        switch (obj.kind) {
            case ObjectKind::cup: draw_disc(img, obj.pos, kObjectRadius, c); break;
            case ObjectKind::block: draw_square(img, obj.pos, kObjectRadius * 0.9, c); break;
            case ObjectKind::corner_marker: draw_disc(img, obj.pos, kMarkerRadius, c); break;
        }
    }

    const double glow = 0.55 + 0.45 * s.gripper;
    const Rgb agent{0.95 * glow, 0.95 * glow, 0.95 * glow};
    if (skin == SourceTag::human_video) {
        draw_ring(img, s.agent_pos, 0.05, agent);
    } else {
        draw_cross(img, s.agent_pos, agent);
    }

    for (auto& v : img.px) v = std::clamp(v * cfg.brightness, 0.0, 1.0);

    if (skin == SourceTag::umi) {
        // egocentric-style crop: window around the agent, nearest upscaled
        const int win = 20;
        const double cx = world_to_px(s.agent_pos.x, img.w);
        const double cy = world_to_px(s.agent_pos.y, img.h);
        int ox = std::clamp(static_cast<int>(std::lround(cx)) - win / 2, 0, img.w - win);
        int oy = std::clamp(static_cast<int>(std::lround(cy)) - win / 2, 0, img.h - win);
        Image out(cfg.height, cfg.width);
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                const int sy = oy + y * win / out.h;
                const int sx = ox + x * win / out.w;
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
            }
        return out;
    }
    return img;
}

// ---------------------------------------------------------------- demos

std::vector<Episode> generate_demos(Task task, int n, uint64_t seed, const EnvParams& params,
                                    SourceTag source_tag, double label_fraction) {
    if (n < 1) throw ValueError("generate_demos: n must be >= 1");
    if (label_fraction < 0.0 || label_fraction > 1.0)
        throw ValueError("generate_demos: label_fraction outside [0,1]");

    std::vector<Episode> episodes;
    episodes.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Episode ep;
        ep.seed = derive_seed(seed, static_cast<uint64_t>(i));
        ep.source_tag = source_tag;
        WorldState s = reset(task, ep.seed, params);
        ep.instruction = instruction_for(task, s);
        ep.frames.push_back(render(s, params.render, source_tag));
        while (!success(s) && s.step_count < kMaxEpisodeSteps) {
            const auto a = expert_action(s);
            s = step(s, a);
            ep.actions.push_back(a);
            ep.frames.push_back(render(s, params.render, source_tag));
        }
        ep.success = success(s);
        episodes.push_back(std::move(ep));
    }

    // seeded permutation decides which episodes keep their action labels
    const int n_labeled = static_cast<int>(std::floor(label_fraction * n + 1e-9));
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng perm_rng(derive_seed(seed, 0xBADCAFE));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(perm_rng.index(i + 1))]);
    for (int i = n_labeled; i < n; ++i) {
        Episode& ep = episodes[static_cast<size_t>(order[static_cast<size_t>(i)])];
        ep.has_action_labels = false;
        for (auto& a : ep.actions) a = {0.0, 0.0, 0.0};
    }
    return episodes;
}

EnvParams ood_transform(const EnvParams& params, Task task, OodKind kind) {
    (void)task;
    EnvParams out = params;
    switch (kind) {
        case OodKind::background:
            out.render.background_color_id = kOodBackgroundId;
            break;
        case OodKind::light:
            out.render.brightness = kOodBrightness;
            break;
        case OodKind::novel_object:
            out.object_colors = {4, 5};
            break;
    }
    return out;
}

}  // namespace wog
