#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "wog/world.hpp"

using namespace wog;

namespace {

bool states_equal(const WorldState& a, const WorldState& b) {
    if (a.agent_pos.x != b.agent_pos.x || a.agent_pos.y != b.agent_pos.y) return false;
    if (a.gripper != b.gripper || a.step_count != b.step_count) return false;
    if (a.door_angle != b.door_angle) return false;
    if (a.objects.size() != b.objects.size()) return false;
    for (size_t i = 0; i < a.objects.size(); ++i) {
        if (a.objects[i].pos.x != b.objects[i].pos.x) return false;
        if (a.objects[i].pos.y != b.objects[i].pos.y) return false;
        if (a.objects[i].held != b.objects[i].held) return false;
    }
    return true;
}

WorldState run_expert(Task task, uint64_t seed, const EnvParams& params, int* steps = nullptr) {
    WorldState s = reset(task, seed, params);
    int n = 0;
    while (!success(s) && n < kMaxEpisodeSteps) {
        s = step(s, expert_action(s));
        ++n;
    }
    if (steps) *steps = n;
    return s;
}

}  // namespace

TEST_CASE("reset is deterministic") {
    EnvParams params;
    for (auto task : {Task::pick_place, Task::close_door, Task::fold_corners}) {
        WorldState a = reset(task, 42, params);
        WorldState b = reset(task, 42, params);
        CHECK(states_equal(a, b));
    }
}

TEST_CASE("pick_place placement keeps object and goal separated over 100 seeds") {
    EnvParams params;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        WorldState s = reset(Task::pick_place, seed, params);
        CHECK(dist(s.objects[0].pos, s.goal.pos) > 0.2);
    }
}

TEST_CASE("close_door resets with door angle in (0, pi/2]") {
    EnvParams params;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        WorldState s = reset(Task::close_door, seed, params);
        CHECK(s.door_angle > 0.0);
        CHECK(s.door_angle <= 1.5707963267948966);
    }
}

TEST_CASE("zero action is a fixed point apart from step_count") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 3, params);
    WorldState t = step(s, {0.0, 0.0, 0.0});
    CHECK(t.agent_pos.x == s.agent_pos.x);
    CHECK(t.agent_pos.y == s.agent_pos.y);
    CHECK(t.gripper == s.gripper);
    CHECK(t.step_count == s.step_count + 1);
}

TEST_CASE("stepping toward an obstacle center ends outside its radius") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 5, params);
    const Obstacle& ob = s.obstacles[0];
    // walk straight at the obstacle for many steps
    WorldState cur = s;
    for (int i = 0; i < 60; ++i) {
        const double dx = ob.pos.x - cur.agent_pos.x;
        const double dy = ob.pos.y - cur.agent_pos.y;
        const double n = std::hypot(dx, dy);
        if (n < 1e-9) break;
        cur = step(cur, {dx / n, dy / n, 0.0});
        CHECK(dist(cur.agent_pos, ob.pos) >= ob.radius - 1e-12);
    }
}

TEST_CASE("non-finite action is rejected") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 1, params);
    CHECK_THROWS_AS(step(s, {std::nan(""), 0.0, 0.0}), ValueError);
}

TEST_CASE("dynamics are a pure function of state and action") {
    EnvParams params;
    WorldState s = reset(Task::fold_corners, 9, params);
    const std::array<double, 3> a{0.3, -0.7, 0.1};
    WorldState t1 = step(s, a);
    WorldState t2 = step(s, a);
    CHECK(states_equal(t1, t2));
}

TEST_CASE("expert succeeds on 100 seeds for every task") {
    EnvParams params;
    for (auto task : {Task::pick_place, Task::close_door, Task::fold_corners}) {
        int successes = 0;
        int max_len = 0;
        for (uint64_t seed = 0; seed < 100; ++seed) {
            int steps = 0;
            WorldState s = run_expert(task, seed, params, &steps);
            successes += success(s) ? 1 : 0;
            max_len = std::max(max_len, steps);
        }
        INFO(task_name(task) << " longest episode " << max_len);
        CHECK(successes == 100);
        CHECK(max_len < kMaxEpisodeSteps);
    }
}

TEST_CASE("expert potential strictly decreases except on gripper toggles") {
    EnvParams params;
    for (auto task : {Task::pick_place, Task::close_door, Task::fold_corners}) {
        for (uint64_t seed = 0; seed < 20; ++seed) {
            WorldState s = reset(task, seed, params);
            while (!success(s) && s.step_count < kMaxEpisodeSteps) {
                const auto a = expert_action(s);
                const double before = expert_potential(s);
                s = step(s, a);
                const double after = expert_potential(s);
                const bool toggle = std::abs(a[2]) > 0.5;
                if (!toggle && !success(s)) {
                    INFO(task_name(task) << " seed " << seed << " step " << s.step_count);
                    CHECK(after < before);
                }
            }
            CHECK(success(s));
        }
    }
}

TEST_CASE("agent stays inside the unit square and outside obstacles") {
    EnvParams params;
    Rng rng(77);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        WorldState s = reset(Task::pick_place, seed, params);
        for (int i = 0; i < 120; ++i) {
            s = step(s, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
            CHECK(s.agent_pos.x >= 0.0);
            CHECK(s.agent_pos.x <= 1.0);
            CHECK(s.agent_pos.y >= 0.0);
            CHECK(s.agent_pos.y <= 1.0);
            for (const auto& ob : s.obstacles)
                CHECK(dist(s.agent_pos, ob.pos) >= ob.radius - 1e-12);
            for (const auto& obj : s.objects) {
                CHECK(obj.pos.x >= 0.0);
                CHECK(obj.pos.x <= 1.0);
            }
            int held = 0;
            for (const auto& obj : s.objects) held += obj.held ? 1 : 0;
            CHECK(held <= 1);
        }
    }
}

TEST_CASE("success predicates") {
    EnvParams params;

    SUBCASE("fold corners by distance") {
        WorldState s = reset(Task::fold_corners, 2, params);
        s.objects[0].pos = {0.5, 0.5};
        s.objects[1].pos = {0.54, 0.5};  // distance 0.04
        CHECK(success(s));
        s.objects[1].pos = {0.56, 0.5};
        CHECK_FALSE(success(s));
    }

    SUBCASE("pick_place requires release") {
        WorldState s = reset(Task::pick_place, 2, params);
        s.objects[0].pos = s.goal.pos;
        s.objects[0].held = true;
        CHECK_FALSE(success(s));
        s.objects[0].held = false;
        CHECK(success(s));
    }

    SUBCASE("door fully closed") {
        WorldState s = reset(Task::close_door, 2, params);
        s.door_angle = 0.0;
        CHECK(success(s));
        s.door_angle = 0.2;
        CHECK_FALSE(success(s));
    }
}

TEST_CASE("expert releases over the goal") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 11, params);
    s.objects[0].held = true;
    s.objects[0].pos = s.goal.pos;
    s.agent_pos = s.goal.pos;
    s.gripper = 1.0;
    const auto a = expert_action(s);
    CHECK(a[2] < 0.0);
}

TEST_CASE("render determinism and brightness") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 8, params);
    Image a = render(s, params.render);
    Image b = render(s, params.render);
    CHECK(a.px == b.px);

    RenderConfig bright = params.render;
    bright.brightness = 1.3;
    Image c = render(s, bright);
    for (size_t i = 0; i < a.px.size(); ++i) {
        CHECK(c.px[i] <= 1.3 * a.px[i] + 1e-12);
        CHECK(c.px[i] <= 1.0);
    }
}

TEST_CASE("render with no objects shows background plus agent only") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 8, params);
    s.objects.clear();
    s.obstacles.clear();
    s.goal.radius = 0.0;
    s.task = Task::fold_corners;  // avoid drawing the pick_place goal
    s.objects = {SceneObject{{2.0, 2.0}, ObjectKind::corner_marker, 0, false},
                 SceneObject{{2.5, 2.5}, ObjectKind::corner_marker, 1, false}};
    Image img = render(s, params.render);
    // far corner pixel equals the background fill
    CHECK(img.at(0, 0, 0) == doctest::Approx(0.12));
    CHECK(img.at(0, 0, 1) == doctest::Approx(0.12));
    CHECK(img.at(0, 0, 2) == doctest::Approx(0.14));
    // somewhere near the agent the pixel differs from background
    bool agent_visible = false;
    for (int y = 0; y < img.h && !agent_visible; ++y)
        for (int x = 0; x < img.w && !agent_visible; ++x)
            if (std::abs(img.at(y, x, 0) - 0.12) > 0.1) agent_visible = true;
    CHECK(agent_visible);
}

TEST_CASE("generate_demos label fractions") {
    EnvParams params;
    auto all = generate_demos(Task::pick_place, 10, 21, params, SourceTag::robot, 1.0);
    for (const auto& ep : all) CHECK(ep.has_action_labels);

    auto some = generate_demos(Task::pick_place, 100, 22, params, SourceTag::human_video, 0.11);
    int labeled = 0;
    for (const auto& ep : some) {
        if (ep.has_action_labels) {
            ++labeled;
        } else {
            for (const auto& a : ep.actions) {
                CHECK(a[0] == 0.0);
                CHECK(a[1] == 0.0);
                CHECK(a[2] == 0.0);
            }
        }
    }
    CHECK(labeled == 11);
}

TEST_CASE("demo episodes satisfy the frame/action length contract") {
    EnvParams params;
    auto eps = generate_demos(Task::fold_corners, 5, 31, params);
    for (const auto& ep : eps) {
        CHECK(ep.frames.size() == ep.actions.size() + 1);
        CHECK(ep.success);
        CHECK(ep.instruction.size() == kInstructionLen);
        for (const auto& a : ep.actions)
            for (double v : a) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
            }
    }
}

TEST_CASE("episode cache round trip is byte-identical and checksummed") {
    namespace fs = std::filesystem;
    EnvParams params;
    auto eps = generate_demos(Task::pick_place, 3, 17, params);
    const auto dir = fs::temp_directory_path() / "wog_cache_test";
    fs::create_directories(dir);
    const std::string p1 = (dir / "a.wogep").string();
    const std::string p2 = (dir / "b.wogep").string();
    save_episodes(p1, Task::pick_place, 17, eps);
    save_episodes(p2, Task::pick_place, 17, eps);
    CHECK(file_checksum(p1) == file_checksum(p2));

    Task task{};
    uint64_t seed = 0;
    auto loaded = load_episodes(p1, &task, &seed);
    CHECK(task == Task::pick_place);
    CHECK(seed == 17);
    REQUIRE(loaded.size() == eps.size());
    for (size_t i = 0; i < eps.size(); ++i) {
        CHECK(loaded[i].actions == eps[i].actions);
        CHECK(loaded[i].instruction == eps[i].instruction);
        CHECK(loaded[i].success == eps[i].success);
        CHECK(loaded[i].frames.size() == eps[i].frames.size());
    }

    SUBCASE("corrupting one byte fails the checksum") {
        std::fstream f(p1, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char c;
        f.seekg(100);
        f.get(c);
        f.seekp(100);
        c = static_cast<char>(c ^ 0x40);
        f.put(c);
        f.close();
        CHECK_THROWS_AS(load_episodes(p1), SerializationError);
    }
    fs::remove_all(dir);
}

TEST_CASE("ood transforms") {
    EnvParams params;

    EnvParams bg = ood_transform(params, Task::pick_place, OodKind::background);
    CHECK(bg.render.background_color_id != params.render.background_color_id);
    CHECK(bg.render.brightness == params.render.brightness);
    CHECK(bg.object_colors == params.object_colors);

    EnvParams light = ood_transform(params, Task::pick_place, OodKind::light);
    CHECK(light.render.brightness == 1.35);

    EnvParams novel = ood_transform(params, Task::pick_place, OodKind::novel_object);
    // instruction color token must differ from every training instruction token
    std::set<int> train_tokens;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        WorldState s = reset(Task::pick_place, seed, params);
        for (int tok : instruction_for(Task::pick_place, s)) train_tokens.insert(tok);
    }
    for (uint64_t seed = 0; seed < 20; ++seed) {
        WorldState s = reset(Task::pick_place, seed, novel);
        const int color_tok = instruction_for(Task::pick_place, s)[1];
        CHECK(train_tokens.count(color_tok) == 0);
    }
}

TEST_CASE("umi skin produces a different but deterministic view") {
    EnvParams params;
    WorldState s = reset(Task::pick_place, 12, params);
    Image robot_view = render(s, params.render, SourceTag::robot);
    Image umi_view = render(s, params.render, SourceTag::umi);
    Image umi_view2 = render(s, params.render, SourceTag::umi);
    CHECK(umi_view.px == umi_view2.px);
    CHECK(umi_view.px != robot_view.px);
}
