#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wog/optim.hpp"
#include "wog/vision.hpp"

using namespace wog;

namespace {

Episode tiny_episode(int length, uint64_t seed = 4) {
    EnvParams params;
    auto eps = generate_demos(Task::pick_place, 1, seed, params);
    Episode ep = eps[0];
    while (ep.length() > length && ep.length() > 1) {
        ep.actions.pop_back();
        ep.frames.pop_back();
    }
    return ep;
}

}  // namespace

TEST_CASE("future frame offsets follow the quarter grid") {
    Episode ep = tiny_episode(30);
    auto s16 = sample_future_frames(ep, 0, 16);
    CHECK(s16.offsets == std::vector<int>{4, 8, 12, 16});
    CHECK(s16.frames.size() == 4);

    auto s8 = sample_future_frames(ep, 0, 8);
    CHECK(s8.offsets == std::vector<int>{2, 4, 6, 8});
}

TEST_CASE("future frames repeat the final frame past the episode end") {
    Episode ep = tiny_episode(10);
    const int last = ep.length();
    auto s = sample_future_frames(ep, last - 3, 16);
    // offsets 4,8,12,16 from t=last-3 all pass the end except none; the last
    // three entries must equal the final frame
    const auto& final_frame = ep.frames.back();
    for (int i = 1; i < 4; ++i) CHECK(s.frames[static_cast<size_t>(i)].px == final_frame.px);
}

TEST_CASE("future frame sampling rejects out-of-range t") {
    Episode ep = tiny_episode(10);
    CHECK_THROWS_AS(sample_future_frames(ep, -1, 16), ValueError);
    CHECK_THROWS_AS(sample_future_frames(ep, ep.length() + 1, 16), ValueError);
    CHECK_THROWS_AS(sample_future_frames(ep, 0, 10), ValueError);
}

TEST_CASE("semantic encoder shape and determinism") {
    VisionConfig cfg;
    SemanticEncoder enc(cfg, 99);
    Rng rng(5);
    Tensor img = Tensor::randn({2, 32, 32, 3}, rng, 0.3);
    Tensor a = enc.encode(img);
    Tensor b = enc.encode(img);
    CHECK(a.shape() == Shape{2, 16, 48});
    CHECK(a.data() == b.data());

    Tensor bad = Tensor::zeros({1, 16, 16, 3});
    CHECK_THROWS_AS(enc.encode(bad), ShapeError);
}

TEST_CASE("encoders are frozen but pass gradients to images") {
    VisionConfig cfg;
    SemanticEncoder enc(cfg, 99);
    const uint64_t before = enc.checksum();

    Rng rng(6);
    Tensor img = Tensor::randn({1, 32, 32, 3}, rng, 0.3, /*requires_grad=*/true);
    Tensor out = enc.encode(img);
    backward(sum_all(out));
    double gnorm = 0.0;
    for (double g : img.grad()) gnorm += g * g;
    CHECK(gnorm > 0.0);
    CHECK(enc.checksum() == before);
}

TEST_CASE("dynamic encoder token grid and sensitivity") {
    VisionConfig cfg;
    DynamicEncoder enc(cfg, 31);
    Rng rng(7);
    Tensor cur = Tensor::randn({1, 32, 32, 3}, rng, 0.3);
    std::vector<Tensor> futures;
    for (int i = 0; i < 4; ++i) futures.push_back(Tensor::randn({1, 32, 32, 3}, rng, 0.3));
    Tensor out = enc.encode(cur, futures);
    CHECK(out.shape() == Shape{1, 64, 48});

    // replacing one future frame changes the output
    auto futures2 = futures;
    futures2[2] = Tensor::randn({1, 32, 32, 3}, rng, 0.3);
    Tensor out2 = enc.encode(cur, futures2);
    double diff = 0.0;
    for (size_t i = 0; i < out.data().size(); ++i) {
        const double d = out.data()[i] - out2.data()[i];
        diff += d * d;
    }
    CHECK(diff > 0.0);

    // identical frames everywhere: swapping them changes nothing
    std::vector<Tensor> same(4, cur);
    Tensor s1 = enc.encode(cur, same);
    std::vector<Tensor> swapped = {same[2], same[0], same[3], same[1]};
    Tensor s2 = enc.encode(cur, swapped);
    CHECK(s1.data() == s2.data());

    CHECK_THROWS_AS(enc.encode(cur, {cur}), ShapeError);
}

TEST_CASE("vision stack head layout per setup") {
    Rng rng(8);
    Tensor cur = Tensor::randn({1, 32, 32, 3}, rng, 0.3);
    std::vector<Tensor> futures(4, cur);

    VisionConfig sem;
    sem.setup = EncoderSetup::semantic_only;
    VisionStack s1(sem);
    auto g1 = s1.encode_future(cur, futures);
    CHECK(g1.size() == 1);
    CHECK(g1[0].shape() == Shape{1, 64, 48});

    VisionConfig two;
    two.setup = EncoderSetup::semantic_contrastive;
    VisionStack s2(two);
    auto g2 = s2.encode_future(cur, futures);
    CHECK(g2.size() == 2);
    CHECK(g2[1].shape() == Shape{1, 64, 48});
    CHECK(g2[0].data() != g2[1].data());  // distinct seeds

    VisionConfig dyn;
    dyn.setup = EncoderSetup::semantic_dynamic;
    VisionStack s3(dyn);
    auto g3 = s3.encode_future(cur, futures);
    CHECK(g3.size() == 2);
    CHECK(g3[0].shape() == Shape{1, 64, 48});
    CHECK(g3[1].shape() == Shape{1, 64, 48});
    CHECK(s3.total_tokens() == 128);
}

TEST_CASE("vision call counters tick on encode") {
    reset_vision_call_counters();
    VisionConfig cfg;
    VisionStack stack(cfg);
    Rng rng(9);
    Tensor cur = Tensor::randn({1, 32, 32, 3}, rng, 0.3);
    std::vector<Tensor> futures(4, cur);
    stack.encode_future(cur, futures);
    auto counters = vision_call_counters();
    CHECK(counters.semantic == 4);
    CHECK(counters.dynamic == 1);
    reset_vision_call_counters();
    CHECK(vision_call_counters().semantic == 0);
}
