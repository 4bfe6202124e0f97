#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wog/optim.hpp"
#include "wog/policy.hpp"
#include "wog/world.hpp"

using namespace wog;

namespace {

double l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("backbone token accounting and z definition") {
    PolicyConfig cfg;
    Backbone bb(cfg, 71);
    Rng rng(1);
    Tensor obs = Tensor::randn({2, 32, 32, 3}, rng, 0.3);
    std::vector<int> tokens = {1, 13, 10, 2, 9, 8, 3, 5, 6, 0, 0, 0};
    auto out = bb.encode(obs, tokens);
    CHECK(out.h.shape() == Shape{2, 23, 64});  // 16 patches + 6 tokens + 1
    CHECK(out.z.shape() == Shape{2, 1, 64});

    // z is exactly the last row of h
    for (int b = 0; b < 2; ++b)
        for (int j = 0; j < 64; ++j)
            CHECK(out.z.data()[static_cast<size_t>(b) * 64 + j] ==
                  out.h.data()[(static_cast<size_t>(b) * 23 + 22) * 64 + j]);
}

TEST_CASE("unknown token ids are rejected") {
    PolicyConfig cfg;
    Backbone bb(cfg, 71);
    Rng rng(2);
    Tensor obs = Tensor::randn({1, 32, 32, 3}, rng, 0.3);
    std::vector<int> tokens = {1, 2, 3, 4, 5, 99};
    CHECK_THROWS_AS(bb.encode(obs, tokens), ValueError);
}

TEST_CASE("permuting instruction tokens changes z") {
    PolicyConfig cfg;
    Backbone bb(cfg, 71);
    Rng rng(3);
    Tensor obs = Tensor::randn({1, 32, 32, 3}, rng, 0.3);
    auto a = bb.encode(obs, {1, 13, 10, 2, 9, 8});
    auto b = bb.encode(obs, {8, 9, 2, 10, 13, 1});
    CHECK(l2_diff(a.z.data(), b.z.data()) > 0.0);
}

TEST_CASE("condition query head windows the last rows only") {
    PolicyConfig cfg;
    CondQueryHead head(cfg, 72);
    Rng rng(4);
    Tensor h = Tensor::randn({1, 23, 64}, rng, 0.5);
    Tensor base = head.predict(h);
    CHECK(base.shape() == Shape{1, 16, 32});

    // outside the 4-token window: bit-identical output
    Tensor h2 = Tensor::from_data(h.shape(), h.data());
    for (int j = 0; j < 64; ++j) h2.data()[(23 - 5) * 64 + static_cast<size_t>(j)] += 2.0;
    CHECK(head.predict(h2).data() == base.data());

    // inside the window: output changes
    Tensor h3 = Tensor::from_data(h.shape(), h.data());
    for (int j = 0; j < 64; ++j) h3.data()[(23 - 1) * 64 + static_cast<size_t>(j)] += 2.0;
    CHECK(l2_diff(head.predict(h3).data(), base.data()) > 0.0);

    Tensor tiny = Tensor::randn({1, 3, 64}, rng, 0.5);
    CHECK_THROWS_AS(head.predict(tiny), ShapeError);
}

TEST_CASE("velocity shapes, context sensitivity, tau domain") {
    PolicyConfig cfg;
    DiT dit(cfg, 73);
    Rng rng(5);
    Tensor a_tau = Tensor::randn({2, 16, 3}, rng);
    Tensor taus = Tensor::from_data({2}, {0.0, 1.0});  // boundary taus accepted
    Tensor z = Tensor::randn({2, 1, 64}, rng, 0.5);

    Tensor v_plain = dit.velocity(a_tau, taus, z, std::nullopt);
    CHECK(v_plain.shape() == Shape{2, 16, 3});

    Tensor cond = Tensor::randn({2, 16, 32}, rng, 0.5);
    Tensor v_cond = dit.velocity(a_tau, taus, z, cond);
    CHECK(v_cond.shape() == Shape{2, 16, 3});
    CHECK(l2_diff(v_plain.data(), v_cond.data()) > 0.0);

    Tensor bad_tau = Tensor::from_data({2}, {0.5, 1.2});
    CHECK_THROWS_AS(dit.velocity(a_tau, bad_tau, z, std::nullopt), ValueError);
}

TEST_CASE("sampler determinism and single-step identity") {
    PolicyConfig cfg;
    DiT dit(cfg, 74);
    Rng rng(6);
    Tensor z = Tensor::randn({1, 1, 64}, rng, 0.5);

    Tensor s1 = dit.sample(z, std::nullopt, 10, 42);
    Tensor s2 = dit.sample(z, std::nullopt, 10, 42);
    CHECK(s1.data() == s2.data());
    Tensor s3 = dit.sample(z, std::nullopt, 10, 43);
    CHECK(s1.data() != s3.data());

    // one Euler step: A0 + v(A0, 0)
    Tensor one = dit.sample(z, std::nullopt, 1, 42);
    Rng noise(42);
    Tensor a0 = Tensor::randn({1, 16, 3}, noise);
    Tensor taus = Tensor::zeros({1});
    Tensor v = dit.velocity(a0, taus, z, std::nullopt);
    for (size_t i = 0; i < one.data().size(); ++i)
        CHECK(one.data()[i] == doctest::Approx(a0.data()[i] + v.data()[i]).epsilon(1e-12));

    CHECK_THROWS_AS(dit.sample(z, std::nullopt, 0, 42), ValueError);
}

TEST_CASE("head overfits a single (z, target) pair under a fixed noise seed") {
    PolicyConfig cfg;
    DiT dit(cfg, 75);
    Rng rng(7);
    Tensor z = Tensor::randn({1, 1, 64}, rng, 0.5);

    // expert-like chunk in [-1,1]
    Tensor target = Tensor::zeros({1, 16, 3});
    for (auto& v : target.data()) v = rng.uniform(-1.0, 1.0);

    const uint64_t noise_seed = 555;
    Rng noise(noise_seed);
    Tensor a0 = Tensor::randn({1, 16, 3}, noise);

    // constant-velocity target field: v* = target - a0 along the interpolant
    Tensor v_star = sub(target, a0);

    Adam opt(dit.params().params(), 2e-3);
    Rng tau_rng(8);
    const int tau_batch = 4;
    Tensor zb = concat(std::vector<Tensor>(tau_batch, z), 0);
    Tensor vb = concat(std::vector<Tensor>(tau_batch, v_star), 0);
    for (int it = 0; it < 2000; ++it) {
        std::vector<Tensor> rows;
        std::vector<double> taus(tau_batch);
        for (int i = 0; i < tau_batch; ++i) {
            taus[static_cast<size_t>(i)] = tau_rng.uniform01();
            rows.push_back(add(scale(a0, 1.0 - taus[static_cast<size_t>(i)]),
                               scale(target, taus[static_cast<size_t>(i)])));
        }
        Tensor a_tau = concat(rows, 0);
        opt.zero_grad();
        Tensor v = dit.velocity(a_tau, Tensor::from_data({tau_batch}, taus), zb, std::nullopt);
        Tensor loss = mse(v, vb);
        backward(loss);
        opt.step();
    }

    Tensor sampled = dit.sample(z, std::nullopt, 10, noise_seed);
    double err = 0.0;
    for (size_t i = 0; i < sampled.data().size(); ++i) {
        const double d = sampled.data()[i] - target.data()[i];
        err += d * d;
    }
    err /= static_cast<double>(sampled.data().size());
    INFO("overfit mse " << err);
    CHECK(err < 1e-3);
}
