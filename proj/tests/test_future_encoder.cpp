#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wog/future_encoder.hpp"
#include "wog/gradcheck.hpp"
#include "wog/optim.hpp"

using namespace wog;

namespace {

std::vector<Tensor> random_grids(Rng& rng, int b, int p0, int p1, int dim) {
    std::vector<Tensor> grids;
    grids.push_back(Tensor::randn({b, p0, dim}, rng, 0.5));
    if (p1 > 0) grids.push_back(Tensor::randn({b, p1, dim}, rng, 0.5));
    return grids;
}

}  // namespace

TEST_CASE("condition shape is fixed regardless of context size") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    Rng rng(11);

    auto both = random_grids(rng, 2, 16, 64, 48);
    Tensor c1 = enc.encode(both);
    CHECK(c1.shape() == Shape{2, 16, 32});

    auto sem_only = random_grids(rng, 2, 64, 0, 48);
    Tensor c2 = enc.encode(sem_only);
    CHECK(c2.shape() == Shape{2, 16, 32});

    auto tiny = random_grids(rng, 1, 3, 0, 48);
    CHECK(enc.encode(tiny).shape() == Shape{1, 16, 32});
}

TEST_CASE("compression: output elements below input elements for supported configs") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    const int out_elems = cfg.n_queries * cfg.cond_dim;
    for (int tokens : {64, 128}) {
        CHECK(out_elems < tokens * cfg.in_dim);
    }
}

TEST_CASE("deterministic given parameters") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    Rng rng(13);
    auto grids = random_grids(rng, 1, 16, 64, 48);
    Tensor a = enc.encode(grids);
    Tensor b = enc.encode(grids);
    CHECK(a.data() == b.data());
}

TEST_CASE("query gradients flow at random init") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    Rng rng(17);
    auto grids = random_grids(rng, 2, 16, 64, 48);
    Tensor out = enc.encode(grids);
    backward(sum_all(mul(out, out)));
    Tensor queries = enc.params().find("queries").tensor;
    double norm = 0.0;
    for (double g : queries.grad()) norm += g * g;
    CHECK(std::sqrt(norm) > 1e-10);
}

TEST_CASE("freeze is idempotent and drops optimizer elements") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    CHECK_FALSE(enc.frozen());

    auto count_trainable = [&] {
        Adam opt(enc.params().params(), 1e-3);
        return opt.trainable_elements();
    };
    const int64_t before = count_trainable();
    CHECK(before == enc.params().element_count());

    enc.freeze();
    CHECK(enc.frozen());
    const uint64_t checksum1 = enc.frozen_checksum();
    enc.freeze();
    CHECK(enc.frozen_checksum() == checksum1);

    const int64_t after = count_trainable();
    CHECK(before - after == enc.params().element_count());
    CHECK(after == 0);
}

TEST_CASE("frozen encoder is bit-identical through an optimizer step") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    enc.freeze();
    Rng rng(19);
    auto grids = random_grids(rng, 1, 16, 64, 48);

    Adam opt(enc.params().params(), 1e-2);
    Tensor out = enc.encode(grids);
    backward(sum_all(mul(out, out)));
    opt.step();
    CHECK(enc.checksum() == enc.frozen_checksum());
}

TEST_CASE("grad_check through one cross-attention block") {
    FutureEncoderConfig cfg;
    cfg.n_queries = 3;
    cfg.cond_dim = 4;
    cfg.hidden = 8;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.in_dim = 5;
    cfg.in_heads = 1;
    FutureEncoder enc(cfg);
    Rng rng(23);
    Tensor grid = Tensor::randn({1, 6, 5}, rng, 0.5);
    Tensor weights = Tensor::randn({1, 3, 4}, rng, 1.0);

    std::vector<Tensor> check_set;
    for (auto& p : enc.params().params()) check_set.push_back(p.tensor);
    double err = grad_check([&] { return sum_all(mul(weights, enc.encode({grid}))); }, check_set,
                            1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("mismatched feature width is rejected") {
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    Rng rng(29);
    Tensor wrong = Tensor::randn({1, 16, 24}, rng, 0.5);
    CHECK_THROWS_AS(enc.encode({wrong}), ShapeError);
    CHECK_THROWS_AS(enc.encode({}), ShapeError);
}

TEST_CASE("encode call counter ticks") {
    reset_future_encoder_call_count();
    FutureEncoderConfig cfg;
    FutureEncoder enc(cfg);
    Rng rng(31);
    auto grids = random_grids(rng, 1, 16, 64, 48);
    enc.encode(grids);
    enc.encode(grids);
    CHECK(future_encoder_call_count() == 2);
    reset_future_encoder_call_count();
}
