#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wog/gradcheck.hpp"
#include "wog/nn.hpp"
#include "wog/optim.hpp"
#include "wog/tensor.hpp"

using namespace wog;

TEST_CASE("matmul identity") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor out = matmul(a, eye);
    CHECK(out.data() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("matmul shape errors name both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shape mismatch [2,3] vs [4,2]", ShapeError);
}

TEST_CASE("softmax symmetry and normalization") {
    Tensor x = Tensor::from_data({2}, {0.0, 0.0});
    Tensor y = softmax_lastdim(x);
    CHECK(y.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.data()[1] == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor t = Tensor::randn({4, 9}, rng, 2.0);
        Tensor s = softmax_lastdim(t);
        for (int r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (int j = 0; j < 9; ++j) {
                double v = s.data()[static_cast<size_t>(r) * 9 + j];
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("layer norm statistics before scale/shift") {
    Rng rng(11);
    Tensor x = Tensor::randn({6, 16}, rng, 3.0);
    Tensor gain = Tensor::full({16}, 1.0);
    Tensor shift = Tensor::zeros({16});
    Tensor y = layer_norm_lastdim(x, gain, shift, 1e-12);
    for (int r = 0; r < 6; ++r) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mean += y.data()[static_cast<size_t>(r) * 16 + j];
        mean /= 16.0;
        for (int j = 0; j < 16; ++j) {
            double c = y.data()[static_cast<size_t>(r) * 16 + j] - mean;
            var += c * c;
        }
        var /= 16.0;
        CHECK(std::abs(mean) < 1e-7);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("cosine self-similarity is 1") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor v = Tensor::randn({1, 12}, rng);
        Tensor c = cosine_rowwise(v, v);
        CHECK(c.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("backward: d/dx sum(x*x) = 2x") {
    Tensor x = Tensor::from_data({1}, {3.0}, /*requires_grad=*/true);
    Tensor loss = sum_all(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward: softmax sums to one so gradient of its sum is zero") {
    Rng rng(5);
    Tensor x = Tensor::randn({7}, rng, 1.5);
    x.set_requires_grad(true);
    Tensor loss = sum_all(softmax_lastdim(x));
    backward(loss);
    for (double g : x.grad()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("backward requires a scalar") {
    Tensor x = Tensor::zeros({2, 2}, true);
    Tensor y = add(x, x);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("backward leaves unreachable tensors with zero grad") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor unrelated = Tensor::from_data({2}, {5.0, 5.0}, true);
    Tensor loss = sum_all(mul(x, x));
    backward(loss);
    CHECK(unrelated.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward accumulates until reset") {
    Tensor x = Tensor::from_data({1}, {2.0}, true);
    Tensor loss = sum_all(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    Tensor loss2 = sum_all(mul(x, x));
    backward(loss2);
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("registered op suite passes grad_check under 1e-4") {
    std::vector<std::pair<std::string, double>> per_op;
    double worst = run_op_checks(/*trials=*/10, /*seed=*/1234, &per_op);
    for (const auto& [name, err] : per_op) {
        INFO(name << " max rel err " << err);
        CHECK(err < 1e-4);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("grad_check on sum of squares") {
    Rng rng(21);
    Tensor x = Tensor::zeros({8}, true);
    for (auto& v : x.data()) v = rng.uniform(-1.0, 1.0);
    double err = grad_check([&] { return sum_all(mul(x, x)); }, {x});
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check of layer norm parameters on a 4x8 input") {
    Rng rng(22);
    Tensor x = Tensor::randn({4, 8}, rng, 1.0, true);
    Tensor gain = Tensor::zeros({8}, true);
    Tensor shift = Tensor::zeros({8}, true);
    for (auto& v : gain.data()) v = rng.uniform(0.5, 1.5);
    for (auto& v : shift.data()) v = rng.uniform(-0.5, 0.5);
    Tensor w = Tensor::randn({4, 8}, rng);
    double err = grad_check(
        [&] { return sum_all(mul(w, layer_norm_lastdim(x, gain, shift))); }, {x, gain, shift});
    CHECK(err < 1e-4);
}

TEST_CASE("frozen parameters shrink the check set") {
    Rng rng(23);
    ParamStore store;
    Tensor a = store.add("a", {3, 3}, Init::normal_fan_in, rng);
    Tensor b = store.add("b", {3}, Init::normal_002, rng);
    auto gather = [&] {
        std::vector<Tensor> set;
        int64_t count = 0;
        for (auto& p : store.params()) {
            if (!p.frozen()) {
                set.push_back(p.tensor);
                count += p.tensor.numel();
            }
        }
        return std::pair{set, count};
    };
    auto [full_set, full_count] = gather();
    CHECK(full_count == 12);
    store.params()[1].tensor.set_requires_grad(false);
    auto [frozen_set, frozen_count] = gather();
    CHECK(full_count - frozen_count == b.numel());
    CHECK(frozen_set.size() == full_set.size() - 1);
}

TEST_CASE("non-finite values are detectable") {
    Tensor x = Tensor::from_data({2}, {1.0, std::nan("")});
    CHECK_FALSE(all_finite(x));
    Tensor y = Tensor::from_data({2}, {1.0, 2.0});
    CHECK(all_finite(y));
}

TEST_CASE("multihead attention shapes and grad flow") {
    Rng rng(31);
    ParamStore store;
    auto attn = make_attention(store, "attn", 16, rng);
    Tensor q = Tensor::randn({2, 5, 16}, rng, 0.5, true);
    Tensor kv = Tensor::randn({2, 7, 16}, rng, 0.5);
    Tensor out = multihead_attention(q, kv, attn, 4);
    CHECK(out.shape() == Shape{2, 5, 16});
    backward(sum_all(out));
    double norm = 0.0;
    for (double g : q.grad()) norm += g * g;
    CHECK(norm > 0.0);
}

TEST_CASE("causal mask blocks attention to later positions") {
    Rng rng(32);
    ParamStore store;
    auto attn = make_attention(store, "attn", 8, rng);
    Tensor x = Tensor::randn({1, 4, 8}, rng, 0.5);
    Tensor base = multihead_attention(x, x, attn, 2, causal_mask(4));

    // changing the last token must not affect the first row's output
    Tensor x2 = Tensor::from_data(x.shape(), x.data());
    for (int j = 0; j < 8; ++j) x2.data()[3 * 8 + j] += 1.0;
    Tensor other = multihead_attention(x2, x2, attn, 2, causal_mask(4));
    for (int j = 0; j < 8; ++j)
        CHECK(base.data()[static_cast<size_t>(j)] ==
              doctest::Approx(other.data()[static_cast<size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("adam skips frozen parameters bit-exactly") {
    Rng rng(41);
    ParamStore store;
    Tensor w = store.add("w", {4}, Init::normal_fan_in, rng);
    Tensor frozen = store.add("frozen", {4}, Init::normal_fan_in, rng);
    frozen.set_requires_grad(false);
    const std::vector<double> before = frozen.data();

    Adam opt(store.params(), 1e-2);
    CHECK(opt.trainable_elements() == 4);
    Tensor loss = sum_all(mul(w, w));
    backward(loss);
    opt.step();
    CHECK(frozen.data() == before);
    CHECK(w.data() != std::vector<double>(4, 0.0));
}

TEST_CASE("adam converges on a quadratic") {
    Tensor x = Tensor::from_data({3}, {2.0, -1.5, 0.7}, true);
    Adam opt({Parameter{"x", x}}, 5e-2);
    for (int i = 0; i < 400; ++i) {
        opt.zero_grad();
        Tensor loss = sum_all(mul(x, x));
        backward(loss);
        opt.step();
    }
    for (double v : x.data()) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("no-grad mode records no graph") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}
