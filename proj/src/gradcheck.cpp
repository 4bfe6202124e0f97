#include "wog/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace wog {

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double eps,
                  int max_elements, uint64_t subset_seed) {
    // analytic pass
    for (const auto& t : inputs) {
        const_cast<Tensor&>(t).zero_grad();
    }
    Tensor loss = f();
    if (!all_finite(loss)) throw ValueError("grad_check: non-finite loss");
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& t : inputs) analytic.push_back(const_cast<Tensor&>(t).grad());

    double worst = 0.0;
    Rng pick(subset_seed == 0 ? 0x9d2c5680u : subset_seed);
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = const_cast<Tensor&>(inputs[ti]);
        const int64_t n = t.numel();
        std::vector<int64_t> idx;
        if (max_elements <= 0 || n <= max_elements) {
            idx.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
        } else {
            for (int i = 0; i < max_elements; ++i)
                idx.push_back(pick.index(static_cast<int>(n)));
        }
        for (int64_t i : idx) {
            double& x = t.data()[static_cast<size_t>(i)];
            const double saved = x;
            double fp, fm;
            {
                NoGradGuard ng;
                x = saved + eps;
                fp = f().item();
                x = saved - eps;
                fm = f().item();
                x = saved;
            }
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw ValueError("grad_check: non-finite perturbed loss");
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = analytic[ti][static_cast<size_t>(i)];
            const double rel = std::abs(an - fd) / std::max(1.0, std::abs(an));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

namespace {

Tensor rand_uniform(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(s, /*requires_grad=*/true);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

using CheckFactory = std::pair<std::function<Tensor()>, std::vector<Tensor>>;

}  // namespace

const std::vector<OpCheck>& op_check_suite() {
    static const std::vector<OpCheck> suite = {
        {"add",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 4}, rng), b = rand_uniform({3, 4}, rng);
             Tensor w = rand_uniform({3, 4}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, add(a, b))); }, {a, b}};
         }},
        {"sub",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 4}, rng), b = rand_uniform({3, 4}, rng);
             Tensor w = rand_uniform({3, 4}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, sub(a, b))); }, {a, b}};
         }},
        {"mul",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 4}, rng), b = rand_uniform({3, 4}, rng);
             return {[=] { return sum_all(mul(a, b)); }, {a, b}};
         }},
        {"scale_add_scalar",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({2, 5}, rng);
             Tensor w = rand_uniform({2, 5}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, add_scalar(scale(a, -1.7), 0.3))); }, {a}};
         }},
        {"matmul_2d",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 4}, rng), b = rand_uniform({4, 5}, rng);
             Tensor w = rand_uniform({3, 5}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, matmul(a, b))); }, {a, b}};
         }},
        {"matmul_batched",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({2, 3, 4}, rng), b = rand_uniform({2, 4, 5}, rng);
             Tensor w = rand_uniform({2, 3, 5}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, matmul(a, b))); }, {a, b}};
         }},
        {"matmul_shared_rhs",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({2, 3, 4}, rng), b = rand_uniform({4, 5}, rng);
             Tensor w = rand_uniform({2, 3, 5}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, matmul(a, b))); }, {a, b}};
         }},
        {"transpose",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({2, 3, 4, 2}, rng);
             Tensor w = rand_uniform({2, 4, 3, 2}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, transpose(a, 1, 2))); }, {a}};
         }},
        {"reshape",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 4}, rng);
             Tensor w = rand_uniform({2, 6}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, reshape(a, {2, 6}))); }, {a}};
         }},
        {"concat",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({2, 3}, rng), b = rand_uniform({2, 2}, rng);
             Tensor w = rand_uniform({2, 5}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, concat({a, b}, 1))); }, {a, b}};
         }},
        {"slice",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({4, 5}, rng);
             Tensor w = rand_uniform({4, 2}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, slice(a, 1, 1, 2))); }, {a}};
         }},
        {"softmax",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 6}, rng, -2.0, 2.0);
             Tensor w = rand_uniform({3, 6}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, softmax_lastdim(a))); }, {a}};
         }},
        {"layer_norm",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({4, 8}, rng, -2.0, 2.0);
             Tensor g = rand_uniform({8}, rng, 0.5, 1.5);
             Tensor s = rand_uniform({8}, rng, -0.5, 0.5);
             Tensor w = rand_uniform({4, 8}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, layer_norm_lastdim(a, g, s))); }, {a, g, s}};
         }},
        {"silu",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 7}, rng, -3.0, 3.0);
             Tensor w = rand_uniform({3, 7}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, silu(a))); }, {a}};
         }},
        {"mse",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({4, 3}, rng), b = rand_uniform({4, 3}, rng);
             return {[=] { return mse(a, b); }, {a, b}};
         }},
        {"mean",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({5, 3}, rng);
             return {[=] { return mean_all(mul(a, a)); }, {a}};
         }},
        {"cosine_rowwise",
         [](Rng& rng) -> CheckFactory {
             // keep rows away from the origin so the cosine stays smooth
             Tensor a = rand_uniform({4, 6}, rng, 0.2, 1.0);
             Tensor b = rand_uniform({4, 6}, rng, 0.2, 1.0);
             Tensor w = rand_uniform({4}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, cosine_rowwise(a, b))); }, {a, b}};
         }},
        {"sinusoidal_embedding",
         [](Rng& rng) -> CheckFactory {
             Tensor taus = rand_uniform({3}, rng, 0.05, 0.95);
             Tensor w = rand_uniform({3, 8}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, sinusoidal_embedding(taus, 8))); }, {taus}};
         }},
        {"add_bias",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({2, 3, 4}, rng), b = rand_uniform({4}, rng);
             Tensor w = rand_uniform({2, 3, 4}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, add_bias(a, b))); }, {a, b}};
         }},
        {"expand_axis",
         [](Rng& rng) -> CheckFactory {
             Tensor a = rand_uniform({3, 4}, rng);
             Tensor w = rand_uniform({3, 2, 4}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, expand_axis(a, 1, 2))); }, {a}};
         }},
        {"embed_rows",
         [](Rng& rng) -> CheckFactory {
             Tensor table = rand_uniform({6, 4}, rng);
             std::vector<int> ids = {1, 3, 3, 0};
             Tensor w = rand_uniform({4, 4}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, embed_rows(table, ids))); }, {table}};
         }},
        {"extract_patches",
         [](Rng& rng) -> CheckFactory {
             Tensor img = rand_uniform({2, 4, 4, 3}, rng);
             Tensor w = rand_uniform({2, 4, 12}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, extract_patches(img, 2))); }, {img}};
         }},
        {"avg_pool_hw",
         [](Rng& rng) -> CheckFactory {
             Tensor img = rand_uniform({2, 4, 4, 3}, rng);
             Tensor w = rand_uniform({2, 2, 2, 3}, rng);
             w.set_requires_grad(false);
             return {[=] { return sum_all(mul(w, avg_pool_hw(img, 2))); }, {img}};
         }},
    };
    return suite;
}

double run_op_checks(int trials, uint64_t seed,
                     std::vector<std::pair<std::string, double>>* out) {
    double worst = 0.0;
    for (const auto& check : op_check_suite()) {
        double op_worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            Rng rng(derive_seed(seed, fnv1a64(check.name.data(), check.name.size()) + t));
            auto [f, inputs] = check.make(rng);
            op_worst = std::max(op_worst, grad_check(f, inputs));
        }
        if (out) out->emplace_back(check.name, op_worst);
        worst = std::max(worst, op_worst);
    }
    return worst;
}

}  // namespace wog
