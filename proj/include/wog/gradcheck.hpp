#pragma once

// Central-difference gradient oracle, plus the registered-op check suite used
// by tests, the acceptance run, and the `gradcheck` CLI subcommand.

#include <functional>
#include <string>
#include <vector>

#include "wog/tensor.hpp"

namespace wog {

// f must rebuild its graph from scratch on every call (the inputs' data may
// be perturbed between calls). Returns max over checked elements of
// |analytic - central difference| / max(1, |analytic|).
// max_elements == 0 checks all elements; otherwise a seeded subset per input.
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                  double eps = 1e-5, int max_elements = 0, uint64_t subset_seed = 0);

struct OpCheck {
    std::string name;
    // builds fresh random inputs for one trial and returns (scalar fn, inputs)
    std::function<std::pair<std::function<Tensor()>, std::vector<Tensor>>(Rng&)> make;
};

// One entry per registered differentiable op.
const std::vector<OpCheck>& op_check_suite();

// Runs every op check over `trials` random inputs; returns the worst relative
// error across the suite and reports per-op maxima through `out` when given.
double run_op_checks(int trials, uint64_t seed,
                     std::vector<std::pair<std::string, double>>* out = nullptr);

}  // namespace wog
