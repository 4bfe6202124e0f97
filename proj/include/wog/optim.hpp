#pragma once

#include <vector>

#include "wog/nn.hpp"

namespace wog {

// Adam with a flat learning rate. Frozen parameters (requires_grad == false)
// are skipped entirely: no state update, no data change.
class Adam {
  public:
    explicit Adam(std::vector<Parameter> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

    // element count over currently trainable (non-frozen) parameters
    int64_t trainable_elements() const;

    const std::vector<Parameter>& params() const { return params_; }

  private:
    std::vector<Parameter> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace wog
