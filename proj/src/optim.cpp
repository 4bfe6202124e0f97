#include "wog/optim.hpp"

#include <cmath>

namespace wog {

Adam::Adam(std::vector<Parameter> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        const auto n = params_[i].tensor.data().size();
        m_[i].assign(n, 0.0);
        v_[i].assign(n, 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        if (p.frozen()) continue;
        auto& data = p.tensor.data();
        auto& grad = p.tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < data.size(); ++j) {
            const double g = grad[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

int64_t Adam::trainable_elements() const {
    int64_t n = 0;
    for (const auto& p : params_)
        if (!p.frozen()) n += p.tensor.numel();
    return n;
}

}  // namespace wog
