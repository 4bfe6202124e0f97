#pragma once

// Reverse-mode autodiff tensor core. Dense row-major double tensors forming a
// DAG; backward() accumulates vector-Jacobian products into leaf gradients.
//
// Contracts:
//   - no implicit broadcasting: elementwise binary ops require equal shapes;
//     the only broadcast-like ops are the explicit add_bias / expand_axis.
//   - gradients accumulate until reset (zero_grad / Optimizer::zero_grad).
//   - shape violations throw ShapeError naming the op and both shapes.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "wog/common.hpp"

namespace wog {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode;

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double value, bool requires_grad = false);
    static Tensor from_data(const Shape& s, std::vector<double> data, bool requires_grad = false);
    static Tensor randn(const Shape& s, Rng& rng, double stdev = 1.0, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    int dim(int axis) const;
    int64_t numel() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;
    double item() const;  // scalar tensors only

    bool requires_grad() const;
    void set_requires_grad(bool v);

    // Gradient accumulator, allocated (zero) on first access.
    std::vector<double>& grad();
    void zero_grad();

    TensorNode* node() const { return node_.get(); }

  private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;
    friend Tensor make_node(Shape shape, std::vector<Tensor> parents,
                            std::function<void(TensorNode&)> backward_fn);
};

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until touched
    bool requires_grad = false;
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Thread-local switch: while disabled, ops record no parents/backward_fn.
// Used on inference and frozen-feature paths.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// ---------------------------------------------------------------- ops

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

// [M,K]x[K,N]; [B,M,K]x[K,N]; [B,M,K]x[B,K,N]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a, int ax0, int ax1);
Tensor reshape(const Tensor& a, const Shape& s);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);

Tensor softmax_lastdim(const Tensor& a);
// gain/shift are 1-D [d]; normalization is over the last axis.
Tensor layer_norm_lastdim(const Tensor& a, const Tensor& gain, const Tensor& shift,
                          double eps = 1e-5);
Tensor silu(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

// rows of a 2-D [N,D] pair -> [N] cosines
Tensor cosine_rowwise(const Tensor& a, const Tensor& b, double eps = 1e-12);

// taus [B] in [0,1] -> [B,dim]; phases use taus scaled by 1000.
Tensor sinusoidal_embedding(const Tensor& taus, int dim);

// bias [d] added to each trailing row of x [..., d]
Tensor add_bias(const Tensor& x, const Tensor& bias);
// insert a new axis at `axis`, repeated n times
Tensor expand_axis(const Tensor& x, int axis, int n);
// rows of table [V,d] gathered by ids -> [ids.size(), d]
Tensor embed_rows(const Tensor& table, const std::vector<int>& ids);
// [B,H,W,C] -> [B,(H/p)*(W/p), p*p*C], patches in row-major scan order
Tensor extract_patches(const Tensor& img, int p);
// [B,H,W,C] -> [B,H/k,W/k,C] mean pooling
Tensor avg_pool_hw(const Tensor& img, int k);

// ---------------------------------------------------------------- engine

// loss must be scalar; accumulates dLoss/dX into every reachable
// requires_grad tensor. Repeated calls accumulate until grads are reset.
void backward(const Tensor& loss);

bool all_finite(const Tensor& t);

// raw kernels (exposed for reuse in VJPs and tests)
void mm_acc(const double* a, const double* b, double* c, int m, int k, int n);
void mm_acc_nt(const double* g, const double* b, double* da, int m, int n, int k);
void mm_acc_tn(const double* a, const double* g, double* db, int m, int k, int n);

}  // namespace wog
