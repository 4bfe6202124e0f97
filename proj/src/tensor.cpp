#include "wog/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace wog {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

static void check_shape(const Shape& s, const char* op) {
    for (int d : s) {
        if (d <= 0) throw ShapeError(std::string(op) + ": non-positive extent in " + shape_str(s));
    }
}

[[noreturn]] static void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// ---------------------------------------------------------------- grad mode

static thread_local bool g_grad_enabled = true;

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    check_shape(s, "zeros");
    auto n = std::make_shared<TensorNode>();
    n->shape = s;
    n->data.assign(static_cast<size_t>(shape_numel(s)), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(const Shape& s, double value, bool requires_grad) {
    Tensor t = zeros(s, requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> data, bool requires_grad) {
    check_shape(s, "from_data");
    if (static_cast<int64_t>(data.size()) != shape_numel(s))
        throw ShapeError("from_data: " + std::to_string(data.size()) + " values for shape " +
                         shape_str(s));
    auto n = std::make_shared<TensorNode>();
    n->shape = s;
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::randn(const Shape& s, Rng& rng, double stdev, bool requires_grad) {
    Tensor t = zeros(s, requires_grad);
    for (auto& v : t.data()) v = rng.normal() * stdev;
    return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }
int Tensor::dim(int axis) const { return node_->shape.at(static_cast<size_t>(axis)); }
int64_t Tensor::numel() const { return node_->numel(); }
std::vector<double>& Tensor::data() { return node_->data; }
const std::vector<double>& Tensor::data() const { return node_->data; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool v) { node_->requires_grad = v; }

std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor make_node(Shape shape, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward_fn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data.assign(static_cast<size_t>(shape_numel(n->shape)), 0.0);
    if (g_grad_enabled) {
        for (const auto& p : parents) {
            if (p.requires_grad()) {
                n->requires_grad = true;
                break;
            }
        }
        if (n->requires_grad) {
            n->parents = std::move(parents);
            n->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(n));
}

// ---------------------------------------------------------------- kernels

// c[m,n] += a[m,k] * b[k,n]
void mm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// da[m,k] += g[m,n] * b[k,n]^T
void mm_acc_nt(const double* g, const double* b, double* da, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* gi = g + static_cast<size_t>(i) * n;
        double* di = da + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* bp = b + static_cast<size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += gi[j] * bp[j];
            di[p] += acc;
        }
    }
}

// db[k,n] += a[m,k]^T * g[m,n]
void mm_acc_tn(const double* a, const double* g, double* db, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        const double* gi = g + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            double* dp = db + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) dp[j] += av * gi[j];
        }
    }
}

// ---------------------------------------------------------------- elementwise

static void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out = make_node(a.shape(), {a, b}, [](TensorNode& self) {
        const auto& g = self.grad;
        for (int s = 0; s < 2; ++s) {
            auto* p = self.parents[static_cast<size_t>(s)].node();
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
        }
    });
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out = make_node(a.shape(), {a, b}, [](TensorNode& self) {
        const auto& g = self.grad;
        auto* pa = self.parents[0].node();
        auto* pb = self.parents[1].node();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) pb->grad[i] -= g[i];
        }
    });
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = make_node(a.shape(), {a, b}, [](TensorNode& self) {
        const auto& g = self.grad;
        auto* pa = self.parents[0].node();
        auto* pb = self.parents[1].node();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) pb->grad[i] += g[i] * pa->data[i];
        }
    });
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = make_node(a.shape(), {a}, [c](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += c * self.grad[i];
    });
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = c * av[i];
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = make_node(a.shape(), {a}, [](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    });
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + c;
    return out;
}

// ---------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    int ra = a.rank(), rb = b.rank();
    if (!((ra == 2 && rb == 2) || (ra == 3 && rb == 2) || (ra == 3 && rb == 3)))
        throw ShapeError("matmul: unsupported ranks " + shape_str(sa) + " x " + shape_str(sb));

    int batch = (ra == 3) ? sa[0] : 1;
    int m = sa[ra - 2], k = sa[ra - 1];
    int kb = sb[rb - 2], n = sb[rb - 1];
    if (k != kb) shape_fail("matmul", sa, sb);
    if (rb == 3 && sb[0] != batch) shape_fail("matmul", sa, sb);

    Shape os = (ra == 3) ? Shape{batch, m, n} : Shape{m, n};
    const bool b_shared = (rb == 2);

    Tensor out = make_node(os, {a, b}, [batch, m, k, n, b_shared](TensorNode& self) {
        auto* pa = self.parents[0].node();
        auto* pb = self.parents[1].node();
        const double* g = self.grad.data();
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (int bi = 0; bi < batch; ++bi) {
            const double* gb = g + static_cast<size_t>(bi) * m * n;
            const double* av = pa->data.data() + static_cast<size_t>(bi) * m * k;
            const double* bv = pb->data.data() + (b_shared ? 0 : static_cast<size_t>(bi) * k * n);
            if (pa->requires_grad)
                mm_acc_nt(gb, bv, pa->grad.data() + static_cast<size_t>(bi) * m * k, m, n, k);
            if (pb->requires_grad)
                mm_acc_tn(av, gb,
                          pb->grad.data() + (b_shared ? 0 : static_cast<size_t>(bi) * k * n), m, k,
                          n);
        }
    });

    const double* av = a.data().data();
    const double* bv = b.data().data();
    double* ov = out.data().data();
    for (int bi = 0; bi < batch; ++bi) {
        mm_acc(av + static_cast<size_t>(bi) * m * k,
               bv + (b_shared ? 0 : static_cast<size_t>(bi) * k * n),
               ov + static_cast<size_t>(bi) * m * n, m, k, n);
    }
    return out;
}

// ---------------------------------------------------------------- movement

namespace {

// strided copy helpers for transpose; shapes padded to rank 6
struct Strides6 {
    int dim[6] = {1, 1, 1, 1, 1, 1};
    int64_t stride[6] = {0, 0, 0, 0, 0, 0};
};

Strides6 make_strides(const Shape& out_shape, const std::vector<int64_t>& src_strides) {
    Strides6 s;
    int off = 6 - static_cast<int>(out_shape.size());
    for (size_t i = 0; i < out_shape.size(); ++i) {
        s.dim[off + static_cast<int>(i)] = out_shape[i];
        s.stride[off + static_cast<int>(i)] = src_strides[i];
    }
    return s;
}

// dst (contiguous over out_shape) <- src gathered through strides
void gather_copy(double* dst, const double* src, const Strides6& s) {
    int64_t idx = 0;
    for (int i0 = 0; i0 < s.dim[0]; ++i0)
        for (int i1 = 0; i1 < s.dim[1]; ++i1)
            for (int i2 = 0; i2 < s.dim[2]; ++i2)
                for (int i3 = 0; i3 < s.dim[3]; ++i3)
                    for (int i4 = 0; i4 < s.dim[4]; ++i4) {
                        const double* p = src + i0 * s.stride[0] + i1 * s.stride[1] +
                                          i2 * s.stride[2] + i3 * s.stride[3] + i4 * s.stride[4];
                        const int64_t st = s.stride[5];
                        for (int i5 = 0; i5 < s.dim[5]; ++i5) dst[idx++] = p[i5 * st];
                    }
}

// src (contiguous over out_shape) scattered-added through strides into dst
void scatter_add(double* dst, const double* src, const Strides6& s) {
    int64_t idx = 0;
    for (int i0 = 0; i0 < s.dim[0]; ++i0)
        for (int i1 = 0; i1 < s.dim[1]; ++i1)
            for (int i2 = 0; i2 < s.dim[2]; ++i2)
                for (int i3 = 0; i3 < s.dim[3]; ++i3)
                    for (int i4 = 0; i4 < s.dim[4]; ++i4) {
                        double* p = dst + i0 * s.stride[0] + i1 * s.stride[1] + i2 * s.stride[2] +
                                    i3 * s.stride[3] + i4 * s.stride[4];
                        const int64_t st = s.stride[5];
                        for (int i5 = 0; i5 < s.dim[5]; ++i5) p[i5 * st] += src[idx++];
                    }
}

std::vector<int64_t> contiguous_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

}  // namespace

Tensor transpose(const Tensor& a, int ax0, int ax1) {
    const Shape& s = a.shape();
    int r = a.rank();
    if (r > 6) throw ShapeError("transpose: rank > 6 unsupported");
    if (ax0 < 0 || ax1 < 0 || ax0 >= r || ax1 >= r)
        throw ShapeError("transpose: axis out of range for " + shape_str(s));
    Shape os = s;
    std::swap(os[static_cast<size_t>(ax0)], os[static_cast<size_t>(ax1)]);
    auto src_st = contiguous_strides(s);
    std::swap(src_st[static_cast<size_t>(ax0)], src_st[static_cast<size_t>(ax1)]);
    Strides6 plan = make_strides(os, src_st);

    Tensor out = make_node(os, {a}, [plan](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        scatter_add(p->grad.data(), self.grad.data(), plan);
    });
    gather_copy(out.data().data(), a.data().data(), plan);
    return out;
}

Tensor reshape(const Tensor& a, const Shape& s) {
    check_shape(s, "reshape");
    if (shape_numel(s) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(s));
    Tensor out = make_node(s, {a}, [](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    });
    out.data() = a.data();
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    int r = parts[0].rank();
    if (axis < 0 || axis >= r) throw ShapeError("concat: axis out of range");
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != r) shape_fail("concat", s0, p.shape());
        for (int i = 0; i < r; ++i) {
            if (i != axis && p.shape()[static_cast<size_t>(i)] != s0[static_cast<size_t>(i)])
                shape_fail("concat", s0, p.shape());
        }
        total += p.dim(axis);
    }
    Shape os = s0;
    os[static_cast<size_t>(axis)] = total;

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s0[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; ++i) inner *= s0[static_cast<size_t>(i)];

    std::vector<int> spans;
    spans.reserve(parts.size());
    for (const auto& p : parts) spans.push_back(p.dim(axis));

    Tensor out = make_node(os, parts, [outer, inner, total, spans](TensorNode& self) {
        const double* g = self.grad.data();
        int offset = 0;
        for (size_t pi = 0; pi < self.parents.size(); ++pi) {
            auto* p = self.parents[pi].node();
            const int span = spans[pi];
            if (p->requires_grad) {
                p->ensure_grad();
                for (int64_t o = 0; o < outer; ++o) {
                    const double* gsrc = g + (o * total + offset) * inner;
                    double* gdst = p->grad.data() + o * span * inner;
                    for (int64_t i = 0; i < span * inner; ++i) gdst[i] += gsrc[i];
                }
            }
            offset += span;
        }
    });

    double* ov = out.data().data();
    int offset = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const double* src = parts[pi].data().data();
        const int span = spans[pi];
        for (int64_t o = 0; o < outer; ++o) {
            std::copy(src + o * span * inner, src + (o + 1) * span * inner,
                      ov + (o * total + offset) * inner);
        }
        offset += span;
    }
    return out;
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
    const Shape& s = a.shape();
    int r = a.rank();
    if (axis < 0 || axis >= r) throw ShapeError("slice: axis out of range");
    int extent = s[static_cast<size_t>(axis)];
    if (start < 0 || len <= 0 || start + len > extent)
        throw ShapeError("slice: [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") out of bounds for axis extent " + std::to_string(extent));
    Shape os = s;
    os[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; ++i) inner *= s[static_cast<size_t>(i)];

    Tensor out = make_node(os, {a}, [outer, inner, extent, start, len](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double* g = self.grad.data();
        for (int64_t o = 0; o < outer; ++o) {
            double* dst = p->grad.data() + (o * extent + start) * inner;
            const double* src = g + o * len * inner;
            for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
    const double* av = a.data().data();
    double* ov = out.data().data();
    for (int64_t o = 0; o < outer; ++o) {
        std::copy(av + (o * extent + start) * inner, av + (o * extent + start + len) * inner,
                  ov + o * len * inner);
    }
    return out;
}

// ---------------------------------------------------------------- nonlinear

Tensor softmax_lastdim(const Tensor& a) {
    const Shape& s = a.shape();
    int d = s.back();
    int64_t rows = a.numel() / d;

    Tensor out = make_node(s, {a}, [rows, d](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = self.data.data() + r * d;
            const double* g = self.grad.data() + r * d;
            double* dx = p->grad.data() + r * d;
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += y[j] * g[j];
            for (int j = 0; j < d; ++j) dx[j] += y[j] * (g[j] - dot);
        }
    });

    const double* x = a.data().data();
    double* y = out.data().data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double* yr = y + r * d;
        double mx = xr[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j < d; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < d; ++j) yr[j] *= inv;
    }
    return out;
}

Tensor layer_norm_lastdim(const Tensor& a, const Tensor& gain, const Tensor& shift, double eps) {
    const Shape& s = a.shape();
    int d = s.back();
    if (gain.rank() != 1 || gain.dim(0) != d) shape_fail("layer_norm: gain", s, gain.shape());
    if (shift.rank() != 1 || shift.dim(0) != d) shape_fail("layer_norm: shift", s, shift.shape());
    int64_t rows = a.numel() / d;

    auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(rows) * 2);
    const double* x = a.data().data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = xr[j] - mean;
            var += c * c;
        }
        var /= d;
        (*stats)[static_cast<size_t>(r) * 2] = mean;
        (*stats)[static_cast<size_t>(r) * 2 + 1] = 1.0 / std::sqrt(var + eps);
    }

    Tensor out = make_node(s, {a, gain, shift}, [rows, d, stats](TensorNode& self) {
        auto* px = self.parents[0].node();
        auto* pg = self.parents[1].node();
        auto* ps = self.parents[2].node();
        if (px->requires_grad) px->ensure_grad();
        if (pg->requires_grad) pg->ensure_grad();
        if (ps->requires_grad) ps->ensure_grad();
        std::vector<double> xhat(static_cast<size_t>(d));
        for (int64_t r = 0; r < rows; ++r) {
            const double mean = (*stats)[static_cast<size_t>(r) * 2];
            const double rstd = (*stats)[static_cast<size_t>(r) * 2 + 1];
            const double* xr = px->data.data() + r * d;
            const double* g = self.grad.data() + r * d;
            for (int j = 0; j < d; ++j) xhat[static_cast<size_t>(j)] = (xr[j] - mean) * rstd;
            if (pg->requires_grad)
                for (int j = 0; j < d; ++j) pg->grad[static_cast<size_t>(j)] += g[j] * xhat[static_cast<size_t>(j)];
            if (ps->requires_grad)
                for (int j = 0; j < d; ++j) ps->grad[static_cast<size_t>(j)] += g[j];
            if (px->requires_grad) {
                double m1 = 0.0, m2 = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dxh = g[j] * pg->data[static_cast<size_t>(j)];
                    m1 += dxh;
                    m2 += dxh * xhat[static_cast<size_t>(j)];
                }
                m1 /= d;
                m2 /= d;
                double* dx = px->grad.data() + r * d;
                for (int j = 0; j < d; ++j) {
                    const double dxh = g[j] * pg->data[static_cast<size_t>(j)];
                    dx[j] += rstd * (dxh - m1 - xhat[static_cast<size_t>(j)] * m2);
                }
            }
        }
    });

    const double* gv = gain.data().data();
    const double* sv = shift.data().data();
    double* y = out.data().data();
    for (int64_t r = 0; r < rows; ++r) {
        const double mean = (*stats)[static_cast<size_t>(r) * 2];
        const double rstd = (*stats)[static_cast<size_t>(r) * 2 + 1];
        const double* xr = x + r * d;
        double* yr = y + r * d;
        for (int j = 0; j < d; ++j) yr[j] = (xr[j] - mean) * rstd * gv[j] + sv[j];
    }
    return out;
}

Tensor silu(const Tensor& a) {
    Tensor out = make_node(a.shape(), {a}, [](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const double x = p->data[i];
            const double sig = 1.0 / (1.0 + std::exp(-x));
            p->grad[i] += self.grad[i] * sig * (1.0 + x * (1.0 - sig));
        }
    });
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] / (1.0 + std::exp(-av[i]));
    return out;
}

// ---------------------------------------------------------------- reductions

Tensor sum_all(const Tensor& a) {
    Tensor out = make_node({1}, {a}, [](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double g = self.grad[0];
        for (auto& v : p->grad) v += g;
    });
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out.data()[0] = acc;
    return out;
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) {
    require_same_shape("mse", a, b);
    const int64_t n = a.numel();
    Tensor out = make_node({1}, {a, b}, [n](TensorNode& self) {
        auto* pa = self.parents[0].node();
        auto* pb = self.parents[1].node();
        const double g = self.grad[0] * 2.0 / static_cast<double>(n);
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (int64_t i = 0; i < n; ++i) {
            const double diff = pa->data[static_cast<size_t>(i)] - pb->data[static_cast<size_t>(i)];
            if (pa->requires_grad) pa->grad[static_cast<size_t>(i)] += g * diff;
            if (pb->requires_grad) pb->grad[static_cast<size_t>(i)] -= g * diff;
        }
    });
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double diff = a.data()[static_cast<size_t>(i)] - b.data()[static_cast<size_t>(i)];
        acc += diff * diff;
    }
    out.data()[0] = acc / static_cast<double>(n);
    return out;
}

Tensor cosine_rowwise(const Tensor& a, const Tensor& b, double eps) {
    require_same_shape("cosine_rowwise", a, b);
    if (a.rank() != 2) throw ShapeError("cosine_rowwise: expected 2-D, got " + shape_str(a.shape()));
    const int rows = a.dim(0), d = a.dim(1);

    Tensor out = make_node({rows}, {a, b}, [rows, d, eps](TensorNode& self) {
        auto* pa = self.parents[0].node();
        auto* pb = self.parents[1].node();
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* av = pa->data.data() + static_cast<size_t>(r) * d;
            const double* bv = pb->data.data() + static_cast<size_t>(r) * d;
            double na2 = 0.0, nb2 = 0.0, dot = 0.0;
            for (int j = 0; j < d; ++j) {
                na2 += av[j] * av[j];
                nb2 += bv[j] * bv[j];
                dot += av[j] * bv[j];
            }
            const double na = std::max(std::sqrt(na2), eps);
            const double nb = std::max(std::sqrt(nb2), eps);
            const double c = dot / (na * nb);
            const double g = self.grad[static_cast<size_t>(r)];
            if (pa->requires_grad) {
                double* da = pa->grad.data() + static_cast<size_t>(r) * d;
                for (int j = 0; j < d; ++j) da[j] += g * (bv[j] / (na * nb) - c * av[j] / (na * na));
            }
            if (pb->requires_grad) {
                double* db = pb->grad.data() + static_cast<size_t>(r) * d;
                for (int j = 0; j < d; ++j) db[j] += g * (av[j] / (na * nb) - c * bv[j] / (nb * nb));
            }
        }
    });

    for (int r = 0; r < rows; ++r) {
        const double* av = a.data().data() + static_cast<size_t>(r) * d;
        const double* bv = b.data().data() + static_cast<size_t>(r) * d;
        double na2 = 0.0, nb2 = 0.0, dot = 0.0;
        for (int j = 0; j < d; ++j) {
            na2 += av[j] * av[j];
            nb2 += bv[j] * bv[j];
            dot += av[j] * bv[j];
        }
        out.data()[static_cast<size_t>(r)] =
            dot / (std::max(std::sqrt(na2), eps) * std::max(std::sqrt(nb2), eps));
    }
    return out;
}

Tensor sinusoidal_embedding(const Tensor& taus, int dim) {
    if (taus.rank() != 1) throw ShapeError("sinusoidal_embedding: taus must be 1-D");
    if (dim < 2 || dim % 2 != 0) throw ShapeError("sinusoidal_embedding: dim must be even, >= 2");
    const int b = taus.dim(0);
    const int half = dim / 2;
    const double tau_scale = 1000.0;

    std::vector<double> freqs(static_cast<size_t>(half));
    for (int i = 0; i < half; ++i)
        freqs[static_cast<size_t>(i)] = std::exp(-std::log(10000.0) * i / half);

    Tensor out = make_node({b, dim}, {taus}, [b, half, dim, freqs, tau_scale](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < b; ++i) {
            const double t = p->data[static_cast<size_t>(i)] * tau_scale;
            const double* g = self.grad.data() + static_cast<size_t>(i) * dim;
            double acc = 0.0;
            for (int j = 0; j < half; ++j) {
                const double f = freqs[static_cast<size_t>(j)];
                acc += g[j] * std::cos(t * f) * f;
                acc -= g[half + j] * std::sin(t * f) * f;
            }
            p->grad[static_cast<size_t>(i)] += acc * tau_scale;
        }
    });

    for (int i = 0; i < b; ++i) {
        const double t = taus.data()[static_cast<size_t>(i)] * tau_scale;
        double* o = out.data().data() + static_cast<size_t>(i) * dim;
        for (int j = 0; j < half; ++j) {
            const double f = freqs[static_cast<size_t>(j)];
            o[j] = std::sin(t * f);
            o[half + j] = std::cos(t * f);
        }
    }
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    const int d = x.shape().back();
    if (bias.rank() != 1 || bias.dim(0) != d) shape_fail("add_bias", x.shape(), bias.shape());
    const int64_t rows = x.numel() / d;
    Tensor out = make_node(x.shape(), {x, bias}, [rows, d](TensorNode& self) {
        auto* px = self.parents[0].node();
        auto* pb = self.parents[1].node();
        if (px->requires_grad) {
            px->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const double* g = self.grad.data() + r * d;
                for (int j = 0; j < d; ++j) pb->grad[static_cast<size_t>(j)] += g[j];
            }
        }
    });
    const double* xv = x.data().data();
    const double* bv = bias.data().data();
    double* ov = out.data().data();
    for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) ov[r * d + j] = xv[r * d + j] + bv[j];
    return out;
}

Tensor expand_axis(const Tensor& x, int axis, int n) {
    const Shape& s = x.shape();
    int r = x.rank();
    if (axis < 0 || axis > r) throw ShapeError("expand_axis: axis out of range");
    if (n <= 0) throw ShapeError("expand_axis: n must be positive");
    Shape os;
    os.reserve(static_cast<size_t>(r) + 1);
    for (int i = 0; i < axis; ++i) os.push_back(s[static_cast<size_t>(i)]);
    os.push_back(n);
    for (int i = axis; i < r; ++i) os.push_back(s[static_cast<size_t>(i)]);

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (int i = axis; i < r; ++i) inner *= s[static_cast<size_t>(i)];

    Tensor out = make_node(os, {x}, [outer, inner, n](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double* g = self.grad.data();
        for (int64_t o = 0; o < outer; ++o) {
            double* dst = p->grad.data() + o * inner;
            for (int c = 0; c < n; ++c) {
                const double* src = g + (o * n + c) * inner;
                for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
        }
    });
    const double* xv = x.data().data();
    double* ov = out.data().data();
    for (int64_t o = 0; o < outer; ++o)
        for (int c = 0; c < n; ++c)
            std::copy(xv + o * inner, xv + (o + 1) * inner, ov + (o * n + c) * inner);
    return out;
}

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeError("embed_rows: table must be 2-D");
    const int v = table.dim(0), d = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= v)
            throw ValueError("embed_rows: token id " + std::to_string(id) +
                             " outside table of size " + std::to_string(v));
    }
    const int n = static_cast<int>(ids.size());
    Tensor out = make_node({n, d}, {table}, [ids, d](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            const double* g = self.grad.data() + i * static_cast<size_t>(d);
            double* dst = p->grad.data() + static_cast<size_t>(ids[i]) * d;
            for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
    });
    for (size_t i = 0; i < ids.size(); ++i) {
        const double* src = table.data().data() + static_cast<size_t>(ids[i]) * d;
        std::copy(src, src + d, out.data().data() + i * static_cast<size_t>(d));
    }
    return out;
}

Tensor extract_patches(const Tensor& img, int p) {
    if (img.rank() != 4) throw ShapeError("extract_patches: expected [B,H,W,C]");
    const int b = img.dim(0), h = img.dim(1), w = img.dim(2), c = img.dim(3);
    if (p <= 0 || h % p != 0 || w % p != 0)
        throw ShapeError("extract_patches: patch " + std::to_string(p) + " does not tile " +
                         shape_str(img.shape()));
    const int gh = h / p, gw = w / p;
    const int np = gh * gw, pd = p * p * c;

    auto map_copy = [b, h, w, c, p, gh, gw, np, pd](double* dst, const double* src, bool add) {
        for (int bi = 0; bi < b; ++bi) {
            for (int gy = 0; gy < gh; ++gy)
                for (int gx = 0; gx < gw; ++gx) {
                    const int patch = gy * gw + gx;
                    for (int py = 0; py < p; ++py) {
                        const double* s =
                            src + ((static_cast<int64_t>(bi) * h + gy * p + py) * w + gx * p) * c;
                        double* o = dst + (static_cast<int64_t>(bi) * np + patch) * pd +
                                    static_cast<int64_t>(py) * p * c;
                        if (add)
                            for (int i = 0; i < p * c; ++i) o[i] += s[i];
                        else
                            std::copy(s, s + p * c, o);
                    }
                }
        }
    };

    Tensor out = make_node({b, np, pd}, {img}, [b, h, w, c, p, gh, gw, np, pd](TensorNode& self) {
        auto* par = self.parents[0].node();
        if (!par->requires_grad) return;
        par->ensure_grad();
        // inverse map: scatter-add patch grads back to image layout
        for (int bi = 0; bi < b; ++bi)
            for (int gy = 0; gy < gh; ++gy)
                for (int gx = 0; gx < gw; ++gx) {
                    const int patch = gy * gw + gx;
                    for (int py = 0; py < p; ++py) {
                        double* d =
                            par->grad.data() +
                            ((static_cast<int64_t>(bi) * h + gy * p + py) * w + gx * p) * c;
                        const double* g = self.grad.data() +
                                          (static_cast<int64_t>(bi) * np + patch) * pd +
                                          static_cast<int64_t>(py) * p * c;
                        for (int i = 0; i < p * c; ++i) d[i] += g[i];
                    }
                }
    });
    map_copy(out.data().data(), img.data().data(), false);
    return out;
}

Tensor avg_pool_hw(const Tensor& img, int k) {
    if (img.rank() != 4) throw ShapeError("avg_pool_hw: expected [B,H,W,C]");
    const int b = img.dim(0), h = img.dim(1), w = img.dim(2), c = img.dim(3);
    if (k <= 0 || h % k != 0 || w % k != 0)
        throw ShapeError("avg_pool_hw: kernel " + std::to_string(k) + " does not tile " +
                         shape_str(img.shape()));
    const int oh = h / k, ow = w / k;
    const double inv = 1.0 / (k * k);

    Tensor out = make_node({b, oh, ow, c}, {img}, [b, h, w, c, k, oh, ow, inv](TensorNode& self) {
        auto* p = self.parents[0].node();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int bi = 0; bi < b; ++bi)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double* g =
                        self.grad.data() + ((static_cast<int64_t>(bi) * oh + oy) * ow + ox) * c;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            double* d = p->grad.data() +
                                        ((static_cast<int64_t>(bi) * h + oy * k + ky) * w +
                                         ox * k + kx) *
                                            c;
                            for (int ci = 0; ci < c; ++ci) d[ci] += g[ci] * inv;
                        }
                }
    });

    const double* src = img.data().data();
    double* dst = out.data().data();
    for (int bi = 0; bi < b; ++bi)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* o = dst + ((static_cast<int64_t>(bi) * oh + oy) * ow + ox) * c;
                for (int ci = 0; ci < c; ++ci) o[ci] = 0.0;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const double* s =
                            src +
                            ((static_cast<int64_t>(bi) * h + oy * k + ky) * w + ox * k + kx) * c;
                        for (int ci = 0; ci < c; ++ci) o[ci] += s[ci];
                    }
                for (int ci = 0; ci < c; ++ci) o[ci] *= inv;
            }
    return out;
}

// ---------------------------------------------------------------- backward

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ValueError("backward: undefined tensor");
    if (loss.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));

    // reverse topological order via iterative DFS
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    if (loss.node()->requires_grad) stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next].node();
            ++next;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

bool all_finite(const Tensor& t) {
    for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace wog
