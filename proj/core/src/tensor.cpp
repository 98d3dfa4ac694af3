// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include <fstream>
#include "egopose/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <cblas.h>

extern "C" void openblas_set_num_threads(int);

namespace egopose::ad {

namespace {

std::atomic<uint64_t> g_node_counter{1};

struct BlasInit {
    BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit g_blas_init;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const char* why) {
    throw std::invalid_argument(std::string(op) + ": bad shape " + shape_str(a) + " (" +
                                why + ")");
}

size_t numel_of(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

std::shared_ptr<Node> make_node(Shape s, const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(s);
    n->val.assign(numel_of(n->shape), 0.0);
    n->op = op;
    n->id = g_node_counter.fetch_add(1, std::memory_order_relaxed);
    return n;
}

// Records the op on the tape only when some input carries gradient.
void record(const std::shared_ptr<Node>& out, std::initializer_list<const Tensor*> inputs,
            std::function<void(Node&)> bwd) {
    bool rg = false;
    for (const Tensor* t : inputs) rg = rg || t->requires_grad();
    if (!rg) return;
    out->requires_grad = true;
    for (const Tensor* t : inputs) out->parents.push_back(t->node());
    out->backward = std::move(bwd);
}

// Broadcast patterns for binary elementwise ops.
enum class Bcast { same, scalar_b, row_b, col_b };

Bcast bcast_pattern(const char* op, const Shape& a, const Shape& b) {
    if (a == b) return Bcast::same;
    if (numel_of(b) == 1) return Bcast::scalar_b;
    if (a.size() == 2 && b.size() == 1 && b[0] == a[1]) return Bcast::row_b;
    if (a.size() == 2 && b.size() == 2 && b[0] == a[0] && b[1] == 1) return Bcast::col_b;
    shape_error(op, a, b);
}

size_t bcast_index(Bcast p, size_t i, size_t cols) {
    switch (p) {
        case Bcast::same: return i;
        case Bcast::scalar_b: return 0;
        case Bcast::row_b: return i % cols;
        case Bcast::col_b: return i / cols;
    }
    return 0;
}

}  // namespace

// ---- Tensor basics ----

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    auto n = make_node(s, "leaf");
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(const Shape& s, double v, bool requires_grad) {
    Tensor t = zeros(s, requires_grad);
    std::fill(t.value().begin(), t.value().end(), v);
    return t;
}

Tensor Tensor::from(const Shape& s, std::vector<double> data, bool requires_grad) {
    if (data.size() != numel_of(s))
        shape_error("from", s, "data length does not match shape");
    auto n = make_node(s, "leaf");
    n->val = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return full({1}, v, requires_grad); }

Tensor Tensor::randn(const Shape& s, RngStream& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(s, requires_grad);
    for (double& x : t.value()) x = rng.normal() * stddev;
    return t;
}

size_t Tensor::rows() const {
    if (ndim() != 2) shape_error("rows", shape(), "expected 2-D");
    return shape()[0];
}

size_t Tensor::cols() const {
    if (ndim() != 2) shape_error("cols", shape(), "expected 2-D");
    return shape()[1];
}

std::vector<double>& Tensor::grad() {
    n_->ensure_grad();
    return n_->grad;
}

const std::vector<double>& Tensor::grad() const {
    n_->ensure_grad();
    return n_->grad;
}

void Tensor::zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) shape_error("item", shape(), "expected scalar");
    return n_->val[0];
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        shape_error("matmul", a.shape(), b.shape());
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_node({m, n}, "matmul");

    auto gemm = [](size_t M, size_t N, size_t K, const double* A, bool ta, const double* B,
                   bool tb, double* C, double beta) {
        if (M * N * K >= 16384) {
            cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
                        tb ? CblasTrans : CblasNoTrans, (int)M, (int)N, (int)K, 1.0, A,
                        (int)(ta ? M : K), B, (int)(tb ? K : N), beta, C, (int)N);
            return;
        }
        if (beta == 0.0) std::fill(C, C + M * N, 0.0);
        for (size_t i = 0; i < M; ++i)
            for (size_t kk = 0; kk < K; ++kk) {
                const double av = ta ? A[kk * M + i] : A[i * K + kk];
                const double* brow = tb ? nullptr : B + kk * N;
                double* crow = C + i * N;
                if (tb)
                    for (size_t j = 0; j < N; ++j) crow[j] += av * B[j * K + kk];
                else
                    for (size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
            }
    };

    gemm(m, n, k, a.value().data(), false, b.value().data(), false, out->val.data(), 0.0);

    auto an = a.node(), bn = b.node();
    record(out, {&a, &b}, [an, bn, m, n, k, gemm](Node& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            gemm(m, k, n, o.grad.data(), false, bn->val.data(), true, an->grad.data(), 1.0);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            gemm(k, n, m, an->val.data(), true, o.grad.data(), false, bn->grad.data(), 1.0);
        }
    });
    return Tensor(out);
}

namespace {

template <class Fwd, class BwdA, class BwdB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, BwdA dfa,
                 BwdB dfb) {
    const Bcast p = bcast_pattern(name, a.shape(), b.shape());
    const size_t cols = a.ndim() == 2 ? a.shape()[1] : a.numel();
    auto out = make_node(a.shape(), name);
    const auto& av = a.value();
    const auto& bv = b.value();
    for (size_t i = 0; i < av.size(); ++i) out->val[i] = fwd(av[i], bv[bcast_index(p, i, cols)]);

    auto an = a.node(), bn = b.node();
    record(out, {&a, &b}, [an, bn, p, cols, dfa, dfb](Node& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                an->grad[i] += o.grad[i] * dfa(an->val[i], bn->val[bcast_index(p, i, cols)]);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                bn->grad[bcast_index(p, i, cols)] +=
                    o.grad[i] * dfb(an->val[i], bn->val[bcast_index(p, i, cols)]);
        }
    });
    return Tensor(out);
}

template <class Fwd, class Dfn>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Dfn dfn) {
    auto out = make_node(a.shape(), name);
    const auto& av = a.value();
    for (size_t i = 0; i < av.size(); ++i) out->val[i] = fwd(av[i]);
    auto an = a.node();
    record(out, {&a}, [an, dfn](Node& o) {
        an->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
            an->grad[i] += o.grad[i] * dfn(an->val[i], o.val[i]);
    });
    return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "multiply", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor neg(const Tensor& a) {
    return unary_op(
        "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double k) {
    return unary_op(
        "scale", a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Tensor add_const(const Tensor& a, double k) {
    return unary_op(
        "add_const", a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_(const Tensor& a) {
    return unary_op(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor square(const Tensor& a) {
    return unary_op(
        "square", a, [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

Tensor sqrt_(const Tensor& a) {
    return unary_op(
        "sqrt", a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / std::max(y, 1e-12); });
}

Tensor reciprocal(const Tensor& a) {
    return unary_op(
        "reciprocal", a, [](double x) { return 1.0 / x; },
        [](double, double y) { return -y * y; });
}

Tensor rsqrt(const Tensor& a) {
    return unary_op(
        "rsqrt", a, [](double x) { return 1.0 / std::sqrt(x); },
        [](double x, double y) { return -0.5 * y / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary_op(
        "clamp", a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const size_t nd = parts[0].ndim();
    if (axis < 0 || (size_t)axis >= nd)
        shape_error("concat", parts[0].shape(), "axis out of range");

    Shape out_shape = parts[0].shape();
    out_shape[axis] = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != nd) shape_error("concat", parts[0].shape(), p.shape());
        for (size_t d = 0; d < nd; ++d)
            if (d != (size_t)axis && p.shape()[d] != out_shape[d])
                shape_error("concat", out_shape, p.shape());
        out_shape[axis] += p.shape()[axis];
    }

    auto out = make_node(out_shape, "concat");
    bool rg = false;
    for (const Tensor& p : parts) rg = rg || p.requires_grad();

    // Copy blocks; remember (row offset | col offset) per part for backward.
    std::vector<size_t> offsets;
    if (nd == 1 || axis == 0) {
        size_t off = 0;
        for (const Tensor& p : parts) {
            offsets.push_back(off);
            std::copy(p.value().begin(), p.value().end(), out->val.begin() + off);
            off += p.numel();
        }
    } else {
        const size_t rows = out_shape[0], ocols = out_shape[1];
        size_t coff = 0;
        for (const Tensor& p : parts) {
            offsets.push_back(coff);
            const size_t pc = p.shape()[1];
            for (size_t r = 0; r < rows; ++r)
                std::copy(p.value().begin() + r * pc, p.value().begin() + (r + 1) * pc,
                          out->val.begin() + r * ocols + coff);
            coff += pc;
        }
    }

    if (rg) {
        out->requires_grad = true;
        for (const Tensor& p : parts) out->parents.push_back(p.node());
        const bool along_cols = (nd == 2 && axis == 1);
        auto nodes = out->parents;
        out->backward = [nodes, offsets, along_cols](Node& o) {
            for (size_t pi = 0; pi < nodes.size(); ++pi) {
                auto& pn = nodes[pi];
                if (!pn->requires_grad) continue;
                pn->ensure_grad();
                if (!along_cols) {
                    const size_t off = offsets[pi];
                    for (size_t i = 0; i < pn->val.size(); ++i) pn->grad[i] += o.grad[off + i];
                } else {
                    const size_t ocols = o.shape[1], pc = pn->shape[1], coff = offsets[pi];
                    for (size_t r = 0; r < pn->shape[0]; ++r)
                        for (size_t c = 0; c < pc; ++c)
                            pn->grad[r * pc + c] += o.grad[r * ocols + coff + c];
                }
            }
        };
    }
    return Tensor(out);
}

Tensor slice(const Tensor& a, int axis, size_t start, size_t len) {
    const size_t nd = a.ndim();
    if (axis < 0 || (size_t)axis >= nd) shape_error("slice", a.shape(), "axis out of range");
    if (start + len > a.shape()[axis]) shape_error("slice", a.shape(), "range out of bounds");

    Shape out_shape = a.shape();
    out_shape[axis] = len;
    auto out = make_node(out_shape, "slice");

    const size_t cols = nd == 2 ? a.shape()[1] : 1;
    if (nd == 1 || axis == 0) {
        const size_t off = start * cols;
        std::copy(a.value().begin() + off, a.value().begin() + off + len * cols,
                  out->val.begin());
        auto an = a.node();
        record(out, {&a}, [an, off](Node& o) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[off + i] += o.grad[i];
        });
    } else {
        const size_t rows = a.shape()[0];
        for (size_t r = 0; r < rows; ++r)
            std::copy(a.value().begin() + r * cols + start,
                      a.value().begin() + r * cols + start + len, out->val.begin() + r * len);
        auto an = a.node();
        record(out, {&a}, [an, start, cols, len](Node& o) {
            an->ensure_grad();
            const size_t rows = o.shape[0];
            for (size_t r = 0; r < rows; ++r)
                for (size_t c = 0; c < len; ++c)
                    an->grad[r * cols + start + c] += o.grad[r * len + c];
        });
    }
    return Tensor(out);
}

Tensor sum_all(const Tensor& a) {
    auto out = make_node({1}, "sum-reduce");
    double s = 0.0;
    for (double x : a.value()) s += x;
    out->val[0] = s;
    auto an = a.node();
    record(out, {&a}, [an](Node& o) {
        an->ensure_grad();
        for (double& g : an->grad) g += o.grad[0];
    });
    return Tensor(out);
}

Tensor mean_all(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    auto out = make_node({1}, "mean-reduce");
    double s = 0.0;
    for (double x : a.value()) s += x;
    out->val[0] = s * inv;
    auto an = a.node();
    record(out, {&a}, [an, inv](Node& o) {
        an->ensure_grad();
        for (double& g : an->grad) g += o.grad[0] * inv;
    });
    return Tensor(out);
}

Tensor sum_axis(const Tensor& a, int axis) {
    if (a.ndim() != 2 || (axis != 0 && axis != 1))
        shape_error("sum_axis", a.shape(), "expected 2-D and axis 0/1");
    const size_t rows = a.shape()[0], cols = a.shape()[1];
    auto out = make_node({axis == 0 ? cols : rows}, "sum-reduce");
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) out->val[axis == 0 ? c : r] += a.at(r, c);
    auto an = a.node();
    record(out, {&a}, [an, rows, cols, axis](Node& o) {
        an->ensure_grad();
        for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c)
                an->grad[r * cols + c] += o.grad[axis == 0 ? c : r];
    });
    return Tensor(out);
}

Tensor max_axis(const Tensor& a, int axis) {
    if (a.ndim() != 2 || (axis != 0 && axis != 1))
        shape_error("max_axis", a.shape(), "expected 2-D and axis 0/1");
    const size_t rows = a.shape()[0], cols = a.shape()[1];
    const size_t n_out = axis == 0 ? cols : rows;
    auto out = make_node({n_out}, "max-reduce");
    auto argmax = std::make_shared<std::vector<size_t>>(n_out, 0);
    std::fill(out->val.begin(), out->val.end(), -std::numeric_limits<double>::infinity());
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            const size_t o = axis == 0 ? c : r;
            const double v = a.at(r, c);
            if (v > out->val[o]) {
                out->val[o] = v;
                (*argmax)[o] = r * cols + c;
            }
        }
    auto an = a.node();
    record(out, {&a}, [an, argmax](Node& o) {
        an->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) an->grad[(*argmax)[i]] += o.grad[i];
    });
    return Tensor(out);
}

Tensor broadcast_rows(const Tensor& a, size_t m) {
    if (a.ndim() != 1) shape_error("broadcast", a.shape(), "expected 1-D");
    const size_t n = a.numel();
    auto out = make_node({m, n}, "broadcast");
    for (size_t r = 0; r < m; ++r)
        std::copy(a.value().begin(), a.value().end(), out->val.begin() + r * n);
    auto an = a.node();
    record(out, {&a}, [an, m, n](Node& o) {
        an->ensure_grad();
        for (size_t r = 0; r < m; ++r)
            for (size_t c = 0; c < n; ++c) an->grad[c] += o.grad[r * n + c];
    });
    return Tensor(out);
}

Tensor reshape(const Tensor& a, const Shape& s) {
    if (numel_of(s) != a.numel()) shape_error("reshape", a.shape(), s);
    auto out = make_node(s, "reshape");
    out->val = a.value();
    auto an = a.node();
    record(out, {&a}, [an](Node& o) {
        an->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    });
    return Tensor(out);
}

Tensor stop_grad_gate(const Tensor& a, const std::vector<double>& gate) {
    if (gate.size() != a.numel())
        shape_error("stop_grad_gate", a.shape(), "gate length mismatch");
    auto out = make_node(a.shape(), "gate");
    auto g = std::make_shared<std::vector<double>>(gate);
    for (size_t i = 0; i < gate.size(); ++i) out->val[i] = a.value()[i] * gate[i];
    auto an = a.node();
    record(out, {&a}, [an, g](Node& o) {
        an->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * (*g)[i];
    });
    return Tensor(out);
}

Tensor detach(const Tensor& a) {
    auto out = make_node(a.shape(), "leaf");
    out->val = a.value();
    return Tensor(out);
}

// ---- backward ----

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    auto root = loss.node();
    if (!root->requires_grad) return;  // nothing on tape depends on a leaf

    // Collect the reachable tape segment; ids are execution order.
    std::vector<std::shared_ptr<Node>> order;
    std::unordered_set<Node*> mark;
    std::vector<std::shared_ptr<Node>> dfs{root};
    mark.insert(root.get());
    order.push_back(root);
    while (!dfs.empty()) {
        auto n = dfs.back();
        dfs.pop_back();
        for (auto& p : n->parents) {
            if (p->requires_grad && mark.insert(p.get()).second) {
                order.push_back(p);
                dfs.push_back(p);
            }
        }
    }
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a->id > b->id; });

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto& n : order) {
        if (n->backward) {
            n->ensure_grad();
            n->backward(*n);
            // The tape segment is consumed: release the closure and links.
            n->backward = nullptr;
            n->parents.clear();
        }
    }
}

double gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                      double eps) {
    if (eps <= 0.0) throw std::invalid_argument("gradient_check: eps must be positive");
    Tensor x = point;
    const bool was_rg = x.requires_grad();
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor y = f(x);
    if (y.numel() != 1) throw std::invalid_argument("gradient_check: f must be scalar-valued");
    backward(y);
    std::vector<double> analytic = x.grad();

    double max_err = 0.0;
    x.set_requires_grad(false);
    for (size_t i = 0; i < x.numel(); ++i) {
        const double x0 = x.value()[i];
        x.value()[i] = x0 + eps;
        const double fp = f(x).item();
        x.value()[i] = x0 - eps;
        const double fm = f(x).item();
        x.value()[i] = x0;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("gradient_check: non-finite f at perturbed point");
        const double numeric = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        max_err = std::max(max_err, err);
    }
    x.set_requires_grad(was_rg);
    return max_err;
}

// ---- Adam ----

void AdamOptimizer::register_param(const std::string& name, Tensor param) {
    Slot s;
    s.name = name;
    s.param = std::move(param);
    s.m.assign(s.param.numel(), 0.0);
    s.v.assign(s.param.numel(), 0.0);
    slots_.push_back(std::move(s));
}

void AdamOptimizer::step() {
    // Validate all gradients before mutating anything.
    for (const Slot& s : slots_) {
        if (!s.param.has_grad()) continue;
        for (double g : s.param.grad())
            if (!std::isfinite(g))
                throw std::runtime_error("optimizer_step: non-finite gradient for parameter " +
                                         s.name);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
    for (Slot& s : slots_) {
        auto& p = s.param.value();
        const bool has = s.param.has_grad();
        for (size_t i = 0; i < p.size(); ++i) {
            const double g = has ? s.param.grad()[i] : 0.0;
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Slot& s : slots_) s.param.zero_grad();
}

void AdamOptimizer::save_state(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("optimizer save: cannot write " + path);
    const uint64_t magic = 0x45474f4144414d31ULL, t = t_, count = slots_.size();
    out.write(reinterpret_cast<const char*>(&magic), 8);
    out.write(reinterpret_cast<const char*>(&t), 8);
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const Slot& s : slots_) {
        const uint32_t nl = s.name.size();
        const uint64_t n = s.m.size();
        out.write(reinterpret_cast<const char*>(&nl), 4);
        out.write(s.name.data(), nl);
        out.write(reinterpret_cast<const char*>(&n), 8);
        out.write(reinterpret_cast<const char*>(s.m.data()), n * sizeof(double));
        out.write(reinterpret_cast<const char*>(s.v.data()), n * sizeof(double));
    }
}

void AdamOptimizer::load_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("optimizer load: cannot open " + path);
    auto get = [&](void* p, size_t n) {
        if (!in.read(static_cast<char*>(p), n))
            throw std::runtime_error("optimizer load: truncated file " + path);
    };
    uint64_t magic = 0, t = 0, count = 0;
    get(&magic, 8);
    get(&t, 8);
    get(&count, 8);
    if (magic != 0x45474f4144414d31ULL || count != slots_.size())
        throw std::runtime_error("optimizer load: header mismatch in " + path);
    for (Slot& s : slots_) {
        uint32_t nl = 0;
        get(&nl, 4);
        std::string name(nl, '\0');
        get(name.data(), nl);
        uint64_t n = 0;
        get(&n, 8);
        if (name != s.name || n != s.m.size())
            throw std::runtime_error("optimizer load: slot mismatch for " + s.name);
        get(s.m.data(), n * sizeof(double));
        get(s.v.data(), n * sizeof(double));
    }
    t_ = t;
}

}  // namespace egopose::ad
