// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "egopose/rng.hpp"

namespace egopose::ad {

using Shape = std::vector<size_t>;

// One recorded node of the computation tape. The tape is rebuilt on every
// forward pass (define-by-run); node ids increase monotonically with execution
// order, so visiting reachable nodes by descending id replays the tape in
// exact reverse.
struct Node {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;      // allocated lazily, same shape as val
    bool requires_grad = false;
    uint64_t id = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // adds into parents' grads

    size_t numel() const { return val.size(); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

// Dense 64-bit real tensor with reverse-mode autodiff. Value semantics on the
// handle; the underlying node is shared. 1-D and 2-D shapes only.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double v, bool requires_grad = false);
    static Tensor from(const Shape& s, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor randn(const Shape& s, RngStream& rng, double stddev = 1.0,
                        bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    size_t ndim() const { return n_->shape.size(); }
    size_t numel() const { return n_->val.size(); }
    size_t rows() const;  // 2-D only
    size_t cols() const;  // 2-D only

    std::vector<double>& value() { return n_->val; }
    const std::vector<double>& value() const { return n_->val; }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool has_grad() const { return n_->grad.size() == n_->val.size(); }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }
    void zero_grad();

    double item() const;             // scalar tensors only
    double at(size_t i) const { return n_->val[i]; }
    double at(size_t r, size_t c) const { return n_->val[r * cols() + c]; }

    std::shared_ptr<Node> node() const { return n_; }
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

private:
    std::shared_ptr<Node> n_;
};

// ---- primitive forward ops ----
// Every op validates shapes and throws std::invalid_argument naming the op and
// the offending shapes. Outputs are recorded on the tape when any input
// requires grad. Binary ops broadcast trailing dimensions only:
//   [M,N] op [N]   (row-wise)
//   [M,N] op [M,1] (column-wise)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double k);
Tensor add_const(const Tensor& a, double k);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, size_t start, size_t len);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt_(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor rsqrt(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);   // 2-D, axis 0 or 1
Tensor max_axis(const Tensor& a, int axis);   // subgradient to the argmax
Tensor clamp(const Tensor& a, double lo, double hi);  // zero grad outside
Tensor broadcast_rows(const Tensor& a, size_t m);     // [N] -> [M,N]
Tensor reshape(const Tensor& a, const Shape& s);
// Multiply by a constant gate with no gradient path through the gate values.
Tensor stop_grad_gate(const Tensor& a, const std::vector<double>& gate);
Tensor detach(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Reverse pass from a scalar loss. Every requires_grad leaf reachable from the
// loss receives grad += d(loss)/d(leaf); leaves not on the tape keep their grad
// buffer untouched (absent, not zero-filled). The visited tape segment is
// consumed: backward closures are released, values remain readable.
void backward(const Tensor& loss);

// Max over coordinates of |analytic - numeric| / max(1, |numeric|) using
// central differences with step eps. Throws if f is non-finite at any
// perturbed point.
double gradient_check(const std::function<Tensor(const Tensor&)>& f,
                      const Tensor& point, double eps);

// Adam with bias correction. Deterministic given identical inputs; a NaN or
// non-finite gradient aborts the step and reports the parameter name.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void register_param(const std::string& name, Tensor param);
    void step();       // consumes current .grad of every registered param
    void zero_grad();
    // Binary moment/step-count snapshot; load throws on a mismatch with the
    // registered parameters. Makes an interrupted run resumable bit-exactly.
    void save_state(const std::string& path) const;
    void load_state(const std::string& path);
    size_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Slot {
        std::string name;
        Tensor param;
        std::vector<double> m, v;
    };
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    size_t t_ = 0;
};

}  // namespace egopose::ad
