#pragma once

#include "movae/types.hpp"

#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace movae {

enum class Activation { relu, sigmoid, identity };

/// y = W x + b
Vector affine(const VectorRef& x, const Matrix& W, const Vector& b);

struct AffineGrads {
    Vector grad_x;
    Matrix grad_W;
    Vector grad_b;
};

/// Gradients of an affine layer: grad_x = Wᵀ g, grad_W = g xᵀ, grad_b = g.
AffineGrads affine_backward(const VectorRef& grad_out, const VectorRef& x, const Matrix& W);

Vector activation(const VectorRef& x, Activation kind);

/// Gradient through an element-wise activation. `pre` is the activation input.
Vector activation_backward(const VectorRef& grad_out, const VectorRef& pre, Activation kind);

/// Numerically stable softmax (max subtraction). Requires at least 2 logits.
Vector softmax(const VectorRef& logits);

/// log(sum(exp(v))) with max subtraction.
double log_sum_exp(const VectorRef& v);

// One named parameter entry: a weight matrix and a bias vector, with
// matching gradient accumulators. A frozen entry is skipped by the
// optimizer and by gradient checking.
struct ParamEntry {
    Matrix W;
    Vector b;
    Matrix grad_W;
    Vector grad_b;
    bool frozen = false;

    void zero_grads() {
        grad_W.setZero();
        grad_b.setZero();
    }
};

// Named parameter collection with deterministic (sorted) iteration order.
class ParamStore {
public:
    ParamEntry& add(const std::string& name, Eigen::Index out_dim, Eigen::Index in_dim);

    ParamEntry& at(const std::string& name);
    const ParamEntry& at(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    void zero_grads();
    void scale_grads(double factor);

    /// Freeze or unfreeze every entry whose name starts with `prefix`.
    void set_frozen(const std::string& prefix, bool frozen);
    void unfreeze_all();

    std::size_t scalar_count() const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, ParamEntry> entries_;
};

using LossFn = std::function<double(const ParamStore&)>;

// Central-difference gradient check. Analytic gradients must already be in
// the store's grad buffers; returns the maximum relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all unfrozen
// scalars. Throws if the loss goes non-finite, naming the parameter.
double grad_check(const LossFn& loss_fn, ParamStore& params, double eps);

}  // namespace movae
