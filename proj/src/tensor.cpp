#include "movae/tensor.hpp"

#include <cmath>

namespace movae {

Vector affine(const VectorRef& x, const Matrix& W, const Vector& b) {
    if (W.cols() != x.size() || W.rows() != b.size()) {
        throw DimensionError("affine: W is " + shape_str(W.rows(), W.cols()) + ", x has length " +
                             std::to_string(x.size()) + ", b has length " + std::to_string(b.size()));
    }
    return W * x + b;
}

AffineGrads affine_backward(const VectorRef& grad_out, const VectorRef& x, const Matrix& W) {
    if (W.rows() != grad_out.size() || W.cols() != x.size()) {
        throw DimensionError("affine_backward: W is " + shape_str(W.rows(), W.cols()) +
                             ", grad_out has length " + std::to_string(grad_out.size()) +
                             ", x has length " + std::to_string(x.size()));
    }
    AffineGrads g;
    g.grad_x = W.transpose() * grad_out;
    g.grad_W = grad_out * x.transpose();
    g.grad_b = grad_out;
    return g;
}

Vector activation(const VectorRef& x, Activation kind) {
    switch (kind) {
        case Activation::relu:
            return x.cwiseMax(0.0);
        case Activation::sigmoid:
            return (1.0 / (1.0 + (-x.array()).exp())).matrix();
        case Activation::identity:
            return x;
    }
    throw ValidationError("activation: unsupported kind");
}

Vector activation_backward(const VectorRef& grad_out, const VectorRef& pre, Activation kind) {
    if (grad_out.size() != pre.size()) {
        throw DimensionError("activation_backward: grad length " + std::to_string(grad_out.size()) +
                             " vs input length " + std::to_string(pre.size()));
    }
    switch (kind) {
        case Activation::relu:
            return (pre.array() > 0.0).select(grad_out, 0.0);
        case Activation::sigmoid: {
            const Eigen::ArrayXd s = 1.0 / (1.0 + (-pre.array()).exp());
            return (grad_out.array() * s * (1.0 - s)).matrix();
        }
        case Activation::identity:
            return grad_out;
    }
    throw ValidationError("activation_backward: unsupported kind");
}

Vector softmax(const VectorRef& logits) {
    if (logits.size() < 2) {
        throw ValidationError("softmax: need at least 2 logits, got " + std::to_string(logits.size()));
    }
    const double m = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.array() - m).exp();
    return (e / e.sum()).matrix();
}

double log_sum_exp(const VectorRef& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

ParamEntry& ParamStore::add(const std::string& name, Eigen::Index out_dim, Eigen::Index in_dim) {
    auto [it, inserted] = entries_.try_emplace(name);
    if (!inserted) {
        throw ValidationError("ParamStore: duplicate entry '" + name + "'");
    }
    ParamEntry& e = it->second;
    e.W = Matrix::Zero(out_dim, in_dim);
    e.b = Vector::Zero(out_dim);
    e.grad_W = Matrix::Zero(out_dim, in_dim);
    e.grad_b = Vector::Zero(out_dim);
    return e;
}

ParamEntry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("ParamStore: no entry '" + name + "'");
    return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("ParamStore: no entry '" + name + "'");
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) e.zero_grads();
}

void ParamStore::scale_grads(double factor) {
    for (auto& [name, e] : entries_) {
        e.grad_W *= factor;
        e.grad_b *= factor;
    }
}

void ParamStore::set_frozen(const std::string& prefix, bool frozen) {
    for (auto& [name, e] : entries_) {
        if (name.rfind(prefix, 0) == 0) e.frozen = frozen;
    }
}

void ParamStore::unfreeze_all() {
    for (auto& [name, e] : entries_) e.frozen = false;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) {
        n += static_cast<std::size_t>(e.W.size() + e.b.size());
    }
    return n;
}

namespace {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double central_difference(const LossFn& loss_fn, const ParamStore& params, double& slot, double eps,
                          const std::string& where) {
    const double saved = slot;
    slot = saved + eps;
    const double up = loss_fn(params);
    slot = saved - eps;
    const double down = loss_fn(params);
    slot = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
        throw DomainError("grad_check: non-finite loss while perturbing " + where);
    }
    return (up - down) / (2.0 * eps);
}

}  // namespace

double grad_check(const LossFn& loss_fn, ParamStore& params, double eps) {
    double max_err = 0.0;
    for (auto& [name, entry] : params) {
        if (entry.frozen) continue;
        for (Eigen::Index c = 0; c < entry.W.cols(); ++c) {
            for (Eigen::Index r = 0; r < entry.W.rows(); ++r) {
                const std::string where =
                    name + ".W(" + std::to_string(r) + "," + std::to_string(c) + ")";
                const double numeric = central_difference(loss_fn, params, entry.W(r, c), eps, where);
                max_err = std::max(max_err, relative_error(entry.grad_W(r, c), numeric));
            }
        }
        for (Eigen::Index r = 0; r < entry.b.size(); ++r) {
            const std::string where = name + ".b(" + std::to_string(r) + ")";
            const double numeric = central_difference(loss_fn, params, entry.b[r], eps, where);
            max_err = std::max(max_err, relative_error(entry.grad_b[r], numeric));
        }
    }
    return max_err;
}

}  // namespace movae
