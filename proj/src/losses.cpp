#include "movae/losses.hpp"

#include "movae/tensor.hpp"

#include <cmath>

namespace movae {

namespace {

void check_pair_dims(const std::vector<Vector>& x, const std::vector<Vector>& x_prime) {
    if (x.size() != x_prime.size()) {
        throw DimensionError("recon_loss: " + std::to_string(x.size()) + " vs " +
                             std::to_string(x_prime.size()) + " omics types");
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k].size() != x_prime[k].size()) {
            throw DimensionError("recon_loss: omics " + std::to_string(k) + " has " +
                                 std::to_string(x[k].size()) + " features vs " +
                                 std::to_string(x_prime[k].size()) + " reconstructed");
        }
    }
}

void check_bce_domain(const Vector& a, const Vector& b, std::size_t k) {
    if ((a.array() < 0.0).any() || (a.array() > 1.0).any()) {
        throw DomainError("recon_loss(bce): input of omics " + std::to_string(k) +
                          " outside [0,1]");
    }
    if ((b.array() <= 0.0).any() || (b.array() >= 1.0).any()) {
        throw DomainError("recon_loss(bce): reconstruction of omics " + std::to_string(k) +
                          " outside (0,1)");
    }
}

}  // namespace

double recon_loss(const std::vector<Vector>& x, const std::vector<Vector>& x_prime, ReconLoss kind) {
    check_pair_dims(x, x_prime);
    if (x.empty()) throw ValidationError("recon_loss: no omics types");
    double total = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const Vector& a = x[k];
        const Vector& b = x_prime[k];
        double per_omics = 0.0;
        switch (kind) {
            case ReconLoss::mse:
                per_omics = (a - b).squaredNorm() / static_cast<double>(a.size());
                break;
            case ReconLoss::l1:
                per_omics = (a - b).cwiseAbs().sum() / static_cast<double>(a.size());
                break;
            case ReconLoss::bce:
                check_bce_domain(a, b, k);
                per_omics = -(a.array() * b.array().log() +
                              (1.0 - a.array()) * (1.0 - b.array()).log())
                                 .mean();
                break;
        }
        total += per_omics;
    }
    return total / static_cast<double>(x.size());
}

double kl_divergence(const VectorRef& mu, const VectorRef& sigma) {
    if (mu.size() != sigma.size()) {
        throw DimensionError("kl_divergence: mu has length " + std::to_string(mu.size()) +
                             ", sigma has length " + std::to_string(sigma.size()));
    }
    if ((sigma.array() <= 0.0).any()) {
        throw DomainError("kl_divergence: sigma must be positive");
    }
    const Eigen::ArrayXd s2 = sigma.array().square();
    return 0.5 * (mu.array().square() + s2 - 1.0 - s2.log()).sum();
}

double classification_loss(const VectorRef& logits, int label) {
    if (label < 0 || label >= logits.size()) {
        throw std::out_of_range("classification_loss: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) + " classes");
    }
    return log_sum_exp(logits) - logits[label];
}

double embedding_loss(const std::vector<Vector>& x, const std::vector<Vector>& x_prime,
                      const VectorRef& mu, const VectorRef& sigma, ReconLoss kind) {
    return recon_loss(x, x_prime, kind) + kl_divergence(mu, sigma);
}

double joint_loss(const std::vector<double>& embed_per_subset, double classification) {
    if (embed_per_subset.empty()) {
        throw ValidationError("joint_loss: no per-subset embedding losses");
    }
    double sum = 0.0;
    for (double e : embed_per_subset) sum += e;
    return sum / static_cast<double>(embed_per_subset.size()) + classification;
}

std::vector<Vector> recon_loss_backward(const std::vector<Vector>& x,
                                        const std::vector<Vector>& x_prime, ReconLoss kind) {
    check_pair_dims(x, x_prime);
    const double omics_scale = 1.0 / static_cast<double>(x.size());
    std::vector<Vector> grads(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const Vector& a = x[k];
        const Vector& b = x_prime[k];
        const double scale = omics_scale / static_cast<double>(a.size());
        switch (kind) {
            case ReconLoss::mse:
                grads[k] = scale * 2.0 * (b - a);
                break;
            case ReconLoss::l1:
                grads[k] = scale * (b - a).array().sign().matrix();
                break;
            case ReconLoss::bce:
                check_bce_domain(a, b, k);
                grads[k] = (scale * (b.array() - a.array()) / (b.array() * (1.0 - b.array())))
                               .matrix();
                break;
        }
    }
    return grads;
}

Vector kl_backward_mu(const VectorRef& mu) { return mu; }

Vector kl_backward_logvar(const VectorRef& sigma) {
    return (0.5 * (sigma.array().square() - 1.0)).matrix();
}

Vector classification_loss_backward(const VectorRef& logits, int label) {
    Vector g = softmax(logits);
    g[label] -= 1.0;
    return g;
}

}  // namespace movae
