#pragma once

#include "movae/types.hpp"

#include <vector>

namespace movae {

enum class ReconLoss { mse, bce, l1 };

struct LossBreakdown {
    double recon = 0.0;
    double kl = 0.0;
    double embed = 0.0;
    double classification = 0.0;
    double joint = 0.0;
};

/// Reconstruction loss: per omics type the mean over features of the
/// element-wise loss, then the mean over omics types.
double recon_loss(const std::vector<Vector>& x, const std::vector<Vector>& x_prime, ReconLoss kind);

/// Closed-form KL divergence of N(mu, diag(sigma^2)) from N(0, I):
/// sum_d 0.5 * (mu_d^2 + sigma_d^2 - 1 - ln sigma_d^2).
double kl_divergence(const VectorRef& mu, const VectorRef& sigma);

/// Cross entropy -ln softmax(logits)[label], via log-sum-exp.
double classification_loss(const VectorRef& logits, int label);

/// recon_loss + kl_divergence.
double embedding_loss(const std::vector<Vector>& x, const std::vector<Vector>& x_prime,
                      const VectorRef& mu, const VectorRef& sigma, ReconLoss kind);

/// Mean of the per-subset embedding losses plus the classification loss.
double joint_loss(const std::vector<double>& embed_per_subset, double classification);

// Gradient of the reconstruction loss with respect to x_prime, with the same
// per-omics mean reduction as recon_loss.
std::vector<Vector> recon_loss_backward(const std::vector<Vector>& x,
                                        const std::vector<Vector>& x_prime, ReconLoss kind);

// dKL/dmu = mu; dKL/dlogvar = 0.5 * (sigma^2 - 1).
Vector kl_backward_mu(const VectorRef& mu);
Vector kl_backward_logvar(const VectorRef& sigma);

// dCE/dlogits = softmax(logits) - onehot(label).
Vector classification_loss_backward(const VectorRef& logits, int label);

}  // namespace movae
