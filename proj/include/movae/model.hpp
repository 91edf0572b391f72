#pragma once

#include "movae/data.hpp"
#include "movae/losses.hpp"
#include "movae/rng.hpp"
#include "movae/subsetting.hpp"
#include "movae/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace movae {

// Which target the per-subset reconstruction loss compares against: the full
// feature vector (decoder output is always full-dimensional) or only the
// coordinates belonging to the encoded subset.
enum class ReconTarget { full_input, subset_only };

struct Reduction {
    int encoder = 1;
    int decoder = 1;
    int downstream = 1;
};

// Block-separated first encoder layer for one omics type: one affine per
// block, outputs concatenated to the branch width.
struct BlockConfig {
    int omics_index = 0;
    std::vector<int> feature_blocks;  // feature index -> block index
    int block_count = 0;
};

struct ModelConfig {
    std::vector<int> omics_dims;
    int subset_count = 1;
    int latent_dim = 128;
    int branch_hidden = 512;
    int trunk_hidden = 256;
    int downstream_hidden = 128;
    int class_count = 0;
    Reduction reduction;
    ReconLoss recon_loss = ReconLoss::mse;
    ReconTarget recon_target = ReconTarget::full_input;
    bool use_subset_identity = false;
    bool shuffle_features = false;
    std::optional<BlockConfig> blocks;

    // integer division by the reduction factor, floored at 1
    int enc_branch_width() const { return reduced(branch_hidden, reduction.encoder); }
    int enc_trunk_width() const { return reduced(trunk_hidden, reduction.encoder); }
    int dec_branch_width() const { return reduced(branch_hidden, reduction.decoder); }
    int dec_trunk_width() const { return reduced(trunk_hidden, reduction.decoder); }
    int down_hidden_width() const { return reduced(downstream_hidden, reduction.downstream); }
    int latent_input_dim() const {
        return latent_dim + (use_subset_identity ? subset_count : 0);
    }

    void validate() const;

private:
    static int reduced(int width, int factor) { return std::max(1, width / factor); }
};

// (mu, sigma, z) triple from one encoder pass, with the noise draw that
// produced z. z = mu + sigma .* eps holds exactly.
struct LatentStats {
    Vector mu;
    Vector sigma;
    Vector z;
    Vector eps;
};

// One affine of a branch's first layer. Without block separation a branch is
// a single segment covering the whole subset view; with it, one segment per
// block. view_positions[j] lists, per subset, the positions inside the
// (unpadded) subset view that feed this segment; the rest of the padded
// input stays zero.
struct BranchSegment {
    std::string param_name;
    int in_width = 0;
    int out_width = 0;
    std::vector<std::vector<int>> view_positions;
};

struct VaeModel {
    ModelConfig config;
    FeaturePartition partition;
    ParamStore params;
    std::vector<std::vector<BranchSegment>> enc_branches;  // per omics
};

/// Initialize a model (and its feature partition) deterministically from the
/// seed. Weights are uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
VaeModel build_model(const ModelConfig& config, std::uint64_t seed);

/// Model skeleton for a given partition: layer plan and zero parameters.
/// Used by build_model and by checkpoint loading.
VaeModel assemble_model(const ModelConfig& config, FeaturePartition partition);

// --- forward passes ----------------------------------------------------------

struct EncodeCache {
    int subset_index = 0;
    std::vector<std::vector<Vector>> seg_inputs;  // per omics, per segment (padded)
    std::vector<std::vector<Vector>> seg_pre;
    Vector branch_concat;
    Vector trunk_pre;
    Vector trunk_out;
    LatentStats latent;
};

struct DecodeCache {
    Vector input;
    Vector trunk_pre;
    Vector trunk_out;
    std::vector<Vector> branch_pre;
    std::vector<Vector> branch_out;
    std::vector<Vector> recon;
};

struct ClassifyCache {
    Vector input;
    Vector hidden_pre;
    Vector hidden_out;
    Vector logits;
};

EncodeCache encode_forward(const VaeModel& model, const SubsetView& view, const Vector& eps);
DecodeCache decode_forward(const VaeModel& model, const VectorRef& latent);
ClassifyCache classify_forward(const VaeModel& model, const VectorRef& latent);

/// Encoder pass with supplied noise (fully deterministic).
LatentStats encode(const VaeModel& model, const SubsetView& view, const Vector& eps);
/// Encoder pass drawing fresh standard-normal noise.
LatentStats encode(const VaeModel& model, const SubsetView& view, Rng& rng);

/// [z ; identity]; the identity must be one-hot.
Vector concat_identity(const VectorRef& z, const VectorRef& identity);

/// Full-dimensional per-omics reconstructions (sigmoid outputs in bce mode).
std::vector<Vector> decode(const VaeModel& model, const VectorRef& latent);

/// Raw class logits.
Vector classify(const VaeModel& model, const VectorRef& latent);

// --- backward passes ---------------------------------------------------------
// All backward passes accumulate into the store's gradient buffers.

/// Returns the gradient with respect to the decoder input.
Vector decode_backward(VaeModel& model, const DecodeCache& cache,
                       const std::vector<Vector>& grad_recon);

/// Returns the gradient with respect to the classifier input.
Vector classify_backward(VaeModel& model, const ClassifyCache& cache, const VectorRef& grad_logits);

/// grad_z flows through the reparameterization; grad_mu_extra / grad_logvar_extra
/// carry direct contributions (the KL term).
void encode_backward(VaeModel& model, const EncodeCache& cache, const VectorRef& grad_z,
                     const VectorRef& grad_mu_extra, const VectorRef& grad_logvar_extra);

// --- per-sample training objectives ------------------------------------------
//
// kl_weight scales the KL term inside the embedding objective. 1.0 is the
// textbook composition (recon + full KL); the trainer uses 1/latent_dim so
// the divergence is averaged per latent dimension, keeping it commensurate
// with the per-feature-mean reconstruction term. The reported breakdown
// always satisfies embed = recon + kl with kl as weighted.

/// Embedding objective (1/M) sum_j [recon + kl_weight * KL] over all subsets;
/// accumulates weight * gradient. Takes no label by construction.
double embed_backprop(VaeModel& model, const std::vector<Vector>& sample,
                      const std::vector<Vector>& eps_per_subset, double weight,
                      double kl_weight = 1.0);

/// Classification objective through one subset's sampled latent.
double classification_backprop(VaeModel& model, const std::vector<Vector>& sample,
                               const Vector& eps, int subset_index, int label, double weight);

/// Joint objective: (1/M) sum_j embed_j + CE, with the classification subset's
/// z shared between the decoder and classifier paths.
LossBreakdown joint_backprop(VaeModel& model, const std::vector<Vector>& sample,
                             const std::vector<Vector>& eps_per_subset, int classification_subset,
                             int label, double embed_weight, double class_weight,
                             double kl_weight = 1.0);

/// Same objective without gradient accumulation.
LossBreakdown joint_forward(const VaeModel& model, const std::vector<Vector>& sample,
                            const std::vector<Vector>& eps_per_subset, int classification_subset,
                            int label, double kl_weight = 1.0);

}  // namespace movae
