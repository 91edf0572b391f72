#pragma once

#include "movae/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace movae {

enum class OmicsKind { gene_expression, dna_methylation, mirna_expression, generic };

std::string omics_kind_name(OmicsKind kind);
OmicsKind omics_kind_from_name(const std::string& name);

// One omics modality: features as rows, samples as columns. Missing cells
// are NaN until imputation.
struct OmicsMatrix {
    OmicsKind kind = OmicsKind::generic;
    std::vector<std::string> feature_ids;
    std::vector<std::string> sample_ids;
    Matrix values;  // feature_ids.size() x sample_ids.size()

    Eigen::Index feature_count() const { return values.rows(); }
    Eigen::Index sample_count() const { return values.cols(); }
    bool has_missing() const { return values.hasNaN(); }
};

// Aligned multi-omics dataset: every matrix shares one sample ordering.
struct MultiOmicsDataset {
    std::vector<OmicsMatrix> omics;
    std::vector<int> labels;  // per-sample class index in [0, C)
    std::vector<std::string> class_names;

    Eigen::Index sample_count() const { return omics.empty() ? 0 : omics[0].sample_count(); }
    const std::vector<std::string>& sample_ids() const { return omics[0].sample_ids; }
    std::vector<int> omics_dims() const;
    int class_count() const { return static_cast<int>(class_names.size()); }

    /// Per-omics feature vector of one sample.
    std::vector<Vector> sample(Eigen::Index s) const;
};

// feature_id -> block index, with block indices contiguous in [0, block_count).
struct BlockMap {
    std::map<std::string, int> assignments;
    int block_count = 0;

    /// Resolve to a per-feature block index for a concrete matrix.
    std::vector<int> indices_for(const OmicsMatrix& m) const;
};

struct SynthConfig {
    int class_count = 4;
    int samples_per_class = 150;
    std::vector<int> omics_dims = {60, 24, 12};
    double informative_fraction = 0.5;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

enum class ImputeStrategy { mean, zero, drop_features };

ImputeStrategy impute_strategy_from_name(const std::string& name);
std::string impute_strategy_name(ImputeStrategy s);

// --- file formats -----------------------------------------------------------

/// Tab-separated matrix: header row of sample ids, then one row per feature.
OmicsMatrix load_matrix(const std::string& path, OmicsKind kind);
void save_matrix(const OmicsMatrix& m, const std::string& path);

/// Tab-separated (sample_id, class_name) with one header row.
std::map<std::string, std::string> load_labels(const std::string& path);
void save_labels(const std::vector<std::string>& sample_ids,
                 const std::vector<std::string>& class_names_per_sample, const std::string& path);

/// Tab-separated (feature_id, block_index), no header required.
BlockMap load_block_map(const std::string& path);

// --- preprocessing ----------------------------------------------------------

struct ImputeReport {
    std::int64_t missing_cells = 0;
    std::int64_t features_dropped = 0;
};

OmicsMatrix impute(const OmicsMatrix& matrix, ImputeStrategy strategy,
                   ImputeReport* report = nullptr);

/// Rescale every sample column of every omics matrix to unit Euclidean norm.
/// All-zero columns are left unchanged.
MultiOmicsDataset unit_norm(MultiOmicsDataset dataset);
void unit_norm_matrix(OmicsMatrix& m);

/// Intersect sample sets across matrices and the label file, reorder all
/// matrices to one shared sample order, and encode class names (sorted) to
/// indices.
MultiOmicsDataset align_and_label(std::vector<OmicsMatrix> matrices,
                                  const std::map<std::string, std::string>& labels);

struct SplitResult {
    MultiOmicsDataset train;
    MultiOmicsDataset val;
    MultiOmicsDataset test;
};

/// Stratified split; each class is shuffled with the seed and partitioned by
/// the fractions (which must be positive and sum to 1).
SplitResult split(const MultiOmicsDataset& dataset, double train_fraction, double val_fraction,
                  double test_fraction, std::uint64_t seed);

// --- synthetic data ---------------------------------------------------------

/// Class-separated synthetic dataset before unit-norm rescaling.
MultiOmicsDataset synth_generate_raw(const SynthConfig& config);

/// synth_generate_raw followed by unit_norm.
MultiOmicsDataset synth_generate(const SynthConfig& config);

}  // namespace movae
