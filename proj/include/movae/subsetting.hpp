#pragma once

#include "movae/types.hpp"

#include <cstdint>
#include <vector>

namespace movae {

// Disjoint partition of every feature of every omics type into M subsets.
struct FeaturePartition {
    int subset_count = 1;
    // per omics: feature index -> subset index
    std::vector<std::vector<int>> assignment;
    // per omics, per subset: the assigned original feature indices, ascending
    std::vector<std::vector<std::vector<int>>> subset_features;
    // per subset, per omics: feature count
    std::vector<std::vector<int>> per_subset_dims;

    int omics_count() const { return static_cast<int>(assignment.size()); }

    /// Widest subset of one omics type (the padded encoder input width).
    int max_subset_dim(int omics) const;

    /// Rebuild subset_features / per_subset_dims from assignment.
    void rebuild_derived();
};

// The features of one sample belonging to subset j, per omics type, in
// original feature order (unpadded).
struct SubsetView {
    int subset_index = 0;
    std::vector<Vector> per_omics;
};

/// Deal each omics type's feature indices (optionally shuffled by seed) into
/// M near-equal chunks; any remainder goes to the lowest-indexed subsets.
FeaturePartition make_partition(const std::vector<int>& omics_dims, int subset_count,
                                std::uint64_t seed, bool shuffle);

SubsetView extract_subset(const std::vector<Vector>& sample, const FeaturePartition& partition,
                          int subset_index);

/// One-hot vector of length M with 1 at position j.
Vector subset_identity(int subset_count, int subset_index);

}  // namespace movae
