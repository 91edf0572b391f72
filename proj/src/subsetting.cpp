#include "movae/subsetting.hpp"

#include "movae/rng.hpp"

#include <algorithm>
#include <numeric>

namespace movae {

int FeaturePartition::max_subset_dim(int omics) const {
    int w = 0;
    for (int j = 0; j < subset_count; ++j) {
        w = std::max(w, per_subset_dims[static_cast<std::size_t>(j)][static_cast<std::size_t>(omics)]);
    }
    return w;
}

void FeaturePartition::rebuild_derived() {
    const std::size_t K = assignment.size();
    subset_features.assign(K, {});
    per_subset_dims.assign(static_cast<std::size_t>(subset_count),
                           std::vector<int>(K, 0));
    for (std::size_t k = 0; k < K; ++k) {
        subset_features[k].assign(static_cast<std::size_t>(subset_count), {});
        for (std::size_t f = 0; f < assignment[k].size(); ++f) {
            const int j = assignment[k][f];
            subset_features[k][static_cast<std::size_t>(j)].push_back(static_cast<int>(f));
        }
        for (int j = 0; j < subset_count; ++j) {
            per_subset_dims[static_cast<std::size_t>(j)][k] =
                static_cast<int>(subset_features[k][static_cast<std::size_t>(j)].size());
        }
    }
}

FeaturePartition make_partition(const std::vector<int>& omics_dims, int subset_count,
                                std::uint64_t seed, bool shuffle) {
    if (subset_count < 1) throw ValidationError("make_partition: subset count must be >= 1");
    for (std::size_t k = 0; k < omics_dims.size(); ++k) {
        if (omics_dims[k] < subset_count) {
            throw ValidationError("make_partition: omics " + std::to_string(k) + " has " +
                                  std::to_string(omics_dims[k]) + " features, fewer than " +
                                  std::to_string(subset_count) + " subsets");
        }
    }

    Rng rng(seed);
    FeaturePartition p;
    p.subset_count = subset_count;
    p.assignment.resize(omics_dims.size());
    for (std::size_t k = 0; k < omics_dims.size(); ++k) {
        const int d = omics_dims[k];
        std::vector<int> order(static_cast<std::size_t>(d));
        std::iota(order.begin(), order.end(), 0);
        if (shuffle) rng.shuffle(order);

        p.assignment[k].resize(static_cast<std::size_t>(d));
        const int base = d / subset_count;
        const int remainder = d % subset_count;
        std::size_t pos = 0;
        for (int j = 0; j < subset_count; ++j) {
            const int chunk = base + (j < remainder ? 1 : 0);
            for (int i = 0; i < chunk; ++i) {
                p.assignment[k][static_cast<std::size_t>(order[pos++])] = j;
            }
        }
    }
    p.rebuild_derived();
    return p;
}

SubsetView extract_subset(const std::vector<Vector>& sample, const FeaturePartition& partition,
                          int subset_index) {
    if (subset_index < 0 || subset_index >= partition.subset_count) {
        throw std::out_of_range("extract_subset: subset " + std::to_string(subset_index) +
                                " out of range for " + std::to_string(partition.subset_count) +
                                " subsets");
    }
    if (sample.size() != partition.assignment.size()) {
        throw DimensionError("extract_subset: sample has " + std::to_string(sample.size()) +
                             " omics types, partition has " +
                             std::to_string(partition.assignment.size()));
    }
    SubsetView view;
    view.subset_index = subset_index;
    view.per_omics.reserve(sample.size());
    for (std::size_t k = 0; k < sample.size(); ++k) {
        if (sample[k].size() != static_cast<Eigen::Index>(partition.assignment[k].size())) {
            throw DimensionError("extract_subset: omics " + std::to_string(k) + " has " +
                                 std::to_string(sample[k].size()) + " features, partition expects " +
                                 std::to_string(partition.assignment[k].size()));
        }
        const auto& features = partition.subset_features[k][static_cast<std::size_t>(subset_index)];
        Vector v(static_cast<Eigen::Index>(features.size()));
        for (std::size_t i = 0; i < features.size(); ++i) {
            v[static_cast<Eigen::Index>(i)] = sample[k][features[i]];
        }
        view.per_omics.push_back(std::move(v));
    }
    return view;
}

Vector subset_identity(int subset_count, int subset_index) {
    if (subset_index < 0 || subset_index >= subset_count) {
        throw std::out_of_range("subset_identity: index " + std::to_string(subset_index) +
                                " out of range for " + std::to_string(subset_count) + " subsets");
    }
    Vector v = Vector::Zero(subset_count);
    v[subset_index] = 1.0;
    return v;
}

}  // namespace movae
