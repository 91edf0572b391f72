#include "movae/rng.hpp"
#include "movae/subsetting.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace movae;

TEST_CASE("proportional partition of three omics types") {
    FeaturePartition p = make_partition({6, 3, 3}, 3, 0, false);
    for (int j = 0; j < 3; ++j) {
        CHECK(p.per_subset_dims[j][0] == 2);
        CHECK(p.per_subset_dims[j][1] == 1);
        CHECK(p.per_subset_dims[j][2] == 1);
    }
}

TEST_CASE("remainder features go to the lowest-indexed subsets") {
    FeaturePartition p = make_partition({10}, 3, 0, false);
    CHECK(p.per_subset_dims[0][0] == 4);
    CHECK(p.per_subset_dims[1][0] == 3);
    CHECK(p.per_subset_dims[2][0] == 3);
}

TEST_CASE("single subset covers everything") {
    FeaturePartition p = make_partition({9}, 1, 0, false);
    CHECK(p.subset_count == 1);
    CHECK(p.per_subset_dims[0][0] == 9);
    for (int f = 0; f < 9; ++f) CHECK(p.assignment[0][f] == 0);
}

TEST_CASE("partition rejects more subsets than features") {
    try {
        make_partition({10, 2}, 3, 0, false);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("omics 1") != std::string::npos);
    }
}

TEST_CASE("extract_subset selects contiguous chunks when unshuffled") {
    FeaturePartition p = make_partition({4}, 2, 0, false);
    std::vector<Vector> sample{Vector(4)};
    sample[0] << 10, 11, 12, 13;

    SubsetView v0 = extract_subset(sample, p, 0);
    CHECK(v0.per_omics[0].size() == 2);
    CHECK(v0.per_omics[0][0] == 10);
    CHECK(v0.per_omics[0][1] == 11);

    SubsetView v1 = extract_subset(sample, p, 1);
    CHECK(v1.per_omics[0][0] == 12);
    CHECK(v1.per_omics[0][1] == 13);

    CHECK_THROWS_AS(extract_subset(sample, p, 2), std::out_of_range);
}

TEST_CASE("extract_subset with one subset returns the full sample") {
    Rng rng(4);
    FeaturePartition p = make_partition({5, 3}, 1, 0, false);
    std::vector<Vector> sample{rng.normal_vector(5), rng.normal_vector(3)};
    SubsetView v = extract_subset(sample, p, 0);
    CHECK(v.per_omics[0] == sample[0]);
    CHECK(v.per_omics[1] == sample[1]);
}

TEST_CASE("subset views reassemble to the original sample") {
    Rng rng(9);
    for (bool shuffle : {false, true}) {
        FeaturePartition p = make_partition({11, 7}, 3, 42, shuffle);
        std::vector<Vector> sample{rng.normal_vector(11), rng.normal_vector(7)};
        std::vector<Vector> rebuilt{Vector::Zero(11), Vector::Zero(7)};
        for (int j = 0; j < 3; ++j) {
            SubsetView v = extract_subset(sample, p, j);
            for (std::size_t k = 0; k < 2; ++k) {
                const auto& features = p.subset_features[k][j];
                for (std::size_t i = 0; i < features.size(); ++i) {
                    rebuilt[k][features[i]] = v.per_omics[k][i];
                }
            }
        }
        CHECK(rebuilt[0] == sample[0]);
        CHECK(rebuilt[1] == sample[1]);
    }
}

TEST_CASE("subset identity one-hot") {
    Vector e0 = subset_identity(3, 0);
    CHECK(e0[0] == 1.0);
    CHECK(e0[1] == 0.0);
    CHECK(e0[2] == 0.0);

    Vector e2 = subset_identity(3, 2);
    CHECK(e2[2] == 1.0);
    CHECK(e2.sum() == 1.0);

    CHECK(subset_identity(1, 0).size() == 1);
    CHECK(subset_identity(1, 0)[0] == 1.0);

    CHECK_THROWS_AS(subset_identity(3, 3), std::out_of_range);
    CHECK_THROWS_AS(subset_identity(3, -1), std::out_of_range);
}

TEST_CASE("partition properties over random shapes") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int K = 1 + static_cast<int>(rng.uniform_int(3));
        const int M = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<int> dims;
        for (int k = 0; k < K; ++k) dims.push_back(M + static_cast<int>(rng.uniform_int(40)));
        const std::uint64_t seed = rng.uniform_int(1000);
        const bool shuffle = rng.uniform() < 0.5;

        FeaturePartition p = make_partition(dims, M, seed, shuffle);
        FeaturePartition p2 = make_partition(dims, M, seed, shuffle);
        CHECK(p.assignment == p2.assignment);  // deterministic

        for (int k = 0; k < K; ++k) {
            // disjoint cover
            std::set<int> seen;
            int min_size = dims[k] + 1, max_size = 0;
            for (int j = 0; j < M; ++j) {
                const auto& features = p.subset_features[k][j];
                CHECK(std::is_sorted(features.begin(), features.end()));
                for (int f : features) CHECK(seen.insert(f).second);
                min_size = std::min(min_size, static_cast<int>(features.size()));
                max_size = std::max(max_size, static_cast<int>(features.size()));
            }
            CHECK(static_cast<int>(seen.size()) == dims[k]);
            CHECK(max_size - min_size <= 1);
        }
    }
}

TEST_CASE("shuffled partitions share the size profile of unshuffled ones") {
    FeaturePartition plain = make_partition({13, 8}, 4, 1, false);
    FeaturePartition shuffled_a = make_partition({13, 8}, 4, 1, true);
    FeaturePartition shuffled_b = make_partition({13, 8}, 4, 2, true);
    CHECK(shuffled_a.per_subset_dims == plain.per_subset_dims);
    CHECK(shuffled_b.per_subset_dims == plain.per_subset_dims);
    CHECK(shuffled_a.assignment != shuffled_b.assignment);  // different seeds
}
