#pragma once

#include "movae/data.hpp"
#include "movae/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace movae {

enum class Aggregation { mean, max, min, sum };

Aggregation aggregation_from_name(const std::string& name);
std::string aggregation_name(Aggregation method);

/// Element-wise reduction of equal-length vectors.
Vector aggregate(const std::vector<Vector>& latents, Aggregation method);

// How a prediction is formed from the M subset latents. Inference is
// deterministic (eps = 0, so z = mu); the random_* strategies draw their
// subset per sample from (seed, sample id), independent of iteration order.
struct PredictStrategy {
    enum class Kind { aggregate, random_subset, random_with_identity, fixed_subset };
    Kind kind = Kind::aggregate;
    Aggregation method = Aggregation::mean;
    int subset_index = 0;
    std::uint64_t seed = 0;

    static PredictStrategy parse(const std::string& text, std::uint64_t seed);
    std::string name() const;
};

/// Softmax class probabilities for one sample.
Vector predict(const VaeModel& model, const std::vector<Vector>& sample,
               const PredictStrategy& strategy, const std::string& sample_id = "");

struct MetricsReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double roc_auc = 0.0;
    double mean_metric = 0.0;
    Eigen::MatrixXi confusion;  // rows: truth, columns: prediction
};

/// Metrics from per-sample class probabilities. Macro averages cover classes
/// with at least one true or predicted sample; ROC AUC is one-vs-rest over
/// classes present in the truth. Argmax ties break to the lowest index.
MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<Vector>& probs,
                              int class_count);

MetricsReport evaluate(const VaeModel& model, const MultiOmicsDataset& dataset,
                       const PredictStrategy& strategy);

/// Fraction of correct argmax predictions (used for per-epoch tracking).
double accuracy(const VaeModel& model, const MultiOmicsDataset& dataset,
                const PredictStrategy& strategy);

/// One row per sample: sample_id, class name, then the q latent values
/// (z = mu at eps = 0, aggregated over subsets when M >= 2).
void export_latents(const VaeModel& model, const MultiOmicsDataset& dataset,
                    const std::string& path, Aggregation method = Aggregation::mean);

void write_metrics(const MetricsReport& report, std::ostream& out);

}  // namespace movae
