#include "movae/eval.hpp"

#include "movae/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

namespace movae {

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "max") return Aggregation::max;
    if (name == "min") return Aggregation::min;
    if (name == "sum") return Aggregation::sum;
    throw ValidationError("unknown aggregation method '" + name + "'");
}

std::string aggregation_name(Aggregation method) {
    switch (method) {
        case Aggregation::mean: return "mean";
        case Aggregation::max: return "max";
        case Aggregation::min: return "min";
        case Aggregation::sum: return "sum";
    }
    return "mean";
}

Vector aggregate(const std::vector<Vector>& latents, Aggregation method) {
    if (latents.empty()) throw ValidationError("aggregate: empty latent list");
    for (const auto& v : latents) {
        if (v.size() != latents[0].size()) {
            throw DimensionError("aggregate: latent lengths differ (" +
                                 std::to_string(latents[0].size()) + " vs " +
                                 std::to_string(v.size()) + ")");
        }
    }
    Vector out = latents[0];
    for (std::size_t i = 1; i < latents.size(); ++i) {
        switch (method) {
            case Aggregation::mean:
            case Aggregation::sum:
                out += latents[i];
                break;
            case Aggregation::max:
                out = out.cwiseMax(latents[i]);
                break;
            case Aggregation::min:
                out = out.cwiseMin(latents[i]);
                break;
        }
    }
    if (method == Aggregation::mean) out /= static_cast<double>(latents.size());
    return out;
}

PredictStrategy PredictStrategy::parse(const std::string& text, std::uint64_t seed) {
    PredictStrategy s;
    s.seed = seed;
    if (text == "mean" || text == "max" || text == "min" || text == "sum") {
        s.kind = Kind::aggregate;
        s.method = aggregation_from_name(text);
    } else if (text == "random_subset") {
        s.kind = Kind::random_subset;
    } else if (text == "random_with_identity") {
        s.kind = Kind::random_with_identity;
    } else if (text.rfind("subset:", 0) == 0) {
        s.kind = Kind::fixed_subset;
        const auto idx = parse_long(text.substr(7));
        if (!idx || *idx < 0) throw ValidationError("bad subset strategy '" + text + "'");
        s.subset_index = static_cast<int>(*idx);
    } else {
        throw ValidationError("unknown prediction strategy '" + text + "'");
    }
    return s;
}

std::string PredictStrategy::name() const {
    switch (kind) {
        case Kind::aggregate: return aggregation_name(method);
        case Kind::random_subset: return "random_subset";
        case Kind::random_with_identity: return "random_with_identity";
        case Kind::fixed_subset: return "subset:" + std::to_string(subset_index);
    }
    return "mean";
}

namespace {

// Latent fed to the classifier for subset j at inference time (z = mu).
// with_identity appends the subset's one-hot; an identity-conditioned model
// evaluated without it gets zeros in the identity slot.
Vector classifier_input(const VaeModel& model, const Vector& z, int j, bool with_identity) {
    if (!model.config.use_subset_identity) return z;
    Vector in = Vector::Zero(model.config.latent_input_dim());
    in.head(model.config.latent_dim) = z;
    if (with_identity) in[model.config.latent_dim + j] = 1.0;
    return in;
}

int draw_subset(const PredictStrategy& strategy, const std::string& sample_id, int M) {
    Rng rng(derive_seed(strategy.seed, sample_id));
    return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(M)));
}

}  // namespace

Vector predict(const VaeModel& model, const std::vector<Vector>& sample,
               const PredictStrategy& strategy, const std::string& sample_id) {
    const int M = model.config.subset_count;
    const Vector eps = Vector::Zero(model.config.latent_dim);

    if (strategy.kind == PredictStrategy::Kind::random_with_identity &&
        !model.config.use_subset_identity) {
        throw ValidationError("predict: random_with_identity needs a subset-identity model");
    }

    Vector latent_in;
    switch (strategy.kind) {
        case PredictStrategy::Kind::aggregate: {
            std::vector<Vector> latents;
            latents.reserve(static_cast<std::size_t>(M));
            for (int j = 0; j < M; ++j) {
                const LatentStats lat = encode(model, extract_subset(sample, model.partition, j), eps);
                latents.push_back(classifier_input(model, lat.z, j, true));
            }
            latent_in = aggregate(latents, strategy.method);
            break;
        }
        case PredictStrategy::Kind::random_subset: {
            const int j = draw_subset(strategy, sample_id, M);
            const LatentStats lat = encode(model, extract_subset(sample, model.partition, j), eps);
            latent_in = classifier_input(model, lat.z, j, false);
            break;
        }
        case PredictStrategy::Kind::random_with_identity: {
            const int j = draw_subset(strategy, sample_id, M);
            const LatentStats lat = encode(model, extract_subset(sample, model.partition, j), eps);
            latent_in = classifier_input(model, lat.z, j, true);
            break;
        }
        case PredictStrategy::Kind::fixed_subset: {
            if (strategy.subset_index < 0 || strategy.subset_index >= M) {
                throw std::out_of_range("predict: subset " + std::to_string(strategy.subset_index) +
                                        " out of range for " + std::to_string(M) + " subsets");
            }
            const int j = strategy.subset_index;
            const LatentStats lat = encode(model, extract_subset(sample, model.partition, j), eps);
            latent_in = classifier_input(model, lat.z, j, true);
            break;
        }
    }
    return softmax(classify(model, latent_in));
}

namespace {

int argmax_lowest(const Vector& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = static_cast<int>(i);
    }
    return best;
}

// Mann-Whitney formulation of one-vs-rest ROC AUC (equivalent to the
// trapezoidal rule over score thresholds, with ties credited 1/2).
double binary_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (positive[order[k]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return -1.0;
    return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<Vector>& probs,
                              int class_count) {
    if (labels.empty()) throw ValidationError("compute_metrics: empty dataset");
    if (labels.size() != probs.size()) {
        throw DimensionError("compute_metrics: " + std::to_string(labels.size()) + " labels vs " +
                             std::to_string(probs.size()) + " probability rows");
    }

    MetricsReport report;
    report.confusion = Eigen::MatrixXi::Zero(class_count, class_count);
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] < 0 || labels[s] >= class_count) {
            throw std::out_of_range("compute_metrics: label out of range");
        }
        report.confusion(labels[s], argmax_lowest(probs[s])) += 1;
    }

    const double n = static_cast<double>(labels.size());
    report.accuracy = static_cast<double>(report.confusion.diagonal().sum()) / n;

    double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
    int macro_classes = 0;
    for (int c = 0; c < class_count; ++c) {
        const double tp = report.confusion(c, c);
        const double truth = report.confusion.row(c).sum();
        const double predicted = report.confusion.col(c).sum();
        if (truth == 0.0 && predicted == 0.0) continue;  // absent class
        ++macro_classes;
        const double precision = predicted > 0.0 ? tp / predicted : 0.0;
        const double recall = truth > 0.0 ? tp / truth : 0.0;
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    report.macro_precision = precision_sum / static_cast<double>(macro_classes);
    report.macro_recall = recall_sum / static_cast<double>(macro_classes);
    report.macro_f1 = f1_sum / static_cast<double>(macro_classes);

    double auc_sum = 0.0;
    int auc_classes = 0;
    std::vector<double> scores(labels.size());
    std::vector<bool> positive(labels.size());
    for (int c = 0; c < class_count; ++c) {
        bool in_truth = false;
        for (std::size_t s = 0; s < labels.size(); ++s) {
            scores[s] = probs[s][c];
            positive[s] = labels[s] == c;
            in_truth = in_truth || positive[s];
        }
        if (!in_truth) continue;
        const double auc = binary_auc(scores, positive);
        if (auc >= 0.0) {
            auc_sum += auc;
            ++auc_classes;
        }
    }
    report.roc_auc = auc_classes > 0 ? auc_sum / static_cast<double>(auc_classes) : 0.0;

    report.mean_metric = (report.accuracy + report.macro_precision + report.macro_recall) / 3.0;
    return report;
}

MetricsReport evaluate(const VaeModel& model, const MultiOmicsDataset& dataset,
                       const PredictStrategy& strategy) {
    if (dataset.sample_count() == 0) throw ValidationError("evaluate: empty dataset");
    std::vector<Vector> probs;
    probs.reserve(static_cast<std::size_t>(dataset.sample_count()));
    for (Eigen::Index s = 0; s < dataset.sample_count(); ++s) {
        probs.push_back(predict(model, dataset.sample(s), strategy,
                                dataset.sample_ids()[static_cast<std::size_t>(s)]));
    }
    return compute_metrics(dataset.labels, probs, model.config.class_count);
}

double accuracy(const VaeModel& model, const MultiOmicsDataset& dataset,
                const PredictStrategy& strategy) {
    if (dataset.sample_count() == 0) throw ValidationError("accuracy: empty dataset");
    Eigen::Index correct = 0;
    for (Eigen::Index s = 0; s < dataset.sample_count(); ++s) {
        const Vector p = predict(model, dataset.sample(s), strategy,
                                 dataset.sample_ids()[static_cast<std::size_t>(s)]);
        if (argmax_lowest(p) == dataset.labels[static_cast<std::size_t>(s)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.sample_count());
}

void export_latents(const VaeModel& model, const MultiOmicsDataset& dataset,
                    const std::string& path, Aggregation method) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const int q = model.config.latent_dim;
    out << "sample_id\tlabel";
    for (int d = 0; d < q; ++d) out << "\tz" << d;
    out << '\n';

    const Vector eps = Vector::Zero(q);
    for (Eigen::Index s = 0; s < dataset.sample_count(); ++s) {
        const std::vector<Vector> sample = dataset.sample(s);
        std::vector<Vector> latents;
        latents.reserve(static_cast<std::size_t>(model.config.subset_count));
        for (int j = 0; j < model.config.subset_count; ++j) {
            latents.push_back(encode(model, extract_subset(sample, model.partition, j), eps).z);
        }
        const Vector z = aggregate(latents, method);
        out << dataset.sample_ids()[static_cast<std::size_t>(s)] << '\t'
            << dataset.class_names[static_cast<std::size_t>(
                   dataset.labels[static_cast<std::size_t>(s)])];
        for (int d = 0; d < q; ++d) out << '\t' << format_double(z[d]);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

void write_metrics(const MetricsReport& report, std::ostream& out) {
    out << "accuracy\t" << format_double(report.accuracy) << '\n'
        << "macro_precision\t" << format_double(report.macro_precision) << '\n'
        << "macro_recall\t" << format_double(report.macro_recall) << '\n'
        << "macro_f1\t" << format_double(report.macro_f1) << '\n'
        << "roc_auc\t" << format_double(report.roc_auc) << '\n'
        << "mean_metric\t" << format_double(report.mean_metric) << '\n';
    out << "confusion_matrix";
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        out << '\n';
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) {
            if (c) out << '\t';
            out << report.confusion(r, c);
        }
    }
    out << '\n';
}

}  // namespace movae
