#include "movae/data.hpp"

#include "movae/rng.hpp"
#include "movae/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace movae {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(const std::string& cell) {
    const std::string t = lowercase(trim(cell));
    return t.empty() || t == "na" || t == "nan";
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

}  // namespace

std::string omics_kind_name(OmicsKind kind) {
    switch (kind) {
        case OmicsKind::gene_expression: return "gene_expression";
        case OmicsKind::dna_methylation: return "dna_methylation";
        case OmicsKind::mirna_expression: return "mirna_expression";
        case OmicsKind::generic: return "generic";
    }
    return "generic";
}

OmicsKind omics_kind_from_name(const std::string& name) {
    if (name == "gene_expression") return OmicsKind::gene_expression;
    if (name == "dna_methylation") return OmicsKind::dna_methylation;
    if (name == "mirna_expression") return OmicsKind::mirna_expression;
    if (name == "generic") return OmicsKind::generic;
    throw ValidationError("unknown omics kind '" + name + "'");
}

ImputeStrategy impute_strategy_from_name(const std::string& name) {
    if (name == "mean") return ImputeStrategy::mean;
    if (name == "zero") return ImputeStrategy::zero;
    if (name == "drop_features") return ImputeStrategy::drop_features;
    throw ValidationError("unknown imputation strategy '" + name + "'");
}

std::string impute_strategy_name(ImputeStrategy s) {
    switch (s) {
        case ImputeStrategy::mean: return "mean";
        case ImputeStrategy::zero: return "zero";
        case ImputeStrategy::drop_features: return "drop_features";
    }
    return "mean";
}

std::vector<int> MultiOmicsDataset::omics_dims() const {
    std::vector<int> dims;
    dims.reserve(omics.size());
    for (const auto& m : omics) dims.push_back(static_cast<int>(m.feature_count()));
    return dims;
}

std::vector<Vector> MultiOmicsDataset::sample(Eigen::Index s) const {
    std::vector<Vector> x;
    x.reserve(omics.size());
    for (const auto& m : omics) x.push_back(m.values.col(s));
    return x;
}

std::vector<int> BlockMap::indices_for(const OmicsMatrix& m) const {
    std::vector<int> idx(m.feature_ids.size());
    for (std::size_t i = 0; i < m.feature_ids.size(); ++i) {
        auto it = assignments.find(m.feature_ids[i]);
        if (it == assignments.end()) {
            throw ValidationError("block map has no entry for feature '" + m.feature_ids[i] + "'");
        }
        idx[i] = it->second;
    }
    return idx;
}

OmicsMatrix load_matrix(const std::string& path, OmicsKind kind) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_tabs(line);
    if (header.size() < 2) {
        throw ParseError(path + ":1: header needs a feature column and at least one sample");
    }
    OmicsMatrix m;
    m.kind = kind;
    m.sample_ids.assign(header.begin() + 1, header.end());
    {
        std::unordered_set<std::string> seen;
        for (const auto& id : m.sample_ids) {
            if (id.empty()) throw ParseError(path + ":1: empty sample id in header");
            if (!seen.insert(id).second) {
                throw ValidationError(path + ": duplicate sample id '" + id + "'");
            }
        }
    }

    const std::size_t n_samples = m.sample_ids.size();
    std::vector<std::vector<double>> rows;
    std::unordered_set<std::string> seen_features;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != n_samples + 1) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(n_samples + 1) + " columns, got " +
                             std::to_string(fields.size()));
        }
        if (!seen_features.insert(fields[0]).second) {
            throw ValidationError(path + ": duplicate feature id '" + fields[0] + "'");
        }
        m.feature_ids.push_back(fields[0]);
        std::vector<double> row(n_samples);
        for (std::size_t j = 0; j < n_samples; ++j) {
            if (is_missing_token(fields[j + 1])) {
                row[j] = kMissing;
            } else if (auto v = parse_double(trim(fields[j + 1]))) {
                row[j] = *v;
            } else {
                row[j] = kMissing;  // unparseable numeric cell
            }
        }
        rows.push_back(std::move(row));
    }

    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_samples));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < n_samples; ++j) {
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

void save_matrix(const OmicsMatrix& m, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "feature_id";
    for (const auto& id : m.sample_ids) out << '\t' << id;
    out << '\n';
    for (Eigen::Index i = 0; i < m.feature_count(); ++i) {
        out << m.feature_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.sample_count(); ++j) {
            const double v = m.values(i, j);
            out << '\t' << (std::isnan(v) ? std::string("NA") : format_double(v));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

std::map<std::string, std::string> load_labels(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
    std::map<std::string, std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != 2) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 2 columns, got " +
                             std::to_string(fields.size()));
        }
        if (!labels.emplace(fields[0], fields[1]).second) {
            throw ValidationError(path + ": duplicate sample id '" + fields[0] + "'");
        }
    }
    return labels;
}

void save_labels(const std::vector<std::string>& sample_ids,
                 const std::vector<std::string>& class_names_per_sample, const std::string& path) {
    if (sample_ids.size() != class_names_per_sample.size()) {
        throw DimensionError("save_labels: " + std::to_string(sample_ids.size()) + " ids vs " +
                             std::to_string(class_names_per_sample.size()) + " labels");
    }
    std::ofstream out = open_output(path);
    out << "sample_id\tclass\n";
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        out << sample_ids[i] << '\t' << class_names_per_sample[i] << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

BlockMap load_block_map(const std::string& path) {
    std::ifstream in = open_input(path);
    BlockMap bm;
    std::string line;
    std::size_t line_no = 0;
    int max_block = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != 2) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 2 columns");
        }
        const auto idx = parse_long(trim(fields[1]));
        if (!idx) {
            if (line_no == 1) continue;  // header row
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad block index '" +
                             fields[1] + "'");
        }
        if (*idx < 0) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": negative block index");
        }
        if (!bm.assignments.emplace(fields[0], static_cast<int>(*idx)).second) {
            throw ValidationError(path + ": duplicate feature id '" + fields[0] + "'");
        }
        max_block = std::max(max_block, static_cast<int>(*idx));
    }
    bm.block_count = max_block + 1;
    std::vector<bool> present(static_cast<std::size_t>(bm.block_count), false);
    for (const auto& [id, b] : bm.assignments) present[static_cast<std::size_t>(b)] = true;
    for (int b = 0; b < bm.block_count; ++b) {
        if (!present[static_cast<std::size_t>(b)]) {
            throw ValidationError(path + ": block indices not contiguous, block " +
                                  std::to_string(b) + " is empty");
        }
    }
    return bm;
}

OmicsMatrix impute(const OmicsMatrix& matrix, ImputeStrategy strategy, ImputeReport* report) {
    OmicsMatrix out = matrix;
    ImputeReport local;
    const Eigen::Index n = matrix.sample_count();
    std::vector<bool> drop(static_cast<std::size_t>(matrix.feature_count()), false);

    for (Eigen::Index i = 0; i < matrix.feature_count(); ++i) {
        double sum = 0.0;
        Eigen::Index observed = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = matrix.values(i, j);
            if (std::isnan(v)) continue;
            sum += v;
            ++observed;
        }
        const Eigen::Index missing = n - observed;
        local.missing_cells += missing;
        if (missing == 0) continue;
        switch (strategy) {
            case ImputeStrategy::mean: {
                if (observed == 0) {
                    throw ValidationError("impute(mean): feature '" +
                                          matrix.feature_ids[static_cast<std::size_t>(i)] +
                                          "' has no observed values");
                }
                const double mean = sum / static_cast<double>(observed);
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (std::isnan(out.values(i, j))) out.values(i, j) = mean;
                }
                break;
            }
            case ImputeStrategy::zero:
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (std::isnan(out.values(i, j))) out.values(i, j) = 0.0;
                }
                break;
            case ImputeStrategy::drop_features:
                drop[static_cast<std::size_t>(i)] = true;
                break;
        }
    }

    if (strategy == ImputeStrategy::drop_features) {
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < matrix.feature_count(); ++i) {
            if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);
        }
        local.features_dropped = matrix.feature_count() - static_cast<Eigen::Index>(keep.size());
        OmicsMatrix kept;
        kept.kind = matrix.kind;
        kept.sample_ids = matrix.sample_ids;
        kept.values.resize(static_cast<Eigen::Index>(keep.size()), n);
        kept.feature_ids.reserve(keep.size());
        for (std::size_t r = 0; r < keep.size(); ++r) {
            kept.feature_ids.push_back(matrix.feature_ids[static_cast<std::size_t>(keep[r])]);
            kept.values.row(static_cast<Eigen::Index>(r)) = matrix.values.row(keep[r]);
        }
        out = std::move(kept);
    }

    if (report) *report = local;
    return out;
}

void unit_norm_matrix(OmicsMatrix& m) {
    for (Eigen::Index j = 0; j < m.sample_count(); ++j) {
        const double norm = m.values.col(j).norm();
        if (norm > 0.0) m.values.col(j) /= norm;
    }
}

MultiOmicsDataset unit_norm(MultiOmicsDataset dataset) {
    for (auto& m : dataset.omics) {
        if (m.has_missing()) throw ValidationError("unit_norm: matrix still has missing values");
        unit_norm_matrix(m);
    }
    return dataset;
}

MultiOmicsDataset align_and_label(std::vector<OmicsMatrix> matrices,
                                  const std::map<std::string, std::string>& labels) {
    if (matrices.empty()) throw ValidationError("align_and_label: no matrices");

    // Shared sample order: first matrix's order filtered by the intersection.
    std::vector<std::string> shared;
    for (const auto& id : matrices[0].sample_ids) {
        bool everywhere = labels.count(id) > 0;
        for (std::size_t k = 1; everywhere && k < matrices.size(); ++k) {
            const auto& ids = matrices[k].sample_ids;
            everywhere = std::find(ids.begin(), ids.end(), id) != ids.end();
        }
        if (everywhere) shared.push_back(id);
    }
    if (shared.empty()) {
        std::string counts = "labels=" + std::to_string(labels.size());
        for (std::size_t k = 0; k < matrices.size(); ++k) {
            counts += ", " + omics_kind_name(matrices[k].kind) + "[" + std::to_string(k) +
                      "]=" + std::to_string(matrices[k].sample_ids.size());
        }
        throw ValidationError("align_and_label: no samples shared by all sources (" + counts + ")");
    }

    MultiOmicsDataset ds;
    ds.omics.reserve(matrices.size());
    for (auto& m : matrices) {
        std::unordered_map<std::string, Eigen::Index> pos;
        for (std::size_t j = 0; j < m.sample_ids.size(); ++j) {
            pos[m.sample_ids[j]] = static_cast<Eigen::Index>(j);
        }
        OmicsMatrix aligned;
        aligned.kind = m.kind;
        aligned.feature_ids = m.feature_ids;
        aligned.sample_ids = shared;
        aligned.values.resize(m.feature_count(), static_cast<Eigen::Index>(shared.size()));
        for (std::size_t j = 0; j < shared.size(); ++j) {
            aligned.values.col(static_cast<Eigen::Index>(j)) = m.values.col(pos.at(shared[j]));
        }
        if (aligned.has_missing()) {
            throw ValidationError("align_and_label: matrix " + omics_kind_name(m.kind) +
                                  " still has missing values; impute first");
        }
        ds.omics.push_back(std::move(aligned));
    }

    std::set<std::string> names;
    for (const auto& id : shared) names.insert(labels.at(id));
    ds.class_names.assign(names.begin(), names.end());
    std::map<std::string, int> index;
    for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
        index[ds.class_names[c]] = static_cast<int>(c);
    }
    ds.labels.reserve(shared.size());
    for (const auto& id : shared) ds.labels.push_back(index.at(labels.at(id)));
    return ds;
}

namespace {

MultiOmicsDataset take_samples(const MultiOmicsDataset& ds, const std::vector<Eigen::Index>& idx) {
    MultiOmicsDataset out;
    out.class_names = ds.class_names;
    out.labels.reserve(idx.size());
    for (Eigen::Index s : idx) out.labels.push_back(ds.labels[static_cast<std::size_t>(s)]);
    out.omics.reserve(ds.omics.size());
    for (const auto& m : ds.omics) {
        OmicsMatrix part;
        part.kind = m.kind;
        part.feature_ids = m.feature_ids;
        part.values.resize(m.feature_count(), static_cast<Eigen::Index>(idx.size()));
        part.sample_ids.reserve(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            part.sample_ids.push_back(m.sample_ids[static_cast<std::size_t>(idx[j])]);
            part.values.col(static_cast<Eigen::Index>(j)) = m.values.col(idx[j]);
        }
        out.omics.push_back(std::move(part));
    }
    return out;
}

}  // namespace

SplitResult split(const MultiOmicsDataset& dataset, double train_fraction, double val_fraction,
                  double test_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || val_fraction <= 0.0 || test_fraction <= 0.0) {
        throw ValidationError("split: fractions must be positive");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
        throw ValidationError("split: fractions must sum to 1");
    }

    const int C = dataset.class_count();
    std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(C));
    for (std::size_t s = 0; s < dataset.labels.size(); ++s) {
        by_class[static_cast<std::size_t>(dataset.labels[s])].push_back(
            static_cast<Eigen::Index>(s));
    }

    Rng rng(seed);
    std::vector<Eigen::Index> train_idx, val_idx, test_idx;
    for (int c = 0; c < C; ++c) {
        auto& members = by_class[static_cast<std::size_t>(c)];
        if (members.empty()) continue;
        if (members.size() < 3) {
            throw ValidationError("split: class '" + dataset.class_names[static_cast<std::size_t>(c)] +
                                  "' has " + std::to_string(members.size()) +
                                  " samples, fewer than the 3 split parts");
        }
        rng.shuffle(members);
        const std::size_t n = members.size();
        const std::size_t n_train = static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
        const std::size_t n_val = static_cast<std::size_t>(static_cast<double>(n) * val_fraction);
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) {
                train_idx.push_back(members[i]);
            } else if (i < n_train + n_val) {
                val_idx.push_back(members[i]);
            } else {
                test_idx.push_back(members[i]);
            }
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    SplitResult result;
    result.train = take_samples(dataset, train_idx);
    result.val = take_samples(dataset, val_idx);
    result.test = take_samples(dataset, test_idx);
    return result;
}

MultiOmicsDataset synth_generate_raw(const SynthConfig& config) {
    if (config.class_count <= 0) throw ValidationError("synth: class_count must be positive");
    if (config.samples_per_class <= 0) {
        throw ValidationError("synth: samples_per_class must be positive");
    }
    if (config.omics_dims.empty()) throw ValidationError("synth: need at least one omics type");
    for (int d : config.omics_dims) {
        if (d <= 0) throw ValidationError("synth: omics dims must be positive");
    }
    if (config.informative_fraction <= 0.0 || config.informative_fraction > 1.0) {
        throw ValidationError("synth: informative_fraction must be in (0,1]");
    }
    if (config.noise_sigma < 0.0) throw ValidationError("synth: noise_sigma must be nonnegative");

    Rng rng(config.seed);
    const int C = config.class_count;
    const int per_class = config.samples_per_class;
    const Eigen::Index n = static_cast<Eigen::Index>(C) * per_class;

    MultiOmicsDataset ds;
    ds.class_names.reserve(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) ds.class_names.push_back("class_" + std::to_string(c));
    ds.labels.reserve(static_cast<std::size_t>(n));
    std::vector<std::string> sample_ids;
    sample_ids.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index s = 0; s < n; ++s) {
        ds.labels.push_back(static_cast<int>(s) % C);
        std::string id = std::to_string(s);
        sample_ids.push_back("S" + std::string(5 - std::min<std::size_t>(5, id.size()), '0') + id);
    }

    static const OmicsKind kDefaultKinds[] = {OmicsKind::gene_expression,
                                              OmicsKind::dna_methylation,
                                              OmicsKind::mirna_expression};
    // Adjacent class levels sit 4 noise standard deviations apart in every
    // informative coordinate; the class->level ordering is re-drawn per
    // feature so no single direction carries all classes.
    const double gap = 4.0 * config.noise_sigma;
    for (std::size_t k = 0; k < config.omics_dims.size(); ++k) {
        const Eigen::Index d = config.omics_dims[k];
        OmicsMatrix m;
        m.kind = k < 3 ? kDefaultKinds[k] : OmicsKind::generic;
        m.sample_ids = sample_ids;
        m.feature_ids.reserve(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) {
            m.feature_ids.push_back("f" + std::to_string(k) + "_" + std::to_string(i));
        }
        // Stripe informative features across the index range so any
        // contiguous feature chunk carries its share of class signal.
        std::vector<bool> informative(static_cast<std::size_t>(d), false);
        bool any_informative = false;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double f = config.informative_fraction;
            if (std::floor(static_cast<double>(i + 1) * f) >
                std::floor(static_cast<double>(i) * f)) {
                informative[static_cast<std::size_t>(i)] = true;
                any_informative = true;
            }
        }
        if (!any_informative) informative[0] = true;

        Matrix means(d, C);
        for (Eigen::Index i = 0; i < d; ++i) {
            if (informative[static_cast<std::size_t>(i)]) {
                std::vector<int> order(static_cast<std::size_t>(C));
                for (int c = 0; c < C; ++c) order[static_cast<std::size_t>(c)] = c;
                rng.shuffle(order);
                const double base = 0.3 + 0.4 * rng.uniform();
                for (int c = 0; c < C; ++c) {
                    means(i, c) = base + gap * order[static_cast<std::size_t>(c)];
                }
            } else {
                const double base = 0.25 + 0.5 * rng.uniform();
                for (int c = 0; c < C; ++c) means(i, c) = base;
            }
        }

        m.values.resize(d, n);
        for (Eigen::Index s = 0; s < n; ++s) {
            const int c = ds.labels[static_cast<std::size_t>(s)];
            for (Eigen::Index i = 0; i < d; ++i) {
                m.values(i, s) = means(i, c) + config.noise_sigma * rng.normal();
            }
        }
        ds.omics.push_back(std::move(m));
    }
    return ds;
}

MultiOmicsDataset synth_generate(const SynthConfig& config) {
    return unit_norm(synth_generate_raw(config));
}

}  // namespace movae
