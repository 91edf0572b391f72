#include "movae/eval.hpp"
#include "movae/trainer.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace movae;

namespace {

MultiOmicsDataset tiny_dataset(int subsample_seed = 3) {
    SynthConfig cfg;
    cfg.class_count = 3;
    cfg.samples_per_class = 10;
    cfg.omics_dims = {10, 6};
    cfg.seed = static_cast<std::uint64_t>(subsample_seed);
    return synth_generate(cfg);
}

ModelConfig tiny_model(const MultiOmicsDataset& ds, int subsets, bool identity) {
    ModelConfig c;
    c.omics_dims = ds.omics_dims();
    c.class_count = ds.class_count();
    c.subset_count = subsets;
    c.latent_dim = 4;
    c.branch_hidden = 6;
    c.trunk_hidden = 6;
    c.downstream_hidden = 6;
    c.use_subset_identity = identity;
    return c;
}

}  // namespace

TEST_CASE("aggregate reductions") {
    Vector a(2), b(2);
    a << 1, 2;
    b << 3, 4;
    Vector sum = aggregate({a, b}, Aggregation::sum);
    CHECK(sum[0] == 4.0);
    CHECK(sum[1] == 6.0);

    Vector c(2);
    c << -1, 5;
    Vector d(2);
    d << 2, 3;
    Vector mx = aggregate({c, d}, Aggregation::max);
    CHECK(mx[0] == 2.0);
    CHECK(mx[1] == 5.0);
    Vector mn = aggregate({c, d}, Aggregation::min);
    CHECK(mn[0] == -1.0);
    CHECK(mn[1] == 3.0);

    Vector mean = aggregate({a, a, a}, Aggregation::mean);
    CHECK(mean == a);

    for (Aggregation m :
         {Aggregation::mean, Aggregation::max, Aggregation::min, Aggregation::sum}) {
        CHECK(aggregate({b}, m) == b);  // singleton identity
    }
    CHECK_THROWS_AS(aggregate({}, Aggregation::mean), ValidationError);
    CHECK_THROWS_AS(aggregate({a, Vector::Zero(3)}, Aggregation::mean), DimensionError);
}

TEST_CASE("sum equals M times mean") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<Vector> latents;
        for (int j = 0; j < m; ++j) latents.push_back(rng.normal_vector(5));
        Vector sum = aggregate(latents, Aggregation::sum);
        Vector mean = aggregate(latents, Aggregation::mean);
        CHECK((sum - static_cast<double>(m) * mean).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("strategy parsing") {
    CHECK(PredictStrategy::parse("mean", 0).kind == PredictStrategy::Kind::aggregate);
    CHECK(PredictStrategy::parse("sum", 0).method == Aggregation::sum);
    CHECK(PredictStrategy::parse("random_subset", 0).kind == PredictStrategy::Kind::random_subset);
    CHECK(PredictStrategy::parse("subset:2", 0).subset_index == 2);
    CHECK(PredictStrategy::parse("subset:2", 0).name() == "subset:2");
    CHECK_THROWS_AS(PredictStrategy::parse("bogus", 0), ValidationError);
    CHECK_THROWS_AS(PredictStrategy::parse("subset:x", 0), ValidationError);
}

TEST_CASE("prediction strategies coincide for a single subset") {
    MultiOmicsDataset ds = tiny_dataset();
    VaeModel m = build_model(tiny_model(ds, 1, false), 2);
    const std::vector<Vector> sample = ds.sample(0);

    PredictStrategy mean = PredictStrategy::parse("mean", 5);
    PredictStrategy random = PredictStrategy::parse("random_subset", 5);
    PredictStrategy fixed = PredictStrategy::parse("subset:0", 5);
    Vector p1 = predict(m, sample, mean, "s");
    Vector p2 = predict(m, sample, random, "s");
    Vector p3 = predict(m, sample, fixed, "s");
    CHECK(p1 == p2);
    CHECK(p2 == p3);

    // repeated calls are identical (eps = 0 inference)
    CHECK(predict(m, sample, mean, "s") == p1);
}

TEST_CASE("aggregate(mean) over identical latents equals a fixed-subset prediction") {
    MultiOmicsDataset ds = tiny_dataset();
    VaeModel m = build_model(tiny_model(ds, 2, false), 2);
    // zero encoder: every subset produces the same (bias-driven) latent
    for (auto& [name, e] : m.params) {
        if (name.rfind("enc.", 0) == 0) {
            e.W.setZero();
            e.b.setZero();
        }
    }
    const std::vector<Vector> sample = ds.sample(1);
    Vector agg = predict(m, sample, PredictStrategy::parse("mean", 0), "x");
    Vector fixed = predict(m, sample, PredictStrategy::parse("subset:0", 0), "x");
    CHECK((agg - fixed).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("identity strategies require an identity model") {
    MultiOmicsDataset ds = tiny_dataset();
    VaeModel plain = build_model(tiny_model(ds, 2, false), 2);
    CHECK_THROWS_AS(
        predict(plain, ds.sample(0), PredictStrategy::parse("random_with_identity", 0), "s"),
        ValidationError);

    VaeModel with_id = build_model(tiny_model(ds, 2, true), 2);
    Vector p = predict(with_id, ds.sample(0), PredictStrategy::parse("random_with_identity", 0), "s");
    CHECK(p.size() == 3);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);

    CHECK_THROWS_AS(predict(with_id, ds.sample(0), PredictStrategy::parse("subset:5", 0), "s"),
                    std::out_of_range);
}

TEST_CASE("metrics oracle: hand-computed confusion matrix") {
    // truth/prediction pairs realizing rows [[2,0,0],[1,1,0],[0,0,2]]
    std::vector<int> labels{0, 0, 1, 1, 2, 2};
    std::vector<int> predicted{0, 0, 0, 1, 2, 2};
    std::vector<Vector> probs;
    for (int p : predicted) {
        Vector row = Vector::Constant(3, 0.1);
        row[p] = 0.8;
        probs.push_back(row);
    }
    MetricsReport r = compute_metrics(labels, probs, 3);

    Eigen::MatrixXi expected(3, 3);
    expected << 2, 0, 0, 1, 1, 0, 0, 0, 2;
    CHECK(r.confusion == expected);

    // hand calculation:
    //   accuracy = 5/6
    //   precision per class: 2/3, 1, 1 -> macro 8/9
    //   recall per class:    1, 1/2, 1 -> macro 5/6
    //   F1 per class:        4/5, 2/3, 1 -> macro 37/45
    CHECK(r.accuracy == 5.0 / 6.0);
    CHECK(r.macro_precision == (2.0 / 3.0 + 1.0 + 1.0) / 3.0);
    CHECK(r.macro_recall == (1.0 + 0.5 + 1.0) / 3.0);
    CHECK(r.macro_f1 == (4.0 / 5.0 + 2.0 / 3.0 + 1.0) / 3.0);
    CHECK(r.mean_metric == (r.accuracy + r.macro_precision + r.macro_recall) / 3.0);
    CHECK(std::abs(r.mean_metric - 23.0 / 27.0) <= 1e-15);
}

TEST_CASE("perfect and degenerate predictions") {
    std::vector<int> labels{0, 1, 0, 1};
    std::vector<Vector> perfect;
    for (int l : labels) {
        Vector row = Vector::Constant(2, 0.05);
        row[l] = 0.95;
        perfect.push_back(row);
    }
    MetricsReport r = compute_metrics(labels, perfect, 2);
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_precision == 1.0);
    CHECK(r.macro_recall == 1.0);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.roc_auc == 1.0);
    CHECK(r.mean_metric == 1.0);

    // constant single-class prediction on a balanced two-class set
    std::vector<Vector> constant(4, Vector::Zero(2));
    for (auto& row : constant) row << 0.9, 0.1;
    MetricsReport c = compute_metrics(labels, constant, 2);
    CHECK(c.accuracy == 0.5);
    CHECK(c.mean_metric == (c.accuracy + c.macro_precision + c.macro_recall) / 3.0);
}

TEST_CASE("metrics stay within [0,1] and the mean-metric identity always holds") {
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const int C = 2 + static_cast<int>(rng.uniform_int(4));
        const int n = 3 + static_cast<int>(rng.uniform_int(40));
        std::vector<int> labels;
        std::vector<Vector> probs;
        for (int s = 0; s < n; ++s) {
            labels.push_back(static_cast<int>(rng.uniform_int(C)));
            probs.push_back(softmax(rng.normal_vector(C)));
        }
        MetricsReport r = compute_metrics(labels, probs, C);
        for (double v : {r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1, r.roc_auc,
                         r.mean_metric}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(std::abs(r.mean_metric - (r.accuracy + r.macro_precision + r.macro_recall) / 3.0) <=
              1e-12);
        CHECK(r.confusion.sum() == n);
        for (int c = 0; c < C; ++c) {
            int truth = 0;
            for (int l : labels) truth += l == c;
            CHECK(r.confusion.row(c).sum() == truth);
        }
    }
}

TEST_CASE("evaluate is invariant to sample order") {
    MultiOmicsDataset ds = tiny_dataset();
    VaeModel m = build_model(tiny_model(ds, 3, true), 4);

    // reversed copy of the dataset
    MultiOmicsDataset reversed = ds;
    const Eigen::Index n = ds.sample_count();
    for (std::size_t k = 0; k < ds.omics.size(); ++k) {
        for (Eigen::Index s = 0; s < n; ++s) {
            reversed.omics[k].values.col(s) = ds.omics[k].values.col(n - 1 - s);
            reversed.omics[k].sample_ids[static_cast<std::size_t>(s)] =
                ds.omics[k].sample_ids[static_cast<std::size_t>(n - 1 - s)];
        }
    }
    for (Eigen::Index s = 0; s < n; ++s) {
        reversed.labels[static_cast<std::size_t>(s)] = ds.labels[static_cast<std::size_t>(n - 1 - s)];
    }

    for (const char* name : {"mean", "sum", "random_subset", "random_with_identity"}) {
        PredictStrategy strategy = PredictStrategy::parse(name, 77);
        MetricsReport a = evaluate(m, ds, strategy);
        MetricsReport b = evaluate(m, reversed, strategy);
        CHECK(a.accuracy == b.accuracy);
        CHECK(a.macro_f1 == b.macro_f1);
        CHECK(a.roc_auc == b.roc_auc);
        CHECK(a.confusion == b.confusion);
    }

    MultiOmicsDataset empty;
    empty.omics = ds.omics;
    for (auto& m2 : empty.omics) {
        m2.values.resize(m2.feature_count(), 0);
        m2.sample_ids.clear();
    }
    empty.class_names = ds.class_names;
    CHECK_THROWS_AS(evaluate(m, empty, PredictStrategy::parse("mean", 0)), ValidationError);
}

TEST_CASE("export_latents writes one row per sample") {
    MultiOmicsDataset ds = tiny_dataset();
    VaeModel m = build_model(tiny_model(ds, 2, false), 6);
    const std::string path = (std::filesystem::temp_directory_path() /
                              ("movae_latents_" + std::to_string(::getpid()) + ".tsv"))
                                 .string();
    export_latents(m, ds, path, Aggregation::mean);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line.rfind("sample_id\tlabel\tz0", 0) == 0);
    int rows = 0;
    int cols = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        cols = 1 + static_cast<int>(std::count(line.begin(), line.end(), '\t'));
    }
    CHECK(rows == ds.sample_count());
    CHECK(cols == 2 + m.config.latent_dim);

    // deterministic across runs
    std::ostringstream first;
    first << std::ifstream(path).rdbuf();
    export_latents(m, ds, path, Aggregation::mean);
    std::ostringstream second;
    second << std::ifstream(path).rdbuf();
    CHECK(first.str() == second.str());
    std::filesystem::remove(path);
}

TEST_CASE("write_metrics emits key-value lines plus the confusion matrix") {
    MetricsReport r;
    r.accuracy = 0.5;
    r.macro_precision = 0.25;
    r.macro_recall = 0.75;
    r.macro_f1 = 0.4;
    r.roc_auc = 0.9;
    r.mean_metric = 0.5;
    r.confusion = Eigen::MatrixXi::Zero(2, 2);
    r.confusion(0, 0) = 3;
    std::ostringstream out;
    write_metrics(r, out);
    const std::string text = out.str();
    CHECK(text.find("accuracy\t0.5\n") != std::string::npos);
    CHECK(text.find("mean_metric\t0.5\n") != std::string::npos);
    CHECK(text.find("confusion_matrix\n3\t0\n0\t0\n") != std::string::npos);
}
