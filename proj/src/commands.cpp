#include "movae/commands.hpp"

#include "movae/text.hpp"
#include "movae/trainer.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace movae {

namespace fs = std::filesystem;

namespace {

std::string out_path(const RunConfig& config, const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
}

std::vector<OmicsKind> effective_kinds(const RunConfig& config) {
    if (!config.matrix_kinds.empty()) return config.matrix_kinds;
    std::vector<OmicsKind> kinds(config.matrix_paths.size(), OmicsKind::generic);
    return kinds;
}

std::string synth_matrix_name(const MultiOmicsDataset& ds, std::size_t k) {
    std::string kind = omics_kind_name(ds.omics[k].kind);
    if (ds.omics[k].kind == OmicsKind::generic) kind += "_" + std::to_string(k);
    return kind + ".tsv";
}

void check_bce_domain(const MultiOmicsDataset& ds) {
    for (const auto& m : ds.omics) {
        if ((m.values.array() < 0.0).any() || (m.values.array() > 1.0).any()) {
            throw ValidationError("recon_loss bce requires values in [0,1]; matrix " +
                                  omics_kind_name(m.kind) +
                                  " is outside that range after preprocessing");
        }
    }
}

}  // namespace

MultiOmicsDataset load_dataset(const RunConfig& config) {
    if (config.use_synth) {
        MultiOmicsDataset raw = synth_generate_raw(config.synth);
        return config.apply_unit_norm ? unit_norm(std::move(raw)) : std::move(raw);
    }

    const std::vector<OmicsKind> kinds = effective_kinds(config);
    std::vector<OmicsMatrix> matrices;
    matrices.reserve(config.matrix_paths.size());
    for (std::size_t k = 0; k < config.matrix_paths.size(); ++k) {
        OmicsMatrix m = load_matrix(config.matrix_paths[k], kinds[k]);
        matrices.push_back(impute(m, config.impute_strategy));
        if (config.apply_unit_norm) unit_norm_matrix(matrices.back());
    }
    return align_and_label(std::move(matrices), load_labels(config.labels_path));
}

ModelConfig resolve_model_config(const RunConfig& config, const MultiOmicsDataset& dataset) {
    ModelConfig mc;
    mc.omics_dims = dataset.omics_dims();
    mc.class_count = dataset.class_count();
    mc.subset_count = config.subset_count;
    mc.latent_dim = config.latent_dim;
    mc.branch_hidden = config.branch_hidden;
    mc.trunk_hidden = config.trunk_hidden;
    mc.downstream_hidden = config.downstream_hidden;
    mc.reduction = config.reduction;
    mc.recon_loss = config.recon_loss;
    mc.recon_target = config.recon_target;
    mc.use_subset_identity = config.use_subset_identity;
    mc.shuffle_features = config.shuffle_features;
    if (!config.block_map_path.empty()) {
        BlockConfig blocks;
        blocks.omics_index = config.block_omics;
        const BlockMap bm = load_block_map(config.block_map_path);
        blocks.feature_blocks =
            bm.indices_for(dataset.omics[static_cast<std::size_t>(config.block_omics)]);
        blocks.block_count = bm.block_count;
        mc.blocks = std::move(blocks);
    }
    mc.validate();
    if (mc.recon_loss == ReconLoss::bce) check_bce_domain(dataset);
    return mc;
}

PredictStrategy resolve_strategy(const RunConfig& config, const ModelConfig& model_config) {
    if (config.eval_strategy != "auto") {
        const PredictStrategy s = PredictStrategy::parse(config.eval_strategy, config.seed);
        if (s.kind == PredictStrategy::Kind::random_with_identity &&
            !model_config.use_subset_identity) {
            throw ValidationError("eval.strategy random_with_identity needs model.subset_identity");
        }
        if (s.kind == PredictStrategy::Kind::fixed_subset &&
            s.subset_index >= model_config.subset_count) {
            throw ValidationError("eval.strategy subset index out of range");
        }
        return s;
    }
    PredictStrategy s;
    s.seed = config.seed;
    if (model_config.subset_count == 1) {
        s.kind = PredictStrategy::Kind::fixed_subset;
        s.subset_index = 0;
    } else if (model_config.use_subset_identity) {
        s.kind = PredictStrategy::Kind::random_with_identity;
    } else {
        s.kind = PredictStrategy::Kind::aggregate;
        s.method = Aggregation::mean;
    }
    return s;
}

void cmd_synth(const RunConfig& config) {
    config.validate();
    if (!config.use_synth) throw ValidationError("synth: config has no [synth] section");
    const MultiOmicsDataset ds = synth_generate_raw(config.synth);
    ensure_out_dir(config.out_dir);
    for (std::size_t k = 0; k < ds.omics.size(); ++k) {
        save_matrix(ds.omics[k], out_path(config, synth_matrix_name(ds, k)));
    }
    std::vector<std::string> names;
    names.reserve(ds.labels.size());
    for (int label : ds.labels) names.push_back(ds.class_names[static_cast<std::size_t>(label)]);
    save_labels(ds.sample_ids(), names, out_path(config, "labels.tsv"));
    std::cout << "wrote " << ds.omics.size() << " matrices and labels for " << ds.sample_count()
              << " samples to " << config.out_dir << "\n";
}

void cmd_preprocess(const RunConfig& config) {
    config.validate();
    if (!config.has_data_sources()) {
        throw ValidationError("preprocess: config has no [data] matrices");
    }
    const std::vector<OmicsKind> kinds = effective_kinds(config);
    ensure_out_dir(config.out_dir);

    std::ofstream summary(out_path(config, "preprocess_summary.tsv"));
    if (!summary) throw IoError("cannot write preprocess summary");
    summary << "matrix\tstrategy\tmissing_cells\tfeatures_dropped\tfeatures_kept\tunit_norm\n";

    for (std::size_t k = 0; k < config.matrix_paths.size(); ++k) {
        OmicsMatrix m = load_matrix(config.matrix_paths[k], kinds[k]);
        ImputeReport report;
        OmicsMatrix processed = impute(m, config.impute_strategy, &report);
        if (config.apply_unit_norm) unit_norm_matrix(processed);
        const std::string name = fs::path(config.matrix_paths[k]).filename().string();
        save_matrix(processed, out_path(config, "processed_" + name));
        summary << name << '\t' << impute_strategy_name(config.impute_strategy) << '\t'
                << report.missing_cells << '\t' << report.features_dropped << '\t'
                << processed.feature_count() << '\t' << (config.apply_unit_norm ? "true" : "false")
                << '\n';
    }
    std::cout << "wrote processed matrices to " << config.out_dir << "\n";
}

void cmd_train(const RunConfig& config, const std::string& resume_checkpoint) {
    config.validate();
    const MultiOmicsDataset ds = load_dataset(config);
    const ModelConfig mc = resolve_model_config(config, ds);
    const SplitResult splits =
        split(ds, config.train_fraction, config.val_fraction, config.test_fraction, config.seed);

    VaeModel model;
    TrainHistory previous;
    PhaseSchedule schedule = config.schedule;
    if (!resume_checkpoint.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_checkpoint);
        if (ckpt.model.config.omics_dims != mc.omics_dims ||
            ckpt.model.config.class_count != mc.class_count) {
            throw ValidationError("resume: checkpoint does not match the configured dataset");
        }
        model = std::move(ckpt.model);
        previous = std::move(ckpt.history);
        schedule.phase1_epochs = 0;
        schedule.phase2_epochs = 0;
    } else {
        model = build_model(mc, config.seed);
    }

    ensure_out_dir(config.out_dir);
    TrainResult result = train(std::move(model), splits.train, splits.val, schedule);

    TrainHistory history = std::move(previous);
    const int offset = static_cast<int>(history.size());
    for (EpochRecord r : result.history) {
        r.epoch += offset;
        history.push_back(r);
    }

    {
        std::ofstream log(out_path(config, "history.tsv"));
        if (!log) throw IoError("cannot write history log");
        write_history(history, log);
    }
    save_checkpoint(result.model, history, out_path(config, "model_final.ckpt"));
    save_checkpoint(result.best_model, history, out_path(config, "model_best.ckpt"));

    if (!history.empty()) {
        const EpochRecord& last = history.back();
        std::cout << "trained " << history.size() << " epochs; final train accuracy "
                  << format_double(last.train_accuracy) << ", validation accuracy "
                  << format_double(last.validation_accuracy) << "\n";
    }
    std::cout << "checkpoints written to " << config.out_dir << "\n";
}

namespace {

void check_checkpoint_matches(const VaeModel& model, const MultiOmicsDataset& ds) {
    if (model.config.omics_dims != ds.omics_dims()) {
        throw ValidationError("checkpoint feature dims do not match the configured dataset");
    }
    if (model.config.class_count != ds.class_count()) {
        throw ValidationError("checkpoint class count does not match the configured dataset");
    }
}

void write_report_file(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_metrics(report, out);
}

void append_table_row(std::ostream& out, const std::string& variant, const MetricsReport& r) {
    out << variant << '\t' << format_double(r.accuracy) << '\t' << format_double(r.macro_precision)
        << '\t' << format_double(r.macro_recall) << '\t' << format_double(r.macro_f1) << '\t'
        << format_double(r.roc_auc) << '\t' << format_double(r.mean_metric) << '\n';
}

constexpr const char* kTableHeader =
    "variant\taccuracy\tmacro_precision\tmacro_recall\tmacro_f1\troc_auc\tmean_metric\n";

}  // namespace

void cmd_evaluate(const RunConfig& config, const std::string& checkpoint_path, bool sweep) {
    config.validate();
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const MultiOmicsDataset ds = load_dataset(config);
    check_checkpoint_matches(ckpt.model, ds);
    const SplitResult splits =
        split(ds, config.train_fraction, config.val_fraction, config.test_fraction, config.seed);

    std::vector<PredictStrategy> strategies;
    if (sweep) {
        for (const char* name : {"max", "mean", "min", "random_subset", "sum"}) {
            strategies.push_back(PredictStrategy::parse(name, config.seed));
        }
        if (ckpt.model.config.use_subset_identity) {
            strategies.push_back(PredictStrategy::parse("random_with_identity", config.seed));
        }
    } else {
        strategies.push_back(resolve_strategy(config, ckpt.model.config));
    }

    ensure_out_dir(config.out_dir);
    std::ofstream table;
    if (sweep) {
        table.open(out_path(config, "evaluation_sweep.tsv"));
        if (!table) throw IoError("cannot write sweep table");
        table << kTableHeader;
    }
    for (const auto& strategy : strategies) {
        const MetricsReport report = evaluate(ckpt.model, splits.test, strategy);
        std::cout << "== strategy " << strategy.name() << " (test split, " << splits.test.sample_count()
                  << " samples)\n";
        write_metrics(report, std::cout);
        write_report_file(report, out_path(config, "metrics_" + strategy.name() + ".tsv"));
        if (sweep) append_table_row(table, strategy.name(), report);
    }
}

void cmd_embed(const RunConfig& config, const std::string& checkpoint_path) {
    config.validate();
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const MultiOmicsDataset ds = load_dataset(config);
    check_checkpoint_matches(ckpt.model, ds);

    Aggregation method = Aggregation::mean;
    if (config.eval_strategy != "auto") {
        const PredictStrategy s = PredictStrategy::parse(config.eval_strategy, config.seed);
        if (s.kind == PredictStrategy::Kind::aggregate) method = s.method;
    }
    ensure_out_dir(config.out_dir);
    const std::string path = out_path(config, "latents.tsv");
    export_latents(ckpt.model, ds, path, method);
    std::cout << "wrote " << ds.sample_count() << " latent vectors to " << path << "\n";
}

namespace {

MetricsReport train_and_evaluate_variant(const RunConfig& variant, const MultiOmicsDataset& ds) {
    const ModelConfig mc = resolve_model_config(variant, ds);
    const SplitResult splits =
        split(ds, variant.train_fraction, variant.val_fraction, variant.test_fraction, variant.seed);
    TrainResult result = train(build_model(mc, variant.seed), splits.train, splits.val,
                               variant.schedule);
    ensure_out_dir(variant.out_dir);
    {
        std::ofstream log((fs::path(variant.out_dir) / "history.tsv").string());
        write_history(result.history, log);
    }
    save_checkpoint(result.model, result.history,
                    (fs::path(variant.out_dir) / "model_final.ckpt").string());
    return evaluate(result.model, splits.test, resolve_strategy(variant, mc));
}

void run_variants(const std::vector<RunConfig>& variants, std::vector<MetricsReport>& reports,
                  const MultiOmicsDataset& ds, int jobs) {
    reports.resize(variants.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < variants.size(); ++i) {
            reports[i] = train_and_evaluate_variant(variants[i], ds);
        }
        return;
    }
    // Independent runs; the shared dataset is read-only.
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(variants.size());
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= variants.size()) return;
                try {
                    reports[i] = train_and_evaluate_variant(variants[i], ds);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

void cmd_sweep_reduction(const RunConfig& config, const std::vector<std::string>& factors,
                         int jobs) {
    config.validate();
    if (factors.empty()) throw ValidationError("sweep: no reduction factors given");
    const MultiOmicsDataset ds = load_dataset(config);

    std::vector<RunConfig> variants;
    for (const auto& f : factors) {
        const auto parts = split_on(f, '_');
        if (parts.size() != 3) {
            throw ValidationError("sweep: reduction factor must look like 8_4_2, got '" + f + "'");
        }
        RunConfig v = config;
        const auto e = parse_long(parts[0]);
        const auto d = parse_long(parts[1]);
        const auto w = parse_long(parts[2]);
        if (!e || !d || !w) throw ValidationError("sweep: bad reduction factor '" + f + "'");
        v.reduction = {static_cast<int>(*e), static_cast<int>(*d), static_cast<int>(*w)};
        v.out_dir = (fs::path(config.out_dir) / "sweep_reduction" / f).string();
        variants.push_back(std::move(v));
    }

    std::vector<MetricsReport> reports;
    run_variants(variants, reports, ds, jobs);

    ensure_out_dir(config.out_dir);
    std::ofstream table(out_path(config, "sweep_reduction.tsv"));
    if (!table) throw IoError("cannot write sweep table");
    table << kTableHeader;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        append_table_row(table, factors[i], reports[i]);
        append_table_row(std::cout, factors[i], reports[i]);
    }
}

void cmd_sweep_subsets(const RunConfig& config, const std::vector<int>& counts, int jobs) {
    config.validate();
    if (counts.empty()) throw ValidationError("sweep: no subset counts given");
    const MultiOmicsDataset ds = load_dataset(config);

    std::vector<RunConfig> variants;
    for (int m : counts) {
        if (m < 1) throw ValidationError("sweep: subset counts must be >= 1");
        RunConfig v = config;
        v.subset_count = m;
        if (m == 1) v.use_subset_identity = false;
        v.out_dir = (fs::path(config.out_dir) / "sweep_subsets" / std::to_string(m)).string();
        variants.push_back(std::move(v));
    }

    std::vector<MetricsReport> reports;
    run_variants(variants, reports, ds, jobs);

    ensure_out_dir(config.out_dir);
    std::ofstream table(out_path(config, "sweep_subsets.tsv"));
    if (!table) throw IoError("cannot write sweep table");
    table << kTableHeader;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        append_table_row(table, std::to_string(counts[i]), reports[i]);
        append_table_row(std::cout, std::to_string(counts[i]), reports[i]);
    }
}

}  // namespace movae
