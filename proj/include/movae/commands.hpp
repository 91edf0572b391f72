#pragma once

#include "movae/eval.hpp"
#include "movae/run_config.hpp"

#include <string>
#include <vector>

namespace movae {

// Command implementations behind the CLI. Each validates its config before
// writing anything and throws on failure.

/// Write synthetic per-omics matrices and a labels file (pre-normalization
/// values; the train pipeline applies the configured preprocessing).
void cmd_synth(const RunConfig& config);

/// Impute and optionally rescale each matrix; write processed matrices plus a
/// provenance summary.
void cmd_preprocess(const RunConfig& config);

/// Full pipeline: load, preprocess, split, train; write final and
/// best-validation checkpoints plus the history log. With `resume`, continue
/// phase-3 training from an existing checkpoint.
void cmd_train(const RunConfig& config, const std::string& resume_checkpoint = "");

/// Evaluate a checkpoint on the held-out test split. In sweep mode, one
/// report per aggregation/selection strategy plus a combined table.
void cmd_evaluate(const RunConfig& config, const std::string& checkpoint_path, bool sweep);

/// Export per-sample latent vectors for external visualization.
void cmd_embed(const RunConfig& config, const std::string& checkpoint_path);

/// Train and evaluate one variant per reduction-factor triple ("8_4_2"),
/// emitting a combined results table.
void cmd_sweep_reduction(const RunConfig& config, const std::vector<std::string>& factors,
                         int jobs);

/// Train and evaluate one variant per subset count.
void cmd_sweep_subsets(const RunConfig& config, const std::vector<int>& counts, int jobs);

// Shared pipeline pieces (also used by tests).
MultiOmicsDataset load_dataset(const RunConfig& config);
ModelConfig resolve_model_config(const RunConfig& config, const MultiOmicsDataset& dataset);
PredictStrategy resolve_strategy(const RunConfig& config, const ModelConfig& model_config);

}  // namespace movae
