#pragma once

#include "movae/data.hpp"
#include "movae/model.hpp"
#include "movae/trainer.hpp"

#include <map>
#include <string>
#include <vector>

namespace movae {

// Everything one command needs, read from a sectioned key=value config file.
// Exactly one of {data sources, synth parameters} must be configured.
struct RunConfig {
    // [data]
    std::vector<std::string> matrix_paths;
    std::vector<OmicsKind> matrix_kinds;
    std::string labels_path;
    std::string block_map_path;
    int block_omics = -1;

    // [synth]
    bool use_synth = false;
    SynthConfig synth;

    // [preprocess]
    ImputeStrategy impute_strategy = ImputeStrategy::mean;
    bool apply_unit_norm = true;

    // [model] (omics_dims and class_count are resolved from the data)
    int subset_count = 1;
    int latent_dim = 128;
    int branch_hidden = 512;
    int trunk_hidden = 256;
    int downstream_hidden = 128;
    Reduction reduction;
    ReconLoss recon_loss = ReconLoss::mse;
    ReconTarget recon_target = ReconTarget::full_input;
    bool use_subset_identity = false;
    bool shuffle_features = false;

    // [train]
    PhaseSchedule schedule;

    // [split]
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;

    // [eval]
    std::string eval_strategy = "auto";

    std::string out_dir = "out";
    std::uint64_t seed = 0;

    bool has_data_sources() const { return !matrix_paths.empty(); }
    void validate() const;
};

/// Parse a config file into section-qualified keys ("model.subsets").
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Build a RunConfig from parsed keys; unknown keys are rejected.
RunConfig run_config_from_map(const std::map<std::string, std::string>& kv);

RunConfig load_run_config(const std::string& path);

/// Apply one "section.key=value" override on top of parsed keys.
void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment);

}  // namespace movae
