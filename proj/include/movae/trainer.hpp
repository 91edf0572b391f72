#pragma once

#include "movae/data.hpp"
#include "movae/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace movae {

// Three-phase schedule: unsupervised embedding pretraining, frozen-embedding
// classifier training, joint fine-tuning.
struct PhaseSchedule {
    int phase1_epochs = 50;
    int phase2_epochs = 50;
    int phase3_epochs = 100;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
    int total_epochs() const { return phase1_epochs + phase2_epochs + phase3_epochs; }
};

struct EpochRecord {
    int epoch = 0;  // global, 0-based
    int phase = 0;  // 1..3
    double embed_loss = 0.0;
    double classification_loss = 0.0;
    double joint_loss = 0.0;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

void write_history(const TrainHistory& history, std::ostream& out);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    struct Moments {
        Matrix m_W, v_W;
        Vector m_b, v_b;
    };
    std::map<std::string, Moments> moments;
    long step = 0;
    AdamConfig config;

    explicit AdamState(const ParamStore& params, AdamConfig cfg = {});
};

/// One Adam update with bias correction. Frozen entries are untouched;
/// all gradients are zeroed afterwards.
void adam_step(ParamStore& params, AdamState& state, double lr);

struct TrainResult {
    VaeModel model;
    VaeModel best_model;  // highest validation accuracy (first on ties)
    int best_epoch = -1;
    TrainHistory history;
};

using EpochCallback = std::function<void(const VaeModel&, const EpochRecord&)>;

/// Run the three phases. Phase 1 minimizes the embedding loss and never sees
/// labels; phase 2 freezes encoder and decoder and trains the classifier;
/// phase 3 minimizes the joint loss over everything. Deterministic per seed.
TrainResult train(VaeModel model, const MultiOmicsDataset& train_set,
                  const MultiOmicsDataset& val_set, const PhaseSchedule& schedule,
                  const EpochCallback& on_epoch = {});

// --- checkpointing ------------------------------------------------------------

struct Checkpoint {
    VaeModel model;
    TrainHistory history;
};

/// Versioned binary container: config, feature partition, parameters, and
/// training history. Round-trips bit-exactly.
void save_checkpoint(const VaeModel& model, const TrainHistory& history, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace movae
