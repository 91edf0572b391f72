#include "movae/trainer.hpp"

#include "movae/eval.hpp"
#include "movae/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

namespace movae {

void PhaseSchedule::validate() const {
    if (phase1_epochs < 0 || phase2_epochs < 0 || phase3_epochs < 0) {
        throw ValidationError("schedule: epoch counts must be nonnegative");
    }
    if (batch_size < 1) throw ValidationError("schedule: batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("schedule: learning rate must be positive");
}

void write_history(const TrainHistory& history, std::ostream& out) {
    out << "epoch\tphase\tembed_loss\tclassification_loss\tjoint_loss\ttrain_accuracy\t"
           "validation_accuracy\n";
    for (const auto& r : history) {
        out << r.epoch << '\t' << r.phase << '\t' << format_double(r.embed_loss) << '\t'
            << format_double(r.classification_loss) << '\t' << format_double(r.joint_loss) << '\t'
            << format_double(r.train_accuracy) << '\t' << format_double(r.validation_accuracy)
            << '\n';
    }
}

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : config(cfg) {
    for (const auto& [name, e] : params) {
        Moments m;
        m.m_W = Matrix::Zero(e.W.rows(), e.W.cols());
        m.v_W = Matrix::Zero(e.W.rows(), e.W.cols());
        m.m_b = Vector::Zero(e.b.size());
        m.v_b = Vector::Zero(e.b.size());
        moments.emplace(name, std::move(m));
    }
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
    ++state.step;
    const double b1 = state.config.beta1;
    const double b2 = state.config.beta2;
    const double eps = state.config.epsilon;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (auto& [name, entry] : params) {
        if (entry.frozen) {
            entry.zero_grads();
            continue;
        }
        auto it = state.moments.find(name);
        if (it == state.moments.end()) {
            throw ValidationError("adam_step: no moments for entry '" + name + "'");
        }
        AdamState::Moments& m = it->second;
        m.m_W = b1 * m.m_W + (1.0 - b1) * entry.grad_W;
        m.v_W = b2 * m.v_W + (1.0 - b2) * entry.grad_W.cwiseProduct(entry.grad_W);
        entry.W.array() -=
            lr * (m.m_W.array() / bc1) / ((m.v_W.array() / bc2).sqrt() + eps);

        m.m_b = b1 * m.m_b + (1.0 - b1) * entry.grad_b;
        m.v_b = b2 * m.v_b + (1.0 - b2) * entry.grad_b.cwiseProduct(entry.grad_b);
        entry.b.array() -=
            lr * (m.m_b.array() / bc1) / ((m.v_b.array() / bc2).sqrt() + eps);

        entry.zero_grads();
    }
}

namespace {

void check_dataset(const VaeModel& model, const MultiOmicsDataset& ds, const std::string& which) {
    const std::vector<int> dims = ds.omics_dims();
    if (dims != model.config.omics_dims) {
        std::string got, want;
        for (int d : dims) got += std::to_string(d) + " ";
        for (int d : model.config.omics_dims) want += std::to_string(d) + " ";
        throw ValidationError("train: " + which + " set dims [" + got + "] do not match model [" +
                              want + "]");
    }
    for (int label : ds.labels) {
        if (label < 0 || label >= model.config.class_count) {
            throw ValidationError("train: " + which + " set label " + std::to_string(label) +
                                  " out of range for " + std::to_string(model.config.class_count) +
                                  " classes");
        }
    }
}

PredictStrategy tracking_strategy(const VaeModel& model) {
    PredictStrategy s;
    if (model.config.subset_count == 1) {
        s.kind = PredictStrategy::Kind::fixed_subset;
        s.subset_index = 0;
    } else {
        s.kind = PredictStrategy::Kind::aggregate;
        s.method = Aggregation::mean;
    }
    return s;
}

}  // namespace

TrainResult train(VaeModel model, const MultiOmicsDataset& train_set,
                  const MultiOmicsDataset& val_set, const PhaseSchedule& schedule,
                  const EpochCallback& on_epoch) {
    schedule.validate();
    check_dataset(model, train_set, "train");
    if (val_set.sample_count() > 0) check_dataset(model, val_set, "validation");
    if (train_set.sample_count() == 0) throw ValidationError("train: empty training set");

    Rng rng(schedule.seed);
    AdamState adam(model.params);
    const int M = model.config.subset_count;
    const int q = model.config.latent_dim;
    // KL averaged per latent dimension, so the prior pull stays commensurate
    // with the per-feature-mean reconstruction term at any latent width.
    const double kl_weight = 1.0 / static_cast<double>(q);
    const PredictStrategy tracker = tracking_strategy(model);

    TrainResult result;
    result.best_epoch = -1;
    double best_val = -1.0;
    int global_epoch = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.sample_count()));
    std::iota(order.begin(), order.end(), 0);

    auto run_phase = [&](int phase, int epochs) {
        if (epochs <= 0) return;
        model.params.unfreeze_all();
        if (phase == 1) {
            model.params.set_frozen("down.", true);
        } else if (phase == 2) {
            model.params.set_frozen("enc.", true);
            model.params.set_frozen("dec.", true);
        }

        for (int e = 0; e < epochs; ++e) {
            rng.shuffle(order);
            double embed_sum = 0.0;
            double class_sum = 0.0;
            double joint_sum = 0.0;

            for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
                const std::size_t stop =
                    std::min(order.size(), start + static_cast<std::size_t>(schedule.batch_size));
                model.params.zero_grads();
                for (std::size_t i = start; i < stop; ++i) {
                    const Eigen::Index s = order[i];
                    const std::vector<Vector> sample = train_set.sample(s);
                    LossBreakdown lb;
                    if (phase == 1) {
                        std::vector<Vector> eps(static_cast<std::size_t>(M));
                        for (auto& v : eps) v = rng.normal_vector(q);
                        lb.embed = embed_backprop(model, sample, eps, 1.0, kl_weight);
                        lb.joint = lb.embed;
                    } else if (phase == 2) {
                        const int j = static_cast<int>(rng.uniform_int(M));
                        const Vector eps = rng.normal_vector(q);
                        lb.classification = classification_backprop(
                            model, sample, eps, j,
                            train_set.labels[static_cast<std::size_t>(s)], 1.0);
                        lb.joint = lb.classification;
                    } else {
                        std::vector<Vector> eps(static_cast<std::size_t>(M));
                        for (auto& v : eps) v = rng.normal_vector(q);
                        const int j = static_cast<int>(rng.uniform_int(M));
                        lb = joint_backprop(model, sample, eps, j,
                                            train_set.labels[static_cast<std::size_t>(s)], 1.0,
                                            1.0, kl_weight);
                    }
                    if (!std::isfinite(lb.joint)) {
                        throw std::runtime_error(
                            "train: non-finite loss at phase " + std::to_string(phase) +
                            ", epoch " + std::to_string(global_epoch) + ", batch " +
                            std::to_string(start / schedule.batch_size));
                    }
                    embed_sum += lb.embed;
                    class_sum += lb.classification;
                    joint_sum += lb.joint;
                }
                model.params.scale_grads(1.0 / static_cast<double>(stop - start));
                adam_step(model.params, adam, schedule.learning_rate);
            }

            EpochRecord record;
            record.epoch = global_epoch;
            record.phase = phase;
            const double n = static_cast<double>(order.size());
            record.embed_loss = embed_sum / n;
            record.classification_loss = class_sum / n;
            record.joint_loss = joint_sum / n;
            record.train_accuracy = accuracy(model, train_set, tracker);
            record.validation_accuracy =
                val_set.sample_count() > 0 ? accuracy(model, val_set, tracker) : 0.0;
            result.history.push_back(record);
            if (record.validation_accuracy > best_val) {
                best_val = record.validation_accuracy;
                result.best_model = model;
                result.best_epoch = global_epoch;
            }
            if (on_epoch) on_epoch(model, record);
            ++global_epoch;
        }
    };

    run_phase(1, schedule.phase1_epochs);
    run_phase(2, schedule.phase2_epochs);
    run_phase(3, schedule.phase3_epochs);

    model.params.unfreeze_all();
    if (result.best_epoch < 0) result.best_model = model;
    result.model = std::move(model);
    return result;
}

// --- checkpoint format --------------------------------------------------------
//
// "MOVAECK1" magic, then little-endian fields: model config, per-omics subset
// assignment, named parameter entries (row-major doubles), training history.

namespace {

constexpr char kMagic[8] = {'M', 'O', 'V', 'A', 'E', 'C', 'K', '1'};

void put_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void put_i64(std::ostream& out, std::int64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<char*>(&v), 8); }
void put_u8(std::ostream& out, std::uint8_t v) { out.write(reinterpret_cast<char*>(&v), 1); }

void put_string(std::ostream& out, const std::string& s) {
    put_i32(out, static_cast<std::int32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
    std::ifstream in;
    std::string path;

    void read_raw(void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) {
            throw CheckpointError(path + ": truncated checkpoint");
        }
    }
    std::int32_t i32() {
        std::int32_t v;
        read_raw(&v, 4);
        return v;
    }
    std::int64_t i64() {
        std::int64_t v;
        read_raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        read_raw(&v, 8);
        return v;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        read_raw(&v, 1);
        return v;
    }
    std::string str() {
        const std::int32_t n = i32();
        if (n < 0 || n > 1 << 20) throw CheckpointError(path + ": corrupt string length");
        std::string s(static_cast<std::size_t>(n), '\0');
        read_raw(s.data(), static_cast<std::size_t>(n));
        return s;
    }
};

}  // namespace

void save_checkpoint(const VaeModel& model, const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 8);

    const ModelConfig& c = model.config;
    put_i32(out, static_cast<std::int32_t>(c.omics_dims.size()));
    for (int d : c.omics_dims) put_i32(out, d);
    put_i32(out, c.subset_count);
    put_i32(out, c.latent_dim);
    put_i32(out, c.branch_hidden);
    put_i32(out, c.trunk_hidden);
    put_i32(out, c.downstream_hidden);
    put_i32(out, c.class_count);
    put_i32(out, c.reduction.encoder);
    put_i32(out, c.reduction.decoder);
    put_i32(out, c.reduction.downstream);
    put_i32(out, static_cast<std::int32_t>(c.recon_loss));
    put_i32(out, static_cast<std::int32_t>(c.recon_target));
    put_u8(out, c.use_subset_identity ? 1 : 0);
    put_u8(out, c.shuffle_features ? 1 : 0);
    put_u8(out, c.blocks ? 1 : 0);
    if (c.blocks) {
        put_i32(out, c.blocks->omics_index);
        put_i32(out, c.blocks->block_count);
        for (int b : c.blocks->feature_blocks) put_i32(out, b);
    }

    for (const auto& per_omics : model.partition.assignment) {
        put_i32(out, static_cast<std::int32_t>(per_omics.size()));
        for (int j : per_omics) put_i32(out, j);
    }

    put_i32(out, static_cast<std::int32_t>(model.params.size()));
    for (const auto& [name, e] : model.params) {
        put_string(out, name);
        put_i64(out, e.W.rows());
        put_i64(out, e.W.cols());
        for (Eigen::Index r = 0; r < e.W.rows(); ++r) {
            for (Eigen::Index col = 0; col < e.W.cols(); ++col) put_f64(out, e.W(r, col));
        }
        for (Eigen::Index r = 0; r < e.b.size(); ++r) put_f64(out, e.b[r]);
    }

    put_i32(out, static_cast<std::int32_t>(history.size()));
    for (const auto& r : history) {
        put_i32(out, r.epoch);
        put_i32(out, r.phase);
        put_f64(out, r.embed_loss);
        put_f64(out, r.classification_loss);
        put_f64(out, r.joint_loss);
        put_f64(out, r.train_accuracy);
        put_f64(out, r.validation_accuracy);
    }
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) throw IoError("cannot open " + path);
    char magic[8];
    r.read_raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) {
        throw CheckpointError(path + ": not a checkpoint or unsupported version");
    }

    ModelConfig c;
    const std::int32_t K = r.i32();
    if (K <= 0 || K > 1 << 16) throw CheckpointError(path + ": corrupt omics count");
    c.omics_dims.resize(static_cast<std::size_t>(K));
    for (auto& d : c.omics_dims) d = r.i32();
    c.subset_count = r.i32();
    c.latent_dim = r.i32();
    c.branch_hidden = r.i32();
    c.trunk_hidden = r.i32();
    c.downstream_hidden = r.i32();
    c.class_count = r.i32();
    c.reduction.encoder = r.i32();
    c.reduction.decoder = r.i32();
    c.reduction.downstream = r.i32();
    c.recon_loss = static_cast<ReconLoss>(r.i32());
    c.recon_target = static_cast<ReconTarget>(r.i32());
    c.use_subset_identity = r.u8() != 0;
    c.shuffle_features = r.u8() != 0;
    if (r.u8() != 0) {
        BlockConfig blocks;
        blocks.omics_index = r.i32();
        blocks.block_count = r.i32();
        if (blocks.omics_index < 0 || blocks.omics_index >= K) {
            throw CheckpointError(path + ": corrupt block omics index");
        }
        blocks.feature_blocks.resize(
            static_cast<std::size_t>(c.omics_dims[static_cast<std::size_t>(blocks.omics_index)]));
        for (auto& b : blocks.feature_blocks) b = r.i32();
        c.blocks = std::move(blocks);
    }

    FeaturePartition partition;
    partition.subset_count = c.subset_count;
    partition.assignment.resize(static_cast<std::size_t>(K));
    for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
        const std::int32_t d = r.i32();
        if (d != c.omics_dims[k]) throw CheckpointError(path + ": corrupt partition");
        partition.assignment[k].resize(static_cast<std::size_t>(d));
        for (auto& j : partition.assignment[k]) {
            j = r.i32();
            if (j < 0 || j >= c.subset_count) throw CheckpointError(path + ": corrupt partition");
        }
    }
    partition.rebuild_derived();

    Checkpoint ckpt;
    try {
        ckpt.model = assemble_model(c, std::move(partition));
    } catch (const ValidationError& e) {
        throw CheckpointError(path + ": invalid stored config: " + e.what());
    }

    const std::int32_t n_entries = r.i32();
    if (n_entries != static_cast<std::int32_t>(ckpt.model.params.size())) {
        throw CheckpointError(path + ": parameter count mismatch");
    }
    for (std::int32_t i = 0; i < n_entries; ++i) {
        const std::string name = r.str();
        if (!ckpt.model.params.contains(name)) {
            throw CheckpointError(path + ": unexpected parameter '" + name + "'");
        }
        ParamEntry& e = ckpt.model.params.at(name);
        const std::int64_t rows = r.i64();
        const std::int64_t cols = r.i64();
        if (rows != e.W.rows() || cols != e.W.cols()) {
            throw CheckpointError(path + ": shape mismatch for '" + name + "'");
        }
        for (Eigen::Index row = 0; row < e.W.rows(); ++row) {
            for (Eigen::Index col = 0; col < e.W.cols(); ++col) e.W(row, col) = r.f64();
        }
        for (Eigen::Index row = 0; row < e.b.size(); ++row) e.b[row] = r.f64();
    }

    const std::int32_t n_records = r.i32();
    if (n_records < 0) throw CheckpointError(path + ": corrupt history length");
    ckpt.history.resize(static_cast<std::size_t>(n_records));
    for (auto& rec : ckpt.history) {
        rec.epoch = r.i32();
        rec.phase = r.i32();
        rec.embed_loss = r.f64();
        rec.classification_loss = r.f64();
        rec.joint_loss = r.f64();
        rec.train_accuracy = r.f64();
        rec.validation_accuracy = r.f64();
    }
    return ckpt;
}

}  // namespace movae
