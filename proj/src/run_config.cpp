#include "movae/run_config.hpp"

#include "movae/eval.hpp"
#include "movae/text.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace movae {

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = lowercase(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("config: bad boolean for " + key + ": '" + value + "'");
}

long parse_int(const std::string& key, const std::string& value) {
    const auto v = parse_long(value);
    if (!v) throw ValidationError("config: bad integer for " + key + ": '" + value + "'");
    return *v;
}

double parse_real(const std::string& key, const std::string& value) {
    const auto v = parse_double(value);
    if (!v) throw ValidationError("config: bad number for " + key + ": '" + value + "'");
    return *v;
}

std::vector<long> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<long> out;
    for (const auto& part : split_on(value, ',')) out.push_back(parse_int(key, part));
    return out;
}

std::vector<double> parse_real_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& part : split_on(value, ',')) out.push_back(parse_real(key, part));
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t comment = line.find('#');
        if (comment != std::string::npos) line.resize(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ParseError(path + ":" + std::to_string(line_no) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": empty key");
        }
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ValidationError("override must be key=value: '" + assignment + "'");
    }
    kv[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

RunConfig run_config_from_map(const std::map<std::string, std::string>& kv) {
    RunConfig rc;
    std::set<std::string> known;
    auto get = [&](const std::string& key) -> const std::string* {
        known.insert(key);
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (const auto* v = get("seed")) rc.seed = static_cast<std::uint64_t>(parse_int("seed", *v));
    if (const auto* v = get("out")) rc.out_dir = *v;

    if (const auto* v = get("data.matrices")) {
        for (const auto& p : split_on(*v, ',')) {
            if (!p.empty()) rc.matrix_paths.push_back(p);
        }
    }
    if (const auto* v = get("data.kinds")) {
        for (const auto& name : split_on(*v, ',')) {
            rc.matrix_kinds.push_back(omics_kind_from_name(name));
        }
    }
    if (const auto* v = get("data.labels")) rc.labels_path = *v;
    if (const auto* v = get("data.block_map")) rc.block_map_path = *v;
    if (const auto* v = get("data.block_omics")) {
        rc.block_omics = static_cast<int>(parse_int("data.block_omics", *v));
    }

    if (const auto* v = get("synth.classes")) {
        rc.use_synth = true;
        rc.synth.class_count = static_cast<int>(parse_int("synth.classes", *v));
    }
    if (const auto* v = get("synth.samples_per_class")) {
        rc.use_synth = true;
        rc.synth.samples_per_class = static_cast<int>(parse_int("synth.samples_per_class", *v));
    }
    if (const auto* v = get("synth.dims")) {
        rc.use_synth = true;
        rc.synth.omics_dims.clear();
        for (long d : parse_int_list("synth.dims", *v)) {
            rc.synth.omics_dims.push_back(static_cast<int>(d));
        }
    }
    if (const auto* v = get("synth.informative_fraction")) {
        rc.use_synth = true;
        rc.synth.informative_fraction = parse_real("synth.informative_fraction", *v);
    }
    if (const auto* v = get("synth.noise_sigma")) {
        rc.use_synth = true;
        rc.synth.noise_sigma = parse_real("synth.noise_sigma", *v);
    }

    if (const auto* v = get("preprocess.impute")) rc.impute_strategy = impute_strategy_from_name(*v);
    if (const auto* v = get("preprocess.unit_norm")) {
        rc.apply_unit_norm = parse_bool("preprocess.unit_norm", *v);
    }

    if (const auto* v = get("model.subsets")) {
        rc.subset_count = static_cast<int>(parse_int("model.subsets", *v));
    }
    if (const auto* v = get("model.latent_dim")) {
        rc.latent_dim = static_cast<int>(parse_int("model.latent_dim", *v));
    }
    if (const auto* v = get("model.branch_hidden")) {
        rc.branch_hidden = static_cast<int>(parse_int("model.branch_hidden", *v));
    }
    if (const auto* v = get("model.trunk_hidden")) {
        rc.trunk_hidden = static_cast<int>(parse_int("model.trunk_hidden", *v));
    }
    if (const auto* v = get("model.downstream_hidden")) {
        rc.downstream_hidden = static_cast<int>(parse_int("model.downstream_hidden", *v));
    }
    if (const auto* v = get("model.reduction")) {
        const auto parts = parse_int_list("model.reduction", *v);
        if (parts.size() != 3) {
            throw ValidationError("config: model.reduction needs encoder,decoder,downstream");
        }
        rc.reduction.encoder = static_cast<int>(parts[0]);
        rc.reduction.decoder = static_cast<int>(parts[1]);
        rc.reduction.downstream = static_cast<int>(parts[2]);
    }
    if (const auto* v = get("model.recon_loss")) {
        const std::string name = lowercase(*v);
        if (name == "mse") {
            rc.recon_loss = ReconLoss::mse;
        } else if (name == "bce") {
            rc.recon_loss = ReconLoss::bce;
        } else if (name == "l1") {
            rc.recon_loss = ReconLoss::l1;
        } else {
            throw ValidationError("config: unknown recon loss '" + *v + "'");
        }
    }
    if (const auto* v = get("model.recon_target")) {
        const std::string name = lowercase(*v);
        if (name == "full") {
            rc.recon_target = ReconTarget::full_input;
        } else if (name == "subset") {
            rc.recon_target = ReconTarget::subset_only;
        } else {
            throw ValidationError("config: unknown recon target '" + *v + "'");
        }
    }
    if (const auto* v = get("model.subset_identity")) {
        rc.use_subset_identity = parse_bool("model.subset_identity", *v);
    }
    if (const auto* v = get("model.shuffle_features")) {
        rc.shuffle_features = parse_bool("model.shuffle_features", *v);
    }

    if (const auto* v = get("train.phase1_epochs")) {
        rc.schedule.phase1_epochs = static_cast<int>(parse_int("train.phase1_epochs", *v));
    }
    if (const auto* v = get("train.phase2_epochs")) {
        rc.schedule.phase2_epochs = static_cast<int>(parse_int("train.phase2_epochs", *v));
    }
    if (const auto* v = get("train.phase3_epochs")) {
        rc.schedule.phase3_epochs = static_cast<int>(parse_int("train.phase3_epochs", *v));
    }
    if (const auto* v = get("train.batch_size")) {
        rc.schedule.batch_size = static_cast<int>(parse_int("train.batch_size", *v));
    }
    if (const auto* v = get("train.learning_rate")) {
        rc.schedule.learning_rate = parse_real("train.learning_rate", *v);
    }

    if (const auto* v = get("split.fractions")) {
        const auto parts = parse_real_list("split.fractions", *v);
        if (parts.size() != 3) {
            throw ValidationError("config: split.fractions needs train,val,test");
        }
        rc.train_fraction = parts[0];
        rc.val_fraction = parts[1];
        rc.test_fraction = parts[2];
    }

    if (const auto* v = get("eval.strategy")) rc.eval_strategy = *v;

    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
    }

    rc.schedule.seed = rc.seed;
    rc.synth.seed = rc.seed;
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_map(parse_config_file(path));
}

void RunConfig::validate() const {
    if (has_data_sources() == use_synth) {
        throw ValidationError(
            "config: exactly one of [data] matrices and [synth] parameters must be set");
    }
    if (has_data_sources()) {
        if (labels_path.empty()) throw ValidationError("config: data.labels is required");
        if (!matrix_kinds.empty() && matrix_kinds.size() != matrix_paths.size()) {
            throw ValidationError("config: data.kinds must match data.matrices");
        }
        for (const auto& p : matrix_paths) {
            if (!std::filesystem::exists(p)) throw ValidationError("config: no such file: " + p);
        }
        if (!std::filesystem::exists(labels_path)) {
            throw ValidationError("config: no such file: " + labels_path);
        }
        if (!block_map_path.empty()) {
            if (!std::filesystem::exists(block_map_path)) {
                throw ValidationError("config: no such file: " + block_map_path);
            }
            if (block_omics < 0 || block_omics >= static_cast<int>(matrix_paths.size())) {
                throw ValidationError("config: data.block_omics out of range");
            }
        }
    } else if (!block_map_path.empty()) {
        throw ValidationError("config: block maps need file-based data sources");
    }
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && test_fraction > 0.0)) {
        throw ValidationError("config: split fractions must be positive");
    }
    schedule.validate();
    if (eval_strategy != "auto") {
        PredictStrategy::parse(eval_strategy, seed);  // throws on bad spelling
    }
}

}  // namespace movae
