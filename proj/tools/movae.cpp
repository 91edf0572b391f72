// movae: multi-omics variational-autoencoder embedding and tumour-type
// classification. Subcommands cover the whole pipeline: synth, preprocess,
// train, evaluate, embed, plus sweep helpers for reduction factors and
// subset counts.

#include "movae/commands.hpp"
#include "movae/text.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--set", args.overrides, "override a config key (section.key=value)");
    cmd->add_option("--seed", args.seed, "override the run seed");
    cmd->add_option("--out", args.out_dir, "override the output directory");
}

movae::RunConfig resolve(const CommonArgs& args) {
    auto kv = movae::parse_config_file(args.config_path);
    for (const auto& assignment : args.overrides) movae::apply_override(kv, assignment);
    if (args.seed) kv["seed"] = std::to_string(*args.seed);
    if (!args.out_dir.empty()) kv["out"] = args.out_dir;
    return movae::run_config_from_map(kv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-omics VAE embedding and classification"};
    app.require_subcommand(1);

    CommonArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic dataset files");
    add_common(synth, synth_args);

    CommonArgs prep_args;
    CLI::App* prep = app.add_subcommand("preprocess", "impute and rescale matrices");
    add_common(prep, prep_args);

    CommonArgs train_args;
    std::string resume;
    CLI::App* train = app.add_subcommand("train", "run three-phase training");
    add_common(train, train_args);
    train->add_option("--resume", resume, "checkpoint to continue phase-3 training from");

    CommonArgs eval_args;
    std::string eval_ckpt;
    bool sweep_strategies = false;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    add_common(evaluate, eval_args);
    evaluate->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    evaluate->add_flag("--sweep", sweep_strategies, "evaluate every aggregation/selection strategy");

    CommonArgs embed_args;
    std::string embed_ckpt;
    CLI::App* embed = app.add_subcommand("embed", "export latent vectors");
    add_common(embed, embed_args);
    embed->add_option("--checkpoint", embed_ckpt, "model checkpoint")->required();

    CommonArgs sred_args;
    std::string factor_list = "1_1_1,8_4_2";
    int jobs = 1;
    CLI::App* sweep_red = app.add_subcommand("sweep-reduction", "compare reduction factors");
    add_common(sweep_red, sred_args);
    sweep_red->add_option("--factors", factor_list, "comma-separated encoder_decoder_downstream triples");
    sweep_red->add_option("--jobs", jobs, "parallel runs");

    CommonArgs ssub_args;
    std::string count_list = "2,3,4";
    int sub_jobs = 1;
    CLI::App* sweep_sub = app.add_subcommand("sweep-subsets", "compare subset counts");
    add_common(sweep_sub, ssub_args);
    sweep_sub->add_option("--counts", count_list, "comma-separated subset counts");
    sweep_sub->add_option("--jobs", sub_jobs, "parallel runs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            movae::cmd_synth(resolve(synth_args));
        } else if (prep->parsed()) {
            movae::cmd_preprocess(resolve(prep_args));
        } else if (train->parsed()) {
            movae::cmd_train(resolve(train_args), resume);
        } else if (evaluate->parsed()) {
            movae::cmd_evaluate(resolve(eval_args), eval_ckpt, sweep_strategies);
        } else if (embed->parsed()) {
            movae::cmd_embed(resolve(embed_args), embed_ckpt);
        } else if (sweep_red->parsed()) {
            std::vector<std::string> factors = movae::split_on(factor_list, ',');
            movae::cmd_sweep_reduction(resolve(sred_args), factors, jobs);
        } else if (sweep_sub->parsed()) {
            std::vector<int> counts;
            for (const auto& c : movae::split_on(count_list, ',')) {
                const auto v = movae::parse_long(c);
                if (!v) throw movae::ValidationError("bad subset count '" + c + "'");
                counts.push_back(static_cast<int>(*v));
            }
            movae::cmd_sweep_subsets(resolve(ssub_args), counts, sub_jobs);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
