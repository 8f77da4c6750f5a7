#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "gas/app.hpp"

namespace {

struct Options {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string checkpoint;
    std::string compare;
    std::string kind = "threshold";
    int jobs = 1;
    bool quiet = false;
};

gas::RunConfig build_config(const Options& o) {
    gas::RunConfig cfg;
    if (!o.config_file.empty()) gas::apply_config_text(cfg, gas::read_text_file(o.config_file), o.config_file);
    for (const auto& kv : o.overrides) gas::apply_override(cfg, kv);
    cfg.eval.jobs = o.jobs;
    return cfg;
}

std::string keys_footer() {
    std::string s = "\nConfig keys (file lines `key = value`, or key=value arguments; arguments win):\n";
    for (const auto& [k, help] : gas::config_help()) s += "  " + k + std::string(k.size() < 24 ? 24 - k.size() : 1, ' ') + help + "\n";
    s += "\nExit codes: 0 ok, 1 config error, 2 runtime error, 3 acceptance check failed.\n"
         "GAS_OUT_DIR overrides out_dir.\n";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Goal-assisted stitching for offline safe RL"};
    app.footer(keys_footer());
    app.require_subcommand(1);
    Options o;
    app.add_option("--jobs", o.jobs, "worker threads for evaluation episodes and ablation variants")
        ->default_val(1)
        ->check(CLI::PositiveNumber);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config_file, "key = value config file");
        sub->add_option("overrides", o.overrides, "key=value overrides");
    };
    auto add_ckpt = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--checkpoint", o.checkpoint, "model checkpoint written by train");
        if (required) opt->required();
    };

    auto* gen = app.add_subcommand("gen-dataset", "generate and save an offline dataset");
    add_common(gen);
    auto* train = app.add_subcommand("train", "train goal functions and policy");
    add_common(train);
    train->add_flag("-q,--quiet", o.quiet, "no progress lines");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint at the configured thresholds");
    add_common(eval);
    add_ckpt(eval, true);
    auto* sweep = app.add_subcommand("sweep", "threshold sweep or reward-target robustness sweep");
    add_common(sweep);
    add_ckpt(sweep, true);
    sweep->add_option("--kind", o.kind, "threshold or robustness")->check(CLI::IsMember({"threshold", "robustness"}));
    sweep->add_option("--compare", o.compare, "second checkpoint reported alongside (robustness only)");
    auto* ablate = app.add_subcommand("ablate", "train and evaluate the variants of one ablation");
    add_common(ablate);
    auto* oracle = app.add_subcommand("oracle-check", "brute-force oracle probes, optionally against a checkpoint");
    add_common(oracle);
    add_ckpt(oracle, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gas::app::kExitConfig;
    }

    try {
        const gas::RunConfig cfg = build_config(o);
        if (gen->parsed()) return gas::app::cmd_gen_dataset(cfg, std::cout);
        if (train->parsed()) return gas::app::cmd_train(cfg, std::cout, o.quiet ? nullptr : &std::cerr);
        if (eval->parsed()) return gas::app::cmd_eval(cfg, o.checkpoint, std::cout);
        if (sweep->parsed())
            return o.kind == "threshold" ? gas::app::cmd_sweep(cfg, o.checkpoint, std::cout)
                                         : gas::app::cmd_robustness(cfg, o.checkpoint, o.compare, std::cout);
        if (ablate->parsed()) return gas::app::cmd_ablate(cfg, std::cout, o.jobs);
        if (oracle->parsed()) return gas::app::cmd_oracle_check(cfg, o.checkpoint, std::cout);
    } catch (const gas::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return gas::app::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gas::app::kExitRuntime;
    }
    return gas::app::kExitOk;
}
