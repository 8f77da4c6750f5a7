#pragma once

// CLI command implementations. Each returns a process exit code:
// 0 success, 3 when an acceptance check of the run fails. Config problems
// throw ConfigError (exit 1), everything else RuntimeError and friends (2).

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gas/config.hpp"
#include "gas/dataset_io.hpp"

namespace gas::app {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitAcceptance = 3;

inline constexpr double kCostTolerance = 1.1;      // C_norm bound for the safety checks
inline constexpr double kMonotoneSlack = 0.02;     // allowed dip of R_norm between thresholds

/// GAS_OUT_DIR, when set and non-empty, wins over the configured directory.
inline std::string out_dir(const RunConfig& cfg) {
    const char* env = std::getenv("GAS_OUT_DIR");
    std::string dir = env && *env ? std::string(env) : cfg.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

inline std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

/// Same digest as `git hash-object`: SHA-1 over "blob <size>\0" + content.
inline std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw RuntimeError("sha1: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw RuntimeError("sha1: digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

inline std::string file_sha1(const std::string& path) { return git_blob_sha1(read_text_file(path)); }

inline EnvSpec env_spec(const RunConfig& cfg) { return make_spec(cfg.env, cfg.T); }

/// Loads `dataset` when configured, otherwise generates one from the root seed.
inline OfflineDataset obtain_dataset(const RunConfig& cfg) {
    const EnvSpec spec = env_spec(cfg);
    if (!cfg.dataset.empty()) {
        if (!fs::exists(cfg.dataset)) throw ConfigError("config key 'dataset': file '" + cfg.dataset + "' not found");
        OfflineDataset data = load_dataset(cfg.dataset);
        const EnvSpec& d = data.spec();
        if (d.name != spec.name || d.T != spec.T)
            throw ConfigError("dataset '" + cfg.dataset + "' is " + to_string(d.name) + " with T=" + std::to_string(d.T) +
                              " but the config asks for " + cfg.env + " with T=" + std::to_string(cfg.T));
        return data;
    }
    if (cfg.n_traj <= 0) throw ConfigError("config key 'n_traj' must be positive, got " + std::to_string(cfg.n_traj));
    Env env = make_env(spec, cfg.train.seed);
    return generate_offline_dataset(env, parse_behavior_mix(cfg.behavior, spec.name), cfg.n_traj, cfg.train.seed);
}

// ---------------------------------------------------------------------------
// gen-dataset

/// counts[cost_bin][reward_bin] over trajectory totals; equal-width bins on
/// [0, C_max] and [min R, max R].
inline std::vector<std::vector<int>> reward_cost_histogram(const OfflineDataset& data, int cost_bins, int reward_bins) {
    require(cost_bins >= 1 && reward_bins >= 1, "histogram: bin counts must be positive");
    double rmin = std::numeric_limits<double>::infinity();
    for (const auto& t : data.trajectories()) rmin = std::min(rmin, t.total_reward());
    const double rmax = data.reward_max();
    std::vector<std::vector<int>> h(static_cast<std::size_t>(cost_bins), std::vector<int>(reward_bins, 0));
    for (const auto& t : data.trajectories()) {
        const int cb = cost_bin_of(t.total_cost(), data.cost_max(), cost_bins);
        int rb = rmax > rmin ? static_cast<int>(std::floor((t.total_reward() - rmin) / (rmax - rmin) * reward_bins)) : 0;
        rb = std::clamp(rb, 0, reward_bins - 1);
        ++h[static_cast<std::size_t>(cb)][static_cast<std::size_t>(rb)];
    }
    return h;
}

inline void print_dataset_summary(const OfflineDataset& data, int cost_bins, std::ostream& os) {
    constexpr int kRewardBins = 10;
    double rmin = std::numeric_limits<double>::infinity();
    for (const auto& t : data.trajectories()) rmin = std::min(rmin, t.total_reward());
    os << "env " << to_string(data.spec().name) << "  T " << data.spec().T << "  n_traj " << data.size() << "\n";
    os << "R_max " << fmt(data.reward_max()) << "  C_max " << fmt(data.cost_max()) << "\n";
    os << "trajectory counts, rows = cost bins, columns = " << kRewardBins << " reward bins over [" << fmt(rmin)
       << ", " << fmt(data.reward_max()) << "]\n";
    const auto h = reward_cost_histogram(data, cost_bins, kRewardBins);
    const double width = data.cost_max() / cost_bins;
    for (int b = 0; b < cost_bins; ++b) {
        char label[64];
        std::snprintf(label, sizeof label, "C [%7.2f,%7.2f%c |", b * width, (b + 1) * width, b + 1 == cost_bins ? ']' : ')');
        os << label;
        for (int n : h[static_cast<std::size_t>(b)]) os << std::setw(5) << n;
        os << "\n";
    }
}

inline int cmd_gen_dataset(const RunConfig& cfg, std::ostream& os) {
    validate(cfg);
    const OfflineDataset data = obtain_dataset(cfg);
    const std::string path = join_path(out_dir(cfg), "dataset.gasd");
    save_dataset(data, path);
    print_dataset_summary(data, cfg.train.augment.cost_bins, os);
    os << "wrote " << path << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

inline void write_loss_csv(const std::vector<LossRow>& history, const std::string& path) {
    auto out = detail::open_out(path);
    out << "iteration,phase,reward_loss,cost_loss,policy_loss\n";
    auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt(v); };
    for (const auto& r : history)
        out << r.iteration << ',' << r.phase << ',' << cell(r.reward_loss) << ',' << cell(r.cost_loss) << ','
            << cell(r.policy_loss) << '\n';
    detail::finish(out, path);
}

inline void write_text(const std::string& text, const std::string& path) {
    auto out = detail::open_out(path);
    out << text;
    detail::finish(out, path);
}

/// Writes dataset.gasd (when generated), config.txt, model.gasnet, loss.csv
/// and manifest.json into the output directory.
inline int cmd_train(const RunConfig& cfg, std::ostream& os, std::ostream* progress_out = nullptr) {
    validate(cfg);
    const std::string dir = out_dir(cfg);
    const OfflineDataset data = obtain_dataset(cfg);
    std::string dataset_path = cfg.dataset;
    if (dataset_path.empty()) {
        dataset_path = join_path(dir, "dataset.gasd");
        save_dataset(data, dataset_path);
    }
    const std::string cfg_text = config_text(cfg);
    write_text(cfg_text, join_path(dir, "config.txt"));

    ProgressFn progress;
    if (progress_out)
        progress = [progress_out](const std::string& phase, int done, int total) {
            if (done % 1000 == 0 || done == total) *progress_out << phase << ' ' << done << '/' << total << std::endl;
        };
    const TrainedModel m = train_model(data, cfg.train, progress);

    const std::string model_path = join_path(dir, "model.gasnet");
    const std::string loss_path = join_path(dir, "loss.csv");
    save_checkpoint(model_checkpoint(m, true), model_path);
    write_loss_csv(m.history, loss_path);

    nlohmann::json manifest{{"config_sha1", git_blob_sha1(cfg_text)},
                            {"seed", cfg.train.seed},
                            {"iterations", cfg.train.iterations},
                            {"skipped_steps", m.skipped_steps},
                            {"inputs", {{"dataset", file_sha1(dataset_path)}}},
                            {"outputs", {{"model.gasnet", file_sha1(model_path)}, {"loss.csv", file_sha1(loss_path)}}}};
    write_text(manifest.dump(2) + "\n", join_path(dir, "manifest.json"));
    os << "trained " << cfg.train.iterations << " iterations";
    if (!m.history.empty()) {
        const auto& last = m.history.back();
        os << "; last window losses R " << fmt(last.reward_loss) << " C " << fmt(last.cost_loss) << " pi "
           << fmt(last.policy_loss);
    }
    os << "\nwrote " << model_path << ", " << loss_path << ", manifest.json\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / sweep / ablate

inline LoadedModel load_model(const std::string& path) {
    if (path.empty()) throw ConfigError("a checkpoint is required (--checkpoint)");
    if (!fs::exists(path)) throw RuntimeError("checkpoint '" + path + "' not found");
    return restore_model(load_checkpoint(path));
}

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline int report_checks(const std::vector<Check>& checks, std::ostream& os) {
    bool ok = true;
    for (const auto& c : checks) {
        os << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
        ok = ok && c.pass;
    }
    return ok ? kExitOk : kExitAcceptance;
}

inline void print_points(const EvalReport& r, std::ostream& os) {
    os << "variant            thresh  R_target   R_norm   C_norm\n";
    for (const auto& p : r.points) {
        char line[160];
        std::snprintf(line, sizeof line, "%-18s %6.3f %9.3f %8.4f %8.4f\n", p.variant.c_str(), p.threshold,
                      p.reward_target, p.reward_norm.mean, p.cost_norm.mean);
        os << line;
    }
}

/// Every point of `variant` keeps mean C_norm within the tolerance.
inline Check safety_check(const EvalReport& r, const std::string& variant) {
    Check c{"safety " + variant, true, ""};
    for (const auto& p : r.points) {
        if (p.variant != variant || p.cost_norm.mean <= kCostTolerance) continue;
        c.pass = false;
        c.detail += (c.detail.empty() ? "" : "; ") + std::string("C_norm ") + fmt(p.cost_norm.mean) + " at " +
                    fmt(p.threshold);
    }
    return c;
}

inline Check monotone_check(const EvalReport& r) {
    Check c{"reward non-decreasing in the threshold", true, ""};
    std::vector<const EvalPoint*> pts;
    for (const auto& p : r.points) pts.push_back(&p);
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->threshold < b->threshold; });
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i]->reward_norm.mean < pts[i - 1]->reward_norm.mean - kMonotoneSlack) {
            c.pass = false;
            c.detail += (c.detail.empty() ? "" : "; ") + fmt(pts[i - 1]->threshold) + " -> " + fmt(pts[i]->threshold);
        }
    return c;
}

inline int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& os) {
    validate(cfg);
    const LoadedModel model = load_model(checkpoint);
    const EvalReport r = evaluate(model, env_spec(cfg), cfg.eval);
    const std::string prefix = join_path(out_dir(cfg), "eval");
    write_report(r, prefix);
    print_points(r, os);
    return report_checks({safety_check(r, "default")}, os);
}

inline int cmd_sweep(const RunConfig& cfg, const std::string& checkpoint, std::ostream& os) {
    validate(cfg);
    const LoadedModel model = load_model(checkpoint);
    const EvalReport r = threshold_sweep(model, env_spec(cfg), cfg.eval, cfg.eval.thresholds);
    write_report(r, join_path(out_dir(cfg), "sweep"));
    print_points(r, os);
    return report_checks({safety_check(r, "default"), monotone_check(r)}, os);
}

/// Reward targets as multiples of the reference optimum at one threshold.
/// The optional second checkpoint (typically delta = 0) is reported but not
/// checked.
inline int cmd_robustness(const RunConfig& cfg, const std::string& checkpoint, const std::string& compare,
                          std::ostream& os) {
    validate(cfg);
    const EnvSpec spec = env_spec(cfg);
    const LoadedModel model = load_model(checkpoint);
    std::optional<LoadedModel> other;
    if (!compare.empty()) other = load_model(compare);
    std::vector<NamedModel> models{{"default", &model}};
    if (other) models.push_back({"compare", &*other});
    const double limit = cfg.robust_threshold * model.goals.norm.cost_max;
    std::optional<OfflineDataset> data;
    if (spec.name != EnvName::ChainRun) data = obtain_dataset(cfg);
    const double optimum = reference_optimum(data ? &*data : nullptr, spec, limit);
    const EvalReport r = robustness_sweep(models, spec, cfg.eval, cfg.robust_threshold, cfg.robust_multipliers, optimum);
    write_report(r, join_path(out_dir(cfg), "robustness"));
    print_points(r, os);
    return report_checks({safety_check(r, "default")}, os);
}

inline int cmd_ablate(const RunConfig& cfg, std::ostream& os, int variant_jobs = 1) {
    validate(cfg);
    const AblationKind kind = parse_ablation(cfg.ablation);
    const OfflineDataset data = obtain_dataset(cfg);
    const AblationResult res = run_ablation(kind, data, cfg.train, cfg.eval, variant_jobs);
    const std::string dir = join_path(out_dir(cfg), "ablation_" + res.kind);
    fs::create_directories(dir);
    for (const auto& run : res.runs) {
        write_report(run.report, join_path(dir, run.variant.name));
        save_checkpoint(model_checkpoint(run.model, false), join_path(dir, run.variant.name + ".gasnet"));
    }
    write_report(res.report, join_path(dir, "all"));
    print_points(res.report, os);
    os << "regime averages\n";
    for (const auto& g : regime_averages(res.report))
        os << "  " << g.variant << ' ' << g.regime << " R_norm " << fmt(g.reward_norm) << " C_norm " << fmt(g.cost_norm)
           << "\n";
    std::string default_name = "default";
    for (const auto& run : res.runs)
        if (run.variant.label == "GAS") default_name = run.variant.name;
    return report_checks({safety_check(res.report, default_name)}, os);
}

// ---------------------------------------------------------------------------
// oracle-check

inline constexpr int kProbeCount = 50;

/// TSRA dominance on a probe grid, plus goal-network agreement when a
/// checkpoint is given.
inline int cmd_oracle_check(const RunConfig& cfg, const std::string& checkpoint, std::ostream& os) {
    validate(cfg);
    const OfflineDataset data = obtain_dataset(cfg);
    const auto probes = probe_grid(data, kProbeCount, cfg.train.seed);
    std::optional<LoadedModel> model;
    if (!checkpoint.empty()) {
        model = load_model(checkpoint);
        check_model_env(*model, data.spec());
    }
    const OracleSummary s = oracle_check(data, probes, model ? &model->goals : nullptr);
    write_text(to_json(s).dump(2) + "\n", join_path(out_dir(cfg), "oracle.json"));
    std::vector<Check> checks{{"segment oracle dominates full-suffix oracle", s.dominance_ok(),
                               std::to_string(s.dominance_violations) + " violations, " +
                                   std::to_string(s.strictly_better) + " strictly better"}};
    if (model) {
        checks.push_back({"V^R within 10% of V_R* on >= 90% of probes", s.reward_fraction() >= 0.9,
                          fmt(s.reward_fraction())});
        checks.push_back({"V^C <= C_hat on >= 95% of feasible probes", s.cost_fraction() >= 0.95,
                          fmt(s.cost_fraction())});
    }
    return report_checks(checks, os);
}

}  // namespace gas::app
