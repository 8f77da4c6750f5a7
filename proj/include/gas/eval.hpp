#pragma once

// Evaluation protocols: normalized metrics at a threshold, the zero-shot
// threshold sweep, the reward-target robustness sweep and the ablations.
// Report writers produce fixed-column CSV, JSON metadata and long-format CSV.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <tuple>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "gas/oracle.hpp"
#include "gas/training.hpp"

namespace gas {

struct EvalConfig {
    std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};  // fractions of C_max
    int episodes_per_point = 10;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    double target_reward_fraction = 0.95;  // of R_max
    int jobs = 1;

    void validate() const {
        if (thresholds.empty()) throw ConfigError("eval thresholds must not be empty");
        for (double f : thresholds)
            if (!(f > 0.0 && f <= 1.0)) throw ConfigError("eval thresholds must lie in (0, 1]");
        if (episodes_per_point < 1) throw ConfigError("episodes_per_point must be >= 1");
        if (seeds.empty()) throw ConfigError("eval seeds must not be empty");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
    }
};

/// One episode.
struct EvalRow {
    std::string variant;
    double threshold = 0.0;  // fraction of C_max
    double limit = 0.0;      // L = threshold * C_max
    double reward_target = 0.0;
    double cost_target = 0.0;
    std::uint64_t seed = 0;
    int episode = 0;
    double reward = 0.0;  // R_pi
    double cost = 0.0;    // C_pi
    double reward_norm = 0.0;
    double cost_norm = 0.0;
};

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // sample std, 0 for a single value
};

inline Stat summarize(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

/// Aggregate over all (seed, episode) pairs at one evaluation point.
struct EvalPoint {
    std::string variant;
    double threshold = 0.0;
    double limit = 0.0;
    double reward_target = 0.0;
    double cost_target = 0.0;
    Stat reward, cost, reward_norm, cost_norm;
    int count = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<EvalPoint> points;
    nlohmann::json meta = nlohmann::json::object();
};

inline double reward_norm(double reward, double reward_max) { return reward / reward_max; }
inline double cost_norm(double cost, double limit) { return cost / limit; }

namespace detail {

template <class F>
void parallel_for(int n, int jobs, F&& body) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline EvalPoint aggregate(const std::vector<EvalRow>& rows) {
    EvalPoint p;
    if (rows.empty()) return p;
    p.variant = rows.front().variant;
    p.threshold = rows.front().threshold;
    p.limit = rows.front().limit;
    p.reward_target = rows.front().reward_target;
    p.cost_target = rows.front().cost_target;
    std::vector<double> r, c, rn, cn;
    for (const auto& row : rows) {
        r.push_back(row.reward);
        c.push_back(row.cost);
        rn.push_back(row.reward_norm);
        cn.push_back(row.cost_norm);
    }
    p.reward = summarize(r);
    p.cost = summarize(c);
    p.reward_norm = summarize(rn);
    p.cost_norm = summarize(cn);
    p.count = static_cast<int>(rows.size());
    return p;
}

}  // namespace detail

inline void check_model_env(const LoadedModel& model, const EnvSpec& env) {
    const EnvSpec& m = model.goals.norm.env;
    if (m.name != env.name || m.state_dim != env.state_dim || m.action_dim != env.action_dim || m.T != env.T)
        throw ConfigError("environment " + to_string(env.name) + " (T=" + std::to_string(env.T) + ", state_dim " +
                          std::to_string(env.state_dim) + ", action_dim " + std::to_string(env.action_dim) +
                          ") does not match the checkpoint (" + to_string(m.name) + ", T=" + std::to_string(m.T) +
                          ", state_dim " + std::to_string(m.state_dim) + ", action_dim " +
                          std::to_string(m.action_dim) + ")");
}

/// Rolls out every (seed, episode) at fixed targets and returns one row per
/// episode, ordered by seed then episode.
inline std::vector<EvalRow> evaluate_point(const LoadedModel& model, const EnvSpec& env, const EvalConfig& cfg,
                                           const std::string& variant, double threshold, double reward_target,
                                           double cost_target) {
    check_model_env(model, env);
    const double limit = threshold * model.goals.norm.cost_max;
    const int per_seed = cfg.episodes_per_point;
    const int n = static_cast<int>(cfg.seeds.size()) * per_seed;
    std::vector<EvalRow> rows(static_cast<std::size_t>(n));
    detail::parallel_for(n, cfg.jobs, [&](int i) {
        const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(i / per_seed)];
        Env e = make_env(env, seed);
        const Episode ep = run_episode(model.policy, model.goals, e, reward_target, cost_target);
        EvalRow& row = rows[static_cast<std::size_t>(i)];
        row.variant = variant;
        row.threshold = threshold;
        row.limit = limit;
        row.reward_target = reward_target;
        row.cost_target = cost_target;
        row.seed = seed;
        row.episode = i % per_seed;
        row.reward = ep.reward;
        row.cost = ep.cost;
        row.reward_norm = reward_norm(ep.reward, model.goals.norm.reward_max);
        row.cost_norm = cost_norm(ep.cost, limit);
    });
    return rows;
}

/// Evaluates every threshold with targets (fraction * R_max, threshold * C_max).
inline EvalReport evaluate(const LoadedModel& model, const EnvSpec& env, const EvalConfig& cfg,
                           const std::string& variant = "default") {
    cfg.validate();
    EvalReport report;
    const double rmax = model.goals.norm.reward_max;
    const double cmax = model.goals.norm.cost_max;
    for (double f : cfg.thresholds) {
        auto rows = evaluate_point(model, env, cfg, variant, f, cfg.target_reward_fraction * rmax, f * cmax);
        report.points.push_back(detail::aggregate(rows));
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    report.meta["aggregation"] = "mean and sample std pooled over all (seed, episode) pairs";
    report.meta["target_reward_fraction"] = cfg.target_reward_fraction;
    report.meta["episodes_per_point"] = cfg.episodes_per_point;
    report.meta["seeds"] = cfg.seeds;
    report.meta["R_max"] = rmax;
    report.meta["C_max"] = cmax;
    return report;
}

inline std::vector<double> default_sweep_thresholds() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

inline EvalReport threshold_sweep(const LoadedModel& model, const EnvSpec& env, EvalConfig cfg,
                                  const std::vector<double>& thresholds = default_sweep_thresholds()) {
    cfg.thresholds = thresholds;
    EvalReport r = evaluate(model, env, cfg);
    r.meta["protocol"] = "threshold_sweep";
    return r;
}

/// Reference optimum used to scale reward targets: analytic for ChainRun,
/// the best full-episode dataset return under the budget otherwise.
inline double reference_optimum(const OfflineDataset* data, const EnvSpec& env, double limit) {
    if (env.name == EnvName::ChainRun) return chainrun_optimum(env.T, std::min(limit, static_cast<double>(env.T)));
    require(data != nullptr, "reference_optimum: a dataset is needed for " + to_string(env.name));
    Env e = make_env(env, 0);
    const OracleAnswer a = brute_force_goal(*data, make_probe(env, e.reset(), 0, limit), true);
    if (!a.feasible) throw RuntimeError("no dataset trajectory satisfies the budget " + std::to_string(limit));
    return *a.reward;
}

struct NamedModel {
    std::string name;
    const LoadedModel* model = nullptr;
};

/// Fixed C_hat = threshold * C_max, reward targets = multiplier * optimum; one
/// point per (model, multiplier).
inline EvalReport robustness_sweep(const std::vector<NamedModel>& models, const EnvSpec& env, EvalConfig cfg,
                                   double threshold, const std::vector<double>& multipliers, double optimum) {
    cfg.validate();
    EvalReport report;
    for (const auto& nm : models) {
        const double limit = threshold * nm.model->goals.norm.cost_max;
        for (double g : multipliers) {
            auto rows = evaluate_point(*nm.model, env, cfg, nm.name, threshold, g * optimum, limit);
            report.points.push_back(detail::aggregate(rows));
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        }
    }
    report.meta["protocol"] = "robustness_sweep";
    report.meta["threshold"] = threshold;
    report.meta["reward_target_multipliers"] = multipliers;
    report.meta["reference_optimum"] = optimum;
    report.meta["aggregation"] = "mean and sample std pooled over all (seed, episode) pairs";
    return report;
}

// ---------------------------------------------------------------------------
// Ablations

enum class AblationKind { AlphaSweep, NoTsra, NoRelabel, NoReshape };

inline std::string to_string(AblationKind k) {
    switch (k) {
        case AblationKind::AlphaSweep: return "alpha_sweep";
        case AblationKind::NoTsra: return "no_tsra";
        case AblationKind::NoRelabel: return "no_relabel";
        case AblationKind::NoReshape: return "no_reshape";
    }
    return "?";
}

inline AblationKind parse_ablation(const std::string& name) {
    if (name == "alpha_sweep") return AblationKind::AlphaSweep;
    if (name == "no_tsra") return AblationKind::NoTsra;
    if (name == "no_relabel") return AblationKind::NoRelabel;
    if (name == "no_reshape") return AblationKind::NoReshape;
    throw ConfigError("unknown ablation '" + name + "' (expected alpha_sweep, no_tsra, no_relabel or no_reshape)");
}

struct AblationVariant {
    std::string name;   // short id, used in file names
    std::string label;  // display label
    TrainConfig config;
};

inline std::string alpha_id(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "alpha_%g", alpha);
    return buf;
}

/// Variant configurations for one ablation kind. alpha_sweep yields five
/// variants; the others yield one each. The base config is not included.
inline std::vector<AblationVariant> ablation_variants(AblationKind kind, const TrainConfig& base) {
    std::vector<AblationVariant> out;
    switch (kind) {
        case AblationKind::AlphaSweep:
            for (double a : {0.5, 0.6, 0.8, 0.9, 0.99}) {
                TrainConfig c = base;
                c.alpha = a;
                char label[48];
                std::snprintf(label, sizeof label, "GAS (alpha=%g)", a);
                out.push_back({alpha_id(a), a == 0.5 ? "GAS w/o Stitching" : (a == base.alpha ? "GAS" : label), c});
            }
            break;
        case AblationKind::NoTsra: {
            TrainConfig c = base;
            c.augment.segments = false;
            out.push_back({"no_tsra", "GAS w/o TSRA", c});
            break;
        }
        case AblationKind::NoRelabel: {
            TrainConfig c = base;
            c.augment.relabel = false;
            c.augment.delta = 0.0;
            out.push_back({"no_relabel", "GAS w/o Relabel", c});
            break;
        }
        case AblationKind::NoReshape: {
            TrainConfig c = base;
            c.augment.epsilon = 0.0;
            out.push_back({"no_reshape", "GAS w/o DR", c});
            break;
        }
    }
    return out;
}

struct AblationRun {
    AblationVariant variant;
    TrainedModel model;
    EvalReport report;
};

struct AblationResult {
    std::string kind;
    std::vector<AblationRun> runs;  // in training order
    EvalReport report;              // rows from every run, tagged by variant name
};

/// Trains every variant identically, evaluates each with the same sweep and
/// collects the rows. alpha_sweep trains only its five levels (the one equal
/// to the base alpha stands in for the default); the other kinds train the
/// base config as "default" plus the one variant. Variants run on up to
/// `variant_jobs` threads; results do not depend on the thread count.
inline AblationResult run_ablation(AblationKind kind, const OfflineDataset& data, const TrainConfig& base,
                                   const EvalConfig& eval_cfg, int variant_jobs = 1,
                                   const ProgressFn& progress = nullptr) {
    AblationResult res;
    res.kind = to_string(kind);
    std::vector<AblationVariant> all;
    if (kind != AblationKind::AlphaSweep) all.push_back({"default", "GAS", base});
    for (auto& v : ablation_variants(kind, base)) all.push_back(std::move(v));
    res.runs.resize(all.size());
    detail::parallel_for(static_cast<int>(all.size()), std::max(variant_jobs, 1), [&](int i) {
        AblationRun& run = res.runs[static_cast<std::size_t>(i)];
        run.variant = all[static_cast<std::size_t>(i)];
        run.model = train_model(data, run.variant.config, variant_jobs == 1 ? progress : nullptr);
        const LoadedModel lm{run.model.goals, run.model.policy};
        run.report = evaluate(lm, data.spec(), eval_cfg, run.variant.name);
    });
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& run : res.runs) {
        const auto& v = run.variant;
        res.report.rows.insert(res.report.rows.end(), run.report.rows.begin(), run.report.rows.end());
        res.report.points.insert(res.report.points.end(), run.report.points.begin(), run.report.points.end());
        variants.push_back({{"name", v.name},
                            {"label", v.label},
                            {"alpha", v.config.alpha},
                            {"delta", v.config.augment.delta},
                            {"relabel", v.config.augment.relabel},
                            {"segments", v.config.augment.segments},
                            {"q_percent", v.config.augment.q_percent},
                            {"epsilon", v.config.augment.epsilon}});
    }
    res.report.meta = res.runs.front().report.meta;
    res.report.meta["protocol"] = "ablation";
    res.report.meta["ablation"] = res.kind;
    res.report.meta["variants"] = variants;
    return res;
}

// ---------------------------------------------------------------------------
// Goal functions against the brute-force oracle

struct ProbeCheck {
    ProbeQuery probe;
    OracleAnswer segments;     // oracle over augmented segments
    OracleAnswer full_suffix;  // oracle over full suffixes only
    double reward_value = NAN; // trained V^R with R_hat = V_R*, if a model was given
    double cost_value = NAN;
};

struct OracleSummary {
    std::vector<ProbeCheck> probes;
    int dominance_violations = 0;  // probes where segments < full suffix
    int strictly_better = 0;       // probes where segments > full suffix
    int reward_within = 0;         // |V^R - V_R*| <= tol * |V_R*|
    int cost_within = 0;           // V^C <= C_hat
    int feasible = 0;
    bool has_model = false;

    bool dominance_ok() const { return dominance_violations == 0 && strictly_better >= 1; }
    double reward_fraction() const { return feasible ? static_cast<double>(reward_within) / feasible : 0.0; }
    double cost_fraction() const { return feasible ? static_cast<double>(cost_within) / feasible : 0.0; }
};

/// The goal networks are queried at R_hat = V_R*, a target the training
/// relabeling actually produces for the matching samples.
inline OracleSummary oracle_check(const OfflineDataset& data, const std::vector<ProbeQuery>& probes,
                                  const GoalNets* nets = nullptr, double reward_tolerance = 0.1) {
    OracleSummary out;
    out.has_model = nets != nullptr;
    for (const auto& q : probes) {
        ProbeCheck pc{q, brute_force_goal(data, q), brute_force_goal(data, q, true)};
        const double seg = pc.segments.reward.value_or(-std::numeric_limits<double>::infinity());
        const double full = pc.full_suffix.reward.value_or(-std::numeric_limits<double>::infinity());
        if (seg < full) ++out.dominance_violations;
        if (seg > full) ++out.strictly_better;
        if (pc.segments.feasible) {
            ++out.feasible;
            if (nets) {
                const double vr_star = *pc.segments.reward;
                std::tie(pc.reward_value, pc.cost_value) =
                    nets->values(goal_input(nets->norm, q.s, vr_star, q.cost_target, q.t_prime));
                if (std::abs(pc.reward_value - vr_star) <= reward_tolerance * std::abs(vr_star)) ++out.reward_within;
                if (pc.cost_value <= q.cost_target) ++out.cost_within;
            }
        }
        out.probes.push_back(std::move(pc));
    }
    return out;
}

inline nlohmann::json to_json(const OracleSummary& s) {
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : s.probes) {
        nlohmann::json j = to_json(p.probe);
        j["segments"] = to_json(p.segments);
        j["full_suffix"] = to_json(p.full_suffix);
        if (s.has_model && p.segments.feasible) {
            j["V_R"] = p.reward_value;
            j["V_C"] = p.cost_value;
        }
        probes.push_back(j);
    }
    nlohmann::json j{{"probes", probes},
                     {"dominance_violations", s.dominance_violations},
                     {"strictly_better", s.strictly_better},
                     {"feasible", s.feasible}};
    if (s.has_model) {
        j["reward_within_fraction"] = s.reward_fraction();
        j["cost_within_fraction"] = s.cost_fraction();
    }
    return j;
}

// ---------------------------------------------------------------------------
// Regime averages and writers

struct RegimeAverage {
    std::string variant;
    std::string regime;  // tight (<= 0.3), medium (<= 0.6), loose
    double reward_norm = 0.0;
    double cost_norm = 0.0;
    int points = 0;
};

inline std::string regime_of(double threshold) {
    if (threshold <= 0.3 + 1e-12) return "tight";
    if (threshold <= 0.6 + 1e-12) return "medium";
    return "loose";
}

inline std::vector<RegimeAverage> regime_averages(const EvalReport& report) {
    std::vector<RegimeAverage> out;
    for (const auto& p : report.points) {
        const std::string regime = regime_of(p.threshold);
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const RegimeAverage& r) { return r.variant == p.variant && r.regime == regime; });
        if (it == out.end()) {
            out.push_back({p.variant, regime, 0.0, 0.0, 0});
            it = std::prev(out.end());
        }
        it->reward_norm += p.reward_norm.mean;
        it->cost_norm += p.cost_norm.mean;
        ++it->points;
    }
    for (auto& r : out) {
        r.reward_norm /= r.points;
        r.cost_norm /= r.points;
    }
    return out;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw RuntimeError("cannot open '" + path + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw RuntimeError("write failed on '" + path + "'");
}

}  // namespace detail

// Column sets, fixed:
inline constexpr const char* kPointColumns =
    "variant,threshold,limit,reward_target,cost_target,count,reward_mean,reward_std,cost_mean,cost_std,"
    "reward_norm_mean,reward_norm_std,cost_norm_mean,cost_norm_std";
inline constexpr const char* kEpisodeColumns =
    "variant,threshold,limit,reward_target,cost_target,seed,episode,reward,cost,reward_norm,cost_norm";
inline constexpr const char* kLongColumns = "variant,threshold,reward_target,metric,value";

/// One row per evaluation point.
inline void write_points_csv(const EvalReport& r, const std::string& path) {
    auto out = detail::open_out(path);
    out << kPointColumns << '\n';
    for (const auto& p : r.points)
        out << p.variant << ',' << fmt(p.threshold) << ',' << fmt(p.limit) << ',' << fmt(p.reward_target) << ','
            << fmt(p.cost_target) << ',' << p.count << ',' << fmt(p.reward.mean) << ',' << fmt(p.reward.std) << ','
            << fmt(p.cost.mean) << ',' << fmt(p.cost.std) << ',' << fmt(p.reward_norm.mean) << ','
            << fmt(p.reward_norm.std) << ',' << fmt(p.cost_norm.mean) << ',' << fmt(p.cost_norm.std) << '\n';
    detail::finish(out, path);
}

inline void write_episodes_csv(const EvalReport& r, const std::string& path) {
    auto out = detail::open_out(path);
    out << kEpisodeColumns << '\n';
    for (const auto& e : r.rows)
        out << e.variant << ',' << fmt(e.threshold) << ',' << fmt(e.limit) << ',' << fmt(e.reward_target) << ','
            << fmt(e.cost_target) << ',' << e.seed << ',' << e.episode << ',' << fmt(e.reward) << ',' << fmt(e.cost)
            << ',' << fmt(e.reward_norm) << ',' << fmt(e.cost_norm) << '\n';
    detail::finish(out, path);
}

/// Plot-ready long format: one (point, metric) per line.
inline void write_long_csv(const EvalReport& r, const std::string& path) {
    auto out = detail::open_out(path);
    out << kLongColumns << '\n';
    for (const auto& p : r.points) {
        const std::string key = p.variant + ',' + fmt(p.threshold) + ',' + fmt(p.reward_target) + ',';
        out << key << "reward_norm_mean," << fmt(p.reward_norm.mean) << '\n';
        out << key << "reward_norm_std," << fmt(p.reward_norm.std) << '\n';
        out << key << "cost_norm_mean," << fmt(p.cost_norm.mean) << '\n';
        out << key << "cost_norm_std," << fmt(p.cost_norm.std) << '\n';
    }
    detail::finish(out, path);
}

inline nlohmann::json report_json(const EvalReport& r) {
    nlohmann::json j = r.meta;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.points)
        pts.push_back({{"variant", p.variant},
                       {"threshold", p.threshold},
                       {"limit", p.limit},
                       {"reward_target", p.reward_target},
                       {"cost_target", p.cost_target},
                       {"count", p.count},
                       {"reward", {{"mean", p.reward.mean}, {"std", p.reward.std}}},
                       {"cost", {{"mean", p.cost.mean}, {"std", p.cost.std}}},
                       {"reward_norm", {{"mean", p.reward_norm.mean}, {"std", p.reward_norm.std}}},
                       {"cost_norm", {{"mean", p.cost_norm.mean}, {"std", p.cost_norm.std}}}});
    j["points"] = pts;
    nlohmann::json regimes = nlohmann::json::array();
    for (const auto& g : regime_averages(r))
        regimes.push_back({{"variant", g.variant},
                           {"regime", g.regime},
                           {"reward_norm", g.reward_norm},
                           {"cost_norm", g.cost_norm},
                           {"points", g.points}});
    j["regime_averages"] = regimes;
    return j;
}

inline void write_report_json(const EvalReport& r, const std::string& path) {
    auto out = detail::open_out(path);
    out << report_json(r).dump(2) << '\n';
    detail::finish(out, path);
}

/// <prefix>.csv, <prefix>_episodes.csv, <prefix>_long.csv, <prefix>.json
inline void write_report(const EvalReport& r, const std::string& prefix) {
    write_points_csv(r, prefix + ".csv");
    write_episodes_csv(r, prefix + "_episodes.csv");
    write_long_csv(r, prefix + "_long.csv");
    write_report_json(r, prefix + ".json");
}

}  // namespace gas
