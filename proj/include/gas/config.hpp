#pragma once

// Run configuration: a plain `key = value` file plus `key=value` overrides.
// Precedence is overrides > file > defaults. Unknown keys are errors.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gas/eval.hpp"

namespace gas {

struct RunConfig {
    // environment and data
    std::string env = "ChainRun";
    int T = 32;
    std::string dataset;  // existing dataset file; empty means generate
    int n_traj = 200;
    std::string behavior = "standard";  // "standard" or style:weight,style:weight
    // training
    TrainConfig train;
    // evaluation
    EvalConfig eval;
    double robust_threshold = 0.2;
    std::vector<double> robust_multipliers{0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
    std::string ablation = "alpha_sweep";
    std::string out_dir = "runs/default";

    RunConfig() { train.batch_size = 2048; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

inline long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long n = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& x : split(v, ',')) out.push_back(to_double(key, x));
    if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one value");
    return out;
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

struct Key {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    const char* help;
};

// clang-format off
inline const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table{
        {"env", {[](RunConfig& c, const std::string& v) { parse_env_name(v); c.env = v; },
                 [](const RunConfig& c) { return c.env; }, "ChainRun or GridCircle"}},
        {"T", {[](RunConfig& c, const std::string& v) { c.T = static_cast<int>(to_int("T", v)); },
               [](const RunConfig& c) { return std::to_string(c.T); }, "episode length"}},
        {"dataset", {[](RunConfig& c, const std::string& v) { c.dataset = v; },
                     [](const RunConfig& c) { return c.dataset; }, "dataset file to load instead of generating"}},
        {"n_traj", {[](RunConfig& c, const std::string& v) { c.n_traj = static_cast<int>(to_int("n_traj", v)); },
                    [](const RunConfig& c) { return std::to_string(c.n_traj); }, "trajectories to generate"}},
        {"behavior", {[](RunConfig& c, const std::string& v) { c.behavior = v; },
                      [](const RunConfig& c) { return c.behavior; }, "standard, or style:weight list"}},
        {"delta", {[](RunConfig& c, const std::string& v) { c.train.augment.delta = to_double("delta", v); },
                   [](const RunConfig& c) { return fmt(c.train.augment.delta); }, "reward relabel half-width"}},
        {"q_percent", {[](RunConfig& c, const std::string& v) { c.train.augment.q_percent = to_double("q_percent", v); },
                       [](const RunConfig& c) { return fmt(c.train.augment.q_percent); }, "reshape quantile, percent"}},
        {"epsilon", {[](RunConfig& c, const std::string& v) { c.train.augment.epsilon = to_double("epsilon", v); },
                     [](const RunConfig& c) { return fmt(c.train.augment.epsilon); }, "reshaped-subset sampling probability"}},
        {"cost_bins", {[](RunConfig& c, const std::string& v) { c.train.augment.cost_bins = static_cast<int>(to_int("cost_bins", v)); },
                       [](const RunConfig& c) { return std::to_string(c.train.augment.cost_bins); }, "cost bins for reshaping"}},
        {"segments", {[](RunConfig& c, const std::string& v) { c.train.augment.segments = to_bool("segments", v); },
                      [](const RunConfig& c) { return std::string(c.train.augment.segments ? "true" : "false"); }, "segment augmentation on/off"}},
        {"relabel", {[](RunConfig& c, const std::string& v) { c.train.augment.relabel = to_bool("relabel", v); },
                     [](const RunConfig& c) { return std::string(c.train.augment.relabel ? "true" : "false"); }, "target relabeling on/off"}},
        {"layers", {[](RunConfig& c, const std::string& v) { c.train.arch.layers = static_cast<int>(to_int("layers", v)); },
                    [](const RunConfig& c) { return std::to_string(c.train.arch.layers); }, "weight layers per network"}},
        {"hidden", {[](RunConfig& c, const std::string& v) { c.train.arch.hidden = static_cast<int>(to_int("hidden", v)); },
                    [](const RunConfig& c) { return std::to_string(c.train.arch.hidden); }, "hidden width"}},
        {"embedding", {[](RunConfig& c, const std::string& v) { c.train.arch.embedding = static_cast<int>(to_int("embedding", v)); },
                       [](const RunConfig& c) { return std::to_string(c.train.arch.embedding); }, "first layer width"}},
        {"lr", {[](RunConfig& c, const std::string& v) { c.train.adam.learning_rate = to_double("lr", v); },
                [](const RunConfig& c) { return fmt(c.train.adam.learning_rate); }, "learning rate"}},
        {"beta1", {[](RunConfig& c, const std::string& v) { c.train.adam.beta1 = to_double("beta1", v); },
                   [](const RunConfig& c) { return fmt(c.train.adam.beta1); }, "first moment decay"}},
        {"beta2", {[](RunConfig& c, const std::string& v) { c.train.adam.beta2 = to_double("beta2", v); },
                   [](const RunConfig& c) { return fmt(c.train.adam.beta2); }, "second moment decay"}},
        {"adam_eps", {[](RunConfig& c, const std::string& v) { c.train.adam.eps = to_double("adam_eps", v); },
                      [](const RunConfig& c) { return fmt(c.train.adam.eps); }, "optimizer epsilon"}},
        {"grad_clip", {[](RunConfig& c, const std::string& v) { c.train.adam.grad_clip_norm = to_double("grad_clip", v); },
                       [](const RunConfig& c) { return fmt(c.train.adam.grad_clip_norm); }, "global gradient-norm clip, <= 0 disables"}},
        {"weight_decay", {[](RunConfig& c, const std::string& v) { c.train.adam.weight_decay = to_double("weight_decay", v); },
                          [](const RunConfig& c) { return fmt(c.train.adam.weight_decay); }, "decoupled weight decay"}},
        {"batch", {[](RunConfig& c, const std::string& v) { c.train.batch_size = static_cast<int>(to_int("batch", v)); },
                   [](const RunConfig& c) { return std::to_string(c.train.batch_size); }, "batch size"}},
        {"alpha", {[](RunConfig& c, const std::string& v) { c.train.alpha = to_double("alpha", v); },
                   [](const RunConfig& c) { return fmt(c.train.alpha); }, "expectile level"}},
        {"iterations", {[](RunConfig& c, const std::string& v) { c.train.iterations = static_cast<int>(to_int("iterations", v)); },
                        [](const RunConfig& c) { return std::to_string(c.train.iterations); }, "training iterations (per phase when two_phase)"}},
        {"schedule", {[](RunConfig& c, const std::string& v) { c.train.schedule = parse_schedule(v); },
                      [](const RunConfig& c) { return to_string(c.train.schedule); }, "interleaved or two_phase"}},
        {"seed", {[](RunConfig& c, const std::string& v) { c.train.seed = static_cast<std::uint64_t>(to_int("seed", v)); },
                  [](const RunConfig& c) { return std::to_string(c.train.seed); }, "root seed"}},
        {"log_every", {[](RunConfig& c, const std::string& v) { c.train.log_every = static_cast<int>(to_int("log_every", v)); },
                       [](const RunConfig& c) { return std::to_string(c.train.log_every); }, "loss log interval"}},
        {"eval_thresholds", {[](RunConfig& c, const std::string& v) { c.eval.thresholds = to_doubles("eval_thresholds", v); },
                             [](const RunConfig& c) { return join(c.eval.thresholds); }, "fractions of C_max"}},
        {"episodes_per_point", {[](RunConfig& c, const std::string& v) { c.eval.episodes_per_point = static_cast<int>(to_int("episodes_per_point", v)); },
                                [](const RunConfig& c) { return std::to_string(c.eval.episodes_per_point); }, "episodes per seed and point"}},
        {"eval_seeds", {[](RunConfig& c, const std::string& v) {
                            c.eval.seeds.clear();
                            for (const auto& s : split(v, ',')) c.eval.seeds.push_back(static_cast<std::uint64_t>(to_int("eval_seeds", s)));
                        },
                        [](const RunConfig& c) {
                            std::string s;
                            for (std::size_t i = 0; i < c.eval.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.eval.seeds[i]);
                            return s;
                        }, "evaluation seeds"}},
        {"target_reward_fraction", {[](RunConfig& c, const std::string& v) { c.eval.target_reward_fraction = to_double("target_reward_fraction", v); },
                                    [](const RunConfig& c) { return fmt(c.eval.target_reward_fraction); }, "test reward target as a fraction of R_max"}},
        {"robust_threshold", {[](RunConfig& c, const std::string& v) { c.robust_threshold = to_double("robust_threshold", v); },
                              [](const RunConfig& c) { return fmt(c.robust_threshold); }, "threshold of the robustness sweep"}},
        {"robust_multipliers", {[](RunConfig& c, const std::string& v) { c.robust_multipliers = to_doubles("robust_multipliers", v); },
                                [](const RunConfig& c) { return join(c.robust_multipliers); }, "reward targets as multiples of the optimum"}},
        {"ablation", {[](RunConfig& c, const std::string& v) { parse_ablation(v); c.ablation = v; },
                      [](const RunConfig& c) { return c.ablation; }, "alpha_sweep, no_tsra, no_relabel or no_reshape"}},
        {"out_dir", {[](RunConfig& c, const std::string& v) { c.out_dir = v; },
                     [](const RunConfig& c) { return c.out_dir; }, "output directory (GAS_OUT_DIR overrides)"}},
    };
    return table;
}
// clang-format on

}  // namespace detail

inline void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& keys = detail::keys();
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

/// Applies one `key=value` override.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    set_key(cfg, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            set_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Canonical text form: every key in sorted order, one per line.
inline std::string config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, key] : detail::keys()) out += k + " = " + key.get(cfg) + "\n";
    return out;
}

inline std::vector<std::pair<std::string, std::string>> config_help() {
    std::vector<std::pair<std::string, std::string>> out;
    const RunConfig defaults;
    for (const auto& [k, key] : detail::keys()) out.emplace_back(k, std::string(key.help) + " [" + key.get(defaults) + "]");
    return out;
}

inline BehaviorMix parse_behavior_mix(const std::string& spec, EnvName env) {
    if (spec == "standard") return standard_mix(env);
    BehaviorMix mix;
    for (const auto& part : detail::split(spec, ',')) {
        const auto colon = part.find(':');
        const std::string name = detail::trim(part.substr(0, colon));
        const double w = colon == std::string::npos ? 1.0 : detail::to_double("behavior", detail::trim(part.substr(colon + 1)));
        mix.components.emplace_back(parse_behavior_style(name), w);
    }
    if (mix.components.empty()) throw ConfigError("config key 'behavior' is empty");
    return mix;
}

/// Checks cross-field constraints; messages name the offending key.
inline void validate(const RunConfig& cfg) {
    if (cfg.T < 2) throw ConfigError("config key 'T' must be >= 2");
    if (cfg.dataset.empty() && cfg.n_traj <= 0) throw ConfigError("config key 'n_traj' must be positive");
    parse_behavior_mix(cfg.behavior, parse_env_name(cfg.env));
    try {
        cfg.train.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    cfg.eval.validate();
    if (!(cfg.robust_threshold > 0.0 && cfg.robust_threshold <= 1.0))
        throw ConfigError("config key 'robust_threshold' must lie in (0, 1]");
}

}  // namespace gas
