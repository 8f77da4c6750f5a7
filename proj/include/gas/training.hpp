#pragma once

// Training loop: goal functions and policy, either interleaved (all three
// losses every iteration) or in two phases (goals first, then the policy).

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gas/policy.hpp"

namespace gas {

enum class Schedule { Interleaved, TwoPhase };

inline std::string to_string(Schedule s) { return s == Schedule::Interleaved ? "interleaved" : "two_phase"; }

inline Schedule parse_schedule(const std::string& name) {
    if (name == "interleaved") return Schedule::Interleaved;
    if (name == "two_phase") return Schedule::TwoPhase;
    throw ConfigError("unknown schedule '" + name + "' (expected interleaved or two_phase)");
}

struct TrainConfig {
    AugmentConfig augment;
    AdamConfig adam;
    NetArchitecture arch;
    double alpha = 0.8;
    int batch_size = 2048;
    int iterations = 20000;  // per phase in two-phase mode
    Schedule schedule = Schedule::Interleaved;
    std::uint64_t seed = 0;
    int log_every = 100;

    void validate() const {
        augment.validate();
        ExpectileLevel{alpha};
        if (batch_size <= 0) throw ConfigError("batch_size must be positive");
        if (iterations < 0) throw ConfigError("iterations must be >= 0");
        if (log_every <= 0) throw ConfigError("log_every must be positive");
        if (arch.layers < 1 || arch.hidden < 1 || arch.embedding < 1)
            throw ConfigError("network sizes must be positive");
        if (!(adam.learning_rate > 0.0)) throw ConfigError("lr must be positive");
    }
};

struct LossRow {
    int iteration = 0;  // 1-based count of completed iterations
    std::string phase;  // "joint", "goals" or "policy"
    double reward_loss = NAN;
    double cost_loss = NAN;
    double policy_loss = NAN;
};

struct TrainedModel {
    GoalNets goals;
    PolicyNet policy;
    OptimState reward_opt;
    OptimState cost_opt;
    OptimState policy_opt;
    std::vector<LossRow> history;
    long long skipped_steps = 0;  // optimizer steps refused for non-finite gradients
};

/// Freshly initialized networks; the "init" stream is consumed in the order
/// reward net, cost net, policy.
inline TrainedModel init_model(const OfflineDataset& data, const TrainConfig& cfg) {
    Rng init = make_stream(cfg.seed, "init");
    TrainedModel m;
    m.goals = make_goal_nets(fit_input_norm(data), cfg.arch, init);
    m.policy = make_policy(data.spec(), cfg.arch, init);
    m.reward_opt = OptimState(cfg.adam, m.goals.reward_net.parameter_count());
    m.cost_opt = OptimState(cfg.adam, m.goals.cost_net.parameter_count());
    m.policy_opt = OptimState(cfg.adam, m.policy.net.parameter_count());
    return m;
}

namespace detail {

struct Streams {
    Rng batch;
    Rng relabel;
    Streams(std::uint64_t seed) : batch(make_stream(seed, "batch")), relabel(make_stream(seed, "relabel")) {}
};

inline void check_finite(double value, const char* what, int iteration, const std::vector<TransitionSample>& batch) {
    if (std::isfinite(value)) return;
    throw RuntimeError(std::string("non-finite ") + what + " at iteration " + std::to_string(iteration + 1) +
                       "; first samples of the batch:\n" + describe_batch(batch));
}

/// Running means over the logging window.
struct Window {
    double r = 0.0, c = 0.0, p = 0.0;
    int n = 0;
    void add(double lr, double lc, double lp) {
        r += lr;
        c += lc;
        p += lp;
        ++n;
    }
    LossRow flush(int iteration, const std::string& phase, bool goals, bool policy) {
        LossRow row{iteration, phase, NAN, NAN, NAN};
        if (goals) {
            row.reward_loss = r / n;
            row.cost_loss = c / n;
        }
        if (policy) row.policy_loss = p / n;
        *this = Window{};
        return row;
    }
};

inline void step_goals(TrainedModel& m, const GoalLoss& loss) {
    if (!optimizer_step(m.goals.reward_net.params(), loss.reward_grad, m.reward_opt).applied) ++m.skipped_steps;
    if (!optimizer_step(m.goals.cost_net.params(), loss.cost_grad, m.cost_opt).applied) ++m.skipped_steps;
}

inline void step_policy(TrainedModel& m, const PolicyLoss& loss) {
    if (!optimizer_step(m.policy.net.params(), loss.grad, m.policy_opt).applied) ++m.skipped_steps;
}

}  // namespace detail

/// Progress callback: (phase, completed iterations, total).
using ProgressFn = std::function<void(const std::string&, int, int)>;

/// Runs the configured schedule starting from `m`. Batches come from the
/// "batch" stream and relabel noise from the "relabel" stream.
inline void train(TrainedModel& m, const OfflineDataset& data, const TrainConfig& cfg,
                  const ProgressFn& progress = nullptr) {
    cfg.validate();
    const ReshapeIndex reshape = build_reshape_index(data, cfg.augment.q_percent, cfg.augment.cost_bins);
    detail::Streams streams(cfg.seed);
    const ReshapeIndex* rp = &reshape;

    auto draw = [&]() { return sample_batch(data, rp, cfg.augment, cfg.batch_size, streams.batch, &streams.relabel); };

    if (cfg.schedule == Schedule::Interleaved) {
        detail::Window win;
        for (int i = 0; i < cfg.iterations; ++i) {
            const auto batch = draw();
            const GoalBatch gb = evaluate_goal_batch(batch, m.goals, cfg.alpha);
            const GoalLoss gl = goal_loss_from(gb, m.goals);
            const PolicyLoss pl = policy_loss_from(batch, gb, m.policy, m.goals.norm);
            detail::check_finite(gl.reward_loss, "reward goal loss", i, batch);
            detail::check_finite(gl.cost_loss, "cost goal loss", i, batch);
            detail::check_finite(pl.loss, "policy loss", i, batch);
            detail::step_goals(m, gl);
            detail::step_policy(m, pl);
            win.add(gl.reward_loss, gl.cost_loss, pl.loss);
            if ((i + 1) % cfg.log_every == 0) {
                m.history.push_back(win.flush(i + 1, "joint", true, true));
                if (progress) progress("joint", i + 1, cfg.iterations);
            }
        }
        return;
    }

    detail::Window win;
    for (int i = 0; i < cfg.iterations; ++i) {
        const auto batch = draw();
        const GoalLoss gl = goal_loss_from(evaluate_goal_batch(batch, m.goals, cfg.alpha), m.goals);
        detail::check_finite(gl.reward_loss, "reward goal loss", i, batch);
        detail::check_finite(gl.cost_loss, "cost goal loss", i, batch);
        detail::step_goals(m, gl);
        win.add(gl.reward_loss, gl.cost_loss, 0.0);
        if ((i + 1) % cfg.log_every == 0) {
            m.history.push_back(win.flush(i + 1, "goals", true, false));
            if (progress) progress("goals", i + 1, cfg.iterations);
        }
    }
    win = detail::Window{};
    for (int i = 0; i < cfg.iterations; ++i) {
        const auto batch = draw();
        const GoalBatch gb = evaluate_goal_batch(batch, m.goals, cfg.alpha);
        const PolicyLoss pl = policy_loss_from(batch, gb, m.policy, m.goals.norm);
        detail::check_finite(pl.loss, "policy loss", i, batch);
        detail::step_policy(m, pl);
        win.add(0.0, 0.0, pl.loss);
        if ((i + 1) % cfg.log_every == 0) {
            m.history.push_back(win.flush(i + 1, "policy", false, true));
            if (progress) progress("policy", i + 1, cfg.iterations);
        }
    }
}

inline TrainedModel train_model(const OfflineDataset& data, const TrainConfig& cfg,
                                const ProgressFn& progress = nullptr) {
    cfg.validate();
    TrainedModel m = init_model(data, cfg);
    train(m, data, cfg, progress);
    return m;
}

/// Goal functions only, for `iterations` steps.
inline TrainedModel train_goals(const OfflineDataset& data, TrainConfig cfg, const ProgressFn& progress = nullptr) {
    cfg.validate();
    TrainedModel m = init_model(data, cfg);
    const ReshapeIndex reshape = build_reshape_index(data, cfg.augment.q_percent, cfg.augment.cost_bins);
    detail::Streams streams(cfg.seed);
    detail::Window win;
    for (int i = 0; i < cfg.iterations; ++i) {
        const auto batch = sample_batch(data, &reshape, cfg.augment, cfg.batch_size, streams.batch, &streams.relabel);
        const GoalLoss gl = goal_loss_from(evaluate_goal_batch(batch, m.goals, cfg.alpha), m.goals);
        detail::check_finite(gl.reward_loss, "reward goal loss", i, batch);
        detail::check_finite(gl.cost_loss, "cost goal loss", i, batch);
        detail::step_goals(m, gl);
        win.add(gl.reward_loss, gl.cost_loss, 0.0);
        if ((i + 1) % cfg.log_every == 0) {
            m.history.push_back(win.flush(i + 1, "goals", true, false));
            if (progress) progress("goals", i + 1, cfg.iterations);
        }
    }
    return m;
}

/// Policy only, against frozen goal functions in `m`.
inline void train_policy(TrainedModel& m, const OfflineDataset& data, const TrainConfig& cfg,
                         const ProgressFn& progress = nullptr) {
    cfg.validate();
    const ReshapeIndex reshape = build_reshape_index(data, cfg.augment.q_percent, cfg.augment.cost_bins);
    Rng batch_rng = make_stream(cfg.seed, "policy_batch");
    Rng relabel_rng = make_stream(cfg.seed, "policy_relabel");
    detail::Window win;
    for (int i = 0; i < cfg.iterations; ++i) {
        const auto batch = sample_batch(data, &reshape, cfg.augment, cfg.batch_size, batch_rng, &relabel_rng);
        const PolicyLoss pl =
            policy_loss_from(batch, evaluate_goal_batch(batch, m.goals, cfg.alpha), m.policy, m.goals.norm);
        detail::check_finite(pl.loss, "policy loss", i, batch);
        detail::step_policy(m, pl);
        win.add(0.0, 0.0, pl.loss);
        if ((i + 1) % cfg.log_every == 0) {
            m.history.push_back(win.flush(i + 1, "policy", false, true));
            if (progress) progress("policy", i + 1, cfg.iterations);
        }
    }
}

inline Checkpoint model_checkpoint(const TrainedModel& m, bool with_optimizer = true) {
    Checkpoint ckpt;
    store_goal_nets(ckpt, m.goals, with_optimizer ? &m.reward_opt : nullptr, with_optimizer ? &m.cost_opt : nullptr);
    store_policy(ckpt, m.policy, with_optimizer ? &m.policy_opt : nullptr);
    return ckpt;
}

struct LoadedModel {
    GoalNets goals;
    PolicyNet policy;
};

inline LoadedModel restore_model(const Checkpoint& ckpt) {
    LoadedModel m;
    m.goals = restore_goal_nets(ckpt);
    m.policy = restore_policy(ckpt, m.goals.norm.env);
    return m;
}

}  // namespace gas
