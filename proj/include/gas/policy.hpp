#pragma once

// Goal-guided deterministic policy, its gated advantage-weighted regression
// loss, and the test-time loop that tracks remaining reward and cost targets.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "gas/goals.hpp"

namespace gas {

inline int policy_input_size(const EnvSpec& env) { return goal_input_size(env) + 2; }

/// Goal input extended with the (scaled) goal values.
inline Vec policy_input(const InputNorm& norm, const Vec& goal_in, double reward_value, double cost_value) {
    Vec x(goal_in.size() + 2);
    x.head(goal_in.size()) = goal_in;
    x(goal_in.size()) = reward_value / norm.reward_scale();
    x(goal_in.size() + 1) = cost_value / norm.cost_scale();
    return x;
}

struct PolicyNet {
    Mlp net;  // raw outputs; actions are tanh(net(x))

    Vec action(const Vec& input) const { return net.forward(input).array().tanh().matrix(); }
};

inline PolicyNet make_policy(const EnvSpec& env, const NetArchitecture& arch, Rng& rng) {
    return PolicyNet{
        Mlp(make_layer_sizes(policy_input_size(env), env.action_dim, arch.layers, arch.hidden, arch.embedding), rng)};
}

struct PolicyLoss {
    double loss = 0.0;
    Vec grad;
    std::vector<double> weight;  // 1(V^C < C_hat) |alpha - 1(A_R < 0)| per sample
};

/// L_pi = mean_i 1(V^C < C_hat) |alpha - 1(A_R < 0)| ||tanh(net(x_i)) - a_i||^2.
/// The goal values enter as constant inputs; nothing flows back into the goal
/// networks.
inline PolicyLoss policy_loss_from(const std::vector<TransitionSample>& batch, const GoalBatch& gb,
                                   const PolicyNet& pol, const InputNorm& norm, bool want_grad = true) {
    require(!batch.empty(), "policy_loss: empty batch");
    require(gb.adv.size() == batch.size(), "policy_loss: goal batch does not match samples");
    const auto n = static_cast<Eigen::Index>(batch.size());
    const int action_dim = pol.net.output_size();
    Mat x(policy_input_size(norm.env), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& a = gb.adv[static_cast<std::size_t>(i)];
        x.col(i) = policy_input(norm, gb.inputs.col(i), a.reward_value, a.cost_value);
    }
    MlpCache cache;
    const Mat z = pol.net.forward(x, want_grad ? &cache : nullptr);
    PolicyLoss out;
    out.weight.resize(batch.size());
    Mat up = Mat::Zero(action_dim, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double w = gb.adv[k].feasible ? gb.weight[k] : 0.0;
        out.weight[k] = w;
        if (w == 0.0) continue;
        const Vec& act = batch[k].a;
        require(act.size() == action_dim, "policy_loss: action dimension mismatch");
        for (int j = 0; j < action_dim; ++j) {
            const double th = std::tanh(z(j, i));
            const double err = th - act(j);
            out.loss += w * err * err;
            up(j, i) = 2.0 * w * err * (1.0 - th * th) / static_cast<double>(n);
        }
    }
    out.loss /= static_cast<double>(n);
    if (want_grad) out.grad = pol.net.backward(cache, up);
    return out;
}

inline PolicyLoss policy_loss(const std::vector<TransitionSample>& batch, const GoalNets& nets,
                              const PolicyNet& pol, double alpha) {
    if (batch.empty()) throw ContractViolation("policy_loss: empty batch");
    return policy_loss_from(batch, evaluate_goal_batch(batch, nets, alpha), pol, nets.norm);
}

// ---------------------------------------------------------------------------
// Test time

struct TargetTracker {
    double reward_remaining = 0.0;
    double cost_remaining = 0.0;
    int t = 0;
};

inline TargetTracker update_tracker(TargetTracker tracker, double reward, double cost) {
    tracker.reward_remaining = std::max(tracker.reward_remaining - reward, 0.0);
    tracker.cost_remaining = std::max(tracker.cost_remaining - cost, 0.0);
    ++tracker.t;
    return tracker;
}

struct ActDetail {
    Vec action;
    double reward_value = 0.0;
    double cost_value = 0.0;
};

inline ActDetail act_detail(const PolicyNet& pol, const GoalNets& nets, const Vec& s, const TargetTracker& tracker,
                            int T) {
    require(tracker.t >= 0 && tracker.t < T, "act: tracker time " + std::to_string(tracker.t) + " outside [0, T)");
    require(s.size() == nets.norm.env.state_dim, "act: state dimension does not match the goal networks");
    const Vec g = goal_input(nets.norm, s, tracker.reward_remaining, tracker.cost_remaining, tracker.t);
    ActDetail out;
    std::tie(out.reward_value, out.cost_value) = nets.values(g);
    out.action = pol.action(policy_input(nets.norm, g, out.reward_value, out.cost_value));
    return out;
}

inline Vec act(const PolicyNet& pol, const GoalNets& nets, const Vec& s, const TargetTracker& tracker, int T) {
    return act_detail(pol, nets, s, tracker, T).action;
}

struct TraceStep {
    Vec state;
    Vec action;
    double reward = 0.0;
    double cost = 0.0;
    double reward_remaining = 0.0;  // before the step
    double cost_remaining = 0.0;
    double reward_value = 0.0;
    double cost_value = 0.0;
};

struct Episode {
    double reward = 0.0;
    double cost = 0.0;
    std::vector<TraceStep> trace;  // filled only when requested
};

inline Episode run_episode(const PolicyNet& pol, const GoalNets& nets, Env& env, double reward_target,
                           double cost_target, bool keep_trace = false) {
    const int T = env.spec().T;
    if (env.spec().state_dim != nets.norm.env.state_dim || env.spec().action_dim != pol.net.output_size() ||
        env.spec().name != nets.norm.env.name)
        throw ConfigError("environment " + to_string(env.spec().name) + " (state_dim " +
                          std::to_string(env.spec().state_dim) + ") does not match the checkpoint (" +
                          to_string(nets.norm.env.name) + ", state_dim " + std::to_string(nets.norm.env.state_dim) +
                          ")");
    Episode ep;
    TargetTracker tracker{reward_target, cost_target, 0};
    Vec s = env.reset();
    for (int t = 0; t < T; ++t) {
        const ActDetail d = act_detail(pol, nets, s, tracker, T);
        StepResult r = env.step(s, d.action, t);
        if (keep_trace)
            ep.trace.push_back({s, d.action, r.reward, r.cost, tracker.reward_remaining, tracker.cost_remaining,
                                d.reward_value, d.cost_value});
        ep.reward += r.reward;
        ep.cost += r.cost;
        tracker = update_tracker(tracker, r.reward, r.cost);
        s = std::move(r.next_state);
    }
    return ep;
}

inline void write_trace_jsonl(const Episode& ep, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeError("cannot open '" + path + "' for writing");
    auto as_list = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    for (std::size_t t = 0; t < ep.trace.size(); ++t) {
        const auto& st = ep.trace[t];
        nlohmann::json line{{"t", t},
                            {"s", as_list(st.state)},
                            {"a", as_list(st.action)},
                            {"r", st.reward},
                            {"c", st.cost},
                            {"R_remaining", st.reward_remaining},
                            {"C_remaining", st.cost_remaining},
                            {"V_R", st.reward_value},
                            {"V_C", st.cost_value}};
        out << line.dump() << '\n';
    }
    if (!out) throw RuntimeError("write failed on '" + path + "'");
}

inline void store_policy(Checkpoint& ckpt, const PolicyNet& pol, const OptimState* opt = nullptr) {
    ckpt.networks["policy"] = NetworkRecord{pol.net, opt ? std::optional(*opt) : std::nullopt};
}

inline PolicyNet restore_policy(const Checkpoint& ckpt, const EnvSpec& env) {
    PolicyNet pol{ckpt.network("policy").net};
    if (pol.net.input_size() != policy_input_size(env) || pol.net.output_size() != env.action_dim)
        throw SchemaError("policy network does not match the environment dimensions");
    return pol;
}

}  // namespace gas
