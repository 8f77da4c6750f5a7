#pragma once

// Reward and cost goal functions trained by expectile regression over
// augmented, relabeled samples.
//
// Both networks read the same normalized input
//   [ (s - mean) / scale, R_hat / R_scale, C_hat / C_scale, t' / T ]
// and output values in units of R_scale and C_scale respectively.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gas/checkpoint.hpp"
#include "gas/dataset.hpp"
#include "gas/nn.hpp"

namespace gas {

/// Input scaling constants fitted on a dataset; stored with every checkpoint.
struct InputNorm {
    EnvSpec env;
    Vec state_mean;
    Vec state_scale;
    double reward_max = 0.0;
    double cost_max = 0.0;

    double reward_scale() const { return std::max(std::abs(reward_max), 1.0); }
    double cost_scale() const { return std::max(cost_max, 1.0); }
    int horizon() const { return env.T; }

    Vec normalize_state(const Vec& s) const {
        require(s.size() == state_mean.size(), "state dimension does not match the fitted normalization");
        return (s - state_mean).cwiseQuotient(state_scale);
    }
};

/// Per-dimension mean and standard deviation over every dataset state
/// (scale 1 where the deviation is zero).
inline InputNorm fit_input_norm(const OfflineDataset& data) {
    InputNorm norm;
    norm.env = data.spec();
    norm.reward_max = data.reward_max();
    norm.cost_max = data.cost_max();
    const int d = data.spec().state_dim;
    Vec sum = Vec::Zero(d);
    double n = 0.0;
    for (const auto& traj : data.trajectories())
        for (const auto& step : traj.steps()) {
            sum += step.state;
            n += 1.0;
        }
    norm.state_mean = sum / n;
    Vec sq = Vec::Zero(d);
    for (const auto& traj : data.trajectories())
        for (const auto& step : traj.steps()) sq += (step.state - norm.state_mean).cwiseAbs2();
    norm.state_scale = (sq / n).cwiseSqrt();
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(norm.state_scale(i) > 1e-12)) norm.state_scale(i) = 1.0;
    return norm;
}

inline void store_norm(Checkpoint& ckpt, const InputNorm& norm) {
    ckpt.texts["env.name"] = to_string(norm.env.name);
    ckpt.arrays["env.T"] = {static_cast<double>(norm.env.T)};
    ckpt.arrays["env.state_dim"] = {static_cast<double>(norm.env.state_dim)};
    ckpt.arrays["env.action_dim"] = {static_cast<double>(norm.env.action_dim)};
    ckpt.arrays["norm.state_mean"].assign(norm.state_mean.data(), norm.state_mean.data() + norm.state_mean.size());
    ckpt.arrays["norm.state_scale"].assign(norm.state_scale.data(),
                                           norm.state_scale.data() + norm.state_scale.size());
    ckpt.arrays["norm.reward_max"] = {norm.reward_max};
    ckpt.arrays["norm.cost_max"] = {norm.cost_max};
}

inline InputNorm restore_norm(const Checkpoint& ckpt) {
    InputNorm norm;
    norm.env = make_spec(ckpt.text("env.name"), static_cast<int>(ckpt.scalar("env.T")));
    if (norm.env.state_dim != static_cast<int>(ckpt.scalar("env.state_dim")) ||
        norm.env.action_dim != static_cast<int>(ckpt.scalar("env.action_dim")))
        throw SchemaError("checkpoint environment dimensions are inconsistent");
    const auto& mean = ckpt.array("norm.state_mean");
    const auto& scale = ckpt.array("norm.state_scale");
    if (mean.size() != static_cast<std::size_t>(norm.env.state_dim) || scale.size() != mean.size())
        throw SchemaError("checkpoint normalization does not match the state dimension");
    norm.state_mean = Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    norm.state_scale = Eigen::Map<const Vec>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    norm.reward_max = ckpt.scalar("norm.reward_max");
    norm.cost_max = ckpt.scalar("norm.cost_max");
    return norm;
}

inline int goal_input_size(const EnvSpec& env) { return env.state_dim + 3; }

/// Goal-function input for a state, targets and presentation time t'.
inline Vec goal_input(const InputNorm& norm, const Vec& state, double reward_target, double cost_target,
                      int t_prime) {
    const int d = norm.env.state_dim;
    Vec x(d + 3);
    x.head(d) = norm.normalize_state(state);
    x(d) = reward_target / norm.reward_scale();
    x(d + 1) = cost_target / norm.cost_scale();
    x(d + 2) = static_cast<double>(t_prime) / norm.horizon();
    return x;
}

inline Vec goal_inputs(const TransitionSample& sample, const InputNorm& norm) {
    return goal_input(norm, sample.s, sample.reward_target, sample.cost_target, sample.t_prime);
}

inline Mat goal_input_batch(const std::vector<TransitionSample>& batch, const InputNorm& norm) {
    Mat x(goal_input_size(norm.env), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = goal_inputs(batch[i], norm);
    return x;
}

struct GoalNets {
    Mlp reward_net;
    Mlp cost_net;
    InputNorm norm;

    /// V^R and V^C for a single input vector.
    std::pair<double, double> values(const Vec& input) const {
        return {norm.reward_scale() * reward_net.forward(input)(0), norm.cost_scale() * cost_net.forward(input)(0)};
    }
};

struct NetArchitecture {
    int layers = 7;
    int hidden = 128;
    int embedding = 64;
};

inline GoalNets make_goal_nets(const InputNorm& norm, const NetArchitecture& arch, Rng& rng) {
    const auto sizes = make_layer_sizes(goal_input_size(norm.env), 1, arch.layers, arch.hidden, arch.embedding);
    GoalNets nets;
    nets.reward_net = Mlp(sizes, rng);
    nets.cost_net = Mlp(sizes, rng);
    nets.norm = norm;
    return nets;
}

struct AdvantagePair {
    double reward_adv = 0.0;  // A_R = 1(V^C < C_hat) R_seg - V^R
    double cost_adv = 0.0;    // A_C = C_seg - V^C
    bool feasible = false;    // V^C < C_hat, strict
    double reward_value = 0.0;
    double cost_value = 0.0;
};

inline AdvantagePair advantages_from_values(const TransitionSample& sample, double reward_value, double cost_value) {
    AdvantagePair out;
    out.reward_value = reward_value;
    out.cost_value = cost_value;
    out.feasible = cost_value < sample.cost_target;
    out.reward_adv = (out.feasible ? sample.reward_seg : 0.0) - reward_value;
    out.cost_adv = sample.cost_seg - cost_value;
    return out;
}

inline AdvantagePair compute_advantages(const TransitionSample& sample, const GoalNets& nets) {
    const auto [vr, vc] = nets.values(goal_inputs(sample, nets.norm));
    return advantages_from_values(sample, vr, vc);
}

/// Goal-network evaluation of one batch, kept for the backward pass and for
/// the policy step that reuses the same values.
struct GoalBatch {
    Mat inputs;
    MlpCache reward_cache;
    MlpCache cost_cache;
    std::vector<AdvantagePair> adv;
    std::vector<double> weight;  // |alpha - 1(A_R < 0)|, shared by L_R, L_C and L_pi
};

inline GoalBatch evaluate_goal_batch(const std::vector<TransitionSample>& batch, const GoalNets& nets,
                                     double alpha) {
    require(!batch.empty(), "goal batch is empty");
    const ExpectileLevel level(alpha);
    GoalBatch gb;
    gb.inputs = goal_input_batch(batch, nets.norm);
    const Mat r_out = nets.reward_net.forward(gb.inputs, &gb.reward_cache);
    const Mat c_out = nets.cost_net.forward(gb.inputs, &gb.cost_cache);
    gb.adv.resize(batch.size());
    gb.weight.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        gb.adv[i] = advantages_from_values(batch[i], nets.norm.reward_scale() * r_out(0, col),
                                           nets.norm.cost_scale() * c_out(0, col));
        gb.weight[i] = level.weight(gb.adv[i].reward_adv);
    }
    return gb;
}

struct GoalLoss {
    double reward_loss = 0.0;  // L_R
    double cost_loss = 0.0;    // L_C
    Vec reward_grad;           // dL_R / d(reward_net params)
    Vec cost_grad;             // dL_C / d(cost_net params)
};

/// L_R = mean w (A_R)^2 and L_C = mean w (A_C)^2 with w = |alpha - 1(A_R < 0)|.
/// Indicators and weights are constants of the current iterate: L_R reaches
/// the reward net only through V^R and L_C the cost net only through V^C.
inline GoalLoss goal_loss_from(const GoalBatch& gb, const GoalNets& nets, bool want_grads = true) {
    const auto n = static_cast<Eigen::Index>(gb.adv.size());
    GoalLoss loss;
    Mat up_r(1, n), up_c(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& a = gb.adv[static_cast<std::size_t>(i)];
        const double w = gb.weight[static_cast<std::size_t>(i)];
        loss.reward_loss += w * a.reward_adv * a.reward_adv;
        loss.cost_loss += w * a.cost_adv * a.cost_adv;
        // d/dV of w (target - V)^2 is -2 w (target - V); V = scale * output.
        up_r(0, i) = -2.0 * w * a.reward_adv * nets.norm.reward_scale() / static_cast<double>(n);
        up_c(0, i) = -2.0 * w * a.cost_adv * nets.norm.cost_scale() / static_cast<double>(n);
    }
    loss.reward_loss /= static_cast<double>(n);
    loss.cost_loss /= static_cast<double>(n);
    if (want_grads) {
        loss.reward_grad = nets.reward_net.backward(gb.reward_cache, up_r);
        loss.cost_grad = nets.cost_net.backward(gb.cost_cache, up_c);
    }
    return loss;
}

inline GoalLoss goal_loss(const std::vector<TransitionSample>& batch, const GoalNets& nets, double alpha) {
    if (batch.empty()) throw ContractViolation("goal_loss: empty batch");
    return goal_loss_from(evaluate_goal_batch(batch, nets, alpha), nets);
}

/// Human-readable dump of the first few samples, attached to training errors.
inline std::string describe_batch(const std::vector<TransitionSample>& batch, std::size_t limit = 8) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < batch.size() && i < limit; ++i) {
        const auto& s = batch[i];
        os << "  [" << i << "] traj=" << s.trajectory << " t=" << s.t << " end=" << s.end << " t'=" << s.t_prime
           << " R_seg=" << s.reward_seg << " C_seg=" << s.cost_seg << " R_hat=" << s.reward_target
           << " C_hat=" << s.cost_target << " s=[" << s.s.transpose() << "] a=[" << s.a.transpose() << "]\n";
    }
    return os.str();
}

inline void store_goal_nets(Checkpoint& ckpt, const GoalNets& nets, const OptimState* reward_opt = nullptr,
                            const OptimState* cost_opt = nullptr) {
    ckpt.networks["goal.reward"] = NetworkRecord{nets.reward_net, reward_opt ? std::optional(*reward_opt) : std::nullopt};
    ckpt.networks["goal.cost"] = NetworkRecord{nets.cost_net, cost_opt ? std::optional(*cost_opt) : std::nullopt};
    store_norm(ckpt, nets.norm);
}

inline GoalNets restore_goal_nets(const Checkpoint& ckpt) {
    GoalNets nets;
    nets.norm = restore_norm(ckpt);
    nets.reward_net = ckpt.network("goal.reward").net;
    nets.cost_net = ckpt.network("goal.cost").net;
    const int in = goal_input_size(nets.norm.env);
    if (nets.reward_net.input_size() != in || nets.cost_net.input_size() != in || nets.reward_net.output_size() != 1 ||
        nets.cost_net.output_size() != 1)
        throw SchemaError("goal networks do not match the environment dimensions");
    return nets;
}

}  // namespace gas
