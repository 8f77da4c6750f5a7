#pragma once

// Deterministic toy constrained MDPs and the rollout harness.
//
// ChainRun   state (x, tau),    action (a)       speed v = (a+1)/2, reward v,
//                                                 cost 1 iff v > 0.5.
// GridCircle state (x, y, tau), action (ax, ay)  move 0.1*a, reward is the
//                                                 angular progress, cost 1 when
//                                                 leaving the ring 0.5 <= |p| <= 1.5.
//
// The last state component is always the normalized time tau = t/T.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gas/error.hpp"

namespace gas {

using Vec = Eigen::VectorXd;

enum class EnvName { ChainRun, GridCircle };

inline std::string to_string(EnvName name) {
    switch (name) {
        case EnvName::ChainRun: return "ChainRun";
        case EnvName::GridCircle: return "GridCircle";
    }
    return "?";
}

inline EnvName parse_env_name(const std::string& name) {
    if (name == "ChainRun") return EnvName::ChainRun;
    if (name == "GridCircle") return EnvName::GridCircle;
    throw ConfigError("unknown environment '" + name + "' (expected ChainRun or GridCircle)");
}

struct EnvSpec {
    EnvName name = EnvName::ChainRun;
    int T = 32;
    int state_dim = 2;
    int action_dim = 1;
    double discount = 1.0;  // returns are undiscounted; never anything else
    double cost_max_per_step = 1.0;

    int time_feature() const { return state_dim - 1; }
};

inline EnvSpec make_spec(EnvName name, int T) {
    if (T < 2) throw ConfigError("episode_length must be >= 2, got " + std::to_string(T));
    EnvSpec spec;
    spec.name = name;
    spec.T = T;
    switch (name) {
        case EnvName::ChainRun:
            spec.state_dim = 2;
            spec.action_dim = 1;
            break;
        case EnvName::GridCircle:
            spec.state_dim = 3;
            spec.action_dim = 2;
            break;
    }
    return spec;
}

inline EnvSpec make_spec(const std::string& name, int T) { return make_spec(parse_env_name(name), T); }

struct Step {
    Vec state;
    Vec action;
    double reward = 0.0;
    double cost = 0.0;
};

/// Fixed sequence of steps with reward/cost prefix sums;
/// reward_prefix[k] is the sum of the first k rewards.
class Trajectory {
public:
    Trajectory() = default;

    explicit Trajectory(std::vector<Step> steps) : steps_(std::move(steps)) {
        reward_prefix_.assign(steps_.size() + 1, 0.0);
        cost_prefix_.assign(steps_.size() + 1, 0.0);
        for (std::size_t i = 0; i < steps_.size(); ++i) {
            reward_prefix_[i + 1] = reward_prefix_[i] + steps_[i].reward;
            cost_prefix_[i + 1] = cost_prefix_[i] + steps_[i].cost;
        }
    }

    int length() const { return static_cast<int>(steps_.size()); }
    const std::vector<Step>& steps() const { return steps_; }
    const Step& step(int t) const { return steps_.at(static_cast<std::size_t>(t)); }
    const std::vector<double>& reward_prefix() const { return reward_prefix_; }
    const std::vector<double>& cost_prefix() const { return cost_prefix_; }

    double total_reward() const { return reward_prefix_.back(); }
    double total_cost() const { return cost_prefix_.back(); }

private:
    std::vector<Step> steps_;
    std::vector<double> reward_prefix_{0.0};
    std::vector<double> cost_prefix_{0.0};
};

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    double cost = 0.0;
    bool done = false;
};

/// Single-owner environment. The dynamics are deterministic; the seed is kept
/// so that every run records where it came from.
class Env {
public:
    Env(EnvSpec spec, std::uint64_t seed) : spec_(spec), seed_(seed) {}

    const EnvSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    /// Number of actions that had to be clamped into [-1, 1].
    std::size_t clamp_warnings() const { return clamp_warnings_; }

    Vec reset() const {
        Vec s = Vec::Zero(spec_.state_dim);
        if (spec_.name == EnvName::GridCircle) s(0) = 1.0;
        return s;
    }

    StepResult step(const Vec& state, const Vec& action, int t) {
        require(t >= 0 && t < spec_.T, "env_step: t=" + std::to_string(t) + " outside [0, T)");
        require(state.size() == spec_.state_dim, "env_step: state dimension mismatch");
        require(action.size() == spec_.action_dim, "env_step: action dimension mismatch");

        Vec a = action;
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            if (!(a(i) >= -1.0 && a(i) <= 1.0)) {
                ++clamp_warnings_;
                a(i) = std::isnan(a(i)) ? 0.0 : std::clamp(a(i), -1.0, 1.0);
            }
        }

        StepResult out;
        out.next_state = state;
        const double tau_next = static_cast<double>(t + 1) / spec_.T;
        switch (spec_.name) {
            case EnvName::ChainRun: {
                const double v = (a(0) + 1.0) / 2.0;
                out.next_state(0) = state(0) + v;
                out.next_state(1) = tau_next;
                out.reward = v;
                out.cost = v > 0.5 ? 1.0 : 0.0;
                break;
            }
            case EnvName::GridCircle: {
                const double x = state(0), y = state(1);
                const double nx = x + 0.1 * a(0), ny = y + 0.1 * a(1);
                const double radius = std::max(std::hypot(x, y), 0.5);
                const double next_radius = std::hypot(nx, ny);
                out.next_state(0) = nx;
                out.next_state(1) = ny;
                out.next_state(2) = tau_next;
                out.reward = (x * a(1) - y * a(0)) / radius;
                out.cost = (next_radius > 1.5 || next_radius < 0.5) ? 1.0 : 0.0;
                break;
            }
        }
        out.done = (t + 1 == spec_.T);
        return out;
    }

private:
    EnvSpec spec_;
    std::uint64_t seed_;
    std::size_t clamp_warnings_ = 0;
};

inline Env make_env(const EnvSpec& spec, std::uint64_t seed) {
    if (spec.T < 2) throw ConfigError("episode_length must be >= 2");
    return Env(spec, seed);
}

inline Env make_env(const std::string& name, int T, std::uint64_t seed) { return make_env(make_spec(name, T), seed); }

/// Maps (state, t) to an action. Exceptions thrown by the actor propagate.
using ActionSource = std::function<Vec(const Vec& state, int t)>;

inline Trajectory rollout(Env& env, const ActionSource& actor, int T) {
    require(T == env.spec().T, "rollout: horizon does not match the environment");
    std::vector<Step> steps;
    steps.reserve(static_cast<std::size_t>(T));
    Vec s = env.reset();
    for (int t = 0; t < T; ++t) {
        Vec a = actor(s, t);
        StepResult r = env.step(s, a, t);
        steps.push_back(Step{s, a.cwiseMax(-1.0).cwiseMin(1.0), r.reward, r.cost});
        s = std::move(r.next_state);
    }
    return Trajectory(std::move(steps));
}

}  // namespace gas
