#pragma once

// Offline dataset container and the three data mechanisms used in training:
// temporal segmented return augmentation (segment sampling), transition-level
// return relabeling, and cost-conditional dataset reshaping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gas/cmdp.hpp"
#include "gas/error.hpp"
#include "gas/rng.hpp"

namespace gas {

class OfflineDataset {
public:
    OfflineDataset() = default;

    OfflineDataset(EnvSpec spec, std::vector<Trajectory> trajectories)
        : spec_(spec), trajectories_(std::move(trajectories)) {
        if (trajectories_.empty()) throw ConfigError("dataset must contain at least one trajectory");
        reward_max_ = -std::numeric_limits<double>::infinity();
        cost_max_ = -std::numeric_limits<double>::infinity();
        for (const auto& traj : trajectories_) {
            if (traj.length() != spec_.T)
                throw ContractViolation("trajectory length " + std::to_string(traj.length()) +
                                        " differs from T=" + std::to_string(spec_.T));
            reward_max_ = std::max(reward_max_, traj.total_reward());
            cost_max_ = std::max(cost_max_, traj.total_cost());
        }
    }

    const EnvSpec& spec() const { return spec_; }
    int horizon() const { return spec_.T; }
    const std::vector<Trajectory>& trajectories() const { return trajectories_; }
    const Trajectory& trajectory(std::size_t i) const { return trajectories_.at(i); }
    std::size_t size() const { return trajectories_.size(); }
    bool empty() const { return trajectories_.empty(); }
    std::size_t transition_count() const { return trajectories_.size() * static_cast<std::size_t>(spec_.T); }

    /// Largest total trajectory reward.
    double reward_max() const { return reward_max_; }
    /// Largest total trajectory cost; the upper end of cost relabeling.
    double cost_max() const { return cost_max_; }

private:
    EnvSpec spec_;
    std::vector<Trajectory> trajectories_;
    double reward_max_ = 0.0;
    double cost_max_ = 0.0;
};

// ---------------------------------------------------------------------------
// Behavior policies

enum class BehaviorStyle {
    Slow,    // ChainRun: a = 0 on every step
    Block,   // ChainRun: a = +1 on one random contiguous block, a = 0 elsewhere
    Random,  // both envs: a ~ U(-1, 1) per component
    Sprint,  // ChainRun: a = +1 for the first j steps (j random), careful slow afterwards
    Orbit,   // GridCircle: circle at a random radius and speed with noise
};

inline std::string to_string(BehaviorStyle style) {
    switch (style) {
        case BehaviorStyle::Slow: return "slow";
        case BehaviorStyle::Block: return "block";
        case BehaviorStyle::Random: return "random";
        case BehaviorStyle::Sprint: return "sprint";
        case BehaviorStyle::Orbit: return "orbit";
    }
    return "?";
}

inline BehaviorStyle parse_behavior_style(const std::string& name) {
    if (name == "slow") return BehaviorStyle::Slow;
    if (name == "block") return BehaviorStyle::Block;
    if (name == "random") return BehaviorStyle::Random;
    if (name == "sprint") return BehaviorStyle::Sprint;
    if (name == "orbit") return BehaviorStyle::Orbit;
    throw ConfigError("unknown behavior style '" + name + "'");
}

/// Mixture of behavior styles; weights need not be normalized.
struct BehaviorMix {
    std::vector<std::pair<BehaviorStyle, double>> components;

    static BehaviorMix only(BehaviorStyle style) { return BehaviorMix{{{style, 1.0}}}; }
};

/// Mix used for the standard datasets: mostly structured behavior plus a
/// fifth of uniform-random actions for state coverage.
inline BehaviorMix standard_mix(EnvName env) {
    if (env == EnvName::ChainRun) return BehaviorMix{{{BehaviorStyle::Sprint, 0.8}, {BehaviorStyle::Random, 0.2}}};
    return BehaviorMix{{{BehaviorStyle::Orbit, 0.8}, {BehaviorStyle::Random, 0.2}}};
}

/// Slow action of the careful ChainRun styles. A hair below zero, so that a
/// policy regressing onto it does not land on the v > 0.5 cost boundary.
inline constexpr double kCarefulAction = -0.05;

namespace detail {

inline BehaviorStyle pick_style(const BehaviorMix& mix, Rng& rng) {
    double total = 0.0;
    for (const auto& [style, w] : mix.components) total += w;
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (const auto& [style, w] : mix.components) {
        if (u < w) return style;
        u -= w;
    }
    return mix.components.back().first;
}

inline ActionSource chainrun_behavior(BehaviorStyle style, int T, Rng& rng) {
    auto constant = [](double a) { return Vec::Constant(1, a); };
    switch (style) {
        case BehaviorStyle::Slow:
            return [=](const Vec&, int) { return constant(0.0); };
        case BehaviorStyle::Block: {
            const int begin = std::uniform_int_distribution<int>(0, T - 1)(rng);
            const int len = std::uniform_int_distribution<int>(1, T - begin)(rng);
            return [=](const Vec&, int t) { return constant(t >= begin && t < begin + len ? 1.0 : 0.0); };
        }
        case BehaviorStyle::Sprint: {
            const int j = std::uniform_int_distribution<int>(0, T)(rng);
            return [=](const Vec&, int t) { return constant(t < j ? 1.0 : kCarefulAction); };
        }
        case BehaviorStyle::Random: {
            auto stream = std::make_shared<Rng>(rng());
            return [stream, constant](const Vec&, int) {
                return constant(std::uniform_real_distribution<double>(-1.0, 1.0)(*stream));
            };
        }
        case BehaviorStyle::Orbit:
            break;
    }
    throw ConfigError("behavior style '" + to_string(style) + "' is not defined for ChainRun");
}

inline ActionSource gridcircle_behavior(BehaviorStyle style, Rng& rng) {
    switch (style) {
        case BehaviorStyle::Orbit: {
            const double radius = std::uniform_real_distribution<double>(0.6, 1.8)(rng);
            const double speed = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
            const double noise = std::uniform_real_distribution<double>(0.0, 0.2)(rng);
            auto stream = std::make_shared<Rng>(rng());
            return [=](const Vec& s, int) {
                const double x = s(0), y = s(1);
                const double r = std::max(std::hypot(x, y), 1e-6);
                Vec a(2);
                // tangential drive plus a proportional pull toward the target radius
                const double pull = std::clamp(3.0 * (radius - r), -1.0, 1.0);
                a(0) = speed * (-y / r) + pull * (x / r);
                a(1) = speed * (x / r) + pull * (y / r);
                std::normal_distribution<double> jitter(0.0, noise);
                a(0) += jitter(*stream);
                a(1) += jitter(*stream);
                return Vec(a.cwiseMax(-1.0).cwiseMin(1.0));
            };
        }
        case BehaviorStyle::Random: {
            auto stream = std::make_shared<Rng>(rng());
            return [stream](const Vec&, int) {
                std::uniform_real_distribution<double> u(-1.0, 1.0);
                Vec a(2);
                a(0) = u(*stream);
                a(1) = u(*stream);
                return a;
            };
        }
        default:
            break;
    }
    throw ConfigError("behavior style '" + to_string(style) + "' is not defined for GridCircle");
}

}  // namespace detail

inline OfflineDataset generate_offline_dataset(Env& env, const BehaviorMix& mix, int n_traj, std::uint64_t seed) {
    if (n_traj <= 0) throw ConfigError("n_traj must be positive, got " + std::to_string(n_traj));
    if (mix.components.empty()) throw ConfigError("behavior mix is empty");
    for (const auto& [style, w] : mix.components)
        if (!(w >= 0.0)) throw ConfigError("behavior weight for '" + to_string(style) + "' must be >= 0");

    Rng rng = make_stream(seed, "dataset");
    const int T = env.spec().T;
    std::vector<Trajectory> trajectories;
    trajectories.reserve(static_cast<std::size_t>(n_traj));
    for (int i = 0; i < n_traj; ++i) {
        const BehaviorStyle style = detail::pick_style(mix, rng);
        ActionSource actor = env.spec().name == EnvName::ChainRun ? detail::chainrun_behavior(style, T, rng)
                                                                  : detail::gridcircle_behavior(style, rng);
        trajectories.push_back(rollout(env, actor, T));
    }
    return OfflineDataset(env.spec(), std::move(trajectories));
}

// ---------------------------------------------------------------------------
// Segment returns and augmented samples

struct SegmentReturn {
    double reward = 0.0;
    double cost = 0.0;
};

/// Reward and cost summed over steps first..last inclusive.
inline SegmentReturn segment_return(const Trajectory& traj, int first, int last) {
    if (first < 0 || first > last || last >= traj.length())
        throw ContractViolation("segment_return: need 0 <= t <= end < T, got t=" + std::to_string(first) +
                                ", end=" + std::to_string(last) + ", T=" + std::to_string(traj.length()));
    const auto& rp = traj.reward_prefix();
    const auto& cp = traj.cost_prefix();
    return {rp[static_cast<std::size_t>(last) + 1] - rp[static_cast<std::size_t>(first)],
            cp[static_cast<std::size_t>(last) + 1] - cp[static_cast<std::size_t>(first)]};
}

/// Time index a segment [t, end] is presented at: a segment of n steps is
/// treated as the return-to-go from time T - n.
inline int segment_time(int t, int end, int T) { return t + T - 1 - end; }

/// Copy of `state` with its time feature replaced by t_prime / T.
inline Vec restamp_time(const EnvSpec& spec, const Vec& state, int t_prime) {
    Vec s = state;
    s(spec.time_feature()) = static_cast<double>(t_prime) / spec.T;
    return s;
}

struct TransitionSample {
    Vec s;  // state with its time feature re-stamped to t_prime / T
    Vec a;
    int trajectory = 0;
    int t = 0;
    int end = 0;  // last step of the segment (inclusive)
    double reward_seg = 0.0;
    double cost_seg = 0.0;
    int t_prime = 0;
    double reward_target = 0.0;  // relabeled reward target
    double cost_target = 0.0;    // relabeled cost target
    bool from_reshaped = false;  // drawn through the reshaped-subset branch
};

/// Augmented sample for (trajectory, t, end) with targets equal to the raw
/// segment returns.
inline TransitionSample augmented_sample(const OfflineDataset& data, int traj, int t, int end) {
    const Trajectory& tr = data.trajectory(static_cast<std::size_t>(traj));
    const SegmentReturn seg = segment_return(tr, t, end);
    TransitionSample out;
    out.t_prime = segment_time(t, end, data.horizon());
    out.s = restamp_time(data.spec(), tr.step(t).state, out.t_prime);
    out.a = tr.step(t).action;
    out.trajectory = traj;
    out.t = t;
    out.end = end;
    out.reward_seg = seg.reward;
    out.cost_seg = seg.cost;
    out.reward_target = seg.reward;
    out.cost_target = seg.cost;
    return out;
}

// ---------------------------------------------------------------------------
// Relabeling

struct AugmentConfig {
    double delta = 0.1;       // reward relabel half-width, relative
    double q_percent = 10.0;  // reshaped subset keeps the top q% reward per cost bin
    double epsilon = 0.5;     // probability of drawing from the reshaped subset
    int cost_bins = 10;
    bool segments = true;  // false: every sample uses the full suffix (end = T-1)
    bool relabel = true;   // false: targets equal the raw segment returns

    void validate() const {
        if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("delta must be in [0, 1)");
        if (!(q_percent > 0.0 && q_percent <= 100.0)) throw ConfigError("q_percent must be in (0, 100]");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must be in [0, 1]");
        if (cost_bins < 1) throw ConfigError("cost_bins must be >= 1");
    }
};

struct RelabeledTargets {
    double reward = 0.0;
    double cost = 0.0;
};

/// Reward target uniform on [(1-delta) R, (1+delta) R] (endpoints ordered),
/// cost target uniform on [C, C_max].
inline RelabeledTargets relabel(double reward_seg, double cost_seg, double delta, double cost_max, Rng& rng) {
    if (cost_seg > cost_max)
        throw ContractViolation("relabel: segment cost " + std::to_string(cost_seg) + " exceeds C_max " +
                                std::to_string(cost_max));
    RelabeledTargets out;
    out.reward = uniform_between(rng, (1.0 - delta) * reward_seg, (1.0 + delta) * reward_seg);
    out.cost = uniform_between(rng, cost_seg, cost_max);
    return out;
}

// ---------------------------------------------------------------------------
// Reshaping

struct ReshapeIndex {
    std::vector<double> cost_bin_edges;     // cost_bins + 1 edges over [0, C_max]
    std::vector<double> per_bin_threshold;  // members must have reward strictly above this
    std::vector<int> member_trajectories;   // ascending trajectory ids
    std::vector<std::pair<int, int>> member_ids;  // (trajectory, t) pairs

    bool empty() const { return member_ids.empty(); }
};

/// Equal-width bin of a trajectory-level cost over [0, C_max].
inline int cost_bin_of(double cost, double cost_max, int bins) {
    if (!(cost_max > 0.0)) return 0;
    const int b = static_cast<int>(std::floor(cost / cost_max * bins));
    return std::clamp(b, 0, bins - 1);
}

/// Keeps every trajectory whose total reward has empirical conditional CDF
/// (within its cost bin) strictly above 1 - q.
inline ReshapeIndex build_reshape_index(const OfflineDataset& data, double q_percent, int cost_bins) {
    if (data.empty()) throw ConfigError("build_reshape_index: dataset is empty");
    if (!(q_percent > 0.0 && q_percent <= 100.0)) throw ConfigError("q_percent must be in (0, 100]");
    if (cost_bins < 1) throw ConfigError("cost_bins must be >= 1");

    ReshapeIndex index;
    const double cmax = std::max(data.cost_max(), 0.0);
    for (int i = 0; i <= cost_bins; ++i) index.cost_bin_edges.push_back(cmax * i / cost_bins);

    std::vector<std::vector<int>> bins(static_cast<std::size_t>(cost_bins));
    for (std::size_t i = 0; i < data.size(); ++i)
        bins[static_cast<std::size_t>(cost_bin_of(data.trajectory(i).total_cost(), cmax, cost_bins))].push_back(
            static_cast<int>(i));

    const double keep_above = 1.0 - q_percent / 100.0;
    index.per_bin_threshold.assign(static_cast<std::size_t>(cost_bins), -std::numeric_limits<double>::infinity());
    std::vector<char> member(data.size(), 0);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        auto& ids = bins[b];
        if (ids.empty()) continue;
        std::vector<double> rewards;
        for (int id : ids) rewards.push_back(data.trajectory(static_cast<std::size_t>(id)).total_reward());
        std::sort(rewards.begin(), rewards.end());
        const double n = static_cast<double>(rewards.size());
        // Largest reward whose CDF is still <= 1 - q; everything above it is kept.
        double threshold = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < rewards.size(); ++k) {
            const auto at_or_below = static_cast<double>(
                std::upper_bound(rewards.begin(), rewards.end(), rewards[k]) - rewards.begin());
            if (at_or_below / n <= keep_above) threshold = rewards[k];
        }
        bool any = false;
        for (int id : ids) {
            if (data.trajectory(static_cast<std::size_t>(id)).total_reward() > threshold) {
                member[static_cast<std::size_t>(id)] = 1;
                any = true;
            }
        }
        // The bin maximum always has CDF 1 > 1 - q, so this only guards
        // against rounding at the boundary.
        if (!any) {
            threshold = rewards.back();
            for (int id : ids)
                if (data.trajectory(static_cast<std::size_t>(id)).total_reward() >= threshold)
                    member[static_cast<std::size_t>(id)] = 1;
            threshold = std::nextafter(threshold, -std::numeric_limits<double>::infinity());
        }
        index.per_bin_threshold[b] = threshold;
    }

    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!member[i]) continue;
        index.member_trajectories.push_back(static_cast<int>(i));
        for (int t = 0; t < data.horizon(); ++t) index.member_ids.emplace_back(static_cast<int>(i), t);
    }
    return index;
}

// ---------------------------------------------------------------------------
// Batch sampling

/// Draws one training batch. Each sample picks a (trajectory, t) pair from
/// the reshaped subset with probability epsilon and from the whole dataset
/// otherwise, draws the segment end uniformly from t..T-1, and relabels.
/// Relabel noise comes from `relabel_rng` when given, so switching relabeling
/// off does not shift which transitions are drawn.
inline std::vector<TransitionSample> sample_batch(const OfflineDataset& data, const ReshapeIndex* reshape,
                                                  const AugmentConfig& cfg, int batch_size, Rng& rng,
                                                  Rng* relabel_rng = nullptr) {
    if (data.empty()) throw ConfigError("sample_batch: dataset is empty");
    if (batch_size <= 0) throw ConfigError("sample_batch: batch_size must be positive");
    if (cfg.epsilon > 0.0 && (reshape == nullptr || reshape->empty()))
        throw ConfigError("sample_batch: epsilon > 0 requires a non-empty reshape index");

    const int T = data.horizon();
    const std::size_t all_pairs = data.transition_count();
    std::vector<TransitionSample> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const bool reshaped = bernoulli(rng, cfg.epsilon);
        int traj = 0, t = 0;
        if (reshaped) {
            const auto& id = reshape->member_ids[uniform_index(rng, reshape->member_ids.size())];
            traj = id.first;
            t = id.second;
        } else {
            const std::size_t k = uniform_index(rng, all_pairs);
            traj = static_cast<int>(k / static_cast<std::size_t>(T));
            t = static_cast<int>(k % static_cast<std::size_t>(T));
        }
        const int end = cfg.segments ? std::uniform_int_distribution<int>(t, T - 1)(rng) : T - 1;
        TransitionSample sample = augmented_sample(data, traj, t, end);
        sample.from_reshaped = reshaped;
        if (cfg.relabel) {
            const RelabeledTargets targets =
                relabel(sample.reward_seg, sample.cost_seg, cfg.delta, data.cost_max(), relabel_rng ? *relabel_rng : rng);
            sample.reward_target = targets.reward;
            sample.cost_target = targets.cost;
        }
        batch.push_back(std::move(sample));
    }
    return batch;
}

}  // namespace gas
