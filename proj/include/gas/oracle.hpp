#pragma once

// Ground truth for the goal functions: the best constraint-feasible segment
// return reachable from a probe state, found by enumerating every augmented
// sample. Also the closed-form and exhaustive ChainRun optima.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gas/dataset.hpp"

namespace gas {

struct ProbeQuery {
    Vec s;                  // time feature is compared against the re-stamped sample time
    int t_prime = 0;
    double cost_target = 0.0;
    Vec state_tolerance;    // per-dimension half-widths, all > 0
};

struct OracleAnswer {
    std::optional<double> reward;  // V_R*
    std::optional<double> cost;    // V_C*, the cost of the segment attaining V_R*
    long long support_count = 0;   // matching samples, before the cost filter
    bool feasible = false;
};

/// Default matching box: 0.25 on positions, 1/(2T) on the time feature.
inline Vec default_tolerance(const EnvSpec& spec) {
    Vec tol = Vec::Constant(spec.state_dim, 0.25);
    tol(spec.time_feature()) = 0.5 / spec.T;
    return tol;
}

inline ProbeQuery make_probe(const EnvSpec& spec, const Vec& s, int t_prime, double cost_target) {
    return ProbeQuery{restamp_time(spec, s, t_prime), t_prime, cost_target, default_tolerance(spec)};
}

/// Enumerates (trajectory, t, end) with t + T - 1 - end = t_prime, keeps those
/// whose re-stamped start state lies inside the tolerance box, and returns the
/// largest segment reward with segment cost <= C_hat (ties: smallest cost).
/// With `full_suffix_only` only end = T - 1 is considered.
inline OracleAnswer brute_force_goal(const OfflineDataset& data, const ProbeQuery& q, bool full_suffix_only = false) {
    require(!data.empty(), "brute_force_goal: dataset is empty");
    const EnvSpec& spec = data.spec();
    require(q.s.size() == spec.state_dim && q.state_tolerance.size() == spec.state_dim,
            "brute_force_goal: probe dimension mismatch");
    require((q.state_tolerance.array() > 0.0).all(), "brute_force_goal: tolerances must be positive");
    const int T = spec.T;
    OracleAnswer ans;
    if (q.t_prime < 0 || q.t_prime >= T) return ans;

    double best_r = -std::numeric_limits<double>::infinity();
    double best_c = std::numeric_limits<double>::infinity();
    for (const auto& traj : data.trajectories()) {
        for (int t = 0; t < T; ++t) {
            const int end = t + T - 1 - q.t_prime;
            if (end < t || end > T - 1) continue;
            if (full_suffix_only && end != T - 1) continue;
            const Vec& raw = traj.step(t).state;
            bool match = true;
            for (int d = 0; d < spec.state_dim && match; ++d) {
                const double v = d == spec.time_feature() ? static_cast<double>(q.t_prime) / T : raw(d);
                match = std::abs(v - q.s(d)) <= q.state_tolerance(d);
            }
            if (!match) continue;
            ++ans.support_count;
            double r = 0.0, c = 0.0;
            for (int k = t; k <= end; ++k) {
                r += traj.step(k).reward;
                c += traj.step(k).cost;
            }
            if (c > q.cost_target) continue;
            if (r > best_r || (r == best_r && c < best_c)) {
                best_r = r;
                best_c = c;
            }
        }
    }
    if (std::isfinite(best_r)) {
        ans.feasible = true;
        ans.reward = best_r;
        ans.cost = best_c;
    }
    return ans;
}

/// Best ChainRun return under an integer budget of fast steps.
inline double chainrun_optimum(int T, double L) {
    require(L >= 0.0 && L <= T, "chainrun_optimum: need 0 <= L <= T");
    return 0.5 * T + 0.5 * std::floor(L);
}

/// Exhaustive search over every fast/slow assignment of T steps (T <= 20).
inline double chainrun_exhaustive(int T, double L) {
    require(T >= 1 && T <= 20, "chainrun_exhaustive: T must be in [1, 20]");
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << T); ++mask) {
        double r = 0.0, c = 0.0;
        for (int t = 0; t < T; ++t) {
            const bool fast = (mask >> t) & 1u;
            r += fast ? 1.0 : 0.5;
            c += fast ? 1.0 : 0.0;
        }
        if (c <= L) best = std::max(best, r);
    }
    return best;
}

/// Probe grid built from dataset states: a start state (i, t), a segment time
/// t' in [t, T-1] and a cost target drawn over [0, min(C_max, T - t')].
/// Only probes with a feasible oracle answer are kept.
inline std::vector<ProbeQuery> probe_grid(const OfflineDataset& data, int count, std::uint64_t seed) {
    require(!data.empty(), "probe_grid: dataset is empty");
    const EnvSpec& spec = data.spec();
    const int T = spec.T;
    Rng rng = make_stream(seed, "probe");
    std::vector<ProbeQuery> out;
    for (int attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
        if (attempt > 100 * count) throw RuntimeError("probe_grid: too few feasible probes in the dataset");
        const auto& traj = data.trajectory(uniform_index(rng, data.size()));
        const int t = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(T)));
        const int tp = t + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(T - t)));
        const double cap = std::min(data.cost_max(), static_cast<double>(T - tp));
        const double chat = std::round(uniform_between(rng, 0.0, cap) * 4.0) / 4.0;
        ProbeQuery q = make_probe(spec, traj.step(t).state, tp, chat);
        if (brute_force_goal(data, q).feasible) out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON fixtures

inline nlohmann::json to_json(const ProbeQuery& q) {
    return {{"s", std::vector<double>(q.s.data(), q.s.data() + q.s.size())},
            {"t_prime", q.t_prime},
            {"C_hat", q.cost_target},
            {"state_tolerance", std::vector<double>(q.state_tolerance.data(),
                                                    q.state_tolerance.data() + q.state_tolerance.size())}};
}

inline ProbeQuery probe_from_json(const nlohmann::json& j) {
    try {
        const auto s = j.at("s").get<std::vector<double>>();
        const auto tol = j.at("state_tolerance").get<std::vector<double>>();
        ProbeQuery q;
        q.s = Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size()));
        q.state_tolerance = Eigen::Map<const Vec>(tol.data(), static_cast<Eigen::Index>(tol.size()));
        q.t_prime = j.at("t_prime").get<int>();
        q.cost_target = j.at("C_hat").get<double>();
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed probe: ") + e.what());
    }
}

inline nlohmann::json to_json(const OracleAnswer& a) {
    nlohmann::json j{{"support_count", a.support_count}, {"feasible", a.feasible}};
    j["V_R_star"] = a.reward ? nlohmann::json(*a.reward) : nlohmann::json(nullptr);
    j["V_C_star"] = a.cost ? nlohmann::json(*a.cost) : nlohmann::json(nullptr);
    return j;
}

inline OracleAnswer answer_from_json(const nlohmann::json& j) {
    try {
        OracleAnswer a;
        a.support_count = j.at("support_count").get<long long>();
        a.feasible = j.at("feasible").get<bool>();
        if (!j.at("V_R_star").is_null()) a.reward = j.at("V_R_star").get<double>();
        if (!j.at("V_C_star").is_null()) a.cost = j.at("V_C_star").get<double>();
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed oracle answer: ") + e.what());
    }
}

}  // namespace gas
