#pragma once

// Dataset file format (all integers and reals little-endian):
//
//   "GASDSET1"                       8-byte magic
//   version u32, state_dim u32, action_dim u32, T u32, n_traj u32
//   R_max f64, C_max f64
//   env name                         u32 length + UTF-8 bytes
//   per trajectory, contiguous f64 arrays:
//     states  [T x state_dim]  (step-major)
//     actions [T x action_dim] (step-major)
//     rewards [T]
//     costs   [T]

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "gas/binary.hpp"
#include "gas/dataset.hpp"

namespace gas {

inline constexpr char kDatasetMagic[] = "GASDSET1";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const OfflineDataset& data, const std::string& path) {
    const EnvSpec& spec = data.spec();
    io::Writer w(path);
    w.bytes(kDatasetMagic, 8);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(spec.state_dim));
    w.u32(static_cast<std::uint32_t>(spec.action_dim));
    w.u32(static_cast<std::uint32_t>(spec.T));
    w.u32(static_cast<std::uint32_t>(data.size()));
    w.f64(data.reward_max());
    w.f64(data.cost_max());
    w.string(to_string(spec.name));
    for (const auto& traj : data.trajectories()) {
        for (const auto& step : traj.steps()) w.f64s(step.state.data(), static_cast<std::size_t>(step.state.size()));
        for (const auto& step : traj.steps())
            w.f64s(step.action.data(), static_cast<std::size_t>(step.action.size()));
        for (const auto& step : traj.steps()) w.f64(step.reward);
        for (const auto& step : traj.steps()) w.f64(step.cost);
    }
    w.close();
}

inline OfflineDataset load_dataset(const std::string& path) {
    io::Reader r(path);
    r.magic(std::string(kDatasetMagic, 8));
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) throw VersionError("dataset '" + path + "'", version, kDatasetVersion);
    const std::uint32_t state_dim = r.u32();
    const std::uint32_t action_dim = r.u32();
    const std::uint32_t T = r.u32();
    const std::uint32_t n_traj = r.u32();
    const double reward_max = r.f64();
    const double cost_max = r.f64();
    const std::string name = r.string(256);

    EnvSpec spec;
    try {
        spec = make_spec(name, static_cast<int>(T));
    } catch (const ConfigError& e) {
        throw SchemaError("dataset '" + path + "': " + e.what());
    }
    if (spec.state_dim != static_cast<int>(state_dim) || spec.action_dim != static_cast<int>(action_dim))
        throw SchemaError("dataset '" + path + "': dimensions do not match environment " + name);
    if (n_traj == 0) throw SchemaError("dataset '" + path + "' holds no trajectories");

    std::vector<Trajectory> trajectories;
    trajectories.reserve(n_traj);
    for (std::uint32_t i = 0; i < n_traj; ++i) {
        std::vector<Step> steps(T);
        for (auto& step : steps) {
            step.state.resize(state_dim);
            r.f64s(step.state.data(), state_dim);
        }
        for (auto& step : steps) {
            step.action.resize(action_dim);
            r.f64s(step.action.data(), action_dim);
        }
        for (auto& step : steps) step.reward = r.f64();
        for (auto& step : steps) step.cost = r.f64();
        trajectories.emplace_back(std::move(steps));
    }
    if (!r.at_end()) throw SchemaError("dataset '" + path + "' has trailing bytes");

    OfflineDataset data(spec, std::move(trajectories));
    if (data.reward_max() != reward_max || data.cost_max() != cost_max)
        throw SchemaError("dataset '" + path + "': stored R_max/C_max disagree with the trajectories");
    return data;
}

/// Debug export, one JSON object per trajectory per line.
inline void export_dataset_jsonl(const OfflineDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Trajectory& traj = data.trajectory(i);
        nlohmann::json line;
        line["id"] = i;
        auto& states = line["states"] = nlohmann::json::array();
        auto& actions = line["actions"] = nlohmann::json::array();
        auto& rewards = line["rewards"] = nlohmann::json::array();
        auto& costs = line["costs"] = nlohmann::json::array();
        for (const auto& step : traj.steps()) {
            states.push_back(std::vector<double>(step.state.data(), step.state.data() + step.state.size()));
            actions.push_back(std::vector<double>(step.action.data(), step.action.data() + step.action.size()));
            rewards.push_back(step.reward);
            costs.push_back(step.cost);
        }
        line["total_reward"] = traj.total_reward();
        line["total_cost"] = traj.total_cost();
        out << line.dump() << '\n';
    }
    if (!out) throw RuntimeError("write failed on '" + path + "'");
}

}  // namespace gas
