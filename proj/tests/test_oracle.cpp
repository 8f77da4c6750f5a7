#include <gtest/gtest.h>

#include "gas/oracle.hpp"
#include "test_util.hpp"

using namespace gas;
using gas::testing::chainrun_dataset;
using gas::testing::make_traj;

TEST(ChainrunOptimum, Endpoints) {
    EXPECT_DOUBLE_EQ(chainrun_optimum(32, 0.0), 16.0);
    EXPECT_DOUBLE_EQ(chainrun_optimum(32, 32.0), 32.0);
    EXPECT_DOUBLE_EQ(chainrun_optimum(32, 6.4), 19.0);
    EXPECT_THROW(chainrun_optimum(32, 33.0), ContractViolation);
}

TEST(ChainrunOptimum, MatchesExhaustiveSearch) {
    for (double L = 0.0; L <= 12.0; L += 0.5) EXPECT_DOUBLE_EQ(chainrun_optimum(12, L), chainrun_exhaustive(12, L)) << L;
    EXPECT_THROW(chainrun_exhaustive(21, 1.0), ContractViolation);
}

TEST(BruteForce, NoMatch) {
    const auto d = chainrun_dataset(BehaviorMix::only(BehaviorStyle::Block), 20, 0);
    Vec s(2);
    s << 500.0, 0.0;
    const auto a = brute_force_goal(d, make_probe(d.spec(), s, 0, 10.0));
    EXPECT_FALSE(a.feasible);
    EXPECT_EQ(a.support_count, 0);
    EXPECT_FALSE(a.reward.has_value());
}

TEST(BruteForce, VacuousBudgetGivesUnconstrainedMax) {
    const auto d = chainrun_dataset(standard_mix(EnvName::ChainRun), 50, 1);
    const auto a = brute_force_goal(d, make_probe(d.spec(), Vec::Zero(2), 0, d.cost_max()));
    ASSERT_TRUE(a.feasible);
    EXPECT_DOUBLE_EQ(*a.reward, d.reward_max());
    EXPECT_EQ(a.support_count, 50);
}

TEST(BruteForce, BlockDatasetBudgetEight) {
    const auto d = chainrun_dataset(BehaviorMix::only(BehaviorStyle::Block), 200, 2);
    // Independent answer: every trajectory starts at x = 0 and t' = 0 only
    // admits full episodes, so take the best total under the budget.
    double best = -1.0, best_cost = 0.0;
    bool has_eight = false;
    for (const auto& t : d.trajectories()) {
        has_eight = has_eight || t.total_cost() == 8.0;
        if (t.total_cost() <= 8.0 && t.total_reward() > best) {
            best = t.total_reward();
            best_cost = t.total_cost();
        }
    }
    const auto a = brute_force_goal(d, make_probe(d.spec(), Vec::Zero(2), 0, 8.0));
    ASSERT_TRUE(a.feasible);
    EXPECT_DOUBLE_EQ(*a.reward, best);
    EXPECT_DOUBLE_EQ(*a.cost, best_cost);
    if (has_eight) EXPECT_DOUBLE_EQ(*a.reward, 20.0);
}

TEST(BruteForce, SegmentsBeatFullSuffixOnHandmadeData) {
    // Two trajectories of T = 4. At t' = 2 (two remaining steps) the second
    // trajectory's middle segment [1, 2] is the best safe pair.
    const OfflineDataset d(make_spec(EnvName::ChainRun, 4),
                           {make_traj({0.5, 0.5, 0.5, 0.5}, {0, 0, 0, 0}), make_traj({0.5, 1.0, 1.0, 0.5}, {0, 1, 1, 0})});
    ProbeQuery q = make_probe(d.spec(), d.trajectory(1).step(1).state, 2, 2.0);
    q.state_tolerance = Vec::Constant(2, 1e-9);
    q.state_tolerance(1) = 0.5 / 4;
    const auto seg = brute_force_goal(d, q);
    const auto full = brute_force_goal(d, q, true);
    ASSERT_TRUE(seg.feasible);
    EXPECT_DOUBLE_EQ(*seg.reward, 2.0);
    EXPECT_DOUBLE_EQ(*seg.cost, 2.0);
    EXPECT_FALSE(full.feasible);  // full suffix from t = 1 has 3 steps, t' would be 1
}

TEST(BruteForce, TiesPreferSmallerCost) {
    const OfflineDataset d(make_spec(EnvName::ChainRun, 2),
                           {make_traj({1.0, 1.0}, {1, 1}), make_traj({1.0, 1.0}, {0, 0})});
    ProbeQuery q = make_probe(d.spec(), Vec::Zero(2), 0, 5.0);
    const auto a = brute_force_goal(d, q);
    EXPECT_DOUBLE_EQ(*a.reward, 2.0);
    EXPECT_DOUBLE_EQ(*a.cost, 0.0);
}

TEST(ProbeGrid, AllFeasibleAndDeterministic) {
    const auto d = chainrun_dataset(standard_mix(EnvName::ChainRun), 60, 3);
    const auto g1 = probe_grid(d, 20, 5);
    const auto g2 = probe_grid(d, 20, 5);
    ASSERT_EQ(g1.size(), 20u);
    for (std::size_t i = 0; i < g1.size(); ++i) {
        EXPECT_EQ(g1[i].s, g2[i].s);
        EXPECT_EQ(g1[i].cost_target, g2[i].cost_target);
        EXPECT_TRUE(brute_force_goal(d, g1[i]).feasible);
        EXPECT_DOUBLE_EQ(g1[i].s(1), g1[i].t_prime / 32.0);
    }
}

TEST(OracleJson, RoundTrip) {
    const auto d = chainrun_dataset(standard_mix(EnvName::ChainRun), 10, 3);
    const ProbeQuery q = make_probe(d.spec(), d.trajectory(2).step(4).state, 9, 3.5);
    const ProbeQuery back = probe_from_json(nlohmann::json::parse(to_json(q).dump()));
    EXPECT_EQ(back.s, q.s);
    EXPECT_EQ(back.t_prime, 9);
    EXPECT_EQ(back.state_tolerance, q.state_tolerance);
    const OracleAnswer a = brute_force_goal(d, q);
    const OracleAnswer b = answer_from_json(nlohmann::json::parse(to_json(a).dump()));
    EXPECT_EQ(a.reward, b.reward);
    EXPECT_EQ(a.support_count, b.support_count);
    EXPECT_THROW(probe_from_json(nlohmann::json{{"s", 1}}), SchemaError);
}
