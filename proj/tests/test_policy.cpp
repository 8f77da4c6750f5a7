#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gas/training.hpp"
#include "test_util.hpp"

using namespace gas;
using gas::testing::chainrun_dataset;
using gas::testing::scratch_dir;

namespace {

NetArchitecture small_arch() { return NetArchitecture{3, 16, 16}; }

const OfflineDataset& data() {
    static const OfflineDataset d = chainrun_dataset(standard_mix(EnvName::ChainRun), 40, 6);
    return d;
}

GoalNets zero_goals(const OfflineDataset& d) {
    GoalNets g;
    g.norm = fit_input_norm(d);
    g.reward_net = Mlp(make_layer_sizes(goal_input_size(d.spec()), 1, 2, 4, 4));
    g.cost_net = g.reward_net;
    return g;
}

PolicyNet random_policy(std::uint64_t seed = 0) {
    Rng rng(seed);
    return make_policy(data().spec(), small_arch(), rng);
}

}  // namespace

TEST(PolicyLoss, WeightsFollowIndicatorAndAdvantageSign) {
    const GoalNets goals = zero_goals(data());  // V^R = V^C = 0
    std::vector<TransitionSample> batch;
    TransitionSample s = augmented_sample(data(), 0, 0, 31);
    s.reward_seg = 2.0;  // A_R = 2 >= 0
    s.cost_target = 1.0;
    batch.push_back(s);
    s.reward_seg = -2.0;  // A_R < 0
    batch.push_back(s);
    s.cost_target = 0.0;  // V^C = 0 >= C_hat: gated out
    batch.push_back(s);
    const auto l = policy_loss(batch, goals, random_policy(), 0.8);
    EXPECT_DOUBLE_EQ(l.weight[0], 0.8);
    EXPECT_NEAR(l.weight[1], 0.2, 1e-15);
    EXPECT_EQ(l.weight[2], 0.0);
}

TEST(PolicyLoss, GatedSampleContributesNothing) {
    const GoalNets goals = zero_goals(data());
    TransitionSample s = augmented_sample(data(), 0, 0, 31);
    s.cost_target = 0.0;
    s.a = Vec::Constant(1, 1.0);
    const auto l = policy_loss({s}, goals, random_policy(), 0.8);
    EXPECT_EQ(l.loss, 0.0);
    EXPECT_EQ(l.grad.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(policy_loss({}, goals, random_policy(), 0.8), ContractViolation);
}

TEST(PolicyLoss, GradientMatchesFiniteDifferences) {
    Rng rng(2);
    GoalNets goals = make_goal_nets(fit_input_norm(data()), small_arch(), rng);
    const auto idx = build_reshape_index(data(), 10.0, 10);
    Rng b(3);
    const auto batch = sample_batch(data(), &idx, AugmentConfig{}, 64, b);
    const GoalBatch gb = evaluate_goal_batch(batch, goals, 0.8);
    PolicyNet pol = random_policy(4);
    Objective f = [&](const Vec& p, Vec* grad) {
        PolicyNet q = pol;
        q.net.params() = p;
        const auto l = policy_loss_from(batch, gb, q, goals.norm, grad != nullptr);
        if (grad) *grad = l.grad;
        return l.loss;
    };
    EXPECT_LT(grad_check(f, pol.net.params()), 1e-4);
}

TEST(Tracker, SubtractionAndClamp) {
    auto t = update_tracker({10.0, 3.0, 0}, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(t.reward_remaining, 9.0);
    EXPECT_DOUBLE_EQ(t.cost_remaining, 3.0);
    EXPECT_EQ(t.t, 1);
    t = update_tracker({0.5, 0.0, 4}, 1.0, 1.0);
    EXPECT_EQ(t.reward_remaining, 0.0);
    EXPECT_EQ(t.cost_remaining, 0.0);
    TargetTracker z{4.0, 2.0, 0};
    for (int i = 0; i < 32; ++i) z = update_tracker(z, 0.0, 0.0);
    EXPECT_EQ(z.reward_remaining, 4.0);
    EXPECT_EQ(z.cost_remaining, 2.0);
}

TEST(Act, DeterministicBoundedAndTimeChecked) {
    Rng rng(1);
    const GoalNets goals = make_goal_nets(fit_input_norm(data()), small_arch(), rng);
    const PolicyNet pol = random_policy(1);
    Vec s(2);
    s << 3.0, 0.25;
    const TargetTracker tr{20.0, 5.0, 8};
    const Vec a = act(pol, goals, s, tr, 32);
    EXPECT_EQ(a, act(pol, goals, s, tr, 32));
    EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_THROW(act(pol, goals, s, TargetTracker{1, 1, 32}, 32), ContractViolation);
}

TEST(RunEpisode, BookkeepingIsStepExact) {
    Rng rng(1);
    const GoalNets goals = make_goal_nets(fit_input_norm(data()), small_arch(), rng);
    const PolicyNet pol = random_policy(2);
    Env env = make_env(data().spec(), 0);
    const Episode ep = run_episode(pol, goals, env, 25.0, 6.0, true);
    ASSERT_EQ(ep.trace.size(), 32u);
    double r = 0.0, c = 0.0;
    for (const auto& st : ep.trace) {
        EXPECT_NEAR(st.reward_remaining, std::max(25.0 - r, 0.0), 1e-12);
        EXPECT_NEAR(st.cost_remaining, std::max(6.0 - c, 0.0), 1e-12);
        r += st.reward;
        c += st.cost;
    }
    EXPECT_DOUBLE_EQ(ep.reward, r);
    EXPECT_DOUBLE_EQ(ep.cost, c);

    const auto dir = scratch_dir("trace");
    write_trace_jsonl(ep, dir + "/t.jsonl");
    std::ifstream in(dir + "/t.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("V_C") && j.contains("R_remaining"));
        ++n;
    }
    EXPECT_EQ(n, 32);

    Env other = make_env("GridCircle", 32, 0);
    EXPECT_THROW(run_episode(pol, goals, other, 1.0, 1.0), ConfigError);
}

TEST(TrainPolicy, RegressesOntoTheOnlyAction) {
    Env env = make_env("ChainRun", 16, 0);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 10; ++i) trajs.push_back(rollout(env, [](const Vec&, int) { return Vec::Constant(1, 0.6); }, 16));
    const OfflineDataset d(env.spec(), trajs);
    TrainConfig cfg;
    cfg.arch = small_arch();
    cfg.batch_size = 64;
    cfg.iterations = 5000;
    cfg.adam.learning_rate = 1e-3;
    Rng rng(0);
    TrainedModel m;
    m.goals = zero_goals(d);
    m.policy = make_policy(d.spec(), cfg.arch, rng);
    m.policy_opt = OptimState(cfg.adam, m.policy.net.parameter_count());
    train_policy(m, d, cfg);
    double worst = 0.0;
    const auto idx = build_reshape_index(d, 10.0, 10);
    Rng b(1);
    for (const auto& s : sample_batch(d, &idx, cfg.augment, 500, b)) {
        const auto [vr, vc] = m.goals.values(goal_inputs(s, m.goals.norm));
        const Vec a = m.policy.action(policy_input(m.goals.norm, goal_inputs(s, m.goals.norm), vr, vc));
        worst = std::max(worst, std::abs(a(0) - 0.6));
    }
    EXPECT_LT(worst, 0.05);
}

TEST(TrainPolicy, ZeroIterationsUnchanged) {
    TrainConfig cfg;
    cfg.arch = small_arch();
    cfg.iterations = 0;
    TrainedModel m = init_model(data(), cfg);
    const Vec before = m.policy.net.params();
    train_policy(m, data(), cfg);
    EXPECT_EQ(m.policy.net.params(), before);
}

TEST(PolicyCheckpoint, RoleAndDimensions) {
    const PolicyNet pol = random_policy(5);
    Checkpoint ckpt;
    store_policy(ckpt, pol);
    EXPECT_EQ(restore_policy(ckpt, data().spec()).net.params(), pol.net.params());
    EXPECT_THROW(restore_policy(ckpt, make_spec(EnvName::GridCircle, 32)), SchemaError);
    EXPECT_THROW(restore_policy(Checkpoint{}, data().spec()), SchemaError);
}
