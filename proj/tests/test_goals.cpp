#include <gtest/gtest.h>

#include "gas/training.hpp"
#include "test_util.hpp"

using namespace gas;
using gas::testing::chainrun_dataset;

namespace {

const OfflineDataset& data() {
    static const OfflineDataset d = chainrun_dataset(standard_mix(EnvName::ChainRun), 60, 4);
    return d;
}

NetArchitecture small_arch() { return NetArchitecture{3, 16, 16}; }

GoalNets nets_for(const NetArchitecture& arch, std::uint64_t seed = 0) {
    Rng rng(seed);
    return make_goal_nets(fit_input_norm(data()), arch, rng);
}

std::vector<TransitionSample> batch_of(int n, std::uint64_t seed) {
    const auto idx = build_reshape_index(data(), 10.0, 10);
    Rng rng(seed);
    return sample_batch(data(), &idx, AugmentConfig{}, n, rng);
}

TransitionSample plain_sample(double r_seg, double c_seg, double r_hat, double c_hat) {
    TransitionSample s = augmented_sample(data(), 0, 0, 31);
    s.reward_seg = r_seg;
    s.cost_seg = c_seg;
    s.reward_target = r_hat;
    s.cost_target = c_hat;
    return s;
}

}  // namespace

TEST(GoalInputs, Scaling) {
    const InputNorm norm = fit_input_norm(data());
    ASSERT_GE(norm.reward_max, 1.0);
    const Vec x = goal_input(norm, data().trajectory(0).step(0).state, norm.reward_max, 3.0, 31);
    EXPECT_DOUBLE_EQ(x(2), 1.0);
    EXPECT_DOUBLE_EQ(x(3), 3.0 / norm.cost_scale());
    EXPECT_DOUBLE_EQ(x(4), 31.0 / 32.0);
    EXPECT_EQ(goal_input_size(data().spec()), 5);
}

TEST(GoalInputs, NormalizedStatesHaveZeroMeanUnitScale) {
    const InputNorm norm = fit_input_norm(data());
    Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
    double n = 0;
    for (const auto& t : data().trajectories())
        for (const auto& st : t.steps()) {
            const Vec z = norm.normalize_state(st.state);
            sum += z;
            sq += z.cwiseAbs2();
            n += 1;
        }
    EXPECT_LT((sum / n).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(sq(0) / n, 1.0, 1e-8);
}

TEST(GoalInputs, ScalesFloorAtOne) {
    InputNorm norm;
    norm.reward_max = 0.3;
    norm.cost_max = 0.0;
    EXPECT_EQ(norm.reward_scale(), 1.0);
    EXPECT_EQ(norm.cost_scale(), 1.0);
    norm.reward_max = -5.0;
    EXPECT_EQ(norm.reward_scale(), 5.0);
}

TEST(Advantages, IndicatorAndFixedPoints) {
    const auto infeasible = advantages_from_values(plain_sample(10, 2, 10, 3), 7.0, 3.0);  // V^C >= C_hat
    EXPECT_FALSE(infeasible.feasible);
    EXPECT_DOUBLE_EQ(infeasible.reward_adv, -7.0);

    const auto fixed = advantages_from_values(plain_sample(10, 2, 10, 3), 10.0, 2.0);
    EXPECT_TRUE(fixed.feasible);
    EXPECT_DOUBLE_EQ(fixed.reward_adv, 0.0);
    EXPECT_DOUBLE_EQ(fixed.cost_adv, 0.0);
}

TEST(GoalLoss, HandComputedWeights) {
    // Single-sample batches on a zero-initialized network: V = 0 everywhere.
    const InputNorm norm = fit_input_norm(data());
    GoalNets zero;
    zero.norm = norm;
    zero.reward_net = Mlp(make_layer_sizes(5, 1, 2, 4, 4));
    zero.cost_net = zero.reward_net;

    // feasible (0 < C_hat), A_R = R_seg - 0 = -1 < 0, weight 1 - alpha
    const auto l1 = goal_loss({plain_sample(-1.0, 2.0, -1.0, 3.0)}, zero, 0.8);
    EXPECT_NEAR(l1.reward_loss, 0.2, 1e-15);
    EXPECT_NEAR(l1.cost_loss, 0.2 * 4.0, 1e-15);

    // A_R = 0 branch: weight alpha on the cost term
    const auto l2 = goal_loss({plain_sample(0.0, 2.0, 0.0, 3.0)}, zero, 0.8);
    EXPECT_EQ(l2.reward_loss, 0.0);
    EXPECT_NEAR(l2.cost_loss, 0.8 * 4.0, 1e-15);

    EXPECT_THROW(goal_loss({}, zero, 0.8), ContractViolation);
}

TEST(GoalLoss, HalfMseAtAlphaHalf) {
    const GoalNets nets = nets_for(small_arch());
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto batch = batch_of(256, seed);
        const GoalBatch gb = evaluate_goal_batch(batch, nets, 0.5);
        double sq = 0.0;
        for (const auto& a : gb.adv) sq += a.reward_adv * a.reward_adv;
        EXPECT_NEAR(goal_loss_from(gb, nets, false).reward_loss, 0.5 * sq / batch.size(), 1e-12 * (1 + sq));
    }
}

TEST(GoalLoss, GradientsMatchFiniteDifferences) {
    GoalNets nets = nets_for(small_arch(), 5);
    const auto batch = batch_of(64, 9);
    // Indicators and weights are held at the current iterate.
    const GoalBatch frozen = evaluate_goal_batch(batch, nets, 0.8);
    auto loss_at = [&](bool reward, const Vec& p, Vec* grad) {
        GoalNets n = nets;
        (reward ? n.reward_net : n.cost_net).params() = p;
        GoalBatch gb = evaluate_goal_batch(batch, n, 0.8);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            gb.weight[i] = frozen.weight[i];
            auto& a = gb.adv[i];
            a.feasible = frozen.adv[i].feasible;
            a.reward_adv = (a.feasible ? batch[i].reward_seg : 0.0) - a.reward_value;
        }
        const GoalLoss l = goal_loss_from(gb, n, grad != nullptr);
        if (grad) *grad = reward ? l.reward_grad : l.cost_grad;
        return reward ? l.reward_loss : l.cost_loss;
    };
    EXPECT_LT(grad_check([&](const Vec& p, Vec* g) { return loss_at(true, p, g); }, nets.reward_net.params()), 1e-4);
    EXPECT_LT(grad_check([&](const Vec& p, Vec* g) { return loss_at(false, p, g); }, nets.cost_net.params()), 1e-4);
}

TEST(TrainGoals, ZeroIterationsIsInitialization) {
    TrainConfig cfg;
    cfg.arch = small_arch();
    cfg.iterations = 0;
    cfg.batch_size = 8;
    const TrainedModel m = train_goals(data(), cfg);
    const TrainedModel init = init_model(data(), cfg);
    EXPECT_EQ(m.goals.reward_net.params(), init.goals.reward_net.params());
    EXPECT_EQ(m.goals.cost_net.params(), init.goals.cost_net.params());
    EXPECT_TRUE(m.history.empty());
}

TEST(TrainGoals, HigherAlphaGivesHigherValues) {
    TrainConfig cfg;
    cfg.arch = small_arch();
    cfg.iterations = 1500;
    cfg.batch_size = 128;
    cfg.adam.learning_rate = 3e-3;
    cfg.alpha = 0.5;
    const TrainedModel mean = train_goals(data(), cfg);
    cfg.alpha = 0.9;
    const TrainedModel high = train_goals(data(), cfg);
    const auto probe = batch_of(200, 77);
    double lo = 0, hi = 0;
    for (const auto& s : probe) {
        lo += compute_advantages(s, mean.goals).reward_value;
        hi += compute_advantages(s, high.goals).reward_value;
    }
    EXPECT_LT(lo, hi);
    EXPECT_EQ(high.history.size(), 15u);
}

TEST(GoalCheckpoint, RoundTripAndDimensionCheck) {
    const GoalNets nets = nets_for(small_arch(), 3);
    Checkpoint ckpt;
    store_goal_nets(ckpt, nets);
    const GoalNets back = restore_goal_nets(ckpt);
    EXPECT_EQ(back.reward_net.params(), nets.reward_net.params());
    EXPECT_EQ(back.norm.state_mean, nets.norm.state_mean);
    EXPECT_EQ(back.norm.env.T, 32);
    ckpt.networks["goal.cost"].net = Mlp({7, 1});
    EXPECT_THROW(restore_goal_nets(ckpt), SchemaError);
}
