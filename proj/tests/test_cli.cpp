#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gas/app.hpp"
#include "test_util.hpp"

using namespace gas;
using gas::testing::scratch_dir;

namespace {

// Small, fast run config for orchestration tests.
RunConfig quick(const std::string& dir) {
    RunConfig c;
    c.out_dir = dir;
    c.n_traj = 30;
    c.T = 16;
    c.train.arch = NetArchitecture{2, 8, 8};
    c.train.batch_size = 32;
    c.train.iterations = 200;
    c.eval.episodes_per_point = 1;
    c.eval.seeds = {0, 1};
    return c;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

int count_lines(const std::string& path) {
    std::ifstream in(path);
    int n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

struct UnsetOutDir {
    UnsetOutDir() { ::unsetenv("GAS_OUT_DIR"); }
};

}  // namespace

class Cli : public ::testing::Test {
protected:
    UnsetOutDir guard;
};

TEST_F(Cli, DefaultsFollowTheHyperparameterTable) {
    const RunConfig c;
    EXPECT_EQ(c.train.batch_size, 2048);
    EXPECT_EQ(c.train.adam.learning_rate, 1e-4);
    EXPECT_EQ(c.train.adam.grad_clip_norm, 0.25);
    EXPECT_EQ(c.train.adam.weight_decay, 1e-4);
    EXPECT_EQ(c.train.alpha, 0.8);
    EXPECT_EQ(c.train.augment.delta, 0.1);
    EXPECT_EQ(c.train.augment.q_percent, 10.0);
    EXPECT_EQ(c.train.augment.epsilon, 0.5);
    EXPECT_EQ(c.train.arch.layers, 7);
    EXPECT_EQ(c.train.arch.hidden, 128);
    EXPECT_EQ(c.train.arch.embedding, 64);
    EXPECT_EQ(c.n_traj, 200);
}

TEST_F(Cli, PrecedenceOverridesBeatFileBeatDefaults) {
    RunConfig c;
    apply_config_text(c, "# comment\nalpha = 0.7\nbatch = 64  # trailing\nlr=0.001\n");
    apply_override(c, "alpha=0.95");
    EXPECT_EQ(c.train.alpha, 0.95);
    EXPECT_EQ(c.train.batch_size, 64);
    EXPECT_EQ(c.train.adam.learning_rate, 0.001);
    EXPECT_EQ(c.train.augment.delta, 0.1);
}

TEST_F(Cli, UnknownAndMalformedKeysNameTheKey) {
    RunConfig c;
    try {
        apply_config_text(c, "alhpa = 0.9\n", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("alhpa"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("run.cfg:1"), std::string::npos);
    }
    EXPECT_THROW(apply_override(c, "batch=big"), ConfigError);
    EXPECT_THROW(apply_override(c, "novalue"), ConfigError);
    EXPECT_THROW(apply_override(c, "schedule=sometimes"), ConfigError);
    EXPECT_THROW(apply_override(c, "env=Foo"), ConfigError);
}

TEST_F(Cli, ConfigTextRoundTrips) {
    RunConfig c;
    apply_override(c, "eval_thresholds=0.1,0.25");
    apply_override(c, "segments=false");
    RunConfig d;
    apply_config_text(d, config_text(c));
    EXPECT_EQ(config_text(c), config_text(d));
    EXPECT_EQ(d.eval.thresholds, (std::vector<double>{0.1, 0.25}));
    EXPECT_FALSE(d.train.augment.segments);
}

TEST_F(Cli, GenDatasetDefaultConfig) {
    RunConfig c;
    c.out_dir = scratch_dir("gen");
    std::ostringstream os;
    EXPECT_EQ(app::cmd_gen_dataset(c, os), app::kExitOk);
    const auto d = load_dataset(c.out_dir + "/dataset.gasd");
    EXPECT_EQ(d.size(), 200u);
    int rows = 0;
    std::istringstream in(os.str());
    for (std::string l; std::getline(in, l);)
        if (l.rfind("C [", 0) == 0) ++rows;
    EXPECT_EQ(rows, c.train.augment.cost_bins);
}

TEST_F(Cli, GenDatasetRejectsZeroTrajectories) {
    RunConfig c;
    c.out_dir = scratch_dir("gen0");
    apply_override(c, "n_traj=0");
    std::ostringstream os;
    try {
        app::cmd_gen_dataset(c, os);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("n_traj"), std::string::npos);
    }
}

TEST_F(Cli, HistogramCountsEveryTrajectory) {
    const auto d = gas::testing::chainrun_dataset(standard_mix(EnvName::ChainRun), 77, 1);
    const auto h = app::reward_cost_histogram(d, 7, 5);
    ASSERT_EQ(h.size(), 7u);
    int total = 0;
    for (const auto& row : h)
        for (int n : row) total += n;
    EXPECT_EQ(total, 77);
}

TEST_F(Cli, TrainZeroIterationsEqualsInitialization) {
    RunConfig c = quick(scratch_dir("train0"));
    c.train.iterations = 0;
    std::ostringstream os;
    ASSERT_EQ(app::cmd_train(c, os), app::kExitOk);
    const LoadedModel m = restore_model(load_checkpoint(c.out_dir + "/model.gasnet"));
    const TrainedModel init = init_model(load_dataset(c.out_dir + "/dataset.gasd"), c.train);
    EXPECT_EQ(m.goals.reward_net.params(), init.goals.reward_net.params());
    EXPECT_EQ(m.policy.net.params(), init.policy.net.params());
    EXPECT_EQ(count_lines(c.out_dir + "/loss.csv"), 1);
}

TEST_F(Cli, TrainLogsAndManifestAreReproducible) {
    RunConfig a = quick(scratch_dir("train_rerun"));
    std::ostringstream os;
    ASSERT_EQ(app::cmd_train(a, os), app::kExitOk);
    EXPECT_EQ(count_lines(a.out_dir + "/loss.csv"), 1 + 200 / 100);
    const auto first = slurp(a.out_dir + "/manifest.json");
    const auto model = slurp(a.out_dir + "/model.gasnet");
    std::filesystem::remove_all(a.out_dir);
    ASSERT_EQ(app::cmd_train(a, os), app::kExitOk);
    EXPECT_EQ(first, slurp(a.out_dir + "/manifest.json"));
    EXPECT_EQ(model, slurp(a.out_dir + "/model.gasnet"));
    const auto j = nlohmann::json::parse(first);
    EXPECT_EQ(j["inputs"]["dataset"], app::file_sha1(a.out_dir + "/dataset.gasd"));
    EXPECT_EQ(j["config_sha1"], app::file_sha1(a.out_dir + "/config.txt"));
}

TEST_F(Cli, GitBlobHashMatchesGit) {
    // `printf 'hello\n' | git hash-object --stdin`
    EXPECT_EQ(app::git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(app::git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_F(Cli, SweepWritesNineRowsAndEvalChecksEnv) {
    RunConfig c = quick(scratch_dir("sweep"));
    std::ostringstream os;
    ASSERT_EQ(app::cmd_train(c, os), app::kExitOk);
    const std::string ckpt = c.out_dir + "/model.gasnet";
    const int code = app::cmd_sweep(c, ckpt, os);
    EXPECT_TRUE(code == app::kExitOk || code == app::kExitAcceptance);
    EXPECT_EQ(count_lines(c.out_dir + "/sweep.csv"), 10);

    RunConfig other = c;
    other.env = "GridCircle";
    EXPECT_THROW(app::cmd_eval(other, ckpt, os), ConfigError);
    EXPECT_THROW(app::cmd_eval(c, c.out_dir + "/missing.gasnet", os), RuntimeError);
    EXPECT_THROW(app::cmd_eval(c, "", os), ConfigError);
}

TEST_F(Cli, OutDirEnvironmentOverride) {
    RunConfig c = quick(scratch_dir("ignored"));
    const std::string forced = scratch_dir("forced");
    ::setenv("GAS_OUT_DIR", forced.c_str(), 1);
    std::ostringstream os;
    app::cmd_gen_dataset(c, os);
    ::unsetenv("GAS_OUT_DIR");
    EXPECT_TRUE(std::filesystem::exists(forced + "/dataset.gasd"));
    EXPECT_FALSE(std::filesystem::exists(c.out_dir + "/dataset.gasd"));
}

TEST_F(Cli, AblateAlphaSweepTrainsFiveVariants) {
    RunConfig c = quick(scratch_dir("ablate"));
    c.train.iterations = 20;
    c.eval.thresholds = {0.3};
    std::ostringstream os;
    const int code = app::cmd_ablate(c, os);
    EXPECT_TRUE(code == app::kExitOk || code == app::kExitAcceptance);
    const std::string dir = c.out_dir + "/ablation_alpha_sweep";
    int sets = 0, ckpts = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("alpha_", 0) == 0 && e.path().extension() == ".json") ++sets;
        if (e.path().extension() == ".gasnet") ++ckpts;
    }
    EXPECT_EQ(sets, 5);
    EXPECT_EQ(ckpts, 5);
}

TEST_F(Cli, OracleCheckWithoutModel) {
    RunConfig c = quick(scratch_dir("oracle"));
    c.T = 32;
    c.n_traj = 200;
    std::ostringstream os;
    EXPECT_EQ(app::cmd_oracle_check(c, "", os), app::kExitOk);
    EXPECT_TRUE(std::filesystem::exists(c.out_dir + "/oracle.json"));
}
