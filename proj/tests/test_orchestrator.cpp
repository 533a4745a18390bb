#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "curriq/errors.hpp"
#include "curriq/orchestrator.hpp"

using namespace curriq;

namespace {

constexpr int kVocab = 30;

struct Bundle {
  std::vector<SentencePair> train;
  BinnedCorpus binned;
  DevSet dev;
};

// Scores come straight from the ground-truth noise so orchestrator tests do
// not depend on the scorer: cleaner pairs score higher.
Bundle make_bundle(int n_train, const std::vector<double>& rates, int bins, std::uint64_t seed) {
  SyntheticConfig config;
  config.n_pairs = n_train;
  config.vocab_size = kVocab;
  config.seq_len_min = 5;
  config.seq_len_max = 8;
  config.noise_levels = rates;
  config.seed = seed;
  Bundle bundle;
  bundle.train = generate_synthetic_corpus(config);
  for (SentencePair& p : bundle.train) {
    p.score = -*p.noise_truth + 1e-9 * static_cast<double>(p.id);
  }
  bundle.binned = bin_corpus(bundle.train, bins);

  SyntheticConfig dev_config = config;
  dev_config.n_pairs = 40;
  dev_config.noise_levels = {0.0};
  dev_config.content_stream = 2;
  dev_config.first_id = n_train;
  bundle.dev.pairs = generate_synthetic_corpus(dev_config);
  return bundle;
}

RunConfig small_run(PolicyKind policy, long steps, int bins) {
  RunConfig config;
  config.total_steps = steps;
  config.nmt_warmup_steps = 40;
  config.eval_every = 10;
  config.num_bins = bins;
  config.prototype_per_bin = 2;
  config.trainee_batch_size = 4;
  config.policy = policy;
  config.policy_params.epsilon = EpsilonSchedule{20, 100, 0.01};
  config.learner.vocab_size = kVocab;
  config.learner.embed_dim = 8;
  config.learner.head_hidden = {16};
  config.dqn.q_hidden_dims = {8, 8};
  config.dqn.min_replay = 30;
  config.dqn.update_period = 2;
  config.dqn.target_update_period = 20;
  config.dqn.batch_size = 8;
  config.dqn.replay_capacity = 5000;
  config.seed = 7;
  return config;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("compute_reward: delta against the recent mean") {
  RewardTracker tracker(1);
  CHECK_FALSE(tracker.observe(-3.0).has_value());  // seeds history
  const auto reward = tracker.observe(-2.5);
  REQUIRE(reward.has_value());
  CHECK(*reward == 0.5);
}

TEST_CASE("compute_reward: constant dev likelihood gives zero forever") {
  RewardTracker tracker(4);
  tracker.observe(-2.0);
  for (int i = 0; i < 20; ++i) {
    const auto reward = tracker.observe(-2.0);
    REQUIRE(reward.has_value());
    CHECK(*reward == 0.0);
  }
}

TEST_CASE("compute_reward: window of three") {
  RewardTracker tracker(3);
  tracker.observe(-4.0);
  tracker.observe(-3.0);
  tracker.observe(-2.0);
  const auto reward = tracker.observe(-1.0);
  REQUIRE(reward.has_value());
  CHECK(*reward == 2.0);  // -1 - mean(-4,-3,-2)
}

TEST_CASE("flush_pending: broadcast moves everything in order") {
  PendingBuffer pending;
  for (int i = 0; i < 10; ++i) {
    pending.add(PendingEntry{{static_cast<double>(i)}, i % 3, {static_cast<double>(i + 1)}});
  }
  ReplayBuffer replay(100);
  const std::size_t moved = pending.flush(0.25, replay);
  CHECK(moved == 10);
  CHECK(pending.size() == 0);
  REQUIRE(replay.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(replay.at(i).observation[0] == static_cast<double>(i));
    CHECK(replay.at(i).action == static_cast<int>(i) % 3);
    CHECK(replay.at(i).reward == 0.25);
    CHECK_FALSE(replay.at(i).terminal);
  }
}

TEST_CASE("flush_pending: empty flush is a no-op") {
  PendingBuffer pending;
  ReplayBuffer replay(10);
  CHECK(pending.flush(1.0, replay) == 0);
  CHECK(replay.size() == 0);
}

TEST_CASE("flush variants: last-only and static attribution") {
  PendingBuffer pending;
  pending.add(PendingEntry{{0.0}, 0, {0.0}});
  pending.add(PendingEntry{{0.0}, 5, {0.0}});
  pending.add(PendingEntry{{0.0}, 2, {0.0}});
  ReplayBuffer replay(10);
  pending.flush_last_only(0.7, replay);
  CHECK(replay.at(0).reward == 0.0);
  CHECK(replay.at(1).reward == 0.0);
  CHECK(replay.at(2).reward == 0.7);

  PendingBuffer pending2;
  pending2.add(PendingEntry{{0.0}, 5, {0.0}});  // cleanest of 6
  pending2.add(PendingEntry{{0.0}, 1, {0.0}});
  ReplayBuffer replay2(10);
  pending2.flush_static(6, replay2);
  CHECK(replay2.at(0).reward == 1.0);
  CHECK(replay2.at(1).reward == 0.0);
}

TEST_CASE("run_experiment: warmup equal to total steps leaves replay empty") {
  const Bundle bundle = make_bundle(60, {0.0, 0.5}, 2, 31);
  RunConfig config = small_run(PolicyKind::rl_agent, 60, 2);
  config.nmt_warmup_steps = 60;
  const RunResult result = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  CHECK(result.report.transitions_recorded == 0);
  CHECK(result.report.dropped_pending == 0);
  CHECK(result.actions.size() == 60);
  CHECK(std::isfinite(result.report.final_dev_ll));
}

TEST_CASE("run_experiment: transition accounting adds up") {
  const Bundle bundle = make_bundle(80, {0.0, 0.6}, 2, 33);
  RunConfig config = small_run(PolicyKind::rl_agent, 205, 2);
  const RunResult result = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  // one pending entry per post-warmup step; the unflushed tail is dropped
  CHECK(result.report.transitions_recorded + result.report.dropped_pending ==
        config.total_steps - config.nmt_warmup_steps);
  // evals at multiples of 10: last flush at 200, so 5 pending steps remain
  CHECK(result.report.dropped_pending == 5);
}

TEST_CASE("run_experiment: identical config and seed give bit-identical outputs") {
  const Bundle bundle = make_bundle(80, {0.0, 0.3, 0.7}, 3, 35);
  const auto tmp = std::filesystem::temp_directory_path();
  RunConfig config = small_run(PolicyKind::rl_agent, 150, 3);
  config.out_dir = (tmp / "curriq_run_a").string();
  const RunResult a = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  config.out_dir = (tmp / "curriq_run_b").string();
  const RunResult b = run_experiment(config, bundle.train, bundle.binned, bundle.dev);

  CHECK(slurp((tmp / "curriq_run_a/metrics.jsonl").string()) ==
        slurp((tmp / "curriq_run_b/metrics.jsonl").string()));
  CHECK(slurp((tmp / "curriq_run_a/heatmap.csv").string()) ==
        slurp((tmp / "curriq_run_b/heatmap.csv").string()));
  CHECK(a.report.best_dev_ll == b.report.best_dev_ll);
  CHECK(a.actions == b.actions);
  std::filesystem::remove_all(tmp / "curriq_run_a");
  std::filesystem::remove_all(tmp / "curriq_run_b");
}

TEST_CASE("run_experiment: different seeds diverge") {
  const Bundle bundle = make_bundle(80, {0.0, 0.5}, 2, 37);
  RunConfig config = small_run(PolicyKind::uniform_bins, 100, 2);
  config.seed = 1;
  const RunResult a = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  config.seed = 2;
  const RunResult b = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  CHECK(a.actions != b.actions);
}

TEST_CASE("run_experiment: rewards decay toward zero as the trainee converges") {
  const Bundle bundle = make_bundle(100, {0.0}, 2, 39);
  RunConfig config = small_run(PolicyKind::uniform_bins, 1600, 2);
  config.nmt_warmup_steps = 0;
  const RunResult result = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  REQUIRE(result.reward_points.size() > 40);
  const std::size_t quarter = result.reward_points.size() / 4;
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < quarter; ++i) early += std::abs(result.reward_points[i].second);
  for (std::size_t i = result.reward_points.size() - quarter; i < result.reward_points.size(); ++i) {
    late += std::abs(result.reward_points[i].second);
  }
  CHECK(late < early);
}

TEST_CASE("run_experiment: both ablations together still complete") {
  const Bundle bundle = make_bundle(80, {0.0, 0.5}, 2, 41);
  RunConfig config = small_run(PolicyKind::rl_agent, 120, 2);
  config.ablate_reward = true;
  config.ablate_observation = true;
  const auto tmp = std::filesystem::temp_directory_path();
  config.out_dir = (tmp / "curriq_run_ablations").string();
  const RunResult result = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  CHECK(result.actions.size() == 120);
  CHECK(std::isfinite(result.report.final_dev_ll));
  CHECK(result.report.transitions_recorded > 0);
  // metrics file parses line by line
  std::ifstream is(config.out_dir + "/metrics.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK_FALSE(line.empty());
    ++rows;
  }
  CHECK(rows == 121);  // header + one per step
  std::filesystem::remove_all(config.out_dir);
}

TEST_CASE("run_experiment: ablation flags demand an agent-driven policy") {
  const Bundle bundle = make_bundle(60, {0.0, 0.5}, 2, 43);
  RunConfig config = small_run(PolicyKind::uniform_bins, 50, 2);
  config.ablate_reward = true;
  CHECK_THROWS_AS(run_experiment(config, bundle.train, bundle.binned, bundle.dev), ConfigError);
}

TEST_CASE("run_experiment: dev overlap with training ids is a data error") {
  Bundle bundle = make_bundle(60, {0.0, 0.5}, 2, 45);
  bundle.dev.pairs[0].id = bundle.train[5].id;
  RunConfig config = small_run(PolicyKind::uniform_bins, 50, 2);
  CHECK_THROWS_AS(run_experiment(config, bundle.train, bundle.binned, bundle.dev), DataError);
}

TEST_CASE("run_experiment: bin count mismatch is a configuration error") {
  const Bundle bundle = make_bundle(60, {0.0, 0.5}, 2, 47);
  RunConfig config = small_run(PolicyKind::uniform_bins, 50, 3);
  CHECK_THROWS_AS(run_experiment(config, bundle.train, bundle.binned, bundle.dev), ConfigError);
}

TEST_CASE("run_experiment: stacked observations feed a wider Q-net") {
  const Bundle bundle = make_bundle(60, {0.0, 0.5}, 2, 49);
  RunConfig config = small_run(PolicyKind::rl_agent, 80, 2);
  config.dqn.stack_size = 3;
  const RunResult result = run_experiment(config, bundle.train, bundle.binned, bundle.dev);
  CHECK(result.actions.size() == 80);
}

TEST_CASE("select_best_run: picks maximal best dev, ties to the lowest seed") {
  RunReport a;
  a.seed = 3;
  a.best_dev_ll = -1.5;
  RunReport b;
  b.seed = 1;
  b.best_dev_ll = -1.2;
  RunReport c;
  c.seed = 5;
  c.best_dev_ll = -1.2;
  CHECK(select_best_run({a, b, c}).seed == 1);
  CHECK(select_best_run({a}).seed == 3);
  CHECK_THROWS_AS(select_best_run({}), UsageError);
}

TEST_CASE("policy_heatmap: constant actions light a single row") {
  const std::vector<int> actions(2500, 3);
  const auto heatmap = policy_heatmap(actions, 6, 1000);
  REQUIRE(heatmap.size() == 6);
  REQUIRE(heatmap[0].size() == 3);  // ceil(2500/1000)
  for (int b = 0; b < 6; ++b) {
    for (double v : heatmap[static_cast<std::size_t>(b)]) {
      CHECK(v == (b == 3 ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("policy_heatmap: uniform actions spread evenly and columns sum to one") {
  Rng rng(51);
  std::vector<int> actions;
  for (int i = 0; i < 60000; ++i) actions.push_back(rng.below_int(6));
  const auto heatmap = policy_heatmap(actions, 6, 1000);
  for (std::size_t j = 0; j < heatmap[0].size(); ++j) {
    double column = 0.0;
    for (int b = 0; b < 6; ++b) {
      const double v = heatmap[static_cast<std::size_t>(b)][j];
      CHECK(std::abs(v - 1.0 / 6.0) < 0.05);
      column += v;
    }
    CHECK(column == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("policy_heatmap: partial tail bucket still sums to one") {
  std::vector<int> actions(1050, 0);
  actions[1049] = 1;
  const auto heatmap = policy_heatmap(actions, 2, 1000);
  REQUIRE(heatmap[0].size() == 2);
  CHECK(heatmap[0][1] + heatmap[1][1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(heatmap[1][1] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK_THROWS_AS(policy_heatmap(actions, 2, 0), ConfigError);
}

TEST_CASE("config_hash: policy and seed do not affect it, run shape does") {
  RunConfig a = small_run(PolicyKind::rl_agent, 100, 2);
  RunConfig b = a;
  b.policy = PolicyKind::uniform_bins;
  b.seed = 999;
  b.label = "other";
  b.out_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  RunConfig c = a;
  c.total_steps = 101;
  CHECK(config_hash(a) != config_hash(c));
  RunConfig d = a;
  d.learner.embed_dim = 9;
  CHECK(config_hash(a) != config_hash(d));
}

TEST_CASE("run reports round-trip through json") {
  RunReport report;
  report.config_hash = "abc123";
  report.seed = 42;
  report.best_dev_ll = -1.25;
  report.best_checkpoint = "step90";
  report.dropped_pending = 3;
  report.final_dev_ll = -1.5;
  report.policy = "rl_agent";
  report.label = "rl_agent";
  report.transitions_recorded = 160;
  report.total_steps = 200;
  const std::string path = (std::filesystem::temp_directory_path() / "curriq_report.json").string();
  save_report_json(path, report);
  const RunReport loaded = load_report_json(path);
  CHECK(loaded.config_hash == report.config_hash);
  CHECK(loaded.seed == report.seed);
  CHECK(loaded.best_dev_ll == report.best_dev_ll);
  CHECK(loaded.best_checkpoint == report.best_checkpoint);
  CHECK(loaded.dropped_pending == report.dropped_pending);
  CHECK(loaded.final_dev_ll == report.final_dev_ll);
  CHECK(loaded.transitions_recorded == report.transitions_recorded);
  std::filesystem::remove(path);
}

TEST_CASE("reward tracker validates its window") {
  CHECK_THROWS_AS(RewardTracker(0), ConfigError);
}
