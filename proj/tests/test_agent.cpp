#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "curriq/agent.hpp"
#include "curriq/errors.hpp"

using namespace curriq;

namespace {

// Independent brute-force n-step return: discounted reward sum plus the
// bootstrap unless the window ends terminal.
double oracle_n_step(const std::vector<Transition>& window, const Mlp& net, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (const Transition& t : window) {
    total += discount * t.reward;
    discount *= gamma;
  }
  if (!window.back().terminal) {
    const std::vector<double> q = mlp_forward(net, window.back().next_observation);
    double best = q[0];
    for (double v : q) best = std::max(best, v);
    total += discount * best;
  }
  return total;
}

Transition make_transition(Rng& rng, int obs_dim, int actions, bool terminal) {
  Transition t;
  t.observation.resize(static_cast<std::size_t>(obs_dim));
  t.next_observation.resize(static_cast<std::size_t>(obs_dim));
  for (double& v : t.observation) v = rng.uniform(-2.0, 2.0);
  for (double& v : t.next_observation) v = rng.uniform(-2.0, 2.0);
  t.action = rng.below_int(actions);
  t.reward = rng.uniform(-1.0, 1.0);
  t.terminal = terminal;
  return t;
}

std::uint64_t mlp_param_hash(const Mlp& net) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](const std::vector<double>& tensor) {
    for (double v : tensor) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      h = (h ^ bits) * 1099511628211ULL;
    }
  };
  for (const auto& w : net.weights) mix(w);
  for (const auto& b : net.biases) mix(b);
  return h;
}

}  // namespace

TEST_CASE("epsilon_at: the three phases and their boundaries") {
  const EpsilonSchedule schedule{1000, 25000, 0.01};
  CHECK(epsilon_at(schedule, 0) == 1.0);
  CHECK(epsilon_at(schedule, 999) == 1.0);
  CHECK(epsilon_at(schedule, 1000) == 1.0);
  CHECK(epsilon_at(schedule, 1000 + 25000) == 0.01);
  CHECK(epsilon_at(schedule, 1000 + 12500) == doctest::Approx(0.505).epsilon(1e-12));
  CHECK(epsilon_at(schedule, 1000000) == 0.01);
}

TEST_CASE("epsilon_at: piecewise linear, continuous, non-increasing") {
  const EpsilonSchedule schedule{50, 200, 0.1};
  double prev = 1.0;
  for (long step = 0; step <= 400; ++step) {
    const double eps = epsilon_at(schedule, step);
    CHECK(eps <= prev + 1e-15);
    CHECK(eps >= schedule.floor);
    CHECK(eps <= 1.0);
    prev = eps;
  }
  // continuity at the phase boundaries
  CHECK(std::abs(epsilon_at(schedule, 50) - epsilon_at(schedule, 49)) <
        2.0 * (1.0 - schedule.floor) / 200.0);
  CHECK(std::abs(epsilon_at(schedule, 250) - epsilon_at(schedule, 249)) <
        2.0 * (1.0 - schedule.floor) / 200.0);
}

TEST_CASE("epsilon_at: zero decay jumps straight to the floor") {
  const EpsilonSchedule schedule{10, 0, 0.25};
  CHECK(epsilon_at(schedule, 9) == 1.0);
  CHECK(epsilon_at(schedule, 10) == 0.25);
}

TEST_CASE("replay buffer evicts oldest first and keeps arrival order") {
  ReplayBuffer replay(3);
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    Transition t = make_transition(rng, 2, 2, false);
    t.reward = static_cast<double>(i);
    replay.add(std::move(t));
  }
  REQUIRE(replay.size() == 3);
  CHECK(replay.total_added() == 5);
  CHECK(replay.at(0).reward == 2.0);
  CHECK(replay.at(1).reward == 3.0);
  CHECK(replay.at(2).reward == 4.0);
  replay.mark_newest_terminal();
  CHECK(replay.at(2).terminal);
  CHECK_FALSE(replay.at(0).terminal);
}

TEST_CASE("n_step_target: two rewards plus bootstrap, hand computed") {
  Rng rng(3);
  Mlp target = make_mlp({2, 3}, rng);
  // rig the net so max_a Q = 10 for the probed observation
  std::fill(target.weights[0].begin(), target.weights[0].end(), 0.0);
  target.biases[0] = {10.0, -1.0, 3.0};
  std::vector<Transition> window(2);
  window[0].reward = 1.0;
  window[1].reward = 2.0;
  window[0].next_observation = {0.0, 0.0};
  window[1].next_observation = {0.5, -0.5};
  const double value = n_step_target(window, target, 0.99);
  CHECK(value == doctest::Approx(12.781).epsilon(1e-12));
}

TEST_CASE("n_step_target: zero gamma keeps only the first reward") {
  Rng rng(4);
  const Mlp target = make_mlp({2, 3}, rng);
  std::vector<Transition> window(2);
  window[0].reward = 7.5;
  window[1].reward = 100.0;
  window[0].next_observation = {0.1, 0.2};
  window[1].next_observation = {0.3, 0.4};
  CHECK(n_step_target(window, target, 0.0) == 7.5);
}

TEST_CASE("n_step_target: terminal first transition drops the bootstrap") {
  Rng rng(5);
  const Mlp target = make_mlp({2, 3}, rng);
  std::vector<Transition> window(1);
  window[0].reward = -0.25;
  window[0].terminal = true;
  window[0].next_observation = {0.1, 0.2};
  CHECK(n_step_target(window, target, 0.99) == -0.25);
}

TEST_CASE("n_step_target: window crossing a terminal is an internal error") {
  Rng rng(6);
  const Mlp target = make_mlp({2, 2}, rng);
  std::vector<Transition> window(2);
  window[0].terminal = true;
  window[0].next_observation = {0.0, 0.0};
  window[1].next_observation = {0.0, 0.0};
  CHECK_THROWS_AS(n_step_target(window, target, 0.9), InternalError);
}

TEST_CASE("n_step_target matches the brute-force oracle on randomized buffers") {
  Rng rng(2025);
  const Mlp target = make_mlp({3, 8, 4}, rng);
  const std::vector<double> gammas{0.0, 0.5, 0.99, 1.0};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng.below(4);
    std::vector<Transition> window;
    for (std::size_t k = 0; k < len; ++k) {
      const bool last = k + 1 == len;
      window.push_back(make_transition(rng, 3, 4, last && rng.below(3) == 0));
    }
    const double gamma = gammas[rng.below(gammas.size())];
    CHECK(n_step_target(window, target, gamma) == oracle_n_step(window, target, gamma));
  }
}

TEST_CASE("select_action: epsilon one explores uniformly") {
  DqnConfig config;
  config.q_hidden_dims = {8};
  config.min_replay = 10;
  DqnAgent agent(4, 6, config, 99);
  const std::vector<double> obs{0.1, 0.2, 0.3, 0.4};
  std::vector<int> counts(6, 0);
  for (int k = 0; k < 10000; ++k) counts[static_cast<std::size_t>(agent.select_action(obs, 1.0))]++;
  // expected 1/6 of 10000, sigma ~ 37.3; fixed seed keeps 3 sigma deterministic
  for (int c : counts) CHECK(std::abs(c - 10000.0 / 6.0) <= 112.0);
}

TEST_CASE("select_action: greedy picks the argmax, ties to the lowest index") {
  DqnConfig config;
  config.q_hidden_dims = {};  // linear net: Q equals the bias vector on zero input
  DqnAgent agent(1, 3, config, 7);
  Mlp& net = agent.online_net();
  std::fill(net.weights[0].begin(), net.weights[0].end(), 0.0);
  net.biases[0] = {0.1, 0.9, 0.3};
  const std::vector<double> obs{0.0};
  CHECK(agent.select_action(obs, 0.0) == 1);
  net.biases[0] = {0.4, 0.4, 0.4};
  CHECK(agent.select_action(obs, 0.0) == 0);
}

TEST_CASE("select_action: observation shape is checked") {
  DqnAgent agent(4, 2, DqnConfig{}, 3);
  const std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(agent.select_action(bad, 0.5), ShapeError);
}

TEST_CASE("default config builds the full-size Q-net") {
  const DqnConfig config;
  CHECK(config.gamma == 0.99);
  CHECK(config.update_horizon == 2);
  CHECK(config.min_replay == 3000);
  CHECK(config.update_period == 4);
  CHECK(config.target_update_period == 100);
  const DqnAgent agent(192, 6, config, 1);
  CHECK(agent.online_net().layer_dims == std::vector<int>{192, 512, 512, 6});
}

TEST_CASE("train_q_step: returns nothing below min_replay") {
  DqnConfig config;
  config.q_hidden_dims = {4};
  config.min_replay = 50;
  DqnAgent agent(2, 2, config, 5);
  ReplayBuffer replay(100);
  Rng rng(8);
  for (int i = 0; i < 49; ++i) replay.add(make_transition(rng, 2, 2, false));
  CHECK_FALSE(agent.train_q_step(replay).has_value());
  replay.add(make_transition(rng, 2, 2, false));
  CHECK(agent.train_q_step(replay).has_value());
}

TEST_CASE("train_q_step: target net stays frozen between syncs") {
  DqnConfig config;
  config.q_hidden_dims = {8};
  config.min_replay = 10;
  config.batch_size = 4;
  DqnAgent agent(2, 3, config, 11);
  ReplayBuffer replay(100);
  Rng rng(12);
  for (int i = 0; i < 30; ++i) replay.add(make_transition(rng, 2, 3, false));
  const std::uint64_t target_before = mlp_param_hash(agent.target_net());
  const std::uint64_t online_before = mlp_param_hash(agent.online_net());
  REQUIRE(agent.train_q_step(replay).has_value());
  REQUIRE(agent.train_q_step(replay).has_value());
  CHECK(mlp_param_hash(agent.target_net()) == target_before);
  CHECK(mlp_param_hash(agent.online_net()) != online_before);
}

TEST_CASE("train_q_step: loss is finite on random buffers") {
  DqnConfig config;
  config.q_hidden_dims = {8};
  config.min_replay = 20;
  DqnAgent agent(3, 4, config, 13);
  ReplayBuffer replay(200);
  Rng rng(14);
  for (int i = 0; i < 100; ++i) replay.add(make_transition(rng, 3, 4, rng.below(10) == 0 && false));
  for (int step = 0; step < 50; ++step) {
    const auto loss = agent.train_q_step(replay);
    REQUIRE(loss.has_value());
    CHECK(std::isfinite(*loss));
  }
}

TEST_CASE("train_q_step: regression toward a constant target") {
  DqnConfig config;
  config.q_hidden_dims = {8};
  config.update_horizon = 1;
  config.min_replay = 1;
  config.batch_size = 8;
  config.optimizer.learning_rate = 0.001;
  DqnAgent agent(2, 2, config, 15);
  ReplayBuffer replay(10);
  Transition t;
  t.observation = {0.5, -0.5};
  t.next_observation = {0.5, -0.5};
  t.action = 1;
  t.reward = 1.0;
  t.terminal = true;  // target is exactly the reward
  replay.add(t);
  double gap = 1e9;
  for (int step = 0; step < 2000 && gap > 1e-2; ++step) {
    agent.train_q_step(replay);
    const double q = mlp_forward(agent.online_net(), t.observation)[1];
    gap = std::abs(q - 1.0);
  }
  CHECK(gap <= 1e-2);
}

TEST_CASE("sync_target copies the online net bit-exactly") {
  DqnConfig config;
  config.q_hidden_dims = {6};
  config.min_replay = 5;
  DqnAgent agent(2, 3, config, 17);

  // target starts as a copy of the online net
  CHECK(mlp_param_hash(agent.target_net()) == mlp_param_hash(agent.online_net()));

  ReplayBuffer replay(50);
  Rng rng(18);
  for (int i = 0; i < 20; ++i) replay.add(make_transition(rng, 2, 3, false));
  for (int i = 0; i < 5; ++i) agent.train_q_step(replay);
  CHECK(mlp_param_hash(agent.target_net()) != mlp_param_hash(agent.online_net()));

  agent.sync_target();
  CHECK(mlp_param_hash(agent.target_net()) == mlp_param_hash(agent.online_net()));
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(mlp_forward(agent.online_net(), x) == mlp_forward(agent.target_net(), x));
  }
}

TEST_CASE("bandit miniature: greedy policy converges to the rewarded action") {
  DqnConfig config;
  config.q_hidden_dims = {16};
  config.gamma = 0.0;  // immediate-reward bandit
  config.update_horizon = 2;
  config.min_replay = 100;
  config.update_period = 1;
  config.target_update_period = 50;
  config.batch_size = 16;
  config.optimizer.learning_rate = 0.0025;
  config.replay_capacity = 2000;
  DqnAgent agent(4, 3, config, 21);
  const EpsilonSchedule schedule{200, 800, 0.01};
  const std::vector<double> obs{1.0, 0.5, -0.5, 0.2};
  const int best_action = 2;
  ReplayBuffer replay(config.replay_capacity);
  for (long step = 0; step < 5000; ++step) {
    const int action = agent.select_action(obs, epsilon_at(schedule, step));
    Transition t;
    t.observation = obs;
    t.next_observation = obs;
    t.action = action;
    t.reward = action == best_action ? 1.0 : 0.0;
    replay.add(std::move(t));
    agent.train_q_step(replay);
    if (agent.trained_steps() > 0 && agent.trained_steps() % config.target_update_period == 0) {
      agent.sync_target();
    }
  }
  CHECK(agent.select_action(obs, 0.0) == best_action);
  const std::vector<double> q = mlp_forward(agent.online_net(), obs);
  CHECK(q[2] > q[0]);
  CHECK(q[2] > q[1]);
}

TEST_CASE("agent checkpoints write both nets and a sidecar") {
  DqnConfig config;
  config.q_hidden_dims = {4};
  DqnAgent agent(3, 2, config, 23);
  const std::string prefix = (std::filesystem::temp_directory_path() / "curriq_agent").string();
  ReplayBuffer replay(10);
  Rng rng(24);
  for (int i = 0; i < 3; ++i) replay.add(make_transition(rng, 3, 2, false));
  agent.save(prefix, 42, &replay);
  const Mlp online = load_mlp(prefix + ".online.ckpt");
  const Mlp target = load_mlp(prefix + ".target.ckpt");
  CHECK(mlp_param_hash(online) == mlp_param_hash(agent.online_net()));
  CHECK(mlp_param_hash(target) == mlp_param_hash(agent.target_net()));
  CHECK(std::filesystem::exists(prefix + ".json"));

  const LoadedAgent restored = DqnAgent::load(prefix, 99);
  CHECK(restored.agent_step == 42);
  CHECK(mlp_param_hash(restored.agent.online_net()) == mlp_param_hash(agent.online_net()));
  CHECK(mlp_param_hash(restored.agent.target_net()) == mlp_param_hash(agent.target_net()));
  CHECK(restored.agent.config().q_hidden_dims == config.q_hidden_dims);
  std::filesystem::remove(prefix + ".online.ckpt");
  std::filesystem::remove(prefix + ".target.ckpt");
  std::filesystem::remove(prefix + ".json");
}

TEST_CASE("dqn config validation rejects bad values") {
  DqnConfig config;
  config.gamma = 1.5;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config = DqnConfig{};
  config.update_horizon = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config = DqnConfig{};
  config.stack_size = 0;
  CHECK_THROWS_AS(validate(config), ConfigError);
}
