#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curriq/neural.hpp"
#include "curriq/rng.hpp"

namespace curriq {

// Three phases: always explore during warmup, linear decay to the floor,
// then always exploit (up to the floor probability).
struct EpsilonSchedule {
  long warmup_steps = 0;
  long decay_steps = 25000;
  double floor = 0.01;
};

double epsilon_at(const EpsilonSchedule& schedule, long agent_step);

struct Transition {
  std::vector<double> observation;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_observation;
  bool terminal = false;
};

// Arrival-ordered ring; eviction is oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return total_added_; }
  const Transition& at(std::size_t i) const { return entries_[i]; }  // 0 = oldest

  void mark_newest_terminal();

 private:
  std::size_t capacity_;
  std::deque<Transition> entries_;
  std::uint64_t total_added_ = 0;
};

struct DqnConfig {
  double gamma = 0.99;
  int update_horizon = 2;
  int min_replay = 3000;
  int update_period = 4;
  int target_update_period = 100;
  int batch_size = 32;
  std::vector<int> q_hidden_dims = {512, 512};
  RmsPropConfig optimizer{0.00025, 0.95, 1e-10};
  std::size_t replay_capacity = 50000;
  int stack_size = 1;  // observation stacking; 1 disables it
};

void validate(const DqnConfig& config);

struct LoadedAgent;

// n-step return: sum of discounted rewards over the window plus the
// discounted bootstrap from the target net, dropped when the window ends on
// a terminal. The window must be consecutive-in-arrival and truncated at the
// first terminal.
double n_step_target(std::span<const Transition> window, const Mlp& target_net, double gamma);
double n_step_target(std::span<const Transition* const> window, const Mlp& target_net,
                     double gamma);

class DqnAgent {
 public:
  DqnAgent(int observation_dim, int num_actions, const DqnConfig& config, std::uint64_t seed);

  // epsilon-greedy over the online net; argmax ties go to the lowest index.
  int select_action(std::span<const double> observation, double epsilon);

  // One RMSProp step on squared n-step TD error over a sampled batch of
  // windows. Returns nothing when the buffer is below min_replay.
  std::optional<double> train_q_step(const ReplayBuffer& replay);

  // Target net becomes a bit-exact copy of the online net.
  void sync_target();

  const Mlp& online_net() const { return online_; }
  Mlp& online_net() { return online_; }
  const Mlp& target_net() const { return target_; }
  const DqnConfig& config() const { return config_; }
  long trained_steps() const { return trained_steps_; }
  int observation_dim() const { return online_.input_dim(); }
  int num_actions() const { return online_.output_dim(); }

  // Writes <prefix>.online.ckpt, <prefix>.target.ckpt and a <prefix>.json
  // sidecar. Replay contents are not persisted.
  void save(const std::string& prefix, long agent_step, const ReplayBuffer* replay) const;

  static LoadedAgent load(const std::string& prefix, std::uint64_t seed);

 private:
  DqnConfig config_;
  Mlp online_;
  Mlp target_;
  RmsPropState optimizer_;
  Rng rng_;
  long trained_steps_ = 0;
};

struct LoadedAgent {
  DqnAgent agent;
  long agent_step = 0;
};

}  // namespace curriq
