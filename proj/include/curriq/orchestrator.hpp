#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "curriq/agent.hpp"
#include "curriq/corpus.hpp"
#include "curriq/curricula.hpp"
#include "curriq/learner.hpp"

namespace curriq {

// Delta reward: new dev log-likelihood minus the mean of the recent history.
// The first observation only seeds the history.
class RewardTracker {
 public:
  explicit RewardTracker(int window);

  std::optional<double> observe(double dev_ll);
  int window() const { return window_; }
  std::size_t history_size() const { return history_.size(); }

 private:
  int window_;
  std::deque<double> history_;
};

struct PendingEntry {
  std::vector<double> observation;
  int action = 0;
  std::vector<double> next_observation;
};

// Holds (observation, action, next observation) records until a reward
// arrives, then moves them into the replay buffer.
class PendingBuffer {
 public:
  void add(PendingEntry entry) { entries_.push_back(std::move(entry)); }
  std::size_t size() const { return entries_.size(); }

  // Broadcast attribution: every entry carries the same reward.
  std::size_t flush(double reward, ReplayBuffer& replay);

  // Last-only attribution: the newest entry carries the reward, earlier ones
  // carry zero.
  std::size_t flush_last_only(double reward, ReplayBuffer& replay);

  // Per-action static rewards (reward ablation).
  std::size_t flush_static(int num_bins, ReplayBuffer& replay);

 private:
  std::size_t drain(ReplayBuffer& replay, const std::vector<double>& rewards);
  std::vector<PendingEntry> entries_;
};

struct RunConfig {
  long total_steps = 30000;
  long nmt_warmup_steps = 500;
  int eval_every = 10;
  int num_bins = 6;
  int prototype_per_bin = 32;
  int trainee_batch_size = 8;
  int reward_window = 1;
  // Multiplies rewards as the agent sees them (replay transitions only;
  // metrics always log raw dev-delta rewards). Matches the reward scale to
  // the Q-net's resolution, the same role reward clipping plays in DQN.
  double reward_scale = 1.0;
  int heatmap_bucket = 1000;
  PolicyKind policy = PolicyKind::rl_agent;
  PolicyParams policy_params;         // negative epsilon phases derived from run length
  bool ablate_reward = false;         // static cleanest-bin reward (agent policies only)
  bool ablate_observation = false;    // static all-ones observation (agent policies only)
  bool broadcast_rewards = true;      // false = last-only attribution
  LearnerConfig learner;              // vocab_size filled from the corpus when 0
  DqnConfig dqn;
  long checkpoint_every = 0;          // periodic agent+trainee checkpoints; 0 = best only
  std::uint64_t seed = 1;
  std::string out_dir;                // empty = no files written
  std::string label;
};

void validate(const RunConfig& config);

// Resolves the negative "derive from run length" fields of the configured
// epsilon schedule: warmup defaults to 10% and decay to 50% of the
// post-warmup steps.
EpsilonSchedule effective_epsilon(const RunConfig& config);

struct RunReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  double best_dev_ll = 0.0;
  std::string best_checkpoint;
  long dropped_pending = 0;
  double final_dev_ll = 0.0;
  std::string policy;
  std::string label;
  long transitions_recorded = 0;
  long total_steps = 0;
};

// Everything a caller may want to inspect without re-reading files.
struct RunResult {
  RunReport report;
  std::vector<int> actions;                            // one per trainee step
  std::vector<std::pair<long, double>> dev_points;     // (step, dev_ll)
  std::vector<std::pair<long, double>> reward_points;  // (step, reward)
};

RunResult run_experiment(const RunConfig& config, const std::vector<SentencePair>& train_pairs,
                         const BinnedCorpus& binned, const DevSet& dev);

const RunReport& select_best_run(const std::vector<RunReport>& reports);

// Column j is the empirical action distribution inside step bucket j.
std::vector<std::vector<double>> policy_heatmap(const std::vector<int>& actions, int num_bins,
                                                int bucket);

void save_heatmap_csv(const std::string& path, const std::vector<std::vector<double>>& heatmap,
                      const std::string& config_hash, int bucket);

void save_report_json(const std::string& path, const RunReport& report);
RunReport load_report_json(const std::string& path);

// Identifies the comparable experiment setup: policy, seeds, labels and
// output paths are excluded so runs of different curricula can be aggregated.
std::string config_hash(const RunConfig& config);

}  // namespace curriq
