#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curriq/agent.hpp"
#include "curriq/rng.hpp"

namespace curriq {

enum class PolicyKind {
  uniform_all,
  uniform_bins,
  uniform_bookends,
  filtered,
  fixed_epsilon,
  telescoping,
  rl_agent,
  ablation_fixed_reward,
  ablation_fixed_observation,
};

const std::vector<std::string>& policy_kind_names();
std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);  // UsageError lists valid kinds

// Hand-designed schedule whose active bin set shrinks toward the cleanest
// bins: at each milestone only the `active_bins` cleanest bins stay in play.
struct TelescopeSchedule {
  struct Milestone {
    long step = 0;
    int active_bins = 1;
  };
  std::vector<Milestone> milestones;
};

void validate(const TelescopeSchedule& schedule, int num_bins);

// Halves the active bin count at evenly spaced milestones spanning the first
// 60% of the run.
TelescopeSchedule default_telescope(int num_bins, long total_steps);

int uniform_bins_action(int num_bins, Rng& rng);

// Bin picked with probability proportional to its size; with equal-size bins
// this reproduces corpus-uniform sampling.
int weighted_bins_action(const std::vector<std::size_t>& bin_sizes, Rng& rng);

// Noisiest or cleanest bin, even odds.
int bookends_action(int num_bins, Rng& rng);

int filtered_bin_count(int num_bins, double keep_fraction);
int filtered_action(int num_bins, double keep_fraction, Rng& rng);

// Explore uniformly with probability epsilon_at(schedule, step), otherwise
// always the cleanest bin.
int fixed_epsilon_action(int num_bins, const EpsilonSchedule& schedule, long step, Rng& rng);

int telescoping_action(const TelescopeSchedule& schedule, long step, Rng& rng);

// Static reward for the reward ablation: 1 iff the cleanest bin was picked.
double ablation_reward(int action, int num_bins);

// Static all-ones observation for the observation ablation.
std::vector<double> ablation_observation(int dim);

struct PolicyParams {
  double keep_fraction = 0.33;
  // Negative warmup/decay mean "derive from the run length" (see
  // effective_epsilon in the orchestrator).
  EpsilonSchedule epsilon{-1, -1, 0.01};
  TelescopeSchedule telescope;
};

// Baseline dispatch. Agent-driven kinds (rl_agent and the two ablations) are
// routed to the DQN agent by the orchestrator instead of select_bin.
class CurriculumPolicy {
 public:
  CurriculumPolicy(PolicyKind kind, PolicyParams params, int num_bins);

  bool agent_driven() const;
  bool ablate_reward() const { return kind_ == PolicyKind::ablation_fixed_reward; }
  bool ablate_observation() const { return kind_ == PolicyKind::ablation_fixed_observation; }
  PolicyKind kind() const { return kind_; }
  const PolicyParams& params() const { return params_; }

  int select_bin(long agent_step, long trainee_step, const std::vector<std::size_t>& bin_sizes,
                 Rng& rng) const;

 private:
  PolicyKind kind_;
  PolicyParams params_;
  int num_bins_;
};

}  // namespace curriq
