#include "curriq/curricula.hpp"

#include <algorithm>
#include <cmath>

#include "curriq/errors.hpp"

namespace curriq {

const std::vector<std::string>& policy_kind_names() {
  static const std::vector<std::string> names = {
      "uniform_all",   "uniform_bins", "uniform_bookends",
      "filtered",      "fixed_epsilon", "telescoping",
      "rl_agent",      "ablation_fixed_reward", "ablation_fixed_observation",
  };
  return names;
}

std::string to_string(PolicyKind kind) {
  return policy_kind_names()[static_cast<std::size_t>(kind)];
}

PolicyKind policy_kind_from_string(const std::string& name) {
  const auto& names = policy_kind_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<PolicyKind>(i);
  }
  std::string valid;
  for (const std::string& n : names) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw UsageError("unknown policy kind '" + name + "'; valid kinds: " + valid);
}

void validate(const TelescopeSchedule& schedule, int num_bins) {
  if (schedule.milestones.empty()) throw ConfigError("telescope: no milestones");
  if (schedule.milestones.front().step != 0) {
    throw ConfigError("telescope: first milestone must be at step 0");
  }
  if (schedule.milestones.front().active_bins != num_bins) {
    throw ConfigError("telescope: schedule must start with all bins active");
  }
  long prev_step = -1;
  int prev_count = num_bins + 1;
  for (const auto& m : schedule.milestones) {
    if (m.step <= prev_step) throw ConfigError("telescope: milestone steps must strictly increase");
    if (m.active_bins < 1 || m.active_bins > num_bins) {
      throw ConfigError("telescope: active_bins outside [1, num_bins]");
    }
    if (m.active_bins > prev_count) throw ConfigError("telescope: active bin count must not grow");
    prev_step = m.step;
    prev_count = m.active_bins;
  }
}

TelescopeSchedule default_telescope(int num_bins, long total_steps) {
  std::vector<int> counts{num_bins};
  while (counts.back() > 1) counts.push_back((counts.back() + 1) / 2);
  TelescopeSchedule schedule;
  const long span = static_cast<long>(0.6 * static_cast<double>(total_steps));
  const std::size_t k = counts.size();
  for (std::size_t i = 0; i < k; ++i) {
    long step = (k == 1) ? 0 : span * static_cast<long>(i) / static_cast<long>(k - 1);
    if (!schedule.milestones.empty() && step <= schedule.milestones.back().step) {
      step = schedule.milestones.back().step + 1;
    }
    schedule.milestones.push_back({step, counts[i]});
  }
  return schedule;
}

int uniform_bins_action(int num_bins, Rng& rng) {
  if (num_bins < 1) throw ConfigError("uniform_bins: need at least one bin");
  return rng.below_int(num_bins);
}

int weighted_bins_action(const std::vector<std::size_t>& bin_sizes, Rng& rng) {
  std::size_t total = 0;
  for (std::size_t s : bin_sizes) total += s;
  if (total == 0) throw ConfigError("weighted_bins: all bins empty");
  std::uint64_t pick = rng.below(total);
  for (std::size_t b = 0; b < bin_sizes.size(); ++b) {
    if (pick < bin_sizes[b]) return static_cast<int>(b);
    pick -= bin_sizes[b];
  }
  throw InternalError("weighted_bins: pick out of range");
}

int bookends_action(int num_bins, Rng& rng) {
  if (num_bins < 2) throw ConfigError("bookends: need at least two bins");
  return rng.below(2) == 0 ? 0 : num_bins - 1;
}

int filtered_bin_count(int num_bins, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ConfigError("filtered: keep_fraction must be in (0, 1]");
  }
  // Nearest whole bin to keep_fraction*B, at least one. With 6 bins a 20%
  // keep maps to the single cleanest bin, a 33% keep to the cleanest two.
  const int count = static_cast<int>(std::floor(keep_fraction * num_bins + 0.5));
  return std::clamp(count, 1, num_bins);
}

int filtered_action(int num_bins, double keep_fraction, Rng& rng) {
  const int keep = filtered_bin_count(num_bins, keep_fraction);
  return num_bins - keep + rng.below_int(keep);
}

int fixed_epsilon_action(int num_bins, const EpsilonSchedule& schedule, long step, Rng& rng) {
  if (rng.next_double() < epsilon_at(schedule, step)) {
    return rng.below_int(num_bins);
  }
  return num_bins - 1;
}

int telescoping_action(const TelescopeSchedule& schedule, long step, Rng& rng) {
  if (schedule.milestones.empty()) throw ConfigError("telescope: no milestones");
  // The schedule opens with every bin active, so the first milestone carries
  // the bin count.
  const int num_bins = schedule.milestones.front().active_bins;
  int active = num_bins;
  for (const auto& m : schedule.milestones) {
    if (m.step > step) break;
    active = m.active_bins;
  }
  return num_bins - active + rng.below_int(active);
}

double ablation_reward(int action, int num_bins) {
  return action == num_bins - 1 ? 1.0 : 0.0;
}

std::vector<double> ablation_observation(int dim) {
  return std::vector<double>(static_cast<std::size_t>(dim), 1.0);
}

CurriculumPolicy::CurriculumPolicy(PolicyKind kind, PolicyParams params, int num_bins)
    : kind_(kind), params_(std::move(params)), num_bins_(num_bins) {
  if (num_bins < 1) throw ConfigError("policy: need at least one bin");
  switch (kind_) {
    case PolicyKind::uniform_bookends:
      if (num_bins < 2) throw ConfigError("bookends: need at least two bins");
      break;
    case PolicyKind::filtered:
      filtered_bin_count(num_bins, params_.keep_fraction);
      break;
    case PolicyKind::telescoping:
      validate(params_.telescope, num_bins);
      break;
    default:
      break;
  }
}

bool CurriculumPolicy::agent_driven() const {
  return kind_ == PolicyKind::rl_agent || kind_ == PolicyKind::ablation_fixed_reward ||
         kind_ == PolicyKind::ablation_fixed_observation;
}

int CurriculumPolicy::select_bin(long agent_step, long trainee_step,
                                 const std::vector<std::size_t>& bin_sizes, Rng& rng) const {
  switch (kind_) {
    case PolicyKind::uniform_all:
      return weighted_bins_action(bin_sizes, rng);
    case PolicyKind::uniform_bins:
      return uniform_bins_action(num_bins_, rng);
    case PolicyKind::uniform_bookends:
      return bookends_action(num_bins_, rng);
    case PolicyKind::filtered:
      return filtered_action(num_bins_, params_.keep_fraction, rng);
    case PolicyKind::fixed_epsilon:
      return fixed_epsilon_action(num_bins_, params_.epsilon, agent_step, rng);
    case PolicyKind::telescoping:
      return telescoping_action(params_.telescope, trainee_step, rng);
    default:
      throw InternalError("select_bin called for an agent-driven policy");
  }
}

}  // namespace curriq
