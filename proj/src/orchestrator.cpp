#include "curriq/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "curriq/errors.hpp"

namespace curriq {

RewardTracker::RewardTracker(int window) : window_(window) {
  if (window < 1) throw ConfigError("reward tracker: window must be >= 1");
}

std::optional<double> RewardTracker::observe(double dev_ll) {
  std::optional<double> reward;
  if (!history_.empty()) {
    double sum = 0.0;
    for (double v : history_) sum += v;
    reward = dev_ll - sum / static_cast<double>(history_.size());
  }
  history_.push_back(dev_ll);
  if (history_.size() > static_cast<std::size_t>(window_)) history_.pop_front();
  return reward;
}

std::size_t PendingBuffer::drain(ReplayBuffer& replay, const std::vector<double>& rewards) {
  const std::size_t moved = entries_.size();
  for (std::size_t i = 0; i < moved; ++i) {
    PendingEntry& e = entries_[i];
    replay.add(Transition{std::move(e.observation), e.action, rewards[i],
                          std::move(e.next_observation), false});
  }
  entries_.clear();
  return moved;
}

std::size_t PendingBuffer::flush(double reward, ReplayBuffer& replay) {
  return drain(replay, std::vector<double>(entries_.size(), reward));
}

std::size_t PendingBuffer::flush_last_only(double reward, ReplayBuffer& replay) {
  std::vector<double> rewards(entries_.size(), 0.0);
  if (!rewards.empty()) rewards.back() = reward;
  return drain(replay, rewards);
}

std::size_t PendingBuffer::flush_static(int num_bins, ReplayBuffer& replay) {
  std::vector<double> rewards;
  rewards.reserve(entries_.size());
  for (const PendingEntry& e : entries_) rewards.push_back(ablation_reward(e.action, num_bins));
  return drain(replay, rewards);
}

void validate(const RunConfig& config) {
  if (config.total_steps < 1) throw ConfigError("run: total_steps must be >= 1");
  if (config.nmt_warmup_steps < 0 || config.nmt_warmup_steps > config.total_steps) {
    throw ConfigError("run: nmt_warmup_steps must lie in [0, total_steps]");
  }
  if (config.eval_every < 1) throw ConfigError("run: eval_every must be >= 1");
  if (config.num_bins < 2) throw ConfigError("run: num_bins must be >= 2");
  if (config.prototype_per_bin < 1) throw ConfigError("run: prototype_per_bin must be >= 1");
  if (config.trainee_batch_size < 1) throw ConfigError("run: trainee_batch_size must be >= 1");
  if (config.reward_window < 1) throw ConfigError("run: reward_window must be >= 1");
  if (!(config.reward_scale > 0.0)) throw ConfigError("run: reward_scale must be positive");
  if (config.heatmap_bucket < 1) throw ConfigError("run: heatmap_bucket must be >= 1");
  if (config.checkpoint_every < 0) throw ConfigError("run: checkpoint_every must be >= 0");
  validate(config.dqn);
}

EpsilonSchedule effective_epsilon(const RunConfig& config) {
  EpsilonSchedule eps = config.policy_params.epsilon;
  const long post_warmup = config.total_steps - config.nmt_warmup_steps;
  if (eps.warmup_steps < 0) eps.warmup_steps = post_warmup / 10;
  if (eps.decay_steps < 0) eps.decay_steps = post_warmup / 2;
  if (!(eps.floor >= 0.0 && eps.floor <= 1.0)) throw ConfigError("run: epsilon floor outside [0,1]");
  return eps;
}

namespace {

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json optimizer_json(const RmsPropConfig& o) {
  return {{"learning_rate", o.learning_rate}, {"decay", o.decay}, {"epsilon_stab", o.epsilon_stab}};
}

// Pads at the front by repeating the oldest entry so the stacked vector
// always has stack_size frames.
std::vector<double> stacked_observation(const std::deque<std::vector<double>>& stack,
                                        int stack_size, int obs_dim) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(stack_size) * obs_dim);
  for (int k = 0; k < stack_size; ++k) {
    const long idx =
        std::max<long>(0, static_cast<long>(stack.size()) - stack_size + k);
    const std::vector<double>& frame = stack[static_cast<std::size_t>(idx)];
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

}  // namespace

std::string config_hash(const RunConfig& config) {
  nlohmann::json j;
  j["total_steps"] = config.total_steps;
  j["nmt_warmup_steps"] = config.nmt_warmup_steps;
  j["eval_every"] = config.eval_every;
  j["num_bins"] = config.num_bins;
  j["prototype_per_bin"] = config.prototype_per_bin;
  j["trainee_batch_size"] = config.trainee_batch_size;
  j["reward_window"] = config.reward_window;
  j["reward_scale"] = config.reward_scale;
  j["heatmap_bucket"] = config.heatmap_bucket;
  j["broadcast_rewards"] = config.broadcast_rewards;
  j["learner"] = {{"vocab_size", config.learner.vocab_size},
                  {"embed_dim", config.learner.embed_dim},
                  {"head_hidden", config.learner.head_hidden},
                  {"optimizer", optimizer_json(config.learner.optimizer)}};
  j["dqn"] = {{"gamma", config.dqn.gamma},
              {"update_horizon", config.dqn.update_horizon},
              {"min_replay", config.dqn.min_replay},
              {"update_period", config.dqn.update_period},
              {"target_update_period", config.dqn.target_update_period},
              {"batch_size", config.dqn.batch_size},
              {"q_hidden_dims", config.dqn.q_hidden_dims},
              {"replay_capacity", config.dqn.replay_capacity},
              {"stack_size", config.dqn.stack_size},
              {"optimizer", optimizer_json(config.dqn.optimizer)}};
  return hash_hex(j.dump());
}

RunResult run_experiment(const RunConfig& config, const std::vector<SentencePair>& train_pairs,
                         const BinnedCorpus& binned, const DevSet& dev) {
  validate(config);
  if (binned.num_bins() != config.num_bins) {
    throw ConfigError("run: binned corpus has " + std::to_string(binned.num_bins()) +
                      " bins, config expects " + std::to_string(config.num_bins));
  }
  if (dev.pairs.empty()) throw ConfigError("run: empty dev set");
  {
    std::unordered_set<std::int64_t> train_ids;
    train_ids.reserve(train_pairs.size());
    for (const SentencePair& p : train_pairs) train_ids.insert(p.id);
    for (const SentencePair& p : dev.pairs) {
      if (train_ids.count(p.id)) {
        throw DataError("run: dev pair " + std::to_string(p.id) + " appears in the training corpus");
      }
    }
  }

  const CorpusView corpus(train_pairs);

  LearnerConfig learner_config = config.learner;
  if (learner_config.vocab_size == 0) {
    int max_token = 0;
    for (const SentencePair& p : train_pairs) {
      for (int t : p.source) max_token = std::max(max_token, t);
      for (int t : p.target) max_token = std::max(max_token, t);
    }
    for (const SentencePair& p : dev.pairs) {
      for (int t : p.source) max_token = std::max(max_token, t);
      for (int t : p.target) max_token = std::max(max_token, t);
    }
    learner_config.vocab_size = max_token + 1;
  }

  PolicyParams params = config.policy_params;
  params.epsilon = effective_epsilon(config);
  if (params.telescope.milestones.empty()) {
    params.telescope = default_telescope(config.num_bins, config.total_steps);
  }
  const CurriculumPolicy policy(config.policy, params, config.num_bins);
  const bool agent_driven = policy.agent_driven();
  const bool ablate_reward = config.ablate_reward || policy.ablate_reward();
  const bool ablate_observation = config.ablate_observation || policy.ablate_observation();
  if ((config.ablate_reward || config.ablate_observation) && !agent_driven) {
    throw ConfigError("run: ablation flags require an agent-driven policy");
  }

  const PrototypeBatch proto = prototype_batch(binned, config.prototype_per_bin);
  std::vector<SentencePair> proto_pairs;
  for (std::int64_t id : proto.flattened()) proto_pairs.push_back(corpus.by_id(id));
  const int obs_dim = config.num_bins * config.prototype_per_bin;
  const int stack_size = config.dqn.stack_size;
  const int stacked_dim = obs_dim * stack_size;

  Learner learner(learner_config, derive_seed(config.seed, 1));
  std::optional<DqnAgent> agent;
  if (agent_driven) agent.emplace(stacked_dim, config.num_bins, config.dqn, derive_seed(config.seed, 2));
  Rng policy_rng(derive_seed(config.seed, 3));
  Rng data_rng(derive_seed(config.seed, 4));

  ReplayBuffer replay(config.dqn.replay_capacity);
  PendingBuffer pending;
  RewardTracker tracker(config.reward_window);
  const std::vector<std::size_t> bin_sizes = binned.bin_sizes();
  const std::string hash = config_hash(config);

  std::ofstream metrics;
  const bool writing = !config.out_dir.empty();
  if (writing) {
    std::filesystem::create_directories(config.out_dir);
    metrics.open(config.out_dir + "/metrics.jsonl");
    if (!metrics) throw DataError("run: cannot open metrics file in " + config.out_dir);
    nlohmann::json header;
    header["config_hash"] = hash;
    header["seed"] = config.seed;
    header["policy"] = to_string(config.policy);
    header["label"] = config.label.empty() ? to_string(config.policy) : config.label;
    metrics << header.dump() << '\n';
  }

  const auto observe = [&]() -> std::vector<double> {
    if (ablate_observation) return ablation_observation(obs_dim);
    return learner.sentence_log_likelihoods(proto_pairs);
  };

  std::deque<std::vector<double>> obs_stack;
  if (agent_driven) {
    obs_stack.push_back(observe());
  }

  RunResult result;
  result.actions.reserve(static_cast<std::size_t>(config.total_steps));
  long agent_step = 0;
  double best_dev = -std::numeric_limits<double>::infinity();
  long best_step = -1;
  std::optional<Learner> best_snapshot;

  for (long step = 1; step <= config.total_steps; ++step) {
    const double eps = epsilon_at(params.epsilon, agent_step);
    int action = 0;
    std::vector<double> obs_before;
    if (agent_driven) {
      obs_before = stacked_observation(obs_stack, stack_size, obs_dim);
      action = agent->select_action(obs_before, eps);
    } else {
      action = policy.select_bin(agent_step, step - 1, bin_sizes, policy_rng);
    }

    const std::vector<SentencePair> batch =
        sample_minibatch(binned, corpus, action, config.trainee_batch_size, data_rng);
    const double train_loss = learner.train_step(batch);

    const bool post_warmup = step > config.nmt_warmup_steps;
    if (agent_driven) {
      obs_stack.push_back(observe());
      while (obs_stack.size() > static_cast<std::size_t>(stack_size)) obs_stack.pop_front();
      if (post_warmup) {
        pending.add(PendingEntry{std::move(obs_before), action,
                                 stacked_observation(obs_stack, stack_size, obs_dim)});
      }
    }
    if (post_warmup) ++agent_step;

    std::optional<double> dev_ll_here;
    std::optional<double> reward_here;
    std::optional<double> q_loss_here;

    if (step % config.eval_every == 0) {
      const double dev_ll = learner.dev_log_likelihood(dev);
      dev_ll_here = dev_ll;
      result.dev_points.emplace_back(step, dev_ll);
      if (dev_ll > best_dev) {
        best_dev = dev_ll;
        best_step = step;
        best_snapshot = learner;
      }
      const std::optional<double> reward = tracker.observe(dev_ll);
      if (reward) {
        reward_here = *reward;
        result.reward_points.emplace_back(step, *reward);
        if (agent_driven) {
          if (ablate_reward) {
            pending.flush_static(config.num_bins, replay);
          } else if (config.broadcast_rewards) {
            pending.flush(*reward * config.reward_scale, replay);
          } else {
            pending.flush_last_only(*reward * config.reward_scale, replay);
          }
        }
      }
    }

    if (agent_driven && post_warmup && agent_step % config.dqn.update_period == 0) {
      const std::optional<double> q_loss = agent->train_q_step(replay);
      if (q_loss) {
        q_loss_here = *q_loss;
        if (agent->trained_steps() % config.dqn.target_update_period == 0) {
          agent->sync_target();
        }
      }
    }

    if (writing) {
      nlohmann::json row;
      row["step"] = step;
      row["bin"] = action;
      row["epsilon"] = eps;
      row["train_loss"] = train_loss;
      if (dev_ll_here) row["dev_ll"] = *dev_ll_here;
      if (reward_here) row["reward"] = *reward_here;
      if (q_loss_here) row["q_loss"] = *q_loss_here;
      row["replay_size"] = replay.size();
      metrics << row.dump() << '\n';
    }
    result.actions.push_back(action);

    if (writing && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      learner.save(config.out_dir + "/trainee_step" + std::to_string(step) + ".ckpt");
      if (agent_driven) {
        agent->save(config.out_dir + "/agent_step" + std::to_string(step), agent_step, &replay);
      }
    }
  }

  // Evaluate the end-of-run model when the last step missed the cadence, so
  // final_dev_ll is always defined; this evaluation feeds no reward.
  double final_dev;
  if (!result.dev_points.empty() && result.dev_points.back().first == config.total_steps) {
    final_dev = result.dev_points.back().second;
  } else {
    final_dev = learner.dev_log_likelihood(dev);
    result.dev_points.emplace_back(config.total_steps, final_dev);
    if (final_dev > best_dev) {
      best_dev = final_dev;
      best_step = config.total_steps;
      best_snapshot = learner;
    }
  }
  replay.mark_newest_terminal();

  RunReport& report = result.report;
  report.config_hash = hash;
  report.seed = config.seed;
  report.best_dev_ll = best_dev;
  report.best_checkpoint = "step" + std::to_string(best_step);
  report.dropped_pending = static_cast<long>(pending.size());
  report.final_dev_ll = final_dev;
  report.policy = to_string(config.policy);
  report.label = config.label.empty() ? to_string(config.policy) : config.label;
  report.transitions_recorded = static_cast<long>(replay.total_added());
  report.total_steps = config.total_steps;

  if (writing) {
    if (best_snapshot) best_snapshot->save(config.out_dir + "/best.ckpt");
    save_heatmap_csv(config.out_dir + "/heatmap.csv",
                     policy_heatmap(result.actions, config.num_bins, config.heatmap_bucket), hash,
                     config.heatmap_bucket);
    save_report_json(config.out_dir + "/report.json", report);
  }
  return result;
}

const RunReport& select_best_run(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw UsageError("select_best_run: no reports given");
  const RunReport* best = &reports[0];
  for (const RunReport& r : reports) {
    if (r.best_dev_ll > best->best_dev_ll ||
        (r.best_dev_ll == best->best_dev_ll && r.seed < best->seed)) {
      best = &r;
    }
  }
  return *best;
}

std::vector<std::vector<double>> policy_heatmap(const std::vector<int>& actions, int num_bins,
                                                int bucket) {
  if (bucket < 1) throw ConfigError("policy_heatmap: bucket must be >= 1");
  if (num_bins < 1) throw ConfigError("policy_heatmap: num_bins must be >= 1");
  const std::size_t columns = (actions.size() + static_cast<std::size_t>(bucket) - 1) /
                              static_cast<std::size_t>(bucket);
  std::vector<std::vector<double>> heatmap(
      static_cast<std::size_t>(num_bins), std::vector<double>(columns, 0.0));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || a >= num_bins) throw DataError("policy_heatmap: action out of range");
    heatmap[static_cast<std::size_t>(a)][i / static_cast<std::size_t>(bucket)] += 1.0;
  }
  for (std::size_t j = 0; j < columns; ++j) {
    const std::size_t start = j * static_cast<std::size_t>(bucket);
    const std::size_t count = std::min(actions.size() - start, static_cast<std::size_t>(bucket));
    for (int b = 0; b < num_bins; ++b) {
      heatmap[static_cast<std::size_t>(b)][j] /= static_cast<double>(count);
    }
  }
  return heatmap;
}

void save_heatmap_csv(const std::string& path, const std::vector<std::vector<double>>& heatmap,
                      const std::string& config_hash, int bucket) {
  std::ofstream os(path);
  if (!os) throw DataError("heatmap: cannot open for writing: " + path);
  os << "# config_hash=" << config_hash << " bucket=" << bucket << '\n';
  char buf[64];
  for (const auto& row : heatmap) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw DataError("heatmap: write failed: " + path);
}

void save_report_json(const std::string& path, const RunReport& report) {
  nlohmann::json j;
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["best_dev_ll"] = report.best_dev_ll;
  j["best_checkpoint"] = report.best_checkpoint;
  j["dropped_pending"] = report.dropped_pending;
  j["final_dev_ll"] = report.final_dev_ll;
  j["policy"] = report.policy;
  j["label"] = report.label;
  j["transitions_recorded"] = report.transitions_recorded;
  j["total_steps"] = report.total_steps;
  std::ofstream os(path);
  if (!os) throw DataError("report: cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

RunReport load_report_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("report: cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report: bad json in " + path + ": " + e.what());
  }
  RunReport r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.best_dev_ll = j.at("best_dev_ll").get<double>();
  r.best_checkpoint = j.at("best_checkpoint").get<std::string>();
  r.dropped_pending = j.at("dropped_pending").get<long>();
  r.final_dev_ll = j.at("final_dev_ll").get<double>();
  r.policy = j.at("policy").get<std::string>();
  r.label = j.value("label", r.policy);
  r.transitions_recorded = j.value("transitions_recorded", 0L);
  r.total_steps = j.value("total_steps", 0L);
  return r;
}

}  // namespace curriq
