#include "curriq/config.hpp"

#include <fstream>
#include <set>

#include "curriq/errors.hpp"

namespace curriq {

namespace {

void reject_unknown_keys(const nlohmann::json& doc, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!doc.is_object()) throw ConfigError("config: " + where + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

RmsPropConfig parse_optimizer(const nlohmann::json& doc, const RmsPropConfig& defaults,
                              const std::string& where) {
  reject_unknown_keys(doc, {"learning_rate", "decay", "epsilon_stab"}, where);
  RmsPropConfig out = defaults;
  out.learning_rate = doc.value("learning_rate", out.learning_rate);
  out.decay = doc.value("decay", out.decay);
  out.epsilon_stab = doc.value("epsilon_stab", out.epsilon_stab);
  return out;
}

LearnerConfig parse_learner(const nlohmann::json& doc, const std::string& where) {
  reject_unknown_keys(doc, {"vocab_size", "embed_dim", "head_hidden", "optimizer"}, where);
  LearnerConfig out;
  out.vocab_size = doc.value("vocab_size", out.vocab_size);
  out.embed_dim = doc.value("embed_dim", out.embed_dim);
  out.head_hidden = doc.value("head_hidden", out.head_hidden);
  if (doc.contains("optimizer")) {
    out.optimizer = parse_optimizer(doc.at("optimizer"), out.optimizer, where + ".optimizer");
  }
  return out;
}

DqnConfig parse_dqn(const nlohmann::json& doc, const std::string& where) {
  reject_unknown_keys(doc,
                      {"gamma", "update_horizon", "min_replay", "update_period",
                       "target_update_period", "batch_size", "q_hidden_dims", "optimizer",
                       "replay_capacity", "stack_size"},
                      where);
  DqnConfig out;
  out.gamma = doc.value("gamma", out.gamma);
  out.update_horizon = doc.value("update_horizon", out.update_horizon);
  out.min_replay = doc.value("min_replay", out.min_replay);
  out.update_period = doc.value("update_period", out.update_period);
  out.target_update_period = doc.value("target_update_period", out.target_update_period);
  out.batch_size = doc.value("batch_size", out.batch_size);
  out.q_hidden_dims = doc.value("q_hidden_dims", out.q_hidden_dims);
  out.replay_capacity = doc.value("replay_capacity", out.replay_capacity);
  out.stack_size = doc.value("stack_size", out.stack_size);
  if (doc.contains("optimizer")) {
    out.optimizer = parse_optimizer(doc.at("optimizer"), out.optimizer, where + ".optimizer");
  }
  return out;
}

EpsilonSchedule parse_epsilon(const nlohmann::json& doc, const EpsilonSchedule& defaults,
                              const std::string& where) {
  reject_unknown_keys(doc, {"warmup_steps", "decay_steps", "floor"}, where);
  EpsilonSchedule out = defaults;
  out.warmup_steps = doc.value("warmup_steps", out.warmup_steps);
  out.decay_steps = doc.value("decay_steps", out.decay_steps);
  out.floor = doc.value("floor", out.floor);
  return out;
}

TelescopeSchedule parse_telescope(const nlohmann::json& doc, const std::string& where) {
  if (!doc.is_array()) throw ConfigError("config: " + where + " must be an array of milestones");
  TelescopeSchedule out;
  for (const auto& m : doc) {
    reject_unknown_keys(m, {"step", "active_bins"}, where + " milestone");
    out.milestones.push_back({m.at("step").get<long>(), m.at("active_bins").get<int>()});
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
  reject_unknown_keys(doc,
                      {"total_steps", "nmt_warmup_steps", "eval_every", "num_bins",
                       "prototype_per_bin", "trainee_batch_size", "reward_window", "reward_scale",
                       "heatmap_bucket", "policy", "keep_fraction", "epsilon", "telescope",
                       "ablate_reward", "ablate_observation", "broadcast_rewards", "learner",
                       "dqn", "checkpoint_every", "seed"},
                      "run");
  RunConfig out;
  out.total_steps = doc.value("total_steps", out.total_steps);
  out.nmt_warmup_steps = doc.value("nmt_warmup_steps", out.nmt_warmup_steps);
  out.eval_every = doc.value("eval_every", out.eval_every);
  out.num_bins = doc.value("num_bins", out.num_bins);
  out.prototype_per_bin = doc.value("prototype_per_bin", out.prototype_per_bin);
  out.trainee_batch_size = doc.value("trainee_batch_size", out.trainee_batch_size);
  out.reward_window = doc.value("reward_window", out.reward_window);
  out.reward_scale = doc.value("reward_scale", out.reward_scale);
  out.heatmap_bucket = doc.value("heatmap_bucket", out.heatmap_bucket);
  if (doc.contains("policy")) out.policy = policy_kind_from_string(doc.at("policy").get<std::string>());
  out.policy_params.keep_fraction = doc.value("keep_fraction", out.policy_params.keep_fraction);
  if (doc.contains("epsilon")) {
    out.policy_params.epsilon = parse_epsilon(doc.at("epsilon"), out.policy_params.epsilon, "run.epsilon");
  }
  if (doc.contains("telescope")) {
    out.policy_params.telescope = parse_telescope(doc.at("telescope"), "run.telescope");
  }
  out.ablate_reward = doc.value("ablate_reward", out.ablate_reward);
  out.ablate_observation = doc.value("ablate_observation", out.ablate_observation);
  out.broadcast_rewards = doc.value("broadcast_rewards", out.broadcast_rewards);
  if (doc.contains("learner")) out.learner = parse_learner(doc.at("learner"), "run.learner");
  if (doc.contains("dqn")) out.dqn = parse_dqn(doc.at("dqn"), "run.dqn");
  out.checkpoint_every = doc.value("checkpoint_every", out.checkpoint_every);
  out.seed = doc.value("seed", out.seed);
  return out;
}

ScorerConfig parse_scorer_config(const nlohmann::json& doc) {
  reject_unknown_keys(doc, {"learner", "train_steps", "finetune_steps", "batch_size", "seed"},
                      "scorer");
  ScorerConfig out;
  if (doc.contains("learner")) out.learner = parse_learner(doc.at("learner"), "scorer.learner");
  out.train_steps = doc.value("train_steps", out.train_steps);
  out.finetune_steps = doc.value("finetune_steps", out.finetune_steps);
  out.batch_size = doc.value("batch_size", out.batch_size);
  out.seed = doc.value("seed", out.seed);
  return out;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  reject_unknown_keys(doc, {"run", "corpus", "scores", "dev", "out_dir", "label", "seeds"},
                      "experiment");
  ExperimentConfig out;
  if (doc.contains("run")) out.run = parse_run_config(doc.at("run"));
  out.corpus_path = doc.value("corpus", out.corpus_path);
  out.scores_path = doc.value("scores", out.scores_path);
  out.dev_path = doc.value("dev", out.dev_path);
  out.out_dir = doc.value("out_dir", out.out_dir);
  out.label = doc.value("label", out.label);
  if (doc.contains("seeds")) out.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  if (out.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  return out;
}

nlohmann::json to_json(const RunConfig& config) {
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
  j["policy"] = to_string(config.policy);
  j["keep_fraction"] = config.policy_params.keep_fraction;
  j["epsilon"] = {{"warmup_steps", config.policy_params.epsilon.warmup_steps},
                  {"decay_steps", config.policy_params.epsilon.decay_steps},
                  {"floor", config.policy_params.epsilon.floor}};
  if (!config.policy_params.telescope.milestones.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : config.policy_params.telescope.milestones) {
      arr.push_back({{"step", m.step}, {"active_bins", m.active_bins}});
    }
    j["telescope"] = arr;
  }
  j["ablate_reward"] = config.ablate_reward;
  j["ablate_observation"] = config.ablate_observation;
  j["broadcast_rewards"] = config.broadcast_rewards;
  j["learner"] = {{"vocab_size", config.learner.vocab_size},
                  {"embed_dim", config.learner.embed_dim},
                  {"head_hidden", config.learner.head_hidden},
                  {"optimizer",
                   {{"learning_rate", config.learner.optimizer.learning_rate},
                    {"decay", config.learner.optimizer.decay},
                    {"epsilon_stab", config.learner.optimizer.epsilon_stab}}}};
  j["dqn"] = {{"gamma", config.dqn.gamma},
              {"update_horizon", config.dqn.update_horizon},
              {"min_replay", config.dqn.min_replay},
              {"update_period", config.dqn.update_period},
              {"target_update_period", config.dqn.target_update_period},
              {"batch_size", config.dqn.batch_size},
              {"q_hidden_dims", config.dqn.q_hidden_dims},
              {"replay_capacity", config.dqn.replay_capacity},
              {"stack_size", config.dqn.stack_size},
              {"optimizer",
               {{"learning_rate", config.dqn.optimizer.learning_rate},
                {"decay", config.dqn.optimizer.decay},
                {"epsilon_stab", config.dqn.optimizer.epsilon_stab}}}};
  j["checkpoint_every"] = config.checkpoint_every;
  j["seed"] = config.seed;
  return j;
}

nlohmann::json to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["run"] = to_json(config.run);
  j["corpus"] = config.corpus_path;
  if (!config.scores_path.empty()) j["scores"] = config.scores_path;
  j["dev"] = config.dev_path;
  j["out_dir"] = config.out_dir;
  if (!config.label.empty()) j["label"] = config.label;
  j["seeds"] = config.seeds;
  return j;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("config: cannot open: " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad json in " + path + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

}  // namespace curriq
