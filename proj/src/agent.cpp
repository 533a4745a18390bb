#include "curriq/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "curriq/errors.hpp"

namespace curriq {

double epsilon_at(const EpsilonSchedule& schedule, long agent_step) {
  if (agent_step < 0) throw ConfigError("epsilon_at: negative step");
  if (schedule.warmup_steps < 0 || schedule.decay_steps < 0) {
    throw ConfigError("epsilon_at: schedule has unresolved negative phases");
  }
  if (!(schedule.floor >= 0.0 && schedule.floor <= 1.0)) {
    throw ConfigError("epsilon_at: floor outside [0,1]");
  }
  if (agent_step < schedule.warmup_steps) return 1.0;
  const long into_decay = agent_step - schedule.warmup_steps;
  if (schedule.decay_steps <= 0 || into_decay >= schedule.decay_steps) return schedule.floor;
  const double t = static_cast<double>(into_decay) / static_cast<double>(schedule.decay_steps);
  return 1.0 + (schedule.floor - 1.0) * t;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer: capacity must be positive");
}

void ReplayBuffer::add(Transition t) {
  entries_.push_back(std::move(t));
  ++total_added_;
  if (entries_.size() > capacity_) entries_.pop_front();
}

void ReplayBuffer::mark_newest_terminal() {
  if (!entries_.empty()) entries_.back().terminal = true;
}

void validate(const DqnConfig& config) {
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0)) throw ConfigError("dqn: gamma outside [0,1]");
  if (config.update_horizon < 1) throw ConfigError("dqn: update_horizon must be >= 1");
  if (config.batch_size < 1) throw ConfigError("dqn: batch_size must be >= 1");
  if (config.update_period < 1) throw ConfigError("dqn: update_period must be >= 1");
  if (config.target_update_period < 1) throw ConfigError("dqn: target_update_period must be >= 1");
  if (config.min_replay < config.update_horizon) {
    throw ConfigError("dqn: min_replay must cover at least one update horizon");
  }
  if (config.stack_size < 1) throw ConfigError("dqn: stack_size must be >= 1");
}

double n_step_target(std::span<const Transition* const> window, const Mlp& target_net,
                     double gamma) {
  if (window.empty()) throw InternalError("n_step_target: empty window");
  double total = 0.0;
  double discount = 1.0;
  for (std::size_t k = 0; k < window.size(); ++k) {
    if (k > 0 && window[k - 1]->terminal) {
      throw InternalError("n_step_target: window crosses a terminal");
    }
    total += discount * window[k]->reward;
    discount *= gamma;
  }
  const Transition& last = *window.back();
  if (!last.terminal) {
    const std::vector<double> q = mlp_forward(target_net, last.next_observation);
    total += discount * *std::max_element(q.begin(), q.end());
  }
  return total;
}

double n_step_target(std::span<const Transition> window, const Mlp& target_net, double gamma) {
  std::vector<const Transition*> ptrs;
  ptrs.reserve(window.size());
  for (const Transition& t : window) ptrs.push_back(&t);
  return n_step_target(std::span<const Transition* const>(ptrs), target_net, gamma);
}

DqnAgent::DqnAgent(int observation_dim, int num_actions, const DqnConfig& config,
                   std::uint64_t seed)
    : config_(config), rng_(derive_seed(seed, 21)) {
  validate(config);
  if (observation_dim < 1) throw ConfigError("dqn: observation_dim must be >= 1");
  if (num_actions < 1) throw ConfigError("dqn: num_actions must be >= 1");
  std::vector<int> dims;
  dims.push_back(observation_dim);
  dims.insert(dims.end(), config.q_hidden_dims.begin(), config.q_hidden_dims.end());
  dims.push_back(num_actions);
  Rng init_rng(derive_seed(seed, 22));
  online_ = make_mlp(dims, init_rng);
  target_ = online_;  // target starts as a copy of the online net
  optimizer_ = make_rmsprop(config.optimizer, online_);
}

int DqnAgent::select_action(std::span<const double> observation, double epsilon) {
  if (static_cast<int>(observation.size()) != online_.input_dim()) {
    throw ShapeError("select_action: observation length does not match Q-net input");
  }
  if (rng_.next_double() < epsilon) {
    return rng_.below_int(num_actions());
  }
  const std::vector<double> q = mlp_forward(online_, observation);
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a) {
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

std::optional<double> DqnAgent::train_q_step(const ReplayBuffer& replay) {
  const std::size_t n = replay.size();
  const std::size_t horizon = static_cast<std::size_t>(config_.update_horizon);
  if (n < static_cast<std::size_t>(config_.min_replay) || n < horizon) {
    return std::nullopt;
  }

  MlpGrads grads = zero_grads(online_);
  MlpTrace trace;
  double loss_sum = 0.0;
  const double grad_scale = 1.0 / static_cast<double>(config_.batch_size);
  std::vector<const Transition*> window;
  for (int b = 0; b < config_.batch_size; ++b) {
    const std::size_t start = rng_.below(n - horizon + 1);
    window.clear();
    for (std::size_t k = 0; k < horizon; ++k) {
      window.push_back(&replay.at(start + k));
      if (window.back()->terminal) break;
    }
    const double target =
        n_step_target(std::span<const Transition* const>(window), target_, config_.gamma);

    const Transition& head = *window.front();
    mlp_forward_trace(online_, head.observation, trace);
    const double predicted = trace.acts.back()[static_cast<std::size_t>(head.action)];
    const double err = predicted - target;
    loss_sum += err * err;

    std::vector<double> out_grad(static_cast<std::size_t>(num_actions()), 0.0);
    out_grad[static_cast<std::size_t>(head.action)] = 2.0 * err * grad_scale;
    mlp_backward_trace(online_, trace, out_grad, grads);
  }

  rmsprop_step(optimizer_, online_, grads);
  ++trained_steps_;
  return loss_sum * grad_scale;
}

void DqnAgent::sync_target() { target_ = online_; }

void DqnAgent::save(const std::string& prefix, long agent_step, const ReplayBuffer* replay) const {
  save_mlp(prefix + ".online.ckpt", online_);
  save_mlp(prefix + ".target.ckpt", target_);
  nlohmann::json sidecar;
  sidecar["agent_step"] = agent_step;
  sidecar["trained_steps"] = trained_steps_;
  sidecar["config"] = {{"gamma", config_.gamma},
                       {"update_horizon", config_.update_horizon},
                       {"min_replay", config_.min_replay},
                       {"update_period", config_.update_period},
                       {"target_update_period", config_.target_update_period},
                       {"batch_size", config_.batch_size},
                       {"q_hidden_dims", config_.q_hidden_dims},
                       {"replay_capacity", config_.replay_capacity},
                       {"stack_size", config_.stack_size},
                       {"optimizer",
                        {{"learning_rate", config_.optimizer.learning_rate},
                         {"decay", config_.optimizer.decay},
                         {"epsilon_stab", config_.optimizer.epsilon_stab}}}};
  if (replay != nullptr) {
    sidecar["replay"] = {{"size", replay->size()}, {"total_added", replay->total_added()}};
  }
  std::ofstream os(prefix + ".json");
  if (!os) throw DataError("agent checkpoint: cannot write sidecar: " + prefix + ".json");
  os << sidecar.dump(2) << '\n';
}

LoadedAgent DqnAgent::load(const std::string& prefix, std::uint64_t seed) {
  std::ifstream is(prefix + ".json");
  if (!is) throw DataError("agent checkpoint: missing sidecar: " + prefix + ".json");
  nlohmann::json sidecar;
  is >> sidecar;
  const nlohmann::json& c = sidecar.at("config");
  DqnConfig config;
  config.gamma = c.at("gamma").get<double>();
  config.update_horizon = c.at("update_horizon").get<int>();
  config.min_replay = c.at("min_replay").get<int>();
  config.update_period = c.at("update_period").get<int>();
  config.target_update_period = c.at("target_update_period").get<int>();
  config.batch_size = c.at("batch_size").get<int>();
  config.q_hidden_dims = c.at("q_hidden_dims").get<std::vector<int>>();
  config.replay_capacity = c.at("replay_capacity").get<std::size_t>();
  config.stack_size = c.at("stack_size").get<int>();
  config.optimizer.learning_rate = c.at("optimizer").at("learning_rate").get<double>();
  config.optimizer.decay = c.at("optimizer").at("decay").get<double>();
  config.optimizer.epsilon_stab = c.at("optimizer").at("epsilon_stab").get<double>();

  Mlp online = load_mlp(prefix + ".online.ckpt");
  LoadedAgent out{DqnAgent(online.input_dim(), online.output_dim(), config, seed),
                  sidecar.at("agent_step").get<long>()};
  out.agent.online_ = std::move(online);
  out.agent.target_ = load_mlp(prefix + ".target.ckpt");
  out.agent.trained_steps_ = sidecar.value("trained_steps", 0L);
  return out;
}

}  // namespace curriq
