#include "curriq/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "curriq/errors.hpp"

namespace curriq {

namespace {

std::vector<int> head_dims(const LearnerConfig& config) {
  std::vector<int> dims;
  dims.push_back(config.embed_dim);
  dims.insert(dims.end(), config.head_hidden.begin(), config.head_hidden.end());
  dims.push_back(config.vocab_size);
  return dims;
}

}  // namespace

Learner::Learner(const LearnerConfig& config, std::uint64_t seed) : config_(config) {
  if (config.vocab_size <= 0) throw ConfigError("learner: vocab_size must be positive");
  if (config.embed_dim <= 0) throw ConfigError("learner: embed_dim must be positive");
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / (config.vocab_size + config.embed_dim));
  embedding_.resize(static_cast<std::size_t>(config.vocab_size) * config.embed_dim);
  for (double& v : embedding_) v = rng.uniform(-limit, limit);
  head_ = make_mlp(head_dims(config), rng);
  embed_acc_.assign(embedding_.size(), 0.0);
  head_opt_ = make_rmsprop(config.optimizer, head_);
}

std::span<const double> Learner::embedding_row(int token) const {
  if (token < 0 || token >= config_.vocab_size) {
    throw DataError("learner: token id " + std::to_string(token) + " out of range");
  }
  return {embedding_.data() + static_cast<std::size_t>(token) * config_.embed_dim,
          static_cast<std::size_t>(config_.embed_dim)};
}

double Learner::train_step(std::span<const SentencePair> batch) {
  if (batch.empty()) throw DataError("train_step: empty batch");

  MlpGrads head_grads = zero_grads(head_);
  std::vector<double> embed_grads(embedding_.size(), 0.0);

  std::size_t total_tokens = 0;
  for (const SentencePair& p : batch) {
    total_tokens += std::min(p.source.size(), p.target.size());
  }
  if (total_tokens == 0) throw DataError("train_step: batch has no aligned tokens");
  const double scale = 1.0 / static_cast<double>(total_tokens);

  double loss_sum = 0.0;
  MlpTrace trace;
  for (const SentencePair& p : batch) {
    const std::size_t len = std::min(p.source.size(), p.target.size());
    for (std::size_t i = 0; i < len; ++i) {
      const int src = p.source[i];
      const int tgt = p.target[i];
      if (tgt < 0 || tgt >= config_.vocab_size) {
        throw DataError("learner: token id " + std::to_string(tgt) + " out of range");
      }
      mlp_forward_trace(head_, embedding_row(src), trace);
      SoftmaxXent xent = softmax_xent(trace.acts.back(), tgt);
      loss_sum += xent.loss;
      for (double& g : xent.logit_grads) g *= scale;
      const std::vector<double> input_grad =
          mlp_backward_trace(head_, trace, xent.logit_grads, head_grads);
      double* erow = embed_grads.data() + static_cast<std::size_t>(src) * config_.embed_dim;
      for (int d = 0; d < config_.embed_dim; ++d) erow[d] += input_grad[static_cast<std::size_t>(d)];
    }
  }

  rmsprop_step(head_opt_, head_, head_grads);
  rmsprop_apply(config_.optimizer, embed_acc_, embedding_, embed_grads);
  ++step_count_;
  return loss_sum * scale;
}

double Learner::pair_log_likelihood(const SentencePair& pair, MlpTrace& scratch) const {
  const std::size_t len = std::min(pair.source.size(), pair.target.size());
  if (len == 0) throw DataError("learner: pair with no aligned tokens");
  double sum = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const int tgt = pair.target[i];
    if (tgt < 0 || tgt >= config_.vocab_size) {
      throw DataError("learner: token id " + std::to_string(tgt) + " out of range");
    }
    mlp_forward_trace(head_, embedding_row(pair.source[i]), scratch);
    sum += token_log_prob(scratch.acts.back(), tgt);
  }
  return sum / static_cast<double>(len);
}

std::vector<double> Learner::sentence_log_likelihoods(std::span<const SentencePair> batch) const {
  if (batch.empty()) throw DataError("sentence_log_likelihoods: empty batch");
  std::vector<double> lls;
  lls.reserve(batch.size());
  MlpTrace scratch;
  for (const SentencePair& p : batch) lls.push_back(pair_log_likelihood(p, scratch));
  return lls;
}

double Learner::dev_log_likelihood(const DevSet& dev) const {
  if (dev.pairs.empty()) throw DataError("dev_log_likelihood: empty dev set");
  const std::vector<double> lls = sentence_log_likelihoods(dev.pairs);
  double sum = 0.0;
  for (double v : lls) sum += v;
  return sum / static_cast<double>(lls.size());
}

std::uint64_t Learner::param_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](const std::vector<double>& tensor) {
    for (double v : tensor) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFF;
        h *= 1099511628211ULL;
      }
    }
  };
  mix(embedding_);
  for (const auto& w : head_.weights) mix(w);
  for (const auto& b : head_.biases) mix(b);
  return h;
}

void Learner::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "curriq-ckpt-v1";
  header["layer_dims"] = head_.layer_dims;
  header["embedding_shape"] = {config_.vocab_size, config_.embed_dim};
  std::vector<std::size_t> sizes{embedding_.size()};
  std::vector<const std::vector<double>*> tensors{&embedding_};
  for (std::size_t l = 0; l < head_.weights.size(); ++l) {
    sizes.push_back(head_.weights[l].size());
    tensors.push_back(&head_.weights[l]);
    sizes.push_back(head_.biases[l].size());
    tensors.push_back(&head_.biases[l]);
  }
  header["tensor_sizes"] = sizes;
  save_tensors(path, header.dump(), tensors);

  nlohmann::json sidecar;
  sidecar["step_count"] = step_count_;
  sidecar["config"] = {{"vocab_size", config_.vocab_size},
                       {"embed_dim", config_.embed_dim},
                       {"head_hidden", config_.head_hidden},
                       {"optimizer",
                        {{"learning_rate", config_.optimizer.learning_rate},
                         {"decay", config_.optimizer.decay},
                         {"epsilon_stab", config_.optimizer.epsilon_stab}}}};
  std::ofstream os(path + ".json");
  if (!os) throw DataError("learner checkpoint: cannot write sidecar for " + path);
  os << sidecar.dump(2) << '\n';
}

Learner Learner::load(const std::string& path) {
  std::ifstream sidecar_in(path + ".json");
  if (!sidecar_in) throw DataError("learner checkpoint: missing sidecar for " + path);
  nlohmann::json sidecar;
  sidecar_in >> sidecar;

  LearnerConfig config;
  const nlohmann::json& c = sidecar.at("config");
  config.vocab_size = c.at("vocab_size").get<int>();
  config.embed_dim = c.at("embed_dim").get<int>();
  config.head_hidden = c.at("head_hidden").get<std::vector<int>>();
  config.optimizer.learning_rate = c.at("optimizer").at("learning_rate").get<double>();
  config.optimizer.decay = c.at("optimizer").at("decay").get<double>();
  config.optimizer.epsilon_stab = c.at("optimizer").at("epsilon_stab").get<double>();

  Learner learner(config, /*seed=*/0);
  LoadedTensors loaded = load_tensors(path);
  const std::size_t expected = 1 + 2 * learner.head_.weights.size();
  if (loaded.tensors.size() != expected) throw DataError("learner checkpoint: tensor count mismatch");
  if (loaded.tensors[0].size() != learner.embedding_.size()) {
    throw DataError("learner checkpoint: embedding size mismatch");
  }
  learner.embedding_ = std::move(loaded.tensors[0]);
  for (std::size_t l = 0; l < learner.head_.weights.size(); ++l) {
    if (loaded.tensors[1 + 2 * l].size() != learner.head_.weights[l].size() ||
        loaded.tensors[2 + 2 * l].size() != learner.head_.biases[l].size()) {
      throw DataError("learner checkpoint: head shape mismatch");
    }
    learner.head_.weights[l] = std::move(loaded.tensors[1 + 2 * l]);
    learner.head_.biases[l] = std::move(loaded.tensors[2 + 2 * l]);
  }
  learner.step_count_ = sidecar.at("step_count").get<long>();
  return learner;
}

}  // namespace curriq
