#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "curriq/corpus.hpp"
#include "curriq/neural.hpp"

namespace curriq {

struct LearnerConfig {
  int vocab_size = 0;
  int embed_dim = 16;
  std::vector<int> head_hidden = {32};
  RmsPropConfig optimizer{0.01, 0.95, 1e-10};
};

struct DevSet {
  std::vector<SentencePair> pairs;
};

// The trainee: predicts each target token from the aligned source token's
// embedding through a small MLP head. Deliberately tiny, but its per-sentence
// likelihoods still separate clean from corrupted data, which is all the
// curriculum machinery needs from it.
class Learner {
 public:
  Learner(const LearnerConfig& config, std::uint64_t seed);

  // One RMSProp step on the mean per-token cross entropy over the batch.
  double train_step(std::span<const SentencePair> batch);

  // Per-pair mean per-token log-likelihood of the target. Read-only.
  std::vector<double> sentence_log_likelihoods(std::span<const SentencePair> batch) const;

  double dev_log_likelihood(const DevSet& dev) const;

  long step_count() const { return step_count_; }
  const LearnerConfig& config() const { return config_; }

  // FNV-1a over all parameter bytes; used to assert evaluations are pure.
  std::uint64_t param_hash() const;

  void save(const std::string& path) const;
  static Learner load(const std::string& path);

 private:
  double pair_log_likelihood(const SentencePair& pair, MlpTrace& scratch) const;
  std::span<const double> embedding_row(int token) const;

  LearnerConfig config_;
  std::vector<double> embedding_;  // vocab x embed_dim, row-major
  Mlp head_;
  std::vector<double> embed_acc_;
  RmsPropState head_opt_;
  long step_count_ = 0;
};

}  // namespace curriq
