#pragma once

#include <cstdint>
#include <vector>

#include "curriq/corpus.hpp"
#include "curriq/learner.hpp"

namespace curriq {

struct ScorerConfig {
  LearnerConfig learner;      // vocab_size filled from the corpus when 0
  int train_steps = 800;      // steps for the noisy model, over the full corpus
  int finetune_steps = 300;   // extra steps on the trusted subset
  int batch_size = 16;
  std::uint64_t seed = 1;
};

// Quality score of one pair: log-likelihood under the trusted-fine-tuned
// model minus log-likelihood under the noisy-trained model. Both are
// per-token means, so scores are comparable across sentence lengths.
double cds_score(const SentencePair& pair, const Learner& trusted_model,
                 const Learner& noisy_model);

// Trains a scorer on the full corpus, fine-tunes a copy on the trusted
// subset, and fills every pair's score. Deterministic under seed.
std::vector<SentencePair> score_corpus(std::vector<SentencePair> corpus,
                                       const std::vector<std::int64_t>& trusted_ids,
                                       const ScorerConfig& config);

// AUC of the score as a clean-vs-noisy classifier, judged against
// noise_truth (clean = zero corruption rate). Pairs lacking noise_truth are
// skipped; returns NaN if either class is empty.
double clean_noisy_auc(const std::vector<SentencePair>& scored_pairs);

}  // namespace curriq
