#include "curriq/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "curriq/errors.hpp"
#include "curriq/rng.hpp"

namespace curriq {

double cds_score(const SentencePair& pair, const Learner& trusted_model,
                 const Learner& noisy_model) {
  const SentencePair batch[1] = {pair};
  const double ll_trusted = trusted_model.sentence_log_likelihoods(batch)[0];
  const double ll_noisy = noisy_model.sentence_log_likelihoods(batch)[0];
  return ll_trusted - ll_noisy;
}

std::vector<SentencePair> score_corpus(std::vector<SentencePair> corpus,
                                       const std::vector<std::int64_t>& trusted_ids,
                                       const ScorerConfig& config) {
  if (corpus.empty()) throw ConfigError("score_corpus: empty corpus");
  if (trusted_ids.empty()) throw ConfigError("score_corpus: empty trusted subset");

  const CorpusView view(corpus);
  std::vector<SentencePair> trusted;
  trusted.reserve(trusted_ids.size());
  for (std::int64_t id : trusted_ids) trusted.push_back(view.by_id(id));

  LearnerConfig learner_config = config.learner;
  if (learner_config.vocab_size == 0) {
    int max_token = 0;
    for (const SentencePair& p : corpus) {
      for (int t : p.source) max_token = std::max(max_token, t);
      for (int t : p.target) max_token = std::max(max_token, t);
    }
    learner_config.vocab_size = max_token + 1;
  }

  Learner noisy(learner_config, derive_seed(config.seed, 11));
  Rng sample_rng(derive_seed(config.seed, 12));
  std::vector<SentencePair> batch;
  for (int step = 0; step < config.train_steps; ++step) {
    batch.clear();
    for (int k = 0; k < config.batch_size; ++k) {
      batch.push_back(corpus[sample_rng.below(corpus.size())]);
    }
    noisy.train_step(batch);
  }

  Learner trusted_model = noisy;
  for (int step = 0; step < config.finetune_steps; ++step) {
    batch.clear();
    for (int k = 0; k < config.batch_size; ++k) {
      batch.push_back(trusted[sample_rng.below(trusted.size())]);
    }
    trusted_model.train_step(batch);
  }

  for (SentencePair& p : corpus) {
    p.score = cds_score(p, trusted_model, noisy);
  }
  return corpus;
}

double clean_noisy_auc(const std::vector<SentencePair>& scored_pairs) {
  // Mann-Whitney U with midranks: probability that a random clean pair
  // outscores a random noisy pair.
  std::vector<std::pair<double, bool>> ranked;  // (score, is_clean)
  for (const SentencePair& p : scored_pairs) {
    if (!p.noise_truth || !p.score) continue;
    ranked.emplace_back(*p.score, *p.noise_truth == 0.0);
  }
  std::size_t n_clean = 0;
  for (const auto& [score, clean] : ranked) n_clean += clean ? 1 : 0;
  const std::size_t n_noisy = ranked.size() - n_clean;
  if (n_clean == 0 || n_noisy == 0) return std::numeric_limits<double>::quiet_NaN();

  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_clean = 0.0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    std::size_t j = i;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (ranked[k].second) rank_sum_clean += midrank;
    }
    i = j;
  }
  const double u = rank_sum_clean - 0.5 * static_cast<double>(n_clean) * (n_clean + 1);
  return u / (static_cast<double>(n_clean) * static_cast<double>(n_noisy));
}

}  // namespace curriq
