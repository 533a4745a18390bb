#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "curriq/rng.hpp"

namespace curriq {

struct SentencePair {
  std::int64_t id = 0;
  std::vector<int> source;
  std::vector<int> target;
  std::optional<double> score;        // quality score, log-probability difference
  std::optional<double> noise_truth;  // synthetic corruption rate, evaluation only
};

struct SyntheticConfig {
  std::int64_t n_pairs = 0;
  int vocab_size = 0;
  int seq_len_min = 1;
  int seq_len_max = 1;
  std::vector<double> noise_levels;  // corruption rates in [0,1], assigned round-robin
  std::uint64_t seed = 1;
  std::int64_t first_id = 0;
  // Sentence stream within the seed. Streams share the permutation map, so a
  // dev split drawn from stream 2 evaluates the same transform the training
  // corpus (stream 1) teaches. Must be >= 1; stream 0 feeds the permutation.
  std::uint64_t content_stream = 1;
};

// Targets are a fixed token permutation of the source; each target token is
// then independently replaced by a uniform-random token with probability
// equal to the pair's corruption rate. Deterministic under seed.
std::vector<SentencePair> generate_synthetic_corpus(const SyntheticConfig& config);

// The permutation map used by generate_synthetic_corpus for a given seed.
std::vector<int> synthetic_permutation(int vocab_size, std::uint64_t seed);

// Equal-size partition ordered by score; bin 0 holds the lowest (noisiest)
// scores. Sizes differ by at most one, remainders go to the earliest bins.
struct BinnedCorpus {
  std::vector<std::vector<std::int64_t>> bins;
  std::unordered_map<std::int64_t, double> scores;

  int num_bins() const { return static_cast<int>(bins.size()); }
  std::vector<std::size_t> bin_sizes() const;
};

BinnedCorpus bin_corpus(const std::vector<SentencePair>& scored_pairs, int num_bins);

// Per bin, the m pair ids whose scores are closest to the bin's mean score,
// ties to the lower id. Flattened order: bin 0 first.
struct PrototypeBatch {
  std::vector<std::vector<std::int64_t>> per_bin;

  std::vector<std::int64_t> flattened() const;
  int per_bin_count() const { return per_bin.empty() ? 0 : static_cast<int>(per_bin[0].size()); }
};

PrototypeBatch prototype_batch(const BinnedCorpus& binned, int per_bin_count);

// Id-indexed view over a pair vector.
class CorpusView {
 public:
  explicit CorpusView(const std::vector<SentencePair>& pairs);

  const SentencePair& by_id(std::int64_t id) const;
  const std::vector<SentencePair>& pairs() const { return *pairs_; }
  std::size_t size() const { return pairs_->size(); }

 private:
  const std::vector<SentencePair>* pairs_;
  std::unordered_map<std::int64_t, std::size_t> index_;
};

// Uniform with replacement within the chosen bin.
std::vector<SentencePair> sample_minibatch(const BinnedCorpus& binned, const CorpusView& corpus,
                                           int bin_index, int batch_size, Rng& rng);

// TSV: id <TAB> source tokens <TAB> target tokens [<TAB> score [<TAB> noise_truth]]
// Token sequences are space-separated integers; empty optional columns stay empty.
void save_corpus_tsv(const std::string& path, const std::vector<SentencePair>& pairs);
std::vector<SentencePair> load_corpus_tsv(const std::string& path);

// Score cache TSV: id <TAB> score, full decimal precision.
void save_score_tsv(const std::string& path, const std::vector<SentencePair>& pairs);
std::unordered_map<std::int64_t, double> load_score_tsv(const std::string& path);

// Copies cached scores onto pairs; every pair id must be present in the cache.
void apply_scores(std::vector<SentencePair>& pairs,
                  const std::unordered_map<std::int64_t, double>& scores);

}  // namespace curriq
