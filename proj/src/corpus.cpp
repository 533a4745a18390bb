#include "curriq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "curriq/errors.hpp"

namespace curriq {

std::vector<int> synthetic_permutation(int vocab_size, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(vocab_size));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 0));
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<SentencePair> generate_synthetic_corpus(const SyntheticConfig& config) {
  if (config.vocab_size <= 0) throw ConfigError("synthetic corpus: vocab_size must be positive");
  if (config.noise_levels.empty()) throw ConfigError("synthetic corpus: no noise levels given");
  if (config.n_pairs < static_cast<std::int64_t>(config.noise_levels.size())) {
    throw ConfigError("synthetic corpus: n_pairs must be >= number of noise levels");
  }
  if (config.seq_len_min < 1 || config.seq_len_max < config.seq_len_min) {
    throw ConfigError("synthetic corpus: bad sequence length range");
  }
  for (double rate : config.noise_levels) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("synthetic corpus: rate outside [0,1]");
  }
  if (config.content_stream < 1) throw ConfigError("synthetic corpus: content_stream must be >= 1");

  const std::vector<int> perm = synthetic_permutation(config.vocab_size, config.seed);
  Rng rng(derive_seed(config.seed, config.content_stream));
  const std::uint64_t vocab = static_cast<std::uint64_t>(config.vocab_size);
  const std::uint64_t len_span =
      static_cast<std::uint64_t>(config.seq_len_max - config.seq_len_min + 1);

  std::vector<SentencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(config.n_pairs));
  for (std::int64_t i = 0; i < config.n_pairs; ++i) {
    const double rate = config.noise_levels[static_cast<std::size_t>(i) % config.noise_levels.size()];
    SentencePair p;
    p.id = config.first_id + i;
    p.noise_truth = rate;
    const int len = config.seq_len_min + static_cast<int>(rng.below(len_span));
    p.source.resize(static_cast<std::size_t>(len));
    p.target.resize(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) {
      const int tok = static_cast<int>(rng.below(vocab));
      p.source[static_cast<std::size_t>(t)] = tok;
      int out = perm[static_cast<std::size_t>(tok)];
      if (rate > 0.0 && rng.next_double() < rate) {
        out = static_cast<int>(rng.below(vocab));
      }
      p.target[static_cast<std::size_t>(t)] = out;
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<std::size_t> BinnedCorpus::bin_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(bins.size());
  for (const auto& b : bins) sizes.push_back(b.size());
  return sizes;
}

BinnedCorpus bin_corpus(const std::vector<SentencePair>& scored_pairs, int num_bins) {
  if (num_bins < 2) throw ConfigError("bin_corpus: need at least 2 bins");
  if (scored_pairs.size() < static_cast<std::size_t>(num_bins)) {
    throw ConfigError("bin_corpus: corpus smaller than bin count");
  }
  std::vector<std::pair<double, std::int64_t>> order;
  order.reserve(scored_pairs.size());
  for (const SentencePair& p : scored_pairs) {
    if (!p.score) throw DataError("bin_corpus: pair " + std::to_string(p.id) + " has no score");
    order.emplace_back(*p.score, p.id);
  }
  std::sort(order.begin(), order.end());

  BinnedCorpus out;
  out.scores.reserve(order.size());
  for (const auto& [score, id] : order) out.scores.emplace(id, score);

  const std::size_t n = order.size();
  const std::size_t base = n / static_cast<std::size_t>(num_bins);
  const std::size_t remainder = n % static_cast<std::size_t>(num_bins);
  std::size_t pos = 0;
  for (int b = 0; b < num_bins; ++b) {
    // remainder rows go to the earliest (noisiest) bins
    const std::size_t size = base + (static_cast<std::size_t>(b) < remainder ? 1 : 0);
    std::vector<std::int64_t> bin;
    bin.reserve(size);
    for (std::size_t k = 0; k < size; ++k) bin.push_back(order[pos++].second);
    out.bins.push_back(std::move(bin));
  }
  return out;
}

std::vector<std::int64_t> PrototypeBatch::flattened() const {
  std::vector<std::int64_t> flat;
  for (const auto& bin : per_bin) flat.insert(flat.end(), bin.begin(), bin.end());
  return flat;
}

PrototypeBatch prototype_batch(const BinnedCorpus& binned, int per_bin_count) {
  if (per_bin_count < 1) throw ConfigError("prototype_batch: need at least one pair per bin");
  PrototypeBatch out;
  for (const auto& bin : binned.bins) {
    if (bin.size() < static_cast<std::size_t>(per_bin_count)) {
      throw ConfigError("prototype_batch: bin smaller than requested prototype count");
    }
    double mean = 0.0;
    for (std::int64_t id : bin) mean += binned.scores.at(id);
    mean /= static_cast<double>(bin.size());

    std::vector<std::pair<double, std::int64_t>> by_dist;
    by_dist.reserve(bin.size());
    for (std::int64_t id : bin) {
      by_dist.emplace_back(std::abs(binned.scores.at(id) - mean), id);
    }
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<std::int64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(per_bin_count));
    for (int k = 0; k < per_bin_count; ++k) chosen.push_back(by_dist[static_cast<std::size_t>(k)].second);
    out.per_bin.push_back(std::move(chosen));
  }
  return out;
}

CorpusView::CorpusView(const std::vector<SentencePair>& pairs) : pairs_(&pairs) {
  index_.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!index_.emplace(pairs[i].id, i).second) {
      throw DataError("corpus: duplicate pair id " + std::to_string(pairs[i].id));
    }
  }
}

const SentencePair& CorpusView::by_id(std::int64_t id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw DataError("corpus: unknown pair id " + std::to_string(id));
  return (*pairs_)[it->second];
}

std::vector<SentencePair> sample_minibatch(const BinnedCorpus& binned, const CorpusView& corpus,
                                           int bin_index, int batch_size, Rng& rng) {
  if (bin_index < 0 || bin_index >= binned.num_bins()) {
    throw ActionError("sample_minibatch: bin index " + std::to_string(bin_index) + " out of range");
  }
  const std::vector<std::int64_t>& bin = binned.bins[static_cast<std::size_t>(bin_index)];
  if (bin.empty()) throw DataError("sample_minibatch: empty bin");
  std::vector<SentencePair> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int k = 0; k < batch_size; ++k) {
    batch.push_back(corpus.by_id(bin[rng.below(bin.size())]));
  }
  return batch;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_tokens(const std::vector<int>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(tokens[i]);
  }
  return out;
}

std::vector<int> parse_tokens(const std::string& field, const std::string& path, std::size_t line_no) {
  std::vector<int> tokens;
  std::istringstream ss(field);
  std::string tok;
  while (ss >> tok) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad token '" + tok + "'");
    }
    tokens.push_back(v);
  }
  return tokens;
}

std::int64_t parse_id(const std::string& field, const std::string& path, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError(path + ":" + std::to_string(line_no) + ": bad id '" + field + "'");
  }
  return v;
}

double parse_double(const std::string& field, const std::string& path, std::size_t line_no) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(field, &consumed);
    if (consumed != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

void save_corpus_tsv(const std::string& path, const std::vector<SentencePair>& pairs) {
  std::ofstream os(path);
  if (!os) throw DataError("corpus tsv: cannot open for writing: " + path);
  for (const SentencePair& p : pairs) {
    os << p.id << '\t' << join_tokens(p.source) << '\t' << join_tokens(p.target);
    if (p.score || p.noise_truth) {
      os << '\t' << (p.score ? format_double(*p.score) : "");
      if (p.noise_truth) os << '\t' << format_double(*p.noise_truth);
    }
    os << '\n';
  }
  if (!os) throw DataError("corpus tsv: write failed: " + path);
}

std::vector<SentencePair> load_corpus_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("corpus tsv: cannot open: " + path);
  std::vector<SentencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 5) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 3-5 tab-separated fields");
    }
    SentencePair p;
    p.id = parse_id(fields[0], path, line_no);
    p.source = parse_tokens(fields[1], path, line_no);
    p.target = parse_tokens(fields[2], path, line_no);
    if (p.source.empty() || p.target.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty token sequence");
    }
    if (fields.size() >= 4 && !fields[3].empty()) p.score = parse_double(fields[3], path, line_no);
    if (fields.size() == 5 && !fields[4].empty()) p.noise_truth = parse_double(fields[4], path, line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_score_tsv(const std::string& path, const std::vector<SentencePair>& pairs) {
  std::ofstream os(path);
  if (!os) throw DataError("score tsv: cannot open for writing: " + path);
  for (const SentencePair& p : pairs) {
    if (!p.score) throw DataError("score tsv: pair " + std::to_string(p.id) + " has no score");
    os << p.id << '\t' << format_double(*p.score) << '\n';
  }
  if (!os) throw DataError("score tsv: write failed: " + path);
}

std::unordered_map<std::int64_t, double> load_score_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("score tsv: cannot open: " + path);
  std::unordered_map<std::int64_t, double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 2) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected id<TAB>score");
    }
    const std::int64_t id = parse_id(fields[0], path, line_no);
    scores[id] = parse_double(fields[1], path, line_no);
  }
  return scores;
}

void apply_scores(std::vector<SentencePair>& pairs,
                  const std::unordered_map<std::int64_t, double>& scores) {
  for (SentencePair& p : pairs) {
    const auto it = scores.find(p.id);
    if (it == scores.end()) {
      throw DataError("scores: no cached score for pair " + std::to_string(p.id));
    }
    p.score = it->second;
  }
}

}  // namespace curriq
