#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curriq/config.hpp"

namespace curriq {

struct GenOptions {
  std::string out_dir;
  std::int64_t n_pairs = 6000;
  int vocab_size = 50;
  int seq_len_min = 6;
  int seq_len_max = 10;
  std::vector<double> noise_levels = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8};
  std::int64_t n_dev = 300;
  std::int64_t n_trusted = 200;
  int bins_preview = 0;
  std::uint64_t seed = 1;
  bool force = false;
};

// Writes train.tsv, dev.tsv and trusted_ids.txt into out_dir.
int cmd_gen(const GenOptions& options);

struct ScoreOptions {
  std::string corpus_path;
  std::string trusted_path;
  std::string out_path;
  ScorerConfig scorer;
};

// Runs the scorer and writes the score cache TSV; prints an AUC report when
// the corpus carries noise_truth.
int cmd_score(const ScoreOptions& options);

struct TrainOptions {
  std::string config_path;  // optional experiment document
  // Flag overrides; unset fields fall back to the document (or defaults).
  std::optional<std::string> corpus_path;
  std::optional<std::string> scores_path;
  std::optional<std::string> dev_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> label;
  std::optional<std::string> policy;
  std::optional<int> num_seeds;
  std::optional<std::uint64_t> seed_base;
  std::optional<long> total_steps;
  std::optional<double> keep_fraction;
  bool ablate_reward = false;
  bool ablate_observation = false;
};

// Runs the sweep, prints one line per run plus the best-seed summary.
int cmd_train(const TrainOptions& options);

struct ReportOptions {
  std::string dir;                     // scanned recursively for report.json
  std::vector<std::string> report_paths;
  std::vector<std::string> policies;   // optional explicit row set; missing -> "-"
  bool csv = false;
};

int cmd_report(const ReportOptions& options);

}  // namespace curriq
