#include "curriq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>

#include "curriq/errors.hpp"
#include "curriq/scoring.hpp"

namespace curriq {

namespace fs = std::filesystem;

int cmd_gen(const GenOptions& options) {
  if (options.out_dir.empty()) throw UsageError("gen: --out is required");
  fs::create_directories(options.out_dir);
  const std::string train_path = options.out_dir + "/train.tsv";
  const std::string dev_path = options.out_dir + "/dev.tsv";
  const std::string trusted_path = options.out_dir + "/trusted_ids.txt";
  if (!options.force && (fs::exists(train_path) || fs::exists(dev_path) || fs::exists(trusted_path))) {
    throw UsageError("gen: output exists in " + options.out_dir + "; pass --force to overwrite");
  }

  SyntheticConfig train_config;
  train_config.n_pairs = options.n_pairs;
  train_config.vocab_size = options.vocab_size;
  train_config.seq_len_min = options.seq_len_min;
  train_config.seq_len_max = options.seq_len_max;
  train_config.noise_levels = options.noise_levels;
  train_config.seed = options.seed;
  train_config.content_stream = 1;
  const std::vector<SentencePair> train = generate_synthetic_corpus(train_config);

  // Dev pairs are clean, share the train permutation (same seed, different
  // content stream) and take ids after the training block, so the two sets
  // can never collide.
  SyntheticConfig dev_config = train_config;
  dev_config.n_pairs = options.n_dev;
  dev_config.noise_levels = {0.0};
  dev_config.content_stream = 2;
  dev_config.first_id = options.n_pairs;
  const std::vector<SentencePair> dev = generate_synthetic_corpus(dev_config);

  // Trusted subset: the lowest-noise training pairs, ties to the lower id.
  if (options.n_trusted < 1 || options.n_trusted > options.n_pairs) {
    throw UsageError("gen: --trusted must be in [1, pairs]");
  }
  std::vector<std::pair<double, std::int64_t>> by_noise;
  by_noise.reserve(train.size());
  for (const SentencePair& p : train) by_noise.emplace_back(*p.noise_truth, p.id);
  std::sort(by_noise.begin(), by_noise.end());

  save_corpus_tsv(train_path, train);
  save_corpus_tsv(dev_path, dev);
  std::ofstream trusted_out(trusted_path);
  if (!trusted_out) throw DataError("gen: cannot write " + trusted_path);
  for (std::int64_t i = 0; i < options.n_trusted; ++i) {
    trusted_out << by_noise[static_cast<std::size_t>(i)].second << '\n';
  }

  std::map<double, std::int64_t> per_rate;
  for (const SentencePair& p : train) per_rate[*p.noise_truth] += 1;
  std::cout << "wrote " << train.size() << " training pairs to " << train_path << '\n';
  std::cout << "wrote " << dev.size() << " dev pairs to " << dev_path << '\n';
  std::cout << "wrote " << options.n_trusted << " trusted ids to " << trusted_path << '\n';
  std::cout << "pairs per corruption rate:";
  for (const auto& [rate, count] : per_rate) std::cout << ' ' << rate << ":" << count;
  std::cout << '\n';
  if (options.bins_preview > 1) {
    std::cout << "with " << options.bins_preview << " equal bins each bin holds ~"
              << train.size() / static_cast<std::size_t>(options.bins_preview) << " pairs\n";
  }
  return 0;
}

int cmd_score(const ScoreOptions& options) {
  if (options.corpus_path.empty() || options.out_path.empty()) {
    throw UsageError("score: --corpus and --out are required");
  }
  if (options.trusted_path.empty()) throw UsageError("score: --trusted is required");

  std::vector<SentencePair> corpus = load_corpus_tsv(options.corpus_path);
  std::vector<std::int64_t> trusted_ids;
  {
    std::ifstream is(options.trusted_path);
    if (!is) throw UsageError("score: cannot open trusted ids: " + options.trusted_path);
    std::int64_t id = 0;
    while (is >> id) trusted_ids.push_back(id);
  }
  if (trusted_ids.empty()) throw UsageError("score: trusted id list is empty");

  const std::vector<SentencePair> scored = score_corpus(std::move(corpus), trusted_ids, options.scorer);
  save_score_tsv(options.out_path, scored);
  std::cout << "scored " << scored.size() << " pairs -> " << options.out_path << '\n';

  const double auc = clean_noisy_auc(scored);
  if (!std::isnan(auc)) {
    std::printf("clean-vs-noisy AUC vs noise_truth: %.4f\n", auc);
  }
  return 0;
}

namespace {

std::string run_label(const RunConfig& config, const std::string& base_label) {
  std::string label = base_label.empty() ? to_string(config.policy) : base_label;
  if (config.ablate_reward) label += "+fixed_reward";
  if (config.ablate_observation) label += "+fixed_observation";
  return label;
}

}  // namespace

int cmd_train(const TrainOptions& options) {
  ExperimentConfig experiment;
  if (!options.config_path.empty()) {
    experiment = load_experiment_config(options.config_path);
  }
  // Flags take precedence over document keys.
  if (options.corpus_path) experiment.corpus_path = *options.corpus_path;
  if (options.scores_path) experiment.scores_path = *options.scores_path;
  if (options.dev_path) experiment.dev_path = *options.dev_path;
  if (options.out_dir) experiment.out_dir = *options.out_dir;
  if (options.label) experiment.label = *options.label;
  if (options.policy) experiment.run.policy = policy_kind_from_string(*options.policy);
  if (options.total_steps) experiment.run.total_steps = *options.total_steps;
  if (options.keep_fraction) experiment.run.policy_params.keep_fraction = *options.keep_fraction;
  if (options.ablate_reward) experiment.run.ablate_reward = true;
  if (options.ablate_observation) experiment.run.ablate_observation = true;
  if (options.num_seeds || options.seed_base) {
    const int count = options.num_seeds.value_or(static_cast<int>(experiment.seeds.size()));
    if (count < 1) throw UsageError("train: --seeds must be >= 1");
    const std::uint64_t base = options.seed_base.value_or(1);
    experiment.seeds.clear();
    for (int i = 0; i < count; ++i) experiment.seeds.push_back(base + static_cast<std::uint64_t>(i));
  }

  if (experiment.corpus_path.empty()) throw UsageError("train: no corpus given (--corpus or config)");
  if (experiment.dev_path.empty()) throw UsageError("train: no dev set given (--dev or config)");

  std::vector<SentencePair> train_pairs = load_corpus_tsv(experiment.corpus_path);
  if (!experiment.scores_path.empty()) {
    apply_scores(train_pairs, load_score_tsv(experiment.scores_path));
  }
  for (const SentencePair& p : train_pairs) {
    if (!p.score) {
      throw DataError("train: pair " + std::to_string(p.id) +
                      " has no score; run `score` first or pass --scores");
    }
  }
  const BinnedCorpus binned = bin_corpus(train_pairs, experiment.run.num_bins);
  DevSet dev;
  dev.pairs = load_corpus_tsv(experiment.dev_path);

  const std::string label = run_label(experiment.run, experiment.label);
  std::vector<RunReport> reports;
  for (const std::uint64_t seed : experiment.seeds) {
    RunConfig config = experiment.run;
    config.seed = seed;
    config.label = label;
    config.out_dir = experiment.out_dir + "/" + label + "/seed" + std::to_string(seed);
    const RunResult result = run_experiment(config, train_pairs, binned, dev);
    reports.push_back(result.report);
    std::printf("%s seed %llu: best_dev_ll=%.6f final_dev_ll=%.6f (%s)\n", label.c_str(),
                static_cast<unsigned long long>(seed), result.report.best_dev_ll,
                result.report.final_dev_ll, result.report.best_checkpoint.c_str());
  }
  const RunReport& best = select_best_run(reports);
  std::printf("best run: seed %llu with best_dev_ll=%.6f\n",
              static_cast<unsigned long long>(best.seed), best.best_dev_ll);
  save_report_json(experiment.out_dir + "/" + label + "/best.json", best);
  return 0;
}

int cmd_report(const ReportOptions& options) {
  std::vector<std::string> paths = options.report_paths;
  if (!options.dir.empty()) {
    if (!fs::exists(options.dir)) throw UsageError("report: no such directory: " + options.dir);
    for (const auto& entry : fs::recursive_directory_iterator(options.dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "report.json") {
        paths.push_back(entry.path().string());
      }
    }
    std::sort(paths.begin(), paths.end());
  }
  if (paths.empty()) throw UsageError("report: no run reports found");

  std::vector<RunReport> reports;
  for (const std::string& p : paths) reports.push_back(load_report_json(p));

  const std::string& hash = reports.front().config_hash;
  for (const RunReport& r : reports) {
    if (r.config_hash != hash) {
      throw UsageError("report: refusing to aggregate runs with different config hashes (" +
                       hash + " vs " + r.config_hash + ")");
    }
  }

  // Per label, keep the run with the best dev checkpoint across seeds.
  std::map<std::string, std::vector<RunReport>> by_label;
  for (const RunReport& r : reports) by_label[r.label].push_back(r);

  struct Row {
    std::string label;
    std::string best_dev = "-";
    std::string final_dev = "-";
    std::string seeds = "-";
    double sort_key = -std::numeric_limits<double>::infinity();
    bool present = false;
  };
  std::vector<Row> rows;
  const auto make_row = [&](const std::string& label) {
    Row row;
    row.label = label;
    const auto it = by_label.find(label);
    if (it != by_label.end()) {
      const RunReport& best = select_best_run(it->second);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", best.best_dev_ll);
      row.best_dev = buf;
      std::snprintf(buf, sizeof(buf), "%.6f", best.final_dev_ll);
      row.final_dev = buf;
      row.seeds = std::to_string(it->second.size());
      row.sort_key = best.final_dev_ll;
      row.present = true;
    }
    return row;
  };

  if (!options.policies.empty()) {
    for (const std::string& p : options.policies) rows.push_back(make_row(p));
  } else {
    for (const auto& [label, group] : by_label) rows.push_back(make_row(label));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.present != b.present) return a.present;
    return a.sort_key > b.sort_key;
  });

  if (options.csv) {
    std::printf("# config_hash=%s\n", hash.c_str());
    std::printf("policy,seeds,best_dev_ll,final_dev_ll\n");
    for (const Row& row : rows) {
      std::printf("%s,%s,%s,%s\n", row.label.c_str(), row.seeds.c_str(), row.best_dev.c_str(),
                  row.final_dev.c_str());
    }
  } else {
    std::printf("# config_hash=%s\n", hash.c_str());
    std::printf("%-36s %6s %14s %14s\n", "policy", "seeds", "best_dev_ll", "final_dev_ll");
    for (const Row& row : rows) {
      std::printf("%-36s %6s %14s %14s\n", row.label.c_str(), row.seeds.c_str(),
                  row.best_dev.c_str(), row.final_dev.c_str());
    }
  }
  return 0;
}

}  // namespace curriq
