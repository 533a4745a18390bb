#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "curriq/cli.hpp"
#include "curriq/errors.hpp"

namespace {

int dispatch(int argc, char** argv) {
  CLI::App app{"curriq: learn a noise-bin training curriculum with deep Q-learning"};
  app.require_subcommand(1);

  curriq::GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic scored-noise corpus");
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--pairs", gen.n_pairs, "number of training pairs");
  gen_cmd->add_option("--vocab", gen.vocab_size, "vocabulary size");
  gen_cmd->add_option("--len-min", gen.seq_len_min, "minimum sentence length");
  gen_cmd->add_option("--len-max", gen.seq_len_max, "maximum sentence length");
  gen_cmd->add_option("--noise", gen.noise_levels, "corruption rates, comma separated")
      ->delimiter(',');
  gen_cmd->add_option("--dev", gen.n_dev, "number of clean dev pairs");
  gen_cmd->add_option("--trusted", gen.n_trusted, "size of the trusted subset");
  gen_cmd->add_option("--bins-preview", gen.bins_preview, "print bin sizes for this bin count");
  gen_cmd->add_option("--seed", gen.seed, "root seed");
  gen_cmd->add_flag("--force", gen.force, "overwrite existing output");

  curriq::ScoreOptions score;
  CLI::App* score_cmd = app.add_subcommand("score", "compute quality scores for a corpus");
  score_cmd->add_option("--corpus", score.corpus_path, "corpus TSV")->required();
  score_cmd->add_option("--trusted", score.trusted_path, "trusted id list");
  score_cmd->add_option("--out", score.out_path, "score cache TSV")->required();
  score_cmd->add_option("--steps", score.scorer.train_steps, "scorer training steps");
  score_cmd->add_option("--ft-steps", score.scorer.finetune_steps, "fine-tune steps");
  score_cmd->add_option("--batch", score.scorer.batch_size, "scorer batch size");
  score_cmd->add_option("--seed", score.scorer.seed, "scorer seed");

  curriq::TrainOptions train;
  std::string train_policy;
  std::string train_corpus, train_scores, train_dev, train_out, train_label;
  int train_seeds = 0;
  std::uint64_t train_seed_base = 0;
  long train_steps = 0;
  double train_keep = 0.0;
  CLI::App* train_cmd = app.add_subcommand("train", "run a curriculum experiment sweep");
  train_cmd->add_option("--config", train.config_path, "experiment config JSON");
  auto* opt_corpus = train_cmd->add_option("--corpus", train_corpus, "corpus TSV");
  auto* opt_scores = train_cmd->add_option("--scores", train_scores, "score cache TSV");
  auto* opt_dev = train_cmd->add_option("--dev", train_dev, "dev corpus TSV");
  auto* opt_out = train_cmd->add_option("--out", train_out, "output directory");
  auto* opt_label = train_cmd->add_option("--label", train_label, "run label");
  auto* opt_policy = train_cmd->add_option("--policy", train_policy, "curriculum policy kind");
  auto* opt_seeds = train_cmd->add_option("--seeds", train_seeds, "number of seeds in the sweep");
  auto* opt_base = train_cmd->add_option("--seed-base", train_seed_base, "first seed of the sweep");
  auto* opt_steps = train_cmd->add_option("--steps", train_steps, "total trainee steps");
  auto* opt_keep = train_cmd->add_option("--keep", train_keep, "keep fraction for filtered policy");
  train_cmd->add_flag("--ablate-reward", train.ablate_reward, "use the static cleanest-bin reward");
  train_cmd->add_flag("--ablate-observation", train.ablate_observation,
                      "use the static all-ones observation");

  curriq::ReportOptions report;
  CLI::App* report_cmd = app.add_subcommand("report", "aggregate run reports into a table");
  report_cmd->add_option("--dir", report.dir, "directory scanned for report.json files");
  report_cmd->add_option("--reports", report.report_paths, "explicit report.json paths");
  report_cmd->add_option("--policies", report.policies, "row labels; absent runs print '-'")
      ->delimiter(',');
  report_cmd->add_flag("--csv", report.csv, "emit CSV instead of the aligned table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // 0 on --help, 1 on any usage problem
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (gen_cmd->parsed()) return curriq::cmd_gen(gen);
  if (score_cmd->parsed()) return curriq::cmd_score(score);
  if (train_cmd->parsed()) {
    if (opt_corpus->count()) train.corpus_path = train_corpus;
    if (opt_scores->count()) train.scores_path = train_scores;
    if (opt_dev->count()) train.dev_path = train_dev;
    if (opt_out->count()) train.out_dir = train_out;
    if (opt_label->count()) train.label = train_label;
    if (opt_policy->count()) train.policy = train_policy;
    if (opt_seeds->count()) train.num_seeds = train_seeds;
    if (opt_base->count()) train.seed_base = train_seed_base;
    if (opt_steps->count()) train.total_steps = train_steps;
    if (opt_keep->count()) train.keep_fraction = train_keep;
    return curriq::cmd_train(train);
  }
  if (report_cmd->parsed()) return curriq::cmd_report(report);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const curriq::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const curriq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
