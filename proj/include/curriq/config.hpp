#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "curriq/orchestrator.hpp"
#include "curriq/scoring.hpp"

namespace curriq {

// One experiment = one declarative document. CLI flags override config keys.
struct ExperimentConfig {
  RunConfig run;               // seed is overwritten per sweep entry
  std::string corpus_path;
  std::string scores_path;     // optional; corpus may carry inline scores
  std::string dev_path;
  std::string out_dir = "out";
  std::string label;           // defaults to the policy name
  std::vector<std::uint64_t> seeds = {1, 2};
};

// Strict parsers: unknown keys are rejected so typos cannot silently fall
// back to defaults.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
RunConfig parse_run_config(const nlohmann::json& doc);
ScorerConfig parse_scorer_config(const nlohmann::json& doc);

nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);

ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace curriq
