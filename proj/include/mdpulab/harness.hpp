#pragma once

#include "mdpulab/crawler.hpp"
#include "mdpulab/io.hpp"
#include "mdpulab/urmax.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mdpulab {

/// URMAX settings shared by every learner cell of an experiment.
struct LearnerSettings {
  std::size_t planning_horizon = 8;
  double epsilon = 0.1;
  double delta = 0.1;
  std::optional<std::size_t> known_threshold;  ///< default_known_threshold when unset
  std::optional<std::uint64_t> explore_budget;  ///< default_explore_budget when unset
  Awareness awareness = Awareness::Global;
};

struct ExperimentConfig {
  std::string environment = "crawler";
  CrawlerConfig crawler;
  std::vector<std::string> methods;  ///< brute_force, random_probe, apprenticeship, random, repeat
  std::vector<std::size_t> levels;
  std::uint64_t budget = 10000;
  std::size_t checkpoints = 10;
  std::vector<std::uint64_t> seeds;
  double beta = 0.2;
  std::size_t evaluation_episodes = 0;  ///< 0 selects default_evaluation_episodes
  std::optional<double> evaluation_horizon;  ///< overrides crawler.episode_duration
  LearnerSettings learner;
  std::string output_dir;

  void validate() const;
};

CrawlerConfig crawler_config_from_json(const Json& doc);
Json crawler_config_to_json(const CrawlerConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& doc);

struct ResultRow {
  std::string method;
  std::size_t level = 0;
  std::uint64_t seed = 0;
  std::uint64_t n_states = 0;
  std::uint64_t n_basic_actions = 0;
  std::uint64_t n_potential_actions = 0;
  double time_step_ms = 0.0;
  double action_length_ms = 0.0;
  std::uint64_t budget_consumed = 0;
  double best_average_reward = 0.0;
  std::uint64_t useful_found = 0;
  std::uint64_t stable_gaits = 0;
  std::string status = "ok";

  bool operator==(const ResultRow&) const = default;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  static const std::vector<std::string>& columns();
  std::string to_csv() const;
  static ResultsTable from_csv(const std::string& text);
  /// Best row of (method, level) over seeds, or nullptr.
  const ResultRow* best(const std::string& method, std::size_t level) const;

  bool operator==(const ResultsTable&) const = default;
};

/// One row per (method, level): the best successful seed, in first-seen order.
ResultsTable aggregate(const ResultsTable& runs);

struct ExperimentResult {
  ResultsTable table;  ///< aggregate of runs
  ResultsTable runs;   ///< one row per (method, level, seed)
  std::vector<std::string> log;  ///< JSON lines
  std::string summary;
};

/// URMAX learner parameters for a crawler level under the given settings.
UrmaxParams crawler_params(CrawlerLevelEnv& env, const LearnerSettings& settings);

/// Runs one (method, level, seed) cell; failures are reported in the status.
ResultRow run_cell(const ExperimentConfig& config, const std::string& method, std::size_t level, std::uint64_t seed,
                   std::vector<std::string>* log = nullptr);

/// Runs the whole grid and writes results.csv, runs.csv, log.jsonl and
/// summary.txt when output_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string summarize(const ResultsTable& table);

}  // namespace mdpulab
