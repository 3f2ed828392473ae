#pragma once

#include "mdpulab/mdpu.hpp"

#include <functional>
#include <map>
#include <memory>
#include <unordered_map>

namespace mdpulab {

enum class Awareness {
  Global,    ///< a discovery becomes aware wherever the action is available
  PerState,  ///< only at the state where it was found
};

struct UrmaxParams {
  std::size_t n_states_guess = 1;
  std::size_t n_actions_guess = 1;
  double r_max_guess = 1.0;
  std::size_t mixing_time_guess = 1;  ///< also the planning horizon
  double epsilon = 0.1;
  double delta = 0.1;
  std::size_t known_threshold = 1;
  std::uint64_t explore_budget = 1;  ///< a0 plays per state before its optimism expires
  Awareness awareness = Awareness::Global;

  void validate() const;
};

/// ceil(r_max^2 ln(2/delta) / (2 epsilon^2)), at least 1.
std::size_t default_known_threshold(double r_max, double epsilon, double delta);

/// exploration_threshold with N = n_states_guess * n_actions_guess, or `cap`
/// when the threshold is not reached before it.
std::uint64_t default_explore_budget(const DiscoveryModel& model, const UrmaxParams& params,
                                     std::uint64_t cap = 100'000);

/// Every guess set to k; epsilon = 1/k and delta = 1/(k+1).
UrmaxParams params_for_rank(std::size_t k, const DiscoveryModel& model);

struct LogRecord {
  enum class Event { Discover, Known, Replan, Evaluate };
  std::uint64_t step;
  Event event;
  StateId state;
  ActionId action;
  double value;
};

std::string to_string(LogRecord::Event event);

struct PairStats {
  std::uint64_t visits = 0;
  double reward_sum = 0.0;
  std::map<StateId, std::uint64_t> next;
};

struct LearnerState {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;  ///< real actions; a0 is num_actions
  std::vector<bool> terminal;
  std::vector<std::vector<bool>> aware;
  std::vector<std::vector<ActionId>> aware_list;  ///< sorted view of aware
  std::unordered_map<std::uint64_t, PairStats> stats;
  std::vector<std::uint64_t> explore_clock;  ///< failed a0 plays since the last discovery
  std::vector<bool> exhausted;
  std::uint64_t steps = 0;
  std::uint64_t explore_plays = 0;
  std::uint64_t discoveries = 0;
  Policy candidate_policy;
  std::vector<LogRecord> log;

  ActionId explore_action() const { return num_actions; }
  const PairStats* find(StateId s, ActionId a) const;
  std::uint64_t visits(StateId s, ActionId a) const;
  std::size_t aware_count() const;
};

/**
 * Optimistic model: unknown aware pairs lead to a fictitious state paying
 * r_max forever, and so does a0 while its budget at the state lasts. Once
 * spent, a0 stays only as a no-op at states with nothing else to offer.
 * Value iteration over it with the mixing-time guess as horizon.
 */
Policy candidate_optimal_policy(const LearnerState& state, const UrmaxParams& params);

/// Greedy policy of the empirical model over visited pairs; a0, as a no-op,
/// only where nothing was visited.
Policy exploit_policy(const LearnerState& state, const UrmaxParams& params);

class UrmaxLearner {
 public:
  UrmaxLearner(LearningEnv& env, UrmaxParams params);

  /// Replaces the parameters; the next step replans.
  void set_params(UrmaxParams params);
  const UrmaxParams& params() const { return params_; }

  /// Runs up to `steps` environment steps or a0 plays; returns the number used.
  std::uint64_t run(std::uint64_t steps, Rng& rng);

  const LearnerState& state() const { return state_; }
  Policy exploit() const { return exploit_policy(state_, params_); }

  /// Forces a reset before the next step, e.g. after the environment was
  /// used for evaluation.
  void restart_episode();

  /// Receives every log record as it is produced.
  std::function<void(const LogRecord&)> on_log;
  /// Whether records are also kept in state().log.
  bool keep_log = true;

 private:
  void record(LogRecord::Event event, StateId s, ActionId a, double value);
  void make_aware(StateId s, ActionId a);
  void replan();

  LearningEnv& env_;
  UrmaxParams params_;
  LearnerState state_;
  bool dirty_ = true;
  bool need_reset_ = true;
};

/// Runs one URMAX iteration from scratch.
std::pair<Policy, LearnerState> urmax_iteration(LearningEnv& env, const UrmaxParams& params, Rng& rng,
                                                std::uint64_t step_budget);

struct EpisodeStats {
  double mean = 0.0;
  double standard_error = 0.0;
  double best_distance = 0.0;
  std::size_t episodes = 0;
  std::size_t goals = 0;
};

/**
 * Average-reward score of policy over fresh episodes. An episode reaching the
 * goal scores reward / elapsed time; otherwise reward / episode_horizon().
 * The explore action, if chosen, idles for idle_duration.
 */
EpisodeStats evaluate_in_env(LearningEnv& env, const Policy& policy, std::size_t episodes, Rng& rng,
                             double idle_duration = 1.0);

/// ceil(8 ln(2/delta) / epsilon^2).
std::size_t default_evaluation_episodes(double epsilon, double delta);

struct Cell {
  std::size_t level;
  std::size_t rank;
  bool operator==(const Cell&) const = default;
};

/// Anti-diagonal walk over (level, rank) cells, levels above max_level skipped.
class DiagonalSchedule {
 public:
  explicit DiagonalSchedule(std::size_t max_level = static_cast<std::size_t>(-1));

  Cell next();

  /// 1-based position of cell in the unrestricted walk.
  static std::uint64_t step_of(Cell cell);
  static Cell cell_at(std::uint64_t step);

 private:
  std::size_t max_level_;
  std::uint64_t position_ = 0;
};

/// Learning environments by level 1..depth, built on first use.
struct Ladder {
  std::size_t depth = 0;
  std::function<std::unique_ptr<LearningEnv>(std::size_t level)> make;
  std::function<std::size_t(std::size_t level)> label = [](std::size_t level) { return level; };
  double idle_duration = 1.0;
};

struct DiagonalOptions {
  std::uint64_t cell_budget = 1000;
  std::size_t evaluation_episodes = 0;  ///< 0 selects default_evaluation_episodes
  double evaluation_epsilon = 0.1;
  double evaluation_delta = 0.1;
  std::function<UrmaxParams(std::size_t rank, LearningEnv& env)> params_for_rank;
  std::function<void(const LogRecord&, const Cell&)> on_log;
};

struct CellReport {
  Cell cell;
  std::size_t label;
  std::uint64_t budget_used;  ///< cumulative, after this cell
  double score;
  double best_score;
  std::size_t aware_actions;
  std::uint64_t discoveries;
};

struct DiagonalResult {
  Policy policy;
  std::size_t level = 0;
  double best_score = 0.0;
  std::uint64_t budget_used = 0;
  std::vector<CellReport> cells;
};

/**
 * Diagonal execution of URMAX. One learner per level persists across cells;
 * each cell runs it for cell_budget steps with the rank's parameters, then
 * measures the exploit policy. The best measured policy is retained.
 */
DiagonalResult diagonal_run(const Ladder& ladder, Rng& rng, std::uint64_t total_budget,
                            const DiagonalOptions& options = {});

}  // namespace mdpulab
