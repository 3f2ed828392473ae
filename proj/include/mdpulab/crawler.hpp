#pragma once

#include "mdpulab/continuous.hpp"
#include "mdpulab/mdpu.hpp"

#include <numbers>

namespace mdpulab {

/**
 * Planar crawler: a body at (x, y) moved by n joints in [-joint_limit, joint_limit].
 *
 * Each action segment drives the joints to its (clamped) targets v. With
 * delta = v - q, the segment is unstable when |sum delta| + |sum v| exceeds
 * balance_limit; the crawler then falls and stays put. Otherwise, when exactly
 * one joint j pushes (delta_j < 0), the body advances by gains[j] * |delta_j|
 * along x.
 */
struct CrawlerConfig {
  double arena_radius = 5.0;
  std::size_t n_joints = 2;
  std::vector<double> gains{0.02, 0.02};
  double balance_limit = 3.0;
  double noise_scale = 0.0;
  double t_step = 0.128;
  double max_action_length = 0.512;
  double joint_limit = std::numbers::pi;
  double episode_duration = 32.768;  ///< 64 actions of maximal length

  void validate() const;
  /// c with |R| < c |a|.
  double rate_bound() const;
};

struct CrawlerState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::VectorXd joints;
  bool fallen = false;

  static CrawlerState rest(const CrawlerConfig& cfg);
  /// (x, y, q_1..q_n, fallen)
  Eigen::VectorXd to_vector() const;
  static CrawlerState from_vector(const Eigen::VectorXd& v);
};

/// One state segment per action segment, holding the state at its end.
StatePath crawler_dynamics(const CrawlerConfig& cfg, const CrawlerState& s, const ActionPath& a, Rng& rng);

/// dis(origin, end) - dis(origin, start).
double crawler_reward(const CrawlerConfig& cfg, const CrawlerState& s1, const StatePath& sc, const ActionPath& a);

/// Displacement of the stride [(A, -A), (-A, A)] from rest: g_2 A + 2 g_1 A.
double stride_length(const CrawlerConfig& cfg, double amplitude);

/// Joint targets in reverse order, segment by segment.
ActionPath mirror(const ActionPath& a);

ContinuousMdp make_crawler_mdp(const CrawlerConfig& cfg);

/// Covering radius of level i: joints n*limit/i, position 2R, fallen flag 1/2.
double crawler_resolution(const CrawlerConfig& cfg, std::size_t level);

/// Level i >= 2: i cell-centred values per joint for states and targets,
/// position grid {0}, fallen grid {0, 1}, t_i = t_step.
DiscretizationLevel crawler_level(const CrawlerConfig& cfg, std::size_t level);

std::vector<DiscretizationLevel> build_ladder(const CrawlerConfig& cfg, const std::vector<std::size_t>& levels);

enum class ExploreMethod { Systematic, Random, Apprenticeship };

ExploreMethod parse_explore_method(const std::string& name);
std::string to_string(ExploreMethod method);

struct CrawlerEnvOptions {
  ExploreMethod method = ExploreMethod::Systematic;
  double beta = 0.2;  ///< teacher rate for apprenticeship
  std::size_t useful_samples = 1;
  std::uint64_t seed = 1;
};

/**
 * Level i of the crawler as a learning environment. States are joint grid
 * configurations plus one fallen state; the body position is tracked
 * continuously and ends the episode at the arena boundary.
 */
class CrawlerLevelEnv : public LearningEnv {
 public:
  CrawlerLevelEnv(CrawlerConfig cfg, std::size_t level, CrawlerEnvOptions options = {});

  std::size_t num_states() const override { return joint_states_ + 1; }
  std::size_t num_actions() const override { return catalog_.size(); }
  double reward_bound() const override { return cfg_.rate_bound() * cfg_.max_action_length; }

  StateId reset(Rng& rng) override;
  StateId state() const override { return current_; }
  bool is_terminal(StateId s) const override { return s == fallen_state(); }
  StepResult step(ActionId a, Rng& rng) override;
  ExploreResult explore(std::uint64_t t, const std::vector<bool>& aware_here, Rng& rng) override;
  bool is_available(StateId s, ActionId a) override;
  std::vector<ActionId> initially_aware(StateId s) override;
  const DiscoveryModel& discovery_model() const override;
  double episode_horizon() const override { return cfg_.episode_duration; }

  const CrawlerConfig& config() const { return cfg_; }
  const DiscretizationLevel& level() const { return level_; }
  const ActionCatalog& catalog() const { return catalog_; }
  std::size_t level_index() const { return level_.index; }
  StateId fallen_state() const { return joint_states_; }
  StateId start_state() const { return start_; }
  const CrawlerState& body() const { return body_; }

  /// Moves without falling from joint configuration s (cached).
  bool useful(StateId s, ActionId a);
  std::size_t useful_count(StateId s);
  /// Single-segment return to the start posture.
  ActionId recovery_action() const { return recovery_; }
  ActionId mirror_action(ActionId a) const;

  Eigen::VectorXd joints_of(StateId s) const;
  StateId state_of(const Eigen::VectorXd& joints) const;

 private:
  const std::vector<ActionId>& teacher_ranking(StateId s);

  CrawlerConfig cfg_;
  CrawlerEnvOptions options_;
  DiscretizationLevel level_;
  ActionCatalog catalog_;
  ContinuousMdp cm_;
  std::size_t joint_states_;
  StateId start_;
  ActionId recovery_;
  std::vector<std::int8_t> useful_cache_;
  std::vector<std::uint64_t> cursor_;
  std::unordered_map<StateId, std::vector<ActionId>> ranking_;
  mutable std::optional<DiscoveryModel> discovery_;

  CrawlerState body_;
  StateId current_ = 0;
  double elapsed_ = 0.0;
};

struct BaselineReport {
  std::uint64_t steps_used = 0;
  double max_distance = 0.0;  ///< farthest distance from the origin before a fall
  double best_score = 0.0;    ///< best episode average reward
  std::size_t useful_found = 0;
  std::vector<ActionId> stable_gaits;  ///< repeat baseline only
};

/// Uniformly random actions of A_i', episode after episode.
BaselineReport baseline_random(CrawlerLevelEnv& env, std::uint64_t budget, Rng& rng);

/// Half the budget probing random actions from the start posture, the rest
/// repeating each useful one to look for a stable gait.
BaselineReport baseline_repeat(CrawlerLevelEnv& env, std::uint64_t budget, Rng& rng);

}  // namespace mdpulab
