#pragma once

#include "mdpulab/discovery.hpp"
#include "mdpulab/mdp.hpp"

#include <optional>
#include <vector>

namespace mdpulab {

/**
 * MDP with unawareness: an underlying MDP whose learner initially knows only
 * the aware actions g0(s). The explore action is not part of the underlying
 * action set; its identifier is num_actions().
 */
struct Mdpu {
  DiscreteMdp underlying;
  std::vector<ActionId> known_actions;            ///< A0
  std::vector<std::vector<ActionId>> aware;       ///< g0(s), per state
  std::vector<std::vector<ActionId>> hidden_useful;
  DiscoveryModel discovery = DiscoveryModel::constant(1.0);

  ActionId explore_action() const { return underlying.num_actions(); }

  /// Throws ModelError when an invariant is broken.
  void validate() const;
};

/// Fully aware MDPU over mdp: every available action is known, nothing hidden.
Mdpu fully_aware(DiscreteMdp mdp);

struct StepResult {
  StateId next;
  double reward;
  double duration = 1.0;
  bool episode_end = false;
  bool reached_goal = false;
};

struct ExploreResult {
  std::optional<ActionId> discovered;
  bool exhausted = false;  ///< the environment has nothing left to reveal at this state
};

/**
 * What URMAX sees of a world. The environment owns the current state and
 * decides where episodes end.
 */
class LearningEnv {
 public:
  virtual ~LearningEnv() = default;

  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual double reward_bound() const = 0;

  virtual StateId reset(Rng& rng) = 0;
  virtual StateId state() const = 0;
  virtual bool is_terminal(StateId s) const = 0;

  /// Executes a at the current state; a must be available there.
  virtual StepResult step(ActionId a, Rng& rng) = 0;

  /// One play of the explore action at the current state. `t` counts plays
  /// since the last discovery at this state (1 for the first).
  virtual ExploreResult explore(std::uint64_t t, const std::vector<bool>& aware_here, Rng& rng) = 0;

  virtual bool is_available(StateId s, ActionId a) = 0;
  virtual std::vector<ActionId> initially_aware(StateId s) = 0;
  virtual const DiscoveryModel& discovery_model() const = 0;

  /// Time over which a non-goal episode is averaged.
  virtual double episode_horizon() const = 0;
};

/// LearningEnv backed by a tabular MDPU. Episodes last `episode_steps` steps.
class MdpuEnv : public LearningEnv {
 public:
  MdpuEnv(Mdpu mdpu, StateId start, std::size_t episode_steps);

  std::size_t num_states() const override { return mdpu_.underlying.num_states(); }
  std::size_t num_actions() const override { return mdpu_.underlying.num_actions(); }
  double reward_bound() const override { return mdpu_.underlying.reward_bound(); }

  StateId reset(Rng& rng) override;
  StateId state() const override { return current_; }
  bool is_terminal(StateId s) const override { return mdpu_.underlying.is_terminal(s); }
  StepResult step(ActionId a, Rng& rng) override;
  ExploreResult explore(std::uint64_t t, const std::vector<bool>& aware_here, Rng& rng) override;
  bool is_available(StateId s, ActionId a) override;
  std::vector<ActionId> initially_aware(StateId s) override { return mdpu_.aware.at(s); }
  const DiscoveryModel& discovery_model() const override { return mdpu_.discovery; }
  double episode_horizon() const override { return static_cast<double>(episode_steps_); }

  const Mdpu& mdpu() const { return mdpu_; }

 private:
  Mdpu mdpu_;
  StateId start_;
  std::size_t episode_steps_;
  StateId current_;
  std::size_t elapsed_ = 0;
  std::vector<std::uint64_t> scanned_;  ///< systematic scan position per state
};

}  // namespace mdpulab
