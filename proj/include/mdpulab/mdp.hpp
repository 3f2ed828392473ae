#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdpulab {

using StateId = std::size_t;
using ActionId = std::size_t;
using Rng = std::mt19937_64;

/// Marks a state without a chosen action (terminal states, empty choices).
inline constexpr ActionId kNoAction = static_cast<ActionId>(-1);

/// Raised when a model violates its structural invariants.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One successor of a state-action pair: probability and the reward R(s, s', a).
struct Outcome {
  StateId next;
  double probability;
  double reward;
};

/**
 * Finite MDP (S, A, g, P, R) with sparse transitions.
 *
 * States and actions are dense integer identifiers. Terminal states have no
 * outgoing transitions; planners and evaluators treat them as absorbing with
 * reward 0.
 */
class DiscreteMdp {
 public:
  DiscreteMdp() = default;
  DiscreteMdp(std::size_t n_states, std::size_t n_actions);

  std::size_t num_states() const { return n_states_; }
  std::size_t num_actions() const { return n_actions_; }

  /// Replaces g(s). Identifiers are sorted and deduplicated.
  void set_available(StateId s, std::vector<ActionId> actions);
  /// Appends an outcome to (s, a); also marks a as available at s.
  void add_outcome(StateId s, ActionId a, StateId next, double probability, double reward);
  void set_terminal(StateId s, bool terminal = true);

  const std::vector<ActionId>& available(StateId s) const { return available_.at(s); }
  bool is_available(StateId s, ActionId a) const;
  std::span<const Outcome> outcomes(StateId s, ActionId a) const;
  bool is_terminal(StateId s) const { return terminal_.at(s); }

  /// Largest |R(s, s', a)| over all outcomes with positive probability.
  double reward_bound() const;

  /// Throws ModelError on an empty state set, a non-stochastic row, or a
  /// non-terminal state without actions.
  void validate() const;

 private:
  std::size_t index(StateId s, ActionId a) const;

  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<std::vector<ActionId>> available_;
  std::vector<std::vector<Outcome>> outcomes_;
  std::vector<bool> terminal_;
};

/// Deterministic stationary policy; kNoAction at terminal states.
struct Policy {
  std::vector<ActionId> choice;

  ActionId operator[](StateId s) const { return choice.at(s); }
  std::size_t size() const { return choice.size(); }
  bool operator==(const Policy&) const = default;
};

/// Expected average reward per step, one entry per state.
struct ValueFunction {
  Eigen::VectorXd value;
};

struct Solution {
  ValueFunction values;
  Policy policy;
};

/// Checks that policy picks an available action at every non-terminal state.
void check_policy(const DiscreteMdp& mdp, const Policy& policy);

/**
 * Finite-horizon average-reward dynamic programming.
 *
 * Returns V_H / H for every state and the first-decision greedy policy.
 * Actions whose backed-up value lies within `tolerance` of the best are
 * treated as tied; ties go to the smallest identifier.
 */
Solution value_iteration(const DiscreteMdp& mdp, std::size_t horizon, double tolerance = 1e-12);

/// Exact expected average reward over `horizon` steps from `start`.
double evaluate_policy(const DiscreteMdp& mdp, const Policy& policy, StateId start,
                       std::size_t horizon);

/// Same as evaluate_policy, for every start state at once.
Eigen::VectorXd evaluate_policy_all(const DiscreteMdp& mdp, const Policy& policy,
                                    std::size_t horizon);

/// Transition matrix and expected one-step reward of the chain induced by policy.
struct MarkovChain {
  Eigen::MatrixXd transition;
  Eigen::VectorXd reward;
};
MarkovChain induced_chain(const DiscreteMdp& mdp, const Policy& policy);

/**
 * Exact long-run average reward (gain) of the induced chain, per state.
 *
 * Solves (I-P)g = 0, g + (I-P)h = r, h + (I-P)w = 0, which fixes g uniquely
 * for multichain models as well.
 */
Eigen::VectorXd long_run_average(const DiscreteMdp& mdp, const Policy& policy);

class CutoffExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Least T with U(s, pi, t) >= U(s, pi) - epsilon for every state s and every
 * scanned t in [T, cutoff]. U(s, pi) is the exact gain from long_run_average.
 * Throws CutoffExceeded when the last violation sits at the cutoff.
 */
std::size_t epsilon_return_mixing_time(const DiscreteMdp& mdp, const Policy& policy,
                                       double epsilon, std::size_t cutoff = 10000);

/// Copy of mdp with every reward multiplied by factor.
DiscreteMdp scale_rewards(const DiscreteMdp& mdp, double factor);

}  // namespace mdpulab
