#include "mdpulab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mdpulab {

namespace {

constexpr double kStochasticTolerance = 1e-9;

std::string pair_name(StateId s, ActionId a) {
  std::ostringstream out;
  out << "(state " << s << ", action " << a << ")";
  return out.str();
}

}  // namespace

DiscreteMdp::DiscreteMdp(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states),
      n_actions_(n_actions),
      available_(n_states),
      outcomes_(n_states * n_actions),
      terminal_(n_states, false) {}

std::size_t DiscreteMdp::index(StateId s, ActionId a) const {
  if (s >= n_states_ || a >= n_actions_) {
    throw ModelError("state or action out of range: " + pair_name(s, a));
  }
  return s * n_actions_ + a;
}

void DiscreteMdp::set_available(StateId s, std::vector<ActionId> actions) {
  for (ActionId a : actions) index(s, a);
  std::sort(actions.begin(), actions.end());
  actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
  available_.at(s) = std::move(actions);
}

void DiscreteMdp::add_outcome(StateId s, ActionId a, StateId next, double probability,
                              double reward) {
  if (next >= n_states_) throw ModelError("successor out of range for " + pair_name(s, a));
  outcomes_[index(s, a)].push_back({next, probability, reward});
  auto& avail = available_[s];
  auto it = std::lower_bound(avail.begin(), avail.end(), a);
  if (it == avail.end() || *it != a) avail.insert(it, a);
}

void DiscreteMdp::set_terminal(StateId s, bool terminal) { terminal_.at(s) = terminal; }

bool DiscreteMdp::is_available(StateId s, ActionId a) const {
  const auto& avail = available_.at(s);
  return std::binary_search(avail.begin(), avail.end(), a);
}

std::span<const Outcome> DiscreteMdp::outcomes(StateId s, ActionId a) const {
  return outcomes_[index(s, a)];
}

double DiscreteMdp::reward_bound() const {
  double bound = 0.0;
  for (const auto& row : outcomes_) {
    for (const auto& o : row) {
      if (o.probability > 0.0) bound = std::max(bound, std::abs(o.reward));
    }
  }
  return bound;
}

void DiscreteMdp::validate() const {
  if (n_states_ == 0) throw ModelError("MDP has no states");
  for (StateId s = 0; s < n_states_; ++s) {
    if (terminal_[s]) continue;
    if (available_[s].empty()) {
      throw ModelError("non-terminal state " + std::to_string(s) + " has no available action");
    }
    for (ActionId a : available_[s]) {
      double total = 0.0;
      for (const auto& o : outcomes_[s * n_actions_ + a]) {
        if (o.probability < 0.0 || !std::isfinite(o.probability) || !std::isfinite(o.reward)) {
          throw ModelError("invalid outcome for " + pair_name(s, a));
        }
        total += o.probability;
      }
      if (std::abs(total - 1.0) > kStochasticTolerance) {
        std::ostringstream msg;
        msg << "transition row " << pair_name(s, a) << " sums to " << total;
        throw ModelError(msg.str());
      }
    }
  }
}

void check_policy(const DiscreteMdp& mdp, const Policy& policy) {
  if (policy.size() != mdp.num_states()) {
    throw ModelError("policy size does not match the number of states");
  }
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    if (!mdp.is_available(s, policy[s])) {
      throw ModelError("policy picks an unavailable action at state " + std::to_string(s));
    }
  }
}

Solution value_iteration(const DiscreteMdp& mdp, std::size_t horizon, double tolerance) {
  mdp.validate();
  if (horizon == 0) throw std::invalid_argument("value_iteration: horizon must be positive");

  const std::size_t n = mdp.num_states();
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd current(n);
  Policy policy{std::vector<ActionId>(n, kNoAction)};

  for (std::size_t stage = 1; stage <= horizon; ++stage) {
    const bool last = stage == horizon;
    for (StateId s = 0; s < n; ++s) {
      if (mdp.is_terminal(s)) {
        current[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      ActionId best_action = kNoAction;
      for (ActionId a : mdp.available(s)) {
        double q = 0.0;
        for (const auto& o : mdp.outcomes(s, a)) q += o.probability * (o.reward + previous[o.next]);
        if (q > best + tolerance) {
          best = q;
          best_action = a;
        } else if (q > best) {
          best = q;  // tied within tolerance: keep the smaller identifier
        }
      }
      current[s] = best;
      if (last) policy.choice[s] = best_action;
    }
    std::swap(previous, current);
  }
  return {{previous / static_cast<double>(horizon)}, std::move(policy)};
}

MarkovChain induced_chain(const DiscreteMdp& mdp, const Policy& policy) {
  check_policy(mdp, policy);
  const std::size_t n = mdp.num_states();
  MarkovChain chain{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (StateId s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) {
      chain.transition(s, s) = 1.0;
      continue;
    }
    for (const auto& o : mdp.outcomes(s, policy[s])) {
      chain.transition(s, o.next) += o.probability;
      chain.reward[s] += o.probability * o.reward;
    }
  }
  return chain;
}

Eigen::VectorXd evaluate_policy_all(const DiscreteMdp& mdp, const Policy& policy,
                                    std::size_t horizon) {
  if (horizon == 0) throw std::invalid_argument("evaluate_policy: horizon must be positive");
  const MarkovChain chain = induced_chain(mdp, policy);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(mdp.num_states());
  for (std::size_t t = 0; t < horizon; ++t) total = chain.reward + chain.transition * total;
  return total / static_cast<double>(horizon);
}

double evaluate_policy(const DiscreteMdp& mdp, const Policy& policy, StateId start,
                       std::size_t horizon) {
  if (start >= mdp.num_states()) {
    throw std::out_of_range("evaluate_policy: undefined start state " + std::to_string(start));
  }
  if (horizon == 0) throw std::invalid_argument("evaluate_policy: horizon must be positive");
  const MarkovChain chain = induced_chain(mdp, policy);

  // Forward propagation of the state distribution.
  Eigen::RowVectorXd distribution = Eigen::RowVectorXd::Zero(mdp.num_states());
  distribution[start] = 1.0;
  double total = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    total += distribution.dot(chain.reward);
    distribution = distribution * chain.transition;
  }
  return total / static_cast<double>(horizon);
}

Eigen::VectorXd long_run_average(const DiscreteMdp& mdp, const Policy& policy) {
  const MarkovChain chain = induced_chain(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd deviation = identity - chain.transition;

  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  system.block(0, 0, n, n) = deviation;
  system.block(n, 0, n, n) = identity;
  system.block(n, n, n, n) = deviation;
  system.block(2 * n, n, n, n) = identity;
  system.block(2 * n, 2 * n, n, n) = deviation;

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  rhs.segment(n, n) = chain.reward;

  const Eigen::VectorXd solution = system.completeOrthogonalDecomposition().solve(rhs);
  return solution.head(n);
}

std::size_t epsilon_return_mixing_time(const DiscreteMdp& mdp, const Policy& policy,
                                       double epsilon, std::size_t cutoff) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("mixing time: epsilon must be positive");
  if (cutoff == 0) throw std::invalid_argument("mixing time: cutoff must be positive");
  const MarkovChain chain = induced_chain(mdp, policy);
  const Eigen::VectorXd gain = long_run_average(mdp, policy);
  const Eigen::VectorXd floor = gain.array() - epsilon - 1e-12;

  Eigen::VectorXd total = Eigen::VectorXd::Zero(mdp.num_states());
  std::size_t last_violation = 0;
  for (std::size_t t = 1; t <= cutoff; ++t) {
    total = chain.reward + chain.transition * total;
    const Eigen::VectorXd average = total / static_cast<double>(t);
    if ((average.array() < floor.array()).any()) last_violation = t;
  }
  if (last_violation >= cutoff) {
    throw CutoffExceeded("epsilon-return mixing time exceeds cutoff " + std::to_string(cutoff));
  }
  return last_violation + 1;
}

DiscreteMdp scale_rewards(const DiscreteMdp& mdp, double factor) {
  DiscreteMdp scaled(mdp.num_states(), mdp.num_actions());
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    scaled.set_available(s, mdp.available(s));
    scaled.set_terminal(s, mdp.is_terminal(s));
    for (ActionId a : mdp.available(s)) {
      for (const auto& o : mdp.outcomes(s, a)) {
        scaled.add_outcome(s, a, o.next, o.probability, o.reward * factor);
      }
    }
  }
  return scaled;
}

}  // namespace mdpulab
