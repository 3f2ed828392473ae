#pragma once

#include "mdpulab/mdp.hpp"
#include "mdpulab/mdpu.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <vector>

namespace testing_models {

using namespace mdpulab;

/// Every action available everywhere, `branching` distinct successors per
/// pair with random weights, rewards uniform in [0, 1).
inline DiscreteMdp random_mdp(std::size_t n_states, std::size_t n_actions, Rng& rng, std::size_t branching = 3) {
  DiscreteMdp mdp(n_states, n_actions);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<StateId> states(n_states);
  for (StateId s = 0; s < n_states; ++s) states[s] = s;
  const std::size_t k = std::min(branching, n_states);
  for (StateId s = 0; s < n_states; ++s) {
    for (ActionId a = 0; a < n_actions; ++a) {
      std::shuffle(states.begin(), states.end(), rng);
      std::vector<double> w(k);
      double total = 0.0;
      for (auto& x : w) {
        x = 0.05 + unit(rng);
        total += x;
      }
      for (std::size_t j = 0; j < k; ++j) mdp.add_outcome(s, a, states[j], w[j] / total, unit(rng));
    }
  }
  return mdp;
}

/// Expected one-step reward and transition matrix of a decision rule.
inline void decision_rule(const DiscreteMdp& mdp, const std::vector<ActionId>& rule, Eigen::MatrixXd& p,
                          Eigen::VectorXd& r) {
  const std::size_t n = mdp.num_states();
  p = Eigen::MatrixXd::Zero(n, n);
  r = Eigen::VectorXd::Zero(n);
  for (StateId s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) {
      p(s, s) = 1.0;
      continue;
    }
    for (const auto& o : mdp.outcomes(s, rule[s])) {
      p(s, o.next) += o.probability;
      r[s] += o.probability * o.reward;
    }
  }
}

/// All |A|^|S| deterministic stationary rules (terminal states get kNoAction).
inline std::vector<std::vector<ActionId>> all_rules(const DiscreteMdp& mdp) {
  std::vector<std::vector<ActionId>> rules{{}};
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    std::vector<std::vector<ActionId>> next;
    const std::vector<ActionId> options =
        mdp.is_terminal(s) ? std::vector<ActionId>{kNoAction} : mdp.available(s);
    for (const auto& prefix : rules) {
      for (ActionId a : options) {
        auto extended = prefix;
        extended.push_back(a);
        next.push_back(std::move(extended));
      }
    }
    rules = std::move(next);
  }
  return rules;
}

/**
 * Best total H-step reward per start state over every deterministic Markov
 * policy (one rule per stage), found by evaluating each policy forward.
 * Cost |rules|^H; meant for H <= 2 on small models.
 */
inline Eigen::VectorXd exhaustive_markov_optimum(const DiscreteMdp& mdp, std::size_t horizon) {
  const auto rules = all_rules(mdp);
  const std::size_t n = mdp.num_states();
  std::vector<Eigen::MatrixXd> ps(rules.size());
  std::vector<Eigen::VectorXd> rs(rules.size());
  for (std::size_t k = 0; k < rules.size(); ++k) decision_rule(mdp, rules[k], ps[k], rs[k]);
  Eigen::VectorXd best = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> pick(horizon, 0);
  while (true) {
    Eigen::MatrixXd reach = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
    for (std::size_t h = 0; h < horizon; ++h) {
      total += reach * rs[pick[h]];
      reach = reach * ps[pick[h]];
    }
    best = best.cwiseMax(total);
    std::size_t d = 0;
    while (d < horizon && ++pick[d] == rules.size()) pick[d++] = 0;
    if (d == horizon) break;
  }
  return best;
}

/// Largest exact gain per state over all stationary deterministic policies.
inline Eigen::VectorXd exhaustive_gain_optimum(const DiscreteMdp& mdp) {
  Eigen::VectorXd best = Eigen::VectorXd::Constant(mdp.num_states(), -std::numeric_limits<double>::infinity());
  for (const auto& rule : all_rules(mdp)) best = best.cwiseMax(long_run_average(mdp, Policy{rule}));
  return best;
}

/// Mean reward of H steps of policy, by simulation.
inline double monte_carlo_value(const DiscreteMdp& mdp, const Policy& policy, StateId start, std::size_t horizon,
                                std::size_t rollouts, Rng& rng, double* standard_error) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < rollouts; ++k) {
    StateId s = start;
    double total = 0.0;
    for (std::size_t h = 0; h < horizon && !mdp.is_terminal(s); ++h) {
      const auto outs = mdp.outcomes(s, policy[s]);
      double u = unit(rng);
      std::size_t j = 0;
      while (j + 1 < outs.size() && u >= outs[j].probability) u -= outs[j++].probability;
      total += outs[j].reward;
      s = outs[j].next;
    }
    const double x = total / static_cast<double>(horizon);
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(rollouts);
  const double mean = sum / n;
  if (standard_error) *standard_error = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / (n - 1.0));
  return mean;
}

struct Transition {
  StateId state;
  ActionId action;
  StateId next;
  bool operator==(const Transition&) const = default;
};

/**
 * Textbook RMAX over a fully aware environment: pairs with fewer than K visits
 * lead to an absorbing state paying r_max; finite-horizon planning with ties
 * to the smallest action; replanning whenever a pair reaches K visits.
 */
inline std::vector<Transition> reference_rmax(LearningEnv& env, std::size_t k_known, double r_max,
                                              std::size_t horizon, std::uint64_t steps, Rng& rng) {
  const std::size_t n = env.num_states();
  const std::size_t m = env.num_actions();
  std::vector<std::vector<std::size_t>> visits(n, std::vector<std::size_t>(m, 0));
  std::vector<std::vector<double>> reward_sum(n, std::vector<double>(m, 0.0));
  std::vector<std::vector<std::map<StateId, std::size_t>>> next_counts(n, std::vector<std::map<StateId, std::size_t>>(m));
  std::vector<std::vector<ActionId>> aware(n);
  for (StateId s = 0; s < n; ++s) {
    aware[s] = env.initially_aware(s);
    std::sort(aware[s].begin(), aware[s].end());
  }

  auto planner = [&]() {
    std::vector<double> previous(n + 1, 0.0);
    std::vector<double> current(n + 1, 0.0);
    std::vector<ActionId> policy(n, kNoAction);
    for (std::size_t stage = 1; stage <= horizon; ++stage) {
      for (StateId s = 0; s < n; ++s) {
        if (env.is_terminal(s) || aware[s].empty()) {
          current[s] = 0.0;
          continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = kNoAction;
        for (ActionId a : aware[s]) {
          double q = 0.0;
          if (visits[s][a] >= k_known) {
            const double v = static_cast<double>(visits[s][a]);
            const double mean = reward_sum[s][a] / v;
            for (const auto& [next, count] : next_counts[s][a]) {
              q += static_cast<double>(count) / v * (mean + previous[next]);
            }
          } else {
            q = 1.0 * (r_max + previous[n]);
          }
          if (q > best + 1e-12) {
            best = q;
            arg = a;
          } else if (q > best) {
            best = q;
          }
        }
        current[s] = best;
        if (stage == horizon) policy[s] = arg;
      }
      current[n] = 1.0 * (r_max + previous[n]);
      std::swap(previous, current);
    }
    return policy;
  };

  std::vector<Transition> trace;
  std::vector<ActionId> policy = planner();
  bool need_reset = true;
  std::uint64_t used = 0;
  while (used < steps) {
    if (need_reset) {
      env.reset(rng);
      need_reset = false;
    }
    const StateId s = env.state();
    if (env.is_terminal(s)) {
      need_reset = true;
      continue;
    }
    const ActionId a = policy[s];
    ++used;
    const StepResult r = env.step(a, rng);
    trace.push_back({s, a, r.next});
    ++visits[s][a];
    reward_sum[s][a] += r.reward;
    ++next_counts[s][a][r.next];
    if (visits[s][a] == k_known) policy = planner();
    if (r.episode_end || r.reached_goal) need_reset = true;
  }
  return trace;
}

}  // namespace testing_models
