#include "mdpulab/urmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mdpulab {

namespace {

/// Sparse planning model: per state, the offered actions in increasing id order.
struct Choice {
  ActionId action;
  std::vector<Outcome> outcomes;
};
using CompactModel = std::vector<std::vector<Choice>>;

/// Same recursion and tie rule as value_iteration.
std::vector<ActionId> plan(const CompactModel& model, std::size_t horizon) {
  const std::size_t n = model.size();
  std::vector<double> previous(n, 0.0);
  std::vector<double> current(n, 0.0);
  std::vector<ActionId> policy(n, kNoAction);
  constexpr double tolerance = 1e-12;
  for (std::size_t stage = 1; stage <= horizon; ++stage) {
    const bool last = stage == horizon;
    for (StateId s = 0; s < n; ++s) {
      double best = model[s].empty() ? 0.0 : -std::numeric_limits<double>::infinity();
      ActionId best_action = kNoAction;
      for (const auto& choice : model[s]) {
        double q = 0.0;
        for (const auto& o : choice.outcomes) q += o.probability * (o.reward + previous[o.next]);
        if (q > best + tolerance) {
          best = q;
          best_action = choice.action;
        } else if (q > best) {
          best = q;
        }
      }
      current[s] = best;
      if (last) policy[s] = best_action;
    }
    std::swap(previous, current);
  }
  return policy;
}

std::vector<Outcome> empirical_outcomes(const PairStats& stats) {
  std::vector<Outcome> outcomes;
  const double visits = static_cast<double>(stats.visits);
  const double mean_reward = stats.reward_sum / visits;
  for (const auto& [next, count] : stats.next) {
    outcomes.push_back({next, static_cast<double>(count) / visits, mean_reward});
  }
  return outcomes;
}

std::uint64_t pair_key(const LearnerState& state, StateId s, ActionId a) {
  return static_cast<std::uint64_t>(s) * (state.num_actions + 1) + a;
}

}  // namespace

void UrmaxParams::validate() const {
  if (n_states_guess == 0 || n_actions_guess == 0 || mixing_time_guess == 0 || known_threshold == 0) {
    throw std::invalid_argument("URMAX parameters must be positive");
  }
  if (!(r_max_guess > 0.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("URMAX r_max and epsilon must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("URMAX delta must lie in (0, 1)");
}

std::size_t default_known_threshold(double r_max, double epsilon, double delta) {
  const double k = r_max * r_max * std::log(2.0 / delta) / (2.0 * epsilon * epsilon);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(k)));
}

std::uint64_t default_explore_budget(const DiscoveryModel& model, const UrmaxParams& params,
                                     std::uint64_t cap) {
  try {
    return exploration_threshold(model, params.n_states_guess * params.n_actions_guess, params.delta,
                                 cap);
  } catch (const ThresholdNotReached&) {
    return cap;
  }
}

UrmaxParams params_for_rank(std::size_t k, const DiscoveryModel& model) {
  if (k == 0) throw std::invalid_argument("parameter rank starts at 1");
  UrmaxParams p;
  p.n_states_guess = k;
  p.n_actions_guess = k;
  p.r_max_guess = static_cast<double>(k);
  p.mixing_time_guess = k;
  p.epsilon = 1.0 / static_cast<double>(k);
  p.delta = 1.0 / static_cast<double>(k + 1);
  p.known_threshold = default_known_threshold(p.r_max_guess, p.epsilon, p.delta);
  p.explore_budget = default_explore_budget(model, p);
  return p;
}

std::string to_string(LogRecord::Event event) {
  switch (event) {
    case LogRecord::Event::Discover:
      return "discover";
    case LogRecord::Event::Known:
      return "known";
    case LogRecord::Event::Replan:
      return "replan";
    case LogRecord::Event::Evaluate:
      return "evaluate";
  }
  return "?";
}

const PairStats* LearnerState::find(StateId s, ActionId a) const {
  auto it = stats.find(pair_key(*this, s, a));
  return it == stats.end() ? nullptr : &it->second;
}

std::uint64_t LearnerState::visits(StateId s, ActionId a) const {
  const PairStats* p = find(s, a);
  return p ? p->visits : 0;
}

std::size_t LearnerState::aware_count() const {
  std::size_t total = 0;
  for (const auto& list : aware_list) total += list.size();
  return total;
}

Policy candidate_optimal_policy(const LearnerState& state, const UrmaxParams& params) {
  const std::size_t n = state.num_states;
  const StateId fictitious = n;
  const ActionId a0 = state.explore_action();
  CompactModel model(n + 1);
  for (StateId s = 0; s < n; ++s) {
    if (state.terminal[s]) continue;
    bool optimistic_offered = false;
    for (ActionId a : state.aware_list[s]) {
      const PairStats* stats = state.find(s, a);
      if (stats && stats->visits >= params.known_threshold) {
        model[s].push_back({a, empirical_outcomes(*stats)});
      } else if (!optimistic_offered) {
        // Unknown pairs are interchangeable; the smallest id wins every tie.
        model[s].push_back({a, {{fictitious, 1.0, params.r_max_guess}}});
        optimistic_offered = true;
      }
    }
    if (state.explore_clock[s] < params.explore_budget && !state.exhausted[s]) {
      model[s].push_back({a0, {{fictitious, 1.0, params.r_max_guess}}});
    } else if (model[s].empty()) {
      model[s].push_back({a0, {{s, 1.0, 0.0}}});
    }
  }
  model[fictitious].push_back({a0, {{fictitious, 1.0, params.r_max_guess}}});
  auto choice = plan(model, params.mixing_time_guess);
  choice.pop_back();
  return {std::move(choice)};
}

Policy exploit_policy(const LearnerState& state, const UrmaxParams& params) {
  const std::size_t n = state.num_states;
  const ActionId a0 = state.explore_action();
  CompactModel model(n);
  for (StateId s = 0; s < n; ++s) {
    if (state.terminal[s]) continue;
    for (ActionId a : state.aware_list[s]) {
      const PairStats* stats = state.find(s, a);
      if (stats && stats->visits > 0) model[s].push_back({a, empirical_outcomes(*stats)});
    }
    if (model[s].empty()) model[s].push_back({a0, {{s, 1.0, 0.0}}});
  }
  return {plan(model, params.mixing_time_guess)};
}

UrmaxLearner::UrmaxLearner(LearningEnv& env, UrmaxParams params) : env_(env), params_(params) {
  params_.validate();
  const std::size_t n = env.num_states();
  const std::size_t m = env.num_actions();
  state_.num_states = n;
  state_.num_actions = m;
  state_.terminal.resize(n);
  state_.aware.assign(n, std::vector<bool>(m, false));
  state_.aware_list.resize(n);
  state_.explore_clock.assign(n, 0);
  state_.exhausted.assign(n, false);
  for (StateId s = 0; s < n; ++s) {
    state_.terminal[s] = env.is_terminal(s);
    for (ActionId a : env.initially_aware(s)) {
      if (a >= m) throw ModelError("initially aware action out of range");
      if (!state_.aware[s][a]) {
        state_.aware[s][a] = true;
        state_.aware_list[s].push_back(a);
      }
    }
    std::sort(state_.aware_list[s].begin(), state_.aware_list[s].end());
  }
}

void UrmaxLearner::set_params(UrmaxParams params) {
  params.validate();
  params_ = params;
  dirty_ = true;
}

void UrmaxLearner::restart_episode() { need_reset_ = true; }

void UrmaxLearner::record(LogRecord::Event event, StateId s, ActionId a, double value) {
  LogRecord rec{state_.steps, event, s, a, value};
  if (on_log) on_log(rec);
  if (keep_log) state_.log.push_back(rec);
}

void UrmaxLearner::make_aware(StateId s, ActionId a) {
  if (state_.aware[s][a]) return;
  state_.aware[s][a] = true;
  auto& list = state_.aware_list[s];
  list.insert(std::lower_bound(list.begin(), list.end(), a), a);
}

void UrmaxLearner::replan() {
  state_.candidate_policy = candidate_optimal_policy(state_, params_);
  dirty_ = false;
  record(LogRecord::Event::Replan, 0, kNoAction, 0.0);
}

std::uint64_t UrmaxLearner::run(std::uint64_t steps, Rng& rng) {
  const ActionId a0 = state_.explore_action();
  std::uint64_t used = 0;
  while (used < steps) {
    if (need_reset_) {
      env_.reset(rng);
      need_reset_ = false;
    }
    const StateId s = env_.state();
    if (env_.is_terminal(s)) {
      need_reset_ = true;
      continue;
    }
    if (dirty_) replan();
    const ActionId a = state_.candidate_policy[s];
    ++used;
    ++state_.steps;

    if (a == a0) {
      ++state_.explore_plays;
      const ExploreResult result = env_.explore(state_.explore_clock[s] + 1, state_.aware[s], rng);
      if (result.exhausted && !state_.exhausted[s]) {
        state_.exhausted[s] = true;
        dirty_ = true;
      }
      if (result.discovered) {
        const ActionId found = *result.discovered;
        if (found >= state_.num_actions) throw ModelError("environment revealed an invalid action");
        ++state_.discoveries;
        state_.explore_clock[s] = 0;
        if (params_.awareness == Awareness::Global) {
          for (StateId other = 0; other < state_.num_states; ++other) {
            if (other == s || (!state_.terminal[other] && env_.is_available(other, found))) {
              make_aware(other, found);
            }
          }
        } else {
          make_aware(s, found);
        }
        record(LogRecord::Event::Discover, s, found, static_cast<double>(state_.discoveries));
        dirty_ = true;
      } else if (++state_.explore_clock[s] == params_.explore_budget) {
        dirty_ = true;
      }
      continue;
    }

    const StepResult result = env_.step(a, rng);
    PairStats& stats = state_.stats[pair_key(state_, s, a)];
    ++stats.visits;
    stats.reward_sum += result.reward;
    ++stats.next[result.next];
    if (stats.visits == params_.known_threshold) {
      record(LogRecord::Event::Known, s, a, stats.reward_sum / static_cast<double>(stats.visits));
      dirty_ = true;
    }
    if (result.episode_end || result.reached_goal) need_reset_ = true;
  }
  return used;
}

std::pair<Policy, LearnerState> urmax_iteration(LearningEnv& env, const UrmaxParams& params, Rng& rng,
                                                std::uint64_t step_budget) {
  UrmaxLearner learner(env, params);
  learner.run(step_budget, rng);
  LearnerState state = learner.state();
  Policy policy = candidate_optimal_policy(state, params);
  state.candidate_policy = policy;
  return {std::move(policy), std::move(state)};
}

std::size_t default_evaluation_episodes(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("evaluation episodes need epsilon > 0 and delta in (0, 1)");
  }
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(2.0 / delta) / (epsilon * epsilon)));
}

EpisodeStats evaluate_in_env(LearningEnv& env, const Policy& policy, std::size_t episodes, Rng& rng,
                             double idle_duration) {
  EpisodeStats out;
  if (episodes == 0) return out;
  const double horizon = env.episode_horizon();
  const ActionId m = env.num_actions();
  double sum = 0.0;
  double sum_sq = 0.0;
  out.best_distance = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < episodes; ++e) {
    StateId s = env.reset(rng);
    double total = 0.0;
    double elapsed = 0.0;
    bool goal = false;
    while (!env.is_terminal(s) && elapsed < horizon - 1e-12) {
      const ActionId a = policy[s];
      if (a == kNoAction || a >= m) {
        elapsed += idle_duration;
        continue;
      }
      const StepResult r = env.step(a, rng);
      total += r.reward;
      elapsed += r.duration;
      s = r.next;
      if (r.reached_goal) {
        goal = true;
        break;
      }
      if (r.episode_end) break;
    }
    const double score = goal ? total / elapsed : total / horizon;
    sum += score;
    sum_sq += score * score;
    out.best_distance = std::max(out.best_distance, total);
    if (goal) ++out.goals;
  }
  const double count = static_cast<double>(episodes);
  out.episodes = episodes;
  out.mean = sum / count;
  if (episodes > 1) {
    const double variance = std::max(0.0, (sum_sq - count * out.mean * out.mean) / (count - 1.0));
    out.standard_error = std::sqrt(variance / count);
  }
  return out;
}

DiagonalSchedule::DiagonalSchedule(std::size_t max_level) : max_level_(max_level) {
  if (max_level_ == 0) throw std::invalid_argument("diagonal schedule needs at least one level");
}

Cell DiagonalSchedule::next() {
  for (;;) {
    const Cell cell = cell_at(++position_);
    if (cell.level <= max_level_) return cell;
  }
}

std::uint64_t DiagonalSchedule::step_of(Cell cell) {
  if (cell.level == 0 || cell.rank == 0) throw std::invalid_argument("cells are 1-based");
  const std::uint64_t n = cell.level + cell.rank - 1;
  return (n - 1) * n / 2 + cell.level;
}

Cell DiagonalSchedule::cell_at(std::uint64_t step) {
  if (step == 0) throw std::invalid_argument("steps are 1-based");
  auto n = static_cast<std::uint64_t>((std::sqrt(8.0 * static_cast<double>(step)) - 1.0) / 2.0);
  while (n * (n + 1) / 2 < step) ++n;
  while (n > 1 && (n - 1) * n / 2 >= step) --n;
  const std::uint64_t level = step - (n - 1) * n / 2;
  return {static_cast<std::size_t>(level), static_cast<std::size_t>(n - level + 1)};
}

DiagonalResult diagonal_run(const Ladder& ladder, Rng& rng, std::uint64_t total_budget,
                            const DiagonalOptions& options) {
  if (ladder.depth == 0 || !ladder.make) throw std::invalid_argument("diagonal_run: empty ladder");
  if (options.cell_budget == 0) throw std::invalid_argument("diagonal_run: cell budget must be positive");
  const std::size_t episodes =
      options.evaluation_episodes > 0
          ? options.evaluation_episodes
          : default_evaluation_episodes(options.evaluation_epsilon, options.evaluation_delta);

  std::vector<std::unique_ptr<LearningEnv>> envs(ladder.depth + 1);
  std::vector<std::unique_ptr<UrmaxLearner>> learners(ladder.depth + 1);
  DiagonalSchedule schedule(ladder.depth);
  DiagonalResult result;
  bool retained = false;

  Cell current{0, 0};
  while (result.budget_used < total_budget) {
    const Cell cell = schedule.next();
    current = cell;
    auto& env = envs[cell.level];
    if (!env) env = ladder.make(cell.level);
    const UrmaxParams params = options.params_for_rank ? options.params_for_rank(cell.rank, *env)
                                                       : params_for_rank(cell.rank, env->discovery_model());
    auto& learner = learners[cell.level];
    if (!learner) {
      learner = std::make_unique<UrmaxLearner>(*env, params);
      learner->keep_log = false;
      if (options.on_log) {
        learner->on_log = [&options, &current](const LogRecord& r) { options.on_log(r, current); };
      }
    } else {
      learner->set_params(params);
    }
    const std::uint64_t slice = std::min(options.cell_budget, total_budget - result.budget_used);
    result.budget_used += learner->run(slice, rng);

    const Policy policy = learner->exploit();
    const EpisodeStats stats = evaluate_in_env(*env, policy, episodes, rng, ladder.idle_duration);
    learner->restart_episode();
    if (options.on_log) {
      options.on_log({result.budget_used, LogRecord::Event::Evaluate, 0, kNoAction, stats.mean}, cell);
    }
    if (!retained || stats.mean > result.best_score) {
      retained = true;
      result.best_score = stats.mean;
      result.policy = policy;
      result.level = cell.level;
    }
    result.cells.push_back({cell, ladder.label(cell.level), result.budget_used, stats.mean,
                            result.best_score, learner->state().aware_count(),
                            learner->state().discoveries});
  }
  return result;
}

}  // namespace mdpulab
