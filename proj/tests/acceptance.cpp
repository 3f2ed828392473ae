#include "mdpulab/continuous.hpp"
#include "mdpulab/crawler.hpp"
#include "mdpulab/discovery.hpp"
#include "mdpulab/harness.hpp"
#include "mdpulab/urmax.hpp"
#include "test_models.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace mdpulab;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [missed: " << what << "]";
    }
  }
};

int failures = 0;

void run(int number, double time_limit, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit > 0.0 && seconds > time_limit) {
    out.pass = false;
    out.detail << " [took longer than " << time_limit << " s]";
  }
  if (!out.pass) ++failures;
  std::printf("criterion %d: %s (%.2f s)%s\n", number, out.pass ? "PASS" : "FAIL", seconds, out.detail.str().c_str());
  std::fflush(stdout);
}

Mdpu hidden_action_mdpu(double known, double hidden, DiscoveryModel model) {
  DiscreteMdp mdp(1, 2);
  mdp.add_outcome(0, 0, 0, 1.0, known);
  mdp.add_outcome(0, 1, 0, 1.0, hidden);
  return {mdp, {0}, {{0}}, {{1}}, std::move(model)};
}

UrmaxParams params_for(const LearningEnv& env, std::size_t horizon, std::size_t known, std::uint64_t explore) {
  UrmaxParams p;
  p.n_states_guess = env.num_states();
  p.n_actions_guess = env.num_actions();
  p.r_max_guess = env.reward_bound();
  p.mixing_time_guess = horizon;
  p.known_threshold = known;
  p.explore_budget = explore;
  return p;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

template <typename Tag>
Path<Tag> random_path(std::size_t dim, std::size_t ticks, Rng& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Path<Tag> p;
  std::size_t left = ticks;
  while (left > 0) {
    std::uniform_int_distribution<std::size_t> len(1, std::min<std::size_t>(left, 400));
    const std::size_t k = len(rng);
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (auto& x : v) x = u(rng);
    p.append(v, static_cast<double>(k) * 1e-3);
    left -= k;
  }
  return p;
}

void classifier(Outcome& out) {
  const PsiClass c = classify(DiscoveryModel::constant(0.1));
  out.require(c.verdict == Learnability::PolynomialTime, "constant 0.1 is PolynomialTime");
  const PsiClass p = classify(DiscoveryModel::power_law(0.1, 2.0));
  out.require(p.verdict == Learnability::Impossible, "power_law(0.1, 2) is Impossible");
  const double bound = 0.1 * std::numbers::pi * std::numbers::pi / 6.0;
  out.require(p.psi_limit_bound && std::abs(*p.psi_limit_bound - bound) <= 1e-6, "bound 0.1 pi^2/6");
  const PsiClass h = classify(DiscoveryModel::power_law(1.0, 1.0));
  out.require(h.verdict == Learnability::PolynomialTime, "power_law(1, 1) is PolynomialTime");
  out.detail << " bound=" << (p.psi_limit_bound ? *p.psi_limit_bound : -1.0);
}

void threshold(Outcome& out) {
  const auto a = exploration_threshold(DiscoveryModel::constant(0.1), 100, 0.1);
  const auto b = exploration_threshold(DiscoveryModel::constant(1.0), 1, 1.0);
  out.require(a == 83, "threshold(0.1, 100, 0.1) = 83");
  out.require(b == 2, "threshold(1, 1, 1) = 2");
  out.detail << " " << a << ", " << b;
}

void learner_vs_planner(Outcome& out) {
  Rng gen(2024);
  int close = 0;
  for (int run = 0; run < 100; ++run) {
    const DiscreteMdp mdp = testing_models::random_mdp(5, 3, gen);
    MdpuEnv env(fully_aware(mdp), 0, 50);
    UrmaxParams p = params_for(env, 50, default_known_threshold(1.0, 0.05, 0.1), 0);
    p.epsilon = 0.05;
    Rng rng(static_cast<std::uint64_t>(run));
    UrmaxLearner learner(env, p);
    learner.run(30'000, rng);
    const double optimum = value_iteration(mdp, 50).values.value[0];
    if (evaluate_policy(mdp, learner.exploit(), 0, 50) >= optimum - 0.05) ++close;
  }
  out.require(close >= 95, "URMAX within 0.05 in at least 95 of 100 runs");

  double worst = 0.0;
  Rng six(6);
  for (int trial = 0; trial < 10; ++trial) {
    const DiscreteMdp mdp = testing_models::random_mdp(6, 3, six);
    for (std::size_t h : {1u, 2u}) {
      const Eigen::VectorXd oracle = testing_models::exhaustive_markov_optimum(mdp, h);
      const Eigen::VectorXd vi = value_iteration(mdp, h).values.value * static_cast<double>(h);
      worst = std::max(worst, (vi - oracle).cwiseAbs().maxCoeff());
    }
    const Eigen::VectorXd gain = long_run_average(mdp, value_iteration(mdp, 400).policy);
    worst = std::max(worst, (gain - testing_models::exhaustive_gain_optimum(mdp)).cwiseAbs().maxCoeff());
  }
  out.require(worst <= 1e-9, "value iteration equals enumeration on 6-state models");
  out.detail << " close=" << close << "/100 enumeration_gap=" << worst;
}

void impossibility(Outcome& out) {
  const double x = std::numbers::pi * std::sqrt(0.1);
  const double exact = 1.0 - std::sin(x) / x;
  const int runs = 1000;
  int found = 0;
  double reward = 0.0;
  for (int run = 0; run < runs; ++run) {
    MdpuEnv env(hidden_action_mdpu(0.0, 1.0, DiscoveryModel::power_law(0.1, 2.0)), 0, 10);
    UrmaxLearner learner(env, params_for(env, 5, 1, 10'000));
    Rng rng(static_cast<std::uint64_t>(run));
    learner.run(10'010, rng);
    if (learner.state().discoveries > 0) ++found;
    reward += evaluate_policy(env.mdpu().underlying, learner.exploit(), 0, 10);
  }
  const double frequency = found / static_cast<double>(runs);
  const double mean = reward / runs;
  const double optimum = 1.0;
  const double gap = (1.0 - exact - 0.03) * (1.0 - 0.0);
  out.require(std::abs(frequency - exact) <= 0.03, "discovery frequency within 0.03");
  out.require(optimum - mean >= gap, "mean reward below optimal by the gap");
  out.detail << " frequency=" << frequency << " exact=" << exact << " mean_reward=" << mean << " gap=" << gap;
}

void brute_force_completeness(Outcome& out) {
  const CrawlerConfig cfg;
  std::size_t levels = 0;
  std::size_t states = 0;
  for (std::size_t level = 2; crawler_level(cfg, level).action_count() <= 10'000; ++level) {
    ++levels;
    // Paths of single-segment moves from the start posture to every reachable state.
    CrawlerLevelEnv probe(cfg, level);
    std::map<StateId, std::vector<ActionId>> route{{probe.start_state(), {}}};
    for (std::vector<StateId> frontier{probe.start_state()}; !frontier.empty();) {
      std::vector<StateId> next;
      for (StateId from : frontier) {
        for (std::uint64_t b = 0; b < probe.level().action_grid.size(); ++b) {
          const ActionId a = probe.catalog().id_of(std::vector<std::uint64_t>{b});
          Rng rng(0);
          probe.reset(rng);
          for (ActionId step : route[from]) probe.step(step, rng);
          const StepResult r = probe.step(a, rng);
          if (probe.is_terminal(r.next) || route.count(r.next)) continue;
          route[r.next] = route[from];
          route[r.next].push_back(a);
          next.push_back(r.next);
        }
      }
      frontier = std::move(next);
    }
    out.require(route.size() > 1, "more than one reachable state");
    for (const auto& [s, path] : route) {
      CrawlerLevelEnv env(cfg, level);
      std::vector<bool> aware(env.num_actions(), false);
      for (ActionId a : env.initially_aware(s)) aware[a] = true;
      std::set<ActionId> expected;
      for (ActionId a = 0; a < env.num_actions(); ++a) {
        if (!aware[a] && env.useful(s, a)) expected.insert(a);
      }
      Rng rng(s);
      env.reset(rng);
      for (ActionId a : path) env.step(a, rng);
      if (env.state() != s) {
        out.require(false, "reach state " + std::to_string(s));
        continue;
      }
      ++states;
      std::set<ActionId> found;
      std::uint64_t steps = 0;
      for (bool exhausted = false; !exhausted;) {
        const ExploreResult r = env.explore(steps + 1, aware, rng);
        ++steps;
        if (r.discovered) {
          aware[*r.discovered] = true;
          found.insert(*r.discovered);
        }
        exhausted = r.exhausted;
      }
      out.require(steps == env.num_actions(), "exhaustion after exactly |A'| steps");
      out.require(found == expected, "every useful action found");
    }
  }
  out.require(levels == 2, "levels 2 and 3 have at most 1e4 actions");
  out.detail << " states=" << states;

  CrawlerConfig noisy = cfg;
  noisy.noise_scale = 0.01;
  const ContinuousMdp cm = make_crawler_mdp(noisy);
  double worst = 0.0;
  for (std::size_t level : {2u, 3u}) {
    const DiscretizationLevel lv = crawler_level(noisy, level);
    const ActionCatalog catalog(lv);
    Rng rng(level);
    std::uniform_int_distribution<std::uint64_t> state(0, lv.state_grid.size() - 1);
    std::uniform_int_distribution<std::uint64_t> action(0, catalog.size() - 1);
    const DiscretizeOptions options = level == 2 ? DiscretizeOptions{2, Kernel::Ball} : DiscretizeOptions{8, Kernel::Nearest};
    for (int k = 0; k < 500; ++k) {
      const std::uint64_t s = state(rng);
      if (cm.is_terminal(lv.state_grid.point(s))) continue;
      const TransitionEstimate e = discretize_transition(cm, lv, s, catalog.path(action(rng)), rng, options);
      worst = std::max(worst, std::abs(e.total_probability() - 1.0));
    }
  }
  out.require(worst <= 1e-9, "transition masses sum to 1");
  out.detail << " levels=" << levels << " mass_error=" << worst;
}

void diagonal(Outcome& out) {
  const std::vector<Cell> first{{1, 1}, {1, 2}, {2, 1}, {1, 3}, {2, 2}, {3, 1}};
  DiagonalSchedule schedule;
  for (const Cell& c : first) out.require(schedule.next() == c, "first six cells");
  DiagonalSchedule walk;
  std::set<std::pair<std::size_t, std::size_t>> pending;
  for (std::size_t i = 1; i <= 50; ++i) {
    for (std::size_t k = 1; k <= 50; ++k) pending.insert({i, k});
  }
  for (std::uint64_t step = 1; !pending.empty(); ++step) {
    const Cell c = walk.next();
    if (pending.erase({c.level, c.rank}) == 1) {
      const std::uint64_t bound = (c.level + c.rank - 1) * (c.level + c.rank) / 2;
      out.require(step <= bound, "cell visited by its bound");
      out.require(DiagonalSchedule::step_of(c) == step && DiagonalSchedule::cell_at(step) == c, "step_of/cell_at");
    }
    if (step > 10'000) {
      out.require(false, "walk covers the 50x50 block");
      break;
    }
  }
}

void convergence(Outcome& out) {
  const CrawlerConfig cfg;
  const double amplitude = 2.45;
  const double q2 = 0.3;
  const ContinuousMdp cm = make_crawler_mdp(cfg);
  const auto policy = [&](const Eigen::VectorXd&) {
    return ActionPath({{vec({amplitude, -amplitude}), cfg.t_step},
                       {vec({-amplitude, amplitude}), cfg.t_step},
                       {vec({amplitude, -amplitude}), cfg.t_step},
                       {vec({-amplitude, amplitude}), cfg.t_step}});
  };
  const std::size_t m = 8;
  const double t = 4.0 * static_cast<double>(m) * cfg.t_step;
  const double g = cfg.gains[0];
  const double closed = (g * (amplitude + q2) + (4.0 * m - 1.0) * 2.0 * g * amplitude) / t;
  const Eigen::VectorXd start = vec({0.0, 0.0, -q2, q2, 0.0});
  const ConvergenceReport r =
      estimate_continuous_value(cm, policy, start, t, build_ladder(cfg, {2, 3, 4, 5}), {1, Kernel::Nearest});
  std::vector<double> diffs;
  for (std::size_t k = 1; k < r.values.size(); ++k) diffs.push_back(std::abs(r.values[k] - r.values[k - 1]));
  for (std::size_t k = 1; k < diffs.size(); ++k) out.require(diffs[k] < diffs[k - 1], "differences decrease");
  out.require(std::abs(r.limit - closed) <= 0.05 * std::abs(closed), "level 5 within 5% of the closed form");
  out.detail << " values=";
  for (double v : r.values) out.detail << v << " ";
  out.detail << "closed_form=" << closed;
}

void trends(Outcome& out) {
  ExperimentConfig config;
  config.methods = {"brute_force", "apprenticeship", "random", "repeat"};
  config.levels = {2, 3};
  config.budget = 20'000;
  config.checkpoints = 10;
  config.seeds = {1, 2, 3};
  config.evaluation_episodes = 1;
  config.learner.known_threshold = 1;
  const ExperimentResult result = run_experiment(config);
  for (const auto& row : result.runs.rows) out.require(row.status == "ok", "cell " + row.method + " ran");
  const auto best = [&](const std::string& method, std::size_t level) {
    const ResultRow* row = result.table.best(method, level);
    return row ? row->best_average_reward : -1e300;
  };
  const auto mean_useful = [&](const std::string& method, std::size_t level) {
    double total = 0.0;
    int count = 0;
    for (const auto& row : result.runs.rows) {
      if (row.method == method && row.level == level) {
        total += static_cast<double>(row.useful_found);
        ++count;
      }
    }
    return count ? total / count : 0.0;
  };
  out.require(best("brute_force", 3) >= best("brute_force", 2), "brute force level 3 >= level 2");
  out.require(mean_useful("apprenticeship", 2) >= mean_useful("brute_force", 2), "apprenticeship finds as many");
  out.require(best("apprenticeship", 2) >= best("brute_force", 2), "apprenticeship reward >= brute force");
  for (std::size_t level : config.levels) {
    const double urmax = std::max(best("brute_force", level), best("apprenticeship", level));
    out.require(best("random", level) <= urmax, "random <= URMAX at level " + std::to_string(level));
    out.require(best("repeat", level) <= urmax, "repeat <= URMAX at level " + std::to_string(level));
  }
  out.detail << " bf2=" << best("brute_force", 2) << " bf3=" << best("brute_force", 3)
             << " ap2=" << best("apprenticeship", 2) << " rnd2=" << best("random", 2)
             << " rep2=" << best("repeat", 2) << " useful bf2=" << mean_useful("brute_force", 2)
             << " ap2=" << mean_useful("apprenticeship", 2);
}

void property_suites(Outcome& out) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::size_t violations = 0;
  for (int k = 0; k < 10'000; ++k) {
    Eigen::VectorXd x(4), y(4), z(4);
    for (Eigen::Index d = 0; d < 4; ++d) {
      x[d] = u(rng);
      y[d] = u(rng);
      z[d] = u(rng);
    }
    if (l1_distance(x, z) > l1_distance(x, y) + l1_distance(y, z) + 1e-12) ++violations;
    if (l1_distance(x, y) != l1_distance(y, x) || l1_distance(x, x) != 0.0) ++violations;
  }
  for (int k = 0; k < 10'000; ++k) {
    const auto a = random_path<ActionTag>(2, 600, rng);
    const auto b = random_path<ActionTag>(2, 600, rng);
    const auto c = random_path<ActionTag>(2, 600, rng);
    const auto s = random_path<StateTag>(3, 600, rng);
    const auto s2 = random_path<StateTag>(3, 600, rng);
    const double ab = action_distance(a, b);
    if (ab < 0.0 || std::abs(ab - action_distance(b, a)) > 1e-12) ++violations;
    if (std::abs(action_distance(a, a)) > 1e-12) ++violations;
    if (action_distance(a, c) > ab + action_distance(b, c) + 1e-9) ++violations;
    if (std::abs(pair_distance(s, a, s2, b) - state_distance(s, s2) - ab) > 1e-12) ++violations;
  }
  out.require(violations == 0, "metric properties");

  DiscretizationLevel level;
  level.state_box = {vec({0.0}), vec({1.0})};
  level.state_grid = Grid({{0.1, 0.4, 0.6, 0.9}});
  level.action_box = level.state_box;
  level.action_grid = Grid({{0.25, 0.75}});
  level.time_step = 1.0;
  level.max_action_length = 2.0;
  level.resolution = 0.35;
  ContinuousMdp cm;
  cm.transition = [](const Eigen::VectorXd& s, const ActionPath& a, Rng& r) {
    std::normal_distribution<double> noise(0.0, 0.2);
    StatePath sc;
    double x = s[0];
    for (const auto& seg : a.segments) {
      x = std::clamp(0.5 * (x + seg.value[0]) + noise(r), 0.0, 1.0);
      sc.append(vec({x}), seg.duration);
    }
    return sc;
  };
  cm.reward = [](const Eigen::VectorXd&, const StatePath& sc, const ActionPath&) { return sc.end()[0]; };
  const ActionCatalog catalog(level);
  std::uniform_int_distribution<std::uint64_t> state(0, 3);
  std::uniform_int_distribution<std::uint64_t> action(0, catalog.size() - 1);
  std::size_t mass_violations = 0;
  for (int k = 0; k < 10'000; ++k) {
    const DiscretizeOptions options{4, k % 2 == 0 ? Kernel::Ball : Kernel::Nearest};
    const TransitionEstimate e = discretize_transition(cm, level, state(rng), catalog.path(action(rng)), rng, options);
    if (std::abs(e.total_probability() - 1.0) > 1e-9) ++mass_violations;
  }
  out.require(mass_violations == 0, "transition masses sum to 1");
  out.detail << " metric_violations=" << violations << " mass_violations=" << mass_violations;
}

}  // namespace

int main() {
  run(1, 1.0, classifier);
  run(2, 1.0, threshold);
  run(3, 60.0, learner_vs_planner);
  run(4, 60.0, impossibility);
  run(5, 0.0, brute_force_completeness);
  run(6, 0.0, diagonal);
  run(7, 300.0, convergence);
  run(8, 1800.0, trends);
  run(9, 0.0, property_suites);
  return failures == 0 ? 0 : 1;
}
