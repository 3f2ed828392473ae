#include "mdpulab/crawler.hpp"
#include "mdpulab/discovery.hpp"
#include "mdpulab/harness.hpp"
#include "mdpulab/io.hpp"
#include "mdpulab/urmax.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace mdpulab;

namespace {

struct ModelFlags {
  std::string kind = "constant";
  double beta = 0.1;
  double c = 0.1;
  double p = 2.0;
  std::uint64_t total = 0;
  std::uint64_t useful = 0;
  std::string file;

  void add(CLI::App* cmd) {
    cmd->add_option("--kind", kind, "constant, power_law, brute_force_systematic or brute_force_random")
        ->check(CLI::IsMember({"constant", "power_law", "brute_force_systematic", "brute_force_random"}));
    cmd->add_option("--beta", beta, "constant discovery probability (teacher rate for the crawler)");
    cmd->add_option("--c", c, "power-law scale");
    cmd->add_option("--p", p, "power-law exponent");
    cmd->add_option("--total", total, "brute-force action count");
    cmd->add_option("--useful", useful, "brute-force useful action count");
    cmd->add_option("--model", file, "discovery model JSON file (overrides the other model flags)");
  }

  DiscoveryModel build() const {
    if (!file.empty()) return discovery_from_json(read_json_file(file));
    if (kind == "constant") return DiscoveryModel::constant(beta);
    if (kind == "power_law") return DiscoveryModel::power_law(c, p);
    if (kind == "brute_force_systematic") return DiscoveryModel::brute_force_systematic(total, useful);
    return DiscoveryModel::brute_force_random(total, useful);
  }
};

Json certificate_json(const PsiClass& cls) {
  Json out{{"class", to_string(cls.verdict)}, {"rationale", cls.rationale}};
  out["psi_limit_bound"] = cls.psi_limit_bound ? Json(*cls.psi_limit_bound) : Json();
  out["certificate"] =
      cls.certificate ? Json{{"m1", cls.certificate->m1}, {"m2", cls.certificate->m2}} : Json();
  return out;
}

Json threshold_json(const DiscoveryModel& model, std::uint64_t n, double delta) {
  try {
    return exploration_threshold(model, n, delta);
  } catch (const ThresholdNotReached& e) {
    return Json{{"not_reached", true}, {"partial_sum", e.partial_sum}, {"cutoff", e.cutoff}};
  }
}

Json level_json(const CrawlerLevelEnv& env) {
  const auto& lvl = env.level();
  return {{"level", lvl.index},
          {"n_states", env.num_states()},
          {"n_basic_actions", lvl.action_grid.size()},
          {"n_potential_actions", lvl.action_count()},
          {"time_step_ms", lvl.time_step * 1000.0},
          {"action_length_ms", lvl.max_action_length * 1000.0},
          {"resolution", lvl.resolution}};
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw ConfigError("log: cannot open '" + path + "'");
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning with unawareness of actions: discovery models, URMAX and the crawler ladder"};
  app.require_subcommand(1);

  ModelFlags classify_flags;
  std::uint64_t classify_n = 100;
  double classify_delta = 0.1;
  auto* classify_cmd = app.add_subcommand("classify", "learnability class of a discovery model");
  classify_flags.add(classify_cmd);
  classify_cmd->add_option("--n", classify_n, "N in ln(4N/delta)");
  classify_cmd->add_option("--delta", classify_delta, "confidence parameter");

  ModelFlags threshold_flags;
  std::uint64_t threshold_n = 100;
  double threshold_delta = 0.1;
  std::uint64_t threshold_cutoff = 10'000'000;
  auto* threshold_cmd = app.add_subcommand("threshold", "least T with Psi(T) >= ln(4N/delta)");
  threshold_flags.add(threshold_cmd);
  threshold_cmd->add_option("--n", threshold_n, "N in ln(4N/delta)");
  threshold_cmd->add_option("--delta", threshold_delta, "confidence parameter");
  threshold_cmd->add_option("--cutoff", threshold_cutoff, "largest T scanned");

  std::string learn_mdpu;
  std::size_t learn_start = 0;
  std::size_t learn_episode = 100;
  std::uint64_t learn_budget = 10000;
  std::vector<std::uint64_t> learn_seeds{1};
  std::size_t learn_depth = 2;
  std::uint64_t learn_cell_budget = 1000;
  std::size_t learn_episodes = 1;
  std::string learn_method = "brute_force";
  std::string learn_log;
  ModelFlags learn_flags;
  auto* learn_cmd = app.add_subcommand("learn", "URMAX on an MDPU document or diagonally on the crawler ladder");
  learn_cmd->add_option("--mdpu", learn_mdpu, "MDPU JSON file; the crawler ladder when absent");
  learn_cmd->add_option("--start", learn_start, "start state of the MDPU");
  learn_cmd->add_option("--episode", learn_episode, "MDPU episode length in steps");
  learn_cmd->add_option("--budget", learn_budget, "total step budget per seed");
  learn_cmd->add_option("--seeds", learn_seeds, "seeds");
  learn_cmd->add_option("--depth", learn_depth, "crawler ladder depth (levels 2..depth+1)");
  learn_cmd->add_option("--cell-budget", learn_cell_budget, "steps per diagonal cell");
  learn_cmd->add_option("--eval-episodes", learn_episodes, "evaluation episodes per cell");
  learn_cmd->add_option("--method", learn_method, "crawler exploration: brute_force, random_probe, apprenticeship");
  learn_cmd->add_option("--log", learn_log, "write line-delimited log records here");
  learn_flags.add(learn_cmd);

  std::vector<std::size_t> ladder_levels{2, 3, 4, 5};
  auto* ladder_cmd = app.add_subcommand("ladder", "sizes of crawler discretization levels");
  ladder_cmd->add_option("--levels", ladder_levels, "levels (>= 2)");

  std::string baseline_kind = "random";
  std::size_t baseline_level = 2;
  std::uint64_t baseline_budget = 10000;
  std::uint64_t baseline_seed = 1;
  auto* baseline_cmd = app.add_subcommand("baseline", "random or repeat baseline on a crawler level");
  baseline_cmd->add_option("--kind", baseline_kind, "random or repeat")->check(CLI::IsMember({"random", "repeat"}));
  baseline_cmd->add_option("--level", baseline_level, "crawler level");
  baseline_cmd->add_option("--budget", baseline_budget, "step budget");
  baseline_cmd->add_option("--seed", baseline_seed, "seed");

  std::string experiment_config;
  std::string experiment_output;
  auto* experiment_cmd = app.add_subcommand("experiment", "run a (method, level, seed) grid from a config document");
  experiment_cmd->add_option("config", experiment_config, "experiment JSON file")->required();
  experiment_cmd->add_option("--output", experiment_output, "output directory (overrides output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return app.exit(e);
  }

  try {
    if (*classify_cmd) {
      const DiscoveryModel model = classify_flags.build();
      const PsiClass cls = classify(model);
      Json out = certificate_json(cls);
      out["model"] = discovery_to_json(model);
      out["threshold"] = threshold_json(model, classify_n, classify_delta);
      std::cout << out.dump() << '\n';
      std::cerr << model.describe() << ": " << to_string(cls.verdict) << '\n';
    } else if (*threshold_cmd) {
      const DiscoveryModel model = threshold_flags.build();
      try {
        std::cout << exploration_threshold(model, threshold_n, threshold_delta, threshold_cutoff) << '\n';
      } catch (const ThresholdNotReached& e) {
        std::cerr << "threshold not reached by T = " << e.cutoff << " (Psi = " << e.partial_sum << ")\n";
        return 2;
      }
    } else if (*learn_cmd) {
      std::vector<std::string> log;
      Json runs = Json::array();
      for (std::uint64_t seed : learn_seeds) {
        Rng rng(seed);
        if (!learn_mdpu.empty()) {
          Mdpu mdpu = mdpu_from_json(read_json_file(learn_mdpu));
          if (!learn_flags.file.empty() || learn_cmd->count("--kind") > 0) mdpu.discovery = learn_flags.build();
          MdpuEnv env(std::move(mdpu), learn_start, learn_episode);
          UrmaxParams params;
          params.n_states_guess = env.num_states();
          params.n_actions_guess = env.num_actions();
          params.r_max_guess = std::max(env.reward_bound(), 1e-12);
          params.mixing_time_guess = learn_episode;
          params.known_threshold = default_known_threshold(params.r_max_guess, params.epsilon, params.delta);
          params.explore_budget = default_explore_budget(env.discovery_model(), params);
          UrmaxLearner learner(env, params);
          learner.keep_log = false;
          learner.on_log = [&](const LogRecord& r) {
            log.push_back(Json{{"step", r.step},
                               {"cell", {{"seed", seed}}},
                               {"event", to_string(r.event)},
                               {"payload", {{"state", r.state}, {"action", r.action}, {"value", r.value}}}}
                              .dump());
          };
          const std::uint64_t used = learner.run(learn_budget, rng);
          const Policy policy = learner.exploit();
          const EpisodeStats stats = evaluate_in_env(env, policy, learn_episodes, rng);
          runs.push_back(Json{{"seed", seed},
                          {"steps", used},
                          {"discoveries", learner.state().discoveries},
                          {"average_reward", stats.mean},
                          {"policy", policy.choice}});
        } else {
          CrawlerEnvOptions options;
          options.method = parse_explore_method(learn_method);
          options.beta = learn_flags.beta;
          options.seed = seed;
          const CrawlerConfig cfg;
          Ladder lad;
          lad.depth = learn_depth;
          lad.make = [&](std::size_t level) -> std::unique_ptr<LearningEnv> {
            return std::make_unique<CrawlerLevelEnv>(cfg, level + 1, options);
          };
          lad.label = [](std::size_t level) { return level + 1; };
          lad.idle_duration = cfg.t_step;
          DiagonalOptions dopt;
          dopt.cell_budget = learn_cell_budget;
          dopt.evaluation_episodes = learn_episodes;
          dopt.on_log = [&](const LogRecord& r, const Cell& cell) {
            Json payload{{"value", r.value}};
            if (r.event == LogRecord::Event::Discover || r.event == LogRecord::Event::Known) {
              payload["state"] = r.state;
              payload["action"] = r.action;
            }
            log.push_back(Json{{"step", r.step},
                               {"cell", {{"seed", seed}, {"level", cell.level + 1}, {"rank", cell.rank}}},
                               {"event", to_string(r.event)},
                               {"payload", payload}}
                              .dump());
          };
          const DiagonalResult result = diagonal_run(lad, rng, learn_budget, dopt);
          Json cells = Json::array();
          for (const auto& c : result.cells) {
            cells.push_back(Json{{"level", c.label},
                             {"rank", c.cell.rank},
                             {"budget_used", c.budget_used},
                             {"score", c.score},
                             {"best_score", c.best_score},
                             {"aware_actions", c.aware_actions},
                             {"discoveries", c.discoveries}});
          }
          runs.push_back(Json{{"seed", seed},
                          {"steps", result.budget_used},
                          {"level", result.level + 1},
                          {"best_average_reward", result.best_score},
                          {"cells", cells}});
        }
      }
      write_lines(learn_log, log);
      std::cout << runs.dump() << '\n';
      std::cerr << runs.size() << " run(s), " << log.size() << " log record(s)\n";
    } else if (*ladder_cmd) {
      Json out = Json::array();
      for (std::size_t level : ladder_levels) {
        CrawlerLevelEnv env(CrawlerConfig{}, level);
        out.push_back(level_json(env));
        std::cerr << "level " << level << ": " << env.num_states() << " states, " << env.num_actions()
                  << " actions\n";
      }
      std::cout << out.dump() << '\n';
    } else if (*baseline_cmd) {
      CrawlerLevelEnv env(CrawlerConfig{}, baseline_level, CrawlerEnvOptions{ExploreMethod::Systematic, 0.2, 1,
                                                                             baseline_seed});
      Rng rng(baseline_seed);
      const BaselineReport report = baseline_kind == "random" ? baseline_random(env, baseline_budget, rng)
                                                              : baseline_repeat(env, baseline_budget, rng);
      Json out = level_json(env);
      out["kind"] = baseline_kind;
      out["steps_used"] = report.steps_used;
      out["max_distance"] = report.max_distance;
      out["best_average_reward"] = report.best_score;
      out["useful_found"] = report.useful_found;
      out["stable_gaits"] = report.stable_gaits;
      std::cout << out.dump() << '\n';
      std::cerr << baseline_kind << " baseline: best average reward " << report.best_score << ", "
                << report.stable_gaits.size() << " stable gait(s)\n";
    } else if (*experiment_cmd) {
      ExperimentConfig cfg = experiment_config_from_json(read_json_file(experiment_config));
      if (!experiment_output.empty()) cfg.output_dir = experiment_output;
      const ExperimentResult result = run_experiment(cfg);
      std::cout << result.table.to_csv();
      std::cerr << result.summary;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
