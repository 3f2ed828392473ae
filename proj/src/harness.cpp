#include "mdpulab/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mdpulab {

namespace {

const std::vector<std::string> kMethods{"brute_force", "random_probe", "apprenticeship", "random", "repeat"};

bool is_learner_method(const std::string& method) {
  return method == "brute_force" || method == "random_probe" || method == "apprenticeship";
}

ExploreMethod explore_method_of(const std::string& method) {
  if (method == "brute_force") return ExploreMethod::Systematic;
  if (method == "random_probe") return ExploreMethod::Random;
  return ExploreMethod::Apprenticeship;
}

std::string format_double(double x) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

std::string sanitize(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

template <typename T>
T value_or(const Json& doc, const std::string& name, T fallback, const std::string& where) {
  if (!doc.contains(name)) return fallback;
  try {
    return doc.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + name + ": wrong type");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (environment != "crawler") throw ConfigError("environment: unknown environment '" + environment + "'");
  try {
    crawler.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("environment.params: ") + e.what());
  }
  for (const auto& m : methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      throw ConfigError("methods: unknown method '" + m + "'");
    }
  }
  for (std::size_t level : levels) {
    if (level < 2) throw ConfigError("levels: crawler levels start at 2");
  }
  if (budget == 0) throw ConfigError("budget: must be positive");
  if (checkpoints == 0) throw ConfigError("checkpoints: must be positive");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta: must lie in (0, 1]");
  if (learner.planning_horizon == 0) throw ConfigError("learner.planning_horizon: must be positive");
  if (!(learner.epsilon > 0.0)) throw ConfigError("learner.epsilon: must be positive");
  if (!(learner.delta > 0.0 && learner.delta < 1.0)) throw ConfigError("learner.delta: must lie in (0, 1)");
  if (evaluation_horizon && !(*evaluation_horizon > 0.0)) throw ConfigError("evaluation.horizon: must be positive");
}

CrawlerConfig crawler_config_from_json(const Json& doc) {
  CrawlerConfig cfg;
  if (doc.is_null()) return cfg;
  const std::string where = "environment.params";
  cfg.arena_radius = value_or(doc, "arena_radius", cfg.arena_radius, where);
  cfg.n_joints = value_or(doc, "n_joints", cfg.n_joints, where);
  if (doc.contains("gains")) {
    cfg.gains = value_or(doc, "gains", cfg.gains, where);
  } else {
    cfg.gains.assign(cfg.n_joints, 0.02);
  }
  cfg.balance_limit = value_or(doc, "balance_limit", cfg.balance_limit, where);
  cfg.noise_scale = value_or(doc, "noise_scale", cfg.noise_scale, where);
  cfg.t_step = value_or(doc, "t_step", cfg.t_step, where);
  cfg.max_action_length = value_or(doc, "max_action_length", 4.0 * cfg.t_step, where);
  cfg.joint_limit = value_or(doc, "joint_limit", cfg.joint_limit, where);
  cfg.episode_duration = value_or(doc, "episode_duration", 64.0 * cfg.max_action_length, where);
  return cfg;
}

Json crawler_config_to_json(const CrawlerConfig& cfg) {
  return {{"arena_radius", cfg.arena_radius}, {"n_joints", cfg.n_joints},     {"gains", cfg.gains},
          {"balance_limit", cfg.balance_limit}, {"noise_scale", cfg.noise_scale}, {"t_step", cfg.t_step},
          {"max_action_length", cfg.max_action_length}, {"joint_limit", cfg.joint_limit},
          {"episode_duration", cfg.episode_duration}};
}

ExperimentConfig experiment_config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected an object");
  ExperimentConfig cfg;
  const std::string where = "config";
  if (doc.contains("environment")) {
    const Json& env = doc.at("environment");
    cfg.environment = value_or<std::string>(env, "name", "crawler", "environment");
    cfg.crawler = crawler_config_from_json(env.contains("params") ? env.at("params") : Json());
  }
  cfg.methods = value_or(doc, "methods", cfg.methods, where);
  cfg.levels = value_or(doc, "levels", cfg.levels, where);
  cfg.budget = value_or(doc, "budget", cfg.budget, where);
  cfg.checkpoints = value_or(doc, "checkpoints", cfg.checkpoints, where);
  cfg.seeds = value_or(doc, "seeds", cfg.seeds, where);
  cfg.beta = value_or(doc, "beta", cfg.beta, where);
  cfg.output_dir = value_or(doc, "output_dir", cfg.output_dir, where);
  if (doc.contains("evaluation")) {
    const Json& ev = doc.at("evaluation");
    cfg.evaluation_episodes = value_or(ev, "episodes", cfg.evaluation_episodes, "evaluation");
    if (ev.contains("horizon")) cfg.evaluation_horizon = value_or(ev, "horizon", 0.0, "evaluation");
  }
  if (doc.contains("learner")) {
    const Json& l = doc.at("learner");
    auto& s = cfg.learner;
    s.planning_horizon = value_or(l, "planning_horizon", s.planning_horizon, "learner");
    s.epsilon = value_or(l, "epsilon", s.epsilon, "learner");
    s.delta = value_or(l, "delta", s.delta, "learner");
    if (l.contains("known_threshold")) s.known_threshold = value_or<std::size_t>(l, "known_threshold", 1, "learner");
    if (l.contains("explore_budget")) s.explore_budget = value_or<std::uint64_t>(l, "explore_budget", 1, "learner");
    const std::string awareness = value_or<std::string>(l, "awareness", "global", "learner");
    if (awareness == "global") {
      s.awareness = Awareness::Global;
    } else if (awareness == "per_state") {
      s.awareness = Awareness::PerState;
    } else {
      throw ConfigError("learner.awareness: expected 'global' or 'per_state'");
    }
  }
  cfg.validate();
  return cfg;
}

const std::vector<std::string>& ResultsTable::columns() {
  static const std::vector<std::string> names{
      "method",          "level",          "seed",           "n_states",      "n_basic_actions",
      "n_potential_actions", "time_step_ms", "action_length_ms", "budget_consumed", "best_average_reward",
      "useful_found",    "stable_gaits",   "status"};
  return names;
}

std::string ResultsTable::to_csv() const {
  std::ostringstream out;
  const auto& names = columns();
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  out << '\n';
  for (const auto& r : rows) {
    out << sanitize(r.method) << ',' << r.level << ',' << r.seed << ',' << r.n_states << ',' << r.n_basic_actions
        << ',' << r.n_potential_actions << ',' << format_double(r.time_step_ms) << ','
        << format_double(r.action_length_ms) << ',' << r.budget_consumed << ','
        << format_double(r.best_average_reward) << ',' << r.useful_found << ',' << r.stable_gaits << ','
        << sanitize(r.status) << '\n';
  }
  return out.str();
}

ResultsTable ResultsTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("results: empty document");
  std::string expected;
  for (std::size_t k = 0; k < columns().size(); ++k) expected += (k ? "," : "") + columns()[k];
  if (line != expected) throw ConfigError("results: unexpected header");
  ResultsTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != columns().size()) throw ConfigError("results: wrong cell count in '" + line + "'");
    try {
      ResultRow r;
      r.method = cells[0];
      r.level = std::stoull(cells[1]);
      r.seed = std::stoull(cells[2]);
      r.n_states = std::stoull(cells[3]);
      r.n_basic_actions = std::stoull(cells[4]);
      r.n_potential_actions = std::stoull(cells[5]);
      r.time_step_ms = std::stod(cells[6]);
      r.action_length_ms = std::stod(cells[7]);
      r.budget_consumed = std::stoull(cells[8]);
      r.best_average_reward = std::stod(cells[9]);
      r.useful_found = std::stoull(cells[10]);
      r.stable_gaits = std::stoull(cells[11]);
      r.status = cells[12];
      table.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError("results: malformed number in '" + line + "'");
    }
  }
  return table;
}

const ResultRow* ResultsTable::best(const std::string& method, std::size_t level) const {
  const ResultRow* best = nullptr;
  for (const auto& r : rows) {
    if (r.method != method || r.level != level || r.status != "ok") continue;
    if (!best || r.best_average_reward > best->best_average_reward) best = &r;
  }
  return best;
}

UrmaxParams crawler_params(CrawlerLevelEnv& env, const LearnerSettings& settings) {
  UrmaxParams p;
  p.n_states_guess = env.num_states();
  p.n_actions_guess = env.num_actions();
  p.r_max_guess = env.reward_bound();
  p.mixing_time_guess = settings.planning_horizon;
  p.epsilon = settings.epsilon;
  p.delta = settings.delta;
  p.known_threshold = settings.known_threshold.value_or(default_known_threshold(p.r_max_guess, p.epsilon, p.delta));
  p.explore_budget = settings.explore_budget.value_or(default_explore_budget(env.discovery_model(), p));
  p.awareness = settings.awareness;
  return p;
}

namespace {

std::string log_line(const std::string& method, std::size_t level, std::uint64_t seed, const LogRecord& r) {
  Json payload{{"value", r.value}};
  if (r.event != LogRecord::Event::Replan && r.event != LogRecord::Event::Evaluate) {
    payload["state"] = r.state;
    payload["action"] = r.action;
  }
  const Json line{{"step", r.step},
                  {"cell", {{"method", method}, {"level", level}, {"seed", seed}}},
                  {"event", to_string(r.event)},
                  {"payload", payload}};
  return line.dump();
}

}  // namespace

ResultRow run_cell(const ExperimentConfig& config, const std::string& method, std::size_t level, std::uint64_t seed,
                   std::vector<std::string>* log) {
  ResultRow row;
  row.method = method;
  row.level = level;
  row.seed = seed;
  try {
    CrawlerConfig crawler = config.crawler;
    if (config.evaluation_horizon) crawler.episode_duration = *config.evaluation_horizon;
    CrawlerEnvOptions options;
    options.method = is_learner_method(method) ? explore_method_of(method) : ExploreMethod::Systematic;
    options.beta = config.beta;
    options.seed = seed;
    CrawlerLevelEnv env(crawler, level, options);
    const auto& lvl = env.level();
    row.n_states = env.num_states();
    row.n_basic_actions = lvl.action_grid.size();
    row.n_potential_actions = lvl.action_count();
    row.time_step_ms = lvl.time_step * 1000.0;
    row.action_length_ms = lvl.max_action_length * 1000.0;

    Rng rng(seed);
    if (method == "random" || method == "repeat") {
      const BaselineReport report =
          method == "random" ? baseline_random(env, config.budget, rng) : baseline_repeat(env, config.budget, rng);
      row.budget_consumed = report.steps_used;
      row.best_average_reward = report.best_score;
      row.useful_found = report.useful_found;
      row.stable_gaits = report.stable_gaits.size();
      return row;
    }

    UrmaxLearner learner(env, crawler_params(env, config.learner));
    learner.keep_log = false;
    if (log) learner.on_log = [&](const LogRecord& r) { log->push_back(log_line(method, level, seed, r)); };
    const std::size_t episodes = config.evaluation_episodes > 0
                                     ? config.evaluation_episodes
                                     : default_evaluation_episodes(config.learner.epsilon, config.learner.delta);
    Rng eval_rng(mix_seed(seed, level, 0x65766c));
    double best = 0.0;
    bool any = false;
    bool stable = false;
    for (std::size_t c = 0; c < config.checkpoints; ++c) {
      const std::uint64_t target = config.budget * (c + 1) / config.checkpoints;
      row.budget_consumed += learner.run(target - row.budget_consumed, rng);
      const EpisodeStats stats = evaluate_in_env(env, learner.exploit(), episodes, eval_rng, crawler.t_step);
      learner.restart_episode();
      if (log) {
        log->push_back(log_line(method, level, seed,
                                {row.budget_consumed, LogRecord::Event::Evaluate, 0, kNoAction, stats.mean}));
      }
      if (!any || stats.mean > best) {
        best = stats.mean;
        stable = stats.goals > 0;
        any = true;
      }
    }
    row.best_average_reward = best;
    row.useful_found = learner.state().discoveries;
    row.stable_gaits = stable ? 1 : 0;
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  return row;
}

ResultsTable aggregate(const ResultsTable& runs) {
  ResultsTable out;
  for (const auto& r : runs.rows) {
    const bool seen = std::any_of(out.rows.begin(), out.rows.end(), [&](const ResultRow& o) {
      return o.method == r.method && o.level == r.level;
    });
    if (seen) continue;
    const ResultRow* best = runs.best(r.method, r.level);
    out.rows.push_back(best ? *best : r);
  }
  return out;
}

std::string summarize(const ResultsTable& table) {
  std::ostringstream out;
  out << table.rows.size() << " cells\n";
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (const auto& r : table.rows) {
    const std::pair<std::string, std::size_t> key{r.method, r.level};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [method, level] : keys) {
    const ResultRow* best = table.best(method, level);
    out << method << " level " << level << ": ";
    if (best) {
      out << "best average reward " << best->best_average_reward << " (seed " << best->seed << "), useful actions "
          << best->useful_found << '\n';
    } else {
      out << "no successful cell\n";
    }
  }
  for (const auto& r : table.rows) {
    if (r.status != "ok") out << "cell " << r.method << "/" << r.level << "/" << r.seed << ": " << r.status << '\n';
  }
  return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  const bool write = !config.output_dir.empty();
  for (const auto& method : config.methods) {
    for (std::size_t level : config.levels) {
      for (std::uint64_t seed : config.seeds) {
        result.runs.rows.push_back(run_cell(config, method, level, seed, write ? &result.log : nullptr));
      }
    }
  }
  result.table = aggregate(result.runs);
  result.summary = summarize(result.runs);
  if (write) {
    std::filesystem::create_directories(config.output_dir);
    const std::filesystem::path dir(config.output_dir);
    std::ofstream(dir / "results.csv") << result.table.to_csv();
    std::ofstream(dir / "runs.csv") << result.runs.to_csv();
    std::ofstream logs(dir / "log.jsonl");
    for (const auto& line : result.log) logs << line << '\n';
    std::ofstream(dir / "summary.txt") << result.summary;
  }
  return result;
}

}  // namespace mdpulab
