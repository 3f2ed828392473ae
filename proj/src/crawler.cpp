#include "mdpulab/crawler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mdpulab {

namespace {

constexpr double kPostureOffset = 1e-3;

Eigen::VectorXd clamp_targets(const CrawlerConfig& cfg, const Eigen::VectorXd& v) {
  return v.cwiseMax(-cfg.joint_limit).cwiseMin(cfg.joint_limit);
}

}  // namespace

void CrawlerConfig::validate() const {
  if (!(arena_radius > 0.0)) throw std::invalid_argument("crawler: arena_radius must be positive");
  if (n_joints == 0) throw std::invalid_argument("crawler: need at least one joint");
  if (gains.size() != n_joints) throw std::invalid_argument("crawler: one gain per joint");
  for (double g : gains) {
    if (!(g >= 0.0)) throw std::invalid_argument("crawler: gains must be non-negative");
  }
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("crawler: noise_scale must be non-negative");
  if (!(t_step > 0.0) || !(max_action_length >= t_step)) {
    throw std::invalid_argument("crawler: need 0 < t_step <= max_action_length");
  }
  const double ratio = max_action_length / t_step;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("crawler: max_action_length must be a multiple of t_step");
  }
  if (!(joint_limit > 0.0) || !(balance_limit > 0.0) || !(episode_duration > 0.0)) {
    throw std::invalid_argument("crawler: joint_limit, balance_limit and episode_duration must be positive");
  }
}

double CrawlerConfig::rate_bound() const {
  const double g_max = *std::max_element(gains.begin(), gains.end());
  return 1.01 * g_max * 2.0 * joint_limit / t_step + 1e-12;
}

CrawlerState CrawlerState::rest(const CrawlerConfig& cfg) {
  CrawlerState s;
  s.joints = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.n_joints));
  return s;
}

Eigen::VectorXd CrawlerState::to_vector() const {
  const auto n = joints.size();
  Eigen::VectorXd v(n + 3);
  v[0] = position.x();
  v[1] = position.y();
  v.segment(2, n) = joints;
  v[n + 2] = fallen ? 1.0 : 0.0;
  return v;
}

CrawlerState CrawlerState::from_vector(const Eigen::VectorXd& v) {
  if (v.size() < 4) throw std::invalid_argument("crawler state vector too short");
  CrawlerState s;
  s.position = {v[0], v[1]};
  s.joints = v.segment(2, v.size() - 3);
  s.fallen = v[v.size() - 1] >= 0.5;
  return s;
}

StatePath crawler_dynamics(const CrawlerConfig& cfg, const CrawlerState& s, const ActionPath& a, Rng& rng) {
  a.validate();
  if (a.length() > cfg.max_action_length + kLengthTolerance) {
    throw std::invalid_argument("crawler: action longer than max_action_length");
  }
  if (a.dimension() != cfg.n_joints || static_cast<std::size_t>(s.joints.size()) != cfg.n_joints) {
    throw std::invalid_argument("crawler: joint count mismatch");
  }
  if (s.fallen) throw std::invalid_argument("crawler: dynamics from a fallen state");

  std::normal_distribution<double> noise(0.0, cfg.noise_scale > 0.0 ? cfg.noise_scale : 1.0);
  CrawlerState cur = s;
  StatePath path;
  for (const auto& seg : a.segments) {
    if (!cur.fallen) {
      const Eigen::VectorXd target = clamp_targets(cfg, seg.value);
      const Eigen::VectorXd delta = target - cur.joints;
      double instability = std::abs(delta.sum()) + std::abs(target.sum());
      if (cfg.noise_scale > 0.0) instability += std::abs(noise(rng));
      if (instability > cfg.balance_limit) {
        cur.fallen = true;
      } else {
        std::size_t pushers = 0;
        double dx = 0.0;
        for (std::size_t j = 0; j < cfg.n_joints; ++j) {
          const double d = delta[static_cast<Eigen::Index>(j)];
          if (d < 0.0) {
            ++pushers;
            dx = cfg.gains[j] * -d;
          }
        }
        if (pushers != 1) dx = 0.0;
        double dy = 0.0;
        if (cfg.noise_scale > 0.0) {
          dx += noise(rng);
          dy += noise(rng);
        }
        cur.position += Eigen::Vector2d(dx, dy);
        cur.joints = target;
      }
    }
    path.append(cur.to_vector(), seg.duration);
  }
  return path;
}

double crawler_reward(const CrawlerConfig&, const CrawlerState& s1, const StatePath& sc, const ActionPath&) {
  const CrawlerState end = CrawlerState::from_vector(sc.end());
  return end.position.norm() - s1.position.norm();
}

double stride_length(const CrawlerConfig& cfg, double amplitude) {
  if (cfg.n_joints != 2) throw std::invalid_argument("stride_length: two joints only");
  return cfg.gains[1] * amplitude + 2.0 * cfg.gains[0] * amplitude;
}

ActionPath mirror(const ActionPath& a) {
  ActionPath out;
  for (const auto& seg : a.segments) out.append(seg.value.reverse(), seg.duration);
  return out;
}

ContinuousMdp make_crawler_mdp(const CrawlerConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n_joints);
  ContinuousMdp cm;
  cm.state_box.lo = Eigen::VectorXd(n + 3);
  cm.state_box.hi = Eigen::VectorXd(n + 3);
  cm.state_box.lo << -cfg.arena_radius, -cfg.arena_radius, Eigen::VectorXd::Constant(n, -cfg.joint_limit), 0.0;
  cm.state_box.hi << cfg.arena_radius, cfg.arena_radius, Eigen::VectorXd::Constant(n, cfg.joint_limit), 1.0;
  cm.action_box.lo = Eigen::VectorXd::Constant(n, -cfg.joint_limit);
  cm.action_box.hi = Eigen::VectorXd::Constant(n, cfg.joint_limit);
  cm.max_action_length = cfg.max_action_length;
  cm.feasible = [cfg](const ActionPath& a) {
    return a.length() <= cfg.max_action_length + kLengthTolerance && a.dimension() == cfg.n_joints;
  };
  cm.transition = [cfg](const Eigen::VectorXd& s, const ActionPath& a, Rng& rng) {
    return crawler_dynamics(cfg, CrawlerState::from_vector(s), a, rng);
  };
  cm.reward = [cfg](const Eigen::VectorXd& s, const StatePath& sc, const ActionPath& a) {
    return crawler_reward(cfg, CrawlerState::from_vector(s), sc, a);
  };
  cm.reward_rate_bound = cfg.rate_bound();
  cm.terminal = [](const Eigen::VectorXd& s) { return s[s.size() - 1] >= 0.5; };
  cm.failed = cm.terminal;
  return cm;
}

double crawler_resolution(const CrawlerConfig& cfg, std::size_t level) {
  if (level < 2) throw std::invalid_argument("crawler levels start at 2");
  return static_cast<double>(cfg.n_joints) * cfg.joint_limit / static_cast<double>(level) +
         2.0 * cfg.arena_radius + 0.5;
}

DiscretizationLevel crawler_level(const CrawlerConfig& cfg, std::size_t level) {
  cfg.validate();
  if (level < 2) throw std::invalid_argument("crawler levels start at 2");
  const ContinuousMdp cm = make_crawler_mdp(cfg);
  DiscretizationLevel out;
  out.index = level;
  out.state_box = cm.state_box;
  out.action_box = cm.action_box;
  const Grid joint_grid = Grid::uniform(cm.action_box, std::vector<std::size_t>(cfg.n_joints, level));
  std::vector<std::vector<double>> axes{{0.0}, {0.0}};
  for (std::size_t j = 0; j < cfg.n_joints; ++j) axes.push_back(joint_grid.axis(j));
  axes.push_back({0.0, 1.0});
  out.state_grid = Grid(std::move(axes));
  out.action_grid = joint_grid;
  out.time_step = cfg.t_step;
  out.max_action_length = cfg.max_action_length;
  out.resolution = crawler_resolution(cfg, level);
  return out;
}

std::vector<DiscretizationLevel> build_ladder(const CrawlerConfig& cfg, const std::vector<std::size_t>& levels) {
  std::vector<DiscretizationLevel> out;
  for (std::size_t i : levels) out.push_back(crawler_level(cfg, i));
  return out;
}

ExploreMethod parse_explore_method(const std::string& name) {
  if (name == "systematic" || name == "brute_force" || name == "brute-force") return ExploreMethod::Systematic;
  if (name == "random" || name == "random_probe") return ExploreMethod::Random;
  if (name == "apprenticeship") return ExploreMethod::Apprenticeship;
  throw std::invalid_argument("unknown exploration method '" + name + "'");
}

std::string to_string(ExploreMethod method) {
  switch (method) {
    case ExploreMethod::Systematic:
      return "brute_force";
    case ExploreMethod::Random:
      return "random_probe";
    case ExploreMethod::Apprenticeship:
      return "apprenticeship";
  }
  return "?";
}

CrawlerLevelEnv::CrawlerLevelEnv(CrawlerConfig cfg, std::size_t level, CrawlerEnvOptions options)
    : cfg_(std::move(cfg)),
      options_(options),
      level_(crawler_level(cfg_, level)),
      catalog_(level_),
      cm_(make_crawler_mdp(cfg_)),
      joint_states_(level_.action_grid.size()) {
  if (options_.method == ExploreMethod::Apprenticeship && !(options_.beta > 0.0 && options_.beta <= 1.0)) {
    throw std::invalid_argument("apprenticeship beta must lie in (0, 1]");
  }
  Eigen::VectorXd posture(static_cast<Eigen::Index>(cfg_.n_joints));
  for (Eigen::Index j = 0; j < posture.size(); ++j) posture[j] = (j % 2 == 0) ? -kPostureOffset : kPostureOffset;
  start_ = level_.action_grid.nearest(posture);
  recovery_ = catalog_.id_of(std::vector<std::uint64_t>{start_});
  useful_cache_.assign(joint_states_ * catalog_.size(), -1);
  cursor_.assign(joint_states_, 0);
  body_ = CrawlerState::rest(cfg_);
  body_.joints = joints_of(start_);
}

Eigen::VectorXd CrawlerLevelEnv::joints_of(StateId s) const {
  if (s >= joint_states_) throw std::out_of_range("crawler: no joints for the fallen state");
  return level_.action_grid.point(s);
}

StateId CrawlerLevelEnv::state_of(const Eigen::VectorXd& joints) const {
  return level_.action_grid.nearest(joints);
}

StateId CrawlerLevelEnv::reset(Rng&) {
  body_ = CrawlerState::rest(cfg_);
  body_.joints = joints_of(start_);
  current_ = start_;
  elapsed_ = 0.0;
  return current_;
}

StepResult CrawlerLevelEnv::step(ActionId a, Rng& rng) {
  if (is_terminal(current_)) throw std::logic_error("crawler: step from the fallen state");
  const ActionPath path = catalog_.path(a);
  const StatePath sc = crawler_dynamics(cfg_, body_, path, rng);
  const double reward = crawler_reward(cfg_, body_, sc, path);
  body_ = CrawlerState::from_vector(sc.end());
  current_ = body_.fallen ? fallen_state() : state_of(body_.joints);
  const double duration = path.length();
  elapsed_ += duration;
  StepResult r{current_, reward, duration, false, false};
  r.reached_goal = !body_.fallen && body_.position.norm() >= cfg_.arena_radius;
  r.episode_end = body_.fallen || r.reached_goal || elapsed_ >= cfg_.episode_duration - 1e-9;
  return r;
}

bool CrawlerLevelEnv::useful(StateId s, ActionId a) {
  if (s >= joint_states_) return false;
  auto& cached = useful_cache_[s * catalog_.size() + a];
  if (cached < 0) {
    CrawlerState from = CrawlerState::rest(cfg_);
    from.joints = joints_of(s);
    Rng rng(mix_seed(options_.seed, s, a));
    cached = classify_useful(cm_, from.to_vector(), catalog_.path(a), rng, options_.useful_samples) ? 1 : 0;
  }
  return cached == 1;
}

std::size_t CrawlerLevelEnv::useful_count(StateId s) {
  std::size_t count = 0;
  for (ActionId a = 0; a < catalog_.size(); ++a) count += useful(s, a) ? 1 : 0;
  return count;
}

ActionId CrawlerLevelEnv::mirror_action(ActionId a) const {
  auto digits = catalog_.basic_indices(a);
  for (auto& d : digits) d = level_.action_grid.nearest(level_.action_grid.point(d).reverse());
  return catalog_.id_of(digits);
}

bool CrawlerLevelEnv::is_available(StateId s, ActionId a) {
  if (s >= joint_states_ || a >= catalog_.size()) return false;
  return a == recovery_ || useful(s, a);
}

std::vector<ActionId> CrawlerLevelEnv::initially_aware(StateId s) {
  if (s >= joint_states_) return {};
  return {recovery_};
}

const DiscoveryModel& CrawlerLevelEnv::discovery_model() const {
  if (!discovery_) {
    auto* self = const_cast<CrawlerLevelEnv*>(this);
    const std::uint64_t useful = self->useful_count(start_);
    switch (options_.method) {
      case ExploreMethod::Systematic:
        discovery_ = DiscoveryModel::brute_force_systematic(catalog_.size(), useful);
        break;
      case ExploreMethod::Random:
        discovery_ = DiscoveryModel::brute_force_random(catalog_.size(), useful);
        break;
      case ExploreMethod::Apprenticeship:
        discovery_ = DiscoveryModel::constant(options_.beta);
        break;
    }
  }
  return *discovery_;
}

const std::vector<ActionId>& CrawlerLevelEnv::teacher_ranking(StateId s) {
  auto it = ranking_.find(s);
  if (it != ranking_.end()) return it->second;
  CrawlerState from = CrawlerState::rest(cfg_);
  from.joints = joints_of(s);
  std::vector<std::pair<double, ActionId>> scored;
  for (ActionId a = 0; a < catalog_.size(); ++a) {
    if (!useful(s, a)) continue;
    Rng rng(mix_seed(options_.seed, s, a));
    const ActionPath path = catalog_.path(a);
    const double rate = crawler_reward(cfg_, from, crawler_dynamics(cfg_, from, path, rng), path) / path.length();
    scored.emplace_back(-rate, a);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<ActionId> order;
  for (const auto& [score, a] : scored) order.push_back(a);
  return ranking_.emplace(s, std::move(order)).first->second;
}

ExploreResult CrawlerLevelEnv::explore(std::uint64_t, const std::vector<bool>& aware_here, Rng& rng) {
  ExploreResult result;
  const StateId s = current_;
  if (s >= joint_states_) return result;
  auto hidden_useful = [&](ActionId a) { return !aware_here[a] && useful(s, a); };
  const std::uint64_t total = catalog_.size();

  switch (options_.method) {
    case ExploreMethod::Systematic: {
      if (cursor_[s] < total) {
        const ActionId a = cursor_[s]++;
        if (hidden_useful(a)) result.discovered = a;
      }
      result.exhausted = cursor_[s] >= total;
      return result;
    }
    case ExploreMethod::Random: {
      std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
      const ActionId a = pick(rng);
      if (hidden_useful(a)) result.discovered = a;
      return result;
    }
    case ExploreMethod::Apprenticeship: {
      for (ActionId a = 0; a < total; ++a) {
        if (!aware_here[a] || !useful(s, a)) continue;
        const ActionId m = mirror_action(a);
        if (hidden_useful(m)) {
          result.discovered = m;
          return result;
        }
      }
      std::bernoulli_distribution teacher(options_.beta);
      if (teacher(rng)) {
        for (ActionId a : teacher_ranking(s)) {
          if (!aware_here[a]) {
            result.discovered = a;
            return result;
          }
        }
        return result;
      }
      std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
      const ActionId a = pick(rng);
      if (hidden_useful(a)) result.discovered = a;
      return result;
    }
  }
  return result;
}

namespace {

double episode_score(double total, double elapsed, bool goal, double horizon) {
  return goal ? total / elapsed : total / horizon;
}

}  // namespace

BaselineReport baseline_random(CrawlerLevelEnv& env, std::uint64_t budget, Rng& rng) {
  BaselineReport report;
  if (budget == 0) return report;
  std::uniform_int_distribution<std::uint64_t> pick(0, env.num_actions() - 1);
  std::vector<bool> seen(env.num_actions(), false);
  while (report.steps_used < budget) {
    StateId s = env.reset(rng);
    double total = 0.0;
    double elapsed = 0.0;
    bool goal = false;
    while (report.steps_used < budget) {
      const ActionId a = pick(rng);
      const bool was_useful = env.useful(s, a);
      const StepResult r = env.step(a, rng);
      ++report.steps_used;
      if (was_useful && !seen[a]) {
        seen[a] = true;
        ++report.useful_found;
      }
      total += r.reward;
      elapsed += r.duration;
      s = r.next;
      if (!env.is_terminal(s)) report.max_distance = std::max(report.max_distance, env.body().position.norm());
      if (r.reached_goal) goal = true;
      if (r.episode_end) break;
    }
    report.best_score = std::max(report.best_score, episode_score(total, elapsed, goal, env.episode_horizon()));
  }
  return report;
}

BaselineReport baseline_repeat(CrawlerLevelEnv& env, std::uint64_t budget, Rng& rng) {
  BaselineReport report;
  if (budget == 0) return report;
  std::uniform_int_distribution<std::uint64_t> pick(0, env.num_actions() - 1);
  std::vector<ActionId> found;
  std::vector<bool> seen(env.num_actions(), false);

  const std::uint64_t probe_budget = budget / 2;
  while (report.steps_used < probe_budget) {
    const StateId s = env.reset(rng);
    const ActionId a = pick(rng);
    const StepResult r = env.step(a, rng);
    ++report.steps_used;
    if (!env.is_terminal(r.next)) report.max_distance = std::max(report.max_distance, env.body().position.norm());
    if (env.useful(s, a) && !seen[a]) {
      seen[a] = true;
      found.push_back(a);
    }
  }
  report.useful_found = found.size();

  for (ActionId a : found) {
    if (report.steps_used >= budget) break;
    env.reset(rng);
    double total = 0.0;
    double elapsed = 0.0;
    bool goal = false;
    while (report.steps_used < budget) {
      const StepResult r = env.step(a, rng);
      ++report.steps_used;
      total += r.reward;
      elapsed += r.duration;
      if (!env.is_terminal(r.next)) report.max_distance = std::max(report.max_distance, env.body().position.norm());
      if (r.reached_goal) goal = true;
      if (r.episode_end) break;
    }
    if (goal) report.stable_gaits.push_back(a);
    report.best_score = std::max(report.best_score, episode_score(total, elapsed, goal, env.episode_horizon()));
  }
  return report;
}

}  // namespace mdpulab
