#include "mdpulab/continuous.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mdpulab {

namespace {

/// Value of a path on one slot, as (value, time weight) pieces.
template <typename Tag>
std::vector<std::pair<const Eigen::VectorXd*, double>> slot_pieces(const Path<Tag>& path,
                                                                  std::size_t slot, double t) {
  std::vector<std::pair<const Eigen::VectorXd*, double>> pieces;
  const double from = static_cast<double>(slot) * t;
  const double to = from + t;
  double start = 0.0;
  for (const auto& seg : path.segments) {
    const double stop = start + seg.duration;
    const double overlap = std::min(stop, to) - std::max(start, from);
    if (overlap > kLengthTolerance) pieces.emplace_back(&seg.value, overlap);
    start = stop;
    if (start >= to) break;
  }
  return pieces;
}

/// Axis value minimizing sum_k w_k |x_k[d] - v|; smaller index on ties.
std::size_t best_on_axis(const std::vector<double>& axis, std::size_t d,
                         const std::vector<std::pair<const Eigen::VectorXd*, double>>& pieces) {
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < axis.size(); ++k) {
    double cost = 0.0;
    for (const auto& [value, weight] : pieces) cost += weight * std::abs((*value)[d] - axis[k]);
    if (k == 0 || cost < best_cost - 1e-12 * (1.0 + std::abs(best_cost))) {
      best_cost = cost;
      best = k;
    }
  }
  return best;
}

std::size_t slot_count(double length, double t) {
  const double slots = length / t;
  const double rounded = std::round(slots);
  if (std::abs(slots - rounded) > 1e-9 * std::max(1.0, slots)) {
    throw std::invalid_argument("level paths must be whole multiples of t_i");
  }
  return static_cast<std::size_t>(rounded);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double pair_distance(const StatePath& sc, const ActionPath& a, const StatePath& sc2, const ActionPath& a2) {
  return state_distance(sc, sc2) + action_distance(a, a2);
}

bool Box::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lo.size()) return false;
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Grid::Grid(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {
  size_ = axes_.empty() ? 0 : 1;
  for (auto& axis : axes_) {
    if (axis.empty()) throw std::invalid_argument("grid: empty axis");
    std::sort(axis.begin(), axis.end());
    size_ *= axis.size();
  }
}

Grid Grid::uniform(const Box& box, const std::vector<std::size_t>& counts) {
  if (counts.size() != box.dimension()) throw std::invalid_argument("grid: one count per axis");
  std::vector<std::vector<double>> axes(counts.size());
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d] == 0) throw std::invalid_argument("grid: counts must be positive");
    const double width = (box.hi[d] - box.lo[d]) / static_cast<double>(counts[d]);
    for (std::size_t k = 0; k < counts[d]; ++k) {
      axes[d].push_back(box.lo[d] + (static_cast<double>(k) + 0.5) * width);
    }
  }
  return Grid(std::move(axes));
}

std::vector<std::size_t> Grid::coordinates(std::uint64_t index) const {
  if (index >= size_) throw std::out_of_range("grid index out of range");
  std::vector<std::size_t> coords(axes_.size());
  for (std::size_t d = axes_.size(); d-- > 0;) {
    coords[d] = index % axes_[d].size();
    index /= axes_[d].size();
  }
  return coords;
}

std::uint64_t Grid::index(const std::vector<std::size_t>& coordinates) const {
  if (coordinates.size() != axes_.size()) throw std::invalid_argument("grid: coordinate count");
  std::uint64_t index = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    if (coordinates[d] >= axes_[d].size()) throw std::out_of_range("grid coordinate out of range");
    index = index * axes_[d].size() + coordinates[d];
  }
  return index;
}

Eigen::VectorXd Grid::point(std::uint64_t index) const {
  const auto coords = coordinates(index);
  Eigen::VectorXd p(static_cast<Eigen::Index>(axes_.size()));
  for (std::size_t d = 0; d < axes_.size(); ++d) p[static_cast<Eigen::Index>(d)] = axes_[d][coords[d]];
  return p;
}

std::size_t Grid::nearest_on_axis(std::size_t d, double x) const {
  const auto& axis = axes_.at(d);
  auto it = std::lower_bound(axis.begin(), axis.end(), x);
  if (it == axis.begin()) return 0;
  if (it == axis.end()) return axis.size() - 1;
  const auto upper = static_cast<std::size_t>(it - axis.begin());
  return (x - axis[upper - 1] <= axis[upper] - x) ? upper - 1 : upper;
}

std::uint64_t Grid::nearest(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != axes_.size()) throw std::invalid_argument("grid: dimension mismatch");
  std::vector<std::size_t> coords(axes_.size());
  for (std::size_t d = 0; d < axes_.size(); ++d) coords[d] = nearest_on_axis(d, x[static_cast<Eigen::Index>(d)]);
  return index(coords);
}

double Grid::covering_radius(const Box& box) const {
  if (box.dimension() != axes_.size()) throw std::invalid_argument("grid: dimension mismatch");
  double total = 0.0;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    const auto& axis = axes_[d];
    const auto i = static_cast<Eigen::Index>(d);
    double worst = std::max({0.0, axis.front() - box.lo[i], box.hi[i] - axis.back()});
    for (std::size_t k = 1; k < axis.size(); ++k) worst = std::max(worst, (axis[k] - axis[k - 1]) / 2.0);
    total += worst;
  }
  return total;
}

std::size_t DiscretizationLevel::max_segments() const {
  return static_cast<std::size_t>(std::floor(max_action_length / time_step + 1e-9));
}

std::optional<std::uint64_t> count_sequences(std::uint64_t base, std::size_t max_length) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  std::uint64_t power = 1;
  for (std::size_t l = 1; l <= max_length; ++l) {
    if (base != 0 && power > kMax / base) return std::nullopt;
    power *= base;
    if (total > kMax - power) return std::nullopt;
    total += power;
  }
  return total;
}

std::uint64_t DiscretizationLevel::action_count() const {
  const auto count = count_sequences(action_grid.size(), max_segments());
  if (!count) throw std::overflow_error("action count exceeds 64 bits");
  return *count;
}

double DiscretizationLevel::covering_resolution() const {
  return std::max(state_grid.covering_radius(state_box), action_grid.covering_radius(action_box));
}

ActionCatalog::ActionCatalog(const DiscretizationLevel& level)
    : grid_(level.action_grid),
      time_step_(level.time_step),
      basic_(level.action_grid.size()),
      max_length_(level.max_segments()),
      size_(level.action_count()) {
  if (max_length_ == 0) throw std::invalid_argument("level admits no action: T < t_i");
  offsets_.push_back(0);
  std::uint64_t power = 1;
  for (std::size_t l = 1; l <= max_length_; ++l) {
    power *= basic_;
    offsets_.push_back(offsets_.back() + power);
  }
}

std::size_t ActionCatalog::segment_count(std::uint64_t id) const {
  if (id >= size_) throw std::out_of_range("action id out of range");
  return static_cast<std::size_t>(std::upper_bound(offsets_.begin(), offsets_.end(), id) - offsets_.begin());
}

std::vector<std::uint64_t> ActionCatalog::basic_indices(std::uint64_t id) const {
  const std::size_t length = segment_count(id);
  std::uint64_t rest = id - offsets_[length - 1];
  std::vector<std::uint64_t> digits(length);
  for (std::size_t k = length; k-- > 0;) {
    digits[k] = rest % basic_;
    rest /= basic_;
  }
  return digits;
}

std::uint64_t ActionCatalog::id_of(const std::vector<std::uint64_t>& basic_indices) const {
  if (basic_indices.empty() || basic_indices.size() > max_length_) {
    throw std::invalid_argument("action length outside 1..floor(T/t_i)");
  }
  std::uint64_t rest = 0;
  for (std::uint64_t digit : basic_indices) {
    if (digit >= basic_) throw std::out_of_range("basic action index out of range");
    rest = rest * basic_ + digit;
  }
  return offsets_[basic_indices.size() - 1] + rest;
}

ActionPath ActionCatalog::path(std::uint64_t id) const {
  ActionPath path;
  for (std::uint64_t b : basic_indices(id)) path.append(grid_.point(b), time_step_);
  return path;
}

std::uint64_t ActionCatalog::id_of(const ActionPath& path) const {
  path.validate();
  std::vector<std::uint64_t> digits;
  for (const auto& seg : path.segments) {
    if (std::abs(seg.duration - time_step_) > kLengthTolerance) {
      throw std::invalid_argument("segment duration differs from t_i");
    }
    const std::uint64_t b = grid_.nearest(seg.value);
    if (l1_distance(grid_.point(b), seg.value) > 1e-9) throw std::invalid_argument("segment is off the grid");
    digits.push_back(b);
  }
  return id_of(digits);
}

LevelEnumeration enumerate_level_actions(const DiscretizationLevel& level, std::uint64_t cap) {
  LevelEnumeration out{ActionCatalog(level), {}, true};
  if (out.catalog.size() <= cap) {
    out.paths.reserve(out.catalog.size());
    for (std::uint64_t id = 0; id < out.catalog.size(); ++id) out.paths.push_back(out.catalog.path(id));
    out.lazy = false;
  }
  return out;
}

ActionPath best_approximation(const ActionPath& a, const DiscretizationLevel& level) {
  a.validate();
  const double t = level.time_step;
  std::size_t slots = static_cast<std::size_t>(std::floor(a.length() / t + 1e-9));
  if (slots == 0) throw std::invalid_argument("best_approximation: action shorter than t_i");
  slots = std::min(slots, level.max_segments());
  const Grid& grid = level.action_grid;
  if (grid.dimension() != a.dimension()) throw std::invalid_argument("best_approximation: dimension mismatch");

  ActionPath out;
  std::vector<std::size_t> coords(grid.dimension());
  for (std::size_t k = 0; k < slots; ++k) {
    const auto pieces = slot_pieces(a, k, t);
    for (std::size_t d = 0; d < grid.dimension(); ++d) coords[d] = best_on_axis(grid.axis(d), d, pieces);
    out.append(grid.point(grid.index(coords)), t);
  }
  return out;
}

Policy project_policy(const std::function<ActionPath(const Eigen::VectorXd&)>& pi,
                      const DiscretizationLevel& level) {
  const ActionCatalog catalog(level);
  Policy policy{std::vector<ActionId>(level.state_grid.size())};
  for (std::uint64_t s = 0; s < level.state_grid.size(); ++s) {
    policy.choice[s] = catalog.id_of(best_approximation(pi(level.state_grid.point(s)), level));
  }
  return policy;
}

double TransitionEstimate::total_probability() const {
  double total = 0.0;
  for (const auto& o : outcomes) total += o.probability;
  return total;
}

namespace {

struct Accumulated {
  double weight = 0.0;
  double reward = 0.0;
};

/// Slot cost of holding grid point g: integral of |sc(t) - g|_1 over the slot.
double slot_cost(const std::vector<std::pair<const Eigen::VectorXd*, double>>& pieces,
                 const Eigen::VectorXd& g) {
  double cost = 0.0;
  for (const auto& [value, weight] : pieces) cost += weight * l1_distance(*value, g);
  return cost;
}

std::vector<std::uint64_t> nearest_level_path(const StatePath& sc, const Grid& grid, std::size_t slots,
                                              double t) {
  std::vector<std::uint64_t> path(slots);
  std::vector<std::size_t> coords(grid.dimension());
  for (std::size_t k = 0; k < slots; ++k) {
    const auto pieces = slot_pieces(sc, k, t);
    for (std::size_t d = 0; d < grid.dimension(); ++d) coords[d] = best_on_axis(grid.axis(d), d, pieces);
    path[k] = grid.index(coords);
  }
  return path;
}

void ball_members(const std::vector<std::vector<double>>& costs, double radius, std::size_t slot, double used,
                  std::vector<std::uint64_t>& prefix, std::vector<std::vector<std::uint64_t>>& out,
                  std::size_t cap) {
  if (slot == costs.size()) {
    if (out.size() >= cap) throw std::runtime_error("discretize_transition: ball exceeds path cap");
    out.push_back(prefix);
    return;
  }
  for (std::uint64_t g = 0; g < costs[slot].size(); ++g) {
    const double next = used + costs[slot][g];
    if (next > radius + 1e-12) continue;
    prefix.push_back(g);
    ball_members(costs, radius, slot + 1, next, prefix, out, cap);
    prefix.pop_back();
  }
}

}  // namespace

TransitionEstimate discretize_transition(const ContinuousMdp& cm, const DiscretizationLevel& level,
                                         std::uint64_t s1, const ActionPath& a, Rng& rng,
                                         const DiscretizeOptions& options) {
  if (options.samples == 0) throw std::invalid_argument("discretize_transition: need samples");
  const Grid& grid = level.state_grid;
  const Eigen::VectorXd start = grid.point(s1);
  if (cm.is_terminal(start)) throw std::invalid_argument("discretize_transition: terminal start state");
  if (cm.feasible && !cm.feasible(a)) throw std::invalid_argument("discretize_transition: infeasible action");
  const double t = level.time_step;
  const std::size_t slots = slot_count(a.length(), t);

  std::map<std::vector<std::uint64_t>, Accumulated> mass;
  std::vector<std::uint64_t> first_nearest;
  double reward_total = 0.0;
  for (std::size_t n = 0; n < options.samples; ++n) {
    const StatePath sc = cm.transition(start, a, rng);
    const double r = cm.reward(start, sc, a);
    reward_total += r;
    if (options.kernel == Kernel::Nearest) {
      auto& acc = mass[nearest_level_path(sc, grid, slots, t)];
      acc.weight += 1.0;
      acc.reward += r;
      continue;
    }
    if (n == 0) first_nearest = nearest_level_path(sc, grid, slots, t);
    std::vector<std::vector<double>> costs(slots, std::vector<double>(grid.size()));
    for (std::size_t k = 0; k < slots; ++k) {
      const auto pieces = slot_pieces(sc, k, t);
      for (std::uint64_t g = 0; g < grid.size(); ++g) costs[k][g] = slot_cost(pieces, grid.point(g));
    }
    std::vector<std::vector<std::uint64_t>> members;
    std::vector<std::uint64_t> prefix;
    ball_members(costs, level.resolution, 0, 0.0, prefix, members, options.path_cap);
    for (auto& member : members) {
      auto& acc = mass[std::move(member)];
      acc.weight += 1.0;
      acc.reward += r;
    }
  }

  TransitionEstimate out;
  double total = 0.0;
  for (const auto& [path, acc] : mass) total += acc.weight;
  if (total == 0.0) {
    out.fallback = true;
    out.outcomes.push_back({first_nearest, 1.0, reward_total / static_cast<double>(options.samples)});
    return out;
  }
  for (const auto& [path, acc] : mass) {
    out.outcomes.push_back({path, acc.weight / total, acc.reward / acc.weight});
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

DiscretizedModel::DiscretizedModel(const ContinuousMdp& cm, const DiscretizationLevel& level,
                                   DiscretizeOptions options, std::uint64_t seed)
    : cm_(&cm), level_(&level), options_(options), seed_(seed), catalog_(level) {}

const TransitionEstimate& DiscretizedModel::transition(std::uint64_t s, std::uint64_t action) {
  auto& row = cache_[s];
  auto it = row.find(action);
  if (it != row.end()) return it->second;
  Rng rng(mix_seed(seed_, s, action));
  return row.emplace(action, discretize_transition(*cm_, *level_, s, catalog_.path(action), rng, options_))
      .first->second;
}

bool DiscretizedModel::is_terminal(std::uint64_t s) const {
  return cm_->is_terminal(level_->state_grid.point(s));
}

namespace {

struct Frame {
  std::uint64_t state;
  double elapsed;
  double probability;
  double reward;
};

ValueEstimate monte_carlo_value(DiscretizedModel& model, const Policy& pi, std::uint64_t s, double t,
                                const EvaluateOptions& options) {
  Rng rng(mix_seed(options.seed, s, 0x6d63));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double step = model.level().time_step;
  double sum = 0.0;
  double sum_sq = 0.0;
  const auto n = std::max<std::size_t>(options.monte_carlo_samples, 2);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t state = s;
    double elapsed = 0.0;
    double reward = 0.0;
    while (!model.is_terminal(state) && pi[state] != kNoAction) {
      const ActionId a = pi[state];
      const double length = static_cast<double>(model.catalog().segment_count(a)) * step;
      if (elapsed + length > t + kLengthTolerance) break;
      const auto& outcomes = model.transition(state, a).outcomes;
      const double u = unit(rng);
      double cumulative = 0.0;
      const LevelOutcome* chosen = &outcomes.back();
      for (const auto& o : outcomes) {
        cumulative += o.probability;
        if (u < cumulative) {
          chosen = &o;
          break;
        }
      }
      reward += chosen->reward;
      elapsed += length;
      state = chosen->states.back();
    }
    const double value = reward / t;
    sum += value;
    sum_sq += value * value;
  }
  const double count = static_cast<double>(n);
  ValueEstimate out;
  out.value = sum / count;
  out.standard_error = std::sqrt(std::max(0.0, (sum_sq - count * out.value * out.value) / (count - 1.0)) / count);
  out.exact = false;
  out.paths = n;
  return out;
}

}  // namespace

ValueEstimate evaluate_discretized_policy(DiscretizedModel& model, const Policy& pi, std::uint64_t s,
                                          double t, const EvaluateOptions& options) {
  if (!(t > 0.0)) throw std::invalid_argument("evaluate_discretized_policy: t must be positive");
  if (options.force_monte_carlo) return monte_carlo_value(model, pi, s, t, options);
  const double step = model.level().time_step;

  ValueEstimate out;
  std::vector<Frame> stack{{s, 0.0, 1.0, 0.0}};
  double total = 0.0;
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    bool extended = false;
    if (!model.is_terminal(f.state) && pi[f.state] != kNoAction) {
      const ActionId a = pi[f.state];
      const double length = static_cast<double>(model.catalog().segment_count(a)) * step;
      if (f.elapsed + length <= t + kLengthTolerance) {
        extended = true;
        for (const auto& o : model.transition(f.state, a).outcomes) {
          if (o.probability <= 0.0) continue;
          stack.push_back({o.states.back(), f.elapsed + length, f.probability * o.probability, f.reward + o.reward});
        }
      }
    }
    if (!extended) {
      total += f.probability * f.reward;
      if (++out.paths > options.path_cap) return monte_carlo_value(model, pi, s, t, options);
    }
  }
  out.value = total / t;
  return out;
}

ConvergenceReport estimate_continuous_value(const ContinuousMdp& cm,
                                            const std::function<ActionPath(const Eigen::VectorXd&)>& pi,
                                            const Eigen::VectorXd& s, double t,
                                            const std::vector<DiscretizationLevel>& levels,
                                            const DiscretizeOptions& discretize, const EvaluateOptions& evaluate) {
  ConvergenceReport report;
  for (const auto& level : levels) {
    DiscretizedModel model(cm, level, discretize, evaluate.seed);
    const Policy projected = project_policy(pi, level);
    report.values.push_back(
        evaluate_discretized_policy(model, projected, level.state_grid.nearest(s), t, evaluate).value);
  }
  if (!report.values.empty()) report.limit = report.values.back();
  if (report.values.size() >= 2) {
    report.last_difference = std::abs(report.values.back() - report.values[report.values.size() - 2]);
  }
  return report;
}

bool classify_useful(const ContinuousMdp& cm, const Eigen::VectorXd& s, const ActionPath& a, Rng& rng,
                     std::size_t samples) {
  for (std::size_t k = 0; k < std::max<std::size_t>(samples, 1); ++k) {
    const StatePath sc = cm.transition(s, a, rng);
    const Eigen::VectorXd& end = sc.end();
    if (l1_distance(end, s) <= kStateChangeTolerance || cm.is_terminal(end) || cm.is_failed(end)) return false;
  }
  return true;
}

}  // namespace mdpulab
