#pragma once

#include "mdpulab/mdp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace mdpulab {

/// L1 distance between two vectors of equal dimension.
template <typename A, typename B>
double l1_distance(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("l1_distance: dimension mismatch");
  return (p - q).cwiseAbs().sum();
}

struct ActionTag {};
struct StateTag {};

/// Piecewise-constant path on (0, length]: segment k holds its value on
/// (t_{k-1}, t_k].
template <typename Tag>
struct Path {
  struct Segment {
    Eigen::VectorXd value;
    double duration;
  };
  std::vector<Segment> segments;

  Path() = default;
  Path(std::vector<Segment> s) : segments(std::move(s)) {}

  static Path constant(Eigen::VectorXd value, double duration) { return Path({{std::move(value), duration}}); }

  void append(Eigen::VectorXd value, double duration) { segments.push_back({std::move(value), duration}); }

  double length() const {
    double total = 0.0;
    for (const auto& s : segments) total += s.duration;
    return total;
  }
  std::size_t dimension() const { return segments.empty() ? 0 : segments.front().value.size(); }
  const Eigen::VectorXd& end() const { return segments.back().value; }

  /// Nonempty, positive durations, one dimension throughout.
  void validate() const {
    if (segments.empty()) throw std::invalid_argument("path: no segments");
    for (const auto& s : segments) {
      if (!(s.duration > 0.0)) throw std::invalid_argument("path: durations must be positive");
      if (s.value.size() != segments.front().value.size()) {
        throw std::invalid_argument("path: mixed dimensions");
      }
    }
  }

  bool operator==(const Path& other) const {
    if (segments.size() != other.segments.size()) return false;
    for (std::size_t k = 0; k < segments.size(); ++k) {
      if (segments[k].duration != other.segments[k].duration ||
          segments[k].value != other.segments[k].value) {
        return false;
      }
    }
    return true;
  }
};

using ActionPath = Path<ActionTag>;
using StatePath = Path<StateTag>;

inline constexpr double kLengthTolerance = 1e-9;

/// Integral of the pointwise L1 distance, over the common refinement of both
/// breakpoint sets. Lengths must agree within kLengthTolerance.
template <typename Tag>
double path_distance(const Path<Tag>& a, const Path<Tag>& b) {
  a.validate();
  b.validate();
  if (std::abs(a.length() - b.length()) > kLengthTolerance) {
    throw std::invalid_argument("path distance: length mismatch");
  }
  double total = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  double left_a = a.segments[0].duration;
  double left_b = b.segments[0].duration;
  while (i < a.segments.size() && j < b.segments.size()) {
    const double piece = std::min(left_a, left_b);
    total += piece * l1_distance(a.segments[i].value, b.segments[j].value);
    left_a -= piece;
    left_b -= piece;
    if (left_a <= kLengthTolerance && ++i < a.segments.size()) left_a += a.segments[i].duration;
    if (left_b <= kLengthTolerance && ++j < b.segments.size()) left_b += b.segments[j].duration;
  }
  return total;
}

inline double action_distance(const ActionPath& a, const ActionPath& b) { return path_distance(a, b); }
inline double state_distance(const StatePath& a, const StatePath& b) { return path_distance(a, b); }

/// d(sc, sc2) + d(a, a2).
double pair_distance(const StatePath& sc, const ActionPath& a, const StatePath& sc2, const ActionPath& a2);

/// Axis-aligned compact box.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  std::size_t dimension() const { return static_cast<std::size_t>(lo.size()); }
  bool contains(const Eigen::VectorXd& x) const;
};

/// Product grid with explicit sorted values per axis. Points are indexed in
/// mixed radix, first axis most significant.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<std::vector<double>> axes);

  /// `count` cell-centred values lo + (k + 1/2)(hi - lo)/count per axis.
  static Grid uniform(const Box& box, const std::vector<std::size_t>& counts);

  std::size_t dimension() const { return axes_.size(); }
  std::uint64_t size() const { return size_; }
  const std::vector<double>& axis(std::size_t d) const { return axes_.at(d); }

  Eigen::VectorXd point(std::uint64_t index) const;
  std::vector<std::size_t> coordinates(std::uint64_t index) const;
  std::uint64_t index(const std::vector<std::size_t>& coordinates) const;

  /// Index of the nearest value on axis d; ties go to the smaller value.
  std::size_t nearest_on_axis(std::size_t d, double x) const;
  /// L1-nearest grid point (separable per axis).
  std::uint64_t nearest(const Eigen::VectorXd& x) const;

  /// Largest L1 distance from a point of box to its nearest grid point.
  double covering_radius(const Box& box) const;

 private:
  std::vector<std::vector<double>> axes_;
  std::uint64_t size_ = 0;
};

struct DiscretizationLevel {
  std::size_t index = 0;
  Box state_box;
  Grid state_grid;
  Box action_box;
  Grid action_grid;
  double time_step = 1.0;
  double max_action_length = 1.0;
  double resolution = 0.0;  ///< d_i

  std::size_t max_segments() const;
  /// sum_{l=1}^{L} |A_B|^l; throws std::overflow_error past 2^64.
  std::uint64_t action_count() const;
  /// The larger of the two covering radii.
  double covering_resolution() const;
};

/// sum_{l=1}^{max_length} base^l, or nullopt on overflow.
std::optional<std::uint64_t> count_sequences(std::uint64_t base, std::size_t max_length);

/**
 * Identifier <-> path bijection for A_i'. Shorter paths come first; within a
 * length, segment basic-action indices in mixed radix, first segment most
 * significant.
 */
class ActionCatalog {
 public:
  explicit ActionCatalog(const DiscretizationLevel& level);

  std::uint64_t size() const { return size_; }
  std::size_t basic_count() const { return basic_; }

  std::size_t segment_count(std::uint64_t id) const;
  /// Basic-action grid indices of each segment.
  std::vector<std::uint64_t> basic_indices(std::uint64_t id) const;
  std::uint64_t id_of(const std::vector<std::uint64_t>& basic_indices) const;

  ActionPath path(std::uint64_t id) const;
  /// Identifier of a path whose segments are grid actions of duration t_i.
  std::uint64_t id_of(const ActionPath& path) const;

 private:
  Grid grid_;
  double time_step_;
  std::uint64_t basic_;
  std::size_t max_length_;
  std::vector<std::uint64_t> offsets_;  ///< first id of each length
  std::uint64_t size_;
};

struct LevelEnumeration {
  ActionCatalog catalog;
  std::vector<ActionPath> paths;  ///< empty when lazy
  bool lazy;
};

/// Materializes A_i' when it has at most `cap` members; otherwise only the catalog.
LevelEnumeration enumerate_level_actions(const DiscretizationLevel& level, std::uint64_t cap = 100'000);

/**
 * Level path of length floor(|a|/t_i) t_i minimizing the integrated L1
 * distance to a. The problem separates per slot and per axis; each axis takes
 * the grid value minimizing the weighted absolute deviation, smaller index on
 * ties.
 */
ActionPath best_approximation(const ActionPath& a, const DiscretizationLevel& level);

/// Per grid state, the catalog id of the best approximation of pi(state).
Policy project_policy(const std::function<ActionPath(const Eigen::VectorXd&)>& pi,
                      const DiscretizationLevel& level);

/// The continuous MDP M_infinity, given by samplers.
struct ContinuousMdp {
  Box state_box;
  Box action_box;
  double max_action_length = 1.0;
  std::function<bool(const ActionPath&)> feasible;
  std::function<StatePath(const Eigen::VectorXd& s, const ActionPath& a, Rng& rng)> transition;
  std::function<double(const Eigen::VectorXd& s, const StatePath& sc, const ActionPath& a)> reward;
  double reward_rate_bound = 1.0;  ///< |R| < c |a|
  std::function<bool(const Eigen::VectorXd&)> terminal;
  std::function<bool(const Eigen::VectorXd&)> failed;

  bool is_terminal(const Eigen::VectorXd& s) const { return terminal && terminal(s); }
  bool is_failed(const Eigen::VectorXd& s) const { return failed && failed(s); }
};

enum class Kernel {
  Ball,     ///< every level path within d_i of the sample
  Nearest,  ///< the slotwise nearest level path only
};

struct DiscretizeOptions {
  std::size_t samples = 64;
  Kernel kernel = Kernel::Ball;
  std::size_t path_cap = 1'000'000;  ///< ball members per sample before giving up
};

/// A level state path: grid index per slot of length t_i.
struct LevelOutcome {
  std::vector<std::uint64_t> states;
  double probability;
  double reward;  ///< mean R_infinity of the contributing samples
};

struct TransitionEstimate {
  std::vector<LevelOutcome> outcomes;
  bool fallback = false;  ///< no sample was near any level path

  double total_probability() const;
};

/// Monte Carlo estimate of P_i(s1, ., a) and the matching rewards.
TransitionEstimate discretize_transition(const ContinuousMdp& cm, const DiscretizationLevel& level,
                                         std::uint64_t s1, const ActionPath& a, Rng& rng,
                                         const DiscretizeOptions& options = {});

/// Lazy M_i: transition estimates per (grid state, catalog id), each seeded
/// from (seed, s, a) so results do not depend on query order.
class DiscretizedModel {
 public:
  DiscretizedModel(const ContinuousMdp& cm, const DiscretizationLevel& level, DiscretizeOptions options,
                   std::uint64_t seed);

  const TransitionEstimate& transition(std::uint64_t s, std::uint64_t action);
  bool is_terminal(std::uint64_t s) const;

  const ContinuousMdp& cm() const { return *cm_; }
  const DiscretizationLevel& level() const { return *level_; }
  const ActionCatalog& catalog() const { return catalog_; }

 private:
  const ContinuousMdp* cm_;
  const DiscretizationLevel* level_;
  DiscretizeOptions options_;
  std::uint64_t seed_;
  ActionCatalog catalog_;
  std::unordered_map<std::uint64_t, std::unordered_map<std::uint64_t, TransitionEstimate>> cache_;
};

/// Deterministic 64-bit mix of a seed with two integers.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

struct EvaluateOptions {
  std::uint64_t path_cap = 1'000'000;
  std::size_t monte_carlo_samples = 100'000;
  std::uint64_t seed = 1;
  bool force_monte_carlo = false;
};

struct ValueEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  bool exact = true;
  std::uint64_t paths = 0;
};

/**
 * U_{M_i}(s, pi, t): sum over the compatible paths of P*(p) R*(p) / t, where a
 * path holds every action that completes within t. Falls back to Monte Carlo
 * when the enumeration passes path_cap.
 */
ValueEstimate evaluate_discretized_policy(DiscretizedModel& model, const Policy& pi, std::uint64_t s,
                                          double t, const EvaluateOptions& options = {});

struct ConvergenceReport {
  std::vector<double> values;
  double limit = 0.0;
  double last_difference = 0.0;
};

/// U_{M_i}(s_i, project_policy(pi), t) on each level; s_i is the grid state nearest s.
ConvergenceReport estimate_continuous_value(const ContinuousMdp& cm,
                                            const std::function<ActionPath(const Eigen::VectorXd&)>& pi,
                                            const Eigen::VectorXd& s, double t,
                                            const std::vector<DiscretizationLevel>& levels,
                                            const DiscretizeOptions& discretize = {},
                                            const EvaluateOptions& evaluate = {});

inline constexpr double kStateChangeTolerance = 1e-6;

/// True iff every sampled end state moved by more than kStateChangeTolerance
/// and is neither terminal nor failed.
bool classify_useful(const ContinuousMdp& cm, const Eigen::VectorXd& s, const ActionPath& a, Rng& rng,
                     std::size_t samples = 1);

}  // namespace mdpulab
