#pragma once

#include "mdpulab/mdp.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdpulab {

enum class DiscoveryKind { Constant, PowerLaw, BruteForceSystematic, BruteForceRandom, Table };

/// How D(1, t) extends to D(j, t) for the parametric kinds.
enum class JDependence {
  Independent,  ///< 1 - (1 - D(1,t))^j
  Linear,       ///< min(1, j * D(1,t))
};

/// Analytic continuation of a table model past its last explicit entry.
struct TailModel {
  enum class Kind {
    PowerLaw,     ///< D(1,t) = c * t^-p
    LogHarmonic,  ///< D(1,t) = c / ((t+1) ln(t+1)), divergent but slower than ln T
  };
  Kind kind = Kind::PowerLaw;
  double c = 0.0;
  double p = 0.0;
};

/**
 * Discovery probability D(j, t): chance that the explore action reveals a
 * useful action when j remain undiscovered and t-1 earlier plays failed.
 *
 * Brute-force kinds have fixed j-dependence: sampling with replacement gives
 * j/total; the systematic scan gives j/(total - t + 1).
 */
class DiscoveryModel {
 public:
  static DiscoveryModel constant(double beta);
  static DiscoveryModel power_law(double c, double p);
  /// `useful_positions` are 1-based scan positions of useful actions (optional).
  static DiscoveryModel brute_force_systematic(std::uint64_t total, std::uint64_t useful,
                                               std::vector<std::uint64_t> useful_positions = {});
  static DiscoveryModel brute_force_random(std::uint64_t total, std::uint64_t useful);
  static DiscoveryModel table(std::vector<double> values, std::optional<TailModel> tail = {});

  DiscoveryModel with_j_dependence(JDependence rule) const;

  DiscoveryKind kind() const { return kind_; }
  JDependence j_dependence() const { return j_rule_; }
  double beta() const { return a_; }
  double c() const { return a_; }
  double p() const { return b_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t useful() const { return useful_; }
  const std::vector<std::uint64_t>& useful_positions() const { return positions_; }
  const std::vector<double>& values() const { return values_; }
  const std::optional<TailModel>& tail() const { return tail_; }

  /// D(1, t) for t >= 1.
  double first(std::uint64_t t) const;
  /// D(j, t); zero when j == 0.
  double operator()(std::uint64_t j, std::uint64_t t) const;

  std::string describe() const;

 private:
  DiscoveryModel() = default;
  void validate() const;

  DiscoveryKind kind_ = DiscoveryKind::Constant;
  JDependence j_rule_ = JDependence::Independent;
  double a_ = 0.0;
  double b_ = 0.0;
  std::uint64_t total_ = 0;
  std::uint64_t useful_ = 0;
  std::vector<std::uint64_t> positions_;
  std::vector<double> values_;
  std::optional<TailModel> tail_;
};

/// Psi(T) = sum_{t=1}^{T} D(1, t).
double psi(const DiscoveryModel& model, std::uint64_t T);

enum class Learnability { Impossible, PossibleNotPoly, PolynomialTime, UnknownBeyondHorizon };

std::string to_string(Learnability verdict);

/// Psi(T) >= m1 ln T + m2 for every T >= 1.
struct LogCertificate {
  double m1;
  double m2;
};

struct PsiClass {
  Learnability verdict;
  std::optional<double> psi_limit_bound;  ///< upper bound on Psi(infinity) when finite
  std::optional<LogCertificate> certificate;
  std::string rationale;
};

/// Learnability class of the model (see README for the certificates used).
PsiClass classify(const DiscoveryModel& model);

class ThresholdNotReached : public std::runtime_error {
 public:
  ThresholdNotReached(const std::string& what, double partial_sum, std::uint64_t cutoff)
      : std::runtime_error(what), partial_sum(partial_sum), cutoff(cutoff) {}
  double partial_sum;
  std::uint64_t cutoff;
};

/// Least T with Psi(T) >= ln(4N/delta).
std::uint64_t exploration_threshold(const DiscoveryModel& model, std::uint64_t n, double delta,
                                    std::uint64_t cutoff = 10'000'000);

/// Bernoulli draw with probability D(j, t). Systematic models with recorded
/// positions are deterministic: true exactly when position t is useful.
bool sample_discovery(const DiscoveryModel& model, std::uint64_t j, std::uint64_t t, Rng& rng);

}  // namespace mdpulab
