#include "mdpulab/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mdpulab {

namespace {

/// Compensated (Neumaier) running sum.
class Accumulator {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

constexpr std::uint64_t kTailTerms = 1'000'000;

/// Upper bound on sum_{t >= from} t^-p for p > 1: explicit terms up to
/// kTailTerms (summed smallest first), then the integral bound N^{1-p}/(p-1).
double power_tail_upper_bound(double p, std::uint64_t from) {
  const std::uint64_t last = std::max(from, kTailTerms);
  Accumulator acc;
  acc.add(std::pow(static_cast<double>(last), 1.0 - p) / (p - 1.0));
  for (std::uint64_t t = last; t >= from; --t) {
    acc.add(std::pow(static_cast<double>(t), -p));
    if (t == 1) break;
  }
  return acc.value();
}

double tail_value(const TailModel& tail, std::uint64_t t) {
  const double x = static_cast<double>(t);
  switch (tail.kind) {
    case TailModel::Kind::PowerLaw:
      return tail.c * std::pow(x, -tail.p);
    case TailModel::Kind::LogHarmonic:
      return tail.c / ((x + 1.0) * std::log(x + 1.0));
  }
  return 0.0;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument("discovery model: " + message);
}

}  // namespace

DiscoveryModel DiscoveryModel::constant(double beta) {
  DiscoveryModel m;
  m.kind_ = DiscoveryKind::Constant;
  m.a_ = beta;
  m.validate();
  return m;
}

DiscoveryModel DiscoveryModel::power_law(double c, double p) {
  DiscoveryModel m;
  m.kind_ = DiscoveryKind::PowerLaw;
  m.a_ = c;
  m.b_ = p;
  m.validate();
  return m;
}

DiscoveryModel DiscoveryModel::brute_force_systematic(std::uint64_t total, std::uint64_t useful,
                                                      std::vector<std::uint64_t> useful_positions) {
  DiscoveryModel m;
  m.kind_ = DiscoveryKind::BruteForceSystematic;
  m.total_ = total;
  m.useful_ = useful;
  std::sort(useful_positions.begin(), useful_positions.end());
  m.positions_ = std::move(useful_positions);
  m.validate();
  return m;
}

DiscoveryModel DiscoveryModel::brute_force_random(std::uint64_t total, std::uint64_t useful) {
  DiscoveryModel m;
  m.kind_ = DiscoveryKind::BruteForceRandom;
  m.total_ = total;
  m.useful_ = useful;
  m.validate();
  return m;
}

DiscoveryModel DiscoveryModel::table(std::vector<double> values, std::optional<TailModel> tail) {
  DiscoveryModel m;
  m.kind_ = DiscoveryKind::Table;
  m.values_ = std::move(values);
  m.tail_ = tail;
  m.validate();
  return m;
}

DiscoveryModel DiscoveryModel::with_j_dependence(JDependence rule) const {
  DiscoveryModel copy = *this;
  copy.j_rule_ = rule;
  return copy;
}

void DiscoveryModel::validate() const {
  switch (kind_) {
    case DiscoveryKind::Constant:
      require(a_ > 0.0 && a_ <= 1.0, "beta must lie in (0, 1]");
      break;
    case DiscoveryKind::PowerLaw:
      require(a_ > 0.0 && a_ <= 1.0, "c must lie in (0, 1]");
      require(b_ >= 0.0 && std::isfinite(b_), "p must be non-negative");
      break;
    case DiscoveryKind::BruteForceSystematic:
    case DiscoveryKind::BruteForceRandom:
      require(total_ > 0, "total must be positive");
      require(useful_ <= total_, "useful cannot exceed total");
      for (auto pos : positions_) require(pos >= 1 && pos <= total_, "position out of range");
      require(positions_.empty() || positions_.size() == useful_,
              "positions must list every useful action");
      break;
    case DiscoveryKind::Table:
      for (double v : values_) require(v >= 0.0 && v <= 1.0, "table values must lie in [0, 1]");
      if (tail_) {
        require(tail_->c >= 0.0 && tail_->c <= 1.0, "tail c must lie in [0, 1]");
        require(tail_->p >= 0.0, "tail p must be non-negative");
      }
      break;
  }
}

double DiscoveryModel::first(std::uint64_t t) const {
  if (t == 0) throw std::invalid_argument("discovery model: t starts at 1");
  const double x = static_cast<double>(t);
  switch (kind_) {
    case DiscoveryKind::Constant:
      return a_;
    case DiscoveryKind::PowerLaw:
      return a_ * std::pow(x, -b_);
    case DiscoveryKind::BruteForceSystematic:
      return t >= total_ ? 1.0 : 1.0 / static_cast<double>(total_ - t + 1);
    case DiscoveryKind::BruteForceRandom:
      return 1.0 / static_cast<double>(total_);
    case DiscoveryKind::Table:
      if (t <= values_.size()) return values_[t - 1];
      return tail_ ? std::min(1.0, tail_value(*tail_, t)) : 0.0;
  }
  return 0.0;
}

double DiscoveryModel::operator()(std::uint64_t j, std::uint64_t t) const {
  if (j == 0) return 0.0;
  const double jd = static_cast<double>(j);
  switch (kind_) {
    case DiscoveryKind::BruteForceSystematic:
      return t >= total_ ? 1.0 : std::min(1.0, jd / static_cast<double>(total_ - t + 1));
    case DiscoveryKind::BruteForceRandom:
      return std::min(1.0, jd / static_cast<double>(total_));
    default:
      break;
  }
  const double d1 = first(t);
  if (j_rule_ == JDependence::Linear) return std::min(1.0, jd * d1);
  return 1.0 - std::pow(1.0 - d1, jd);
}

std::string DiscoveryModel::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case DiscoveryKind::Constant:
      out << "constant(beta=" << a_ << ")";
      break;
    case DiscoveryKind::PowerLaw:
      out << "power_law(c=" << a_ << ", p=" << b_ << ")";
      break;
    case DiscoveryKind::BruteForceSystematic:
      out << "brute_force_systematic(total=" << total_ << ", useful=" << useful_ << ")";
      break;
    case DiscoveryKind::BruteForceRandom:
      out << "brute_force_random(total=" << total_ << ", useful=" << useful_ << ")";
      break;
    case DiscoveryKind::Table:
      out << "table(" << values_.size() << " values" << (tail_ ? ", tail" : "") << ")";
      break;
  }
  return out.str();
}

double psi(const DiscoveryModel& model, std::uint64_t T) {
  if (model.kind() == DiscoveryKind::Constant) return model.beta() * static_cast<double>(T);
  if (model.kind() == DiscoveryKind::BruteForceRandom) {
    return static_cast<double>(T) / static_cast<double>(model.total());
  }
  Accumulator acc;
  for (std::uint64_t t = 1; t <= T; ++t) acc.add(model.first(t));
  return acc.value();
}

std::string to_string(Learnability verdict) {
  switch (verdict) {
    case Learnability::Impossible:
      return "Impossible";
    case Learnability::PossibleNotPoly:
      return "PossibleNotPoly";
    case Learnability::PolynomialTime:
      return "PolynomialTime";
    case Learnability::UnknownBeyondHorizon:
      return "UnknownBeyondHorizon";
  }
  return "?";
}

namespace {

/// Verifies Psi(T) >= m1 ln T + m2 at T = 1, 10, ..., 10^6.
void check_certificate(const DiscoveryModel& model, const LogCertificate& cert) {
  Accumulator acc;
  std::uint64_t next_check = 1;
  for (std::uint64_t t = 1; t <= 1'000'000; ++t) {
    acc.add(model.first(t));
    if (t == next_check) {
      const double bound = cert.m1 * std::log(static_cast<double>(t)) + cert.m2;
      if (acc.value() < bound - 1e-9) {
        throw std::logic_error("classify: certificate fails at T=" + std::to_string(t));
      }
      next_check *= 10;
    }
  }
}

PsiClass polynomial(const DiscoveryModel& model, LogCertificate cert, std::string why) {
  check_certificate(model, cert);
  return {Learnability::PolynomialTime, std::nullopt, cert, std::move(why)};
}

PsiClass convergent(double limit_bound, bool some_certain, std::string why) {
  if (some_certain) {
    return {Learnability::PossibleNotPoly, limit_bound, std::nullopt,
            why + "; D(1,t) = 1 for some t, so the impossibility condition fails"};
  }
  return {Learnability::Impossible, limit_bound, std::nullopt, std::move(why)};
}

}  // namespace

PsiClass classify(const DiscoveryModel& model) {
  switch (model.kind()) {
    case DiscoveryKind::Constant:
      // beta*T >= beta*ln(T) because T >= ln(T).
      return polynomial(model, {model.beta(), 0.0}, "Psi(T) = beta*T");
    case DiscoveryKind::BruteForceRandom: {
      const double rate = 1.0 / static_cast<double>(model.total());
      return polynomial(model, {rate, 0.0}, "Psi(T) = T/total");
    }
    case DiscoveryKind::BruteForceSystematic: {
      // Psi(T) >= T/total for every T: the scan terminates with D = 1.
      const double rate = 1.0 / static_cast<double>(model.total());
      return polynomial(model, {rate, 0.0}, "exhaustive scan: Psi(T) >= T/total");
    }
    case DiscoveryKind::PowerLaw: {
      const double c = model.c();
      const double p = model.p();
      if (p > 1.0) {
        return convergent(c * power_tail_upper_bound(p, 1), c >= 1.0,
                          "Psi(inf) = c*zeta(p) is finite");
      }
      // t^-p >= 1/t, so Psi(T) >= c*H_T >= c*ln(T+1).
      return polynomial(model, {c, 0.0}, "Psi(T) >= c*ln(T+1)");
    }
    case DiscoveryKind::Table: {
      const auto& values = model.values();
      if (!model.tail()) {
        return {Learnability::UnknownBeyondHorizon, std::nullopt, std::nullopt,
                "no tail behaviour declared past t=" + std::to_string(values.size())};
      }
      const TailModel& tail = *model.tail();
      const std::uint64_t n = values.size();
      Accumulator prefix;
      bool certain = false;
      for (double v : values) {
        prefix.add(v);
        certain = certain || v >= 1.0;
      }
      if (tail.kind == TailModel::Kind::LogHarmonic) {
        if (tail.c == 0.0) return convergent(prefix.value(), certain, "tail is identically 0");
        return {Learnability::PossibleNotPoly, std::nullopt, std::nullopt,
                "Psi(T) grows like c*ln(ln T): divergent, below any m1*ln T"};
      }
      if (tail.c == 0.0 || tail.p > 1.0) {
        const double tail_bound = tail.c == 0.0 ? 0.0 : tail.c * power_tail_upper_bound(tail.p, n + 1);
        certain = certain || tail_value(tail, n + 1) >= 1.0;
        return convergent(prefix.value() + tail_bound, certain, "power-law tail with p > 1");
      }
      // For T >= n, Psi(T) - c*ln(T+1) is non-decreasing, so the minimum over
      // the explicit prefix is a valid offset.
      Accumulator acc;
      double m2 = std::numeric_limits<double>::infinity();
      for (std::uint64_t T = 1; T <= std::max<std::uint64_t>(n, 1); ++T) {
        acc.add(model.first(T));
        m2 = std::min(m2, acc.value() - tail.c * std::log(static_cast<double>(T) + 1.0));
      }
      return polynomial(model, {tail.c, m2}, "power-law tail with p <= 1");
    }
  }
  return {Learnability::UnknownBeyondHorizon, std::nullopt, std::nullopt, "unreachable"};
}

std::uint64_t exploration_threshold(const DiscoveryModel& model, std::uint64_t n, double delta,
                                    std::uint64_t cutoff) {
  if (n == 0) throw std::invalid_argument("exploration_threshold: N must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("exploration_threshold: delta must lie in (0, 1]");
  }
  const double target = std::log(4.0 * static_cast<double>(n) / delta);

  if (model.kind() == DiscoveryKind::Constant) {
    const double beta = model.beta();
    auto T = static_cast<std::uint64_t>(std::max(1.0, std::ceil(target / beta)));
    while (beta * static_cast<double>(T) < target) ++T;
    while (T > 1 && beta * static_cast<double>(T - 1) >= target) --T;
    if (T > cutoff) {
      throw ThresholdNotReached("exploration threshold exceeds cutoff",
                                beta * static_cast<double>(cutoff), cutoff);
    }
    return T;
  }

  Accumulator acc;
  for (std::uint64_t t = 1; t <= cutoff; ++t) {
    acc.add(model.first(t));
    if (acc.value() >= target) return t;
  }
  std::ostringstream msg;
  msg << "Psi reached " << acc.value() << " < ln(4N/delta) = " << target << " by T = " << cutoff;
  throw ThresholdNotReached(msg.str(), acc.value(), cutoff);
}

bool sample_discovery(const DiscoveryModel& model, std::uint64_t j, std::uint64_t t, Rng& rng) {
  if (j == 0) return false;
  if (model.kind() == DiscoveryKind::BruteForceSystematic && !model.useful_positions().empty()) {
    const auto& pos = model.useful_positions();
    return std::binary_search(pos.begin(), pos.end(), t);
  }
  std::bernoulli_distribution draw(model(j, t));
  return draw(rng);
}

}  // namespace mdpulab
