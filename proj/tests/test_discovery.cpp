#include "mdpulab/discovery.hpp"
#include "mdpulab/io.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

using namespace mdpulab;

namespace {

double direct_psi(const DiscoveryModel& model, std::uint64_t T) {
  long double total = 0.0L;
  for (std::uint64_t t = 1; t <= T; ++t) total += model.first(t);
  return static_cast<double>(total);
}

std::vector<DiscoveryModel> sample_models() {
  return {DiscoveryModel::constant(0.1),
          DiscoveryModel::constant(1.0),
          DiscoveryModel::power_law(0.1, 2.0),
          DiscoveryModel::power_law(1.0, 1.0),
          DiscoveryModel::power_law(0.5, 0.5),
          DiscoveryModel::power_law(0.3, 0.0),
          DiscoveryModel::brute_force_systematic(20, 4),
          DiscoveryModel::brute_force_random(20, 4),
          DiscoveryModel::table({0.5, 0.25, 0.125}, TailModel{TailModel::Kind::PowerLaw, 0.5, 1.0}),
          DiscoveryModel::constant(0.2).with_j_dependence(JDependence::Linear)};
}

}  // namespace

TEST(Psi, Examples) {
  EXPECT_NEAR(psi(DiscoveryModel::constant(0.1), 50), 5.0, 1e-12);
  EXPECT_NEAR(psi(DiscoveryModel::table({0.5, 0.25}), 2), 0.75, 1e-15);
  const double partial = psi(DiscoveryModel::power_law(1.0, 2.0), 10'000);
  const double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
  EXPECT_LE(partial, zeta2);
  EXPECT_GE(partial + 1.0 / 10'000.0, zeta2);
  EXPECT_NEAR(partial, zeta2, 1e-3);
}

TEST(Psi, MatchesDirectSummation) {
  for (const auto& model : sample_models()) {
    for (std::uint64_t T : {1u, 2u, 7u, 19u, 20u, 25u, 1000u}) {
      EXPECT_NEAR(psi(model, T), direct_psi(model, T), 1e-9 * std::max(1.0, direct_psi(model, T)))
          << model.describe() << " T=" << T;
    }
  }
}

TEST(Psi, MonotoneAndAdditive) {
  for (const auto& model : sample_models()) {
    double previous = 0.0;
    for (std::uint64_t T = 1; T <= 60; ++T) {
      const double value = psi(model, T);
      EXPECT_GE(value, previous - 1e-15);
      previous = value;
    }
    for (std::uint64_t t1 : {3u, 10u}) {
      for (std::uint64_t t2 : {1u, 9u}) {
        double extra = 0.0;
        for (std::uint64_t t = t1 + 1; t <= t1 + t2; ++t) extra += model.first(t);
        EXPECT_NEAR(psi(model, t1 + t2), psi(model, t1) + extra, 1e-12);
      }
    }
  }
}

TEST(DiscoveryModel, ProbabilitiesAreBoundedAndMonotoneInJ) {
  for (const auto& model : sample_models()) {
    for (std::uint64_t t = 1; t <= 25; ++t) {
      double previous = 0.0;
      for (std::uint64_t j = 0; j <= 6; ++j) {
        const double d = model(j, t);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
        EXPECT_GE(d, previous - 1e-15) << model.describe() << " j=" << j << " t=" << t;
        previous = d;
      }
      EXPECT_EQ(model(0, t), 0.0);
    }
  }
}

TEST(DiscoveryModel, JDependence) {
  const auto beta = DiscoveryModel::constant(0.2);
  EXPECT_NEAR(beta(3, 1), 1.0 - std::pow(0.8, 3), 1e-15);
  EXPECT_NEAR(beta.with_j_dependence(JDependence::Linear)(3, 1), 0.6, 1e-15);
  const auto random = DiscoveryModel::brute_force_random(20, 4);
  EXPECT_NEAR(random(3, 5), 3.0 / 20.0, 1e-15);
  const auto systematic = DiscoveryModel::brute_force_systematic(20, 4);
  EXPECT_NEAR(systematic(3, 5), 3.0 / 16.0, 1e-15);
}

TEST(DiscoveryModel, RejectsBadParameters) {
  EXPECT_THROW(DiscoveryModel::constant(0.0), std::invalid_argument);
  EXPECT_THROW(DiscoveryModel::constant(1.5), std::invalid_argument);
  EXPECT_THROW(DiscoveryModel::power_law(0.1, -1.0), std::invalid_argument);
  EXPECT_THROW(DiscoveryModel::power_law(2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(DiscoveryModel::brute_force_systematic(3, 4), std::invalid_argument);
  EXPECT_THROW(DiscoveryModel::table({0.5, 1.5}), std::invalid_argument);
}

TEST(Classify, Examples) {
  const PsiClass constant = classify(DiscoveryModel::constant(0.1));
  EXPECT_EQ(constant.verdict, Learnability::PolynomialTime);
  ASSERT_TRUE(constant.certificate.has_value());

  const PsiClass impossible = classify(DiscoveryModel::power_law(0.1, 2.0));
  EXPECT_EQ(impossible.verdict, Learnability::Impossible);
  ASSERT_TRUE(impossible.psi_limit_bound.has_value());
  EXPECT_NEAR(*impossible.psi_limit_bound, 0.1 * std::numbers::pi * std::numbers::pi / 6.0, 1e-6);

  const PsiClass harmonic = classify(DiscoveryModel::power_law(1.0, 1.0));
  EXPECT_EQ(harmonic.verdict, Learnability::PolynomialTime);
}

TEST(Classify, OtherRegimes) {
  // D(1,1) = 1 makes discovery certain, yet Psi stays bounded.
  EXPECT_EQ(classify(DiscoveryModel::power_law(1.0, 2.0)).verdict, Learnability::PossibleNotPoly);
  EXPECT_EQ(classify(DiscoveryModel::power_law(0.5, 0.5)).verdict, Learnability::PolynomialTime);
  EXPECT_EQ(classify(DiscoveryModel::table({0.5, 0.25})).verdict, Learnability::UnknownBeyondHorizon);
  EXPECT_EQ(classify(DiscoveryModel::table({0.5}, TailModel{TailModel::Kind::PowerLaw, 0.2, 3.0})).verdict,
            Learnability::Impossible);
  EXPECT_EQ(classify(DiscoveryModel::table({0.5}, TailModel{TailModel::Kind::LogHarmonic, 0.5, 0.0})).verdict,
            Learnability::PossibleNotPoly);
  EXPECT_EQ(classify(DiscoveryModel::brute_force_systematic(50, 1)).verdict, Learnability::PolynomialTime);
}

TEST(Classify, CertificatesHoldAtSampledHorizons) {
  for (const auto& model : sample_models()) {
    const PsiClass cls = classify(model);
    if (cls.verdict == Learnability::PolynomialTime) {
      ASSERT_TRUE(cls.certificate.has_value()) << model.describe();
      long double total = 0.0L;
      std::uint64_t next_check = 1;
      for (std::uint64_t t = 1; t <= 1'000'000; ++t) {
        total += model.first(t);
        if (t == next_check) {
          const double bound = cls.certificate->m1 * std::log(static_cast<double>(t)) + cls.certificate->m2;
          EXPECT_GE(static_cast<double>(total), bound - 1e-9) << model.describe() << " T=" << t;
          next_check *= 10;
        }
      }
    }
    if (cls.verdict == Learnability::Impossible) {
      ASSERT_TRUE(cls.psi_limit_bound.has_value());
      EXPECT_LT(direct_psi(model, 1'000'000), *cls.psi_limit_bound) << model.describe();
    }
  }
}

TEST(Classify, RunsQuickly) {
  const auto start = std::chrono::steady_clock::now();
  classify(DiscoveryModel::constant(0.1));
  classify(DiscoveryModel::power_law(0.1, 2.0));
  classify(DiscoveryModel::power_law(1.0, 1.0));
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Threshold, Examples) {
  EXPECT_EQ(exploration_threshold(DiscoveryModel::constant(0.1), 100, 0.1), 83u);
  EXPECT_EQ(exploration_threshold(DiscoveryModel::constant(1.0), 1, 1.0), 2u);
  try {
    exploration_threshold(DiscoveryModel::power_law(0.1, 2.0), 100, 0.1);
    FAIL() << "expected ThresholdNotReached";
  } catch (const ThresholdNotReached& e) {
    EXPECT_NEAR(e.partial_sum, 0.1 * std::numbers::pi * std::numbers::pi / 6.0, 1e-6);
  }
}

TEST(Threshold, MatchesLinearScan) {
  for (const auto& model : sample_models()) {
    for (std::uint64_t n : {1u, 10u, 100u}) {
      const double target = std::log(4.0 * static_cast<double>(n) / 0.1);
      long double total = 0.0L;
      std::uint64_t oracle = 0;
      for (std::uint64_t t = 1; t <= 200'000; ++t) {
        total += model.first(t);
        if (static_cast<double>(total) >= target) {
          oracle = t;
          break;
        }
      }
      if (oracle == 0) {
        EXPECT_THROW(exploration_threshold(model, n, 0.1, 200'000), ThresholdNotReached) << model.describe();
      } else {
        EXPECT_EQ(exploration_threshold(model, n, 0.1), oracle) << model.describe();
      }
    }
  }
}

TEST(SampleDiscovery, NothingLeftMeansNoDiscovery) {
  Rng rng(1);
  for (std::uint64_t t = 1; t < 100; ++t) EXPECT_FALSE(sample_discovery(DiscoveryModel::constant(1.0), 0, t, rng));
}

TEST(SampleDiscovery, SystematicScanHitsRecordedPositions) {
  const auto model = DiscoveryModel::brute_force_systematic(6, 2, {3, 5});
  Rng rng(2);
  for (std::uint64_t t = 1; t <= 6; ++t) {
    EXPECT_EQ(sample_discovery(model, 2, t, rng), t == 3 || t == 5) << "t=" << t;
  }
}

TEST(SampleDiscovery, SystematicScanFindsEverythingInTotalSteps) {
  Rng rng(3);
  for (std::uint64_t total : {1u, 6u, 40u}) {
    for (std::uint64_t useful = 0; useful <= std::min<std::uint64_t>(total, 5); ++useful) {
      std::vector<std::uint64_t> positions;
      for (std::uint64_t k = 0; k < useful; ++k) positions.push_back(total - k);
      std::sort(positions.begin(), positions.end());
      const auto model = DiscoveryModel::brute_force_systematic(total, useful, positions);
      std::uint64_t found = 0;
      std::uint64_t last = 0;
      for (std::uint64_t t = 1; t <= total; ++t) {
        if (sample_discovery(model, useful - found, t, rng)) {
          ++found;
          last = t;
        }
      }
      EXPECT_EQ(found, useful);
      if (useful > 0) EXPECT_EQ(last, total);
    }
  }
}

TEST(SampleDiscovery, ConstantFrequency) {
  Rng rng(4);
  const auto model = DiscoveryModel::constant(0.5);
  int hits = 0;
  for (int k = 0; k < 100'000; ++k) hits += sample_discovery(model, 1, 1, rng) ? 1 : 0;
  EXPECT_NEAR(hits / 100'000.0, 0.5, 0.01);
}

TEST(SampleDiscovery, FirstSuccessIsGeometric) {
  Rng rng(5);
  for (double beta : {0.1, 0.3, 0.8}) {
    const auto model = DiscoveryModel::constant(beta);
    double total = 0.0;
    for (int run = 0; run < 10'000; ++run) {
      std::uint64_t t = 1;
      while (!sample_discovery(model, 1, t, rng)) ++t;
      total += static_cast<double>(t);
    }
    EXPECT_NEAR(total / 10'000.0, 1.0 / beta, 0.05 / beta);
  }
}

TEST(DiscoveryDocument, RoundTrip) {
  for (const auto& model : sample_models()) {
    const DiscoveryModel back = discovery_from_json(Json::parse(discovery_to_json(model).dump()));
    EXPECT_EQ(back.describe(), model.describe());
    for (std::uint64_t t = 1; t <= 30; ++t) EXPECT_EQ(back(2, t), model(2, t));
  }
  EXPECT_THROW(discovery_from_json(Json{{"kind", "constant"}, {"beta", 3.0}}), ConfigError);
  EXPECT_THROW(discovery_from_json(Json{{"kind", "mystery"}}), ConfigError);
}
