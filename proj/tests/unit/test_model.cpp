#include "oracles.hpp"

#include <shmm/errors.hpp>
#include <shmm/model.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>

namespace shmm {
namespace {

using testing::emission_oracle;
using testing::random_model;

ModelParams two_component(double p_dry, double p_wet, double lambda, EmissionMode mode) {
  ModelParams m = ModelParams::zeros({1, 2, 0, 365, mode, 0.1});
  m.Q(0, 0) = 1.0;
  m.p(0, 0) = p_dry;
  m.p(0, 1) = p_wet;
  m.lambda(0, 0) = lambda;
  return m;
}

TEST(SeasonalScale, MatchesHandComputedValue) {
  const HyperParams h{1, 2, 2, 365, EmissionMode::Continuous, 0.1};
  const double beta[] = {0.3, -0.1, 0.05, 0.02};
  EXPECT_NEAR(seasonal_scale(100, beta, h), 0.80243302734513759208, 1e-15);
}

TEST(SeasonalScale, ZeroDegreeIsOne) {
  const HyperParams h{1, 2, 0, 365, EmissionMode::Continuous, 0.1};
  EXPECT_EQ(seasonal_scale(17, {}, h), 1.0);
}

TEST(SeasonalScale, PeriodicInT) {
  const HyperParams h{1, 2, 1, 12, EmissionMode::Continuous, 0.1};
  const double beta[] = {0.4, 0.2};
  EXPECT_DOUBLE_EQ(seasonal_scale(5, beta, h), seasonal_scale(17, beta, h));
  EXPECT_EQ(reduce_day(13, 12), 1);
  EXPECT_EQ(reduce_day(12, 12), 12);
  EXPECT_EQ(reduce_day(0, 12), 12);
}

TEST(Emission, MixtureDensityAtPositiveValue) {
  ModelParams m = ModelParams::zeros({1, 3, 0, 365, EmissionMode::Continuous, 0.1});
  m.Q(0, 0) = 1.0;
  m.p << 0.3, 0.2, 0.5;
  m.lambda << 2.3, 0.41;
  double comp[3];
  weighted_components(0.7, 0, 1.2, m, comp);
  EXPECT_NEAR(comp[0] + comp[1] + comp[2], 0.23470131348736127014, 1e-15);
  EXPECT_EQ(comp[0], 0.0);
}

TEST(Emission, DryDayHasAtomMass) {
  ModelParams m = two_component(0.35, 0.65, 1.7, EmissionMode::Continuous);
  EXPECT_DOUBLE_EQ(emission_density(0.0, 0, 10, m), 0.35);
}

TEST(Emission, AgreesWithDirectFormula) {
  std::mt19937_64 gen(11);
  for (auto mode : {EmissionMode::Continuous, EmissionMode::Discretized}) {
    const ModelParams m = random_model(gen, 3, 3, 2, 365, mode);
    for (int k = 0; k < 3; ++k) {
      for (double y : {0.0, 0.1, 0.7, 3.2, 25.0}) {
        for (long long t : {1LL, 90LL, 200LL, 365LL}) {
          const double lib = mode == EmissionMode::Continuous ? emission_density(y, k, t, m)
                                                              : emission_pmf(y, k, t, m);
          EXPECT_NEAR(lib, emission_oracle(y, k, t, m), 1e-14 * std::max(1.0, lib));
        }
      }
    }
  }
}

TEST(Discretized, BinZeroMassOfUnitScaleComponent) {
  const ModelParams m = two_component(0.0, 1.0, 2.0, EmissionMode::Discretized);
  EXPECT_NEAR(emission_pmf(0.0, 0, 1, m), 0.18126924692201814133, 1e-15);
}

TEST(Discretized, BinMassesMatchQuadrature) {
  std::mt19937_64 gen(5);
  const ModelParams m = random_model(gen, 2, 2, 1, 365, EmissionMode::Discretized);
  ModelParams cont = m;
  cont.hyper.mode = EmissionMode::Continuous;
  using boost::math::quadrature::gauss_kronrod;
  for (int k = 0; k < 2; ++k) {
    for (int j : {0, 1, 7, 30}) {
      const double a = j * 0.1, b = (j + 1) * 0.1;
      const double wet = gauss_kronrod<double, 31>::integrate(
          [&](double y) { return emission_density(y, k, 40, cont); }, a, b, 10, 1e-15);
      const double expected = wet + (j == 0 ? m.p(k, 0) : 0.0);
      EXPECT_NEAR(emission_pmf(floor_to_grid(a, 0.1), k, 40, m), expected, 1e-13);
    }
  }
}

TEST(Discretized, PmfPlusTailSumsToOne) {
  std::mt19937_64 gen(8);
  const ModelParams m = random_model(gen, 3, 3, 2, 365, EmissionMode::Discretized);
  for (int k = 0; k < 3; ++k) {
    for (long long t : {1LL, 150LL}) {
      double total = 0.0;
      const long long J = 400;
      for (long long j = 0; j < J; ++j) total += emission_pmf(j * 0.1, k, t, m);
      total += pmf_tail_mass(J, k, t, m);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Emission, StateMomentsMatchQuadrature) {
  std::mt19937_64 gen(13);
  const ModelParams m = random_model(gen, 2, 3, 1, 365, EmissionMode::Continuous);
  using boost::math::quadrature::gauss_kronrod;
  for (int k = 0; k < 2; ++k) {
    auto f = [&](double y) { return emission_density(y, k, 77, m); };
    const double mean = gauss_kronrod<double, 61>::integrate(
        [&](double y) { return y * f(y); }, 0.0, INFINITY, 15, 1e-14);
    const double second = gauss_kronrod<double, 61>::integrate(
        [&](double y) { return y * y * f(y); }, 0.0, INFINITY, 15, 1e-14);
    EXPECT_NEAR(state_mean(k, 77, m), mean, 1e-10 * mean);
    EXPECT_NEAR(state_variance(k, 77, m), second - mean * mean, 1e-9 * second);
  }
}

TEST(Stationary, TwoStateChain) {
  RowMatrix Q(2, 2);
  Q << 0.9, 0.1, 0.5, 0.5;
  const Eigen::VectorXd pi = stationary_distribution(Q);
  EXPECT_NEAR(pi(0), 5.0 / 6.0, 1e-14);
  EXPECT_NEAR(pi(1), 1.0 / 6.0, 1e-14);
}

TEST(Stationary, PublishedBremenTransitionMatrix) {
  RowMatrix Q(4, 4);
  Q << 0.71, 0.12, 0.13, 0.04,
       0.01, 0.40, 0.42, 0.17,
       0.20, 0.20, 0.46, 0.15,
       0.005, 0.23, 0.15, 0.62;
  for (int k = 0; k < 4; ++k) Q.row(k) /= Q.row(k).sum();
  const Eigen::VectorXd pi = stationary_distribution(Q);
  const double expected[] = {0.21, 0.24, 0.30, 0.24};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(pi(k), expected[k], 0.01) << "state " << k;
}

TEST(Stationary, AgreesWithEigenvectorOracle) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelParams m = random_model(gen, 4, 2, 0, 365, EmissionMode::Continuous);
    const Eigen::VectorXd a = stationary_distribution(m.Q);
    const Eigen::VectorXd b = testing::stationary_oracle(m.Q);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Stationary, ReducibleChainThrows) {
  RowMatrix Q(2, 2);
  Q << 1.0, 0.0, 0.0, 1.0;
  EXPECT_FALSE(is_irreducible(Q));
  EXPECT_THROW(stationary_distribution(Q), ModelError);
}

TEST(Validation, ReportsEachBrokenInvariant) {
  std::mt19937_64 gen(1);
  ModelParams m = random_model(gen, 2, 3, 1, 365, EmissionMode::Continuous);
  EXPECT_TRUE(validate_params(m).empty());
  m.Q(0, 0) += 0.2;
  m.lambda(1, 0) = -1.0;
  const auto v = validate_params(m);
  auto has = [&](const std::string& rule) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
  };
  EXPECT_TRUE(has("Q.row_sum"));
  EXPECT_GE(v.size(), 2u);
  EXPECT_THROW(require_valid(m), ModelError);
}

TEST(Validation, NonPositiveScaleIsRejected) {
  ModelParams m = two_component(0.5, 0.5, 1.0, EmissionMode::Continuous);
  m.hyper.d = 1;
  m.beta = RowMatrix::Zero(1, 2);
  m.beta(0, 0) = 1.5;
  EXPECT_FALSE(validate_params(m).empty());
}

TEST(Canonical, SortsRatesWithTheirWeights) {
  ModelParams m = ModelParams::zeros({1, 3, 0, 365, EmissionMode::Continuous, 0.1});
  m.Q(0, 0) = 1.0;
  m.p << 0.2, 0.5, 0.3;
  m.lambda << 3.0, 0.5;
  const ModelParams c = canonicalize(m);
  EXPECT_EQ(c.lambda(0, 0), 0.5);
  EXPECT_EQ(c.lambda(0, 1), 3.0);
  EXPECT_EQ(c.p(0, 1), 0.3);
  EXPECT_EQ(c.p(0, 2), 0.5);
}

TEST(Canonical, PermuteStatesRelabelsEverything) {
  std::mt19937_64 gen(4);
  const ModelParams m = random_model(gen, 3, 2, 1, 365, EmissionMode::Continuous);
  const int perm[] = {2, 0, 1};
  const ModelParams q = permute_states(m, perm);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(q.lambda(i, 0), m.lambda(perm[i], 0));
    EXPECT_EQ(q.beta(i, 1), m.beta(perm[i], 1));
    for (int j = 0; j < 3; ++j) EXPECT_EQ(q.Q(i, j), m.Q(perm[i], perm[j]));
  }
}

TEST(Grid, FlooringIsExact) {
  EXPECT_EQ(floor_to_grid(0.30000000000000004, 0.1), 0.3);
  EXPECT_EQ(floor_to_grid(0.29999999999, 0.1), 0.3);
  EXPECT_EQ(floor_to_grid(0.2999, 0.1), 0.2);
  EXPECT_EQ(floor_to_grid(7 * 0.1, 0.1), 0.7);
  EXPECT_EQ(floor_to_grid(0.0, 0.1), 0.0);
  EXPECT_TRUE(on_grid(1.2, 0.1));
  EXPECT_FALSE(on_grid(1.25, 0.1));
  EXPECT_EQ(snap_to_grid(1.2000000001, 0.1), floor_to_grid(1.2, 0.1));
}

TEST(Grid, CheckSeriesRejectsOffGridAndBadDays) {
  SeriesData s;
  s.values = {0.0, 0.15};
  s.day_of_year = {1, 2};
  const HyperParams disc{1, 2, 0, 365, EmissionMode::Discretized, 0.1};
  EXPECT_THROW(check_series(s, disc), ModelError);
  EXPECT_NO_THROW(check_series(discretize(s, 0.1), disc));
  s.day_of_year[1] = 366;
  HyperParams cont = disc;
  cont.mode = EmissionMode::Continuous;
  EXPECT_THROW(check_series(s, cont), ModelError);
}

}  // namespace
}  // namespace shmm
