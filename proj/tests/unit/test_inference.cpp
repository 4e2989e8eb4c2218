#include "oracles.hpp"

#include <shmm/errors.hpp>
#include <shmm/inference.hpp>
#include <shmm/rng.hpp>
#include <shmm/simulate.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace shmm {
namespace {

using testing::enumerate_paths;
using testing::random_model;
using testing::random_series;

TEST(ForwardBackward, MatchesPathEnumeration) {
  std::mt19937_64 gen(2024);
  for (int rep = 0; rep < 60; ++rep) {
    const int K = 1 + rep % 3;
    const int M = 2 + rep % 2;
    const auto mode = rep % 4 < 2 ? EmissionMode::Continuous : EmissionMode::Discretized;
    const ModelParams m = random_model(gen, K, M, rep % 3, 7, mode);
    const SeriesData s = random_series(gen, 2 + rep % 5, 7, mode);
    const Eigen::VectorXd init = testing::random_simplex(gen, K);
    const auto e = enumerate_paths(m, s, init);
    const PosteriorSet post = e_step(m, s, init);
    EXPECT_NEAR(post.loglik, e.loglik, 1e-9 * std::max(1.0, std::abs(e.loglik)));
    EXPECT_NEAR(log_likelihood(m, s, init), e.loglik, 1e-9 * std::max(1.0, std::abs(e.loglik)));
    EXPECT_NEAR(log_likelihood_backward(m, s, init), e.loglik, 1e-9 * std::max(1.0, std::abs(e.loglik)));
    for (Eigen::Index t = 0; t < e.smoothing.rows(); ++t) {
      for (int k = 0; k < K; ++k) EXPECT_NEAR(post.smoothing(t, k), e.smoothing(t, k), 1e-10);
    }
  }
}

TEST(ForwardBackward, DefaultInitialLawIsStationary) {
  std::mt19937_64 gen(7);
  const ModelParams m = random_model(gen, 3, 2, 1, 7, EmissionMode::Continuous);
  const SeriesData s = random_series(gen, 5, 7, EmissionMode::Continuous);
  const auto e = enumerate_paths(m, s, testing::stationary_oracle(m.Q));
  EXPECT_NEAR(log_likelihood(m, s), e.loglik, 1e-10);
}

TEST(ForwardBackward, PosteriorsAreConsistent) {
  std::mt19937_64 gen(9);
  const ModelParams m = random_model(gen, 3, 3, 1, 30, EmissionMode::Continuous);
  const SeriesData s = random_series(gen, 200, 30, EmissionMode::Continuous);
  const PosteriorSet post = e_step(m, s);
  for (Eigen::Index t = 0; t < post.smoothing.rows(); ++t) {
    EXPECT_NEAR(post.smoothing.row(t).sum(), 1.0, 1e-12);
    for (int k = 0; k < 3; ++k) {
      double r = 0.0;
      for (int c = 0; c < 3; ++c) r += post.responsibilities(t, k, c);
      EXPECT_NEAR(r, post.smoothing(t, k), 1e-12);
      if (t + 1 < post.smoothing.rows()) {
        double out = 0.0, in = 0.0;
        for (int l = 0; l < 3; ++l) {
          out += post.pair_smoothing(t, k, l);
          in += post.pair_smoothing(t, l, k);
        }
        EXPECT_NEAR(out, post.smoothing(t, k), 1e-12);
        EXPECT_NEAR(in, post.smoothing(t + 1, k), 1e-12);
      }
    }
  }
}

TEST(ForwardBackward, LongSeriesStaysFinite) {
  std::mt19937_64 gen(10);
  const ModelParams m = random_model(gen, 2, 3, 2, 365, EmissionMode::Discretized);
  const SeriesData s = simulate_series(m, 50000, 3);
  const double ll = log_likelihood(m, s);
  EXPECT_TRUE(std::isfinite(ll));
  EXPECT_NEAR(forward_log_normalizers(m, s).sum(), ll, 1e-9 * std::abs(ll));
  EXPECT_NEAR(log_likelihood_backward(m, s), ll, 1e-9 * std::abs(ll));
}

TEST(ForwardBackward, ImpossibleObservationThrowsWithIndex) {
  ModelParams m = ModelParams::zeros({2, 2, 0, 365, EmissionMode::Continuous, 0.1});
  m.Q << 0.5, 0.5, 0.5, 0.5;
  m.p << 1.0, 0.0, 1.0, 0.0;
  m.lambda << 1.0, 2.0;
  SeriesData s;
  s.values = {0.0, 0.0, 1.5};
  s.day_of_year = {1, 2, 3};
  try {
    log_likelihood(m, s);
    FAIL() << "expected DegenerateLikelihood";
  } catch (const DegenerateLikelihood& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Viterbi, MatchesExhaustiveArgmax) {
  std::mt19937_64 gen(77);
  for (int rep = 0; rep < 60; ++rep) {
    const int K = 1 + rep % 3;
    const auto mode = rep % 2 ? EmissionMode::Continuous : EmissionMode::Discretized;
    const ModelParams m = random_model(gen, K, 2 + rep % 2, 1, 5, mode);
    const SeriesData s = random_series(gen, 2 + rep % 6, 5, mode);
    const Eigen::VectorXd init = testing::random_simplex(gen, K);
    const auto e = enumerate_paths(m, s, init);
    const auto path = viterbi(m, s, init);
    EXPECT_NEAR(testing::path_log_score(m, s, init, path), e.best_score, 1e-9);
    if (e.best_score - e.runner_up > 1e-9) EXPECT_EQ(path, e.best_path);
  }
}

TEST(Viterbi, TiesGoToLowestStates) {
  ModelParams m = ModelParams::zeros({3, 2, 0, 365, EmissionMode::Continuous, 0.1});
  m.Q.setConstant(1.0 / 3.0);
  for (int k = 0; k < 3; ++k) {
    m.p(k, 0) = 0.4;
    m.p(k, 1) = 0.6;
    m.lambda(k, 0) = 0.8;
  }
  SeriesData s;
  s.values = {0.0, 2.0, 0.3, 0.0};
  s.day_of_year = {1, 2, 3, 4};
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  EXPECT_EQ(viterbi(m, s, uniform), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(map_states(e_step(m, s, uniform)), (std::vector<int>{0, 0, 0, 0}));
}

TEST(MStep, ClosedFormMatchesPosteriorSums) {
  std::mt19937_64 gen(21);
  const ModelParams m = random_model(gen, 3, 3, 1, 10, EmissionMode::Continuous);
  const SeriesData s = random_series(gen, 80, 10, EmissionMode::Continuous);
  const PosteriorSet post = e_step(m, s);
  const ClosedFormUpdate u = m_step_closed(post);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(u.initial(k), post.smoothing(0, k), 1e-15);
    double occ = 0.0, from = 0.0;
    for (Eigen::Index t = 0; t < post.smoothing.rows(); ++t) occ += post.smoothing(t, k);
    for (Eigen::Index t = 0; t + 1 < post.smoothing.rows(); ++t) from += post.smoothing(t, k);
    for (int l = 0; l < 3; ++l) {
      double pair = 0.0;
      for (Eigen::Index t = 0; t + 1 < post.smoothing.rows(); ++t) pair += post.pair_smoothing(t, k, l);
      EXPECT_NEAR(u.Q(k, l), pair / from, 1e-12);
    }
    for (int c = 0; c < 3; ++c) {
      double r = 0.0;
      for (Eigen::Index t = 0; t < post.smoothing.rows(); ++t) r += post.responsibilities(t, k, c);
      EXPECT_NEAR(u.p(k, c), r / occ, 1e-12);
    }
  }
}

TEST(MStep, EmptyStateRaisesZeroOccupancy) {
  PosteriorSet post;
  post.smoothing = RowMatrix::Zero(3, 2);
  post.smoothing.col(0).setOnes();
  post.pair_smoothing = Tensor3(2, 2, 2);
  post.pair_smoothing(0, 0, 0) = post.pair_smoothing(1, 0, 0) = 1.0;
  post.responsibilities = Tensor3(3, 2, 2);
  for (int t = 0; t < 3; ++t) post.responsibilities(t, 0, 0) = 1.0;
  try {
    m_step_closed(post);
    FAIL() << "expected ZeroOccupancy";
  } catch (const ZeroOccupancy& e) {
    EXPECT_EQ(e.state(), 1);
  }
}

TEST(MStep, EmissionStepNeverLowersObjective) {
  std::mt19937_64 gen(31);
  for (auto mode : {EmissionMode::Continuous, EmissionMode::Discretized}) {
    const ModelParams truth = random_model(gen, 2, 3, 1, 20, mode);
    const SeriesData s = simulate_series(truth, 2000, 5);
    Rng rng(9);
    const ModelParams start = random_initialization(truth.hyper, rng);
    const PosteriorSet post = e_step(start, s);
    const EmissionUpdate up = m_step_emission(post, s, start);
    for (int k = 0; k < 2; ++k) {
      EXPECT_GE(up.objective_after(k), up.objective_before(k));
      if (!up.accepted[k]) {
        EXPECT_EQ(up.lambda.row(k), start.lambda.row(k));
        EXPECT_EQ(up.beta.row(k), start.beta.row(k));
      }
    }
  }
}

TEST(EM, LikelihoodIsNondecreasing) {
  std::mt19937_64 gen(41);
  for (auto mode : {EmissionMode::Continuous, EmissionMode::Discretized}) {
    const ModelParams truth = random_model(gen, 2, 2, 1, 12, mode);
    const SeriesData s = simulate_series(truth, 1500, 8);
    Rng rng(2);
    const ModelParams start = random_initialization(truth.hyper, rng);
    EMConfig cfg;
    cfg.max_iters = 60;
    cfg.epsilon = 0.0;
    const RestartResult r = em_run(s, start, Eigen::VectorXd::Constant(2, 0.5), cfg);
    ASSERT_FALSE(r.failed) << r.error;
    ASSERT_EQ(r.loglik_trace.size(), static_cast<std::size_t>(r.iterations) + 1);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i) {
      EXPECT_GE(r.loglik_trace[i], r.loglik_trace[i - 1] - 1e-9) << "iteration " << i;
    }
  }
}

TEST(EM, FitIsIndependentOfWorkerCount) {
  std::mt19937_64 gen(51);
  const ModelParams truth = random_model(gen, 2, 2, 1, 30, EmissionMode::Discretized);
  const SeriesData s = simulate_series(truth, 900, 4);
  EMConfig cfg;
  cfg.restarts = 4;
  cfg.max_iters = 40;
  cfg.seed = 99;
  const FitReport a = em_fit(s, truth.hyper, cfg, 1);
  const FitReport b = em_fit(s, truth.hyper, cfg, 4);
  EXPECT_EQ(a.best_restart, b.best_restart);
  EXPECT_EQ(a.loglik_trace, b.loglik_trace);
  EXPECT_EQ(a.params.Q, b.params.Q);
  EXPECT_EQ(a.params.lambda, b.params.lambda);
  EXPECT_EQ(a.params.beta, b.params.beta);
  ASSERT_EQ(a.runs.size(), 4u);
  for (const auto& r : a.runs) {
    if (!r.failed) EXPECT_LE(r.loglik_trace.back(), a.loglik_trace.back());
  }
}

TEST(EM, RejectsUnusableInput) {
  const HyperParams h{2, 2, 0, 365, EmissionMode::Continuous, 0.1};
  SeriesData one;
  one.values = {0.5};
  one.day_of_year = {1};
  EXPECT_THROW(em_fit(one, h, EMConfig{}), InputError);
  SeriesData two = one;
  two.values.push_back(0.0);
  two.day_of_year.push_back(2);
  EMConfig none;
  none.restarts = 0;
  EXPECT_THROW(em_fit(two, h, none), FitError);
}

TEST(EM, RandomInitializationIsValid) {
  Rng rng(17);
  const HyperParams h{4, 3, 2, 365, EmissionMode::Discretized, 0.1};
  for (int i = 0; i < 20; ++i) {
    const ModelParams m = random_initialization(h, rng);
    EXPECT_TRUE(validate_params(m).empty());
    for (int k = 0; k < 4; ++k) EXPECT_LE(m.lambda(k, 0), m.lambda(k, 1));
  }
}

}  // namespace
}  // namespace shmm
