#include <gtest/gtest.h>

#include <sparselq/sparselq.hpp>

#include "oracles.hpp"

using namespace sparselq;

namespace {
Mat one(double x) { return Mat::Constant(1, 1, x); }
}  // namespace

TEST(Penalties, WeightedL1ProxMatchesGrid)
{
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> U(-3.0, 3.0), P(0.2, 3.0);
  for (int t = 0; t < 30; ++t) {
    const double z = U(rng), g = P(rng), w = P(rng), rho = P(rng) + 0.5;
    const double got = prox_weighted_l1(one(z), g, one(w), rho)(0);
    const double want = oracle::grid_prox([&](double x) { return g * w * std::abs(x); }, z, rho);
    EXPECT_NEAR(got, want, 2e-4);
  }
}

TEST(Penalties, WeightedL1ThresholdsSmallEntries)
{
  EXPECT_EQ(prox_weighted_l1(one(0.3), 1.0, one(1.0), 1.0)(0), 0.0);
  EXPECT_DOUBLE_EQ(prox_weighted_l1(one(2.5), 1.0, one(1.0), 1.0)(0), 1.5);
  EXPECT_DOUBLE_EQ(prox_weighted_l1(one(-2.5), 1.0, one(1.0), 2.0)(0), -2.0);
}

TEST(Penalties, PiecewiseQuadraticProxMatchesGrid)
{
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-3.0, 3.0), P(0.2, 3.0);
  for (int t = 0; t < 30; ++t) {
    const PqParams pq{P(rng), P(rng), -P(rng), P(rng)};
    const double z = U(rng), g = P(rng), w = P(rng), rho = P(rng) + 0.5;
    const double got = prox_piecewise_quadratic(one(z), g, one(w), pq, rho)(0);
    const double want = oracle::grid_prox([&](double x) { return g * w * pq_scalar(x, pq); }, z, rho);
    EXPECT_NEAR(got, want, 2e-4);
  }
}

TEST(Penalties, ProxRejectsBadArguments)
{
  EXPECT_THROW(prox_weighted_l1(one(1), 1, one(1), 0.0), NonPositiveRho);
  EXPECT_THROW(prox_weighted_l1(one(1), 1, Mat::Ones(2, 1), 1.0), DimensionMismatch);
  EXPECT_THROW(prox_piecewise_quadratic(one(1), 1, one(1), PqParams{1, 1, 1, 1}, 1.0), InvalidPqParams);
}

TEST(Penalties, ExpSurrogateDerivativeIsWeightUpdate)
{
  for (double sigma : {1.0, 0.3, 0.05}) {
    for (double t : {0.01, 0.2, 1.0, 3.0}) {
      const double fd = oracle::derivative([&](double x) { return exp_surrogate(x, sigma); }, t, 1e-7);
      EXPECT_NEAR(exp_weight_update(Vec::Constant(1, t), sigma)(0), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Penalties, ExpSurrogateApproachesCountingNorm)
{
  Mat P(1, 3);
  P << 0.0, 0.5, -2.0;
  PenaltyConfig cfg;
  cfg.kind = PenaltyKind::ExpSurrogate;
  cfg.gamma = 1.0;
  cfg.sigma = 1e-4;
  EXPECT_NEAR(penalty_value(P, cfg), static_cast<double>(l0_count(P)), 1e-9);
  EXPECT_EQ(exp_surrogate(0.0, 0.5), 0.0);
}

TEST(Penalties, ConfigValidation)
{
  PenaltyConfig cfg;
  cfg.gamma = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidOption);
  cfg.gamma = 1.0;
  cfg.kind = PenaltyKind::ExpSurrogate;
  cfg.sigma = 0.0;
  EXPECT_THROW(cfg.validate(), NonPositiveSigma);
}
