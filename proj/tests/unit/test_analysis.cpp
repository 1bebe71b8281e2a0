#include <gtest/gtest.h>

#include <sparselq/sparselq.hpp>

#include "oracles.hpp"

using namespace sparselq;

namespace {

PlantData scalar_plant(double a)
{
  PlantData pd;
  pd.A = Mat::Constant(1, 1, a);
  pd.B2 = Mat::Constant(1, 1, 1.0);
  pd.B1 = Mat::Constant(1, 1, 1.0);
  pd.C = Mat::Zero(2, 1);
  pd.C(0, 0) = 1.0;
  pd.D = Mat::Zero(2, 1);
  pd.D(1, 0) = 1.0;
  return pd;
}

Mat stable_matrix(std::mt19937_64 & rng, Index n)
{
  Mat A(n, n);
  std::normal_distribution<double> N(0.0, 1.0);
  for (Index k = 0; k < A.size(); ++k) { A(k) = N(rng); }
  return A - (spectral_abscissa(A) + 0.5) * Mat::Identity(n, n);
}

}  // namespace

TEST(Analysis, RecoverGainFromDiagonalBlock)
{
  Mat W = Mat::Zero(3, 3);
  W(0, 0) = W(1, 1) = 2.0;
  W(2, 0) = W(0, 2) = 1.0;
  W(2, 2) = 1.0;
  const Mat K = recover_gain(W, 2, 1);
  EXPECT_NEAR(K(0, 0), -0.5, 1e-15);
  EXPECT_EQ(K(0, 1), 0.0);
  W(2, 0) = W(0, 2) = 0.0;
  EXPECT_EQ(recover_gain(W, 2, 1).norm(), 0.0);
  W(1, 1) = 0.0;
  EXPECT_THROW(recover_gain(W, 2, 1), SingularW1);
}

TEST(Analysis, LyapunovExamples)
{
  EXPECT_LE((solve_lyapunov(-Mat::Identity(3, 3), Mat::Identity(3, 3)) - 0.5 * Mat::Identity(3, 3)).norm(), 1e-14);
  EXPECT_NEAR(solve_lyapunov(Mat::Constant(1, 1, -2.0), Mat::Constant(1, 1, 4.0))(0, 0), 1.0, 1e-14);
  EXPECT_THROW(solve_lyapunov(Mat::Identity(2, 2), Mat::Identity(2, 2)), NotHurwitz);
}

TEST(Analysis, LyapunovResidualOnRandomStableMatrices)
{
  std::mt19937_64 rng(50);
  for (int t = 0; t < 20; ++t) {
    const Index n = 1 + t % 6;
    const Mat A = stable_matrix(rng, n);
    const Mat Bq = oracle::random_symmetric(rng, n);
    const Mat Q = Bq * Bq + 0.1 * Mat::Identity(n, n);
    const Mat X = solve_lyapunov(A, Q);
    EXPECT_LE((A * X + X * A.transpose() + Q).norm(), 1e-10 * Q.norm());
    EXPECT_LE((X - X.transpose()).norm(), 1e-12 * X.norm());
    EXPECT_GE(min_eigenvalue(X), -1e-12);
  }
}

TEST(Analysis, H2CostScalarAndObservabilityOracle)
{
  const ValidatedPlant sc = validate_plant(scalar_plant(-1.0));
  EXPECT_NEAR(h2_cost(sc, Mat::Zero(1, 1)), 0.5, 1e-14);
  std::mt19937_64 rng(51);
  for (int t = 0; t < 10; ++t) {
    PlantData pd = oracle::random_plant(rng, 1 + t % 4, 1 + t % 2);
    pd.A = stable_matrix(rng, pd.A.rows());
    Mat K = 0.1 * Mat::Ones(pd.B2.cols(), pd.A.rows());
    if (stability_check(pd.A, pd.B2, K) >= 0.0) { K.setZero(); }
    const double J = h2_cost(validate_plant(pd), K);
    EXPECT_NEAR(J, oracle::h2_observability(pd, K), 1e-9 * std::max(1.0, J));
  }
}

TEST(Analysis, H2CostOfUnstableLoopThrows)
{
  const io::ProblemFile pf = io::parse_problem(oracle::data_path("example1.json"));
  EXPECT_THROW(h2_cost(validate_plant(pf.plant), Mat::Zero(pf.m, pf.n)), NotHurwitz);
}

TEST(Analysis, StabilityCheck)
{
  EXPECT_NEAR(stability_check(-Mat::Identity(2, 2), Mat::Ones(2, 1), Mat::Zero(1, 2)), -1.0, 1e-14);
  EXPECT_NEAR(stability_check(Mat::Identity(2, 2), Mat::Ones(2, 1), Mat::Zero(1, 2)), 1.0, 1e-14);
  const io::ProblemFile pf = io::parse_problem(oracle::data_path("example1.json"));
  Mat K(2, 3);
  K << 0.6192, 2.5269, 0, 0, 0, 1.3068;
  EXPECT_LT(stability_check(pf.plant.A, pf.plant.B2, K), 0.0);
}

TEST(Analysis, SparsityReport)
{
  EXPECT_EQ(sparsity_report(Mat::Constant(2, 3, 1e-9), 1e-6).n_zeros, 6);
  Mat K(2, 3);
  K << 0.6192, 2.5269, 0, 0, 0, 1.3068;
  EXPECT_EQ(sparsity_report(K).n_zeros, 3);
  EXPECT_EQ(sparsity_report(Mat::Constant(3, 3, 0.7)).n_zeros, 0);
  EXPECT_THROW(sparsity_report(K, -1.0), InvalidOption);
}

TEST(Analysis, RiccatiScalarCase)
{
  const RiccatiResult r = riccati_oracle(validate_plant(scalar_plant(1.0)), Mat::Constant(1, 1, 2.0));
  const double s = 1.0 + std::sqrt(2.0);
  EXPECT_NEAR(r.P(0, 0), s, 1e-8);
  EXPECT_NEAR(r.K(0, 0), s, 1e-8);
  EXPECT_NEAR(r.J, s, 1e-8);
}

TEST(Analysis, RiccatiCostsNonincreasing)
{
  const io::ProblemFile pf = io::parse_problem(oracle::data_path("example1.json"));
  Mat K0(2, 3);
  K0 << 0.6192, 2.5269, 0, 0, 0, 1.3068;
  const RiccatiResult r = riccati_oracle(validate_plant(pf.plant), K0);
  for (std::size_t k = 1; k < r.costs.size(); ++k) { EXPECT_LE(r.costs[k], r.costs[k - 1] + 1e-12); }
  EXPECT_NEAR(r.J, 1.92, 0.05 * 1.92);
}

TEST(Analysis, RiccatiInputErrors)
{
  PlantData pd = scalar_plant(-1.0);
  pd.C.setZero();
  pd.D(1, 0) = 1.0;
  EXPECT_THROW(riccati_oracle(validate_plant(pd), Mat::Zero(1, 1)), AssumptionViolated);
  EXPECT_THROW(riccati_oracle(validate_plant(scalar_plant(1.0)), Mat::Zero(1, 1)), K0NotStabilizing);
}

TEST(Analysis, SimulateDecay)
{
  const ValidatedPlant vp = validate_plant(scalar_plant(-1.0));
  const Trajectory tr = simulate_impulse(vp, Mat::Zero(1, 1), 1.0, 0.01);
  EXPECT_NEAR(tr.states[0](0, tr.states[0].cols() - 1), std::exp(-1.0), 1e-6);
  const Trajectory fine = simulate_impulse(vp, Mat::Zero(1, 1), 1.0, 0.005);
  EXPECT_LT(std::abs(fine.states[0](0, fine.states[0].cols() - 1) - tr.states[0](0, tr.states[0].cols() - 1)), 1e-8);
  EXPECT_THROW(simulate_impulse(vp, Mat::Zero(1, 1), 1.0, 0.0), InvalidOption);
}

TEST(Analysis, StableLoopDecaysOverHorizon)
{
  const io::ProblemFile pf = io::parse_problem(oracle::data_path("example1.json"));
  const ValidatedPlant vp = validate_plant(pf.plant);
  Mat K(2, 3);
  K << 0.6192, 2.5269, 0, 0, 0, 1.3068;
  const double margin = stability_check(pf.plant.A, pf.plant.B2, K);
  const Trajectory tr = simulate_impulse(vp, K, 20.0 / std::abs(margin), 0.01);
  for (const Mat & X : tr.states) { EXPECT_LT(X.col(X.cols() - 1).norm(), 1e-3 * X.col(0).norm()); }
}

TEST(Analysis, CertificateHoldsOnFeasibleLift)
{
  const ValidatedPlant vp = validate_plant(scalar_plant(-1.0));
  const LiftedProblem lp = lift_plant(vp);
  const Mat X = solve_lyapunov(Mat::Constant(1, 1, -1.5), Mat::Constant(1, 1, 1.0));
  Mat W(2, 2);
  W << X(0, 0), -0.5 * X(0, 0), -0.5 * X(0, 0), 0.25 * X(0, 0) + 0.1;
  const Solution s = make_solution(lp, vec(W), vec(Mat::Constant(1, 1, -0.5 * X(0, 0))));
  EXPECT_TRUE(s.stable);
  EXPECT_GE(s.J_upper, s.J_vertex_max - 1e-12);
}
