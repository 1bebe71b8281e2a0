#ifndef SPARSELQ_ANALYSIS_HPP
#define SPARSELQ_ANALYSIS_HPP

/**
 * @file
 * @brief Closed-loop certification and reporting.
 *
 * The gain acts as u = -K x, so the closed loop of vertex i is A_i - B2_i K
 * and the H2 cost is Tr((C - D K) Wc (C - D K)^T) with Wc the controllability
 * Gramian of that loop.
 */

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cones.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "penalties.hpp"
#include "vectorize.hpp"

namespace sparselq {

/// One outer iteration of a relaxed solve.
struct TraceRow
{
  Index iter = 0;
  double theta = 0.0;
  double alpha = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
  Index inner_sweeps = 0;
  double wall_ms = 0.0;
};

/// One BSUM pass of the l0 continuation.
struct L0TraceRow
{
  Index stage = 0;
  double sigma = 0.0;
  Index pass = 0;
  double h_sigma = 0.0;            ///< accepted value
  double h_sigma_candidate = 0.0;  ///< value of the subproblem output before acceptance
  bool accepted = true;
  Index nnz = 0;
  Index outer_iters = 0;
};

enum class SolveStatus { Converged, NotConverged };

inline const char * to_string(SolveStatus s) { return s == SolveStatus::Converged ? "Converged" : "NotConverged"; }

struct Solution
{
  Mat W;  ///< p x p, gain block and W1 off-diagonals snapped to the consensus iterate
  Mat K;  ///< m x n
  Mat P;  ///< m x n sparse gain block
  Mat W_tilde;  ///< raw lifted iterate before snapping
  double J_upper = 0.0;  ///< <R, W>
  std::vector<double> J_vertex;
  double J_vertex_max = 0.0;
  Eigen::MatrixXi pattern;  ///< 1 where K is nonzero
  Index n_zeros = 0;
  std::vector<double> margins;  ///< spectral abscissa per vertex
  bool stable = false;
  SolveStatus status = SolveStatus::NotConverged;
  bool certified = false;
  std::string certificate_message;
  Index iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;  ///< <R, W> + penalty
  Vec lambda;              ///< equality multipliers
  std::vector<TraceRow> trace;
  std::vector<L0TraceRow> l0_trace;
};

struct SparsityReport
{
  Eigen::MatrixXi pattern;  ///< 1 nonzero, 0 zero
  Index n_zeros = 0;
};

/// Entry is zero iff |x| <= tol * max(1, max |x|).
inline SparsityReport sparsity_report(const Mat & M, double tol = 1e-6)
{
  if (!(tol >= 0.0)) { throw InvalidOption("sparsity tolerance must be >= 0"); }
  const double scale = std::max(1.0, M.size() ? M.cwiseAbs().maxCoeff() : 0.0);
  SparsityReport r;
  r.pattern = Eigen::MatrixXi::Zero(M.rows(), M.cols());
  for (Index k = 0; k < M.size(); ++k) {
    if (std::abs(M(k)) > tol * scale) {
      r.pattern(k) = 1;
    } else {
      ++r.n_zeros;
    }
  }
  return r;
}

/**
 * @brief K = -W2^T W1^{-1}, using only diag(W1) when its off-diagonals are below `offdiag_tol`.
 *
 * Falls back to the full W1 inverse otherwise and sets `*used_full_inverse`.
 */
inline Mat recover_gain(const Mat & W, Index n, Index m, double offdiag_tol = 1e-4, bool * used_full_inverse = nullptr)
{
  if (W.rows() != n + m || W.cols() != n + m) { throw DimensionMismatch("recover_gain: W must be (n+m) x (n+m)"); }
  const Mat W1 = W.topLeftCorner(n, n);
  const Mat W2t = W.bottomLeftCorner(m, n);
  const double scale = std::max(1.0, W1.cwiseAbs().maxCoeff());
  const Vec diag = W1.diagonal();
  if (diag.minCoeff() <= 1e-12 * scale) { throw SingularW1("W1 has a nonpositive diagonal entry"); }
  Mat off = W1;
  off.diagonal().setZero();
  const bool diagonal = off.size() == 0 || off.cwiseAbs().maxCoeff() <= offdiag_tol;
  if (used_full_inverse) { *used_full_inverse = !diagonal; }
  if (diagonal) { return -W2t * diag.cwiseInverse().asDiagonal(); }
  Eigen::FullPivLU<Mat> lu(W1);
  if (!lu.isInvertible()) { throw SingularW1("W1 is singular"); }
  return -W2t * lu.inverse();
}

/// Largest real part of the eigenvalues of A - B2 K.
inline double stability_check(const Mat & A, const Mat & B2, const Mat & K)
{
  if (B2.rows() != A.rows() || K.rows() != B2.cols() || K.cols() != A.cols()) {
    throw DimensionMismatch("stability_check dimensions");
  }
  Eigen::EigenSolver<Mat> es(A - B2 * K, false);
  if (es.info() != Eigen::Success) { throw EigFailure("nonsymmetric eigenvalue computation failed"); }
  return es.eigenvalues().real().maxCoeff();
}

inline double spectral_abscissa(const Mat & A)
{
  Eigen::EigenSolver<Mat> es(A, false);
  if (es.info() != Eigen::Success) { throw EigFailure("nonsymmetric eigenvalue computation failed"); }
  return es.eigenvalues().real().maxCoeff();
}

/// Solve A W + W A^T + Q = 0 by a dense Kronecker linear solve.
inline Mat solve_lyapunov(const Mat & A, const Mat & Q)
{
  const Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) { throw DimensionMismatch("solve_lyapunov dimensions"); }
  if (n > 200) { throw TooLarge("Kronecker Lyapunov solve limited to n <= 200"); }
  if (!(spectral_abscissa(A) < 0.0)) { throw NotHurwitz("Lyapunov solve needs a Hurwitz matrix"); }
  const Mat I = Mat::Identity(n, n);
  const Mat L = kron(I, A) + kron(A, I);
  const Vec rhs = -vec(Q);
  Eigen::PartialPivLU<Mat> lu(L);
  Vec x = lu.solve(rhs);
  x += lu.solve(rhs - L * x);  // one refinement step
  Mat W = unvec(x, n, n);
  return 0.5 * (W + W.transpose());
}

/// H2 cost of u = -K x on the given vertex.
inline double h2_cost(const ValidatedPlant & plant, const Mat & K, Index vertex = 0)
{
  const auto & v = plant.vertices.at(static_cast<std::size_t>(vertex));
  const Mat Acl = v.A - v.B2 * K;
  if (!(spectral_abscissa(Acl) < 0.0)) { throw NotHurwitz("closed loop is not Hurwitz; H2 cost is infinite"); }
  const Mat Wc = solve_lyapunov(Acl, plant.B1B1t);
  const Mat Ccl = plant.plant.C - plant.plant.D * K;
  return (Ccl * Wc * Ccl.transpose()).trace();
}

struct RiccatiResult
{
  Mat K;
  Mat P;
  double J = 0.0;
  Index iterations = 0;
  std::vector<double> costs;  ///< cost of each Newton iterate, starting from K0
};

/**
 * @brief Kleinman-Newton iteration for the nominal LQR problem with Q = C^T C, R = D^T D.
 *
 * Each step solves (A - B2 K)^T P + P (A - B2 K) + C^T C + K^T D^T D K = 0 and sets
 * K = (D^T D)^{-1} B2^T P. J = Tr(P B1 B1^T).
 */
inline RiccatiResult riccati_oracle(const ValidatedPlant & plant, const Mat & K0, Index max_iter = 50)
{
  const Mat & A = plant.plant.A;
  const Mat & B2 = plant.plant.B2;
  if (K0.rows() != plant.m() || K0.cols() != plant.n()) { throw DimensionMismatch("riccati_oracle: K0 shape"); }
  if (plant.CtC.cwiseAbs().maxCoeff() == 0.0) { throw AssumptionViolated("C^T C nonzero"); }
  if (!(stability_check(A, B2, K0) < 0.0)) { throw K0NotStabilizing("initial gain does not stabilize (A, B2)"); }

  const Eigen::LLT<Mat> Rllt(plant.DtD);
  RiccatiResult res;
  res.K = K0;
  for (Index it = 0; it < max_iter; ++it) {
    const Mat Acl = A - B2 * res.K;
    res.P = solve_lyapunov(Acl.transpose(), plant.CtC + res.K.transpose() * plant.DtD * res.K);
    const double J = (res.P * plant.B1B1t).trace();
    res.costs.push_back(J);
    const Mat Knext = Rllt.solve(B2.transpose() * res.P);
    const double step = (Knext - res.K).norm();
    res.K = Knext;
    res.iterations = it + 1;
    if (step <= 1e-13 * (1.0 + res.K.norm())) {
      res.J = J;
      return res;
    }
  }
  throw NoConvergence("Kleinman iteration did not converge in " + std::to_string(max_iter) + " steps");
}

struct Trajectory
{
  std::vector<double> t;
  /// One n x (steps+1) state history per disturbance channel.
  std::vector<Mat> states;
};

/// Impulse response of u = -K x from x(0) = B1 e_j, fixed-step RK4, nominal vertex unless given.
inline Trajectory simulate_impulse(const ValidatedPlant & plant, const Mat & K, double horizon, double dt, Index vertex = 0)
{
  if (!(dt > 0.0)) { throw InvalidOption("simulation step must be > 0"); }
  if (!(horizon >= 0.0)) { throw InvalidOption("simulation horizon must be >= 0"); }
  const auto & v = plant.vertices.at(static_cast<std::size_t>(vertex));
  const Mat Acl = v.A - v.B2 * K;
  const auto steps = static_cast<Index>(std::ceil(horizon / dt - 1e-9));
  Trajectory tr;
  tr.t.resize(static_cast<std::size_t>(steps + 1));
  for (Index k = 0; k <= steps; ++k) { tr.t[static_cast<std::size_t>(k)] = std::min(horizon, k * dt); }
  const Mat & B1 = plant.plant.B1;
  for (Index j = 0; j < B1.cols(); ++j) {
    Mat X(Acl.rows(), steps + 1);
    Vec x = B1.col(j);
    X.col(0) = x;
    for (Index k = 0; k < steps; ++k) {
      const double h = tr.t[static_cast<std::size_t>(k + 1)] - tr.t[static_cast<std::size_t>(k)];
      const Vec k1 = Acl * x;
      const Vec k2 = Acl * (x + 0.5 * h * k1);
      const Vec k3 = Acl * (x + 0.5 * h * k2);
      const Vec k4 = Acl * (x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      X.col(k + 1) = x;
    }
    tr.states.push_back(std::move(X));
  }
  return tr;
}

/// Constraint violations of a lifted point.
struct FeasibilityReport
{
  double min_eig_W = 0.0;
  double min_eig_psi = 0.0;  ///< minimum over vertices
  double max_offdiag_W1 = 0.0;
  double gain_mismatch = 0.0;  ///< ||V1 W V2^T - P||_inf

  bool ok(double tol = 1e-4) const
  {
    return min_eig_W >= -tol && min_eig_psi >= -tol && max_offdiag_W1 <= tol && gain_mismatch <= tol;
  }
};

inline FeasibilityReport feasibility_report(const LiftedProblem & lp, const Mat & W, const Mat & P)
{
  FeasibilityReport f;
  f.min_eig_W = min_eigenvalue(W);
  f.min_eig_psi = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < lp.vertex_count(); ++i) { f.min_eig_psi = std::min(f.min_eig_psi, min_eigenvalue(psi(lp, i, W))); }
  Mat off = W.topLeftCorner(lp.n, lp.n);
  off.diagonal().setZero();
  f.max_offdiag_W1 = off.size() ? off.cwiseAbs().maxCoeff() : 0.0;
  f.gain_mismatch = (lp.V1 * W * lp.V2.transpose() - P).cwiseAbs().maxCoeff();
  return f;
}

/**
 * @brief Fill K-derived fields and check the closed-loop certificate.
 *
 * Certified iff every vertex loop is Hurwitz and <R, W> >= max_i J_i - 1e-4.
 */
inline void certify(const LiftedProblem & lp, Solution & sol, double sparsity_tol = 1e-6)
{
  sol.K = recover_gain(sol.W, lp.n, lp.m);
  const SparsityReport sr = sparsity_report(sol.K, sparsity_tol);
  sol.pattern = sr.pattern;
  sol.n_zeros = sr.n_zeros;
  sol.J_upper = (lp.R.cwiseProduct(sol.W)).sum();

  sol.margins.clear();
  sol.J_vertex.clear();
  sol.stable = true;
  for (Index i = 0; i < lp.vertex_count(); ++i) {
    const auto & v = lp.plant.vertices[static_cast<std::size_t>(i)];
    const double margin = stability_check(v.A, v.B2, sol.K);
    sol.margins.push_back(margin);
    if (margin < 0.0) {
      sol.J_vertex.push_back(h2_cost(lp.plant, sol.K, i));
    } else {
      sol.stable = false;
      sol.J_vertex.push_back(std::numeric_limits<double>::infinity());
    }
  }
  sol.J_vertex_max = -std::numeric_limits<double>::infinity();
  for (double j : sol.J_vertex) { sol.J_vertex_max = std::max(sol.J_vertex_max, j); }

  if (!sol.stable) {
    sol.certified = false;
    sol.certificate_message = "closed loop not Hurwitz on every vertex";
  } else if (sol.J_upper < sol.J_vertex_max - 1e-4) {
    sol.certified = false;
    sol.certificate_message = "<R,W> below the vertex H2 cost";
  } else {
    sol.certified = true;
    sol.certificate_message = "ok";
  }
}

/**
 * @brief Build a certified Solution from the final outer iterate.
 *
 * The gain block of W is replaced by P and the W1 off-diagonals are zeroed,
 * so that zeros of P carry over exactly into K.
 */
inline Solution make_solution(const LiftedProblem & lp, const Vec & W_tilde, const Vec & P_tilde, double sparsity_tol = 1e-6)
{
  Solution sol;
  Mat W = unvec(W_tilde, lp.p, lp.p);
  W = 0.5 * (W + W.transpose());
  sol.W_tilde = W;
  sol.P = unvec(P_tilde, lp.m, lp.n);
  for (Index a = 0; a < lp.n; ++a) {
    for (Index b = 0; b < lp.n; ++b) {
      if (a != b) { W(a, b) = 0.0; }
    }
  }
  W.bottomLeftCorner(lp.m, lp.n) = sol.P;
  W.topRightCorner(lp.n, lp.m) = sol.P.transpose();
  sol.W = W;
  certify(lp, sol, sparsity_tol);
  return sol;
}

}  // namespace sparselq

#endif  // SPARSELQ_ANALYSIS_HPP
