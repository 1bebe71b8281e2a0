#ifndef SPARSELQ_L0_HPP
#define SPARSELQ_L0_HPP

/**
 * @file
 * @brief Direct l0-penalized synthesis by sigma-continuation on the surrogate
 *
 *   H_sigma(W) = <R, W> + gamma * sum_ij f_sigma(|P_ij|),  f_sigma(t) = 1 - exp(-t / sigma),
 *
 * alternating the closed-form weight update y = f_sigma'(|P|) with an
 * anchored weighted-l1 subproblem (block successive upper-bound minimization).
 */

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "log.hpp"
#include "model.hpp"
#include "outer.hpp"
#include "penalties.hpp"

namespace sparselq {

struct L0Options
{
  double sigma0 = 1.0;
  double decay = 0.7;
  double sigma_min = 1e-4;
  double lambda = 10.0;   ///< anchor weight 1 / lambda
  Index max_passes = 50;  ///< BSUM passes per sigma stage
  double rel_tol = 1e-5;  ///< per-stage stop on relative change of H_sigma
  double uphill_tol = 1e-10;
  double feas_tol = 1e-4;
  SolverOptions initial;     ///< options of the l1 solve that provides the starting point
  SolverOptions subproblem;  ///< options of each anchored subproblem

  L0Options()
  {
    initial.max_outer = 20000;
    subproblem.max_outer = 2000;
    subproblem.min_outer = 100;
    subproblem.eps1 = 1e-6;
    subproblem.eps2 = 1e-5;
  }

  void validate() const
  {
    if (!(decay > 0.0 && decay < 1.0)) { throw InvalidOption("sigma decay must lie in (0, 1)"); }
    if (!(lambda > 0.0)) { throw InvalidOption("lambda must be > 0"); }
    if (!(sigma_min > 0.0 && sigma_min < sigma0 && sigma0 <= 1.0)) {
      throw InvalidOption("need 0 < sigma_min < sigma0 <= 1");
    }
    if (max_passes < 1) { throw InvalidOption("max_passes must be >= 1"); }
    initial.validate();
    subproblem.validate();
  }
};

/// y = f_sigma'(|(V2 (x) V1) vec(W)|), as an m x n matrix.
inline Mat update_y(const LiftedProblem & lp, const Vec & W_vec, double sigma)
{
  const Vec P = gain_block(lp, W_vec);
  return unvec(exp_weight_update(P.cwiseAbs(), sigma), lp.m, lp.n);
}

/**
 * @brief H_sigma at a lifted pair (W, P), +infinity when W leaves the cones or
 * A vec(W) + B vec(P) departs from zero by more than `feas_tol` (sup norm).
 */
inline double h_sigma_objective(const LiftedProblem & lp,
                                const Vec & W_vec,
                                const Vec & P_vec,
                                double sigma,
                                double gamma,
                                double feas_tol = 1e-4)
{
  if (!(sigma > 0.0)) { throw NonPositiveSigma("sigma must be > 0"); }
  Mat W = unvec(W_vec, lp.p, lp.p);
  W = 0.5 * (W + W.transpose());
  const Vec r = lp.op.A_op * vec(W) + lp.op.B_op * P_vec;
  if (r.size() && r.cwiseAbs().maxCoeff() > feas_tol) { return std::numeric_limits<double>::infinity(); }
  if (min_eigenvalue(W) < -feas_tol) { return std::numeric_limits<double>::infinity(); }
  for (Index i = 0; i < lp.vertex_count(); ++i) {
    if (min_eigenvalue(psi(lp, i, W)) < -feas_tol) { return std::numeric_limits<double>::infinity(); }
  }
  double pen = 0.0;
  for (Index k = 0; k < P_vec.size(); ++k) { pen += exp_surrogate(std::abs(P_vec(k)), sigma); }
  return lp.R.cwiseProduct(W).sum() + gamma * pen;
}

/// H_sigma(W) with P read off the gain block of W.
inline double h_sigma_objective(const LiftedProblem & lp, const Vec & W_vec, double sigma, double gamma, double feas_tol = 1e-4)
{
  return h_sigma_objective(lp, W_vec, gain_block(lp, W_vec), sigma, gamma, feas_tol);
}

/// Anchored weighted-l1 solve, warm-started at the anchor pair (W, P) with multiplier `lambda_warm`.
inline Solution weighted_subproblem(const LiftedProblem & lp,
                                    const Mat & y,
                                    const Vec & W_anchor,
                                    double lambda,
                                    double gamma,
                                    const SolverOptions & opt,
                                    const Vec & lambda_warm = {},
                                    const Vec & P_anchor = {})
{
  if (!(y.array() > 0.0).all()) { throw InvalidOption("weights y must be strictly positive"); }
  const RegimeSpec regime = RegimeSpec::anchored(gamma, y, W_anchor, lambda);
  return solve_relaxed(lp, regime, opt, warm_state(lp, opt, W_anchor, lambda_warm, P_anchor));
}

/// gamma * ||P||_0 + <R, W> of a finished solution.
inline double l0_objective(const LiftedProblem & lp, const Solution & sol, double gamma, double tol = 1e-6)
{
  return lp.R.cwiseProduct(sol.W).sum() + gamma * static_cast<double>(sol.P.size() - sparsity_report(sol.P, tol).n_zeros);
}

/**
 * @brief sigma-continuation with BSUM passes.
 *
 * The outer-scheme state (iterates, multipliers, step parameters) is carried
 * from pass to pass and only the anchor and weights change, so each pass
 * resumes the previous one instead of restarting from theta = 1.
 */
inline Solution solve_l0(const LiftedProblem & lp, double gamma, const L0Options & opt = {})
{
  opt.validate();
  if (!(gamma >= 0.0)) { throw InvalidOption("gamma must be >= 0"); }

  OuterState st = initial_state(lp, opt.initial);
  Solution cur = solve_relaxed_in_place(lp, RegimeSpec::l1(gamma), opt.initial, st);
  std::vector<TraceRow> trace = std::move(cur.trace);
  std::vector<L0TraceRow> l0_trace;
  bool last_stage_settled = false;

  Index stage = 0;
  for (double sigma = opt.sigma0 * opt.decay; sigma >= opt.sigma_min * (1.0 - 1e-12); sigma *= opt.decay, ++stage) {
    double h_prev = h_sigma_objective(lp, vec(cur.W_tilde), vec(cur.P), sigma, gamma, opt.feas_tol);
    last_stage_settled = false;
    for (Index pass = 0; pass < opt.max_passes; ++pass) {
      const Mat y = unvec(exp_weight_update(vec(cur.P).cwiseAbs(), sigma), lp.m, lp.n);
      const RegimeSpec regime = RegimeSpec::anchored(gamma, y, vec(cur.W_tilde), opt.lambda);
      Solution cand = solve_relaxed_in_place(lp, regime, opt.subproblem, st);
      const double h_cand = h_sigma_objective(lp, vec(cand.W_tilde), vec(cand.P), sigma, gamma, opt.feas_tol);
      trace.insert(trace.end(), cand.trace.begin(), cand.trace.end());
      cand.trace.clear();

      L0TraceRow row;
      row.stage = stage;
      row.sigma = sigma;
      row.pass = pass;
      row.h_sigma_candidate = h_cand;
      row.outer_iters = cand.iterations;
      // inexact subproblem solves may step uphill; keep the incumbent then
      row.accepted = h_cand <= h_prev + opt.uphill_tol * std::max(1.0, std::abs(h_prev));
      const double h_old = h_prev;
      if (row.accepted) {
        cur = std::move(cand);
        h_prev = h_cand;
      }
      row.h_sigma = h_prev;
      row.nnz = cur.P.size() - sparsity_report(cur.P, opt.subproblem.sparsity_tol).n_zeros;
      l0_trace.push_back(row);
      log::debug("l0 stage " + std::to_string(stage) + " sigma " + std::to_string(sigma) + " pass "
                 + std::to_string(pass) + " H " + std::to_string(h_prev));

      const double rel = std::abs(h_old - h_prev) / std::max(1.0, std::abs(h_old));
      if (!row.accepted || rel < opt.rel_tol) {
        last_stage_settled = true;
        break;
      }
    }
  }

  for (std::size_t i = 0; i < trace.size(); ++i) { trace[i].iter = static_cast<Index>(i); }
  cur.trace = std::move(trace);
  cur.l0_trace = std::move(l0_trace);
  cur.iterations = static_cast<Index>(cur.trace.size());
  cur.objective = l0_objective(lp, cur, gamma, opt.subproblem.sparsity_tol);
  const bool feasible = std::isfinite(cur.l0_trace.empty() ? 0.0 : cur.l0_trace.back().h_sigma);
  cur.status = last_stage_settled && feasible ? SolveStatus::Converged : SolveStatus::NotConverged;
  return cur;
}

}  // namespace sparselq

#endif  // SPARSELQ_L0_HPP
