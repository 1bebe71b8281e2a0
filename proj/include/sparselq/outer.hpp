#ifndef SPARSELQ_OUTER_HPP
#define SPARSELQ_OUTER_HPP

/**
 * @file
 * @brief Two-timescale primal-dual splitting for
 *
 *   min  f(W) + g(P)   s.t.  A vec(W) + B vec(P) = 0,  W in the lifted cone,
 *
 * with f(W) = <R, W> (plus an anchor term in the l0 subproblems) and g one of
 * the sparsity penalties. The W-step is delegated to the inner sGS-PCD solver,
 * the P-step is a closed-form proximal map.
 */

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "inner.hpp"
#include "log.hpp"
#include "model.hpp"
#include "penalties.hpp"
#include "vectorize.hpp"

namespace sparselq {

enum class RegimeKind { L1, PQ, WeightedL1Anchored };

inline const char * to_string(RegimeKind k)
{
  switch (k) {
    case RegimeKind::L1: return "l1";
    case RegimeKind::PQ: return "pq";
    case RegimeKind::WeightedL1Anchored: return "weighted_l1_anchored";
  }
  return "?";
}

struct RegimeSpec
{
  RegimeKind kind = RegimeKind::L1;
  PenaltyConfig penalty;
  double mu_f = 0.0;
  double mu_g = 0.0;
  double L_f = 0.0;
  Vec anchor;           ///< vec(W) of the proximal anchor, anchored regime only
  double lambda = 0.0;  ///< anchor weight is 1 / lambda

  static RegimeSpec l1(double gamma, Mat weights = {})
  {
    RegimeSpec r;
    r.kind = RegimeKind::L1;
    r.penalty.kind = PenaltyKind::WeightedL1;
    r.penalty.gamma = gamma;
    r.penalty.weights = std::move(weights);
    return r;
  }

  static RegimeSpec pq(double gamma, Mat weights = {}, PqParams params = {})
  {
    RegimeSpec r;
    r.kind = RegimeKind::PQ;
    r.penalty.kind = PenaltyKind::PiecewiseQuadratic;
    r.penalty.gamma = gamma;
    r.penalty.weights = std::move(weights);
    r.penalty.pq = params;
    validate_pq(params);
    r.mu_g = r.penalty.weights.size() ? r.penalty.weights.minCoeff() * std::min(params.a1, params.a2)
                                      : std::min(params.a1, params.a2);
    return r;
  }

  static RegimeSpec anchored(double gamma, Mat weights, Vec anchor, double lambda)
  {
    if (!(lambda > 0.0)) { throw InvalidOption("anchor weight lambda must be > 0"); }
    RegimeSpec r;
    r.kind = RegimeKind::WeightedL1Anchored;
    r.penalty.kind = PenaltyKind::WeightedL1;
    r.penalty.gamma = gamma;
    r.penalty.weights = std::move(weights);
    r.anchor = std::move(anchor);
    r.lambda = lambda;
    r.mu_f = 1.0 / lambda;
    r.L_f = 1.0 / lambda;
    return r;
  }

  void validate(const LiftedProblem & lp) const
  {
    penalty.validate();
    penalty.weights_or_ones(lp.m, lp.n);
    if ((kind == RegimeKind::PQ) != (mu_g > 0.0)) { throw InvalidOption("mu_g > 0 exactly for the PQ regime"); }
    if ((kind == RegimeKind::WeightedL1Anchored) != (mu_f > 0.0)) {
      throw InvalidOption("mu_f > 0 exactly for the anchored regime");
    }
    if (kind == RegimeKind::WeightedL1Anchored && anchor.size() != lp.p * lp.p) {
      throw DimensionMismatch("anchor must be vec of a p x p matrix");
    }
  }

  double penalty_of(const Mat & P) const { return penalty_value(P, penalty); }
};

struct SolverOptions
{
  double eps1 = 1e-5;
  double eps2 = 1e-4;
  Index max_outer = 50000;
  Index min_outer = 1;  ///< iterations run before the stopping rule is consulted
  double beta0 = 1.0;
  double kappa0 = 1.0;
  double inner_eps_min = 1e-8;
  double inner_eps_max = 1e-4;
  double inner_eps_factor = 0.1;
  Index max_inner_sweeps = 10000;
  double rho_scale = 1.0;
  double sparsity_tol = 1e-6;
  double min_gamma = 1e-8;  ///< gamma = 0 requests run at this value
  SvecConvention convention = SvecConvention::Isometric;
  bool record_trace = true;

  void validate() const
  {
    if (!(eps1 > 0.0 && eps2 > 0.0)) { throw InvalidOption("eps1 and eps2 must be > 0"); }
    if (max_outer < 1) { throw InvalidOption("max_outer must be >= 1"); }
    if (min_outer < 1 || min_outer > max_outer) { throw InvalidOption("need 1 <= min_outer <= max_outer"); }
    if (!(beta0 > 0.0 && kappa0 > 0.0)) { throw InvalidOption("beta0 and kappa0 must be > 0"); }
    if (!(inner_eps_min > 0.0 && inner_eps_max >= inner_eps_min)) { throw InvalidOption("inner tolerances"); }
    if (max_inner_sweeps < 1) { throw InvalidOption("max_inner_sweeps must be >= 1"); }
    if (!(rho_scale > 0.0)) { throw InvalidOption("rho_scale must be > 0"); }
  }
};

struct OuterState
{
  Vec W_tilde, v;
  Vec P_tilde, P_prev, w;
  Vec lambda, lambda_bar;
  double theta = 1.0;
  double kappa = 1.0;  ///< the scheme's damping parameter gamma_k
  double beta = 1.0;
  double alpha = 0.0;
  double mu_f = 0.0;
  double mu_g = 0.0;
  Index k = 0;
  DualState dual;
  bool has_dual = false;
  Index last_inner_sweeps = 0;
  double last_inner_residual = 0.0;
};

/// W~ = v = vec(I), P~ = w = 0, lambda = 0, theta = 1.
inline OuterState initial_state(const LiftedProblem & lp, const SolverOptions & opt)
{
  OuterState s;
  const Index p = lp.p, mn = lp.m * lp.n;
  s.W_tilde = vec(Mat::Identity(p, p));
  s.v = s.W_tilde;
  s.P_tilde = Vec::Zero(mn);
  s.P_prev = s.P_tilde;
  s.w = s.P_tilde;
  s.lambda = Vec::Zero(lp.op.rows());
  s.lambda_bar = s.lambda;
  s.theta = 1.0;
  s.kappa = opt.kappa0;
  s.beta = opt.beta0;
  return s;
}

/// Gain block (V2 (x) V1) vec(W), with forced-zero entries cleared.
inline Vec gain_block(const LiftedProblem & lp, const Vec & W_vec)
{
  Vec P(lp.m * lp.n);
  for (Index j = 0; j < lp.n; ++j) {
    for (Index i = 0; i < lp.m; ++i) { P(i + j * lp.m) = W_vec((lp.n + i) + j * lp.p); }
  }
  for (const auto & [i, j] : lp.forced_zeros) { P(i + j * lp.m) = 0.0; }
  return P;
}

/**
 * @brief Restart from a previous lifted point and multiplier, with fresh step parameters.
 *
 * P~ defaults to the gain block of W when `P_vec` is empty.
 */
inline OuterState warm_state(const LiftedProblem & lp,
                             const SolverOptions & opt,
                             const Vec & W_vec,
                             const Vec & lambda,
                             const Vec & P_vec = {})
{
  OuterState s = initial_state(lp, opt);
  s.W_tilde = W_vec;
  s.v = W_vec;
  s.P_tilde = P_vec.size() == lp.m * lp.n ? P_vec : gain_block(lp, W_vec);
  s.P_prev = s.P_tilde;
  s.w = s.P_tilde;
  if (lambda.size() == s.lambda.size()) { s.lambda = lambda; }
  s.lambda_bar = s.lambda;
  return s;
}

struct StepParameters
{
  double alpha = 0.0;
  double theta_next = 0.0;
  double kappa_next = 0.0;
  double beta_next = 0.0;
  double eta_g = 0.0;
  double eta_f_tilde = 0.0;
  double tau = 0.0;
  Vec u;
  Vec y_tilde;
  Vec v_tilde;
};

/// Step alpha_k from ||B||^2 alpha^2 = beta theta, the parameter advance and the auxiliary points.
inline StepParameters step_and_parameters(const OuterState & s, double norm_B)
{
  if (!(s.theta > 0.0 && s.beta > 0.0)) { throw InvalidOption("theta and beta must be > 0"); }
  StepParameters sp;
  const double a = std::sqrt(s.beta * s.theta) / norm_B;
  sp.alpha = a;
  sp.theta_next = s.theta / (1.0 + a);
  sp.kappa_next = (s.kappa + s.mu_f * a) / (1.0 + a);
  sp.beta_next = (s.beta + s.mu_g * a) / (1.0 + a);
  sp.eta_g = (a + 1.0) * s.beta + s.mu_g * a;
  sp.eta_f_tilde = s.kappa + s.mu_f * a;
  sp.tau = a * a / sp.eta_g;
  if (s.W_tilde.size()) {
    sp.u = (s.W_tilde + a * s.v) / (1.0 + a);
    sp.v_tilde = (s.kappa * s.v + s.mu_f * a * sp.u) / sp.eta_f_tilde;
  }
  if (s.P_tilde.size()) { sp.y_tilde = s.P_tilde + (a * s.beta / sp.eta_g) * (s.w - s.P_tilde); }
  return sp;
}

struct ConvergenceDecision
{
  bool stop = false;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double eps_pri = 0.0;
  double eps_dua = 0.0;
};

/**
 * @brief Stop iff ||r|| <= eps_pri and ||s|| <= eps_dua with
 * r = A W~ + B P~ and s = rho A^T B (P~ - P~_prev).
 */
inline ConvergenceDecision check_convergence(const OuterState & s,
                                             const LiftedProblem & lp,
                                             double eps1,
                                             double eps2,
                                             double rho_scale = 1.0)
{
  const SpMat & A = lp.op.A_op;
  const SpMat & B = lp.op.B_op;
  const Vec AW = A * s.W_tilde;
  const Vec BP = B * s.P_tilde;
  ConvergenceDecision c;
  c.primal_res = (AW + BP).norm();
  const Vec BdP = B * (s.P_tilde - s.P_prev);
  c.dual_res = rho_scale * (A.transpose() * BdP).norm();
  c.eps_pri = std::sqrt(static_cast<double>(A.rows())) * eps1 + eps2 * std::max(AW.norm(), BP.norm());
  const Vec Atl = A.transpose() * s.lambda;
  c.eps_dua = static_cast<double>(lp.p) * eps1 + eps2 * Atl.norm();
  c.stop = c.primal_res <= c.eps_pri && c.dual_res <= c.eps_dua;
  return c;
}

/// Proximal map of the regime penalty with parameter rho, forced zeros written as 0.
inline Mat regime_prox(const LiftedProblem & lp, const RegimeSpec & regime, const Mat & Z, double rho)
{
  const Mat w = regime.penalty.weights_or_ones(lp.m, lp.n);
  Mat P = regime.kind == RegimeKind::PQ
              ? prox_piecewise_quadratic(Z, regime.penalty.gamma, w, regime.penalty.pq, rho)
              : prox_weighted_l1(Z, regime.penalty.gamma, w, rho);
  for (const auto & [i, j] : lp.forced_zeros) { P(i, j) = 0.0; }
  return P;
}

/// Smooth part of the objective at vec(W).
inline double smooth_objective(const LiftedProblem & lp, const RegimeSpec & regime, const Vec & W_vec)
{
  double f = vec(lp.R).dot(W_vec);
  if (regime.kind == RegimeKind::WeightedL1Anchored) {
    f += 0.5 / regime.lambda * (W_vec - regime.anchor).squaredNorm();
  }
  return f;
}

/// One pass of the splitting scheme; advances `s` in place and returns the inner sweeps used.
inline Index outer_iteration(OuterState & s,
                             const LiftedProblem & lp,
                             const InnerOperators & ops,
                             const RegimeSpec & regime,
                             const SolverOptions & opt)
{
  const SpMat & A = lp.op.A_op;
  const SpMat & B = lp.op.B_op;
  const StepParameters sp = step_and_parameters(s, lp.norm_B);
  const double a = sp.alpha;
  s.alpha = a;

  Vec d = vec(lp.R) + A.transpose() * s.lambda;
  if (regime.kind == RegimeKind::WeightedL1Anchored) { d += (sp.u - regime.anchor) / regime.lambda; }

  const double pres = (A * s.W_tilde + B * s.P_tilde).norm();
  const double eps_in = s.k == 0 ? opt.inner_eps_max
                                 : std::max(opt.inner_eps_min, std::min(opt.inner_eps_max, opt.inner_eps_factor * pres));
  InnerResult inner = solve_inner(ops, d, s.w, sp.v_tilde, a, s.theta, sp.eta_f_tilde, eps_in, opt.max_inner_sweeps,
                                  s.has_dual ? &s.dual : nullptr);
  if (!inner.converged) {
    log::debug("inner solver hit the sweep cap at outer iteration " + std::to_string(s.k) + ", residual "
               + std::to_string(inner.residual));
  }
  s.v = std::move(inner.vec_w);
  s.dual = std::move(inner.state);
  s.has_dual = true;
  s.last_inner_sweeps = inner.sweeps;
  s.last_inner_residual = inner.residual;

  s.W_tilde = (s.W_tilde + a * s.v) / (1.0 + a);
  const Vec Av = A * s.v;
  s.lambda_bar = s.lambda + (a / s.theta) * (Av + B * s.w);

  const double rho = 1.0 / sp.tau;
  const Vec Zv = sp.y_tilde - sp.tau * (B.transpose() * s.lambda_bar);
  const Mat P_next = regime_prox(lp, regime, unvec(Zv, lp.m, lp.n), rho);
  const Vec P_next_vec = vec(P_next);

  s.P_prev = s.P_tilde;
  s.w = P_next_vec + (P_next_vec - s.P_tilde) / a;
  s.P_tilde = P_next_vec;
  s.lambda = s.lambda + (a / s.theta) * (Av + B * s.w);

  s.theta = sp.theta_next;
  s.kappa = sp.kappa_next;
  s.beta = sp.beta_next;
  ++s.k;
  return inner.sweeps;
}

/// Least-squares slope of log(residual) against log(iteration) over [k_max / 4, k_max].
inline double tail_slope(const std::vector<TraceRow> & trace)
{
  if (trace.size() < 8) { return std::numeric_limits<double>::quiet_NaN(); }
  const std::size_t kmax = trace.size();
  const std::size_t start = kmax / 4;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double cnt = 0;
  for (std::size_t i = start; i < kmax; ++i) {
    const double r = trace[i].primal_res;
    if (!(r > 0.0)) { continue; }
    const double x = std::log(static_cast<double>(trace[i].iter + 1));
    const double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    cnt += 1;
  }
  if (cnt < 2) { return std::numeric_limits<double>::quiet_NaN(); }
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

/**
 * @brief Run the splitting scheme from `state` until the stopping rule or max_outer.
 *
 * Never throws on non-convergence: the returned Solution carries status
 * NotConverged together with the last iterate and its certificate.
 */
inline Solution solve_relaxed_in_place(const LiftedProblem & lp, RegimeSpec regime, const SolverOptions & opt, OuterState & state)
{
  opt.validate();
  if (regime.penalty.gamma <= 0.0) { regime.penalty.gamma = opt.min_gamma; }
  regime.validate(lp);
  state.mu_f = regime.mu_f;
  state.mu_g = regime.mu_g;

  const InnerOperators ops = build_inner_operators(lp, opt.convention);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<TraceRow> trace;
  if (opt.record_trace) { trace.reserve(static_cast<std::size_t>(std::min<Index>(opt.max_outer, 100000))); }

  ConvergenceDecision dec;
  Index iters = 0;
  bool converged = false;
  while (iters < opt.max_outer) {
    const double theta_k = state.theta;
    const Index sweeps = outer_iteration(state, lp, ops, regime, opt);
    ++iters;
    dec = check_convergence(state, lp, opt.eps1, opt.eps2, opt.rho_scale);
    if (opt.record_trace) {
      TraceRow row;
      row.iter = iters - 1;
      row.theta = theta_k;
      row.alpha = state.alpha;
      row.primal_res = dec.primal_res;
      row.dual_res = dec.dual_res;
      row.objective = smooth_objective(lp, regime, state.W_tilde) + regime.penalty_of(unvec(state.P_tilde, lp.m, lp.n));
      row.inner_sweeps = sweeps;
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      trace.push_back(row);
    }
    if (log::enabled(log::Level::Debug) && iters % 1000 == 0) {
      log::debug("outer " + std::to_string(iters) + " primal " + std::to_string(dec.primal_res) + " dual "
                 + std::to_string(dec.dual_res));
    }
    if (dec.stop && iters >= opt.min_outer) {
      converged = true;
      break;
    }
  }

  Solution sol;
  try {
    sol = make_solution(lp, state.W_tilde, state.P_tilde, opt.sparsity_tol);
  } catch (const SingularW1 & e) {
    sol.W = unvec(state.W_tilde, lp.p, lp.p);
    sol.W_tilde = sol.W;
    sol.P = unvec(state.P_tilde, lp.m, lp.n);
    sol.K = Mat::Zero(lp.m, lp.n);
    sol.pattern = Eigen::MatrixXi::Zero(lp.m, lp.n);
    sol.certified = false;
    sol.certificate_message = e.what();
  }
  sol.status = converged ? SolveStatus::Converged : SolveStatus::NotConverged;
  sol.iterations = iters;
  sol.primal_res = dec.primal_res;
  sol.dual_res = dec.dual_res;
  sol.objective = smooth_objective(lp, regime, state.W_tilde) + regime.penalty_of(sol.P);
  sol.lambda = state.lambda;
  sol.trace = std::move(trace);
  if (!converged) {
    log::info(std::string("solve stopped at max_outer = ") + std::to_string(opt.max_outer) + " without meeting tolerance");
  }
  return sol;
}

inline Solution solve_relaxed(const LiftedProblem & lp, const RegimeSpec & regime, const SolverOptions & opt, OuterState state)
{
  return solve_relaxed_in_place(lp, regime, opt, state);
}

inline Solution solve_relaxed(const LiftedProblem & lp, const RegimeSpec & regime, const SolverOptions & opt = {})
{
  return solve_relaxed(lp, regime, opt, initial_state(lp, opt));
}

}  // namespace sparselq

#endif  // SPARSELQ_OUTER_HPP
