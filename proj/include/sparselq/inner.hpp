#ifndef SPARSELQ_INNER_HPP
#define SPARSELQ_INNER_HPP

/**
 * @file
 * @brief v-subproblem of the outer scheme, solved through its dual with
 * symmetric Gauss-Seidel proximal coordinate descent (sGS-PCD).
 *
 * With u = svec(W) and W = D u, the subproblem reads
 *
 *   min_u  <d, D u> + sigma1 ||A D u + b||^2 + sigma2 ||D u - v||^2
 *   s.t.   W >= 0,  Psi_i(W) >= 0  (i = 1..M).
 *
 * Its objective is (1/2) u^T M u - q^T u + (D^T d)^T u + const. Multipliers
 * X0 (order p) and X_i (order n) give the dual
 *
 *   max_{X >= 0}  -(1/2) (q - l(X))^T M^{-1} (q - l(X)) + sum_i c^T X_i + const,
 *   l(X) = D^T d - X0 + sum_i G_i^T X_i,
 *
 * whose blocks are updated one PSD projection at a time.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cones.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "vectorize.hpp"

namespace sparselq {

/// Subproblem operators that stay fixed over an entire outer solve.
struct InnerOperators
{
  SvecConvention convention = SvecConvention::Isometric;
  Index n = 0, p = 0;
  Mat D;    ///< p^2 x svec_p duplication map
  Mat AD;   ///< A_op * D
  Mat AtA;  ///< (A D)^T (A D)
  Mat DtD;
  SpMat B;  ///< B_op
  std::vector<Mat> G;
  Vec c;

  Index vertex_count() const { return static_cast<Index>(G.size()); }
  Index svec_p() const { return svec_size(p); }
  Index svec_n() const { return svec_size(n); }
};

inline InnerOperators build_inner_operators(const LiftedProblem & lp,
                                            SvecConvention conv = SvecConvention::Isometric)
{
  InnerOperators ops;
  ops.convention = conv;
  ops.n = lp.n;
  ops.p = lp.p;
  ops.D = Mat(lp.svec_p.D(conv));
  ops.AD = lp.op.A_op * ops.D;
  ops.AtA = ops.AD.transpose() * ops.AD;
  ops.DtD = ops.D.transpose() * ops.D;
  ops.B = lp.op.B_op;
  ops.G = lp.coupling(conv).G;
  ops.c = lp.coupling(conv).c;
  return ops;
}

/// Quadratic data of one subproblem instance.
struct DualData
{
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  Mat M_mat;
  SpdSolver M_factor;
  Mat M_inv;
  Vec q;
  Vec b_tilde;
  Vec xi1;         ///< 2 sigma1 (A D)^T b, so q = xi2 - xi1
  Vec xi2;         ///< 2 sigma2 D^T v
  Vec omega_dual;  ///< M^{-1} q
  Mat Psi_mat;     ///< -(1/2) M^{-1}; L0 = -2 Psi
  Vec d_svec;      ///< D^T d
  std::vector<Mat> L_ops;      ///< L0, L1, ..., LM
  std::vector<double> rho_list;
  const InnerOperators * ops = nullptr;

  Index blocks() const { return static_cast<Index>(L_ops.size()); }
};

/// Multipliers (X0, X1, ..., XM) in svec coordinates.
struct DualState
{
  Vec X0;
  std::vector<Vec> Xi;

  static DualState zeros(const InnerOperators & ops)
  {
    DualState s;
    s.X0 = Vec::Zero(ops.svec_p());
    s.Xi.assign(static_cast<std::size_t>(ops.vertex_count()), Vec::Zero(ops.svec_n()));
    return s;
  }

  Vec & block(Index i) { return i == 0 ? X0 : Xi[static_cast<std::size_t>(i - 1)]; }
  const Vec & block(Index i) const { return i == 0 ? X0 : Xi[static_cast<std::size_t>(i - 1)]; }
};

inline DualData assemble_dual_data(const InnerOperators & ops,
                                   const Vec & d_k,
                                   const Vec & w_k,
                                   const Vec & v_tilde_k,
                                   double alpha_k,
                                   double theta_k,
                                   double eta_f_k)
{
  if (!(alpha_k > 0.0 && theta_k > 0.0 && eta_f_k > 0.0)) {
    throw InvalidOption("subproblem needs alpha, theta, eta_f > 0");
  }
  DualData dd;
  dd.ops = &ops;
  dd.sigma1 = alpha_k / (2.0 * theta_k);
  dd.sigma2 = eta_f_k / (2.0 * alpha_k);
  dd.M_mat = 2.0 * dd.sigma1 * ops.AtA + 2.0 * dd.sigma2 * ops.DtD;
  dd.M_factor.compute(dd.M_mat);
  dd.M_inv = dd.M_factor.inverse();
  dd.M_inv = 0.5 * (dd.M_inv + dd.M_inv.transpose());

  dd.b_tilde = ops.B * w_k;
  dd.xi1 = 2.0 * dd.sigma1 * ops.AD.transpose() * dd.b_tilde;
  dd.xi2 = 2.0 * dd.sigma2 * ops.D.transpose() * v_tilde_k;
  dd.q = dd.xi2 - dd.xi1;
  dd.omega_dual = dd.M_inv * dd.q;
  dd.Psi_mat = -0.5 * dd.M_inv;
  dd.d_svec = ops.D.transpose() * d_k;

  const double psi_top = max_eigenvalue(dd.Psi_mat);
  if (psi_top > 1e-6 * std::max(1.0, dd.M_inv.norm())) {
    throw PsiNotNegativeSemidefinite("Psi has eigenvalue " + std::to_string(psi_top));
  }

  dd.L_ops.push_back(dd.M_inv);
  for (const auto & G : ops.G) {
    Mat L = G * dd.M_inv * G.transpose();
    dd.L_ops.push_back(0.5 * (L + L.transpose()));
  }
  for (const auto & L : dd.L_ops) {
    // a zero block (e.g. a vertex with no coupling) still needs a positive step
    dd.rho_list.push_back(std::max(max_eigenvalue(L), 1e-12));
  }
  return dd;
}

/// l(X) = D^T d - X0 + sum_i G_i^T X_i.
inline Vec dual_linear_map(const DualData & dd, const DualState & st)
{
  Vec l = dd.d_svec - st.X0;
  for (std::size_t i = 0; i < st.Xi.size(); ++i) { l += dd.ops->G[i].transpose() * st.Xi[i]; }
  return l;
}

/// H_i of the block-i quadratic model; L_i X_i - H_i is the gradient of the negated dual in block i.
inline Vec block_offset(const DualData & dd, const DualState & st, Index i, const Vec & l)
{
  if (i == 0) { return dd.M_inv * (l + st.X0) - dd.omega_dual; }
  const Mat & G = dd.ops->G[static_cast<std::size_t>(i - 1)];
  return dd.ops->c + G * dd.omega_dual - G * (dd.M_inv * (l - G.transpose() * st.block(i)));
}

inline Index block_order(const DualData & dd, Index i) { return i == 0 ? dd.ops->p : dd.ops->n; }

inline Vec block_gradient(const DualData & dd, const DualState & st, Index i)
{
  const Vec l = dual_linear_map(dd, st);
  return dd.L_ops[static_cast<std::size_t>(i)] * st.block(i) - block_offset(dd, st, i, l);
}

namespace detail {

inline void update_block(DualState & st, const DualData & dd, Index i)
{
  const Vec l = dual_linear_map(dd, st);
  const Vec H = block_offset(dd, st, i, l);
  Vec & X = st.block(i);
  const auto k = static_cast<std::size_t>(i);
  const Vec delta = X + (H - dd.L_ops[k] * X) / dd.rho_list[k];
  X = project_psd_svec(delta, block_order(dd, i), dd.ops->convention);
}

}  // namespace detail

/// One backward (X_M, ..., X_1, X0) then forward (X_1, ..., X_M) pass.
inline DualState sgs_sweep(DualState st, const DualData & dd)
{
  const Index M = dd.blocks() - 1;
  for (Index i = M; i >= 1; --i) { detail::update_block(st, dd, i); }
  detail::update_block(st, dd, 0);
  for (Index i = 1; i <= M; ++i) { detail::update_block(st, dd, i); }
  return st;
}

/// max_i ||X_i - Pi(X_i - g_i)|| / (1 + ||X_i|| + ||g_i||) with g_i the block gradient.
inline double dual_residual(const DualState & st, const DualData & dd)
{
  const Vec l = dual_linear_map(dd, st);
  double err = 0.0;
  for (Index i = 0; i < dd.blocks(); ++i) {
    const Vec & X = st.block(i);
    const Vec g = dd.L_ops[static_cast<std::size_t>(i)] * X - block_offset(dd, st, i, l);
    const Vec r = X - project_psd_svec(X - g, block_order(dd, i), dd.ops->convention);
    err = std::max(err, r.norm() / (1.0 + X.norm() + g.norm()));
  }
  return err;
}

/// svec(W) = M^{-1} (q - l(X)).
inline Vec recover_primal(const DualData & dd, const DualState & st)
{
  return dd.M_factor.solve(dd.q - dual_linear_map(dd, st));
}

/// Subproblem objective at u = svec(W).
inline double primal_objective(const DualData & dd, const Vec & u, const Vec & v_tilde_k)
{
  const Vec Du = dd.ops->D * u;
  const double s = dd.d_svec.dot(u);
  return s + dd.sigma1 * (dd.ops->AD * u + dd.b_tilde).squaredNorm()
         + dd.sigma2 * (Du - v_tilde_k).squaredNorm();
}

/// Dual function value Theta(X); equals the primal optimum at a dual solution.
inline double dual_objective(const DualData & dd, const DualState & st, const Vec & v_tilde_k)
{
  const Vec r = dd.q - dual_linear_map(dd, st);
  double val = -0.5 * r.dot(dd.M_inv * r);
  for (const auto & X : st.Xi) { val += dd.ops->c.dot(X); }
  return val + dd.sigma1 * dd.b_tilde.squaredNorm() + dd.sigma2 * v_tilde_k.squaredNorm();
}

struct InnerResult
{
  Vec vec_w;  ///< D svec(W)
  Index sweeps = 0;
  double residual = 0.0;
  bool converged = false;
  DualState state;
};

/// Thrown by solve_inner in strict mode; carries the best iterate.
class MaxSweepsExceeded : public Error
{
public:
  MaxSweepsExceeded(InnerResult best)
      : Error("sGS-PCD reached the sweep cap with residual " + std::to_string(best.residual)),
        best_(std::move(best))
  {}
  const InnerResult & best() const noexcept { return best_; }

private:
  InnerResult best_;
};

/**
 * @brief Sweep at least once, then until dual_residual < eps or max_sweeps.
 *
 * Without `strict`, hitting the cap returns the last iterate with converged = false.
 */
inline InnerResult solve_inner(const InnerOperators & ops,
                               const Vec & d_k,
                               const Vec & w_k,
                               const Vec & v_tilde_k,
                               double alpha_k,
                               double theta_k,
                               double eta_f_k,
                               double eps,
                               Index max_sweeps,
                               const DualState * warm_start = nullptr,
                               bool strict = false)
{
  if (!(eps > 0.0)) { throw InvalidOption("inner tolerance must be > 0"); }
  const DualData dd = assemble_dual_data(ops, d_k, w_k, v_tilde_k, alpha_k, theta_k, eta_f_k);
  InnerResult res;
  res.state = warm_start ? *warm_start : DualState::zeros(ops);
  res.residual = std::numeric_limits<double>::infinity();
  while (res.sweeps < max_sweeps) {
    res.state = sgs_sweep(std::move(res.state), dd);
    ++res.sweeps;
    res.residual = dual_residual(res.state, dd);
    if (res.residual < eps) { break; }
  }
  if (res.sweeps == 0) { res.residual = dual_residual(res.state, dd); }
  res.converged = res.residual < eps;
  res.vec_w = ops.D * recover_primal(dd, res.state);
  if (!res.converged && strict) { throw MaxSweepsExceeded(std::move(res)); }
  return res;
}

}  // namespace sparselq

#endif  // SPARSELQ_INNER_HPP
