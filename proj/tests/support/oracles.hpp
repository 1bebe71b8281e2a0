#ifndef SPARSELQ_TESTS_ORACLES_HPP
#define SPARSELQ_TESTS_ORACLES_HPP

#include <sparselq/sparselq.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#ifndef SPARSELQ_DATA_DIR
#define SPARSELQ_DATA_DIR "data"
#endif

namespace oracle {

using sparselq::Index;
using sparselq::Mat;
using sparselq::Vec;

inline std::string data_path(const std::string & name) { return std::string(SPARSELQ_DATA_DIR) + "/" + name; }

/// argmin over a uniform grid of h(p) + (rho/2)(p - z)^2.
inline double grid_prox(const std::function<double(double)> & h, double z, double rho, double lo = -5.0, double hi = 5.0,
                        double step = 1e-4)
{
  double best = lo, best_val = std::numeric_limits<double>::infinity();
  const auto count = static_cast<long>(std::llround((hi - lo) / step));
  for (long k = 0; k <= count; ++k) {
    const double p = lo + static_cast<double>(k) * step;
    const double val = h(p) + 0.5 * rho * (p - z) * (p - z);
    if (val < best_val) {
      best_val = val;
      best = p;
    }
  }
  return best;
}

/// Central finite difference.
inline double derivative(const std::function<double(double)> & f, double x, double h = 1e-6)
{
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Example plants with the standard weights B1 = I, C = [I_c; 0], D = [0; I_m].
inline sparselq::PlantData random_plant(std::mt19937_64 & rng, Index n, Index m, double scale = 1.0)
{
  std::normal_distribution<double> N(0.0, 1.0);
  sparselq::PlantData pd;
  pd.A = Mat(n, n);
  pd.B2 = Mat(n, m);
  for (Index k = 0; k < pd.A.size(); ++k) { pd.A(k) = scale * N(rng); }
  for (Index k = 0; k < pd.B2.size(); ++k) { pd.B2(k) = N(rng); }
  pd.B1 = Mat::Identity(n, n);
  pd.C = Mat::Zero(n + m, n);
  pd.C.topRows(n) = Mat::Identity(n, n);
  pd.D = Mat::Zero(n + m, m);
  pd.D.bottomRows(m) = Mat::Identity(m, m);
  return pd;
}

inline Mat random_symmetric(std::mt19937_64 & rng, Index d, double scale = 1.0)
{
  std::normal_distribution<double> N(0.0, 1.0);
  Mat S(d, d);
  for (Index k = 0; k < S.size(); ++k) { S(k) = scale * N(rng); }
  return 0.5 * (S + S.transpose());
}

inline Vec random_vec(std::mt19937_64 & rng, Index d, double scale = 1.0)
{
  std::normal_distribution<double> N(0.0, 1.0);
  Vec v(d);
  for (Index k = 0; k < d; ++k) { v(k) = scale * N(rng); }
  return v;
}

/// Data of one cone-constrained quadratic subproblem, as handed to the inner solver.
struct SubproblemInstance
{
  sparselq::LiftedProblem lp;
  sparselq::InnerOperators ops;
  Vec d, w, v_tilde;
  double alpha = 0.5, theta = 0.5, eta = 1.0;
};

inline SubproblemInstance random_subproblem(std::mt19937_64 & rng, Index n, Index m, double a_scale = 0.5)
{
  std::uniform_real_distribution<double> U(0.2, 1.0);
  SubproblemInstance s{sparselq::lift_plant(sparselq::validate_plant(random_plant(rng, n, m, a_scale))), {}, {}, {}, {}};
  s.ops = sparselq::build_inner_operators(s.lp);
  const Index p = s.lp.p;
  s.d = sparselq::vec(s.lp.R) + s.lp.op.A_op.transpose() * random_vec(rng, s.lp.op.rows(), 0.5);
  s.w = random_vec(rng, m * n);
  s.v_tilde = sparselq::vec(random_symmetric(rng, p));
  s.alpha = U(rng);
  s.theta = U(rng);
  s.eta = U(rng) + 0.5;
  return s;
}

/**
 * Primal objective of the subproblem assembled from its definition:
 * <d, D u> + s1 ||A D u + B w||^2 + s2 ||D u - v||^2, s1 = alpha / (2 theta), s2 = eta / (2 alpha).
 */
inline double subproblem_objective(const SubproblemInstance & s, const Vec & u)
{
  const double s1 = s.alpha / (2.0 * s.theta);
  const double s2 = s.eta / (2.0 * s.alpha);
  const Vec Du = s.ops.D * u;
  const Vec r1 = s.lp.op.A_op * Du + s.lp.op.B_op * s.w;
  return s.d.dot(Du) + s1 * r1.squaredNorm() + s2 * (Du - s.v_tilde).squaredNorm();
}

struct PgResult
{
  Vec u;
  double primal = 0.0;
  double dual = 0.0;
  double max_violation = 0.0;
};

/**
 * Projected gradient ascent on the Lagrange dual of
 *   min f(u)  s.t.  u in S+ (isometric svec),  -(G_i u + c) in S+,
 * with the multipliers kept in the (self-dual) cones and step 1 / L.
 */
inline PgResult projected_gradient_oracle(const SubproblemInstance & s, long steps)
{
  const double s1 = s.alpha / (2.0 * s.theta);
  const double s2 = s.eta / (2.0 * s.alpha);
  const Mat & D = s.ops.D;
  const Mat AD = Mat(s.lp.op.A_op) * D;
  const Vec bw = s.lp.op.B_op * s.w;
  const Mat H = 2.0 * s1 * AD.transpose() * AD + 2.0 * s2 * D.transpose() * D;
  const Vec g0 = D.transpose() * s.d + 2.0 * s1 * AD.transpose() * bw - 2.0 * s2 * D.transpose() * s.v_tilde;
  const double cst = s1 * bw.squaredNorm() + s2 * s.v_tilde.squaredNorm();
  const Eigen::LLT<Mat> llt(H);
  const Index p = s.lp.p, n = s.lp.n;
  const Index sp = sparselq::svec_size(p), sn = sparselq::svec_size(n);
  const auto Mv = static_cast<Index>(s.ops.G.size());

  Mat Gall(sp + Mv * sn, sp);
  Gall.topRows(sp) = Mat::Identity(sp, sp);
  for (Index i = 0; i < Mv; ++i) { Gall.middleRows(sp + i * sn, sn) = s.ops.G[static_cast<std::size_t>(i)]; }
  const Mat Kmat = Gall * llt.solve(Gall.transpose());
  const double L = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (Kmat + Kmat.transpose())).eigenvalues().maxCoeff();
  const double t = 1.0 / L;

  Vec X0 = Vec::Zero(sp);
  std::vector<Vec> Xi(static_cast<std::size_t>(Mv), Vec::Zero(sn));
  auto primal_of = [&](const Vec & x0, const std::vector<Vec> & xi) {
    Vec rhs = -g0 + x0;
    for (Index i = 0; i < Mv; ++i) {
      rhs -= s.ops.G[static_cast<std::size_t>(i)].transpose() * xi[static_cast<std::size_t>(i)];
    }
    return Vec(llt.solve(rhs));
  };
  auto project = [](const Vec & x, Index d) {
    Mat S = sparselq::unsvec(x, d, sparselq::SvecConvention::Isometric);
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    const Mat P = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return sparselq::svec(P, sparselq::SvecConvention::Isometric);
  };

  for (long k = 0; k < steps; ++k) {
    const Vec u = primal_of(X0, Xi);
    X0 = project(X0 - t * u, p);
    for (Index i = 0; i < Mv; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      Xi[ii] = project(Xi[ii] + t * (s.ops.G[ii] * u + s.ops.c), n);
    }
  }

  PgResult r;
  r.u = primal_of(X0, Xi);
  r.dual = 0.5 * r.u.dot(H * r.u) + g0.dot(r.u) + cst - X0.dot(r.u);
  for (Index i = 0; i < Mv; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    r.dual += Xi[ii].dot(s.ops.G[ii] * r.u + s.ops.c);
  }
  r.primal = subproblem_objective(s, r.u);
  const Mat W = sparselq::unsvec(r.u, p, sparselq::SvecConvention::Isometric);
  r.max_violation = std::max(0.0, -Eigen::SelfAdjointEigenSolver<Mat>(W).eigenvalues().minCoeff());
  for (Index i = 0; i < Mv; ++i) {
    const Vec z = s.ops.G[static_cast<std::size_t>(i)] * r.u + s.ops.c;
    const Mat Z = sparselq::unsvec(z, n, sparselq::SvecConvention::Isometric);
    r.max_violation = std::max(r.max_violation, Eigen::SelfAdjointEigenSolver<Mat>(Z).eigenvalues().maxCoeff());
  }
  return r;
}

/// Psi_i(W) written out in blocks: -(A W1 + W1 A^T + B2 W2^T + W2 B2^T + B1 B1^T).
inline Mat psi_blocks(const Mat & A, const Mat & B2, const Mat & B1, const Mat & W)
{
  const Index n = A.rows(), m = B2.cols();
  const Mat W1 = W.topLeftCorner(n, n);
  const Mat W2 = W.topRightCorner(n, m);
  return -(A * W1 + W1 * A.transpose() + B2 * W2.transpose() + W2 * B2.transpose() + B1 * B1.transpose());
}

/// H2 cost through the observability Gramian: tr(B1^T Lo B1), Acl^T Lo + Lo Acl + Qc = 0, solved by vectorization.
inline double h2_observability(const sparselq::PlantData & pd, const Mat & K)
{
  const Index n = pd.A.rows();
  const Mat Acl = pd.A - pd.B2 * K;
  const Mat Cz = pd.C - pd.D * K;
  const Mat Qc = Cz.transpose() * Cz;
  const Mat I = Mat::Identity(n, n);
  const Mat L = sparselq::kron(I, Acl.transpose()) + sparselq::kron(Acl.transpose(), I);
  const Vec x = L.fullPivLu().solve(-sparselq::vec(Qc));
  const Mat Lo = sparselq::unvec(x, n, n);
  return (pd.B1.transpose() * Lo * pd.B1).trace();
}

}  // namespace oracle

#endif  // SPARSELQ_TESTS_ORACLES_HPP
