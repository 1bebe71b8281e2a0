#ifndef SPARSELQ_MODEL_HPP
#define SPARSELQ_MODEL_HPP

/**
 * @file
 * @brief Plant data, assumption checks and the lifted block problem.
 *
 * The plant is
 *
 *   dx/dt = A x + B2 u + B1 w,   z = C x + D u,   u = -K x,
 *
 * with (A, B2) ranging over the convex hull of a list of vertices. Lifting
 * works in the joint dimension p = n + m with
 *
 *   F_i = [A_i B2_i; 0 0],  Q = blkdiag(B1 B1^T, 0),  R = blkdiag(C^T C, D^T D).
 */

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "errors.hpp"
#include "vectorize.hpp"

namespace sparselq {

/// One extreme point (A_i, B2_i) of the uncertainty polytope.
struct Vertex
{
  Mat A;
  Mat B2;
};

struct PlantData
{
  Mat A;
  Mat B2;
  Mat B1;
  Mat C;
  Mat D;
  /// Empty means the single vertex (A, B2).
  std::vector<Vertex> vertices;

  Index n() const { return A.rows(); }
  Index m() const { return B2.cols(); }
};

/// A plant that passed validate_plant(), with the symmetric products cached.
struct ValidatedPlant
{
  PlantData plant;
  std::vector<Vertex> vertices;  ///< never empty
  Mat CtC;
  Mat DtD;
  Mat B1B1t;

  Index n() const { return plant.n(); }
  Index m() const { return plant.m(); }
};

namespace detail {

inline double max_abs(const Mat & m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline void require_shape(const Mat & m, Index rows, Index cols, const std::string & name)
{
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionMismatch(name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols())
                            + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

inline Mat symmetrize(const Mat & m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/**
 * @brief Check dimensions and the standing assumptions C^T D = 0, D^T D > 0, B1 B1^T > 0.
 *
 * Tolerances are relative to scale = max(1, largest absolute entry).
 * Stabilizability is not checked; it shows up later as a certificate failure.
 */
inline ValidatedPlant validate_plant(const PlantData & plant)
{
  const Index n = plant.A.rows();
  const Index m = plant.B2.cols();
  if (n < 1 || m < 1) { throw DimensionMismatch("plant needs n >= 1 and m >= 1"); }
  detail::require_shape(plant.A, n, n, "A");
  detail::require_shape(plant.B2, n, m, "B2");
  if (plant.B1.rows() != n || plant.B1.cols() < 1) { throw DimensionMismatch("B1 must have n rows"); }
  if (plant.C.cols() != n || plant.C.rows() < 1) { throw DimensionMismatch("C must have n columns"); }
  detail::require_shape(plant.D, plant.C.rows(), m, "D");

  ValidatedPlant out;
  out.plant = plant;
  out.vertices = plant.vertices.empty() ? std::vector<Vertex>{{plant.A, plant.B2}} : plant.vertices;
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    detail::require_shape(out.vertices[i].A, n, n, "vertex " + std::to_string(i) + " A");
    detail::require_shape(out.vertices[i].B2, n, m, "vertex " + std::to_string(i) + " B2");
  }

  double scale = 1.0;
  for (const Mat * mat : {&plant.A, &plant.B2, &plant.B1, &plant.C, &plant.D}) {
    scale = std::max(scale, detail::max_abs(*mat));
  }
  for (const auto & v : out.vertices) {
    scale = std::max({scale, detail::max_abs(v.A), detail::max_abs(v.B2)});
  }
  const double tol = 1e-12 * scale;

  if (detail::max_abs(plant.C.transpose() * plant.D) > tol) {
    throw AssumptionViolated("C^T D = 0");
  }
  out.CtC = detail::symmetrize(plant.C.transpose() * plant.C);
  out.DtD = detail::symmetrize(plant.D.transpose() * plant.D);
  out.B1B1t = detail::symmetrize(plant.B1 * plant.B1.transpose());

  auto positive_definite = [tol](const Mat & s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > tol;
  };
  if (!positive_definite(out.DtD)) { throw AssumptionViolated("D^T D positive definite"); }
  if (!positive_definite(out.B1B1t)) { throw AssumptionViolated("B1 B1^T positive definite"); }
  return out;
}

/// Linear maps u -> svec(V2 (F_i W + W F_i^T) V2^T), u = svec(W), plus the offset svec(V2 Q V2^T).
struct CouplingMaps
{
  SvecConvention convention = SvecConvention::Isometric;
  std::vector<Mat> G;  ///< one svec_n x svec_p matrix per vertex
  Vec c;               ///< svec of B1 B1^T
};

struct LiftedProblem
{
  Index n = 0, m = 0, p = 0;
  ValidatedPlant plant;
  std::vector<Mat> F_list;
  Mat Q;
  Mat R;
  Mat V1;  ///< [0, I_m]
  Mat V2;  ///< [I_n, 0]
  std::vector<DiagPair> diag_pairs;
  SvecMaps svec_p;
  SvecMaps svec_n;
  ConstraintOperator op;
  double norm_B = 1.0;
  std::vector<ForcedZero> forced_zeros;
  CouplingMaps coupling_iso;
  CouplingMaps coupling_plain;

  Index vertex_count() const { return static_cast<Index>(F_list.size()); }
  const CouplingMaps & coupling(SvecConvention c) const
  {
    return c == SvecConvention::Plain ? coupling_plain : coupling_iso;
  }
};

/// Kronecker product of dense matrices.
inline Mat kron(const Mat & a, const Mat & b)
{
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline CouplingMaps build_coupling_maps(const LiftedProblem & lp, SvecConvention conv)
{
  CouplingMaps cm;
  cm.convention = conv;
  const Mat Tn = Mat(lp.svec_n.T(conv));
  const Mat Dp = Mat(lp.svec_p.D(conv));
  for (const auto & F : lp.F_list) {
    const Mat V2F = lp.V2 * F;
    cm.G.push_back(Tn * (kron(lp.V2, V2F) + kron(V2F, lp.V2)) * Dp);
  }
  cm.c = svec(lp.V2 * lp.Q * lp.V2.transpose(), conv);
  return cm;
}

inline LiftedProblem lift_plant(const ValidatedPlant & plant, const std::vector<ForcedZero> & forced_zeros = {})
{
  LiftedProblem lp;
  lp.n = plant.n();
  lp.m = plant.m();
  lp.p = lp.n + lp.m;
  lp.plant = plant;
  const Index n = lp.n, m = lp.m, p = lp.p;

  for (const auto & v : plant.vertices) {
    Mat F = Mat::Zero(p, p);
    F.topLeftCorner(n, n) = v.A;
    F.topRightCorner(n, m) = v.B2;
    lp.F_list.push_back(std::move(F));
  }
  lp.Q = Mat::Zero(p, p);
  lp.Q.topLeftCorner(n, n) = plant.B1B1t;
  lp.R = Mat::Zero(p, p);
  lp.R.topLeftCorner(n, n) = plant.CtC;
  lp.R.bottomRightCorner(m, m) = plant.DtD;
  lp.V1 = Mat::Zero(m, p);
  lp.V1.rightCols(m).setIdentity();
  lp.V2 = Mat::Zero(n, p);
  lp.V2.leftCols(n).setIdentity();

  lp.diag_pairs = build_diag_constraints(n, p);
  lp.svec_p = build_svec_maps(p);
  lp.svec_n = build_svec_maps(n);
  lp.op = assemble_constraint_operator(n, m, lp.diag_pairs, forced_zeros);
  lp.norm_B = lp.op.norm_B;
  lp.forced_zeros = forced_zeros;
  lp.coupling_iso = build_coupling_maps(lp, SvecConvention::Isometric);
  lp.coupling_plain = build_coupling_maps(lp, SvecConvention::Plain);
  return lp;
}

/// Psi_i = -V2 (F_i W + W F_i^T + Q) V2^T.
inline Mat psi(const LiftedProblem & lp, Index vertex, const Mat & W)
{
  const Mat & F = lp.F_list.at(static_cast<std::size_t>(vertex));
  return -lp.V2 * (F * W + W * F.transpose() + lp.Q) * lp.V2.transpose();
}

}  // namespace sparselq

#endif  // SPARSELQ_MODEL_HPP
