#ifndef SPARSELQ_CONES_HPP
#define SPARSELQ_CONES_HPP

/**
 * @file
 * @brief PSD cone projection and small dense linear-algebra kernels.
 */

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>

#include "errors.hpp"
#include "vectorize.hpp"

namespace sparselq {

/// Eigendecomposition S = V diag(lambda) V^T of a symmetric matrix.
struct SymmetricFactor
{
  Index order = 0;
  Vec eigenvalues;   ///< ascending
  Mat eigenvectors;  ///< orthogonal, columns match eigenvalues

  static SymmetricFactor of(const Mat & s)
  {
    if (s.rows() != s.cols()) { throw DimensionMismatch("symmetric factor needs a square matrix"); }
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success) { throw EigFailure("symmetric eigendecomposition failed"); }
    return {s.rows(), es.eigenvalues(), es.eigenvectors()};
  }

  Mat reconstruct() const { return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose(); }
};

/// Euclidean (Frobenius) projection onto the PSD cone: clamp negative eigenvalues.
inline Mat project_psd(const Mat & s)
{
  const SymmetricFactor f = SymmetricFactor::of(s);
  const Vec clamped = f.eigenvalues.cwiseMax(0.0);
  Mat out = f.eigenvectors * clamped.asDiagonal() * f.eigenvectors.transpose();
  return 0.5 * (out + out.transpose());
}

/// Projection of a vector given in svec coordinates of an order-d symmetric matrix.
inline Vec project_psd_svec(const Vec & x, Index d, SvecConvention c = SvecConvention::Isometric)
{
  return svec(project_psd(unsvec(x, d, c)), c);
}

inline double max_eigenvalue(const Mat & s)
{
  if (s.rows() != s.cols() || s.rows() == 0) { throw DimensionMismatch("max_eigenvalue needs a square matrix"); }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) { throw EigFailure("symmetric eigenvalue computation failed"); }
  return es.eigenvalues().maxCoeff();
}

inline double min_eigenvalue(const Mat & s)
{
  if (s.rows() != s.cols() || s.rows() == 0) { throw DimensionMismatch("min_eigenvalue needs a square matrix"); }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) { throw EigFailure("symmetric eigenvalue computation failed"); }
  return es.eigenvalues().minCoeff();
}

/// Cholesky factor of an SPD matrix, computed once and reused for many right-hand sides.
class SpdSolver
{
public:
  SpdSolver() = default;

  explicit SpdSolver(const Mat & m) { compute(m); }

  void compute(const Mat & m)
  {
    if (m.rows() != m.cols()) { throw DimensionMismatch("SPD solve needs a square matrix"); }
    llt_.compute(0.5 * (m + m.transpose()));
    if (llt_.info() != Eigen::Success) { throw NotPositiveDefinite("matrix is not positive definite"); }
    const Vec d = llt_.matrixLLT().diagonal();
    // Cholesky succeeds on some numerically semidefinite inputs; reject a vanishing pivot
    if (d.minCoeff() <= 1e-14 * std::max(1.0, d.maxCoeff())) {
      throw NotPositiveDefinite("matrix is numerically singular");
    }
    ready_ = true;
  }

  template <typename Rhs>
  Mat solve(const Eigen::MatrixBase<Rhs> & q) const
  {
    if (!ready_) { throw NotPositiveDefinite("solver used before factorization"); }
    return llt_.solve(q);
  }

  Mat inverse() const { return solve(Mat::Identity(llt_.rows(), llt_.cols())); }

private:
  Eigen::LLT<Mat> llt_;
  bool ready_ = false;
};

inline Vec solve_spd(const Mat & m, const Vec & q) { return SpdSolver(m).solve(q); }

}  // namespace sparselq

#endif  // SPARSELQ_CONES_HPP
