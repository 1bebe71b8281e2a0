#ifndef SPARSELQ_VECTORIZE_HPP
#define SPARSELQ_VECTORIZE_HPP

/**
 * @file
 * @brief Index bookkeeping: vec/svec maps, diagonal-constraint selectors and
 * the vectorized equality operator A vec(W) + B vec(P) = 0.
 *
 * vec() is column-major throughout, which is Eigen's native storage order.
 * svec() lists the lower triangle column by column: (1,1), (2,1), ..., (d,1),
 * (2,2), ..., (d,d).
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace sparselq {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Which svec coordinates a routine works in.
enum class SvecConvention {
  /// svec = lower triangle as is; matches the elimination/duplication identities.
  Plain,
  /// off-diagonal coordinates scaled by sqrt(2) so that the Euclidean norm equals the Frobenius norm.
  Isometric,
};

inline Index svec_size(Index d) { return d * (d + 1) / 2; }

/// Elimination and duplication maps between vec(S) and svec(S) for S of order `dim`.
struct SvecMaps
{
  Index dim = 0;
  SpMat T_plain;  ///< svec_plain = T_plain * vec
  SpMat D_plain;  ///< vec = D_plain * svec_plain
  SpMat T_iso;    ///< svec_iso = T_iso * vec, rows orthonormal
  SpMat D_iso;    ///< vec = D_iso * svec_iso, equals T_iso^T

  Index size() const { return svec_size(dim); }
  const SpMat & T(SvecConvention c) const { return c == SvecConvention::Plain ? T_plain : T_iso; }
  const SpMat & D(SvecConvention c) const { return c == SvecConvention::Plain ? D_plain : D_iso; }
};

inline SvecMaps build_svec_maps(Index d)
{
  if (d < 1) { throw DimensionMismatch("svec maps need order >= 1"); }
  const Index s = svec_size(d);
  const double r2 = 1.0 / std::sqrt(2.0);

  std::vector<Eigen::Triplet<double>> tp, dp, ti;
  tp.reserve(s);
  dp.reserve(2 * s);
  ti.reserve(2 * s);

  Index row = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i, ++row) {
      const Index ij = i + j * d, ji = j + i * d;
      tp.emplace_back(row, ij, 1.0);
      dp.emplace_back(ij, row, 1.0);
      if (i == j) {
        ti.emplace_back(row, ij, 1.0);
      } else {
        dp.emplace_back(ji, row, 1.0);
        ti.emplace_back(row, ij, r2);
        ti.emplace_back(row, ji, r2);
      }
    }
  }

  SvecMaps maps;
  maps.dim = d;
  maps.T_plain.resize(s, d * d);
  maps.T_plain.setFromTriplets(tp.begin(), tp.end());
  maps.D_plain.resize(d * d, s);
  maps.D_plain.setFromTriplets(dp.begin(), dp.end());
  maps.T_iso.resize(s, d * d);
  maps.T_iso.setFromTriplets(ti.begin(), ti.end());
  maps.D_iso = maps.T_iso.transpose();
  return maps;
}

inline Vec vec(const Mat & m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline Mat unvec(const Vec & v, Index rows, Index cols)
{
  if (v.size() != rows * cols) { throw DimensionMismatch("unvec: length does not match shape"); }
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

/// svec of a symmetric matrix; only the lower triangle is read.
inline Vec svec(const Mat & s, SvecConvention c = SvecConvention::Isometric)
{
  const Index d = s.rows();
  const double scale = c == SvecConvention::Isometric ? std::sqrt(2.0) : 1.0;
  Vec out(svec_size(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    out(k++) = s(j, j);
    for (Index i = j + 1; i < d; ++i) { out(k++) = scale * s(i, j); }
  }
  return out;
}

inline Mat unsvec(const Vec & x, Index d, SvecConvention c = SvecConvention::Isometric)
{
  if (x.size() != svec_size(d)) { throw DimensionMismatch("unsvec: length does not match order"); }
  const double scale = c == SvecConvention::Isometric ? 1.0 / std::sqrt(2.0) : 1.0;
  Mat s(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    s(j, j) = x(k++);
    for (Index i = j + 1; i < d; ++i) {
      s(i, j) = s(j, i) = scale * x(k++);
    }
  }
  return s;
}

/// Row/column selector pair picking one strict-upper entry W(row, col) of the leading n x n block.
struct DiagPair
{
  Index row = 0;
  Index col = 0;
  Eigen::RowVectorXd row_selector;  ///< V_{j1} in R^{1 x p}
  Vec col_selector;                 ///< V_{j2} in R^{p}
};

/// The N = n(n-1)/2 pairs, ordered (1,2), (1,3), ..., (1,n), (2,3), ...
inline std::vector<DiagPair> build_diag_constraints(Index n, Index p)
{
  if (n < 1 || n > p) { throw DimensionMismatch("diag constraints need 1 <= n <= p"); }
  std::vector<DiagPair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      DiagPair dp;
      dp.row = a;
      dp.col = b;
      dp.row_selector = Eigen::RowVectorXd::Unit(p, a);
      dp.col_selector = Vec::Unit(p, b);
      pairs.push_back(std::move(dp));
    }
  }
  return pairs;
}

/// Position (input i, state j), zero-based, whose gain entry is forced to zero.
using ForcedZero = std::pair<Index, Index>;

/**
 * @brief Sparse equality operator over (vec(W), vec(P)).
 *
 * Row blocks, in order: N diagonal-constraint rows, mn gain-extraction rows
 * (vec(V1 W V2^T) - vec(P)), and one row per forced zero.
 */
struct ConstraintOperator
{
  Index n = 0, m = 0, p = 0;
  Index n_diag = 0, n_gain = 0, n_forced = 0;
  SpMat A_op;  ///< rows x p^2
  SpMat B_op;  ///< rows x mn
  double norm_B = 1.0;
  std::vector<ForcedZero> forced_zeros;

  Index rows() const { return n_diag + n_gain + n_forced; }
};

inline ConstraintOperator assemble_constraint_operator(Index n,
                                                       Index m,
                                                       const std::vector<DiagPair> & diag_pairs,
                                                       const std::vector<ForcedZero> & forced_zeros)
{
  const Index p = n + m;
  ConstraintOperator op;
  op.n = n;
  op.m = m;
  op.p = p;
  op.n_diag = static_cast<Index>(diag_pairs.size());
  op.n_gain = m * n;
  op.n_forced = static_cast<Index>(forced_zeros.size());
  op.forced_zeros = forced_zeros;

  std::vector<Eigen::Triplet<double>> at, bt;
  Index row = 0;
  // V_{j2}^T (x) V_{j1} applied to vec(W) is V_{j1} W V_{j2}
  for (const auto & dp : diag_pairs) { at.emplace_back(row++, dp.row + dp.col * p, 1.0); }
  // (V2 (x) V1) vec(W) = vec(V1 W V2^T), entry (i, j) is W(n + i, j)
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) {
      at.emplace_back(row, (n + i) + j * p, 1.0);
      bt.emplace_back(row, i + j * m, -1.0);
      ++row;
    }
  }
  for (const auto & [i, j] : forced_zeros) {
    if (i < 0 || i >= m || j < 0 || j >= n) {
      throw ForcedZeroOutOfRange("forced zero (" + std::to_string(i) + ", " + std::to_string(j)
                                 + ") outside the " + std::to_string(m) + " x "
                                 + std::to_string(n) + " gain");
    }
    at.emplace_back(row++, (n + i) + j * p, 1.0);
  }

  op.A_op.resize(row, p * p);
  op.A_op.setFromTriplets(at.begin(), at.end());
  op.B_op.resize(row, m * n);
  op.B_op.setFromTriplets(bt.begin(), bt.end());
  // B stacks zero rows over -I, so its columns are orthonormal
  op.norm_B = 1.0;
  return op;
}

}  // namespace sparselq

#endif  // SPARSELQ_VECTORIZE_HPP
