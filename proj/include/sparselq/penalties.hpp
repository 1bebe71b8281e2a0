#ifndef SPARSELQ_PENALTIES_HPP
#define SPARSELQ_PENALTIES_HPP

/**
 * @file
 * @brief Sparsity penalties on the gain block P and their proximal maps.
 *
 * Proximal maps solve, entrywise,
 *
 *   min_x  gamma * w_ij * g(x) + (rho / 2) * (x - Z_ij)^2.
 *
 * Entries inside a dead band are written as literal zeros.
 */

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "errors.hpp"
#include "vectorize.hpp"

namespace sparselq {

enum class PenaltyKind { WeightedL1, PiecewiseQuadratic, ExpSurrogate };

/// Parameters (a1, a2, b1, b2) of the piecewise quadratic penalty.
struct PqParams
{
  double a1 = 1.0;
  double a2 = 1.0;
  double b1 = -1.0;
  double b2 = 1.0;
};

inline void validate_pq(const PqParams & pq)
{
  if (!(pq.a1 > 0.0 && pq.a2 > 0.0 && pq.b1 < 0.0 && pq.b2 > 0.0)) {
    throw InvalidPqParams("piecewise quadratic penalty needs a1 > 0, a2 > 0, b1 < 0 < b2");
  }
}

/**
 * Piecewise quadratic penalty of a scalar:
 * a2 x^2 / 2 + b2 x for x >= 0 and a1 x^2 / 2 - b1 x for x < 0.
 * Both linear slopes point away from zero, so the penalty has a kink at 0.
 */
inline double pq_scalar(double x, const PqParams & pq)
{
  return x >= 0.0 ? 0.5 * pq.a2 * x * x + pq.b2 * x : 0.5 * pq.a1 * x * x + pq.b1 * x;
}

struct PenaltyConfig
{
  PenaltyKind kind = PenaltyKind::WeightedL1;
  double gamma = 0.0;
  Mat weights;  ///< m x n; empty means all ones
  PqParams pq;
  double sigma = 1.0;

  /// Weight matrix of the requested shape, all ones when none was given.
  Mat weights_or_ones(Index m, Index n) const
  {
    if (weights.size() == 0) { return Mat::Ones(m, n); }
    if (weights.rows() != m || weights.cols() != n) { throw DimensionMismatch("penalty weights shape"); }
    return weights;
  }

  void validate() const
  {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) { throw InvalidOption("gamma must be finite and >= 0"); }
    if (weights.size() > 0 && !(weights.array() > 0.0).all()) {
      throw InvalidOption("penalty weights must be strictly positive");
    }
    if (kind == PenaltyKind::PiecewiseQuadratic) { validate_pq(pq); }
    if (kind == PenaltyKind::ExpSurrogate && !(sigma > 0.0)) { throw NonPositiveSigma("sigma must be > 0"); }
  }

  /// Strong convexity modulus of the unscaled piecewise quadratic penalty, min w * min(a1, a2).
  double mu_gq(Index m, Index n) const
  {
    return weights_or_ones(m, n).minCoeff() * std::min(pq.a1, pq.a2);
  }
};

inline Mat prox_weighted_l1(const Mat & Z, double gamma, const Mat & weights, double rho)
{
  if (!(rho > 0.0)) { throw NonPositiveRho("proximal parameter rho must be > 0"); }
  if (weights.rows() != Z.rows() || weights.cols() != Z.cols()) { throw DimensionMismatch("prox weights shape"); }
  Mat out(Z.rows(), Z.cols());
  for (Index k = 0; k < Z.size(); ++k) {
    const double t = gamma * weights(k) / rho;
    const double z = Z(k);
    out(k) = std::abs(z) <= t ? 0.0 : (1.0 - t / std::abs(z)) * z;
  }
  return out;
}

inline Mat prox_piecewise_quadratic(const Mat & Z, double gamma, const Mat & weights, const PqParams & pq, double rho)
{
  validate_pq(pq);
  if (!(rho > 0.0)) { throw NonPositiveRho("proximal parameter rho must be > 0"); }
  if (weights.rows() != Z.rows() || weights.cols() != Z.cols()) { throw DimensionMismatch("prox weights shape"); }
  Mat out(Z.rows(), Z.cols());
  for (Index k = 0; k < Z.size(); ++k) {
    const double gw = gamma * weights(k);
    const double z = Z(k);
    if (z >= 0.0) {
      out(k) = z <= gw * pq.b2 / rho ? 0.0 : (rho * z - gw * pq.b2) / (gw * pq.a2 + rho);
    } else {
      out(k) = z >= gw * pq.b1 / rho ? 0.0 : (rho * z - gw * pq.b1) / (gw * pq.a1 + rho);
    }
  }
  return out;
}

/// Surrogate f_sigma(t) = 1 - exp(-t / sigma) for t >= 0.
inline double exp_surrogate(double t, double sigma) { return -std::expm1(-t / sigma); }

/// y = f_sigma'(x) = exp(-x / sigma) / sigma, floored at the smallest normal double.
inline Vec exp_weight_update(const Vec & x, double sigma)
{
  if (!(sigma > 0.0)) { throw NonPositiveSigma("sigma must be > 0"); }
  Vec y(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) < 0.0) { throw InvalidOption("weight update needs nonnegative arguments"); }
    y(i) = std::max(std::exp(-x(i) / sigma) / sigma, std::numeric_limits<double>::min());
  }
  return y;
}

/// Number of nonzero entries.
inline Index l0_count(const Mat & P)
{
  return static_cast<Index>((P.array() != 0.0).count());
}

inline double penalty_value(const Mat & P, const PenaltyConfig & cfg)
{
  const Mat w = cfg.weights_or_ones(P.rows(), P.cols());
  double acc = 0.0;
  switch (cfg.kind) {
    case PenaltyKind::WeightedL1:
      acc = (w.array() * P.array().abs()).sum();
      break;
    case PenaltyKind::PiecewiseQuadratic:
      for (Index k = 0; k < P.size(); ++k) { acc += w(k) * pq_scalar(P(k), cfg.pq); }
      break;
    case PenaltyKind::ExpSurrogate:
      for (Index k = 0; k < P.size(); ++k) { acc += exp_surrogate(std::abs(P(k)), cfg.sigma); }
      break;
  }
  return cfg.gamma * acc;
}

/// gamma * ||P||_0, for reporting.
inline double l0_penalty_value(const Mat & P, double gamma) { return gamma * static_cast<double>(l0_count(P)); }

}  // namespace sparselq

#endif  // SPARSELQ_PENALTIES_HPP
