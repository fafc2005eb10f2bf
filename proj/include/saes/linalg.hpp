#pragma once

#include <Eigen/Dense>

#include "saes/errors.hpp"

namespace saes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Rank-r factorization g ≈ u · diag(sigma) · vᵀ with orthonormal u, v and
/// sigma sorted nonincreasing. Sign convention: the largest-magnitude entry
/// of each left singular vector is positive, so factors are reproducible.
struct SvdFactors {
  Matrix u;      // m × r
  Vector sigma;  // r, descending, >= 0
  Matrix v;      // n × r

  Matrix reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

/// Symmetric inverse square root and square root of h + ridge·I, produced
/// from one eigendecomposition so their product is the identity to roundoff.
struct SymSqrtPair {
  Matrix inv_sqrt;  // (h + ridge·I)^{-1/2}
  Matrix sqrt;      // (h + ridge·I)^{1/2}
};

/// (h + ridge·I)^{-1/2} via symmetric eigendecomposition. Eigenvalues below
/// 1e-14 · λ_max are clamped to that floor so near-singular inputs degrade
/// instead of blowing up.
///
/// Throws NonSquare, NotSymmetric (asymmetry above 1e-10 relative Frobenius),
/// NotPositiveDefinite (no positive eigenvalue even after the ridge).
Matrix sym_inv_sqrt(const Matrix& h, double ridge);

/// Same contract as sym_inv_sqrt but returns both roots.
SymSqrtPair sym_inv_sqrt_pair(const Matrix& h, double ridge);

/// Top-r singular triplets of g. Throws RankOutOfRange unless
/// 1 <= r <= min(rows, cols).
SvdFactors truncated_svd(const Matrix& g, Index r);

/// All singular values of g, descending.
Vector singular_values(const Matrix& g);

/// Largest singular value of g (0 for an all-zero matrix).
double spectral_norm(const Matrix& g);

/// Frobenius inner product Σᵢⱼ xᵢⱼ·yᵢⱼ. Throws ShapeMismatch.
double frob_inner(const Matrix& x, const Matrix& y);

}  // namespace saes
