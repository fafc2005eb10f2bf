#include "saes/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace saes {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyStats: return "EmptyStats";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::InvalidActivationCode: return "InvalidActivationCode";
    case ErrorCode::InvalidStorageCode: return "InvalidStorageCode";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ChainMismatch: return "ChainMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

constexpr double kEigFloorRel = 1e-14;

// Shared eigen path for both square roots. Clamps the spectrum at
// kEigFloorRel·λ_max so nearly singular inputs stay invertible.
SymSqrtPair sym_roots(const Matrix& h, double ridge) {
  if (h.rows() != h.cols())
    throw Error(ErrorCode::NonSquare,
                "matrix is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()));
  const double hnorm = h.norm();
  const double asym = (h - h.transpose()).norm();
  if (asym > 1e-10 * std::max(hnorm, 1e-300))
    throw Error(ErrorCode::NotSymmetric,
                "relative asymmetry " + std::to_string(asym / hnorm));

  Matrix m = 0.5 * (h + h.transpose());
  m.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "eigendecomposition failed");

  Vector lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lmax > 0.0))
    throw Error(ErrorCode::NotPositiveDefinite,
                "no positive eigenvalue after ridge " + std::to_string(ridge));
  const double floor = kEigFloorRel * lmax;
  lambda = lambda.cwiseMax(floor);

  const Matrix& q = eig.eigenvectors();
  Matrix inv_sqrt = q * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  Matrix sqrt_m = q * lambda.cwiseSqrt().asDiagonal() * q.transpose();
  inv_sqrt = (0.5 * (inv_sqrt + inv_sqrt.transpose())).eval();
  sqrt_m = (0.5 * (sqrt_m + sqrt_m.transpose())).eval();
  return {std::move(inv_sqrt), std::move(sqrt_m)};
}

void fix_signs(Matrix& u, Matrix& v) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    double amax = -1.0;
    for (Index i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, j));
      if (a > amax) {
        amax = a;
        imax = i;
      }
    }
    if (u(imax, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
}

// Jacobi is the accuracy workhorse at small sizes; divide-and-conquer takes
// over when it would become cubic-with-a-big-constant.
constexpr Index kJacobiLimit = 128;

}  // namespace

SymSqrtPair sym_inv_sqrt_pair(const Matrix& h, double ridge) {
  return sym_roots(h, ridge);
}

Matrix sym_inv_sqrt(const Matrix& h, double ridge) {
  return sym_roots(h, ridge).inv_sqrt;
}

SvdFactors truncated_svd(const Matrix& g, Index r) {
  const Index mn = std::min(g.rows(), g.cols());
  if (r < 1 || r > mn)
    throw Error(ErrorCode::RankOutOfRange,
                "rank " + std::to_string(r) + " for " + std::to_string(g.rows()) +
                    "x" + std::to_string(g.cols()));

  Matrix u, v;
  Vector sigma;
  if (mn <= kJacobiLimit) {
    Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU().leftCols(r);
    v = svd.matrixV().leftCols(r);
    sigma = svd.singularValues().head(r);
  } else {
    Eigen::BDCSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU().leftCols(r);
    v = svd.matrixV().leftCols(r);
    sigma = svd.singularValues().head(r);
  }
  fix_signs(u, v);
  return SvdFactors{std::move(u), std::move(sigma), std::move(v)};
}

Vector singular_values(const Matrix& g) {
  const Index mn = std::min(g.rows(), g.cols());
  if (mn <= kJacobiLimit) return Eigen::JacobiSVD<Matrix>(g).singularValues();
  return Eigen::BDCSVD<Matrix>(g).singularValues();
}

double spectral_norm(const Matrix& g) {
  if (g.size() == 0) return 0.0;
  return singular_values(g)(0);
}

double frob_inner(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw Error(ErrorCode::ShapeMismatch,
                std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " vs " +
                    std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  return x.cwiseProduct(y).sum();
}

}  // namespace saes
