#pragma once

// Test-only cyclic Jacobi eigensolver for symmetric matrices. Kept free of
// the library's eigendecomposition path so it can serve as an independent
// oracle for the whitening routines.

#include <cmath>

#include "saes/linalg.hpp"

namespace saes::testing {

inline void jacobi_eig(Matrix a, Matrix& q, Vector& lambda) {
  const Index n = a.rows();
  q = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index r = p + 1; r < n; ++r) off += a(p, r) * a(p, r);
    if (std::sqrt(2.0 * off) <= 1e-14 * a.norm()) break;

    for (Index p = 0; p < n - 1; ++p) {
      for (Index r = p + 1; r < n; ++r) {
        const double apr = a(p, r);
        if (std::abs(apr) < 1e-300) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
        const double t =
            (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        for (Index k = 0; k < n; ++k) {
          const double qkp = q(k, p), qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
    }
  }
  lambda = a.diagonal();
}

// Independent reconstruction of (h + ridge·I)^{-1/2} from the Jacobi
// spectrum, with the same eigenvalue floor the library documents.
inline Matrix jacobi_inv_sqrt(const Matrix& h, double ridge) {
  Matrix m = 0.5 * (h + h.transpose());
  m.diagonal().array() += ridge;
  Matrix q;
  Vector lambda;
  jacobi_eig(m, q, lambda);
  const double floor = 1e-14 * lambda.maxCoeff();
  Vector inv = lambda.cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return q * inv.asDiagonal() * q.transpose();
}

inline Matrix jacobi_sqrt(const Matrix& h) {
  Matrix q;
  Vector lambda;
  jacobi_eig(0.5 * (h + h.transpose()), q, lambda);
  return q * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal() * q.transpose();
}

}  // namespace saes::testing
