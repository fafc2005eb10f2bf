#pragma once

#include "saes/gen.hpp"
#include "saes/linalg.hpp"
#include "saes/stats.hpp"

namespace saes::testing {

inline Matrix random_spd(GaussianRng& rng, Index n, double jitter = 0.1) {
  const Matrix b = rng.matrix(n, n);
  return b * b.transpose() + jitter * Matrix::Identity(n, n);
}

// Stats holding exact explicit-activation second moments (no 2/N scaling).
inline LayerStats raw_stats(const Matrix& x, const Matrix& xf) {
  LayerStats stats;
  stats.h = x * x.transpose();
  stats.h = (0.5 * (stats.h + stats.h.transpose())).eval();
  stats.delta = (xf - x) * x.transpose();
  stats.n_tokens = static_cast<std::uint64_t>(x.cols());
  return stats;
}

inline LayerStats streamed_stats(const Matrix& x, const Matrix& xf) {
  LayerStats stats = LayerStats::zero(x.rows());
  return stats_update(std::move(stats), ActivationBatch{x, xf});
}

}  // namespace saes::testing
