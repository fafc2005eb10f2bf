#pragma once

#include "saes/linalg.hpp"
#include "saes/stats.hpp"

namespace saes {

/// Whitener L = (H + λI)^{-1/2} with its inverse (H + λI)^{1/2}.
struct WhitenedContext {
  Matrix l;
  Matrix h_sqrt;
  double ridge_used = 0.0;
};

/// Rank-r factor pair replacing a dense weight; the deployed layer computes
/// a·(b·x). beta_used records the alignment coefficient the factors were
/// built with, alpha_used its β/(1−β) image.
struct LayerFactors {
  Matrix a;  // d_out × r
  Matrix b;  // r × d_in
  Index rank = 0;
  double beta_used = 0.0;
  double alpha_used = 0.0;

  Matrix effective_weight() const { return a * b; }
};

/// Absolute ridge λ = ridge_rel · mean(diag(h)).
double relative_ridge(const LayerStats& stats, double ridge_rel);

WhitenedContext whiten(const Matrix& h, double ridge_abs);

/// Whitened compression target G = w·(H + β·Δ)·L.
Matrix build_target(const Matrix& w, const LayerStats& stats, double beta,
                    const WhitenedContext& ctx);

/// Closed-form rank-r compression of w against the layer's statistics:
/// whiten, build G, truncate its SVD, and unwhiten the right factor. The
/// product a·b minimizes ‖(Q − w)X‖²_F + α‖QX − wX^f‖²_F over rank-r Q for
/// the activations the statistics were accumulated from (ridge 0).
///
/// Throws RankOutOfRange, EmptyStats, plus whitening failures.
LayerFactors cealc_compress(const Matrix& w, const LayerStats& stats, Index r,
                            double beta, double ridge_rel);

/// Largest rank whose parameter count r·(d_out + d_in) fits the budget
/// (1 − ratio)·d_out·d_in, clamped to [1, min(d_out, d_in)].
Index rank_from_ratio(Index d_out, Index d_in, double ratio);

}  // namespace saes
