#pragma once

#include <cstdint>
#include <utility>

#include "saes/linalg.hpp"

namespace saes {

/// Paired activations for one layer: x is the compressed-path input, xf the
/// full-precision reference, both d_in × N with tokens as columns.
struct ActivationBatch {
  Matrix x;
  Matrix xf;
};

/// Running second-order statistics of one layer's inputs. h tracks the input
/// covariance X·Xᵀ, delta the differential covariance (X^f − X)·Xᵀ, both under
/// a 2/n normalization so magnitudes stay comparable across calibration sizes.
struct LayerStats {
  Matrix h;
  Matrix delta;
  std::uint64_t n_tokens = 0;

  static LayerStats zero(Index d_in) {
    return LayerStats{Matrix::Zero(d_in, d_in), Matrix::Zero(d_in, d_in), 0};
  }

  Index dim() const { return h.rows(); }
};

/// One streaming update: decay existing stats by t/(t+m), advance the token
/// counter, then add the current batch scaled by 2/(t+m). After any sequence
/// of updates the result equals the single-pass batch statistics on the
/// concatenated columns. h is re-symmetrized after every update.
///
/// Throws DimensionMismatch on shape disagreement, and if the batch is empty.
LayerStats stats_update(LayerStats stats, const ActivationBatch& batch);

/// Single-pass reference: ((2/N)·x·xᵀ, (2/N)·(xf − x)·xᵀ). Used to verify the
/// streaming path; shares no code with it.
std::pair<Matrix, Matrix> batch_stats_oracle(const Matrix& x_all, const Matrix& xf_all);

}  // namespace saes
