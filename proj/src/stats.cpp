#include "saes/stats.hpp"

namespace saes {

LayerStats stats_update(LayerStats stats, const ActivationBatch& batch) {
  const Index d = stats.dim();
  if (batch.x.rows() != d || batch.xf.rows() != batch.x.rows() ||
      batch.xf.cols() != batch.x.cols())
    throw Error(ErrorCode::DimensionMismatch,
                "batch " + std::to_string(batch.x.rows()) + "x" +
                    std::to_string(batch.x.cols()) + " against stats dim " +
                    std::to_string(d));
  const Index m = batch.x.cols();
  if (m < 1) throw Error(ErrorCode::DimensionMismatch, "empty batch");

  const double t = static_cast<double>(stats.n_tokens);
  const double gamma = t / (t + static_cast<double>(m));
  stats.h *= gamma;
  stats.delta *= gamma;
  stats.n_tokens += static_cast<std::uint64_t>(m);

  const double s2 = 2.0 / static_cast<double>(stats.n_tokens);
  stats.h.noalias() += s2 * (batch.x * batch.x.transpose());
  stats.delta.noalias() += s2 * ((batch.xf - batch.x) * batch.x.transpose());
  stats.h = (0.5 * (stats.h + stats.h.transpose())).eval();
  return stats;
}

std::pair<Matrix, Matrix> batch_stats_oracle(const Matrix& x_all, const Matrix& xf_all) {
  if (x_all.rows() != xf_all.rows() || x_all.cols() != xf_all.cols())
    throw Error(ErrorCode::DimensionMismatch, "x and xf shapes differ");
  if (x_all.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "no tokens");
  const double scale = 2.0 / static_cast<double>(x_all.cols());
  Matrix h = scale * (x_all * x_all.transpose());
  Matrix delta = scale * ((xf_all - x_all) * x_all.transpose());
  return {std::move(h), std::move(delta)};
}

}  // namespace saes
