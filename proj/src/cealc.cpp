#include "saes/cealc.hpp"

#include <cmath>

namespace saes {

double relative_ridge(const LayerStats& stats, double ridge_rel) {
  return ridge_rel * stats.h.diagonal().mean();
}

WhitenedContext whiten(const Matrix& h, double ridge_abs) {
  SymSqrtPair pair = sym_inv_sqrt_pair(h, ridge_abs);
  return WhitenedContext{std::move(pair.inv_sqrt), std::move(pair.sqrt), ridge_abs};
}

Matrix build_target(const Matrix& w, const LayerStats& stats, double beta,
                    const WhitenedContext& ctx) {
  const Index d_in = w.cols();
  if (stats.dim() != d_in || ctx.l.rows() != d_in)
    throw Error(ErrorCode::DimensionMismatch,
                "weight is " + std::to_string(w.rows()) + "x" + std::to_string(d_in) +
                    ", stats dim " + std::to_string(stats.dim()));
  return w * (stats.h + beta * stats.delta) * ctx.l;
}

LayerFactors cealc_compress(const Matrix& w, const LayerStats& stats, Index r,
                            double beta, double ridge_rel) {
  if (stats.n_tokens == 0)
    throw Error(ErrorCode::EmptyStats, "no calibration tokens accumulated");
  const Index mn = std::min(w.rows(), w.cols());
  if (r < 1 || r > mn)
    throw Error(ErrorCode::RankOutOfRange,
                "rank " + std::to_string(r) + " for " + std::to_string(w.rows()) +
                    "x" + std::to_string(w.cols()));

  WhitenedContext ctx = whiten(stats.h, relative_ridge(stats, ridge_rel));
  Matrix g = build_target(w, stats, beta, ctx);
  SvdFactors svd = truncated_svd(g, r);

  Vector sqrt_sigma = svd.sigma.cwiseMax(0.0).cwiseSqrt();
  LayerFactors f;
  f.a = svd.u * sqrt_sigma.asDiagonal();
  f.b = sqrt_sigma.asDiagonal() * svd.v.transpose() * ctx.l;
  f.rank = r;
  f.beta_used = beta;
  f.alpha_used = beta / (1.0 - beta);
  return f;
}

Index rank_from_ratio(Index d_out, Index d_in, double ratio) {
  const double budget = (1.0 - ratio) * static_cast<double>(d_out) *
                        static_cast<double>(d_in) /
                        static_cast<double>(d_out + d_in);
  Index r = static_cast<Index>(std::floor(budget));
  r = std::max<Index>(1, r);
  return std::min(r, std::min(d_out, d_in));
}

}  // namespace saes
