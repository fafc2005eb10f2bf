#include "saes/aces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace saes {

double alpha_to_beta(double alpha) { return alpha / (1.0 + alpha); }

double beta_to_alpha(double beta) { return beta / (1.0 - beta); }

FoaContext foa_context(const Matrix& w, const LayerStats& stats, Index r,
                       double ridge_rel) {
  if (stats.n_tokens == 0)
    throw Error(ErrorCode::EmptyStats, "no calibration tokens accumulated");
  const Index mn = std::min(w.rows(), w.cols());
  if (r < 1 || r > mn)
    throw Error(ErrorCode::RankOutOfRange,
                "rank " + std::to_string(r) + " for " + std::to_string(w.rows()) +
                    "x" + std::to_string(w.cols()));

  WhitenedContext ctx = whiten(stats.h, relative_ridge(stats, ridge_rel));
  FoaContext foa;
  foa.rank = r;
  foa.s = w * stats.h * ctx.l;
  foa.d = w * stats.delta * ctx.l;

  // One SVD per layer, run one rank deeper so the spectral gap is observable.
  const Index k = std::min<Index>(r + 1, mn);
  SvdFactors svd = truncated_svd(foa.s, k);
  foa.sigma = svd.sigma;
  foa.u_r = svd.u.leftCols(r);
  foa.v_r = svd.v.leftCols(r);

  const Matrix pl =
      Matrix::Identity(foa.s.rows(), foa.s.rows()) - foa.u_r * foa.u_r.transpose();
  const Matrix pr =
      Matrix::Identity(foa.s.cols(), foa.s.cols()) - foa.v_r * foa.v_r.transpose();
  foa.s_perp = pl * foa.s * pr;
  foa.d_perp = pl * foa.d * pr;
  return foa;
}

FoaCoefficients foa_coefficients(const FoaContext& ctx) {
  FoaCoefficients c;
  c.a = ctx.s_perp.squaredNorm();
  c.b = frob_inner(ctx.s_perp, ctx.d_perp);
#ifdef SAES_FAULT_FOA_B_SIGN
  c.b = -c.b;  // fault injection used to prove the selftest battery can fail
#endif
  c.c = ctx.d_perp.squaredNorm();
  c.big_a = ctx.s.squaredNorm();
  c.big_b = frob_inner(ctx.s, ctx.d);
  c.big_c = ctx.d.squaredNorm();
  return c;
}

std::vector<double> stationary_roots(const FoaCoefficients& coef) {
  const double q2 = coef.c * coef.big_b - coef.b * coef.big_c;
  const double q1 = coef.c * coef.big_a - coef.a * coef.big_c;
  const double q0 = coef.b * coef.big_a - coef.a * coef.big_b;

  // A coefficient counts as zero when it is pure cancellation noise relative
  // to the products that formed it.
  const auto negligible = [](double q, double p1, double p2) {
    return std::abs(q) <= 1e-14 * (std::abs(p1) + std::abs(p2));
  };
  const bool z2 = negligible(q2, coef.c * coef.big_b, coef.b * coef.big_c);
  const bool z1 = negligible(q1, coef.c * coef.big_a, coef.a * coef.big_c);

  std::vector<double> roots;
  if (z2) {
    if (!z1) roots.push_back(-q0 / q1);
    return roots;  // constant or unsatisfiable: no stationary points
  }
  const double disc = q1 * q1 - 4.0 * q2 * q0;
  if (disc < 0.0) return roots;
  const double sq = std::sqrt(disc);
  const double qq = -0.5 * (q1 + std::copysign(sq, q1));
  if (qq == 0.0) {
    roots.push_back(0.0);
  } else {
    roots.push_back(qq / q2);
    roots.push_back(q0 / qq);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

double foa_tail_ratio(const FoaCoefficients& coef, double beta) {
  const double num = coef.a + 2.0 * coef.b * beta + coef.c * beta * beta;
  const double den = coef.big_a + 2.0 * coef.big_b * beta + coef.big_c * beta * beta;
  if (den <= 0.0) return 0.0;
  return std::sqrt(std::max(num, 0.0) / den);
}

double foa_score(const FoaCoefficients& coef, double beta, BetaObjective objective) {
  const double num = coef.a + 2.0 * coef.b * beta + coef.c * beta * beta;
  if (objective == BetaObjective::energy) return num;
  const double den = coef.big_a + 2.0 * coef.big_b * beta + coef.big_c * beta * beta;
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

double guardrail_transform(double beta, const AcesOptions& opt) {
  beta = std::clamp(beta, opt.beta_min, opt.beta_max);
  return opt.shrink * std::min(beta, opt.beta_cap);
}

BetaSelection select_beta_from_coefficients(const FoaCoefficients& coef,
                                            const AcesOptions& opt) {
  BetaSelection sel;
  sel.objective = opt.objective;

  if (coef.big_a <= 0.0) {
    // Zero weight or zero calibration signal: nothing to adapt to.
    sel.degenerate = true;
    sel.beta_star = guardrail_transform(opt.beta_min, opt);
    sel.alpha_star = beta_to_alpha(sel.beta_star);
    sel.candidates = {{sel.beta_star, 0.0}};
    return sel;
  }

  std::vector<double> raw;
  if (opt.objective == BetaObjective::ratio) {
    raw = stationary_roots(coef);
    raw.push_back(opt.beta_min);
    raw.push_back(opt.beta_max);
  } else {
    if (coef.c > 0.0)
      raw.push_back(-coef.b / coef.c);
    else
      raw.push_back(coef.b >= 0.0 ? opt.beta_min : opt.beta_max);
  }

  for (double candidate : raw) {
    const double beta = guardrail_transform(candidate, opt);
    sel.candidates.emplace_back(beta, foa_score(coef, beta, opt.objective));
  }

  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& [beta, score] : sel.candidates) best_score = std::min(best_score, score);
  const double tie = 1e-12 * std::max(1.0, std::abs(best_score));
  double best_beta = std::numeric_limits<double>::infinity();
  for (const auto& [beta, score] : sel.candidates)
    if (score <= best_score + tie && beta < best_beta) best_beta = beta;

  sel.beta_star = best_beta;
  sel.alpha_star = beta_to_alpha(best_beta);
  return sel;
}

FoaDiagnostics foa_diagnostics(const FoaContext& ctx, double beta) {
  FoaDiagnostics diag;
  const double sigma_r = ctx.sigma(ctx.rank - 1);
  const double sigma_next = ctx.sigma.size() > ctx.rank ? ctx.sigma(ctx.rank) : 0.0;
  diag.gap = std::max(sigma_r - sigma_next, 0.0);

  const double d_norm = spectral_norm(ctx.d);
  if (d_norm == 0.0)
    diag.tau = 0.0;
  else if (diag.gap > 0.0)
    diag.tau = beta * d_norm / diag.gap;
  else
    diag.tau = std::numeric_limits<double>::infinity();
  return diag;
}

std::pair<BetaSelection, FoaDiagnostics> aces_select_beta(
    const Matrix& w, const LayerStats& stats, Index r, const AcesOptions& opt) {
  FoaContext ctx = foa_context(w, stats, r, opt.ridge_rel);
  BetaSelection sel = select_beta_from_coefficients(foa_coefficients(ctx), opt);
  FoaDiagnostics diag = foa_diagnostics(ctx, sel.beta_star);
  return {std::move(sel), diag};
}

double exact_rer(const Matrix& g, Index r) {
  const Index mn = std::min(g.rows(), g.cols());
  if (r < 1 || r > mn)
    throw Error(ErrorCode::RankOutOfRange,
                "rank " + std::to_string(r) + " for " + std::to_string(g.rows()) +
                    "x" + std::to_string(g.cols()));
  const Vector sigma = singular_values(g);
  const double total = sigma.squaredNorm();
  if (total <= 0.0) return 1.0;
  return sigma.head(r).squaredNorm() / total;
}

}  // namespace saes
