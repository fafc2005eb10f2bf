#pragma once

#include <utility>
#include <vector>

#include "saes/cealc.hpp"

namespace saes {

enum class BetaObjective { ratio, energy };

double alpha_to_beta(double alpha);  // α/(1+α)
double beta_to_alpha(double beta);   // β/(1−β)

/// Frozen principal subspace of S = W·H·L at rank r, with the projections of
/// S and D = W·Δ·L onto the complement of that subspace. sigma holds the
/// top min(r+1, min dims) singular values of S; the extra one feeds the gap
/// diagnostic only.
struct FoaContext {
  Matrix s;
  Matrix d;
  Matrix u_r;     // m × r
  Matrix v_r;     // n × r
  Matrix s_perp;  // (I − u_r·u_rᵀ)·s·(I − v_r·v_rᵀ)
  Matrix d_perp;
  Vector sigma;
  Index rank = 0;
};

/// Scalars of the two quadratics behind the fixed-subspace tail ratio:
/// tail  a + 2bβ + cβ²  over  total  A + 2Bβ + Cβ².
struct FoaCoefficients {
  double a = 0, b = 0, c = 0;
  double big_a = 0, big_b = 0, big_c = 0;
};

struct FoaDiagnostics {
  double gap = 0.0;  // σ_r(S) − σ_{r+1}(S)
  double tau = 0.0;  // β*·‖D‖₂ / gap
};

struct BetaSelection {
  double beta_star = 0.0;
  double alpha_star = 0.0;
  std::vector<std::pair<double, double>> candidates;  // (β after guardrails, score)
  BetaObjective objective = BetaObjective::ratio;
  bool degenerate = false;  // no signal in S: β fell back to the lower bound
};

/// Guardrails applied to every candidate before scoring, and the objective
/// the scores come from. Bounds are expressed directly on β; see
/// CompressionConfig for the α parameterization.
struct AcesOptions {
  double beta_min = alpha_to_beta(0.25);
  double beta_max = alpha_to_beta(0.75);
  double beta_cap = 0.95;
  double shrink = 1.0;
  BetaObjective objective = BetaObjective::ratio;
  double ridge_rel = 1e-6;
};

FoaContext foa_context(const Matrix& w, const LayerStats& stats, Index r,
                       double ridge_rel);

FoaCoefficients foa_coefficients(const FoaContext& ctx);

/// Real stationary points of the tail/total ratio: roots of
/// (cB − bC)β² + (cA − aC)β + (bA − aB) = 0. Degenerates to the linear
/// equation when the leading coefficient vanishes and to the empty list when
/// the ratio is constant in β.
std::vector<double> stationary_roots(const FoaCoefficients& coef);

/// Fixed-subspace tail ratio ρ̃(β) = √((a+2bβ+cβ²)/(A+2Bβ+Cβ²)).
double foa_tail_ratio(const FoaCoefficients& coef, double beta);

/// Candidate score: the squared ratio for the ratio objective, the raw tail
/// quadratic for the energy objective.
double foa_score(const FoaCoefficients& coef, double beta, BetaObjective objective);

/// clip to [β_min, β_max], then shrink·min(β, β_cap).
double guardrail_transform(double beta, const AcesOptions& opt);

/// Selection core: generate candidates (stationary roots plus interval
/// endpoints for the ratio objective, the clipped tail-energy minimizer for
/// the energy objective), pass each through the guardrails, score, and keep
/// the minimum. Ties within 1e-12 go to the smaller β.
BetaSelection select_beta_from_coefficients(const FoaCoefficients& coef,
                                            const AcesOptions& opt);

/// gap = σ_r(S) − σ_{r+1}(S) and τ = β·‖D‖₂/gap (0 when D vanishes, ∞ when
/// the gap closes with D present).
FoaDiagnostics foa_diagnostics(const FoaContext& ctx, double beta);

/// Pick β for one layer from a single SVD of S; composes foa_context,
/// foa_coefficients, select_beta_from_coefficients and foa_diagnostics.
std::pair<BetaSelection, FoaDiagnostics> aces_select_beta(
    const Matrix& w, const LayerStats& stats, Index r, const AcesOptions& opt);

/// Retained energy ratio: Σ_{i<=r} σᵢ(g)² / Σᵢ σᵢ(g)², by full SVD.
/// Returns 1 for an all-zero matrix. Throws RankOutOfRange.
double exact_rer(const Matrix& g, Index r);

}  // namespace saes
