#pragma once

#include <optional>
#include <string>
#include <vector>

#include "saes/aces.hpp"
#include "saes/model.hpp"

namespace saes {

/// Everything that steers a compression run. Rank policy is either a uniform
/// parameter-budget ratio or an explicit per-layer rank list. Alignment
/// bounds are given on α and mapped to β = α/(1+α) internally; AcesOptions is
/// the β-side view of the same guardrails.
struct CompressionConfig {
  std::optional<double> ratio;        // in [0,1)
  std::vector<Index> ranks;           // per-layer override; empty = use ratio
  double ridge_rel = 1e-6;
  double alpha_min = 0.25;
  double alpha_max = 0.75;
  double beta_cap = 0.95;
  double shrink = 1.0;
  BetaObjective objective = BetaObjective::ratio;
  std::optional<double> fixed_alpha;  // bypass adaptive selection
  Index batch_tokens = 512;

  AcesOptions aces_options() const;
  /// Throws ConfigInvalid when bounds are inconsistent or the rank policy is
  /// missing/ill-sized for a model with layer_count layers.
  void validate(std::size_t layer_count) const;
};

struct LayerReport {
  int index = 0;  // 1-based
  Index d_out = 0, d_in = 0, rank = 0;
  double beta_star = 0, alpha_star = 0;
  double rer = 0;             // retained energy of G(β*) at the kept rank
  double foa_tail_ratio = 0;  // ρ̃(β*)
  double cos_sim = 0;         // layer output vs FP, on the calibration set
  double frob_rel_err = 0;
  double gap = 0, tau = 0;
};

struct CompressionReport {
  std::vector<LayerReport> layers;
  double final_cos_sim = 1.0;       // on the evaluation set
  double final_frob_rel_err = 0.0;
};

/// Per-boundary fidelity of a compressed model against its reference.
/// Entry j (0-based) covers the output of layer j+1; the last entry is the
/// model output. Cosines and errors are whole-set values accumulated across
/// batches, so they do not depend on the batch size.
struct EvalMetrics {
  std::vector<double> cos_sim;
  std::vector<double> frob_rel_err;

  double final_cos_sim() const { return cos_sim.empty() ? 1.0 : cos_sim.back(); }
  double final_frob_rel_err() const {
    return frob_rel_err.empty() ? 0.0 : frob_rel_err.back();
  }
};

/// Sequential whole-model compression. Layers are processed in order; the
/// statistics for layer ℓ are gathered by propagating the calibration set
/// through the FP prefix and through the already-compressed prefix, holding
/// only the two boundary activation blocks per batch. Deterministic: equal
/// inputs give byte-identical factored models.
///
/// eval_set supplies the held-out tokens for the report's model-level
/// metrics; pass the calibration set itself when no split is available.
std::pair<ModelSpec, CompressionReport> compress_model(
    const ModelSpec& model, const CalibrationSet& calib,
    const CompressionConfig& cfg, const CalibrationSet& eval_set);

std::pair<ModelSpec, CompressionReport> compress_model(
    const ModelSpec& model, const CalibrationSet& calib,
    const CompressionConfig& cfg);

EvalMetrics evaluate(const ModelSpec& model_fp, const ModelSpec& model_c,
                     const CalibrationSet& eval_set, Index batch_tokens = 512);

/// Frozen snapshot of one layer mid-pipeline: its dense weight and the
/// statistics it would be compressed against after the upstream layers have
/// been replaced under cfg.
struct LayerProbe {
  Matrix w;
  LayerStats stats;
  Index rank = 0;
};

/// Runs the sequential loop up to (not including) layer_index and gathers
/// that layer's statistics. layer_index is 1-based.
LayerProbe probe_layer(const ModelSpec& model, const CalibrationSet& calib,
                       const CompressionConfig& cfg, int layer_index);

struct SweepPoint {
  double beta = 0;
  double exact_rer = 0;
  double foa_tail_ratio = 0;
};

/// RER-versus-β curve data: a uniform β grid on [0,1] with the true retained
/// energy of G(β) (full SVD per point) and the frozen-subspace surrogate.
std::vector<SweepPoint> beta_sweep(const Matrix& w, const LayerStats& stats,
                                   Index r, int grid_points,
                                   const CompressionConfig& cfg);

/// CSV with header layer,d_out,d_in,rank,beta_star,alpha_star,rer,
/// foa_tail_ratio,cos_sim,frob_rel_err,gap,tau; 17-significant-digit floats,
/// trailing newline.
std::string report_to_csv(const CompressionReport& report);

/// Split by token index: first N − floor(N/10) columns calibrate, the rest
/// evaluate. When N < 10 the evaluation half aliases the full set.
std::pair<CalibrationSet, CalibrationSet> split_calibration(const CalibrationSet& full);

std::string format_double(double v);  // %.17g, C locale

}  // namespace saes
