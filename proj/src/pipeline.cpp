#include "saes/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace saes {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

AcesOptions CompressionConfig::aces_options() const {
  AcesOptions opt;
  opt.beta_min = alpha_to_beta(alpha_min);
  opt.beta_max = alpha_to_beta(alpha_max);
  opt.beta_cap = beta_cap;
  opt.shrink = shrink;
  opt.objective = objective;
  opt.ridge_rel = ridge_rel;
  return opt;
}

void CompressionConfig::validate(std::size_t layer_count) const {
  const auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::ConfigInvalid, msg);
  };
  if (ranks.empty()) {
    if (!ratio) fail("either a compression ratio or explicit ranks is required");
    if (!(*ratio >= 0.0 && *ratio < 1.0)) fail("ratio must lie in [0,1)");
  } else {
    if (ratio) fail("ratio and explicit ranks are mutually exclusive");
    if (ranks.size() != layer_count)
      fail("rank list has " + std::to_string(ranks.size()) + " entries for " +
           std::to_string(layer_count) + " layers");
    for (Index r : ranks)
      if (r < 1) fail("ranks must be positive");
  }
  if (!(ridge_rel >= 0.0)) fail("ridge must be nonnegative");
  if (!(alpha_min >= 0.0) || !(alpha_max >= alpha_min))
    fail("alpha bounds must satisfy 0 <= alpha_min <= alpha_max");
  if (!(beta_cap > 0.0 && beta_cap <= 1.0)) fail("beta cap must lie in (0,1]");
  if (!(shrink > 0.0 && shrink <= 1.0)) fail("shrink must lie in (0,1]");
  if (fixed_alpha && !(*fixed_alpha >= 0.0)) fail("fixed alpha must be nonnegative");
  if (batch_tokens < 1) fail("batch_tokens must be positive");
}

namespace {

// Frontier propagation: one batch through the first `depth` layers.
Matrix propagate(const ModelSpec& model, Matrix x, std::size_t depth) {
  for (std::size_t j = 0; j < depth; ++j) x = model.layers[j].apply(x);
  return x;
}

Index layer_rank(const CompressionConfig& cfg, const LayerDef& layer, std::size_t ell) {
  return cfg.ranks.empty() ? rank_from_ratio(layer.d_out, layer.d_in, *cfg.ratio)
                           : cfg.ranks[ell];
}

double pick_beta(const FoaCoefficients& coef, const CompressionConfig& cfg,
                 const AcesOptions& opt) {
  if (cfg.fixed_alpha)
    return guardrail_transform(alpha_to_beta(*cfg.fixed_alpha), opt);
  return select_beta_from_coefficients(coef, opt).beta_star;
}

// Whole-set cosine and relative error, accumulated batch by batch. The
// reductions are sums, so any batching yields the same result.
struct FidelityAccumulator {
  double inner = 0.0, norm_c = 0.0, norm_f = 0.0, diff = 0.0;

  void add(const Matrix& xc, const Matrix& xf) {
    inner += xc.cwiseProduct(xf).sum();
    norm_c += xc.squaredNorm();
    norm_f += xf.squaredNorm();
    diff += (xc - xf).squaredNorm();
  }

  double cosine() const {
    const double den = std::sqrt(norm_c) * std::sqrt(norm_f);
    if (den == 0.0) return (norm_c == 0.0 && norm_f == 0.0) ? 1.0 : 0.0;
    return inner / den;
  }

  double rel_err() const {
    if (norm_f == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(diff) / std::sqrt(norm_f);
  }
};

// Two-path statistics pass for layer ell: the calibration set through the
// FP prefix and through the partially compressed model. When `boundary` is
// given it also accumulates the fidelity of the activations entering ell.
LayerStats gather_layer_stats(const ModelSpec& model_fp, const ModelSpec& partial,
                              const CalibrationSet& calib, std::size_t ell,
                              Index batch, FidelityAccumulator* boundary = nullptr) {
  LayerStats stats = LayerStats::zero(model_fp.layers[ell].d_in);
  const Index n = calib.n_tokens();
  for (Index s0 = 0; s0 < n; s0 += batch) {
    const Index width = std::min(batch, n - s0);
    Matrix block = calib.data.middleCols(s0, width);
    Matrix xc = propagate(partial, block, ell);
    Matrix xf = propagate(model_fp, std::move(block), ell);
    if (boundary) boundary->add(xc, xf);
    stats = stats_update(std::move(stats), ActivationBatch{std::move(xc), std::move(xf)});
  }
  return stats;
}

}  // namespace

std::pair<CalibrationSet, CalibrationSet> split_calibration(const CalibrationSet& full) {
  const Index n = full.n_tokens();
  const Index n_eval = n / 10;
  if (n_eval == 0) return {full, full};
  CalibrationSet calib{full.data.leftCols(n - n_eval)};
  CalibrationSet eval{full.data.rightCols(n_eval)};
  return {std::move(calib), std::move(eval)};
}

EvalMetrics evaluate(const ModelSpec& model_fp, const ModelSpec& model_c,
                     const CalibrationSet& eval_set, Index batch_tokens) {
  model_fp.validate();
  model_c.validate();
  const std::size_t n_layers = model_fp.layers.size();
  if (model_c.layers.size() != n_layers)
    throw Error(ErrorCode::ChainMismatch, "layer counts differ");
  for (std::size_t i = 0; i < n_layers; ++i)
    if (model_fp.layers[i].d_out != model_c.layers[i].d_out ||
        model_fp.layers[i].d_in != model_c.layers[i].d_in)
      throw Error(ErrorCode::ChainMismatch, "layer " + std::to_string(i) +
                                                " shapes differ between models");
  if (eval_set.d_in() != model_fp.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "evaluation set dimension mismatch");
  if (batch_tokens < 1) throw Error(ErrorCode::ConfigInvalid, "batch_tokens must be positive");

  // One accumulator per boundary: input, then the output of every layer.
  std::vector<FidelityAccumulator> acc(n_layers + 1);
  const Index n = eval_set.n_tokens();
  for (Index s0 = 0; s0 < n; s0 += batch_tokens) {
    const Index w = std::min(batch_tokens, n - s0);
    Matrix xc = eval_set.data.middleCols(s0, w);
    Matrix xf = xc;
    acc[0].add(xc, xf);
    for (std::size_t j = 0; j < n_layers; ++j) {
      xc = model_c.layers[j].apply(xc);
      xf = model_fp.layers[j].apply(xf);
      acc[j + 1].add(xc, xf);
    }
  }

  EvalMetrics metrics;
  metrics.cos_sim.reserve(acc.size());
  metrics.frob_rel_err.reserve(acc.size());
  for (const auto& a : acc) {
    metrics.cos_sim.push_back(a.cosine());
    metrics.frob_rel_err.push_back(a.rel_err());
  }
  return metrics;
}

std::pair<ModelSpec, CompressionReport> compress_model(
    const ModelSpec& model, const CalibrationSet& calib,
    const CompressionConfig& cfg, const CalibrationSet& eval_set) {
  model.validate();
  if (!model.all_dense())
    throw Error(ErrorCode::ConfigInvalid, "model is already factored");
  cfg.validate(model.layers.size());
  if (calib.d_in() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "calibration dimension " + std::to_string(calib.d_in()) +
                    ", model expects " + std::to_string(model.input_dim()));

  const std::size_t n_layers = model.layers.size();
  const Index n = calib.n_tokens();
  const Index batch = std::min<Index>(cfg.batch_tokens, n);
  const AcesOptions opt = cfg.aces_options();

  ModelSpec compressed = model;
  CompressionReport report;
  report.layers.resize(n_layers);

  for (std::size_t ell = 0; ell < n_layers; ++ell) {
    const LayerDef& layer = model.layers[ell];
    const Matrix& w = layer.dense();

    FidelityAccumulator boundary;
    LayerStats stats = gather_layer_stats(model, compressed, calib, ell, batch,
                                          ell > 0 ? &boundary : nullptr);
    if (ell > 0) {
      report.layers[ell - 1].cos_sim = boundary.cosine();
      report.layers[ell - 1].frob_rel_err = boundary.rel_err();
    }

    const Index r = layer_rank(cfg, layer, ell);

    FoaContext ctx = foa_context(w, stats, r, cfg.ridge_rel);
    FoaCoefficients coef = foa_coefficients(ctx);
    const double beta = pick_beta(coef, cfg, opt);
    const FoaDiagnostics diag = foa_diagnostics(ctx, beta);

    LayerFactors factors = cealc_compress(w, stats, r, beta, cfg.ridge_rel);

    LayerReport& row = report.layers[ell];
    row.index = static_cast<int>(ell) + 1;
    row.d_out = layer.d_out;
    row.d_in = layer.d_in;
    row.rank = r;
    row.beta_star = factors.beta_used;
    row.alpha_star = factors.alpha_used;
    row.rer = exact_rer(ctx.s + beta * ctx.d, r);  // G(β) = S + βD
    row.foa_tail_ratio = foa_tail_ratio(coef, beta);
    row.gap = diag.gap;
    row.tau = diag.tau;

    compressed.layers[ell].weights = std::move(factors);
  }

  // Last boundary on the calibration set, then model-level numbers held out.
  if (n_layers > 0) {
    FidelityAccumulator last;
    for (Index s0 = 0; s0 < n; s0 += batch) {
      const Index width = std::min(batch, n - s0);
      Matrix block = calib.data.middleCols(s0, width);
      Matrix out_c = propagate(compressed, block, n_layers);
      Matrix out_f = propagate(model, std::move(block), n_layers);
      last.add(out_c, out_f);
    }
    report.layers.back().cos_sim = last.cosine();
    report.layers.back().frob_rel_err = last.rel_err();
  }

  EvalMetrics held_out = evaluate(model, compressed, eval_set, batch);
  report.final_cos_sim = held_out.final_cos_sim();
  report.final_frob_rel_err = held_out.final_frob_rel_err();
  return {std::move(compressed), std::move(report)};
}

std::pair<ModelSpec, CompressionReport> compress_model(const ModelSpec& model,
                                                       const CalibrationSet& calib,
                                                       const CompressionConfig& cfg) {
  return compress_model(model, calib, cfg, calib);
}

LayerProbe probe_layer(const ModelSpec& model, const CalibrationSet& calib,
                       const CompressionConfig& cfg, int layer_index) {
  model.validate();
  if (!model.all_dense())
    throw Error(ErrorCode::ConfigInvalid, "model is already factored");
  cfg.validate(model.layers.size());
  if (layer_index < 1 || static_cast<std::size_t>(layer_index) > model.layers.size())
    throw Error(ErrorCode::ConfigInvalid,
                "layer " + std::to_string(layer_index) + " out of range");
  if (calib.d_in() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "calibration dimension mismatch");

  const std::size_t target = static_cast<std::size_t>(layer_index) - 1;
  const Index batch = std::min<Index>(cfg.batch_tokens, calib.n_tokens());
  const AcesOptions opt = cfg.aces_options();

  ModelSpec partial = model;
  for (std::size_t ell = 0; ell < target; ++ell) {
    const LayerDef& layer = model.layers[ell];
    LayerStats stats = gather_layer_stats(model, partial, calib, ell, batch);
    const Index r = layer_rank(cfg, layer, ell);
    const FoaContext ctx = foa_context(layer.dense(), stats, r, cfg.ridge_rel);
    const double beta = pick_beta(foa_coefficients(ctx), cfg, opt);
    partial.layers[ell].weights =
        cealc_compress(layer.dense(), stats, r, beta, cfg.ridge_rel);
  }

  LayerProbe probe;
  probe.w = model.layers[target].dense();
  probe.stats = gather_layer_stats(model, partial, calib, target, batch);
  probe.rank = layer_rank(cfg, model.layers[target], target);
  return probe;
}

std::vector<SweepPoint> beta_sweep(const Matrix& w, const LayerStats& stats,
                                   Index r, int grid_points,
                                   const CompressionConfig& cfg) {
  if (grid_points < 2)
    throw Error(ErrorCode::ConfigInvalid, "grid needs at least two points");
  FoaContext ctx = foa_context(w, stats, r, cfg.ridge_rel);
  FoaCoefficients coef = foa_coefficients(ctx);

  std::vector<SweepPoint> points;
  points.reserve(static_cast<std::size_t>(grid_points));
  for (int k = 0; k < grid_points; ++k) {
    SweepPoint p;
    p.beta = static_cast<double>(k) / static_cast<double>(grid_points - 1);
    p.exact_rer = exact_rer(ctx.s + p.beta * ctx.d, r);
    p.foa_tail_ratio = foa_tail_ratio(coef, p.beta);
    points.push_back(p);
  }
  return points;
}

std::string report_to_csv(const CompressionReport& report) {
  std::string csv =
      "layer,d_out,d_in,rank,beta_star,alpha_star,rer,foa_tail_ratio,"
      "cos_sim,frob_rel_err,gap,tau\n";
  for (const auto& row : report.layers) {
    csv += std::to_string(row.index) + ',' + std::to_string(row.d_out) + ',' +
           std::to_string(row.d_in) + ',' + std::to_string(row.rank) + ',' +
           format_double(row.beta_star) + ',' + format_double(row.alpha_star) + ',' +
           format_double(row.rer) + ',' + format_double(row.foa_tail_ratio) + ',' +
           format_double(row.cos_sim) + ',' + format_double(row.frob_rel_err) + ',' +
           format_double(row.gap) + ',' + format_double(row.tau) + '\n';
  }
  return csv;
}

}  // namespace saes
