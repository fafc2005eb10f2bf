#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "saes/cealc.hpp"
#include "saes/linalg.hpp"

namespace saes {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

Matrix apply_activation(Activation act, Matrix z);

/// One dense or factored layer of the stack.
struct LayerDef {
  Index d_out = 0;
  Index d_in = 0;
  Activation act = Activation::identity;
  std::variant<Matrix, LayerFactors> weights;

  bool is_dense() const { return std::holds_alternative<Matrix>(weights); }
  const Matrix& dense() const { return std::get<Matrix>(weights); }
  const LayerFactors& factored() const { return std::get<LayerFactors>(weights); }
  Matrix effective_weight() const;
  Matrix apply(const Matrix& x) const;  // act(W·x), factored as a·(b·x)
};

/// Ordered stack of layers with chained dimensions.
struct ModelSpec {
  std::vector<LayerDef> layers;

  bool all_dense() const;
  Index input_dim() const { return layers.empty() ? 0 : layers.front().d_in; }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().d_out; }
  std::size_t parameter_count() const;

  /// Throws ChainMismatch / DimensionMismatch when layer shapes disagree.
  void validate() const;
};

struct CalibrationSet {
  Matrix data;  // d_in × N, tokens as columns

  Index d_in() const { return data.rows(); }
  Index n_tokens() const { return data.cols(); }
};

/// Per-layer inputs followed by the final output: [X₁ = x, X₂, …, X_L, out]
/// with X_{ℓ+1} = act_ℓ(W̃_ℓ · X_ℓ). Length layers + 1.
std::vector<Matrix> forward(const ModelSpec& model, const Matrix& x);

// Binary formats. Both are little-endian and deterministic: equal values
// serialize to equal bytes.
//
// model ("SAES"): u32 version=1, u32 layer_count, then per layer
//   u32 d_out, u32 d_in, u8 activation, u8 storage (0 dense / 1 factored);
//   dense payload:    d_out·d_in f64, row-major
//   factored payload: u32 rank, f64 beta_used, f64 alpha_used,
//                     A (d_out·rank f64) then B (rank·d_in f64), row-major
//
// calibration ("SAEC"): u32 version=1, u32 d_in, u64 n_tokens, then
//   d_in·N f64 in column-major order (token-contiguous).
std::vector<std::uint8_t> write_model(const ModelSpec& model);
ModelSpec read_model(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_calib(const CalibrationSet& calib);
CalibrationSet read_calib(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Write-temp-then-rename; the destination never holds a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);

ModelSpec read_model_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path, const ModelSpec& model);
CalibrationSet read_calib_file(const std::filesystem::path& path);
void write_calib_file(const std::filesystem::path& path, const CalibrationSet& calib);

}  // namespace saes
