#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "saes/model.hpp"

namespace saes {

/// Deterministic standard-normal stream: mt19937_64 plus Box–Muller, so the
/// produced bytes do not depend on the standard library's distribution
/// implementation.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double gaussian();
  std::uint64_t raw() { return engine_(); }
  Matrix matrix(Index rows, Index cols, double scale = 1.0);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Dense stack with entries i.i.d. N(0, 1/d_in) per layer. dims are the
/// boundary widths, so dims.size() = layers + 1.
ModelSpec random_dense_model(const std::vector<Index>& dims, Activation act,
                             std::uint64_t seed);

/// i.i.d. standard-normal tokens.
CalibrationSet random_calibration(Index d_in, Index n_tokens, std::uint64_t seed);

}  // namespace saes
