#include "saes/gen.hpp"

#include <cmath>

namespace saes {

double GaussianRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double GaussianRng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

Matrix GaussianRng::matrix(Index rows, Index cols, double scale) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * gaussian();
  return m;
}

ModelSpec random_dense_model(const std::vector<Index>& dims, Activation act,
                             std::uint64_t seed) {
  if (dims.size() < 2)
    throw Error(ErrorCode::ConfigInvalid, "need at least one layer");
  for (Index d : dims)
    if (d < 1) throw Error(ErrorCode::ConfigInvalid, "dimensions must be positive");

  GaussianRng rng(seed);
  ModelSpec model;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerDef layer;
    layer.d_in = dims[i];
    layer.d_out = dims[i + 1];
    layer.act = act;
    layer.weights = rng.matrix(layer.d_out, layer.d_in,
                               1.0 / std::sqrt(static_cast<double>(layer.d_in)));
    model.layers.push_back(std::move(layer));
  }
  return model;
}

CalibrationSet random_calibration(Index d_in, Index n_tokens, std::uint64_t seed) {
  if (d_in < 1 || n_tokens < 1)
    throw Error(ErrorCode::ConfigInvalid, "calibration set must be nonempty");
  GaussianRng rng(seed);
  return CalibrationSet{rng.matrix(d_in, n_tokens)};
}

}  // namespace saes
