#include "saes/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace saes {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
const char kModelMagic[4] = {'S', 'A', 'E', 'S'};
const char kCalibMagic[4] = {'S', 'A', 'E', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_matrix_rowmajor(std::vector<std::uint8_t>& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n)
      throw Error(ErrorCode::TruncatedFile,
                  "need " + std::to_string(n) + " bytes, have " +
                      std::to_string(remaining()));
  }

  // Overflow-safe guard before any payload allocation.
  void need_doubles(std::uint64_t a, std::uint64_t b) const {
    const std::uint64_t limit = remaining() / 8;
    if (a != 0 && b > limit / a)
      throw Error(ErrorCode::TruncatedFile,
                  "payload of " + std::to_string(a) + "x" + std::to_string(b) +
                      " doubles exceeds file size");
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    if (!std::isfinite(v))
      throw Error(ErrorCode::NonFiniteValue, "non-finite value in payload");
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  void magic(const char expected[4]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0)
      throw Error(ErrorCode::BadMagic, "unrecognized file signature");
    pos_ += 4;
  }

  Matrix matrix_rowmajor(Index rows, Index cols) {
    need_doubles(static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(cols));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
  }

  void finish() const {
    if (remaining() != 0)
      throw Error(ErrorCode::TrailingBytes,
                  std::to_string(remaining()) + " bytes past end of payload");
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Matrix apply_activation(Activation act, Matrix z) {
  switch (act) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
  }
  throw Error(ErrorCode::InvalidActivationCode,
              std::to_string(static_cast<int>(act)));
}

Matrix LayerDef::effective_weight() const {
  return is_dense() ? dense() : factored().effective_weight();
}

Matrix LayerDef::apply(const Matrix& x) const {
  if (x.rows() != d_in)
    throw Error(ErrorCode::DimensionMismatch,
                "input has " + std::to_string(x.rows()) + " rows, layer expects " +
                    std::to_string(d_in));
  if (is_dense()) return apply_activation(act, dense() * x);
  const LayerFactors& f = factored();
  return apply_activation(act, f.a * (f.b * x));
}

bool ModelSpec::all_dense() const {
  for (const auto& l : layers)
    if (!l.is_dense()) return false;
  return true;
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    if (l.is_dense())
      n += static_cast<std::size_t>(l.d_out) * static_cast<std::size_t>(l.d_in);
    else
      n += static_cast<std::size_t>(l.factored().rank) *
           static_cast<std::size_t>(l.d_out + l.d_in);
  }
  return n;
}

void ModelSpec::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDef& l = layers[i];
    if (l.d_out < 1 || l.d_in < 1)
      throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(i) +
                                                    " has empty dimension");
    if (l.is_dense()) {
      if (l.dense().rows() != l.d_out || l.dense().cols() != l.d_in)
        throw Error(ErrorCode::DimensionMismatch,
                    "dense weight shape disagrees with layer " + std::to_string(i));
    } else {
      const LayerFactors& f = l.factored();
      if (f.a.rows() != l.d_out || f.a.cols() != f.rank || f.b.rows() != f.rank ||
          f.b.cols() != l.d_in)
        throw Error(ErrorCode::DimensionMismatch,
                    "factor shapes disagree with layer " + std::to_string(i));
    }
    if (i > 0 && layers[i - 1].d_out != l.d_in)
      throw Error(ErrorCode::ChainMismatch,
                  "layer " + std::to_string(i) + " expects " + std::to_string(l.d_in) +
                      " inputs, upstream provides " + std::to_string(layers[i - 1].d_out));
  }
}

std::vector<Matrix> forward(const ModelSpec& model, const Matrix& x) {
  if (!model.layers.empty() && x.rows() != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "input has " + std::to_string(x.rows()) + " rows, model expects " +
                    std::to_string(model.input_dim()));
  std::vector<Matrix> acts;
  acts.reserve(model.layers.size() + 1);
  acts.push_back(x);
  for (const auto& layer : model.layers) acts.push_back(layer.apply(acts.back()));
  return acts;
}

std::vector<std::uint8_t> write_model(const ModelSpec& model) {
  model.validate();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.d_out));
    put_u32(out, static_cast<std::uint32_t>(l.d_in));
    out.push_back(static_cast<std::uint8_t>(l.act));
    out.push_back(l.is_dense() ? 0 : 1);
    if (l.is_dense()) {
      put_matrix_rowmajor(out, l.dense());
    } else {
      const LayerFactors& f = l.factored();
      put_u32(out, static_cast<std::uint32_t>(f.rank));
      put_f64(out, f.beta_used);
      put_f64(out, f.alpha_used);
      put_matrix_rowmajor(out, f.a);
      put_matrix_rowmajor(out, f.b);
    }
  }
  return out;
}

ModelSpec read_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic(kModelMagic);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  const std::uint32_t layer_count = r.u32();

  ModelSpec model;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerDef layer;
    const std::uint32_t d_out = r.u32();
    const std::uint32_t d_in = r.u32();
    if (d_out < 1 || d_in < 1)
      throw Error(ErrorCode::InvalidHeader, "layer " + std::to_string(i) +
                                                " has zero dimension");
    layer.d_out = static_cast<Index>(d_out);
    layer.d_in = static_cast<Index>(d_in);

    const std::uint8_t act_code = r.u8();
    if (act_code > 2)
      throw Error(ErrorCode::InvalidActivationCode, std::to_string(act_code));
    layer.act = static_cast<Activation>(act_code);

    const std::uint8_t storage = r.u8();
    if (storage == 0) {
      layer.weights = r.matrix_rowmajor(layer.d_out, layer.d_in);
    } else if (storage == 1) {
      const std::uint32_t rank = r.u32();
      if (rank < 1 || rank > std::min(d_out, d_in))
        throw Error(ErrorCode::RankOutOfRange,
                    "stored rank " + std::to_string(rank) + " for " +
                        std::to_string(d_out) + "x" + std::to_string(d_in));
      LayerFactors f;
      f.rank = static_cast<Index>(rank);
      f.beta_used = r.f64();
      f.alpha_used = r.f64();
      if (f.beta_used < 0.0 || f.beta_used >= 1.0 || f.alpha_used < 0.0 ||
          std::abs(f.beta_used - f.alpha_used / (1.0 + f.alpha_used)) > 1e-12)
        throw Error(ErrorCode::InvalidHeader, "inconsistent alignment coefficients");
      f.a = r.matrix_rowmajor(layer.d_out, f.rank);
      f.b = r.matrix_rowmajor(f.rank, layer.d_in);
      layer.weights = std::move(f);
    } else {
      throw Error(ErrorCode::InvalidStorageCode, std::to_string(storage));
    }
    model.layers.push_back(std::move(layer));
  }
  r.finish();
  model.validate();
  return model;
}

std::vector<std::uint8_t> write_calib(const CalibrationSet& calib) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCalibMagic, kCalibMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(calib.d_in()));
  put_u64(out, static_cast<std::uint64_t>(calib.n_tokens()));
  // token-contiguous: one column after another
  for (Index j = 0; j < calib.data.cols(); ++j)
    for (Index i = 0; i < calib.data.rows(); ++i) put_f64(out, calib.data(i, j));
  return out;
}

CalibrationSet read_calib(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic(kCalibMagic);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  const std::uint32_t d_in = r.u32();
  const std::uint64_t n_tokens = r.u64();
  if (d_in < 1 || n_tokens < 1)
    throw Error(ErrorCode::InvalidHeader, "empty calibration set");
  r.need_doubles(d_in, n_tokens);

  CalibrationSet calib;
  calib.data.resize(static_cast<Index>(d_in), static_cast<Index>(n_tokens));
  for (Index j = 0; j < calib.data.cols(); ++j)
    for (Index i = 0; i < calib.data.rows(); ++i) calib.data(i, j) = r.f64();
  r.finish();
  return calib;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + ": " + ec.message());
}

ModelSpec read_model_file(const std::filesystem::path& path) {
  return read_model(read_file(path));
}

void write_model_file(const std::filesystem::path& path, const ModelSpec& model) {
  write_file_atomic(path, write_model(model));
}

CalibrationSet read_calib_file(const std::filesystem::path& path) {
  return read_calib(read_file(path));
}

void write_calib_file(const std::filesystem::path& path, const CalibrationSet& calib) {
  write_file_atomic(path, write_calib(calib));
}

}  // namespace saes
