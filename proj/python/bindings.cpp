#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "saes/gen.hpp"
#include "saes/model.hpp"
#include "saes/oracle.hpp"
#include "saes/pipeline.hpp"

namespace py = pybind11;
using namespace saes;

namespace {

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite())
    throw Error(ErrorCode::NonFiniteValue, std::string(what) + " contains NaN or Inf");
}

ModelSpec dense_model(const std::vector<Matrix>& weights, Activation act) {
  ModelSpec model;
  for (const Matrix& w : weights) {
    check_finite(w, "weight");
    LayerDef layer;
    layer.d_out = w.rows();
    layer.d_in = w.cols();
    layer.act = act;
    layer.weights = w;
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SAES-SVD: cumulative-error-aware low-rank compression of layer stacks";

  py::register_exception<Error>(m, "Error");

  py::enum_<Activation>(m, "Activation")
      .value("identity", Activation::identity)
      .value("relu", Activation::relu)
      .value("tanh", Activation::tanh);

  py::enum_<BetaObjective>(m, "BetaObjective")
      .value("ratio", BetaObjective::ratio)
      .value("energy", BetaObjective::energy);

  // linear algebra
  m.def("sym_inv_sqrt", &sym_inv_sqrt, py::arg("h"), py::arg("ridge") = 0.0);
  m.def(
      "truncated_svd",
      [](const Matrix& g, Index r) {
        SvdFactors f = truncated_svd(g, r);
        return py::make_tuple(f.u, f.sigma, f.v);
      },
      py::arg("g"), py::arg("r"), "Top-r SVD as (u, sigma, v)");
  m.def("frob_inner", &frob_inner, py::arg("x"), py::arg("y"));
  m.def("singular_values", &singular_values, py::arg("g"));

  // streaming statistics
  py::class_<LayerStats>(m, "LayerStats")
      .def(py::init([](Index d_in) { return LayerStats::zero(d_in); }), py::arg("d_in"))
      .def_readwrite("h", &LayerStats::h)
      .def_readwrite("delta", &LayerStats::delta)
      .def_readwrite("n_tokens", &LayerStats::n_tokens)
      .def("dim", &LayerStats::dim);
  m.def(
      "stats_update",
      [](const LayerStats& stats, const Matrix& x, const Matrix& xf) {
        check_finite(x, "x");
        check_finite(xf, "xf");
        return stats_update(stats, ActivationBatch{x, xf});
      },
      py::arg("stats"), py::arg("x"), py::arg("xf"));
  m.def("batch_stats_oracle", &batch_stats_oracle, py::arg("x"), py::arg("xf"));

  // closed-form layer compression
  py::class_<LayerFactors>(m, "LayerFactors")
      .def_readonly("a", &LayerFactors::a)
      .def_readonly("b", &LayerFactors::b)
      .def_readonly("rank", &LayerFactors::rank)
      .def_readonly("beta_used", &LayerFactors::beta_used)
      .def_readonly("alpha_used", &LayerFactors::alpha_used)
      .def("effective_weight", &LayerFactors::effective_weight);
  m.def("cealc_compress", &cealc_compress, py::arg("w"), py::arg("stats"),
        py::arg("r"), py::arg("beta") = 0.0, py::arg("ridge_rel") = 1e-6);
  m.def("rank_from_ratio", &rank_from_ratio, py::arg("d_out"), py::arg("d_in"),
        py::arg("ratio"));
  m.def("alpha_to_beta", &alpha_to_beta, py::arg("alpha"));
  m.def("beta_to_alpha", &beta_to_alpha, py::arg("beta"));

  // adaptive coefficient selection
  py::class_<AcesOptions>(m, "AcesOptions")
      .def(py::init<>())
      .def_readwrite("beta_min", &AcesOptions::beta_min)
      .def_readwrite("beta_max", &AcesOptions::beta_max)
      .def_readwrite("beta_cap", &AcesOptions::beta_cap)
      .def_readwrite("shrink", &AcesOptions::shrink)
      .def_readwrite("objective", &AcesOptions::objective)
      .def_readwrite("ridge_rel", &AcesOptions::ridge_rel);
  py::class_<BetaSelection>(m, "BetaSelection")
      .def_readonly("beta_star", &BetaSelection::beta_star)
      .def_readonly("alpha_star", &BetaSelection::alpha_star)
      .def_readonly("candidates", &BetaSelection::candidates)
      .def_readonly("objective", &BetaSelection::objective)
      .def_readonly("degenerate", &BetaSelection::degenerate);
  py::class_<FoaDiagnostics>(m, "FoaDiagnostics")
      .def_readonly("gap", &FoaDiagnostics::gap)
      .def_readonly("tau", &FoaDiagnostics::tau);
  m.def("aces_select_beta", &aces_select_beta, py::arg("w"), py::arg("stats"),
        py::arg("r"), py::arg("options") = AcesOptions{});
  m.def("exact_rer", &exact_rer, py::arg("g"), py::arg("r"));

  // models and calibration data
  py::class_<LayerDef>(m, "LayerDef")
      .def_readonly("d_out", &LayerDef::d_out)
      .def_readonly("d_in", &LayerDef::d_in)
      .def_readonly("activation", &LayerDef::act)
      .def_readwrite("weights", &LayerDef::weights)
      .def("is_dense", &LayerDef::is_dense)
      .def("effective_weight", &LayerDef::effective_weight);
  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_readwrite("layers", &ModelSpec::layers)
      .def("all_dense", &ModelSpec::all_dense)
      .def("input_dim", &ModelSpec::input_dim)
      .def("output_dim", &ModelSpec::output_dim)
      .def("parameter_count", &ModelSpec::parameter_count)
      .def("validate", &ModelSpec::validate);
  m.def("dense_model", &dense_model, py::arg("weights"),
        py::arg("activation") = Activation::identity,
        "Stack dense weight matrices into a model");
  py::class_<CalibrationSet>(m, "CalibrationSet")
      .def(py::init([](const Matrix& data) {
             check_finite(data, "calibration data");
             return CalibrationSet{data};
           }),
           py::arg("data"))
      .def_readwrite("data", &CalibrationSet::data)
      .def("d_in", &CalibrationSet::d_in)
      .def("n_tokens", &CalibrationSet::n_tokens);
  m.def("forward", &forward, py::arg("model"), py::arg("x"));

  m.def("read_model", &read_model_file, py::arg("path"));
  m.def("write_model", &write_model_file, py::arg("path"), py::arg("model"));
  m.def("read_calib", &read_calib_file, py::arg("path"));
  m.def("write_calib", &write_calib_file, py::arg("path"), py::arg("calib"));
  m.def("model_bytes", [](const ModelSpec& model) {
    const auto bytes = write_model(model);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("random_dense_model", &random_dense_model, py::arg("dims"),
        py::arg("activation") = Activation::tanh, py::arg("seed") = 0);
  m.def("random_calibration", &random_calibration, py::arg("d_in"),
        py::arg("n_tokens"), py::arg("seed") = 0);

  // pipeline
  py::class_<CompressionConfig>(m, "CompressionConfig")
      .def(py::init<>())
      .def_readwrite("ratio", &CompressionConfig::ratio)
      .def_readwrite("ranks", &CompressionConfig::ranks)
      .def_readwrite("ridge_rel", &CompressionConfig::ridge_rel)
      .def_readwrite("alpha_min", &CompressionConfig::alpha_min)
      .def_readwrite("alpha_max", &CompressionConfig::alpha_max)
      .def_readwrite("beta_cap", &CompressionConfig::beta_cap)
      .def_readwrite("shrink", &CompressionConfig::shrink)
      .def_readwrite("objective", &CompressionConfig::objective)
      .def_readwrite("fixed_alpha", &CompressionConfig::fixed_alpha)
      .def_readwrite("batch_tokens", &CompressionConfig::batch_tokens)
      .def("aces_options", &CompressionConfig::aces_options);
  py::class_<LayerReport>(m, "LayerReport")
      .def_readonly("index", &LayerReport::index)
      .def_readonly("d_out", &LayerReport::d_out)
      .def_readonly("d_in", &LayerReport::d_in)
      .def_readonly("rank", &LayerReport::rank)
      .def_readonly("beta_star", &LayerReport::beta_star)
      .def_readonly("alpha_star", &LayerReport::alpha_star)
      .def_readonly("rer", &LayerReport::rer)
      .def_readonly("foa_tail_ratio", &LayerReport::foa_tail_ratio)
      .def_readonly("cos_sim", &LayerReport::cos_sim)
      .def_readonly("frob_rel_err", &LayerReport::frob_rel_err)
      .def_readonly("gap", &LayerReport::gap)
      .def_readonly("tau", &LayerReport::tau);
  py::class_<CompressionReport>(m, "CompressionReport")
      .def_readonly("layers", &CompressionReport::layers)
      .def_readonly("final_cos_sim", &CompressionReport::final_cos_sim)
      .def_readonly("final_frob_rel_err", &CompressionReport::final_frob_rel_err);
  py::class_<EvalMetrics>(m, "EvalMetrics")
      .def_readonly("cos_sim", &EvalMetrics::cos_sim)
      .def_readonly("frob_rel_err", &EvalMetrics::frob_rel_err)
      .def("final_cos_sim", &EvalMetrics::final_cos_sim)
      .def("final_frob_rel_err", &EvalMetrics::final_frob_rel_err);
  m.def(
      "compress_model",
      [](const ModelSpec& model, const CalibrationSet& calib,
         const CompressionConfig& cfg, const CalibrationSet* eval_set) {
        return eval_set ? compress_model(model, calib, cfg, *eval_set)
                        : compress_model(model, calib, cfg);
      },
      py::arg("model"), py::arg("calib"), py::arg("config"),
      py::arg("eval_set") = nullptr);
  m.def("evaluate", &evaluate, py::arg("model_fp"), py::arg("model_c"),
        py::arg("eval_set"), py::arg("batch_tokens") = 512);
  m.def(
      "beta_sweep",
      [](const Matrix& w, const LayerStats& stats, Index r, int grid,
         const CompressionConfig& cfg) {
        std::vector<std::tuple<double, double, double>> rows;
        for (const auto& p : beta_sweep(w, stats, r, grid, cfg))
          rows.emplace_back(p.beta, p.exact_rer, p.foa_tail_ratio);
        return rows;
      },
      py::arg("w"), py::arg("stats"), py::arg("r"), py::arg("grid_points"),
      py::arg("config"));
  m.def("split_calibration", &split_calibration, py::arg("calib"));
  m.def("report_to_csv", &report_to_csv, py::arg("report"));

  // verification battery
  m.def(
      "selftest",
      [](int trials, std::uint64_t seed) {
        std::vector<std::tuple<std::string, bool, std::string>> rows;
        for (const auto& r : oracle::run_selftest(trials, seed))
          rows.emplace_back(r.name, r.pass, r.detail);
        return rows;
      },
      py::arg("trials") = 10000, py::arg("seed") = 1);
}
