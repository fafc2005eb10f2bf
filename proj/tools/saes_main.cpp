// saes — layer-stack low-rank compression driver.
//
// Subcommands: gen (synthetic models/calibration data), compress (sequential
// adaptive compression + CSV report), eval (fidelity of a compressed model),
// sweep (retained-energy-vs-beta curves for one layer), selftest (brute-force
// verification battery).
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "saes/gen.hpp"
#include "saes/model.hpp"
#include "saes/oracle.hpp"
#include "saes/pipeline.hpp"

namespace {

using namespace saes;

std::vector<std::uint8_t> to_bytes(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

struct GuardrailFlags {
  double lambda_rel = 1e-6;
  double alpha_min = 0.25;
  double alpha_max = 0.75;
  double beta_cap = 0.95;
  double shrink = 1.0;
  std::string objective = "ratio";
  double fixed_alpha = -1.0;  // <0 means unset
  long long batch_tokens = 512;

  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda-rel", lambda_rel, "Relative ridge for whitening");
    cmd->add_option("--alpha-min", alpha_min, "Lower alignment bound (alpha)");
    cmd->add_option("--alpha-max", alpha_max, "Upper alignment bound (alpha)");
    cmd->add_option("--beta-cap", beta_cap, "Hard cap on beta");
    cmd->add_option("--shrink", shrink, "Shrink factor applied after the cap");
    cmd->add_option("--objective", objective, "Selection objective")
        ->check(CLI::IsMember({"ratio", "energy"}));
    cmd->add_option("--fixed-alpha", fixed_alpha,
                    "Bypass adaptive selection with this alpha");
    cmd->add_option("--batch-tokens", batch_tokens, "Tokens per streaming batch")
        ->check(CLI::PositiveNumber);
  }

  void fill(CompressionConfig& cfg) const {
    cfg.ridge_rel = lambda_rel;
    cfg.alpha_min = alpha_min;
    cfg.alpha_max = alpha_max;
    cfg.beta_cap = beta_cap;
    cfg.shrink = shrink;
    cfg.objective = objective == "energy" ? BetaObjective::energy : BetaObjective::ratio;
    if (fixed_alpha >= 0.0) cfg.fixed_alpha = fixed_alpha;
    cfg.batch_tokens = static_cast<Index>(batch_tokens);
  }
};

struct RankFlags {
  double ratio = -1.0;
  std::vector<long long> ranks;

  void attach(CLI::App* cmd) {
    cmd->add_option("--ratio", ratio, "Parameter-budget compression ratio in [0,1)");
    cmd->add_option("--ranks", ranks, "Explicit per-layer ranks")->delimiter(',');
  }

  void fill(CompressionConfig& cfg) const {
    if (ratio >= 0.0) cfg.ratio = ratio;
    for (long long r : ranks) cfg.ranks.push_back(static_cast<Index>(r));
  }
};

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  return Activation::tanh;
}

int cmd_gen(long long layers, const std::string& dim_spec, const std::string& act,
            long long tokens, std::uint64_t seed, const std::string& out_model,
            const std::string& out_calib) {
  std::vector<Index> dims;
  if (dim_spec.find(',') != std::string::npos) {
    std::size_t pos = 0;
    while (pos <= dim_spec.size()) {
      const std::size_t next = dim_spec.find(',', pos);
      const std::string tok = dim_spec.substr(pos, next - pos);
      try {
        dims.push_back(static_cast<Index>(std::stoll(tok)));
      } catch (const std::exception&) {
        std::cerr << "invalid dimension list: " << dim_spec << "\n";
        return 2;
      }
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (layers > 0 && static_cast<std::size_t>(layers) + 1 != dims.size()) {
      std::cerr << "--layers disagrees with the dimension list\n";
      return 2;
    }
  } else {
    Index d = 0;
    try {
      d = static_cast<Index>(std::stoll(dim_spec));
    } catch (const std::exception&) {
      std::cerr << "invalid --dim value: " << dim_spec << "\n";
      return 2;
    }
    if (layers < 1 || d < 1) {
      std::cerr << "--layers and --dim must be positive\n";
      return 2;
    }
    dims.assign(static_cast<std::size_t>(layers) + 1, d);
  }
  for (Index d : dims)
    if (d < 1) {
      std::cerr << "dimensions must be positive\n";
      return 2;
    }
  if (dims.size() < 2 || tokens < 1) {
    std::cerr << "need at least one layer and one token\n";
    return 2;
  }

  const ModelSpec model = random_dense_model(dims, parse_activation(act), seed);
  const CalibrationSet calib =
      random_calibration(dims.front(), static_cast<Index>(tokens),
                         seed + 0x9E3779B97F4A7C15ull);
  write_model_file(out_model, model);
  write_calib_file(out_calib, calib);
  std::cout << "wrote " << out_model << " (" << model.layers.size() << " layers) and "
            << out_calib << " (" << tokens << " tokens)\n";
  return 0;
}

int cmd_compress(const std::string& model_path, const std::string& calib_path,
                 const std::string& out_path, const std::string& report_path,
                 const RankFlags& rank_flags, const GuardrailFlags& guard) {
  const ModelSpec model = read_model_file(model_path);
  const CalibrationSet full = read_calib_file(calib_path);
  const auto [calib, eval_set] = split_calibration(full);

  CompressionConfig cfg;
  rank_flags.fill(cfg);
  guard.fill(cfg);

  auto [compressed, report] = compress_model(model, calib, cfg, eval_set);
  write_model_file(out_path, compressed);
  if (!report_path.empty())
    write_file_atomic(report_path, to_bytes(report_to_csv(report)));

  std::cout << "layers=" << report.layers.size()
            << " params=" << compressed.parameter_count() << "/"
            << model.parameter_count()
            << " final_cos_sim=" << format_double(report.final_cos_sim)
            << " final_frob_rel_err=" << format_double(report.final_frob_rel_err)
            << "\n";
  return 0;
}

int cmd_eval(const std::string& fp_path, const std::string& c_path,
             const std::string& calib_path, const std::string& report_path,
             long long batch_tokens) {
  const ModelSpec model_fp = read_model_file(fp_path);
  const ModelSpec model_c = read_model_file(c_path);
  const CalibrationSet eval_set = read_calib_file(calib_path);

  const EvalMetrics metrics =
      evaluate(model_fp, model_c, eval_set, static_cast<Index>(batch_tokens));

  std::string csv = "layer,cos_sim,frob_rel_err\n";
  for (std::size_t j = 0; j < metrics.cos_sim.size(); ++j)
    csv += std::to_string(j) + ',' + format_double(metrics.cos_sim[j]) + ',' +
           format_double(metrics.frob_rel_err[j]) + '\n';
  if (!report_path.empty()) write_file_atomic(report_path, to_bytes(csv));

  std::cout << "final_cos_sim=" << format_double(metrics.final_cos_sim())
            << " final_frob_rel_err=" << format_double(metrics.final_frob_rel_err())
            << "\n";
  return 0;
}

int cmd_sweep(const std::string& model_path, const std::string& calib_path,
              int layer, long long rank, int grid, const std::string& report_path,
              const RankFlags& rank_flags, const GuardrailFlags& guard) {
  const ModelSpec model = read_model_file(model_path);
  const CalibrationSet full = read_calib_file(calib_path);
  const auto [calib, eval_set] = split_calibration(full);

  CompressionConfig cfg;
  rank_flags.fill(cfg);
  guard.fill(cfg);

  LayerProbe probe = probe_layer(model, calib, cfg, layer);
  const Index r = rank > 0 ? static_cast<Index>(rank) : probe.rank;

  const std::vector<SweepPoint> points = beta_sweep(probe.w, probe.stats, r, grid, cfg);
  const FoaContext ctx = foa_context(probe.w, probe.stats, r, cfg.ridge_rel);
  const BetaSelection sel =
      select_beta_from_coefficients(foa_coefficients(ctx), cfg.aces_options());

  std::string csv = "beta,exact_rer,foa_tail_ratio\n";
  for (const auto& p : points)
    csv += format_double(p.beta) + ',' + format_double(p.exact_rer) + ',' +
           format_double(p.foa_tail_ratio) + '\n';
  csv += "beta_star," + format_double(sel.beta_star) + '\n';

  if (!report_path.empty())
    write_file_atomic(report_path, to_bytes(csv));
  else
    std::cout << csv;
  return 0;
}

int cmd_selftest(long long trials, std::uint64_t seed) {
  const auto results = oracle::run_selftest(static_cast<int>(trials), seed);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("[%s] %-26s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAES-SVD: cumulative-error-aware low-rank compression of layer stacks"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a random dense model and calibration set");
  long long gen_layers = 0;
  std::string gen_dim, gen_act = "tanh", gen_out_model, gen_out_calib;
  long long gen_tokens = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--layers", gen_layers, "Layer count");
  gen->add_option("--dim", gen_dim, "Width, or comma list of boundary widths")->required();
  gen->add_option("--activation", gen_act, "Nonlinearity")
      ->check(CLI::IsMember({"identity", "relu", "tanh"}));
  gen->add_option("--tokens", gen_tokens, "Calibration tokens")->required();
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out-model", gen_out_model, "Model output path")->required();
  gen->add_option("--out-calib", gen_out_calib, "Calibration output path")->required();

  // compress
  auto* compress = app.add_subcommand("compress", "Compress every layer of a dense model");
  std::string c_model, c_calib, c_out, c_report;
  RankFlags c_rank;
  GuardrailFlags c_guard;
  std::uint64_t c_seed = 0;
  compress->add_option("--model", c_model, "Dense model path")->required();
  compress->add_option("--calib", c_calib, "Calibration set path")->required();
  compress->add_option("--out", c_out, "Compressed model output path")->required();
  compress->add_option("--report", c_report, "CSV report output path");
  compress->add_option("--seed", c_seed, "Reserved for randomized extensions");
  c_rank.attach(compress);
  c_guard.attach(compress);

  // eval
  auto* eval = app.add_subcommand("eval", "Compare a compressed model against its reference");
  std::string e_fp, e_c, e_calib, e_report;
  long long e_batch = 512;
  eval->add_option("--model-fp", e_fp, "Reference model path")->required();
  eval->add_option("--model-c", e_c, "Compressed model path")->required();
  eval->add_option("--calib", e_calib, "Evaluation token path")->required();
  eval->add_option("--report", e_report, "CSV report output path");
  eval->add_option("--batch-tokens", e_batch, "Tokens per batch")->check(CLI::PositiveNumber);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Retained-energy-vs-beta curve for one layer");
  std::string s_model, s_calib, s_report;
  int s_layer = 1, s_grid = 101;
  long long s_rank = 0;
  RankFlags s_rank_flags;
  GuardrailFlags s_guard;
  sweep->add_option("--model", s_model, "Dense model path")->required();
  sweep->add_option("--calib", s_calib, "Calibration set path")->required();
  sweep->add_option("--layer", s_layer, "1-based layer to sweep")->required();
  sweep->add_option("--rank", s_rank, "Rank for the swept layer (default: from ratio)");
  sweep->add_option("--grid", s_grid, "Grid points on [0,1]")->check(CLI::Range(2, 1000000));
  sweep->add_option("--report", s_report, "CSV output path (stdout when omitted)");
  s_rank_flags.attach(sweep);
  s_guard.attach(sweep);

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run the brute-force verification battery");
  long long t_trials = 10000;
  std::uint64_t t_seed = 1;
  selftest->add_option("--trials", t_trials, "Random candidates per instance")
      ->check(CLI::PositiveNumber);
  selftest->add_option("--seed", t_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_layers, gen_dim, gen_act, gen_tokens, gen_seed,
                     gen_out_model, gen_out_calib);
    if (compress->parsed())
      return cmd_compress(c_model, c_calib, c_out, c_report, c_rank, c_guard);
    if (eval->parsed()) return cmd_eval(e_fp, e_c, e_calib, e_report, e_batch);
    if (sweep->parsed())
      return cmd_sweep(s_model, s_calib, s_layer, s_rank, s_grid, s_report,
                       s_rank_flags, s_guard);
    if (selftest->parsed()) return cmd_selftest(t_trials, t_seed);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
