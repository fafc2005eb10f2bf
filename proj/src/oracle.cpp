#include "saes/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "saes/aces.hpp"
#include "saes/gen.hpp"
#include "saes/stats.hpp"

namespace saes::oracle {

namespace {

std::string seed_tag(std::uint64_t seed) {
  return " (seed " + std::to_string(seed) + ")";
}

// Drifted-reference instance: xf = x + drift·noise, full row rank x.
OracleInstance random_instance(GaussianRng& rng, Index max_dout, Index max_din) {
  const Index d_out = 2 + static_cast<Index>(rng.raw() % (max_dout - 1));
  const Index d_in = 2 + static_cast<Index>(rng.raw() % (max_din - 1));
  const Index n = d_in + static_cast<Index>(rng.raw() % (32 - d_in + 1));
  const double alpha = 3.0 * rng.uniform();
  Matrix w = rng.matrix(d_out, d_in);
  Matrix x = rng.matrix(d_in, n);
  Matrix xf = x + rng.matrix(d_in, n, 0.3);
  return OracleInstance::make(std::move(w), std::move(x), std::move(xf), alpha);
}

LayerStats explicit_stats(const OracleInstance& inst) {
  LayerStats stats;
  stats.h = inst.x * inst.x.transpose();
  stats.h = (0.5 * (stats.h + stats.h.transpose())).eval();
  stats.delta = (inst.xf - inst.x) * inst.x.transpose();
  stats.n_tokens = static_cast<std::uint64_t>(inst.x.cols());
  return stats;
}

Index random_rank(GaussianRng& rng, const OracleInstance& inst, Index cap) {
  const Index mn = std::min(inst.w.rows(), inst.w.cols());
  return 1 + static_cast<Index>(rng.raw() % static_cast<std::uint64_t>(std::min(cap, mn)));
}

double tail_ratio_full_svd(const Matrix& g, Index r) {
  const Vector sigma = singular_values(g);
  const double total2 = sigma.squaredNorm();
  if (total2 <= 0.0) return 0.0;
  const double tail2 = sigma.tail(sigma.size() - r).squaredNorm();
  return std::sqrt(tail2 / total2);
}

}  // namespace

OracleInstance OracleInstance::make(Matrix w, Matrix x, Matrix xf, double alpha) {
  OracleInstance inst;
  inst.w = std::move(w);
  inst.x = std::move(x);
  inst.xf = std::move(xf);
  inst.alpha = alpha;
  inst.t = inst.w * inst.x;
  inst.rr = inst.w * inst.xf;
  inst.z = (inst.t + alpha * inst.rr) / (1.0 + alpha);
  return inst;
}

double weighted_objective(const OracleInstance& inst, const Matrix& candidate) {
  if (candidate.rows() != inst.w.rows() || candidate.cols() != inst.w.cols())
    throw Error(ErrorCode::ShapeMismatch, "candidate shape differs from weight");
  const double recon = ((candidate - inst.w) * inst.x).squaredNorm();
  const double align = (candidate * inst.x - inst.rr).squaredNorm();
  return recon + inst.alpha * align;
}

double completion_constant(const OracleInstance& inst) {
  return inst.t.squaredNorm() + inst.alpha * inst.rr.squaredNorm() -
         (1.0 + inst.alpha) * inst.z.squaredNorm();
}

bool projection_identity_check(const Matrix& x) {
  const Matrix gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector lambda = eig.eigenvalues();
  if (!(lambda.minCoeff() > 1e-10 * lambda.maxCoeff()))
    throw Error(ErrorCode::RankDeficient, "x has numerically deficient row rank");

  const Matrix p = x.transpose() * gram.llt().solve(x);
  const double scale = std::max(p.norm(), 1.0);
  if ((p - p.transpose()).norm() > 1e-8 * scale) return false;
  if ((p * p - p).norm() > 1e-8 * scale) return false;

  GaussianRng rng(0x5AE5);
  for (int k = 0; k < 3; ++k) {
    const Matrix cx = rng.matrix(4, x.rows()) * x;
    if ((cx * p - cx).norm() > 1e-8 * std::max(cx.norm(), 1.0)) return false;
  }
  return true;
}

bool dominance_check(const OracleInstance& inst, const LayerFactors& factors,
                     int trials, std::uint64_t seed, std::string* detail) {
  GaussianRng rng(seed);
  const Matrix optimum = factors.effective_weight();
  const double obj_opt = weighted_objective(inst, optimum);
  const double scale = std::max(obj_opt, inst.t.squaredNorm());
  const Index d_out = inst.w.rows();
  const Index d_in = inst.w.cols();
  const Index r = factors.rank;

  const auto beaten_by = [&](const Matrix& candidate, const char* family) {
    const double obj = weighted_objective(inst, candidate);
    if (obj_opt <= obj + 1e-9 * std::max(scale, obj)) return false;
    if (detail)
      *detail = std::string(family) + " candidate beats the closed form: " +
                std::to_string(obj) + " < " + std::to_string(obj_opt) +
                seed_tag(seed);
    return true;
  };

  for (int k = 0; k < trials; ++k) {
    const Matrix candidate = rng.matrix(d_out, r) * rng.matrix(r, d_in);
    if (beaten_by(candidate, "random")) return false;
  }

  // First-order probes around the optimum, with noise scaled to the factors.
  const double rms_a =
      factors.a.norm() / std::sqrt(static_cast<double>(factors.a.size()));
  const double rms_b =
      factors.b.norm() / std::sqrt(static_cast<double>(factors.b.size()));
  for (double eps : {1e-3, 1e-2, 1e-1}) {
    for (int k = 0; k < 100; ++k) {
      const Matrix pa = factors.a + rng.matrix(d_out, r, eps * std::max(rms_a, 1e-12));
      const Matrix pb = factors.b + rng.matrix(r, d_in, eps * std::max(rms_b, 1e-12));
      if (beaten_by(pa * pb, "perturbation")) return false;
    }
  }
  return true;
}

CheckResult check_dominance(int instances, int trials, std::uint64_t seed) {
  CheckResult res{"eckart-young-dominance", true, ""};
  GaussianRng rng(seed);
  for (int i = 0; i < instances; ++i) {
    OracleInstance inst = random_instance(rng, 12, 8);
    const Index r = random_rank(rng, inst, 4);
    LayerFactors factors =
        cealc_compress(inst.w, explicit_stats(inst), r,
                       alpha_to_beta(inst.alpha), /*ridge_rel=*/0.0);
    std::string detail;
    if (!dominance_check(inst, factors, trials, rng.raw(), &detail)) {
      res.pass = false;
      res.detail = "instance " + std::to_string(i) + ": " + detail + seed_tag(seed);
      return res;
    }
  }
  res.detail = std::to_string(instances) + " instances x " + std::to_string(trials) +
               "+300 candidates";
  return res;
}

CheckResult check_completion_of_squares(int instances, int candidates,
                                        std::uint64_t seed) {
  CheckResult res{"completion-of-squares", true, ""};
  GaussianRng rng(seed);
  for (int i = 0; i < instances; ++i) {
    OracleInstance inst = random_instance(rng, 12, 8);
    const double c_expected = completion_constant(inst);
    const double scale =
        inst.t.squaredNorm() + inst.alpha * inst.rr.squaredNorm();
    for (int k = 0; k < candidates; ++k) {
      const Matrix q = rng.matrix(inst.w.rows(), inst.w.cols());
      const double lhs = weighted_objective(inst, q);
      const double rhs = (1.0 + inst.alpha) * (q * inst.x - inst.z).squaredNorm();
      if (std::abs(lhs - rhs - c_expected) >
          1e-8 * std::max(std::abs(c_expected), scale)) {
        res.pass = false;
        res.detail = "constant drifted on instance " + std::to_string(i) +
                     ", candidate " + std::to_string(k) + seed_tag(seed);
        return res;
      }
    }
  }
  res.detail = std::to_string(instances) + " instances x " +
               std::to_string(candidates) + " candidates";
  return res;
}

CheckResult check_projection_identities(int instances, std::uint64_t seed) {
  CheckResult res{"projection-identities", true, ""};
  GaussianRng rng(seed);
  for (int i = 0; i < instances; ++i) {
    const Index p = 2 + static_cast<Index>(rng.raw() % 7);
    const Index n = p + 4 + static_cast<Index>(rng.raw() % 16);
    const Matrix x = rng.matrix(p, n);
    if (!projection_identity_check(x)) {
      res.pass = false;
      res.detail = "identity violated on instance " + std::to_string(i) + seed_tag(seed);
      return res;
    }
  }
  res.detail = std::to_string(instances) + " full-row-rank instances";
  return res;
}

CheckResult check_partition_invariance(int sets, int partitions_per_set,
                                       std::uint64_t seed) {
  CheckResult res{"streaming-equals-batch", true, ""};
  GaussianRng rng(seed);
  for (int i = 0; i < sets; ++i) {
    const Index d = 2 + static_cast<Index>(rng.raw() % 9);
    const Index n = 8 + static_cast<Index>(rng.raw() % 57);
    const Matrix x = rng.matrix(d, n);
    const Matrix xf = x + rng.matrix(d, n, 0.5);
    const auto [h_ref, delta_ref] = batch_stats_oracle(x, xf);

    for (int k = 0; k < partitions_per_set; ++k) {
      LayerStats stats = LayerStats::zero(d);
      Index pos = 0;
      while (pos < n) {
        const Index width = 1 + static_cast<Index>(rng.raw() % static_cast<std::uint64_t>(n - pos));
        stats = stats_update(std::move(stats),
                             ActivationBatch{x.middleCols(pos, width),
                                             xf.middleCols(pos, width)});
        pos += width;
      }
      if ((stats.h - h_ref).norm() > 1e-10 * h_ref.norm() ||
          (stats.delta - delta_ref).norm() > 1e-10 * delta_ref.norm()) {
        res.pass = false;
        res.detail = "partition " + std::to_string(k) + " of set " +
                     std::to_string(i) + " diverged" + seed_tag(seed);
        return res;
      }
    }
  }
  res.detail = std::to_string(sets) + " sets x " + std::to_string(partitions_per_set) +
               " partitions";
  return res;
}

CheckResult check_fsfoa_exactness(int instances, int betas, std::uint64_t seed) {
  CheckResult res{"fsfoa-exactness", true, ""};
  GaussianRng rng(seed);
  for (int i = 0; i < instances; ++i) {
    const Index d_out = 4 + static_cast<Index>(rng.raw() % 7);
    const Index d_in = 4 + static_cast<Index>(rng.raw() % 5);
    const Index n = d_in + 8 + static_cast<Index>(rng.raw() % 17);
    const Matrix x = rng.matrix(d_in, n);
    const Matrix xf = x + rng.matrix(d_in, n, 0.4);
    const Matrix w = rng.matrix(d_out, d_in);
    LayerStats stats = LayerStats::zero(d_in);
    stats = stats_update(std::move(stats), ActivationBatch{x, xf});

    const Index mn = std::min(d_out, d_in);
    const Index r = 1 + static_cast<Index>(rng.raw() % static_cast<std::uint64_t>(mn - 1));
    const FoaContext ctx = foa_context(w, stats, r, 1e-6);
    const FoaCoefficients coef = foa_coefficients(ctx);

    const Matrix pl =
        Matrix::Identity(ctx.s.rows(), ctx.s.rows()) - ctx.u_r * ctx.u_r.transpose();
    const Matrix pr =
        Matrix::Identity(ctx.s.cols(), ctx.s.cols()) - ctx.v_r * ctx.v_r.transpose();

    for (int k = 0; k < betas; ++k) {
      const double beta = rng.uniform();
      const Matrix g = ctx.s + beta * ctx.d;
      const double direct = (pl * g * pr).norm() / g.norm();
      const double via_coef = foa_tail_ratio(coef, beta);
      if (std::abs(direct - via_coef) > 1e-10 * std::max(1.0, direct)) {
        res.pass = false;
        res.detail = "ratio mismatch " + std::to_string(via_coef) + " vs " +
                     std::to_string(direct) + " at beta " + std::to_string(beta) +
                     seed_tag(seed);
        return res;
      }
    }
  }
  res.detail = std::to_string(instances) + " instances x " + std::to_string(betas) +
               " betas";
  return res;
}

std::vector<double> tau_scaling_slopes(int instances, std::uint64_t seed) {
  const std::vector<double> taus = {0.02, 0.04, 0.08, 0.16};
  GaussianRng rng(seed);
  std::vector<double> slopes;

  for (int i = 0; i < instances; ++i) {
    const Index m = 10, n = 8, r = 3;
    // Orthogonal factors around a fixed spectrum with a clean gap at r.
    const Matrix qm = Eigen::HouseholderQR<Matrix>(rng.matrix(m, m)).householderQ();
    const Matrix qn = Eigen::HouseholderQR<Matrix>(rng.matrix(n, n)).householderQ();
    Vector spec(n);
    spec << 8.0, 7.0, 6.0, 3.0, 2.2, 1.5, 1.0, 0.6;
    const Matrix s = qm.leftCols(n) * spec.asDiagonal() * qn.transpose();
    const double gap = spec(r - 1) - spec(r);

    Matrix dir = rng.matrix(m, n);
    dir /= spectral_norm(dir);

    // Frozen projectors of s at rank r.
    const SvdFactors svd = truncated_svd(s, r);
    const Matrix pl = Matrix::Identity(m, m) - svd.u * svd.u.transpose();
    const Matrix pr = Matrix::Identity(n, n) - svd.v * svd.v.transpose();

    std::vector<double> errs;
    for (double tau : taus) {
      const Matrix d = (tau * gap) * dir;  // max_beta beta*||D||_2/gap = tau
      double worst = 0.0;
      for (int k = 0; k <= 100; ++k) {
        const double beta = k / 100.0;
        const Matrix g = s + beta * d;
        const double rho = tail_ratio_full_svd(g, r);
        const double rho_foa = (pl * g * pr).norm() / g.norm();
        worst = std::max(worst, std::abs(rho - rho_foa));
      }
      errs.push_back(worst);
    }

    // Least-squares slope of log err against log tau.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
      const double lx = std::log(taus[k]);
      const double ly = std::log(std::max(errs[k], 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double nn = static_cast<double>(taus.size());
    slopes.push_back((nn * sxy - sx * sy) / (nn * sxx - sx * sx));
  }
  return slopes;
}

CheckResult check_tau_scaling(int instances, double min_slope, std::uint64_t seed) {
  CheckResult res{"tau-squared-scaling", true, ""};
  const std::vector<double> slopes = tau_scaling_slopes(instances, seed);
  double worst = std::numeric_limits<double>::infinity();
  for (double s : slopes) worst = std::min(worst, s);
  if (worst < min_slope) {
    res.pass = false;
    res.detail = "slope " + std::to_string(worst) + " below " +
                 std::to_string(min_slope) + seed_tag(seed);
    return res;
  }
  res.detail = std::to_string(instances) + " instances, min slope " +
               std::to_string(worst);
  return res;
}

std::vector<CheckResult> run_selftest(int trials, std::uint64_t seed) {
  std::vector<CheckResult> results;
  results.push_back(check_dominance(50, trials, seed + 1));
  results.push_back(check_completion_of_squares(50, 50, seed + 2));
  results.push_back(check_projection_identities(20, seed + 3));
  results.push_back(check_partition_invariance(20, 5, seed + 4));
  results.push_back(check_fsfoa_exactness(20, 100, seed + 5));
  results.push_back(check_tau_scaling(10, 1.7, seed + 6));
  return results;
}

}  // namespace saes::oracle
