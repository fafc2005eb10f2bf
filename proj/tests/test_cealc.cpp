#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saes/cealc.hpp"
#include "saes/oracle.hpp"
#include "support/helpers.hpp"
#include "support/jacobi.hpp"

using namespace saes;

namespace {

LayerStats identity_stats(Index d) {
  LayerStats stats;
  stats.h = Matrix::Identity(d, d);
  stats.delta = Matrix::Zero(d, d);
  stats.n_tokens = 1;
  return stats;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = 0; k < a.cols(); ++k)
      for (Index j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

}  // namespace

TEST_CASE("build_target with identity covariance returns the weight") {
  GaussianRng rng(1);
  const Matrix w = rng.matrix(4, 5);
  const LayerStats stats = identity_stats(5);
  const WhitenedContext ctx = whiten(stats.h, 0.0);
  CHECK((build_target(w, stats, 0.7, ctx) - w).norm() < 1e-12 * w.norm());
}

TEST_CASE("build_target with zero delta is the whitened weight") {
  GaussianRng rng(2);
  const Matrix w = rng.matrix(5, 6);
  LayerStats stats;
  stats.h = testing::random_spd(rng, 6);
  stats.delta = Matrix::Zero(6, 6);
  stats.n_tokens = 8;

  const WhitenedContext ctx = whiten(stats.h, 0.0);
  const Matrix g = build_target(w, stats, 0.0, ctx);
  CHECK((g - w * testing::jacobi_sqrt(stats.h)).norm() < 1e-8 * g.norm());
}

TEST_CASE("build_target matches a naive triple product") {
  GaussianRng rng(3);
  const Matrix w = rng.matrix(6, 8);
  LayerStats stats;
  stats.h = testing::random_spd(rng, 8);
  stats.delta = rng.matrix(8, 8);
  stats.n_tokens = 32;

  const WhitenedContext ctx = whiten(stats.h, 0.0);
  const Matrix g = build_target(w, stats, 0.4, ctx);
  const Matrix g_naive =
      naive_matmul(naive_matmul(w, stats.h + 0.4 * stats.delta), ctx.l);
  CHECK((g - g_naive).norm() < 1e-12 * g_naive.norm());

  CHECK_THROWS_AS((void)build_target(rng.matrix(6, 7), stats, 0.4, ctx), Error);
}

TEST_CASE("whitened context inverts itself") {
  GaussianRng rng(4);
  const Matrix h = testing::random_spd(rng, 7);
  const WhitenedContext ctx = whiten(h, 1e-6);
  CHECK((ctx.l * ctx.h_sqrt - Matrix::Identity(7, 7)).norm() < 1e-8 * 7);
  CHECK(ctx.ridge_used == 1e-6);
}

TEST_CASE("diagonal compression keeps the top singular directions") {
  Matrix w = Matrix::Zero(3, 3);
  w.diagonal() << 3.0, 2.0, 1.0;
  const LayerFactors f = cealc_compress(w, identity_stats(3), 2, 0.0, 0.0);

  Matrix expected = Matrix::Zero(3, 3);
  expected.diagonal() << 3.0, 2.0, 0.0;
  CHECK((f.effective_weight() - expected).norm() < 1e-12);
  CHECK(f.rank == 2);
}

TEST_CASE("full-rank compression is lossless at beta zero") {
  GaussianRng rng(5);
  const Matrix w = rng.matrix(5, 7);
  const Matrix x = rng.matrix(7, 20);
  const LayerStats stats = testing::raw_stats(x, x + rng.matrix(7, 20, 0.2));
  const LayerFactors f = cealc_compress(w, stats, 5, 0.0, 0.0);
  CHECK((f.effective_weight() - w).norm() < 1e-8 * w.norm());
}

TEST_CASE("beta zero ignores delta bitwise") {
  GaussianRng rng(6);
  const Matrix w = rng.matrix(6, 6);
  const Matrix x = rng.matrix(6, 24);
  LayerStats with_delta = testing::raw_stats(x, x + rng.matrix(6, 24, 0.5));
  LayerStats no_delta = with_delta;
  no_delta.delta.setZero();

  const LayerFactors f1 = cealc_compress(w, with_delta, 3, 0.0, 1e-6);
  const LayerFactors f2 = cealc_compress(w, no_delta, 3, 0.0, 1e-6);
  CHECK((f1.a.array() == f2.a.array()).all());
  CHECK((f1.b.array() == f2.b.array()).all());

  const LayerFactors f3 = cealc_compress(w, no_delta, 3, 0.8, 1e-6);
  CHECK((f1.a.array() == f3.a.array()).all());
  CHECK((f1.b.array() == f3.b.array()).all());
}

TEST_CASE("whitened-metric dominance over random candidates") {
  GaussianRng rng(7);
  const Matrix w = rng.matrix(6, 8);
  const Matrix x = rng.matrix(8, 24);
  const LayerStats stats = testing::raw_stats(x, x + rng.matrix(8, 24, 0.4));
  const Index r = 3;

  const WhitenedContext ctx = whiten(stats.h, 0.0);
  const Matrix g = build_target(w, stats, 0.5, ctx);
  const LayerFactors f = cealc_compress(w, stats, r, 0.5, 0.0);
  const double best = (f.effective_weight() * ctx.h_sqrt - g).norm();

  for (int k = 0; k < 10000; ++k) {
    const Matrix q = rng.matrix(6, r) * rng.matrix(r, 8);
    CHECK(best <= (q * ctx.h_sqrt - g).norm() + 1e-9 * g.norm());
  }
}

TEST_CASE("explicit-activation objective dominance and constant shift") {
  GaussianRng rng(8);
  const Matrix w = rng.matrix(5, 6);
  const Matrix x = rng.matrix(6, 20);
  const Matrix xf = x + rng.matrix(6, 20, 0.3);
  const double alpha = 1.0;
  const auto inst = oracle::OracleInstance::make(w, x, xf, alpha);

  const LayerFactors f =
      cealc_compress(w, testing::raw_stats(x, xf), 2, alpha_to_beta(alpha), 0.0);
  const double obj_opt = oracle::weighted_objective(inst, f.effective_weight());
  const double c = oracle::completion_constant(inst);
  const double scale = inst.t.squaredNorm();

  for (int k = 0; k < 50; ++k) {
    const Matrix q = rng.matrix(5, 2) * rng.matrix(2, 6);
    const double obj = oracle::weighted_objective(inst, q);
    CHECK(obj_opt <= obj + 1e-9 * scale);
    const double shifted = obj - (1.0 + alpha) * (q * x - inst.z).squaredNorm();
    CHECK(shifted == doctest::Approx(c).epsilon(1e-8).scale(scale));
  }
}

TEST_CASE("effective weight has numerical rank at most r") {
  GaussianRng rng(9);
  const Matrix w = rng.matrix(7, 9);
  const Matrix x = rng.matrix(9, 30);
  const LayerStats stats = testing::raw_stats(x, x + rng.matrix(9, 30, 0.2));
  const LayerFactors f = cealc_compress(w, stats, 3, 0.4, 1e-6);

  const Vector sigma = singular_values(f.effective_weight());
  for (Index i = 3; i < sigma.size(); ++i) CHECK(sigma(i) <= 1e-9 * sigma(0));
}

TEST_CASE("rank-deficient targets produce zero factor slices") {
  GaussianRng rng(10);
  const Matrix u = rng.matrix(4, 1);
  const Matrix v = rng.matrix(4, 1);
  const Matrix w = u * v.transpose();  // rank one
  const LayerFactors f = cealc_compress(w, identity_stats(4), 3, 0.0, 0.0);

  CHECK(f.a.col(1).norm() == 0.0);
  CHECK(f.a.col(2).norm() == 0.0);
  CHECK(f.b.row(1).norm() == 0.0);
  CHECK(f.b.row(2).norm() == 0.0);
  CHECK((f.effective_weight() - w).norm() < 1e-10 * w.norm());
}

TEST_CASE("alignment metadata keeps the alpha-beta bijection") {
  GaussianRng rng(11);
  const Matrix w = rng.matrix(4, 4);
  const Matrix x = rng.matrix(4, 16);
  const LayerStats stats = testing::raw_stats(x, x);
  for (double beta : {0.0, 0.2, 0.6180339887, 0.95}) {
    const LayerFactors f = cealc_compress(w, stats, 2, beta, 1e-6);
    CHECK(f.beta_used == beta);
    CHECK(std::abs(f.beta_used - f.alpha_used / (1.0 + f.alpha_used)) <= 1e-12);
  }
}

TEST_CASE("relative ridge follows the mean diagonal") {
  LayerStats stats = identity_stats(4);
  stats.h *= 5.0;
  CHECK(relative_ridge(stats, 1e-6) == doctest::Approx(5e-6).epsilon(1e-12));
}

TEST_CASE("compression error paths") {
  GaussianRng rng(12);
  const Matrix w = rng.matrix(4, 4);
  CHECK_THROWS_AS((void)cealc_compress(w, LayerStats::zero(4), 2, 0.0, 0.0), Error);

  const LayerStats stats = identity_stats(4);
  CHECK_THROWS_AS((void)cealc_compress(w, stats, 0, 0.0, 0.0), Error);
  CHECK_THROWS_AS((void)cealc_compress(w, stats, 5, 0.0, 0.0), Error);

  LayerStats dead = LayerStats::zero(4);
  dead.n_tokens = 3;  // tokens seen, but every activation was zero
  CHECK_THROWS_AS((void)cealc_compress(w, dead, 2, 0.0, 1e-6), Error);
}

TEST_CASE("rank_from_ratio frozen values") {
  CHECK(rank_from_ratio(4096, 4096, 0.2) == 1638);
  CHECK(rank_from_ratio(8, 8, 0.0) == 4);
  CHECK(rank_from_ratio(64, 64, 0.99) == 1);
}
