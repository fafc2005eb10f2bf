#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "saes/stats.hpp"
#include "support/helpers.hpp"

using namespace saes;

TEST_CASE("first batch lands at (2/N)XX^T") {
  GaussianRng rng(1);
  const Matrix x = rng.matrix(4, 10);
  const Matrix xf = x + rng.matrix(4, 10, 0.2);
  LayerStats stats = stats_update(LayerStats::zero(4), ActivationBatch{x, xf});

  CHECK(stats.n_tokens == 10);
  CHECK((stats.h - 0.2 * (x * x.transpose())).norm() < 1e-12);
  CHECK((stats.delta - 0.2 * ((xf - x) * x.transpose())).norm() < 1e-12);
}

TEST_CASE("two streamed batches telescope to the concatenated batch") {
  GaussianRng rng(2);
  const Matrix x = rng.matrix(5, 24);
  const Matrix xf = x + rng.matrix(5, 24, 0.3);

  LayerStats stats = LayerStats::zero(5);
  stats = stats_update(std::move(stats),
                       ActivationBatch{x.leftCols(7), xf.leftCols(7)});
  stats = stats_update(std::move(stats),
                       ActivationBatch{x.rightCols(17), xf.rightCols(17)});

  const auto [h_ref, delta_ref] = batch_stats_oracle(x, xf);
  CHECK((stats.h - h_ref).norm() < 1e-12 * h_ref.norm());
  CHECK((stats.delta - delta_ref).norm() < 1e-12 * delta_ref.norm());
}

TEST_CASE("a batch with xf == x adds nothing to delta") {
  GaussianRng rng(3);
  const Matrix x0 = rng.matrix(3, 8);
  const Matrix xf0 = x0 + rng.matrix(3, 8, 0.5);
  LayerStats stats = stats_update(LayerStats::zero(3), ActivationBatch{x0, xf0});
  const Matrix delta_before = stats.delta;
  const std::uint64_t t = stats.n_tokens;

  const Matrix x1 = rng.matrix(3, 6);
  stats = stats_update(std::move(stats), ActivationBatch{x1, x1});
  const double gamma = static_cast<double>(t) / static_cast<double>(t + 6);
  CHECK((stats.delta - gamma * delta_before).norm() < 1e-14);
}

TEST_CASE("batch_stats_oracle basics") {
  GaussianRng rng(4);
  const Matrix x = rng.matrix(4, 12);
  const auto [h, delta] = batch_stats_oracle(x, x);
  CHECK((h - (2.0 / 12.0) * (x * x.transpose())).norm() < 1e-14);
  CHECK(delta.norm() == 0.0);

  Matrix e1 = Matrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  const auto [h1, d1] = batch_stats_oracle(e1, e1);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 2.0;
  CHECK((h1 - expected).norm() == 0.0);
}

TEST_CASE("partition invariance over random splits") {
  GaussianRng rng(5);
  const Matrix x = rng.matrix(6, 40);
  const Matrix xf = x + rng.matrix(6, 40, 0.4);
  const auto [h_ref, delta_ref] = batch_stats_oracle(x, xf);

  for (int trial = 0; trial < 8; ++trial) {
    LayerStats stats = LayerStats::zero(6);
    Index pos = 0;
    while (pos < 40) {
      const Index width = 1 + static_cast<Index>(rng.raw() % static_cast<std::uint64_t>(40 - pos));
      stats = stats_update(std::move(stats), ActivationBatch{x.middleCols(pos, width),
                                                             xf.middleCols(pos, width)});
      pos += width;
    }
    CHECK((stats.h - h_ref).norm() <= 1e-10 * h_ref.norm());
    CHECK((stats.delta - delta_ref).norm() <= 1e-10 * delta_ref.norm());
  }
}

TEST_CASE("h ignores token order") {
  GaussianRng rng(6);
  const Matrix x = rng.matrix(4, 9);
  Matrix x_rev(4, 9);
  for (Index j = 0; j < 9; ++j) x_rev.col(j) = x.col(8 - j);

  const LayerStats a = testing::streamed_stats(x, x);
  const LayerStats b = testing::streamed_stats(x_rev, x_rev);
  CHECK((a.h - b.h).norm() < 1e-12 * a.h.norm());
}

TEST_CASE("activation scaling scales both moments by c^2") {
  GaussianRng rng(7);
  const Matrix x = rng.matrix(5, 16);
  const Matrix xf = x + rng.matrix(5, 16, 0.3);
  const double c = 3.7;

  const LayerStats base = testing::streamed_stats(x, xf);
  const LayerStats scaled = testing::streamed_stats(c * x, c * xf);
  CHECK((scaled.h - c * c * base.h).norm() < 1e-10 * scaled.h.norm());
  CHECK((scaled.delta - c * c * base.delta).norm() < 1e-10 * scaled.delta.norm());
}

TEST_CASE("stats invariants hold along a stream") {
  GaussianRng rng(8);
  LayerStats stats = LayerStats::zero(5);
  CHECK(stats.n_tokens == 0);
  CHECK(stats.h.norm() == 0.0);
  CHECK(stats.delta.norm() == 0.0);

  for (int k = 0; k < 6; ++k) {
    const Matrix x = rng.matrix(5, 4 + k);
    stats = stats_update(std::move(stats), ActivationBatch{x, x + rng.matrix(5, 4 + k, 0.2)});
    CHECK((stats.h - stats.h.transpose()).norm() <= 1e-9 * stats.h.norm());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(stats.h);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * stats.h.trace() / 5.0);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  LayerStats stats = LayerStats::zero(4);
  GaussianRng rng(9);
  CHECK_THROWS_AS(
      (void)stats_update(stats, ActivationBatch{rng.matrix(3, 5), rng.matrix(3, 5)}),
      Error);
  CHECK_THROWS_AS(
      (void)stats_update(stats, ActivationBatch{rng.matrix(4, 5), rng.matrix(4, 6)}),
      Error);
  CHECK_THROWS_AS(
      (void)stats_update(stats, ActivationBatch{Matrix(4, 0), Matrix(4, 0)}), Error);
  CHECK_THROWS_AS((void)batch_stats_oracle(rng.matrix(3, 4), rng.matrix(4, 4)), Error);
}
