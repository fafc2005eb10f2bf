#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "saes/linalg.hpp"
#include "support/helpers.hpp"
#include "support/jacobi.hpp"

using namespace saes;

TEST_CASE("sym_inv_sqrt identity and diagonal") {
  const Matrix i3 = Matrix::Identity(3, 3);
  CHECK((sym_inv_sqrt(i3, 0.0) - i3).norm() < 1e-12);

  Matrix d(2, 2);
  d << 4.0, 0.0, 0.0, 9.0;
  const Matrix l = sym_inv_sqrt(d, 0.0);
  CHECK(l(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(l(0, 1)) < 1e-14);
}

TEST_CASE("sym_inv_sqrt random SPD against the Jacobi oracle") {
  GaussianRng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix h = testing::random_spd(rng, 8);
    const double ridge = 1e-6;
    const Matrix l = sym_inv_sqrt(h, ridge);

    Matrix hr = h;
    hr.diagonal().array() += ridge;
    CHECK((l * hr * l - Matrix::Identity(8, 8)).norm() < 1e-8 * 8);

    const Matrix l_oracle = testing::jacobi_inv_sqrt(h, ridge);
    CHECK((l - l_oracle).norm() < 1e-8 * l_oracle.norm());
  }
}

TEST_CASE("sym_inv_sqrt output is symmetric") {
  GaussianRng rng(7);
  const Matrix h = testing::random_spd(rng, 6);
  const Matrix l = sym_inv_sqrt(h, 1e-8);
  CHECK((l - l.transpose()).norm() <= 1e-12 * l.norm());
}

TEST_CASE("sym_inv_sqrt monotone in the ridge") {
  GaussianRng rng(11);
  const Matrix h = testing::random_spd(rng, 7);
  const Vector s1 = singular_values(sym_inv_sqrt(h, 1e-8));
  const Vector s2 = singular_values(sym_inv_sqrt(h, 1e-2));
  for (Index i = 0; i < s1.size(); ++i) CHECK(s2(i) <= s1(i) + 1e-12);
}

TEST_CASE("sym_inv_sqrt error paths") {
  CHECK_THROWS_AS((void)sym_inv_sqrt(Matrix::Zero(2, 3), 0.0), Error);
  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS((void)sym_inv_sqrt(asym, 0.0), Error);
  CHECK_THROWS_AS((void)sym_inv_sqrt(-Matrix::Identity(3, 3), 0.0), Error);
  CHECK_THROWS_AS((void)sym_inv_sqrt(Matrix::Zero(3, 3), 0.0), Error);

  try {
    (void)sym_inv_sqrt(-Matrix::Identity(3, 3), 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositiveDefinite);
  }
}

TEST_CASE("sym_inv_sqrt_pair inverts itself") {
  GaussianRng rng(3);
  const Matrix h = testing::random_spd(rng, 5);
  const SymSqrtPair pair = sym_inv_sqrt_pair(h, 1e-7);
  CHECK((pair.inv_sqrt * pair.sqrt - Matrix::Identity(5, 5)).norm() < 1e-8 * 5);
}

TEST_CASE("truncated_svd on a diagonal matrix") {
  Matrix g = Matrix::Zero(3, 3);
  g.diagonal() << 3.0, 2.0, 1.0;
  const SvdFactors f = truncated_svd(g, 2);
  CHECK(f.sigma(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.sigma(1) == doctest::Approx(2.0).epsilon(1e-12));
  Matrix expected = Matrix::Zero(3, 3);
  expected.diagonal() << 3.0, 2.0, 0.0;
  CHECK((f.reconstruct() - expected).norm() < 1e-12);
}

TEST_CASE("truncated_svd full-rank round trip") {
  GaussianRng rng(5);
  const Matrix g = rng.matrix(7, 5);
  const SvdFactors f = truncated_svd(g, 5);
  CHECK((f.reconstruct() - g).norm() < 1e-9 * g.norm());
}

TEST_CASE("truncated_svd beats random rank-3 candidates") {
  GaussianRng rng(17);
  const Matrix g = rng.matrix(12, 9);
  const SvdFactors f = truncated_svd(g, 3);
  const double best = (f.reconstruct() - g).norm();
  for (int k = 0; k < 10000; ++k) {
    const Matrix q = rng.matrix(12, 3) * rng.matrix(3, 9);
    CHECK(best <= (q - g).norm() + 1e-9 * g.norm());
  }
}

TEST_CASE("truncated_svd energy identity and orthonormal factors") {
  GaussianRng rng(23);
  for (Index r : {1, 3, 6}) {
    const Matrix g = rng.matrix(9, 6);
    const SvdFactors f = truncated_svd(g, r);
    CHECK((f.u.transpose() * f.u - Matrix::Identity(r, r)).norm() < 1e-9);
    CHECK((f.v.transpose() * f.v - Matrix::Identity(r, r)).norm() < 1e-9);
    for (Index i = 1; i < r; ++i) CHECK(f.sigma(i) <= f.sigma(i - 1));
    CHECK(f.sigma(r - 1) >= 0.0);

    const double energy = f.sigma.squaredNorm() + (g - f.reconstruct()).squaredNorm();
    CHECK(energy == doctest::Approx(g.squaredNorm()).epsilon(1e-8));
  }
}

TEST_CASE("truncated_svd sign convention is deterministic") {
  GaussianRng rng(29);
  const Matrix g = rng.matrix(6, 6);
  const SvdFactors f = truncated_svd(g, 4);
  for (Index j = 0; j < 4; ++j) {
    Index imax;
    f.u.col(j).cwiseAbs().maxCoeff(&imax);
    CHECK(f.u(imax, j) > 0.0);
  }
}

TEST_CASE("truncated_svd rank validation") {
  const Matrix g = Matrix::Identity(4, 4);
  CHECK_THROWS_AS((void)truncated_svd(g, 0), Error);
  CHECK_THROWS_AS((void)truncated_svd(g, 5), Error);
}

TEST_CASE("frob_inner") {
  CHECK(frob_inner(Matrix::Identity(2, 2), Matrix::Identity(2, 2)) == 2.0);

  GaussianRng rng(31);
  const Matrix x = rng.matrix(5, 4);
  CHECK(frob_inner(x, Matrix::Zero(5, 4)) == 0.0);
  CHECK(frob_inner(x, x) == doctest::Approx(x.squaredNorm()).epsilon(1e-14));

  const Matrix y = rng.matrix(5, 4);
  double naive = 0.0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 4; ++j) naive += x(i, j) * y(i, j);
  CHECK(frob_inner(x, y) == doctest::Approx(naive).epsilon(1e-13));

  CHECK_THROWS_AS((void)frob_inner(x, Matrix::Zero(4, 5)), Error);
}
