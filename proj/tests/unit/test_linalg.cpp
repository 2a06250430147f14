#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tvb/linalg.hpp"

using namespace tvb;

namespace {

Matrix random_psd(std::size_t n, std::uint64_t seed, std::size_t inner = 0) {
  Rng rng(seed);
  Matrix b = random_gaussian(n, inner == 0 ? n + 2 : inner, rng);
  Matrix g = transpose_matmul(transpose(b), transpose(b));  // B Bᵀ
  // Mirror to exact symmetry.
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) g(i, j) = g(j, i) = 0.5 * (g(i, j) + g(j, i));
  return g;
}

}  // namespace

TEST_CASE("rng is deterministic and in range") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(7);
  for (int i = 0; i < 1000; ++i) {
    double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    std::size_t k = c.index(13);
    CHECK(k < 13);
  }
}

TEST_CASE("matmul and transpose basics") {
  Matrix a(2, 3);
  a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
  a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
  Matrix i3 = Matrix::identity(3);
  CHECK(matmul(a, i3) == a);
  Matrix at = transpose(a);
  CHECK(at.rows() == 3);
  CHECK(at(0, 1) == 4);
  Matrix ata = transpose_matmul(a, a);
  CHECK(ata(0, 0) == doctest::Approx(17));
  CHECK(ata(2, 1) == doctest::Approx(3 * 2 + 6 * 5));
}

TEST_CASE("jacobi eigensym on closed forms") {
  SUBCASE("diag(4,1)") {
    Matrix m(2, 2);
    m(0, 0) = 4;
    m(1, 1) = 1;
    SymmetricEigen e = jacobi_eigensym(m);
    CHECK(e.values[0] == doctest::Approx(4).epsilon(1e-14));
    CHECK(e.values[1] == doctest::Approx(1).epsilon(1e-14));
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1).epsilon(1e-12));
  }
  SUBCASE("[[2,1],[1,2]] -> (3,1)") {
    Matrix m(2, 2);
    m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
    SymmetricEigen e = jacobi_eigensym(m);
    CHECK(e.values[0] == doctest::Approx(3).epsilon(1e-14));
    CHECK(e.values[1] == doctest::Approx(1).epsilon(1e-14));
  }
}

TEST_CASE("jacobi eigensym matches deflation oracle on random PSD") {
  Matrix g = random_psd(10, 5);
  SymmetricEigen e = jacobi_eigensym(g);
  std::vector<double> expect = oracle::psd_eigenvalues(g);
  REQUIRE(expect.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(e.values[i] == doctest::Approx(expect[i]).epsilon(1e-9));
  }

  // Reconstruction and orthonormality.
  Matrix qt_q = transpose_matmul(e.vectors, e.vectors);
  Matrix recon(10, 10);
  for (std::size_t j = 0; j < 10; ++j) {
    for (std::size_t i = 0; i < 10; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < 10; ++k) {
        s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      }
      recon(i, j) = s;
    }
  }
  CHECK(max_abs(qt_q - Matrix::identity(10)) <= 1e-10);
  CHECK(std::sqrt(frobenius_norm_sq(recon - g)) <=
        1e-9 * std::sqrt(frobenius_norm_sq(g)));
}

TEST_CASE("jacobi rejects asymmetric input") {
  Matrix m(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(jacobi_eigensym(m), ValidationError);
}

TEST_CASE("householder q has orthonormal columns") {
  Rng rng(3);
  Matrix a = random_gaussian(40, 7, rng);
  Matrix q = householder_q(a);
  CHECK(max_abs(transpose_matmul(q, q) - Matrix::identity(7)) <= 1e-12);
  // Q spans the same column space: projecting a onto Q loses nothing.
  Matrix coeff = transpose_matmul(q, a);
  Matrix recon = matmul(q, coeff);
  CHECK(std::sqrt(frobenius_norm_sq(recon - a)) <= 1e-10 * std::sqrt(frobenius_norm_sq(a)));
}

TEST_CASE("power iteration diag(5,1,1)") {
  Matrix m(3, 3);
  m(0, 0) = 5; m(1, 1) = 1; m(2, 2) = 1;
  auto apply = [&m](std::span<const double> x, std::span<double> y) {
    auto r = matvec(m, x);
    std::copy(r.begin(), r.end(), y.begin());
  };
  PowerIterationResult r = power_iteration(apply, 3, 1e-10, 10000, 1);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(5).epsilon(1e-8));
}

TEST_CASE("power iteration zero operator") {
  auto apply = [](std::span<const double>, std::span<double> y) {
    std::fill(y.begin(), y.end(), 0.0);
  };
  PowerIterationResult r = power_iteration(apply, 4, 1e-10, 100, 1);
  CHECK(r.converged);
  CHECK(r.value == 0.0);
}

TEST_CASE("power iteration matches jacobi top value on random PSD 50x50") {
  Matrix g = random_psd(50, 11);
  SymmetricEigen e = jacobi_eigensym(g);
  auto apply = [&g](std::span<const double> x, std::span<double> y) {
    auto r = matvec(g, x);
    std::copy(r.begin(), r.end(), y.begin());
  };
  PowerIterationResult r = power_iteration(apply, 50, 1e-9, 200000, 11);
  CHECK(r.converged);
  CHECK(std::abs(r.value - e.values[0]) <= 1e-6 * e.values[0]);
}

TEST_CASE("power iteration reports non-convergence") {
  Matrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 0.999999;  // tiny gap, tight tol, few iters
  auto apply = [&m](std::span<const double> x, std::span<double> y) {
    auto r = matvec(m, x);
    std::copy(r.begin(), r.end(), y.begin());
  };
  PowerIterationResult r = power_iteration(apply, 2, 1e-16, 3, 1);
  CHECK_FALSE(r.converged);
  CHECK(r.value > 0.9);  // best estimate still reported
}
