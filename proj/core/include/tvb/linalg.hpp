#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tvb/common.hpp"

namespace tvb {

// Dense column-major matrix of doubles. Columns are contiguous, which is the
// access pattern everywhere in this codebase (task vectors are columns).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n);
  static Matrix from_columns(const std::vector<std::vector<double>>& cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const {
    return {data_.data() + c * rows_, rows_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Vector helpers over std::vector<double> / std::span<const double>.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double norm_sq(std::span<const double> a);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(std::span<double> x, double alpha);

Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ · b without materializing the transpose.
Matrix transpose_matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

double frobenius_norm_sq(const Matrix& a);
double max_abs(const Matrix& a);
double trace(const Matrix& a);
bool all_finite(const Matrix& a);
bool all_finite(std::span<const double> a);

Matrix random_gaussian(std::size_t rows, std::size_t cols, Rng& rng);

// Symmetric eigendecomposition, eigenvalues in nonincreasing order with
// matching eigenvector columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
  std::size_t sweeps = 0;
};

// Cyclic Jacobi rotations. Deterministic; accuracy near machine epsilon for
// the modest sizes (T up to a few hundred) this library targets. Throws
// NumericError with the residual off-diagonal norm if max_sweeps is hit.
SymmetricEigen jacobi_eigensym(const Matrix& sym, std::size_t max_sweeps = 100);

// Thin Q (rows x cols of a) from a Householder QR of a, with the sign
// convention diag(R) >= 0 so the factorization is unique. Requires
// a.rows() >= a.cols().
Matrix householder_q(const Matrix& a);

struct PowerIterationResult {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

using MatVecFn = std::function<void(std::span<const double> x, std::span<double> y)>;

// Largest eigenvalue of a symmetric PSD operator given only its action.
// The start vector is drawn from `seed`, so runs are reproducible.
PowerIterationResult power_iteration(const MatVecFn& apply, std::size_t dim,
                                     double tol, std::size_t max_iters,
                                     std::uint64_t seed);

}  // namespace tvb
