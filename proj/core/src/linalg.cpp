#include "tvb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tvb {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_columns(const std::vector<std::vector<double>>& cols) {
  if (cols.empty()) return {};
  Matrix m(cols.front().size(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].size() != m.rows()) {
      throw ValidationError("from_columns: ragged column lengths");
    }
    std::copy(cols[c].begin(), cols[c].end(), m.col(c).begin());
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(std::span<const double> a) { return dot(a, a); }
double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ValidationError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(std::span<double> x, double alpha) {
  for (double& v : x) v *= alpha;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto out = c.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double bkj = b(k, j);
      if (bkj == 0.0) continue;
      axpy(bkj, a.col(k), out);
    }
  }
  return c;
}

Matrix transpose_matmul(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ValidationError("transpose_matmul: row mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      c(i, j) = dot(a.col(i), b.col(j));
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t c = 0; c < a.cols(); ++c)
    for (std::size_t r = 0; r < a.rows(); ++r) t(c, r) = a(r, c);
  return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("matrix add: shape mismatch");
  Matrix c = a;
  for (std::size_t j = 0; j < b.cols(); ++j) axpy(1.0, b.col(j), c.col(j));
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("matrix sub: shape mismatch");
  Matrix c = a;
  for (std::size_t j = 0; j < b.cols(); ++j) axpy(-1.0, b.col(j), c.col(j));
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (std::size_t j = 0; j < c.cols(); ++j) scale(c.col(j), s);
  return c;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ValidationError("matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t c = 0; c < a.cols(); ++c) axpy(x[c], a.col(c), y);
  return y;
}

double frobenius_norm_sq(const Matrix& a) {
  double s = 0.0;
  const double* p = a.data();
  for (std::size_t i = 0, n = a.rows() * a.cols(); i < n; ++i) s += p[i] * p[i];
  return s;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  const double* p = a.data();
  for (std::size_t i = 0, n = a.rows() * a.cols(); i < n; ++i)
    m = std::max(m, std::abs(p[i]));
  return m;
}

double trace(const Matrix& a) {
  std::size_t n = std::min(a.rows(), a.cols());
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) t += a(i, i);
  return t;
}

bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

bool all_finite(const Matrix& a) {
  return all_finite(std::span<const double>(a.data(), a.rows() * a.cols()));
}

Matrix random_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  double* p = m.data();
  for (std::size_t i = 0, n = rows * cols; i < n; ++i) p[i] = rng.normal();
  return m;
}

namespace {

double offdiag_norm_sq(const Matrix& a) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) s += 2.0 * a(i, j) * a(i, j);
  return s;
}

}  // namespace

SymmetricEigen jacobi_eigensym(const Matrix& sym, std::size_t max_sweeps) {
  const std::size_t n = sym.rows();
  if (n != sym.cols()) throw ValidationError("jacobi_eigensym: matrix not square");
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i)
      if (sym(i, j) != sym(j, i))
        throw ValidationError("jacobi_eigensym: matrix not symmetric");

  Matrix a = sym;
  Matrix q = Matrix::identity(n);
  const double total = std::sqrt(frobenius_norm_sq(a));
  const double stop = total > 0.0 ? 1e-15 * total : 0.0;

  std::size_t sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = std::sqrt(offdiag_norm_sq(a));
    if (off <= stop) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        double apr = a(p, r);
        if (apr == 0.0) continue;
        double app = a(p, p);
        double arr = a(r, r);
        // Rotation angle from the standard symmetric Schur decomposition.
        double theta = (arr - app) / (2.0 * apr);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p);
          double akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k);
          double ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        // Rotations do not preserve symmetry bit-exactly; re-mirror the pair.
        a(p, r) = a(r, p) = 0.5 * (a(p, r) + a(r, p));
        for (std::size_t k = 0; k < n; ++k) {
          double qkp = q(k, p);
          double qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
    }
  }
  if (sweep == max_sweeps) {
    throw NumericError("jacobi_eigensym: no convergence after " +
                       std::to_string(max_sweeps) + " sweeps, off-diagonal 2-norm " +
                       std::to_string(std::sqrt(offdiag_norm_sq(a))));
  }

  SymmetricEigen out;
  out.sweeps = sweep;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    auto src = q.col(order[j]);
    std::copy(src.begin(), src.end(), out.vectors.col(j).begin());
  }
  return out;
}

Matrix householder_q(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (n > m) throw ValidationError("householder_q: more columns than rows");

  Matrix r = a;
  // Householder vectors, stored per column.
  std::vector<std::vector<double>> vs(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(m - k);
    double xnorm = 0.0;
    for (std::size_t i = k; i < m; ++i) {
      v[i - k] = r(i, k);
      xnorm += r(i, k) * r(i, k);
    }
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) {
      throw NumericError("householder_q: rank-deficient input at column " +
                         std::to_string(k));
    }
    double alpha = v[0] >= 0.0 ? -xnorm : xnorm;
    v[0] -= alpha;
    double vnorm_sq = 0.0;
    for (double x : v) vnorm_sq += x * x;
    if (vnorm_sq > 0.0) {
      for (std::size_t j = k; j < n; ++j) {
        double proj = 0.0;
        for (std::size_t i = k; i < m; ++i) proj += v[i - k] * r(i, j);
        proj *= 2.0 / vnorm_sq;
        for (std::size_t i = k; i < m; ++i) r(i, j) -= proj * v[i - k];
      }
    }
    vs[k] = std::move(v);
  }

  // Accumulate thin Q by applying the reflectors to the first n identity
  // columns in reverse order.
  Matrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    const auto& v = vs[k];
    double vnorm_sq = 0.0;
    for (double x : v) vnorm_sq += x * x;
    if (vnorm_sq == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < m; ++i) proj += v[i - k] * q(i, j);
      proj *= 2.0 / vnorm_sq;
      for (std::size_t i = k; i < m; ++i) q(i, j) -= proj * v[i - k];
    }
  }
  // diag(R) >= 0 convention: flip columns where the pivot came out negative.
  for (std::size_t k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) scale(q.col(k), -1.0);
  }
  return q;
}

PowerIterationResult power_iteration(const MatVecFn& apply, std::size_t dim,
                                     double tol, std::size_t max_iters,
                                     std::uint64_t seed) {
  if (dim == 0) throw ValidationError("power_iteration: zero dimension");
  Rng rng(seed);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  double vn = norm(v);
  if (vn == 0.0) v[0] = 1.0, vn = 1.0;
  scale(v, 1.0 / vn);

  std::vector<double> w(dim, 0.0);
  PowerIterationResult res;
  double prev = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    apply(v, w);
    double lambda = dot(v, w);  // Rayleigh quotient; w = A v
    double wn = norm(w);
    res.iterations = it;
    if (wn == 0.0) {
      // Operator annihilates the iterate: top eigenvalue 0 for PSD input.
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
    res.value = lambda;
    if (it > 1 && std::abs(lambda - prev) <= tol * std::max(std::abs(lambda), 1e-300)) {
      res.converged = true;
      return res;
    }
    prev = lambda;
  }
  res.converged = false;
  return res;
}

}  // namespace tvb
