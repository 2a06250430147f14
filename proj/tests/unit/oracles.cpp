#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tvb::oracle {

Matrix brute_gram(const Matrix& columns) {
  const std::size_t t = columns.cols();
  const std::size_t d = columns.rows();
  Matrix g(t, t);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += columns(k, i) * columns(k, j);
      g(i, j) = s;
    }
  }
  return g;
}

namespace {

struct TopPair {
  double value;
  std::vector<double> vector;
};

TopPair deflated_top(Matrix& a, std::size_t max_iters, double tol, std::uint64_t seed) {
  const std::size_t n = a.rows();
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  double nv = norm(v);
  for (double& x : v) x /= nv;

  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<double> w = matvec(a, v);
    double wn = norm(w);
    if (wn == 0.0) return {0.0, v};
    for (std::size_t i = 0; i < n; ++i) w[i] /= wn;
    double next = dot(w, matvec(a, w));
    bool done = it > 0 && std::abs(next - lambda) <= tol * std::max(std::abs(next), 1.0);
    v = std::move(w);
    lambda = next;
    if (done) break;
  }
  return {lambda, v};
}

}  // namespace

std::vector<double> psd_eigenvalues(const Matrix& sym, std::size_t max_iters, double tol) {
  Matrix a = sym;
  const std::size_t n = a.rows();
  std::vector<double> values;
  for (std::size_t k = 0; k < n; ++k) {
    TopPair top = deflated_top(a, max_iters, tol, 1000 + k);
    values.push_back(top.value);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        a(i, j) -= top.value * top.vector[i] * top.vector[j];
      }
    }
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

Matrix psd_top_eigenvectors(const Matrix& sym, std::size_t m, std::size_t max_iters,
                            double tol) {
  Matrix a = sym;
  const std::size_t n = a.rows();
  Matrix vectors(n, m);
  for (std::size_t k = 0; k < m; ++k) {
    TopPair top = deflated_top(a, max_iters, tol, 2000 + k);
    // Re-orthogonalize against earlier vectors before storing.
    std::vector<double> v = top.vector;
    for (std::size_t p = 0; p < k; ++p) {
      axpy(-dot(vectors.col(p), v), vectors.col(p), v);
    }
    double nv = norm(v);
    if (nv == 0.0) throw std::runtime_error("oracle eigenvectors: degenerate deflation");
    for (double& x : v) x /= nv;
    std::copy(v.begin(), v.end(), vectors.col(k).begin());
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        a(i, j) -= top.value * v[i] * v[j];
      }
    }
  }
  return vectors;
}

double svd_truncation_error(const Matrix& t, std::size_t m) {
  Matrix g = brute_gram(t);
  Matrix v = psd_top_eigenvectors(g, m);
  // T_M = T V Vᵀ; residual measured entry by entry.
  Matrix coeff = transpose_matmul(v, transpose(t));  // m x d: Vᵀ Tᵀ
  double err = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double recon = 0.0;
      for (std::size_t k = 0; k < m; ++k) recon += v(c, k) * coeff(k, r);
      double e = t(r, c) - recon;
      err += e * e;
    }
  }
  return err;
}

double full_space_ae_loss(const Matrix& t, const Matrix& w_e, const Matrix& w_d) {
  Matrix recon = matmul(matmul(t, w_e), w_d);
  double s = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double e = recon(r, c) - t(r, c);
      s += e * e;
    }
  }
  return s;
}

std::vector<double> ties_merge(const Matrix& vectors, double topk_fraction) {
  const std::size_t d = vectors.rows();
  const std::size_t k = vectors.cols();
  const auto keep = static_cast<std::size_t>(
      std::llround(topk_fraction * static_cast<double>(d)));

  // Trim.
  Matrix trimmed(d, k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      double mx = std::abs(vectors(x, c));
      double my = std::abs(vectors(y, c));
      if (mx != my) return mx > my;
      return x < y;
    });
    for (std::size_t i = 0; i < keep && i < d; ++i) {
      trimmed(order[i], c) = vectors(order[i], c);
    }
  }

  // Elect and merge, coordinate by coordinate.
  std::vector<double> merged(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double pos = 0.0;
    double neg = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double v = trimmed(r, c);
      if (v > 0.0) pos += v;
      if (v < 0.0) neg += -v;
    }
    const bool plus = pos >= neg;
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double v = trimmed(r, c);
      if ((plus && v > 0.0) || (!plus && v < 0.0)) s += v;
    }
    merged[r] = s;
  }
  return merged;
}

}  // namespace tvb::oracle
