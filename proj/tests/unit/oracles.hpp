#pragma once

// Independent oracles the tests check the library against. Everything here
// deliberately avoids the implementation paths under test: eigenvalues come
// from deflated power iteration instead of Jacobi, losses are materialized
// in the full d-dimensional space instead of Gram space, and TIES is a plain
// per-coordinate enumeration.

#include <cstdint>
#include <vector>

#include "tvb/linalg.hpp"

namespace tvb::oracle {

// Naive triple-loop Gram computation.
Matrix brute_gram(const Matrix& columns);

// All eigenvalues (descending) of a symmetric PSD matrix via power iteration
// with deflation. Slow and simple; accuracy depends on eigengaps, which the
// fixtures using it are constructed to keep healthy.
std::vector<double> psd_eigenvalues(const Matrix& sym, std::size_t max_iters = 300000,
                                    double tol = 1e-14);

// Top-M eigenvectors (columns) of a symmetric PSD matrix, same deflation
// route, re-orthogonalized.
Matrix psd_top_eigenvectors(const Matrix& sym, std::size_t m,
                            std::size_t max_iters = 300000, double tol = 1e-14);

// ‖T − T_M‖_F² where T_M is the rank-m truncation built from the deflation
// eigenvectors of the brute-force Gram. Full-space arithmetic throughout.
double svd_truncation_error(const Matrix& t, std::size_t m);

// ‖T W_e W_d − T‖_F² materialized in the full space.
double full_space_ae_loss(const Matrix& t, const Matrix& w_e, const Matrix& w_d);

// Per-coordinate TIES enumeration: trim to the top-k fraction by magnitude
// (threshold ties keep the lower index), elect the sign with larger summed
// magnitude (ties +), sum entries agreeing with it.
std::vector<double> ties_merge(const Matrix& vectors, double topk_fraction);

// Central finite differences of a scalar function of one matrix entry.
template <typename F>
double central_difference(F&& f, double& slot, double h) {
  double keep = slot;
  slot = keep + h;
  double up = f();
  slot = keep - h;
  double down = f();
  slot = keep;
  return (up - down) / (2.0 * h);
}

}  // namespace tvb::oracle
