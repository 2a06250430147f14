#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvb/linalg.hpp"

namespace tvb {

// Column collection of task vectors: column i is task vector i, with an
// optional reference point theta0 the vectors are offsets from. Immutable
// after construction; validated by make().
struct TaskVectorMatrix {
  Matrix columns;                             // d x T
  std::vector<std::string> names;             // T unique labels
  std::optional<std::vector<double>> theta0;  // reference point, length d

  std::size_t dim() const { return columns.rows(); }
  std::size_t count() const { return columns.cols(); }

  // Validates shapes, finiteness, name uniqueness. Throws ValidationError.
  static TaskVectorMatrix make(Matrix columns, std::vector<std::string> names,
                               std::optional<std::vector<double>> theta0 = std::nullopt);
};

// Eigensystem of a Gram matrix. `values` are clamped (negatives within the
// PSD tolerance set to zero) and nonincreasing; `raw_values` keep the solver
// output. `rank` counts values above 1e-12 * lambda_max.
struct GramEigensystem {
  std::vector<double> values;
  std::vector<double> raw_values;
  Matrix vectors;
  std::size_t rank = 0;
};

// T x T matrix of pairwise inner products. Entries are exactly symmetric
// (computed once and mirrored). The eigensystem is computed lazily and
// shared; all observable state is immutable.
class GramMatrix {
 public:
  explicit GramMatrix(Matrix symmetric_entries);

  std::size_t size() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }

  // Lazily computed, thread-safe, cached. Throws ValidationError if the
  // matrix is not PSD within tolerance (lambda_min < -1e-8 * lambda_max).
  const GramEigensystem& eigensystem() const;

 private:
  struct LazyEigen;
  Matrix entries_;
  std::shared_ptr<LazyEigen> lazy_;
};

// Rank-M reconstruction error optima of the underlying d x T matrix, in
// squared Frobenius and squared spectral norm.
struct SpectralBound {
  std::size_t rank_budget = 0;  // M
  double frobenius_lb = 0.0;    // sum of eigenvalues M+1..r
  double spectral_lb = 0.0;     // eigenvalue M+1
  std::size_t rank = 0;         // numerical rank r
};

enum class FloatWidth : std::uint8_t { f32 = 4, f64 = 8 };

// TVB1 binary container (little-endian):
//   magic "TVB1", u8 float width (4|8), u32 d, u32 T, u8 has-theta0,
//   optional theta0 (d scalars), T columns of d scalars (column-major),
//   u32 metadata length, UTF-8 JSON metadata ({"names": [...], ...}).
TaskVectorMatrix load_collection(const std::filesystem::path& path);
void save_collection(const TaskVectorMatrix& m, const std::filesystem::path& path,
                     FloatWidth width = FloatWidth::f64);

GramMatrix gram(const TaskVectorMatrix& m);

// Gram of an arbitrary column set (used internally for centered PCA and
// online buffers). Same pairwise computation and determinism as gram().
GramMatrix gram_columns(const Matrix& columns);

// Eigenvalues (clamped, nonincreasing) and orthonormal eigenvectors.
const GramEigensystem& eigensym(const GramMatrix& g);

// Requires 1 <= m <= T.
SpectralBound spectral_bounds(const GramMatrix& g, std::size_t m);

// Top eigenvalue of a symmetric PSD operator from its action; see
// power_iteration in linalg.hpp.
PowerIterationResult power_iteration_top_eigenvalue(const MatVecFn& apply,
                                                    std::size_t dim, double tol,
                                                    std::size_t max_iters,
                                                    std::uint64_t seed = 0);

// d x m matrix with orthonormal columns from a QR factorization of a seeded
// Gaussian draw. Requires m <= d.
Matrix random_orthonormal(std::size_t d, std::size_t m, std::uint64_t seed);

}  // namespace tvb
