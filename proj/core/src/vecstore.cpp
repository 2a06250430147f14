#include "tvb/vecstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"

namespace tvb {

TaskVectorMatrix TaskVectorMatrix::make(Matrix columns, std::vector<std::string> names,
                                        std::optional<std::vector<double>> theta0) {
  if (columns.cols() == 0 || columns.rows() == 0) {
    throw ValidationError("task vector matrix: empty collection");
  }
  if (names.size() != columns.cols()) {
    throw ValidationError("task vector matrix: expected " +
                          std::to_string(columns.cols()) + " names, got " +
                          std::to_string(names.size()));
  }
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) {
    throw ValidationError("task vector matrix: duplicate task names");
  }
  if (!all_finite(columns)) {
    throw ValidationError("task vector matrix: non-finite column entry");
  }
  if (theta0) {
    if (theta0->size() != columns.rows()) {
      throw ValidationError("task vector matrix: theta0 length " +
                            std::to_string(theta0->size()) + " != d " +
                            std::to_string(columns.rows()));
    }
    if (!all_finite(*theta0)) {
      throw ValidationError("task vector matrix: non-finite theta0 entry");
    }
  }
  TaskVectorMatrix m;
  m.columns = std::move(columns);
  m.names = std::move(names);
  m.theta0 = std::move(theta0);
  return m;
}

struct GramMatrix::LazyEigen {
  std::once_flag flag;
  GramEigensystem system;
  std::exception_ptr failure;
};

GramMatrix::GramMatrix(Matrix symmetric_entries)
    : entries_(std::move(symmetric_entries)), lazy_(std::make_shared<LazyEigen>()) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw ValidationError("gram matrix: entries must be square and nonempty");
  }
  for (std::size_t j = 0; j < entries_.cols(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (entries_(i, j) != entries_(j, i)) {
        throw ValidationError("gram matrix: entries not exactly symmetric at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  if (!all_finite(entries_)) throw ValidationError("gram matrix: non-finite entry");
}

const GramEigensystem& GramMatrix::eigensystem() const {
  std::call_once(lazy_->flag, [this] {
    try {
      SymmetricEigen eig = jacobi_eigensym(entries_);
      GramEigensystem sys;
      sys.raw_values = eig.values;
      sys.values = eig.values;
      sys.vectors = std::move(eig.vectors);
      double lmax = sys.values.empty() ? 0.0 : std::max(sys.values.front(), 0.0);
      for (double& v : sys.values) {
        if (v < 0.0) {
          if (v < -1e-8 * lmax) {
            throw ValidationError(
                "gram matrix: not PSD within tolerance, lambda_min = " +
                std::to_string(v) + ", lambda_max = " + std::to_string(lmax));
          }
          v = 0.0;
        }
      }
      for (double v : sys.values) {
        if (v > 1e-12 * lmax) ++sys.rank;
      }
      lazy_->system = std::move(sys);
    } catch (...) {
      lazy_->failure = std::current_exception();
    }
  });
  if (lazy_->failure) std::rethrow_exception(lazy_->failure);
  return lazy_->system;
}

const GramEigensystem& eigensym(const GramMatrix& g) { return g.eigensystem(); }

GramMatrix gram_columns(const Matrix& columns) {
  const std::size_t t = columns.cols();
  if (t == 0) throw ValidationError("gram: no columns");
  Matrix g(t, t);
  // One dot product per (i <= j) pair; pairs fan out across threads and each
  // writes disjoint entries, so results are identical for any thread count.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(t * (t + 1) / 2);
  for (std::size_t j = 0; j < t; ++j)
    for (std::size_t i = 0; i <= j; ++i) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t k) {
    auto [i, j] = pairs[k];
    double v = dot(columns.col(i), columns.col(j));
    g(i, j) = v;
    g(j, i) = v;
  });
  return GramMatrix(std::move(g));
}

GramMatrix gram(const TaskVectorMatrix& m) { return gram_columns(m.columns); }

SpectralBound spectral_bounds(const GramMatrix& g, std::size_t m) {
  if (m < 1 || m > g.size()) {
    throw ValidationError("spectral_bounds: rank budget " + std::to_string(m) +
                          " out of range [1, " + std::to_string(g.size()) + "]");
  }
  const GramEigensystem& sys = g.eigensystem();
  SpectralBound b;
  b.rank_budget = m;
  b.rank = sys.rank;
  for (std::size_t i = m; i < sys.rank; ++i) b.frobenius_lb += sys.values[i];
  b.spectral_lb = m < sys.rank ? sys.values[m] : 0.0;
  return b;
}

PowerIterationResult power_iteration_top_eigenvalue(const MatVecFn& apply,
                                                    std::size_t dim, double tol,
                                                    std::size_t max_iters,
                                                    std::uint64_t seed) {
  return power_iteration(apply, dim, tol, max_iters, seed);
}

Matrix random_orthonormal(std::size_t d, std::size_t m, std::uint64_t seed) {
  if (m > d) {
    throw ValidationError("random_orthonormal: m " + std::to_string(m) +
                          " exceeds d " + std::to_string(d));
  }
  if (m == 0) throw ValidationError("random_orthonormal: m must be positive");
  Rng rng(seed);
  Matrix g = random_gaussian(d, m, rng);
  return householder_q(g);
}

// ---------------------------------------------------------------------------
// TVB1 container
// ---------------------------------------------------------------------------

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace detail

namespace {
constexpr char kMagic[4] = {'T', 'V', 'B', '1'};
}

TaskVectorMatrix load_collection(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> raw = detail::read_file(path);
  const std::string origin = path.filename().string();
  detail::ByteReader r(raw, origin);

  r.require(4, "magic");
  if (std::memcmp(raw.data(), kMagic, 4) != 0) {
    throw FormatError(origin + ": bad magic, expected TVB1", 0);
  }
  r.bytes(4, "magic");

  std::uint64_t width_off = r.offset();
  std::uint8_t width_flag = r.u8("float width flag");
  if (width_flag != 4 && width_flag != 8) {
    throw FormatError(origin + ": float width flag must be 4 or 8, got " +
                      std::to_string(width_flag), width_off);
  }
  FloatWidth width = width_flag == 4 ? FloatWidth::f32 : FloatWidth::f64;

  std::uint64_t d_off = r.offset();
  std::uint32_t d = r.u32("dimension d");
  std::uint64_t t_off = r.offset();
  std::uint32_t t = r.u32("task count T");
  if (d == 0) throw FormatError(origin + ": dimension d is zero", d_off);
  if (t == 0) throw FormatError(origin + ": empty collection (T = 0)", t_off);

  std::uint8_t has_theta0 = r.u8("theta0 flag");
  if (has_theta0 > 1) {
    throw FormatError(origin + ": theta0 flag must be 0 or 1", r.offset() - 1);
  }

  std::optional<std::vector<double>> theta0;
  if (has_theta0) {
    std::vector<double> v(d);
    for (std::uint32_t i = 0; i < d; ++i) {
      std::uint64_t off = r.offset();
      v[i] = r.scalar(width, "theta0 payload");
      if (!std::isfinite(v[i])) {
        throw FormatError(origin + ": non-finite theta0 entry " + std::to_string(i), off);
      }
    }
    theta0 = std::move(v);
  }

  Matrix cols(d, t);
  for (std::uint32_t c = 0; c < t; ++c) {
    auto out = cols.col(c);
    for (std::uint32_t i = 0; i < d; ++i) {
      std::uint64_t off = r.offset();
      out[i] = r.scalar(width, "column payload");
      if (!std::isfinite(out[i])) {
        throw FormatError(origin + ": non-finite entry in column " + std::to_string(c) +
                          " row " + std::to_string(i), off);
      }
    }
  }

  std::uint64_t meta_off = r.offset();
  std::uint32_t meta_len = r.u32("metadata length");
  std::string meta_text = r.bytes(meta_len, "metadata JSON");
  if (!r.exhausted()) {
    throw FormatError(origin + ": trailing bytes after metadata block", r.offset());
  }

  std::vector<std::string> names;
  nlohmann::json meta = nlohmann::json::parse(meta_text, nullptr, false);
  if (meta.is_discarded()) {
    throw FormatError(origin + ": metadata block is not valid JSON", meta_off);
  }
  if (meta.contains("names")) {
    if (!meta["names"].is_array() || meta["names"].size() != t) {
      throw FormatError(origin + ": metadata lists " +
                        std::to_string(meta["names"].size()) + " names for " +
                        std::to_string(t) + " columns", meta_off);
    }
    for (const auto& n : meta["names"]) names.push_back(n.get<std::string>());
  } else {
    for (std::uint32_t i = 0; i < t; ++i) names.push_back("task_" + std::to_string(i));
  }

  try {
    return TaskVectorMatrix::make(std::move(cols), std::move(names), std::move(theta0));
  } catch (const ValidationError& e) {
    throw FormatError(origin + ": " + e.what(), meta_off);
  }
}

void save_collection(const TaskVectorMatrix& m, const std::filesystem::path& path,
                     FloatWidth width) {
  detail::ByteWriter w;
  w.raw(std::string(kMagic, 4));
  w.u8(static_cast<std::uint8_t>(width));
  w.u32(static_cast<std::uint32_t>(m.dim()));
  w.u32(static_cast<std::uint32_t>(m.count()));
  w.u8(m.theta0 ? 1 : 0);
  if (m.theta0) {
    for (double x : *m.theta0) w.scalar(x, width);
  }
  for (std::size_t c = 0; c < m.count(); ++c) {
    for (double x : m.columns.col(c)) w.scalar(x, width);
  }
  nlohmann::json meta;
  meta["names"] = m.names;
  meta["provenance"] = "tvb";
  std::string meta_text = meta.dump();
  w.u32(static_cast<std::uint32_t>(meta_text.size()));
  w.raw(meta_text);
  detail::write_file(path, w.bytes());
}

}  // namespace tvb
