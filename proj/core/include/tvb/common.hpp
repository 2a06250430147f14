#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace tvb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: shape mismatches, out-of-range arguments, invariant violations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk payload. Carries the byte offset where parsing gave up.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t byte_offset);
  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical failure at runtime: divergence, non-convergence, non-finite intermediates.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Deterministic random source. std::mt19937_64 has a standardized output
// sequence, but the std distributions do not, so all draws are derived here
// from raw engine words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // One Box-Muller draw per call; consumes two engine words.
  double normal();

  // Unbiased integer in [0, n). n must be nonzero.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

// Worker count for internal parallel loops: TVB_THREADS if set (>=1),
// otherwise hardware concurrency.
std::size_t thread_budget();

// Runs fn(i) for i in [0, n) across at most thread_budget() threads with a
// static block partition. Each index must write only its own outputs; the
// result is then identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tvb
