#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvb/arithmetic.hpp"
#include "tvb/bases.hpp"
#include "tvb/vecstore.hpp"

namespace tvb {

// PSD operator H = diag(diagonal) + lowrank · lowrankᵀ. Diagonal-only specs
// know their spectral norm exactly; the low-rank part keeps power iteration
// honest on larger instances.
struct HessianSpec {
  std::vector<double> diagonal;
  Matrix lowrank;  // d x r, may be empty

  std::size_t dim() const { return diagonal.size(); }
  void apply(std::span<const double> x, std::span<double> y) const;
  double quadratic(std::span<const double> delta) const;  // deltaᵀ H delta
  // Exact max diagonal entry when no low-rank part; tight power iteration
  // otherwise.
  double operator_norm() const;
  void validate() const;
};

// Analytic task: L(theta) = 1/2 (theta − minimizer)ᵀ H (theta − minimizer).
struct QuadraticTask {
  std::string name;
  std::vector<double> minimizer;
  HessianSpec hessian;

  double loss(std::span<const double> theta) const;
  std::vector<double> gradient(std::span<const double> theta) const;
  double smoothness() const { return hessian.operator_norm(); }
};

struct QuadraticTaskSuite {
  std::vector<double> theta0;
  std::vector<QuadraticTask> tasks;
  std::optional<QuadraticTask> target;  // planted OOD target
  std::string profile_tag;
  std::uint64_t seed = 0;

  std::size_t dim() const { return theta0.size(); }
  std::size_t count() const { return tasks.size(); }

  std::vector<double> task_vector(std::size_t i) const;  // minimizer_i − theta0
  TaskVectorMatrix task_matrix() const;

  TaskObjective objective(std::size_t i) const;
  std::vector<TaskObjective> objectives() const;
  // Mean loss across all tasks (or a subset), as a merge evaluator.
  LossFn mean_loss() const;
  LossFn mean_loss_over(std::vector<std::size_t> task_indices) const;
};

struct SuiteProfile {
  enum class Kind { orthogonal, clustered, planted_target };
  Kind kind = Kind::orthogonal;
  // clustered
  std::size_t clusters = 2;
  double cos_in = 0.9;
  double cos_out = 0.0;
  // planted_target
  double gamma = 0.8;

  std::string tag() const;
};

// Task vectors realize the requested pairwise-cosine structure exactly (the
// Gram target is factored and embedded with a random orthonormal frame);
// Hessians are diagonal with spectral norm drawn in [0.5, 2]. Throws
// ValidationError when the cosine structure is not PSD.
QuadraticTaskSuite generate_suite(const SuiteProfile& profile, std::size_t d,
                                  std::size_t t, std::pair<double, double> norm_range,
                                  std::uint64_t seed);

struct TheoryConstants {
  double c = 0.0;                   // max squared task-vector norm
  double epsilon = 0.0;             // max pairwise |cosine|
  std::vector<double> smoothness;   // per-task, via power iteration
  std::optional<double> gamma;      // best target alignment / C, when positive
  std::optional<double> rho;        // encoder coverage of the best-aligned task
};

TheoryConstants measure_constants(const QuadraticTaskSuite& suite,
                                  const QuadraticTask* target = nullptr,
                                  const BasisModel* basis = nullptr);

struct BoundRecord {
  std::string task;
  double gap = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool pass = false;
};

struct BoundReport {
  std::string theorem;
  bool applicable = true;  // premises held
  bool all_pass = true;
  std::vector<BoundRecord> records;
  nlohmann::json details = nlohmann::json::object();
};

// Addition bound L_i C (1 + eps) for theta0 + sum alpha_i tau_i (raw) or
// theta0 + sum alpha_m B_m (basis; the same bound through phi = W_e alpha).
// alpha must lie on the simplex within 1e-9.
BoundReport verify_addition_bound(const QuadraticTaskSuite& suite,
                                  std::span<const double> alpha,
                                  const BasisModel* basis = nullptr);

// OOD bound L_tar C (1 − gamma) for the best-aligned source pick, or
// L_tar C (1 − rho gamma) through the basis coverage construction.
BoundReport verify_ood_bound(const QuadraticTaskSuite& suite,
                             const QuadraticTask& target,
                             const BasisModel* basis = nullptr);

// Negation control bounds: raw L_k C (3/2 + eps); basis general variant adds
// L_k ‖e_j‖² on top of L_k C (5/2 + 2 eps), and the spectral variant replaces
// ‖e_j‖² with lambda_{M+1}(G) (checked only when the fit reached the
// Frobenius lower bound; see details).
BoundReport verify_negation_bound(const QuadraticTaskSuite& suite, std::size_t j,
                                  double alpha_j, const BasisModel* basis = nullptr);

// Suite serialization: <prefix>.tvb holds theta0 + task vectors, and
// <prefix>.json the Hessian descriptors, profile metadata, and the optional
// planted target.
void save_suite(const QuadraticTaskSuite& suite, const std::filesystem::path& prefix);
QuadraticTaskSuite load_suite(const std::filesystem::path& prefix);

}  // namespace tvb
