#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvb/bases.hpp"
#include "tvb/vecstore.hpp"

namespace tvb {

// Scores a full parameter vector; lower is better. Must be pure and
// thread-safe: grid candidates may be evaluated concurrently.
using LossFn = std::function<double(std::span<const double>)>;

// Per-task loss with an exact gradient, the oracle mask training consumes.
struct TaskObjective {
  LossFn loss;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

enum class MergeMethod : std::uint8_t { ta = 0, ties = 1, lns = 2 };

std::string to_string(MergeMethod m);
MergeMethod merge_method_from_string(const std::string& s);

struct LnsConfig {
  double sigmoid_bias = 5.0;
  double l1_strength = 1.0;
  double lr = 1e-7;
  std::size_t epochs = 10;
  double binarize_threshold = 0.5;
};

struct MergeSpec {
  MergeMethod method = MergeMethod::ta;
  std::vector<double> alpha_grid;
  double ties_topk_fraction = 0.2;
  LnsConfig lns;
  std::uint64_t seed = 0;

  void validate() const;
};

// start:stop inclusive with `count` evenly spaced points.
std::vector<double> make_alpha_grid(double start, double stop, std::size_t count);

// Uniform view of "things to merge": either raw task vectors (encoder is the
// identity, the M = T case) or a fitted basis (encoder = W_e; empty for
// rand_proj). theta0 defaults to zero when the source carries none.
struct MergeInput {
  Matrix vectors;                         // d x K columns to combine
  std::vector<double> theta0;             // length d
  Matrix encoder;                         // T x K, may be empty
  std::vector<std::string> vector_names;  // K labels
  std::vector<std::string> task_names;    // T labels
  bool theta0_known = true;
};

MergeInput make_merge_input(const TaskVectorMatrix& m);
MergeInput make_merge_input(const BasisModel& model, std::span<const double> theta0);

struct MergedModel {
  std::vector<double> theta;
  nlohmann::json provenance;
  std::vector<std::string> inputs_used;
};

struct MaskSet {
  Matrix logits;                                 // d x K mask logits S_m
  std::vector<std::vector<std::uint8_t>> masks;  // binarized, one per column
  std::vector<double> sparsity;                  // fraction of ones per mask
};

// theta = theta0 + alpha* sum of columns, alpha* the grid argmin of the
// evaluator; ties resolve toward smaller alpha.
MergedModel merge_ta(const MergeInput& input, const LossFn& evaluator,
                     const MergeSpec& spec);

// Per coordinate: trim each column to its top-k fraction by magnitude (ties
// at the threshold keep the lower index), elect the sign with larger summed
// magnitude (ties elect +), sum the kept entries that agree with it.
std::vector<double> trim_elect_merge(const Matrix& vectors, double topk_fraction);

MergedModel merge_ties(const MergeInput& input, const LossFn& evaluator,
                       const MergeSpec& spec);

// Weighted Localize-and-Stitch: per basis column m, minimizes
//   sum_i W_e[i,m] L_i(theta0 + sigmoid(S) ⊙ B_m) + l1 * ‖sigmoid(S)‖₁
// by gradient descent from constant logits, binarizes, and stitches with a
// mean rule on coordinates claimed by several masks. `objectives` must have
// one entry per task (row of the encoder).
std::pair<MergedModel, MaskSet> merge_lns(const MergeInput& input,
                                          std::span<const TaskObjective> objectives,
                                          const MergeSpec& spec);

// T̂ = mu 1ᵀ + B W_d. Throws when the model carries no decoder.
TaskVectorMatrix reconstruct(const BasisModel& model);

// theta0 − alpha* τ̂_j where alpha* is the feasible grid point with the most
// target forgetting. Feasibility: control loss at the candidate stays within
// control_loss(theta0) / control_floor (a loss may grow by at most 1/floor).
// If no grid point is feasible, alpha = 0 is returned and flagged.
MergedModel negate(const Matrix& task_vectors, std::span<const double> theta0,
                   std::size_t task_index, const LossFn& target_loss,
                   const LossFn& control_loss, std::span<const double> alpha_grid,
                   double control_floor,
                   const std::vector<std::string>& names = {});

enum class OodMode : std::uint8_t { best_aligned = 0, grid = 1 };

// Constructive out-of-distribution merge. Raw sources: picks the task vector
// best aligned with the target and returns theta0 + that vector. Basis
// sources: picks the best-aligned source through the reconstruction, then
// the basis carrying the most encoder weight for it (rand_proj falls back to
// direct basis alignment). grid mode additionally scales the pick by the
// grid argmin of `evaluator` (or of distance to the target when null).
MergedModel ood_merge(const TaskVectorMatrix& sources, std::span<const double> target,
                      OodMode mode, std::span<const double> alpha_grid = {},
                      const LossFn* evaluator = nullptr);
MergedModel ood_merge(const BasisModel& model, std::span<const double> theta0,
                      std::span<const double> target, OodMode mode,
                      std::span<const double> alpha_grid = {},
                      const LossFn* evaluator = nullptr);

// Validation subsampling counts: count_i = round(n_i * M / T), floored at 1
// for nonempty tasks, with deterministic per-seed index sets.
struct SubsamplePlan {
  std::vector<std::size_t> counts;
  std::vector<std::vector<std::size_t>> indices;
};

SubsamplePlan subsample_plan(std::span<const std::size_t> n_per_task, std::size_t m,
                             std::size_t t, std::uint64_t seed);

}  // namespace tvb
