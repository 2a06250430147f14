#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvb/arithmetic.hpp"
#include "tvb/bases.hpp"

namespace tvb {

enum class CompactionMethod : std::uint8_t { ae = 0, rand_select = 1 };

std::string to_string(CompactionMethod m);
CompactionMethod compaction_method_from_string(const std::string& s);

struct OnlineConfig {
  std::size_t budget = 4;  // M
  // Online merging fixes the scale instead of grid-searching; callers set a
  // singleton alpha grid (0.3 is the documented TA default).
  MergeSpec merge_spec;
  CompactionMethod compaction = CompactionMethod::ae;
  // Compaction reuses the AE defaults with fewer steps, since it runs every
  // step at steady state.
  AeConfig ae;
  std::uint64_t seed = 0;

  OnlineConfig() { ae.steps = 1000; }

  void validate() const;
};

// Buffer of at most `budget` vectors (raw task vectors and compacted bases
// mixed). step counts received vectors.
struct BufferState {
  OnlineConfig config;
  std::vector<double> theta0;
  Matrix stored;  // d x k, k <= budget
  std::vector<std::string> labels;
  std::size_t step = 0;
  std::size_t compaction_count = 0;
  std::size_t ae_fallback_count = 0;
  nlohmann::json history = nlohmann::json::array();

  std::size_t size() const { return stored.cols(); }
};

BufferState make_buffer(OnlineConfig config, std::vector<double> theta0);

struct OnlineStepResult {
  MergedModel merged;
  bool compacted = false;
  bool ae_fallback = false;
  double compaction_seconds = 0.0;
  double merge_seconds = 0.0;
};

// One Algorithm-1 step: append when below budget, otherwise compact the full
// buffer to budget−1 columns (AE train, or a uniformly random drop) and then
// append; finally merge the buffer through config.merge_spec.
OnlineStepResult online_step(BufferState& state, std::span<const double> tau,
                             const std::string& label, const LossFn& evaluator);

// Score of a candidate theta on one stream task; lower is better.
using TaskScoreFn =
    std::function<double(std::size_t task_index, std::span<const double> theta)>;

struct StreamStep {
  std::size_t step = 0;
  std::size_t buffer_size = 0;
  bool compacted = false;
  bool ae_fallback = false;
  double compaction_seconds = 0.0;
  double merge_seconds = 0.0;
  std::vector<double> theta;   // merged model at this step
  std::vector<double> scores;  // tasks 0..step-1 at the merged model
  double mean_score = 0.0;
  std::vector<std::string> buffer_labels;
};

struct StreamReport {
  std::vector<StreamStep> steps;
  std::vector<double> final_theta;
  std::size_t compaction_count = 0;
  std::size_t ae_fallback_count = 0;
};

// Feeds the ordered stream through online_step, scoring every seen task at
// every step. The per-step merge evaluator is the mean scorer over seen
// tasks.
StreamReport run_stream(const Matrix& stream, const std::vector<std::string>& names,
                        std::span<const double> theta0, const OnlineConfig& config,
                        const TaskScoreFn& scorer);

}  // namespace tvb
