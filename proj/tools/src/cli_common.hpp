#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tvb/arithmetic.hpp"
#include "tvb/bases.hpp"
#include "tvb/testbed.hpp"

namespace tvbcli {

// Exit-code contract: 0 success, 2 validation error, 3 theorem-check
// failure, 4 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitTheoremFailure = 3;
inline constexpr int kExitIo = 4;

// Thrown by verify when a check fails; run() maps it to exit 3.
class TheoremFailure : public tvb::Error {
 public:
  using tvb::Error::Error;
};

// "start:stop:count" or a single scalar.
std::vector<double> parse_alpha_grid(const std::string& text);

// "period:factor", e.g. "500:0.8".
tvb::AnnealSchedule parse_anneal(const std::string& text);

// Writes `report` plus a timestamp field (the one field excluded from
// determinism comparisons) as pretty JSON.
void write_report(const std::filesystem::path& path, nlohmann::json report);

nlohmann::json load_json_file(const std::filesystem::path& path);

// Accepts either a bare resolved-config object or a full report that carries
// one under "resolved_config".
nlohmann::json load_resolved_config(const std::filesystem::path& path);

// Pulls `key` from cfg into `value` unless the flag was given on the command
// line (command-line wins; config fills the rest).
template <typename T>
void merge_config_value(const CLI::App& cmd, const std::string& flag,
                        const nlohmann::json& cfg, const char* key, T& value) {
  if (cmd.count(flag) == 0 && cfg.contains(key)) {
    value = cfg.at(key).get<T>();
  }
}

// Exports a merged model as a single-column TVB1 file plus a provenance
// sidecar at <path>.provenance.json.
void export_merged(const tvb::MergedModel& merged, const std::filesystem::path& path);

// Bit-packed masks (row-major within each mask, LSB first) plus a JSON
// sparsity report at <path>.json.
void export_masks(const tvb::MaskSet& masks, const std::filesystem::path& path);

struct MergeSource {
  tvb::MergeInput input;
  std::string kind;  // "model" or "matrix"
  std::optional<tvb::BasisModel> model;
  std::optional<tvb::TaskVectorMatrix> matrix;
};

// Loads --model or --input (exactly one) against a suite's theta0 and task
// names, validating dimensions.
MergeSource load_merge_source(const std::string& model_path,
                              const std::string& matrix_path,
                              const tvb::QuadraticTaskSuite& suite);

std::string csv_double(double v);

}  // namespace tvbcli
