#include "cli_common.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace tvbcli {

using tvb::ValidationError;

std::vector<double> parse_alpha_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  try {
    if (parts.size() == 1) {
      return {std::stod(parts[0])};
    }
    if (parts.size() == 3) {
      double start = std::stod(parts[0]);
      double stop = std::stod(parts[1]);
      auto count = static_cast<std::size_t>(std::stoul(parts[2]));
      return tvb::make_alpha_grid(start, stop, count);
    }
  } catch (const std::exception&) {
    // fall through to the shared error below
  }
  throw ValidationError("alpha grid '" + text + "' is neither a scalar nor start:stop:count");
}

tvb::AnnealSchedule parse_anneal(const std::string& text) {
  auto sep = text.find(':');
  if (sep == std::string::npos) {
    throw ValidationError("anneal schedule '" + text + "' must be period:factor");
  }
  try {
    tvb::AnnealSchedule s;
    s.period = static_cast<std::size_t>(std::stoul(text.substr(0, sep)));
    s.factor = std::stod(text.substr(sep + 1));
    return s;
  } catch (const std::exception&) {
    throw ValidationError("anneal schedule '" + text + "' must be period:factor");
  }
}

void write_report(const std::filesystem::path& path, nlohmann::json report) {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  report["timestamp"] = buf;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw tvb::IoError("cannot open " + path.string() + " for writing");
  out << report.dump(2) << "\n";
  if (!out) throw tvb::IoError("write failure on " + path.string());
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw tvb::IoError("cannot open " + path.string() + " for reading");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw tvb::FormatError(path.string() + ": invalid JSON", 0);
  }
  return j;
}

nlohmann::json load_resolved_config(const std::filesystem::path& path) {
  nlohmann::json j = load_json_file(path);
  if (j.contains("resolved_config")) return j["resolved_config"];
  return j;
}

void export_merged(const tvb::MergedModel& merged, const std::filesystem::path& path) {
  tvb::Matrix theta(merged.theta.size(), 1);
  std::copy(merged.theta.begin(), merged.theta.end(), theta.col(0).begin());
  tvb::TaskVectorMatrix out =
      tvb::TaskVectorMatrix::make(std::move(theta), {"theta"});
  tvb::save_collection(out, path);
  nlohmann::json side;
  side["provenance"] = merged.provenance;
  side["inputs_used"] = merged.inputs_used;
  write_report(std::filesystem::path(path.string() + ".provenance.json"), side);
}

void export_masks(const tvb::MaskSet& masks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tvb::IoError("cannot open " + path.string() + " for writing");
  for (const auto& mask : masks.masks) {
    std::uint8_t byte = 0;
    int bit = 0;
    for (std::uint8_t m : mask) {
      if (m) byte |= std::uint8_t(1u << bit);
      if (++bit == 8) {
        out.put(static_cast<char>(byte));
        byte = 0;
        bit = 0;
      }
    }
    if (bit != 0) out.put(static_cast<char>(byte));
  }
  if (!out) throw tvb::IoError("write failure on " + path.string());

  nlohmann::json j;
  j["mask_count"] = masks.masks.size();
  j["dimension"] = masks.masks.empty() ? 0 : masks.masks.front().size();
  j["sparsity"] = masks.sparsity;
  write_report(std::filesystem::path(path.string() + ".json"), j);
}

MergeSource load_merge_source(const std::string& model_path,
                              const std::string& matrix_path,
                              const tvb::QuadraticTaskSuite& suite) {
  if (model_path.empty() == matrix_path.empty()) {
    throw ValidationError("exactly one of --model and --input is required");
  }
  MergeSource src;
  if (!model_path.empty()) {
    src.kind = "model";
    src.model = tvb::load_model(model_path);
    if (src.model->dim() != suite.dim()) {
      throw ValidationError("model dimension " + std::to_string(src.model->dim()) +
                            " does not match suite dimension " +
                            std::to_string(suite.dim()));
    }
    src.input = tvb::make_merge_input(*src.model, suite.theta0);
  } else {
    src.kind = "matrix";
    src.matrix = tvb::load_collection(matrix_path);
    if (src.matrix->dim() != suite.dim()) {
      throw ValidationError("matrix dimension does not match suite dimension");
    }
    src.input = tvb::make_merge_input(*src.matrix);
    src.input.theta0 = suite.theta0;
    src.input.theta0_known = true;
  }
  return src;
}

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace tvbcli
