#include <fstream>
#include <numeric>

#include "cli_common.hpp"
#include "commands_detail.hpp"
#include "tvb/online.hpp"

namespace tvbcli {

void register_stream_export(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "stream-export", "Write a suite as per-task TVB1 files plus a stream manifest");
  auto p = std::make_shared<StreamExportParams>();
  cmd->add_option("--suite", p->suite, "Suite prefix")->required();
  cmd->add_option("--out-dir", p->out_dir, "Output directory")->required();
  cmd->callback([p] { run_stream_export(*p); });
}

void run_stream_export(const StreamExportParams& p) {
  tvb::QuadraticTaskSuite suite = tvb::load_suite(p.suite);
  std::filesystem::create_directories(p.out_dir);
  std::filesystem::path dir(p.out_dir);

  nlohmann::json manifest;
  manifest["names"] = nlohmann::json::array();
  manifest["vectors"] = nlohmann::json::array();

  {
    tvb::Matrix col(suite.dim(), 1);
    std::copy(suite.theta0.begin(), suite.theta0.end(), col.col(0).begin());
    tvb::save_collection(tvb::TaskVectorMatrix::make(std::move(col), {"theta0"}),
                         dir / "theta0.tvb");
    manifest["theta0"] = "theta0.tvb";
  }
  for (std::size_t i = 0; i < suite.count(); ++i) {
    std::vector<double> tau = suite.task_vector(i);
    tvb::Matrix col(suite.dim(), 1);
    std::copy(tau.begin(), tau.end(), col.col(0).begin());
    std::string file = "stream_" + std::to_string(i) + ".tvb";
    tvb::save_collection(
        tvb::TaskVectorMatrix::make(std::move(col), {suite.tasks[i].name}), dir / file);
    manifest["vectors"].push_back(file);
    manifest["names"].push_back(suite.tasks[i].name);
  }

  std::ofstream out(dir / "manifest.json");
  if (!out) throw tvb::IoError("cannot write manifest in " + p.out_dir);
  out << manifest.dump(2) << "\n";

  nlohmann::json report;
  report["command"] = "stream-export";
  report["resolved_config"] = {{"suite", p.suite}, {"out_dir", p.out_dir}};
  report["exported"] = suite.count();
  write_report(dir / "export_report.json", report);
}

void register_online(CLI::App& app) {
  auto cmd = app.add_subcommand("online", "Fixed-budget online bases addition");
  auto p = std::make_shared<OnlineParams>();
  cmd->add_option("--manifest", p->manifest, "Stream manifest JSON")->required();
  cmd->add_option("--suite", p->suite, "Suite prefix (per-task scoring)")->required();
  cmd->add_option("--m", p->m, "Buffer budget M")->default_val(4);
  cmd->add_option("--method", p->method, "ta | ties")->default_val("ta");
  cmd->add_option("--alpha", p->alpha, "Fixed isotropic merge scale")->default_val(0.3);
  cmd->add_option("--compaction", p->compaction, "ae | rand-select")->default_val("ae");
  cmd->add_option("--ae-steps", p->ae_steps, "AE steps per compaction")
      ->default_val(1000);
  cmd->add_option("--seed", p->seed, "Run seed")->default_val(0);
  cmd->add_option("--repeats", p->repeats, "Stream orders to run (shuffled per repeat)")
      ->default_val(1);
  cmd->add_option("--out-dir", p->out_dir, "Output directory")->required();
  cmd->add_option("--config", p->config, "Resolved-config JSON to fill unset flags");

  cmd->callback([cmd, p] {
    if (!p->config.empty()) {
      nlohmann::json cfg = load_resolved_config(p->config);
      merge_config_value(*cmd, "--m", cfg, "m", p->m);
      merge_config_value(*cmd, "--method", cfg, "method", p->method);
      merge_config_value(*cmd, "--alpha", cfg, "alpha", p->alpha);
      merge_config_value(*cmd, "--compaction", cfg, "compaction", p->compaction);
      merge_config_value(*cmd, "--ae-steps", cfg, "ae_steps", p->ae_steps);
      merge_config_value(*cmd, "--seed", cfg, "seed", p->seed);
      merge_config_value(*cmd, "--repeats", cfg, "repeats", p->repeats);
    }
    run_online(*p);
  });
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void run_online(const OnlineParams& p) {
  if (p.repeats < 1) throw tvb::ValidationError("--repeats must be >= 1");
  tvb::QuadraticTaskSuite suite = tvb::load_suite(p.suite);

  nlohmann::json manifest = load_json_file(p.manifest);
  std::filesystem::path base = std::filesystem::path(p.manifest).parent_path();
  auto files = manifest.at("vectors").get<std::vector<std::string>>();
  auto names = manifest.at("names").get<std::vector<std::string>>();
  if (files.size() != names.size() || files.empty()) {
    throw tvb::ValidationError("manifest must list the same number of vectors and names");
  }

  // Stream vectors, in manifest order, mapped onto suite task indices by name.
  tvb::Matrix stream(suite.dim(), files.size());
  std::vector<std::size_t> suite_index(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    tvb::TaskVectorMatrix v = tvb::load_collection(base / files[i]);
    if (v.count() != 1 || v.dim() != suite.dim()) {
      throw tvb::ValidationError("stream file " + files[i] +
                                 " is not a single column of suite dimension");
    }
    auto col = v.columns.col(0);
    std::copy(col.begin(), col.end(), stream.col(i).begin());
    bool found = false;
    for (std::size_t t = 0; t < suite.count(); ++t) {
      if (suite.tasks[t].name == names[i]) {
        suite_index[i] = t;
        found = true;
        break;
      }
    }
    if (!found) {
      throw tvb::ValidationError("manifest name '" + names[i] + "' is not in the suite");
    }
  }

  tvb::OnlineConfig cfg;
  cfg.budget = p.m;
  cfg.merge_spec.method = tvb::merge_method_from_string(p.method);
  cfg.merge_spec.alpha_grid = {p.alpha};
  cfg.compaction = tvb::compaction_method_from_string(p.compaction);
  cfg.ae.steps = p.ae_steps;
  cfg.seed = p.seed;

  std::filesystem::create_directories(p.out_dir);
  std::filesystem::path dir(p.out_dir);
  std::ofstream csv(dir / "steps.csv");
  if (!csv) throw tvb::IoError("cannot write steps.csv in " + p.out_dir);
  csv << "repeat,step,task,score\n";

  nlohmann::json per_repeat = nlohmann::json::array();
  nlohmann::json timings = nlohmann::json::array();
  std::vector<double> final_scores;
  std::size_t total_compactions = 0;
  for (std::size_t r = 0; r < p.repeats; ++r) {
    std::vector<std::size_t> order(files.size());
    std::iota(order.begin(), order.end(), 0);
    if (p.repeats > 1) {
      tvb::Rng rng(mix(p.seed, r));
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::size_t j = i + rng.index(order.size() - i);
        std::swap(order[i], order[j]);
      }
    }

    tvb::Matrix ordered(suite.dim(), files.size());
    std::vector<std::string> ordered_names(files.size());
    std::vector<std::size_t> ordered_suite_index(files.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto src = stream.col(order[i]);
      std::copy(src.begin(), src.end(), ordered.col(i).begin());
      ordered_names[i] = names[order[i]];
      ordered_suite_index[i] = suite_index[order[i]];
    }

    tvb::TaskScoreFn scorer = [&suite, &ordered_suite_index](
                                  std::size_t i, std::span<const double> theta) {
      return suite.tasks[ordered_suite_index[i]].loss(theta);
    };
    tvb::StreamReport report =
        tvb::run_stream(ordered, ordered_names, suite.theta0, cfg, scorer);

    double compaction_s = 0.0;
    double merge_s = 0.0;
    for (const tvb::StreamStep& step : report.steps) {
      for (std::size_t i = 0; i < step.scores.size(); ++i) {
        csv << r << "," << step.step << "," << ordered_names[i] << ","
            << csv_double(step.scores[i]) << "\n";
      }
      compaction_s += step.compaction_seconds;
      merge_s += step.merge_seconds;
    }
    final_scores.push_back(report.steps.back().mean_score);
    total_compactions += report.compaction_count;

    per_repeat.push_back({{"repeat", r},
                          {"order", order},
                          {"final_mean_score", report.steps.back().mean_score},
                          {"compactions", report.compaction_count},
                          {"ae_fallbacks", report.ae_fallback_count}});
    timings.push_back({{"repeat", r},
                       {"compaction_seconds", compaction_s},
                       {"merge_seconds", merge_s}});
  }
  if (!csv) throw tvb::IoError("write failure on steps.csv");
  csv.close();

  double mean = 0.0;
  for (double s : final_scores) mean += s;
  mean /= static_cast<double>(final_scores.size());
  double var = 0.0;
  for (double s : final_scores) var += (s - mean) * (s - mean);
  double stddev = final_scores.size() > 1
                      ? std::sqrt(var / static_cast<double>(final_scores.size() - 1))
                      : 0.0;

  nlohmann::json summary;
  summary["command"] = "online";
  summary["resolved_config"] = {
      {"m", p.m},           {"method", p.method},       {"alpha", p.alpha},
      {"compaction", p.compaction}, {"ae_steps", p.ae_steps},
      {"seed", p.seed},     {"repeats", p.repeats},
  };
  summary["stream_length"] = files.size();
  summary["repeats"] = per_repeat;
  summary["final_mean_score"] = mean;
  summary["final_score_stddev"] = stddev;
  summary["total_compactions"] = total_compactions;
  summary["zero_compactions"] = total_compactions == 0;
  // Wall-clock split; like the timestamp, excluded from determinism
  // comparisons.
  summary["timings"] = timings;
  write_report(dir / "summary.json", summary);
}

}  // namespace tvbcli
