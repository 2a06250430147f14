#include "cli_common.hpp"
#include "commands_detail.hpp"

namespace tvbcli {

using tvb::SuiteProfile;

void register_generate(CLI::App& app) {
  auto cmd = app.add_subcommand("generate", "Generate a synthetic quadratic task suite");
  auto p = std::make_shared<GenerateParams>();
  cmd->add_option("--profile", p->profile,
                  "Suite profile: orthogonal | clustered | planted-target")
      ->default_val("orthogonal");
  cmd->add_option("--d", p->d, "Parameter dimension")->default_val(256);
  cmd->add_option("--t", p->t, "Task count")->default_val(8);
  cmd->add_option("--clusters", p->clusters, "Cluster count (clustered profile)")
      ->default_val(2);
  cmd->add_option("--cos-in", p->cos_in, "Within-cluster cosine")->default_val(0.9);
  cmd->add_option("--cos-out", p->cos_out, "Cross-cluster cosine")->default_val(0.0);
  cmd->add_option("--gamma", p->gamma, "Planted target alignment")->default_val(0.8);
  cmd->add_option("--norm-min", p->norm_min, "Smallest task-vector norm")
      ->default_val(0.8);
  cmd->add_option("--norm-max", p->norm_max, "Largest task-vector norm")
      ->default_val(1.2);
  cmd->add_option("--seed", p->seed, "Generation seed")->default_val(0);
  cmd->add_option("--out", p->out, "Output prefix (writes <out>.tvb and <out>.json)")
      ->required();
  cmd->add_option("--report", p->report, "Report path (default <out>.report.json)");
  cmd->add_option("--config", p->config, "Resolved-config JSON to fill unset flags");

  cmd->callback([cmd, p] {
    if (!p->config.empty()) {
      nlohmann::json cfg = load_resolved_config(p->config);
      merge_config_value(*cmd, "--profile", cfg, "profile", p->profile);
      merge_config_value(*cmd, "--d", cfg, "d", p->d);
      merge_config_value(*cmd, "--t", cfg, "t", p->t);
      merge_config_value(*cmd, "--clusters", cfg, "clusters", p->clusters);
      merge_config_value(*cmd, "--cos-in", cfg, "cos_in", p->cos_in);
      merge_config_value(*cmd, "--cos-out", cfg, "cos_out", p->cos_out);
      merge_config_value(*cmd, "--gamma", cfg, "gamma", p->gamma);
      merge_config_value(*cmd, "--norm-min", cfg, "norm_min", p->norm_min);
      merge_config_value(*cmd, "--norm-max", cfg, "norm_max", p->norm_max);
      merge_config_value(*cmd, "--seed", cfg, "seed", p->seed);
    }
    run_generate(*p);
  });
}

void run_generate(const GenerateParams& p) {
  SuiteProfile profile;
  if (p.profile == "orthogonal") {
    profile.kind = SuiteProfile::Kind::orthogonal;
  } else if (p.profile == "clustered") {
    profile.kind = SuiteProfile::Kind::clustered;
  } else if (p.profile == "planted-target") {
    profile.kind = SuiteProfile::Kind::planted_target;
  } else {
    throw tvb::ValidationError("unknown profile '" + p.profile + "'");
  }
  profile.clusters = p.clusters;
  profile.cos_in = p.cos_in;
  profile.cos_out = p.cos_out;
  profile.gamma = p.gamma;

  tvb::QuadraticTaskSuite suite =
      tvb::generate_suite(profile, p.d, p.t, {p.norm_min, p.norm_max}, p.seed);
  tvb::save_suite(suite, p.out);

  tvb::TheoryConstants constants = tvb::measure_constants(
      suite, suite.target ? &*suite.target : nullptr);

  nlohmann::json report;
  report["command"] = "generate";
  report["resolved_config"] = {
      {"profile", p.profile}, {"d", p.d},
      {"t", p.t},             {"clusters", p.clusters},
      {"cos_in", p.cos_in},   {"cos_out", p.cos_out},
      {"gamma", p.gamma},     {"norm_min", p.norm_min},
      {"norm_max", p.norm_max}, {"seed", p.seed},
  };
  report["suite"] = {{"profile_tag", suite.profile_tag},
                     {"d", suite.dim()},
                     {"t", suite.count()},
                     {"has_target", suite.target.has_value()}};
  report["constants"] = {{"c", constants.c}, {"epsilon", constants.epsilon}};
  if (constants.gamma) report["constants"]["gamma"] = *constants.gamma;
  write_report(p.report.empty() ? p.out + ".report.json" : p.report, report);
}

}  // namespace tvbcli
