#include <cmath>

#include "cli_common.hpp"
#include "commands_detail.hpp"

namespace tvbcli {

using tvb::BoundReport;

void register_verify(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "verify", "Run the theorem checks; nonzero exit signals an implementation bug");
  auto p = std::make_shared<VerifyParams>();
  cmd->add_option("--suite", p->suite, "Suite prefix")->required();
  cmd->add_option("--model", p->model, "Optional TVBM1 model to verify against");
  cmd->add_option("--draws", p->draws, "Random simplex draws per check")
      ->default_val(100);
  cmd->add_option("--seed", p->seed, "Draw seed")->default_val(0);
  cmd->add_option("--report", p->report, "Report path")->default_val("verify.json");
  cmd->add_option("--config", p->config, "Resolved-config JSON to fill unset flags");

  cmd->callback([cmd, p] {
    if (!p->config.empty()) {
      nlohmann::json cfg = load_resolved_config(p->config);
      merge_config_value(*cmd, "--draws", cfg, "draws", p->draws);
      merge_config_value(*cmd, "--seed", cfg, "seed", p->seed);
    }
    if (!run_verify(*p)) {
      throw TheoremFailure("theorem checks failed, see " + p->report);
    }
  });
}

namespace {

std::vector<double> simplex_draw(std::size_t n, tvb::Rng& rng) {
  std::vector<double> a(n);
  double sum = 0.0;
  for (double& x : a) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  for (double& x : a) x /= sum;
  return a;
}

nlohmann::json summarize(const BoundReport& report) {
  nlohmann::json j;
  j["theorem"] = report.theorem;
  j["applicable"] = report.applicable;
  j["all_pass"] = report.all_pass;
  double worst = HUGE_VAL;
  for (const tvb::BoundRecord& rec : report.records) worst = std::min(worst, rec.slack);
  if (!report.records.empty()) j["min_slack"] = worst;
  return j;
}

}  // namespace

bool run_verify(const VerifyParams& p) {
  tvb::QuadraticTaskSuite suite = tvb::load_suite(p.suite);
  std::optional<tvb::BasisModel> model;
  if (!p.model.empty()) model = tvb::load_model(p.model);

  nlohmann::json report;
  report["command"] = "verify";
  report["resolved_config"] = {{"draws", p.draws}, {"seed", p.seed},
                               {"model", p.model}, {"suite", p.suite}};
  bool all_pass = true;
  nlohmann::json checks = nlohmann::json::array();

  // Structural model invariants come first: a corrupted artifact should fail
  // loudly before any bound is evaluated.
  if (model) {
    nlohmann::json inv;
    inv["check"] = "model_invariants";
    bool ok = true;
    std::vector<std::string> violations;
    if (model->method == tvb::BasisMethod::ae ||
        model->method == tvb::BasisMethod::rand_select) {
      for (std::size_t c = 0; c < model->encoder.cols(); ++c) {
        double sum = 0.0;
        for (double v : model->encoder.col(c)) {
          if (v < -1e-12) {
            violations.push_back("encoder column " + std::to_string(c) +
                                 " has a negative weight");
            ok = false;
            break;
          }
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          violations.push_back("encoder column " + std::to_string(c) + " sums to " +
                               std::to_string(sum) + ", off the simplex");
          ok = false;
        }
      }
    }
    if (model->task_count() != suite.count() || model->dim() != suite.dim()) {
      violations.push_back("model shape does not match the suite");
      ok = false;
    }
    if (ok) {
      tvb::SpectralBound lb =
          tvb::spectral_bounds(tvb::gram(suite.task_matrix()), model->basis_count());
      if (model->loss < lb.frobenius_lb - 1e-9) {
        violations.push_back("stored loss undercuts the spectral lower bound");
        ok = false;
      }
    }
    inv["pass"] = ok;
    if (!violations.empty()) inv["violations"] = violations;
    checks.push_back(inv);
    all_pass = all_pass && ok;
    if (!ok) {
      report["checks"] = checks;
      report["all_pass"] = false;
      write_report(p.report, report);
      return false;
    }
  }

  tvb::Rng rng(p.seed);
  // Addition sweeps (raw, and through the basis when given).
  {
    bool pass = true;
    double min_slack = HUGE_VAL;
    for (std::size_t draw = 0; draw < p.draws; ++draw) {
      BoundReport r = tvb::verify_addition_bound(suite, simplex_draw(suite.count(), rng));
      pass = pass && r.all_pass;
      for (const auto& rec : r.records) min_slack = std::min(min_slack, rec.slack);
    }
    checks.push_back({{"check", "task_addition"},
                      {"draws", p.draws},
                      {"pass", pass},
                      {"min_slack", min_slack}});
    all_pass = all_pass && pass;
  }
  if (model && !model->encoder.empty()) {
    bool pass = true;
    double min_slack = HUGE_VAL;
    for (std::size_t draw = 0; draw < p.draws; ++draw) {
      BoundReport r = tvb::verify_addition_bound(
          suite, simplex_draw(model->basis_count(), rng), &*model);
      pass = pass && r.all_pass;
      for (const auto& rec : r.records) min_slack = std::min(min_slack, rec.slack);
    }
    checks.push_back({{"check", "basis_addition"},
                      {"draws", p.draws},
                      {"pass", pass},
                      {"min_slack", min_slack}});
    all_pass = all_pass && pass;
  }

  // Negation sweeps over random targets and scales.
  {
    bool pass = true;
    for (std::size_t draw = 0; draw < p.draws; ++draw) {
      std::size_t j = rng.index(suite.count());
      double alpha = rng.uniform();
      BoundReport raw = tvb::verify_negation_bound(suite, j, alpha);
      pass = pass && raw.all_pass;
      if (model) {
        BoundReport basis = tvb::verify_negation_bound(suite, j, alpha, &*model);
        pass = pass && basis.all_pass;
      }
    }
    checks.push_back({{"check", "negation"}, {"draws", p.draws}, {"pass", pass}});
    all_pass = all_pass && pass;
  }

  // OOD checks against the planted target, when the suite carries one.
  if (suite.target) {
    BoundReport raw = tvb::verify_ood_bound(suite, *suite.target);
    checks.push_back(summarize(raw));
    all_pass = all_pass && (!raw.applicable || raw.all_pass);
    if (model && !model->encoder.empty()) {
      BoundReport basis = tvb::verify_ood_bound(suite, *suite.target, &*model);
      checks.push_back(summarize(basis));
      all_pass = all_pass && (!basis.applicable || basis.all_pass);
    }
  }

  report["checks"] = checks;
  report["all_pass"] = all_pass;
  write_report(p.report, report);
  return all_pass;
}

}  // namespace tvbcli
