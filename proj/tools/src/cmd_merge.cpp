#include "cli_common.hpp"
#include "commands_detail.hpp"

namespace tvbcli {

using tvb::LossFn;
using tvb::MergedModel;
using tvb::MergeSpec;

void register_merge(CLI::App& app) {
  auto cmd = app.add_subcommand("merge", "Merge bases or raw task vectors");
  auto p = std::make_shared<MergeParams>();
  cmd->add_option("--model", p->model, "TVBM1 basis model input");
  cmd->add_option("--input", p->input, "TVB1 task-vector matrix input");
  cmd->add_option("--suite", p->suite, "Suite prefix (evaluator source)")->required();
  cmd->add_option("--method", p->method, "ta | ties | lns")->default_val("ta");
  cmd->add_option("--alpha-grid", p->alpha_grid, "start:stop:count or scalar")
      ->default_val("0:1:21");
  cmd->add_option("--topk", p->topk, "TIES trim fraction")->default_val(0.2);
  cmd->add_option("--lns-bias", p->lns_bias, "L&S sigmoid bias")->default_val(5.0);
  cmd->add_option("--lns-l1", p->lns_l1, "L&S l1 strength")->default_val(1.0);
  cmd->add_option("--lns-lr", p->lns_lr, "L&S mask learning rate")->default_val(1e-7);
  cmd->add_option("--lns-epochs", p->lns_epochs, "L&S epochs")->default_val(10);
  cmd->add_option("--lns-threshold", p->lns_threshold, "L&S binarize threshold")
      ->default_val(0.5);
  cmd->add_option("--seed", p->seed, "Merge seed")->default_val(0);
  cmd->add_option("--out", p->out, "Merged model output (TVB1 single column)")
      ->required();
  cmd->add_option("--report", p->report, "Report path (default <out>.report.json)");
  cmd->add_option("--config", p->config, "Resolved-config JSON to fill unset flags");

  cmd->callback([cmd, p] {
    if (!p->config.empty()) {
      nlohmann::json cfg = load_resolved_config(p->config);
      merge_config_value(*cmd, "--method", cfg, "method", p->method);
      merge_config_value(*cmd, "--alpha-grid", cfg, "alpha_grid", p->alpha_grid);
      merge_config_value(*cmd, "--topk", cfg, "topk", p->topk);
      merge_config_value(*cmd, "--lns-bias", cfg, "lns_bias", p->lns_bias);
      merge_config_value(*cmd, "--lns-l1", cfg, "lns_l1", p->lns_l1);
      merge_config_value(*cmd, "--lns-lr", cfg, "lns_lr", p->lns_lr);
      merge_config_value(*cmd, "--lns-epochs", cfg, "lns_epochs", p->lns_epochs);
      merge_config_value(*cmd, "--lns-threshold", cfg, "lns_threshold",
                         p->lns_threshold);
      merge_config_value(*cmd, "--seed", cfg, "seed", p->seed);
    }
    run_merge(*p);
  });
}

void run_merge(const MergeParams& p) {
  tvb::QuadraticTaskSuite suite = tvb::load_suite(p.suite);
  MergeSource src = load_merge_source(p.model, p.input, suite);

  MergeSpec spec;
  spec.method = tvb::merge_method_from_string(p.method);
  spec.alpha_grid = parse_alpha_grid(p.alpha_grid);
  spec.ties_topk_fraction = p.topk;
  spec.lns.sigmoid_bias = p.lns_bias;
  spec.lns.l1_strength = p.lns_l1;
  spec.lns.lr = p.lns_lr;
  spec.lns.epochs = p.lns_epochs;
  spec.lns.binarize_threshold = p.lns_threshold;
  spec.seed = p.seed;

  LossFn evaluator = suite.mean_loss();
  MergedModel merged;
  std::optional<tvb::MaskSet> masks;
  switch (spec.method) {
    case tvb::MergeMethod::ta:
      merged = tvb::merge_ta(src.input, evaluator, spec);
      break;
    case tvb::MergeMethod::ties:
      merged = tvb::merge_ties(src.input, evaluator, spec);
      break;
    case tvb::MergeMethod::lns: {
      std::vector<tvb::TaskObjective> objectives = suite.objectives();
      auto [out, mask_set] = tvb::merge_lns(src.input, objectives, spec);
      merged = std::move(out);
      masks = std::move(mask_set);
      break;
    }
  }

  export_merged(merged, p.out);
  if (masks) export_masks(*masks, p.out + ".masks.bin");

  nlohmann::json report;
  report["command"] = "merge";
  report["resolved_config"] = {
      {"method", p.method},       {"alpha_grid", p.alpha_grid},
      {"topk", p.topk},           {"lns_bias", p.lns_bias},
      {"lns_l1", p.lns_l1},       {"lns_lr", p.lns_lr},
      {"lns_epochs", p.lns_epochs}, {"lns_threshold", p.lns_threshold},
      {"seed", p.seed},           {"source", src.kind},
  };
  report["provenance"] = merged.provenance;
  report["mean_loss"] = evaluator(merged.theta);
  report["mean_loss_at_theta0"] = evaluator(suite.theta0);
  write_report(p.report.empty() ? p.out + ".report.json" : p.report, report);
}

void register_negate(CLI::App& app) {
  auto cmd = app.add_subcommand("negate", "Forget one task via (reconstructed) negation");
  auto p = std::make_shared<NegateParams>();
  cmd->add_option("--model", p->model, "TVBM1 basis model input");
  cmd->add_option("--input", p->input, "TVB1 task-vector matrix input");
  cmd->add_option("--suite", p->suite, "Suite prefix (evaluator source)")->required();
  cmd->add_option("--task", p->task, "Task index to forget")->required();
  cmd->add_option("--alpha-grid", p->alpha_grid, "start:stop:count or scalar")
      ->default_val("0:1:21");
  cmd->add_option("--control-floor", p->control_floor,
                  "Control loss may grow by at most 1/floor")
      ->default_val(0.95);
  cmd->add_option("--out", p->out, "Negated model output (TVB1 single column)")
      ->required();
  cmd->add_option("--report", p->report, "Report path (default <out>.report.json)");
  cmd->add_option("--config", p->config, "Resolved-config JSON to fill unset flags");

  cmd->callback([cmd, p] {
    if (!p->config.empty()) {
      nlohmann::json cfg = load_resolved_config(p->config);
      merge_config_value(*cmd, "--task", cfg, "task", p->task);
      merge_config_value(*cmd, "--alpha-grid", cfg, "alpha_grid", p->alpha_grid);
      merge_config_value(*cmd, "--control-floor", cfg, "control_floor",
                         p->control_floor);
    }
    run_negate(*p);
  });
}

void run_negate(const NegateParams& p) {
  tvb::QuadraticTaskSuite suite = tvb::load_suite(p.suite);
  MergeSource src = load_merge_source(p.model, p.input, suite);
  if (p.task >= suite.count()) {
    throw tvb::ValidationError("task index " + std::to_string(p.task) +
                               " out of range for suite of " +
                               std::to_string(suite.count()));
  }
  std::size_t source_tasks = src.kind == "model" ? src.model->task_count()
                                                 : src.matrix->count();
  if (source_tasks != suite.count()) {
    throw tvb::ValidationError("input covers " + std::to_string(source_tasks) +
                               " tasks but the suite has " +
                               std::to_string(suite.count()));
  }

  std::vector<std::string> warnings;
  tvb::Matrix vectors;
  if (src.kind == "model") {
    if (src.model->method == tvb::BasisMethod::rand_select) {
      warnings.push_back(
          "rand-select bases drop unselected tasks; negation uses the OLS "
          "reconstruction, which cannot recover them exactly");
    }
    vectors = tvb::reconstruct(*src.model).columns;
  } else {
    vectors = src.matrix->columns;
  }

  const std::size_t j = p.task;
  LossFn target = [&suite, j](std::span<const double> theta) {
    return suite.tasks[j].loss(theta);
  };
  std::vector<std::size_t> control_idx;
  for (std::size_t i = 0; i < suite.count(); ++i) {
    if (i != j) control_idx.push_back(i);
  }
  LossFn control = control_idx.empty()
                       ? LossFn([](std::span<const double>) { return 0.0; })
                       : suite.mean_loss_over(control_idx);

  std::vector<double> grid = parse_alpha_grid(p.alpha_grid);
  MergedModel merged = tvb::negate(vectors, suite.theta0, j, target, control, grid,
                                   p.control_floor, src.input.task_names);
  export_merged(merged, p.out);

  nlohmann::json report;
  report["command"] = "negate";
  report["resolved_config"] = {{"task", p.task},
                               {"alpha_grid", p.alpha_grid},
                               {"control_floor", p.control_floor},
                               {"source", src.kind}};
  report["provenance"] = merged.provenance;
  if (!warnings.empty()) report["warnings"] = warnings;
  write_report(p.report.empty() ? p.out + ".report.json" : p.report, report);
}

void register_ood(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "ood", "Out-of-distribution merge toward an unseen target vector");
  auto p = std::make_shared<OodParams>();
  cmd->add_option("--model", p->model, "TVBM1 basis model input");
  cmd->add_option("--input", p->input, "TVB1 task-vector matrix input");
  cmd->add_option("--suite", p->suite, "Suite prefix (theta0 + planted target)")
      ->required();
  cmd->add_option("--target", p->target,
                  "TVB1 single-column target override (default: suite target)");
  cmd->add_option("--mode", p->mode, "best-aligned | grid")->default_val("best-aligned");
  cmd->add_option("--alpha-grid", p->alpha_grid, "Grid for grid mode")
      ->default_val("0:1:21");
  cmd->add_option("--out", p->out, "Merged output (TVB1 single column)")->required();
  cmd->add_option("--report", p->report, "Report path (default <out>.report.json)");
  cmd->add_option("--config", p->config, "Resolved-config JSON to fill unset flags");

  cmd->callback([cmd, p] {
    if (!p->config.empty()) {
      nlohmann::json cfg = load_resolved_config(p->config);
      merge_config_value(*cmd, "--mode", cfg, "mode", p->mode);
      merge_config_value(*cmd, "--alpha-grid", cfg, "alpha_grid", p->alpha_grid);
      merge_config_value(*cmd, "--target", cfg, "target", p->target);
    }
    run_ood(*p);
  });
}

void run_ood(const OodParams& p) {
  tvb::QuadraticTaskSuite suite = tvb::load_suite(p.suite);
  MergeSource src = load_merge_source(p.model, p.input, suite);

  std::vector<double> target_vec;
  if (!p.target.empty()) {
    tvb::TaskVectorMatrix t = tvb::load_collection(p.target);
    if (t.count() != 1 || t.dim() != suite.dim()) {
      throw tvb::ValidationError("--target must be a single column of suite dimension");
    }
    auto col = t.columns.col(0);
    target_vec.assign(col.begin(), col.end());
  } else if (suite.target) {
    target_vec.resize(suite.dim());
    for (std::size_t c = 0; c < suite.dim(); ++c) {
      target_vec[c] = suite.target->minimizer[c] - suite.theta0[c];
    }
  } else {
    throw tvb::ValidationError("suite has no planted target; pass --target");
  }

  tvb::OodMode mode;
  if (p.mode == "best-aligned" || p.mode == "best_aligned") {
    mode = tvb::OodMode::best_aligned;
  } else if (p.mode == "grid") {
    mode = tvb::OodMode::grid;
  } else {
    throw tvb::ValidationError("unknown ood mode '" + p.mode + "'");
  }
  std::vector<double> grid = parse_alpha_grid(p.alpha_grid);

  // Grid mode scores candidates with the analytic target loss when we are
  // aiming at the suite's own planted target; an override vector has no loss
  // attached, so the library falls back to its distance objective.
  std::optional<LossFn> evaluator;
  if (p.target.empty() && suite.target) {
    const tvb::QuadraticTask* tgt = &*suite.target;
    evaluator = [tgt](std::span<const double> theta) { return tgt->loss(theta); };
  }

  MergedModel merged =
      src.kind == "model"
          ? tvb::ood_merge(*src.model, suite.theta0, target_vec, mode, grid,
                           evaluator ? &*evaluator : nullptr)
          : tvb::ood_merge(*src.matrix, target_vec, mode, grid,
                           evaluator ? &*evaluator : nullptr);
  export_merged(merged, p.out);

  nlohmann::json report;
  report["command"] = "ood";
  report["resolved_config"] = {{"mode", p.mode},
                               {"alpha_grid", p.alpha_grid},
                               {"target", p.target},
                               {"source", src.kind}};
  report["provenance"] = merged.provenance;
  if (p.target.empty() && suite.target) {
    report["target_loss"] = suite.target->loss(merged.theta);
  }
  write_report(p.report.empty() ? p.out + ".report.json" : p.report, report);
}

}  // namespace tvbcli
