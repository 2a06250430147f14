#include "tvb/arithmetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tvb {

std::string to_string(MergeMethod m) {
  switch (m) {
    case MergeMethod::ta: return "ta";
    case MergeMethod::ties: return "ties";
    case MergeMethod::lns: return "lns";
  }
  throw ValidationError("unknown merge method tag");
}

MergeMethod merge_method_from_string(const std::string& s) {
  if (s == "ta") return MergeMethod::ta;
  if (s == "ties") return MergeMethod::ties;
  if (s == "lns" || s == "l&s") return MergeMethod::lns;
  throw ValidationError("unknown merge method '" + s + "'");
}

void MergeSpec::validate() const {
  if (alpha_grid.empty()) throw ValidationError("merge spec: alpha grid is empty");
  for (double a : alpha_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ValidationError("merge spec: alpha grid entries must be finite and >= 0");
    }
  }
  if (!(ties_topk_fraction > 0.0) || ties_topk_fraction > 1.0) {
    throw ValidationError("merge spec: ties top-k fraction must be in (0, 1]");
  }
  if (lns.l1_strength < 0.0) throw ValidationError("merge spec: l1 strength must be >= 0");
  if (lns.epochs < 1) throw ValidationError("merge spec: lns epochs must be >= 1");
}

std::vector<double> make_alpha_grid(double start, double stop, std::size_t count) {
  if (count == 0) throw ValidationError("alpha grid: count must be >= 1");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = start;
    return grid;
  }
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = start + (stop - start) * static_cast<double>(i) /
                          static_cast<double>(count - 1);
  }
  return grid;
}

MergeInput make_merge_input(const TaskVectorMatrix& m) {
  MergeInput in;
  in.vectors = m.columns;
  in.encoder = Matrix::identity(m.count());
  in.vector_names = m.names;
  in.task_names = m.names;
  if (m.theta0) {
    in.theta0 = *m.theta0;
  } else {
    in.theta0.assign(m.dim(), 0.0);
    in.theta0_known = false;
  }
  return in;
}

MergeInput make_merge_input(const BasisModel& model, std::span<const double> theta0) {
  if (!theta0.empty() && theta0.size() != model.dim()) {
    throw ValidationError("merge input: theta0 length does not match basis dimension");
  }
  MergeInput in;
  in.vectors = model.basis;
  in.encoder = model.encoder;
  for (std::size_t i = 0; i < model.basis_count(); ++i) {
    in.vector_names.push_back("basis_" + std::to_string(i));
  }
  in.task_names = model.source_names;
  if (theta0.empty()) {
    in.theta0.assign(model.dim(), 0.0);
    in.theta0_known = false;
  } else {
    in.theta0.assign(theta0.begin(), theta0.end());
  }
  return in;
}

namespace {

// Evaluates fn over the grid, possibly in parallel; the argmin scan is a
// fixed-order sequential pass, so the winner is thread-count invariant.
struct GridResult {
  std::size_t index = 0;
  double alpha = 0.0;
  double score = 0.0;
  std::vector<double> scores;
};

GridResult grid_argmin(std::span<const double> grid,
                       const std::function<double(double)>& fn) {
  std::vector<double> scores(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    try {
      scores[i] = fn(grid[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  GridResult best;
  best.scores = scores;
  bool first = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    bool better = first || scores[i] < best.score ||
                  (scores[i] == best.score && grid[i] < best.alpha);
    if (better) {
      best.index = i;
      best.alpha = grid[i];
      best.score = scores[i];
      first = false;
    }
  }
  return best;
}

std::vector<double> column_sum(const Matrix& m) {
  std::vector<double> s(m.rows(), 0.0);
  for (std::size_t c = 0; c < m.cols(); ++c) axpy(1.0, m.col(c), s);
  return s;
}

void check_input(const MergeInput& input) {
  if (input.vectors.cols() == 0 || input.vectors.rows() == 0) {
    throw ValidationError("merge: no input vectors");
  }
  if (input.theta0.size() != input.vectors.rows()) {
    throw ValidationError("merge: theta0 length does not match vector dimension");
  }
}

void check_output(const MergedModel& out) {
  if (!all_finite(out.theta)) {
    throw NumericError("merge: produced a non-finite parameter vector");
  }
}

MergedModel scaled_direction_merge(const MergeInput& input, const LossFn& evaluator,
                                   const MergeSpec& spec,
                                   std::vector<double> direction, const char* method) {
  GridResult best = grid_argmin(spec.alpha_grid, [&](double alpha) {
    std::vector<double> theta = input.theta0;
    axpy(alpha, direction, theta);
    return evaluator(theta);
  });

  MergedModel out;
  out.theta = input.theta0;
  axpy(best.alpha, direction, out.theta);
  out.inputs_used = input.vector_names;
  out.provenance["method"] = method;
  out.provenance["alpha"] = best.alpha;
  out.provenance["score"] = best.score;
  out.provenance["grid"] = std::vector<double>(spec.alpha_grid.begin(),
                                               spec.alpha_grid.end());
  out.provenance["grid_scores"] = best.scores;
  if (!input.theta0_known) out.provenance["theta0_assumed_zero"] = true;
  check_output(out);
  return out;
}

}  // namespace

MergedModel merge_ta(const MergeInput& input, const LossFn& evaluator,
                     const MergeSpec& spec) {
  spec.validate();
  check_input(input);
  return scaled_direction_merge(input, evaluator, spec, column_sum(input.vectors), "ta");
}

std::vector<double> trim_elect_merge(const Matrix& vectors, double topk_fraction) {
  if (vectors.cols() == 0) throw ValidationError("trim_elect_merge: no input vectors");
  if (!(topk_fraction > 0.0) || topk_fraction > 1.0) {
    throw ValidationError("trim_elect_merge: top-k fraction must be in (0, 1]");
  }
  const std::size_t d = vectors.rows();
  const std::size_t k = vectors.cols();
  const auto keep = static_cast<std::size_t>(
      std::llround(topk_fraction * static_cast<double>(d)));
  if (keep == 0) {
    throw ValidationError("trim_elect_merge: trim fraction too small, keeps zero entries");
  }

  Matrix trimmed(d, keep == d ? 0 : k);  // avoid copy when nothing is trimmed
  const Matrix& kept_view = keep == d ? vectors : trimmed;
  if (keep < d) {
    std::vector<std::size_t> order(d);
    for (std::size_t c = 0; c < k; ++c) {
      auto col = vectors.col(c);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double ma = std::abs(col[a]);
        double mb = std::abs(col[b]);
        if (ma != mb) return ma > mb;
        return a < b;
      });
      auto out = trimmed.col(c);
      for (std::size_t i = 0; i < keep; ++i) out[order[i]] = col[order[i]];
    }
  }

  std::vector<double> merged(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double pos = 0.0;
    double neg = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double v = kept_view(r, c);
      if (v > 0.0) pos += v;
      else neg -= v;
    }
    bool elect_positive = pos >= neg;  // tie elects +
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double v = kept_view(r, c);
      if (elect_positive ? v > 0.0 : v < 0.0) sum += v;
    }
    merged[r] = sum;
  }
  return merged;
}

MergedModel merge_ties(const MergeInput& input, const LossFn& evaluator,
                       const MergeSpec& spec) {
  spec.validate();
  check_input(input);
  std::vector<double> direction = trim_elect_merge(input.vectors, spec.ties_topk_fraction);
  MergedModel out =
      scaled_direction_merge(input, evaluator, spec, std::move(direction), "ties");
  out.provenance["topk_fraction"] = spec.ties_topk_fraction;
  return out;
}

std::pair<MergedModel, MaskSet> merge_lns(const MergeInput& input,
                                          std::span<const TaskObjective> objectives,
                                          const MergeSpec& spec) {
  check_input(input);
  if (input.encoder.empty()) {
    throw ValidationError("merge_lns: input carries no encoder weights "
                          "(rand-proj bases have no task weighting)");
  }
  if (objectives.size() != input.encoder.rows()) {
    throw ValidationError("merge_lns: expected one objective per task row, got " +
                          std::to_string(objectives.size()) + " for " +
                          std::to_string(input.encoder.rows()));
  }
  if (spec.lns.l1_strength < 0.0 || spec.lns.epochs < 1) {
    throw ValidationError("merge_lns: bad lns configuration");
  }

  const std::size_t d = input.vectors.rows();
  const std::size_t k = input.vectors.cols();
  const std::size_t t = objectives.size();
  const LnsConfig& c = spec.lns;

  MaskSet masks;
  masks.logits = Matrix(d, k);
  masks.masks.resize(k);
  masks.sparsity.resize(k, 0.0);

  std::vector<std::exception_ptr> errors(k);
  parallel_for(k, [&](std::size_t m) {
    try {
      auto logit = masks.logits.col(m);
      std::fill(logit.begin(), logit.end(), c.sigmoid_bias);
      auto basis = input.vectors.col(m);

      std::vector<double> theta(d), sig(d), grad_theta(d);
      for (std::size_t epoch = 0; epoch < c.epochs; ++epoch) {
        for (std::size_t i = 0; i < d; ++i) {
          sig[i] = 1.0 / (1.0 + std::exp(-logit[i]));
          theta[i] = input.theta0[i] + sig[i] * basis[i];
        }
        std::fill(grad_theta.begin(), grad_theta.end(), 0.0);
        for (std::size_t i = 0; i < t; ++i) {
          double w = input.encoder(i, m);
          if (w == 0.0) continue;
          std::vector<double> g = objectives[i].gradient(theta);
          axpy(w, g, grad_theta);
        }
        for (std::size_t i = 0; i < d; ++i) {
          double dsig = sig[i] * (1.0 - sig[i]);
          logit[i] -= c.lr * dsig * (grad_theta[i] * basis[i] + c.l1_strength);
        }
      }

      auto& mask = masks.masks[m];
      mask.assign(d, 0);
      std::size_t ones = 0;
      for (std::size_t i = 0; i < d; ++i) {
        double s = 1.0 / (1.0 + std::exp(-logit[i]));
        if (s > c.binarize_threshold) {
          mask[i] = 1;
          ++ones;
        }
      }
      masks.sparsity[m] = static_cast<double>(ones) / static_cast<double>(d);
    } catch (...) {
      errors[m] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Stitch: overlapping claims average the claiming bases' values.
  MergedModel out;
  out.theta = input.theta0;
  std::vector<std::size_t> claims(d, 0);
  std::vector<double> acc(d, 0.0);
  for (std::size_t m = 0; m < k; ++m) {
    auto basis = input.vectors.col(m);
    for (std::size_t i = 0; i < d; ++i) {
      if (masks.masks[m][i]) {
        acc[i] += basis[i];
        ++claims[i];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (claims[i] > 0) out.theta[i] += acc[i] / static_cast<double>(claims[i]);
  }

  out.inputs_used = input.vector_names;
  out.provenance["method"] = "lns";
  out.provenance["l1_strength"] = c.l1_strength;
  out.provenance["sigmoid_bias"] = c.sigmoid_bias;
  out.provenance["lr"] = c.lr;
  out.provenance["epochs"] = c.epochs;
  out.provenance["binarize_threshold"] = c.binarize_threshold;
  out.provenance["mask_sparsity"] = masks.sparsity;
  std::vector<std::size_t> empty_masks;
  for (std::size_t m = 0; m < k; ++m) {
    if (masks.sparsity[m] == 0.0) empty_masks.push_back(m);
  }
  if (!empty_masks.empty()) {
    out.provenance["warnings"] = {"all-zero masks (bases contribute nothing)"};
    out.provenance["empty_masks"] = empty_masks;
  }
  if (!input.theta0_known) out.provenance["theta0_assumed_zero"] = true;
  check_output(out);
  return {std::move(out), std::move(masks)};
}

TaskVectorMatrix reconstruct(const BasisModel& model) {
  if (model.decoder.empty()) {
    throw ValidationError("reconstruct: model carries no decoder "
                          "(unsupported legacy artifact)");
  }
  Matrix recon = matmul(model.basis, model.decoder);
  if (model.mean) {
    for (std::size_t c = 0; c < recon.cols(); ++c) axpy(1.0, *model.mean, recon.col(c));
  }
  return TaskVectorMatrix::make(std::move(recon), model.source_names);
}

MergedModel negate(const Matrix& task_vectors, std::span<const double> theta0,
                   std::size_t task_index, const LossFn& target_loss,
                   const LossFn& control_loss, std::span<const double> alpha_grid,
                   double control_floor, const std::vector<std::string>& names) {
  if (task_index >= task_vectors.cols()) {
    throw ValidationError("negate: task index " + std::to_string(task_index) +
                          " out of range");
  }
  if (theta0.size() != task_vectors.rows()) {
    throw ValidationError("negate: theta0 length mismatch");
  }
  if (alpha_grid.empty()) throw ValidationError("negate: empty alpha grid");
  if (!(control_floor > 0.0) || control_floor > 1.0) {
    throw ValidationError("negate: control floor must be in (0, 1]");
  }

  auto tau = task_vectors.col(task_index);
  std::vector<double> base(theta0.begin(), theta0.end());
  const double control_at_theta0 = control_loss(base);
  const double target_at_theta0 = target_loss(base);
  const double control_budget = control_at_theta0 / control_floor;

  struct Candidate {
    double alpha;
    double target;
    double control;
    bool feasible;
  };
  std::vector<Candidate> cands(alpha_grid.size());
  std::vector<std::exception_ptr> errors(alpha_grid.size());
  parallel_for(alpha_grid.size(), [&](std::size_t i) {
    try {
      std::vector<double> theta = base;
      axpy(-alpha_grid[i], tau, theta);
      double tl = target_loss(theta);
      double cl = control_loss(theta);
      cands[i] = {alpha_grid[i], tl, cl, cl <= control_budget};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Most forgetting (largest target loss) among feasible points; ties take
  // the smaller alpha.
  const Candidate* best = nullptr;
  for (const Candidate& c : cands) {
    if (!c.feasible) continue;
    if (!best || c.target > best->target ||
        (c.target == best->target && c.alpha < best->alpha)) {
      best = &c;
    }
  }

  MergedModel out;
  out.theta = base;
  out.provenance["method"] = "negation";
  out.provenance["task_index"] = task_index;
  out.provenance["control_floor"] = control_floor;
  out.provenance["target_loss_at_theta0"] = target_at_theta0;
  out.provenance["control_loss_at_theta0"] = control_at_theta0;
  if (best) {
    axpy(-best->alpha, tau, out.theta);
    out.provenance["alpha"] = best->alpha;
    out.provenance["target_loss"] = best->target;
    out.provenance["control_loss"] = best->control;
    out.provenance["feasible"] = true;
  } else {
    out.provenance["alpha"] = 0.0;
    out.provenance["target_loss"] = target_at_theta0;
    out.provenance["control_loss"] = control_at_theta0;
    out.provenance["feasible"] = false;
    out.provenance["warnings"] = {"no grid point satisfies the control floor"};
  }
  if (!names.empty() && task_index < names.size()) {
    out.inputs_used = {names[task_index]};
  } else {
    out.inputs_used = {"task_" + std::to_string(task_index)};
  }
  check_output(out);
  return out;
}

namespace {

struct Alignment {
  std::size_t best_index = 0;
  double best_inner = 0.0;
  double c_max_norm_sq = 0.0;
  bool any_positive = false;
};

Alignment align_against(const Matrix& columns, std::span<const double> target) {
  if (columns.rows() != target.size()) {
    throw ValidationError("ood_merge: target dimension mismatch");
  }
  Alignment a;
  for (std::size_t i = 0; i < columns.cols(); ++i) {
    double inner = dot(columns.col(i), target);
    double nsq = norm_sq(columns.col(i));
    a.c_max_norm_sq = std::max(a.c_max_norm_sq, nsq);
    if (i == 0 || inner > a.best_inner) {
      a.best_inner = inner;
      a.best_index = i;
    }
  }
  a.any_positive = a.best_inner > 0.0;
  return a;
}

MergedModel ood_finish(std::vector<double> base, std::span<const double> pick,
                       const Alignment& a, OodMode mode,
                       std::span<const double> alpha_grid, const LossFn* evaluator,
                       std::span<const double> target) {
  MergedModel out;
  out.provenance["method"] = "ood";
  out.provenance["gamma_hat"] =
      a.c_max_norm_sq > 0.0 ? a.best_inner / a.c_max_norm_sq : 0.0;
  out.provenance["selected_alignment"] = a.best_inner;
  out.provenance["c"] = a.c_max_norm_sq;
  if (!a.any_positive) {
    out.provenance["warnings"] = {"no positively aligned source"};
  }

  if (mode == OodMode::best_aligned) {
    out.theta = std::move(base);
    axpy(1.0, pick, out.theta);
    out.provenance["alpha"] = 1.0;
    check_output(out);
    return out;
  }
  if (alpha_grid.empty()) throw ValidationError("ood_merge: grid mode needs an alpha grid");
  GridResult best = grid_argmin(alpha_grid, [&](double alpha) {
    if (evaluator) {
      std::vector<double> theta = base;
      axpy(alpha, pick, theta);
      return (*evaluator)(theta);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pick.size(); ++i) {
      double r = alpha * pick[i] - target[i];
      s += r * r;
    }
    return s;
  });
  out.theta = std::move(base);
  axpy(best.alpha, pick, out.theta);
  out.provenance["alpha"] = best.alpha;
  out.provenance["grid_score"] = best.score;
  check_output(out);
  return out;
}

}  // namespace

MergedModel ood_merge(const TaskVectorMatrix& sources, std::span<const double> target,
                      OodMode mode, std::span<const double> alpha_grid,
                      const LossFn* evaluator) {
  Alignment a = align_against(sources.columns, target);
  std::vector<double> base =
      sources.theta0 ? *sources.theta0 : std::vector<double>(sources.dim(), 0.0);
  MergedModel out = ood_finish(std::move(base), sources.columns.col(a.best_index), a,
                               mode, alpha_grid, evaluator, target);
  out.inputs_used = {sources.names[a.best_index]};
  out.provenance["selected_task"] = sources.names[a.best_index];
  return out;
}

MergedModel ood_merge(const BasisModel& model, std::span<const double> theta0,
                      std::span<const double> target, OodMode mode,
                      std::span<const double> alpha_grid, const LossFn* evaluator) {
  TaskVectorMatrix recon = reconstruct(model);
  Alignment a = align_against(recon.columns, target);

  std::size_t pick_basis = 0;
  std::optional<double> rho;
  if (!model.encoder.empty()) {
    // The constructive choice behind the coverage bound: the basis carrying
    // the most encoder weight for the best-aligned source task.
    double best_w = -1.0;
    for (std::size_t m = 0; m < model.basis_count(); ++m) {
      double w = model.encoder(a.best_index, m);
      if (w > best_w) {
        best_w = w;
        pick_basis = m;
      }
    }
    rho = best_w;
  } else {
    double best_inner = 0.0;
    for (std::size_t m = 0; m < model.basis_count(); ++m) {
      double inner = dot(model.basis.col(m), target);
      if (m == 0 || inner > best_inner) {
        best_inner = inner;
        pick_basis = m;
      }
    }
  }

  std::vector<double> base(theta0.begin(), theta0.end());
  if (base.empty()) base.assign(model.dim(), 0.0);
  MergedModel out = ood_finish(std::move(base), model.basis.col(pick_basis), a, mode,
                               alpha_grid, evaluator, target);
  out.inputs_used = {"basis_" + std::to_string(pick_basis)};
  out.provenance["selected_task"] = model.source_names[a.best_index];
  out.provenance["selected_basis"] = pick_basis;
  if (rho) out.provenance["rho_hat"] = *rho;
  return out;
}

SubsamplePlan subsample_plan(std::span<const std::size_t> n_per_task, std::size_t m,
                             std::size_t t, std::uint64_t seed) {
  if (t == 0 || n_per_task.size() != t) {
    throw ValidationError("subsample_plan: need one sample count per task");
  }
  if (m < 1 || m > t) throw ValidationError("subsample_plan: m out of range [1, T]");

  SubsamplePlan plan;
  plan.counts.resize(t);
  plan.indices.resize(t);
  Rng rng(seed);
  const double ratio = static_cast<double>(m) / static_cast<double>(t);
  for (std::size_t i = 0; i < t; ++i) {
    if (n_per_task[i] == 0) {
      plan.counts[i] = 0;
      continue;
    }
    auto c = static_cast<std::size_t>(
        std::floor(static_cast<double>(n_per_task[i]) * ratio + 0.5));
    c = std::clamp<std::size_t>(c, 1, n_per_task[i]);
    plan.counts[i] = c;
    // Partial Fisher-Yates over [0, n_i).
    std::vector<std::size_t> pool(n_per_task[i]);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t pick = j + rng.index(pool.size() - j);
      std::swap(pool[j], pool[pick]);
    }
    pool.resize(c);
    std::sort(pool.begin(), pool.end());
    plan.indices[i] = std::move(pool);
  }
  return plan;
}

}  // namespace tvb
