#include "tvb/online.hpp"

#include <chrono>
#include <cmath>

namespace tvb {

std::string to_string(CompactionMethod m) {
  switch (m) {
    case CompactionMethod::ae: return "ae";
    case CompactionMethod::rand_select: return "rand-select";
  }
  throw ValidationError("unknown compaction method tag");
}

CompactionMethod compaction_method_from_string(const std::string& s) {
  if (s == "ae") return CompactionMethod::ae;
  if (s == "rand-select" || s == "rand_select") return CompactionMethod::rand_select;
  throw ValidationError("unknown compaction method '" + s + "'");
}

void OnlineConfig::validate() const {
  if (budget < 1) throw ValidationError("online config: budget must be >= 1");
  if (merge_spec.method == MergeMethod::lns) {
    throw ValidationError("online config: online merging supports ta and ties only");
  }
  merge_spec.validate();
  ae.validate();
}

BufferState make_buffer(OnlineConfig config, std::vector<double> theta0) {
  config.validate();
  if (theta0.empty()) throw ValidationError("make_buffer: theta0 must be nonempty");
  BufferState s;
  s.config = std::move(config);
  s.theta0 = std::move(theta0);
  s.stored = Matrix(s.theta0.size(), 0);
  return s;
}

namespace {

// Distinct deterministic sub-seed per (run seed, step).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t step) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (step + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Matrix drop_column(const Matrix& m, std::size_t drop) {
  Matrix out(m.rows(), m.cols() - 1);
  std::size_t w = 0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (c == drop) continue;
    auto src = m.col(c);
    std::copy(src.begin(), src.end(), out.col(w++).begin());
  }
  return out;
}

struct Compaction {
  Matrix kept;  // d x (M-1)
  std::vector<std::string> labels;
  bool ae_fallback = false;
};

Compaction compact_buffer(const BufferState& state) {
  const std::size_t m = state.config.budget;
  Compaction out;
  if (m == 1) {
    out.kept = Matrix(state.theta0.size(), 0);
    return out;
  }

  auto rand_select_drop = [&]() {
    Rng rng(mix_seed(state.config.seed, state.step));
    std::size_t drop = rng.index(m);
    Compaction c;
    c.kept = drop_column(state.stored, drop);
    for (std::size_t i = 0; i < m; ++i) {
      if (i != drop) c.labels.push_back(state.labels[i]);
    }
    return c;
  };

  if (state.config.compaction == CompactionMethod::rand_select) {
    return rand_select_drop();
  }

  TaskVectorMatrix buffer =
      TaskVectorMatrix::make(state.stored, state.labels, state.theta0);
  AeConfig cfg = state.config.ae;
  cfg.basis_count = m - 1;
  cfg.seed = mix_seed(state.config.seed, state.step);
  try {
    BasisModel model = fit_ae(buffer, cfg);
    out.kept = model.basis;  // U = B W_e
    for (std::size_t i = 0; i + 1 < m; ++i) {
      out.labels.push_back("b" + std::to_string(state.step) + "_" + std::to_string(i));
    }
    return out;
  } catch (const NumericError&) {
    // AE divergence: degrade to a random drop and flag the event.
    Compaction c = rand_select_drop();
    c.ae_fallback = true;
    return c;
  }
}

}  // namespace

OnlineStepResult online_step(BufferState& state, std::span<const double> tau,
                             const std::string& label, const LossFn& evaluator) {
  if (tau.size() != state.theta0.size()) {
    throw ValidationError("online_step: vector dimension mismatch");
  }
  state.step += 1;
  OnlineStepResult result;

  auto t0 = std::chrono::steady_clock::now();
  if (state.size() >= state.config.budget) {
    Compaction c = compact_buffer(state);
    state.stored = std::move(c.kept);
    state.labels = std::move(c.labels);
    state.compaction_count += 1;
    result.compacted = true;
    result.ae_fallback = c.ae_fallback;
    if (c.ae_fallback) state.ae_fallback_count += 1;
  }
  {
    Matrix grown(state.stored.rows(), state.stored.cols() + 1);
    for (std::size_t c = 0; c < state.stored.cols(); ++c) {
      auto src = state.stored.col(c);
      std::copy(src.begin(), src.end(), grown.col(c).begin());
    }
    std::copy(tau.begin(), tau.end(), grown.col(state.stored.cols()).begin());
    state.stored = std::move(grown);
    state.labels.push_back(label.empty() ? "tau_" + std::to_string(state.step) : label);
  }
  auto t1 = std::chrono::steady_clock::now();

  MergeInput input;
  input.vectors = state.stored;
  input.theta0 = state.theta0;
  input.vector_names = state.labels;
  input.task_names = state.labels;
  result.merged = state.config.merge_spec.method == MergeMethod::ties
                      ? merge_ties(input, evaluator, state.config.merge_spec)
                      : merge_ta(input, evaluator, state.config.merge_spec);
  auto t2 = std::chrono::steady_clock::now();

  result.compaction_seconds = std::chrono::duration<double>(t1 - t0).count();
  result.merge_seconds = std::chrono::duration<double>(t2 - t1).count();

  state.history.push_back({{"step", state.step},
                           {"buffer", state.labels},
                           {"compacted", result.compacted},
                           {"ae_fallback", result.ae_fallback},
                           {"merge", result.merged.provenance}});
  if (state.size() > state.config.budget) {
    throw NumericError("online_step: buffer exceeded budget (internal error)");
  }
  return result;
}

StreamReport run_stream(const Matrix& stream, const std::vector<std::string>& names,
                        std::span<const double> theta0, const OnlineConfig& config,
                        const TaskScoreFn& scorer) {
  if (stream.cols() == 0) throw ValidationError("run_stream: empty stream");
  if (!names.empty() && names.size() != stream.cols()) {
    throw ValidationError("run_stream: name count does not match stream length");
  }

  BufferState state =
      make_buffer(config, std::vector<double>(theta0.begin(), theta0.end()));
  StreamReport report;
  for (std::size_t t = 0; t < stream.cols(); ++t) {
    const std::size_t seen = t + 1;
    LossFn evaluator = [&scorer, seen](std::span<const double> theta) {
      double s = 0.0;
      for (std::size_t i = 0; i < seen; ++i) s += scorer(i, theta);
      return s / static_cast<double>(seen);
    };
    OnlineStepResult step = online_step(
        state, stream.col(t), names.empty() ? "" : names[t], evaluator);

    StreamStep rec;
    rec.step = seen;
    rec.buffer_size = state.size();
    rec.compacted = step.compacted;
    rec.ae_fallback = step.ae_fallback;
    rec.compaction_seconds = step.compaction_seconds;
    rec.merge_seconds = step.merge_seconds;
    rec.theta = step.merged.theta;
    rec.buffer_labels = state.labels;
    rec.scores.resize(seen);
    std::vector<std::exception_ptr> errors(seen);
    parallel_for(seen, [&](std::size_t i) {
      try {
        rec.scores[i] = scorer(i, step.merged.theta);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    double sum = 0.0;
    for (double s : rec.scores) sum += s;
    rec.mean_score = sum / static_cast<double>(seen);
    if (t + 1 == stream.cols()) report.final_theta = step.merged.theta;
    report.steps.push_back(std::move(rec));
  }
  report.compaction_count = state.compaction_count;
  report.ae_fallback_count = state.ae_fallback_count;
  return report;
}

}  // namespace tvb
