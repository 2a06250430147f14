#include "tvb/bases.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "binary_io.hpp"

namespace tvb {

std::string to_string(BasisMethod m) {
  switch (m) {
    case BasisMethod::ae: return "ae";
    case BasisMethod::pca: return "pca";
    case BasisMethod::rand_select: return "rand-select";
    case BasisMethod::rand_proj: return "rand-proj";
  }
  throw ValidationError("unknown basis method tag");
}

BasisMethod basis_method_from_string(const std::string& s) {
  if (s == "ae") return BasisMethod::ae;
  if (s == "pca") return BasisMethod::pca;
  if (s == "rand-select" || s == "rand_select") return BasisMethod::rand_select;
  if (s == "rand-proj" || s == "rand_proj") return BasisMethod::rand_proj;
  throw ValidationError("unknown basis method '" + s + "'");
}

void AeConfig::validate() const {
  if (basis_count < 1) throw ValidationError("ae config: basis_count must be >= 1");
  if (steps < 1) throw ValidationError("ae config: steps must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("ae config: lr must be positive");
  if (!(tau0 > 0.0)) throw ValidationError("ae config: tau0 must be positive");
  if (weight_decay < 0.0) throw ValidationError("ae config: weight_decay must be >= 0");
  if (anneal) {
    if (anneal->period < 1) throw ValidationError("ae config: anneal period must be >= 1");
    if (!(anneal->factor > 0.0) || anneal->factor > 1.0) {
      throw ValidationError("ae config: anneal factor must be in (0, 1]");
    }
  }
}

Matrix softmax_columns(const Matrix& logits, double tau) {
  if (!(tau > 0.0)) throw ValidationError("softmax: temperature must be positive");
  Matrix w(logits.rows(), logits.cols());
  for (std::size_t m = 0; m < logits.cols(); ++m) {
    auto a = logits.col(m);
    auto out = w.col(m);
    double hi = -HUGE_VAL;
    for (double x : a) hi = std::max(hi, x / tau);
    double z = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[i] = std::exp(a[i] / tau - hi);
      z += out[i];
    }
    for (double& x : out) x /= z;
  }
  return w;
}

namespace {

// E = W_e W_d − I (T x T).
Matrix error_matrix(const Matrix& w_e, const Matrix& w_d) {
  Matrix e = matmul(w_e, w_d);
  for (std::size_t i = 0; i < e.rows(); ++i) e(i, i) -= 1.0;
  return e;
}

double loss_from(const Matrix& e, const Matrix& ge) {
  double s = 0.0;
  const double* pe = e.data();
  const double* pg = ge.data();
  for (std::size_t i = 0, n = e.rows() * e.cols(); i < n; ++i) s += pe[i] * pg[i];
  return s;
}

struct LossAndGrads {
  double loss = 0.0;
  Matrix d_logits;
  Matrix d_decoder;
};

// Single evaluation of Tr(EᵀGE) plus gradients w.r.t. logits and decoder.
LossAndGrads ae_step_eval(const GramMatrix& g, const Matrix& logits, const Matrix& w_d,
                          double tau) {
  const std::size_t t = g.size();
  const std::size_t m = logits.cols();
  if (logits.rows() != t || w_d.rows() != m || w_d.cols() != t) {
    throw ValidationError("ae gradients: shape mismatch between logits, decoder, gram");
  }
  Matrix w_e = softmax_columns(logits, tau);
  Matrix e = error_matrix(w_e, w_d);
  Matrix ge = matmul(g.entries(), e);

  LossAndGrads out;
  out.loss = loss_from(e, ge);
  out.d_decoder = 2.0 * transpose_matmul(w_e, ge);
  Matrix d_we = 2.0 * matmul(ge, transpose(w_d));
  // Chain through the column-wise softmax: J_m = (diag(w) − w wᵀ)/tau.
  out.d_logits = Matrix(t, m);
  for (std::size_t c = 0; c < m; ++c) {
    auto w = w_e.col(c);
    auto gcol = d_we.col(c);
    double wg = dot(w, gcol);
    auto dst = out.d_logits.col(c);
    for (std::size_t i = 0; i < t; ++i) dst[i] = w[i] * (gcol[i] - wg) / tau;
  }
  if (!all_finite(out.d_logits) || !all_finite(out.d_decoder) ||
      !std::isfinite(out.loss)) {
    throw NumericError("ae gradients: non-finite intermediate");
  }
  return out;
}

void assert_simplex_columns(const Matrix& w_e, const char* where) {
  for (std::size_t m = 0; m < w_e.cols(); ++m) {
    double sum = 0.0;
    for (double x : w_e.col(m)) {
      if (x < 0.0) throw NumericError(std::string(where) + ": negative encoder weight");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw NumericError(std::string(where) + ": encoder column sum " +
                         std::to_string(sum) + " off the simplex");
    }
  }
}

// Pseudoinverse-based least-squares decoder in Gram space:
//   W_d = (W_eᵀ G W_e)⁺ W_eᵀ G.
Matrix ols_decoder_gram(const GramMatrix& g, const Matrix& w_e,
                        std::vector<std::string>* notes) {
  Matrix s = transpose_matmul(w_e, matmul(g.entries(), w_e));  // M x M
  // Mirror to exact symmetry before the eigensolver.
  for (std::size_t j = 0; j < s.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) s(i, j) = s(j, i) = 0.5 * (s(i, j) + s(j, i));
  SymmetricEigen eig = jacobi_eigensym(s);
  double lmax = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
  double cut = 1e-12 * lmax;
  std::size_t kept = 0;
  std::vector<double> inv(eig.values.size(), 0.0);
  double lmin_kept = lmax;
  for (std::size_t i = 0; i < eig.values.size(); ++i) {
    if (eig.values[i] > cut) {
      inv[i] = 1.0 / eig.values[i];
      lmin_kept = eig.values[i];
      ++kept;
    }
  }
  if (notes) {
    if (kept < eig.values.size()) {
      notes->push_back("ols decoder: singular normal equations, pseudoinverse kept " +
                       std::to_string(kept) + "/" + std::to_string(eig.values.size()) +
                       " modes");
    } else if (lmin_kept > 0.0 && lmax / lmin_kept > 1e12) {
      notes->push_back("ols decoder: ill-conditioned normal equations, condition " +
                       std::to_string(lmax / lmin_kept));
    }
  }
  // V diag(inv) Vᵀ (W_eᵀ G)
  Matrix rhs = transpose_matmul(w_e, g.entries());  // M x T
  Matrix vt_rhs = transpose_matmul(eig.vectors, rhs);
  for (std::size_t c = 0; c < vt_rhs.cols(); ++c) {
    auto col = vt_rhs.col(c);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] *= inv[i];
  }
  return matmul(eig.vectors, vt_rhs);
}

// First-order optimizer with decoupled weight decay (AdamW update rule).
class AdamW {
 public:
  AdamW(std::size_t n, double lr, double weight_decay)
      : lr_(lr), wd_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
      double mhat = m_[i] / bc1;
      double vhat = v_[i] / bc2;
      params[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * params[i]);
    }
  }

 private:
  static constexpr double beta1_ = 0.9;
  static constexpr double beta2_ = 0.999;
  static constexpr double eps_ = 1e-8;
  double lr_;
  double wd_;
  std::uint64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace

double ae_loss_gram(const GramMatrix& g, const Matrix& w_e, const Matrix& w_d) {
  if (w_e.rows() != g.size() || w_d.cols() != g.size() || w_e.cols() != w_d.rows()) {
    throw ValidationError("ae_loss_gram: shape mismatch");
  }
  Matrix e = error_matrix(w_e, w_d);
  Matrix ge = matmul(g.entries(), e);
  return loss_from(e, ge);
}

AeGradients ae_gradients(const GramMatrix& g, const EncoderParams& encoder,
                         const Matrix& w_d, double tau) {
  LossAndGrads r = ae_step_eval(g, encoder.logits, w_d, tau);
  return {std::move(r.d_logits), std::move(r.d_decoder)};
}

double ae_gradient_check(const GramMatrix& g, const EncoderParams& encoder,
                         const Matrix& w_d, double tau, double h) {
  const Matrix& logits = encoder.logits;
  AeGradients analytic = ae_gradients(g, encoder, w_d, tau);
  auto rel = [](double a, double fd) {
    return std::abs(a - fd) / std::max(1.0, std::abs(fd));
  };
  double worst = 0.0;
  Matrix a = logits;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double keep = a(r, c);
      a(r, c) = keep + h;
      double up = ae_loss_gram(g, softmax_columns(a, tau), w_d);
      a(r, c) = keep - h;
      double dn = ae_loss_gram(g, softmax_columns(a, tau), w_d);
      a(r, c) = keep;
      worst = std::max(worst, rel(analytic.d_logits(r, c), (up - dn) / (2.0 * h)));
    }
  }
  Matrix w = w_d;
  Matrix w_e = softmax_columns(logits, tau);
  for (std::size_t c = 0; c < w.cols(); ++c) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double keep = w(r, c);
      w(r, c) = keep + h;
      double up = ae_loss_gram(g, w_e, w);
      w(r, c) = keep - h;
      double dn = ae_loss_gram(g, w_e, w);
      w(r, c) = keep;
      worst = std::max(worst, rel(analytic.d_decoder(r, c), (up - dn) / (2.0 * h)));
    }
  }
  return worst;
}

BasisModel fit_ae(const TaskVectorMatrix& m, const AeConfig& cfg) {
  cfg.validate();
  const std::size_t t = m.count();
  const std::size_t mm = cfg.basis_count;
  std::vector<std::string> warnings;
  if (mm >= t) {
    warnings.push_back("basis count " + std::to_string(mm) +
                       " >= task count " + std::to_string(t) +
                       "; compression is a no-op");
  }

  GramMatrix g = gram(m);
  const double tr_g = trace(g.entries());
  const double diverge_at = 1e3 * tr_g;

  // Near-uniform start: small logits keep every column close to 1/T, which
  // matches the high-temperature regime.
  Rng rng(cfg.seed);
  Matrix logits(t, mm);
  if (cfg.init_logits) {
    if (cfg.init_logits->rows() != t || cfg.init_logits->cols() != mm) {
      throw ValidationError("fit_ae: init_logits shape must be T x M");
    }
    logits = *cfg.init_logits;
  } else {
    for (std::size_t c = 0; c < mm; ++c)
      for (std::size_t r = 0; r < t; ++r) logits(r, c) = 0.01 * rng.normal();
  }

  double tau = cfg.tau0;
  Matrix w_d = transpose(softmax_columns(logits, tau));  // symmetric warm start

  if (cfg.validate_gradients) {
    double err = ae_gradient_check(g, EncoderParams{logits}, w_d, tau);
    if (err > cfg.tol_grad) {
      throw NumericError("fit_ae: analytic gradient check failed, max relative error " +
                         std::to_string(err));
    }
  }

  AdamW opt_logits(t * mm, cfg.lr, cfg.weight_decay);
  AdamW opt_decoder(mm * t, cfg.lr, cfg.weight_decay);

  std::vector<double> recent;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    LossAndGrads eval;
    try {
      eval = ae_step_eval(g, logits, w_d, tau);
    } catch (const NumericError& e) {
      throw NumericError("fit_ae: " + std::string(e.what()) + " at step " +
                         std::to_string(step));
    }
    recent.push_back(eval.loss);
    if (recent.size() > 8) recent.erase(recent.begin());
    if (eval.loss > diverge_at) {
      std::string trail;
      for (double l : recent) trail += std::to_string(l) + " ";
      throw NumericError("fit_ae: diverged at step " + std::to_string(step) +
                         ", loss " + std::to_string(eval.loss) +
                         " > 1e3 * Tr(G); recent losses: " + trail);
    }

    opt_logits.step({logits.data(), t * mm},
                    {eval.d_logits.data(), t * mm});
    opt_decoder.step({w_d.data(), mm * t},
                     {eval.d_decoder.data(), mm * t});

    assert_simplex_columns(softmax_columns(logits, tau), "fit_ae");

    if (cfg.anneal && step % cfg.anneal->period == 0) {
      tau *= cfg.anneal->factor;
    }
  }

  Matrix w_e = softmax_columns(logits, tau);
  if (cfg.decoder_mode == DecoderMode::ols_refit) {
    w_d = ols_decoder_gram(g, w_e, &warnings);
  }

  BasisModel model;
  model.method = BasisMethod::ae;
  model.encoder = w_e;
  model.decoder = w_d;
  model.basis = matmul(m.columns, w_e);
  model.loss = ae_loss_gram(g, w_e, w_d);
  model.source_names = m.names;
  model.meta["config"] = {
      {"basis_count", cfg.basis_count},
      {"steps", cfg.steps},
      {"lr", cfg.lr},
      {"tau0", cfg.tau0},
      {"weight_decay", cfg.weight_decay},
      {"decoder_mode", cfg.decoder_mode == DecoderMode::joint ? "joint" : "ols_refit"},
  };
  if (cfg.anneal) {
    model.meta["config"]["anneal"] = {{"period", cfg.anneal->period},
                                      {"factor", cfg.anneal->factor}};
  }
  model.meta["seed"] = cfg.seed;
  model.meta["final_tau"] = tau;
  if (!warnings.empty()) model.meta["warnings"] = warnings;
  return model;
}

BasisModel fit_pca(const TaskVectorMatrix& m, std::size_t basis_count, bool center) {
  if (basis_count < 1) throw ValidationError("fit_pca: basis_count must be >= 1");
  const std::size_t t = m.count();
  if (basis_count > t) {
    throw ValidationError("fit_pca: basis_count exceeds task count");
  }
  std::vector<std::string> warnings;

  Matrix x = m.columns;
  std::optional<std::vector<double>> mu;
  if (center) {
    std::vector<double> mean(m.dim(), 0.0);
    for (std::size_t c = 0; c < t; ++c) axpy(1.0, x.col(c), mean);
    scale(mean, 1.0 / static_cast<double>(t));
    for (std::size_t c = 0; c < t; ++c) axpy(-1.0, mean, x.col(c));
    mu = std::move(mean);
  }

  GramMatrix gc = gram_columns(x);
  const GramEigensystem& sys = gc.eigensystem();
  std::size_t mm = basis_count;
  if (mm > sys.rank) {
    warnings.push_back("requested " + std::to_string(mm) +
                       " components but numerical rank is " +
                       std::to_string(sys.rank) + "; reduced");
    mm = std::max<std::size_t>(sys.rank, 1);
  }

  Matrix v(t, mm);
  for (std::size_t c = 0; c < mm; ++c) {
    auto src = sys.vectors.col(c);
    std::copy(src.begin(), src.end(), v.col(c).begin());
    // Sign convention: the max-|entry| coordinate is nonnegative.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < t; ++i)
      if (std::abs(src[i]) > std::abs(src[arg])) arg = i;
    if (src[arg] < 0.0) scale(v.col(c), -1.0);
  }

  BasisModel model;
  model.method = BasisMethod::pca;
  model.basis = matmul(x, v);  // U_M S_M
  model.decoder = transpose(v);
  // Surrogate weights: uniform over tasks (the merging default when encoder
  // weights are undefined for principal components).
  model.encoder = Matrix(t, mm);
  for (std::size_t c = 0; c < mm; ++c)
    for (std::size_t r = 0; r < t; ++r) model.encoder(r, c) = 1.0 / static_cast<double>(t);
  model.mean = std::move(mu);
  double lb = 0.0;
  for (std::size_t i = mm; i < sys.rank; ++i) lb += sys.values[i];
  model.loss = lb;
  model.source_names = m.names;
  model.meta["config"] = {{"basis_count", basis_count}, {"center", center}};
  if (!warnings.empty()) model.meta["warnings"] = warnings;
  return model;
}

PcaSurrogateWeights pca_positive_softmax_weights(const BasisModel& model) {
  if (model.method != BasisMethod::pca) {
    throw ValidationError("pca_positive_softmax_weights: model is not a PCA fit");
  }
  const std::size_t t = model.task_count();
  const std::size_t mm = model.basis_count();
  PcaSurrogateWeights out;
  out.weights = Matrix(t, mm);
  for (std::size_t c = 0; c < mm; ++c) {
    // Loadings for component c sit in decoder row c.
    double hi = -HUGE_VAL;
    for (std::size_t i = 0; i < t; ++i)
      if (model.decoder(c, i) > 0.0) hi = std::max(hi, model.decoder(c, i));
    if (hi == -HUGE_VAL) {
      for (std::size_t i = 0; i < t; ++i) out.weights(i, c) = 1.0 / static_cast<double>(t);
      out.fallback_columns.push_back(c);
      continue;
    }
    double z = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      double v = model.decoder(c, i);
      if (v > 0.0) {
        out.weights(i, c) = std::exp(v - hi);
        z += out.weights(i, c);
      }
    }
    for (std::size_t i = 0; i < t; ++i) out.weights(i, c) /= z;
  }
  return out;
}

BasisModel fit_rand_select(const TaskVectorMatrix& m, std::size_t basis_count,
                           std::uint64_t seed) {
  const std::size_t t = m.count();
  if (basis_count < 1 || basis_count > t) {
    throw ValidationError("fit_rand_select: basis_count out of range");
  }
  Rng rng(seed);
  std::vector<std::size_t> idx(t);
  for (std::size_t i = 0; i < t; ++i) idx[i] = i;
  for (std::size_t i = 0; i < basis_count; ++i) {
    std::size_t j = i + rng.index(t - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(basis_count);

  GramMatrix g = gram(m);
  BasisModel model;
  model.method = BasisMethod::rand_select;
  model.encoder = Matrix(t, basis_count);
  model.basis = Matrix(m.dim(), basis_count);
  for (std::size_t c = 0; c < basis_count; ++c) {
    model.encoder(idx[c], c) = 1.0;
    auto src = m.columns.col(idx[c]);
    std::copy(src.begin(), src.end(), model.basis.col(c).begin());
  }
  std::vector<std::string> notes;
  if (basis_count == t) {
    // Full selection is a permutation; its least-squares decoder is exactly
    // the inverse permutation, so write it in closed form.
    model.decoder = transpose(model.encoder);
  } else {
    model.decoder = ols_decoder_gram(g, model.encoder, &notes);
  }
  model.loss = ae_loss_gram(g, model.encoder, model.decoder);
  model.source_names = m.names;
  model.meta["config"] = {{"basis_count", basis_count}};
  model.meta["seed"] = seed;
  model.meta["selected_indices"] = idx;
  if (!notes.empty()) model.meta["warnings"] = notes;
  return model;
}

BasisModel fit_rand_proj(const TaskVectorMatrix& m, std::size_t basis_count,
                         std::uint64_t seed) {
  if (basis_count < 1 || basis_count > m.dim()) {
    throw ValidationError("fit_rand_proj: basis_count out of range [1, d]");
  }
  Matrix q = random_orthonormal(m.dim(), basis_count, seed);
  BasisModel model;
  model.method = BasisMethod::rand_proj;
  model.basis = q;
  model.decoder = transpose_matmul(q, m.columns);  // Qᵀ T
  // Exact residual of the subspace projection, column by column.
  double loss = 0.0;
  std::vector<double> recon(m.dim());
  for (std::size_t c = 0; c < m.count(); ++c) {
    std::fill(recon.begin(), recon.end(), 0.0);
    for (std::size_t k = 0; k < basis_count; ++k) {
      axpy(model.decoder(k, c), q.col(k), recon);
    }
    auto col = m.columns.col(c);
    for (std::size_t i = 0; i < recon.size(); ++i) {
      double r = col[i] - recon[i];
      loss += r * r;
    }
  }
  model.loss = loss;
  model.source_names = m.names;
  model.meta["config"] = {{"basis_count", basis_count}};
  model.meta["seed"] = seed;
  return model;
}

AchievabilityCertificate achievability_certificate(const GramMatrix& g, std::size_t m,
                                                   std::size_t budget,
                                                   std::uint64_t seed) {
  const std::size_t t = g.size();
  if (m < 1 || m > t) throw ValidationError("achievability_certificate: m out of range");
  const GramEigensystem& sys = g.eigensystem();

  Matrix top(t, m);
  for (std::size_t c = 0; c < m; ++c) {
    auto src = sys.vectors.col(c);
    std::copy(src.begin(), src.end(), top.col(c).begin());
  }

  auto project = [&](std::span<const double> x) {
    std::vector<double> coeff(m, 0.0);
    for (std::size_t c = 0; c < m; ++c) coeff[c] = dot(top.col(c), x);
    return matvec(top, coeff);
  };

  auto strictly_positive = [](std::span<const double> x) {
    double hi = 0.0;
    for (double v : x) hi = std::max(hi, std::abs(v));
    if (hi == 0.0) return false;
    for (double v : x) {
      if (v <= 1e-10 * hi) return false;
    }
    return true;
  };

  AchievabilityCertificate cert;
  std::vector<std::vector<double>> accepted;   // raw witnesses
  std::vector<std::vector<double>> ortho;      // orthonormalized span of accepted

  auto try_candidate = [&](std::vector<double> x) {
    ++cert.candidates_tried;
    double hi = 0.0;
    for (double v : x) hi = std::max(hi, std::abs(v));
    if (hi == 0.0) return;
    bool all_neg = true;
    for (double v : x)
      if (v > 0.0) { all_neg = false; break; }
    if (all_neg) scale(x, -1.0);
    if (!strictly_positive(x)) return;
    // Independence against the accepted set.
    std::vector<double> r = x;
    scale(r, 1.0 / norm(r));
    for (const auto& u : ortho) axpy(-dot(u, r), u, r);
    if (norm(r) <= 1e-8) return;
    scale(r, 1.0 / norm(r));
    ortho.push_back(std::move(r));
    accepted.push_back(std::move(x));
  };

  // Deterministic candidates first: projections of the all-ones direction and
  // its coordinate bumps (covers Perron-like and full-budget cases), then the
  // eigenvectors themselves.
  std::vector<double> ones(t, 1.0);
  try_candidate(project(ones));
  for (std::size_t i = 0; i < t && accepted.size() < m; ++i) {
    std::vector<double> v = ones;
    v[i] += 0.5;
    try_candidate(project(v));
  }
  for (std::size_t c = 0; c < m && accepted.size() < m; ++c) {
    auto src = top.col(c);
    try_candidate(std::vector<double>(src.begin(), src.end()));
  }

  Rng rng(seed);
  while (accepted.size() < m && cert.candidates_tried < budget) {
    std::vector<double> coeff(m);
    for (double& c : coeff) c = rng.normal();
    try_candidate(matvec(top, coeff));
  }

  if (accepted.size() == m) {
    cert.achievable = true;
    for (auto& w : accepted) {
      double s = 0.0;
      for (double v : w) s += v;
      scale(w, 1.0 / s);
      cert.witnesses.push_back(std::move(w));
    }
  }
  return cert;
}

std::vector<double> softmax_logits_for(std::span<const double> b, double tau) {
  if (!(tau > 0.0)) throw ValidationError("softmax_logits_for: tau must be positive");
  double sum = 0.0;
  for (double x : b) {
    if (!(x > 0.0)) {
      throw ValidationError("softmax_logits_for: point has a non-positive coordinate");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("softmax_logits_for: coordinates sum to " +
                          std::to_string(sum) + ", not 1");
  }
  std::vector<double> a(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) a[i] = tau * std::log(b[i]);
  return a;
}

// ---------------------------------------------------------------------------
// TVBM1 container
// ---------------------------------------------------------------------------

namespace {
constexpr char kModelMagic[5] = {'T', 'V', 'B', 'M', '1'};

void write_matrix(detail::ByteWriter& w, const Matrix& m, FloatWidth width) {
  for (std::size_t c = 0; c < m.cols(); ++c)
    for (double x : m.col(c)) w.scalar(x, width);
}

Matrix read_matrix(detail::ByteReader& r, std::size_t rows, std::size_t cols,
                   FloatWidth width, const char* what) {
  Matrix m(rows, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    auto out = m.col(c);
    for (std::size_t i = 0; i < rows; ++i) {
      std::uint64_t off = r.offset();
      out[i] = r.scalar(width, what);
      if (!std::isfinite(out[i])) {
        throw FormatError(r.origin() + ": non-finite value in " + what, off);
      }
    }
  }
  return m;
}
}  // namespace

void save_model(const BasisModel& model, const std::filesystem::path& path,
                FloatWidth width) {
  detail::ByteWriter w;
  w.raw(std::string(kModelMagic, 5));
  w.u8(static_cast<std::uint8_t>(width));
  w.u32(static_cast<std::uint32_t>(model.dim()));
  w.u32(static_cast<std::uint32_t>(model.task_count()));
  w.u8(static_cast<std::uint8_t>(model.method));
  w.u32(static_cast<std::uint32_t>(model.basis_count()));
  std::uint8_t flags = 0;
  if (model.mean) flags |= 1;
  if (!model.encoder.empty()) flags |= 2;
  w.u8(flags);
  write_matrix(w, model.basis, width);
  if (!model.encoder.empty()) write_matrix(w, model.encoder, width);
  write_matrix(w, model.decoder, width);
  if (model.mean) {
    for (double x : *model.mean) w.scalar(x, width);
  }
  w.scalar(model.loss, FloatWidth::f64);
  nlohmann::json meta = model.meta;
  meta["source_names"] = model.source_names;
  meta["method"] = to_string(model.method);
  std::string meta_text = meta.dump();
  w.u32(static_cast<std::uint32_t>(meta_text.size()));
  w.raw(meta_text);
  detail::write_file(path, w.bytes());
}

BasisModel load_model(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> raw = detail::read_file(path);
  const std::string origin = path.filename().string();
  detail::ByteReader r(raw, origin);

  r.require(5, "magic");
  if (std::memcmp(raw.data(), kModelMagic, 5) != 0) {
    throw FormatError(origin + ": bad magic, expected TVBM1", 0);
  }
  r.bytes(5, "magic");

  std::uint64_t width_off = r.offset();
  std::uint8_t width_flag = r.u8("float width flag");
  if (width_flag != 4 && width_flag != 8) {
    throw FormatError(origin + ": float width flag must be 4 or 8", width_off);
  }
  FloatWidth width = width_flag == 4 ? FloatWidth::f32 : FloatWidth::f64;

  std::uint32_t d = r.u32("dimension d");
  std::uint32_t t = r.u32("task count T");
  std::uint64_t tag_off = r.offset();
  std::uint8_t tag = r.u8("method tag");
  if (tag > 3) throw FormatError(origin + ": unknown method tag " + std::to_string(tag), tag_off);
  std::uint32_t mm = r.u32("basis count M");
  if (d == 0 || t == 0 || mm == 0) {
    throw FormatError(origin + ": zero dimension in header", tag_off);
  }
  std::uint8_t flags = r.u8("flags");

  BasisModel model;
  model.method = static_cast<BasisMethod>(tag);
  model.basis = read_matrix(r, d, mm, width, "basis matrix");
  if (flags & 2) model.encoder = read_matrix(r, t, mm, width, "encoder matrix");
  model.decoder = read_matrix(r, mm, t, width, "decoder matrix");
  if (flags & 1) {
    std::vector<double> mu(d);
    for (std::uint32_t i = 0; i < d; ++i) {
      std::uint64_t off = r.offset();
      mu[i] = r.scalar(width, "mean vector");
      if (!std::isfinite(mu[i])) throw FormatError(origin + ": non-finite mean entry", off);
    }
    model.mean = std::move(mu);
  }
  model.loss = r.scalar(FloatWidth::f64, "loss");

  std::uint64_t meta_off = r.offset();
  std::uint32_t meta_len = r.u32("metadata length");
  std::string meta_text = r.bytes(meta_len, "metadata JSON");
  if (!r.exhausted()) {
    throw FormatError(origin + ": trailing bytes after metadata block", r.offset());
  }
  nlohmann::json meta = nlohmann::json::parse(meta_text, nullptr, false);
  if (meta.is_discarded()) {
    throw FormatError(origin + ": metadata block is not valid JSON", meta_off);
  }
  if (meta.contains("source_names") && meta["source_names"].is_array() &&
      meta["source_names"].size() == t) {
    for (const auto& n : meta["source_names"]) {
      model.source_names.push_back(n.get<std::string>());
    }
  } else {
    for (std::uint32_t i = 0; i < t; ++i) {
      model.source_names.push_back("task_" + std::to_string(i));
    }
  }
  meta.erase("source_names");
  meta.erase("method");
  model.meta = std::move(meta);
  return model;
}

}  // namespace tvb
