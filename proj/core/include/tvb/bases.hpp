#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tvb/vecstore.hpp"

namespace tvb {

enum class BasisMethod : std::uint8_t { ae = 0, pca = 1, rand_select = 2, rand_proj = 3 };

std::string to_string(BasisMethod m);
BasisMethod basis_method_from_string(const std::string& s);

enum class DecoderMode : std::uint8_t { joint = 0, ols_refit = 1 };

// Multiply the temperature by `factor` every `period` optimizer steps.
struct AnnealSchedule {
  std::size_t period = 500;
  double factor = 0.8;
};

struct AeConfig {
  std::size_t basis_count = 4;
  std::size_t steps = 4000;
  double lr = 0.01;
  double tau0 = 5.0;
  std::optional<AnnealSchedule> anneal;
  double weight_decay = 1e-6;
  std::uint64_t seed = 0;
  DecoderMode decoder_mode = DecoderMode::joint;
  // Validate analytic gradients against central finite differences once at
  // initialization when true; tol_grad is the accepted max relative error.
  bool validate_gradients = false;
  double tol_grad = 1e-5;
  // Logit override (T x M); default is a seeded Gaussian(0, 0.01^2) draw.
  std::optional<Matrix> init_logits;

  void validate() const;
};

// Pre-softmax encoder logits (T x M).
struct EncoderParams {
  Matrix logits;
};

// Fitted compression artifact. encoder columns live on the probability
// simplex for ae/rand_select; pca stores surrogate weights (uniform 1/T);
// rand_proj has no encoder (empty matrix). For ae/rand_select the basis
// satisfies B = T * W_e; for pca B = U_M S_M of the (optionally centered)
// collection; for rand_proj B = Q and the decoder holds Qᵀ T.
struct BasisModel {
  BasisMethod method = BasisMethod::ae;
  Matrix basis;    // d x M
  Matrix encoder;  // T x M (empty for rand_proj)
  Matrix decoder;  // M x T
  std::optional<std::vector<double>> mean;  // PCA mu when centered
  double loss = 0.0;
  std::vector<std::string> source_names;
  nlohmann::json meta = nlohmann::json::object();  // config, seed, warnings

  std::size_t dim() const { return basis.rows(); }
  std::size_t basis_count() const { return basis.cols(); }
  std::size_t task_count() const { return decoder.cols(); }
};

// Column-wise softmax at temperature tau.
Matrix softmax_columns(const Matrix& logits, double tau);

// Tr(EᵀGE) with E = W_e W_d − I; equals ‖T W_e W_d − T‖_F² for G = TᵀT.
double ae_loss_gram(const GramMatrix& g, const Matrix& w_e, const Matrix& w_d);

struct AeGradients {
  Matrix d_logits;   // T x M
  Matrix d_decoder;  // M x T
};

// Analytic gradients of ae_loss_gram w.r.t. the encoder logits (through the
// column-wise softmax at temperature tau) and the decoder.
AeGradients ae_gradients(const GramMatrix& g, const EncoderParams& encoder,
                         const Matrix& w_d, double tau);

// Max relative error of ae_gradients vs central finite differences (step h).
double ae_gradient_check(const GramMatrix& g, const EncoderParams& encoder,
                         const Matrix& w_d, double tau, double h = 1e-5);

BasisModel fit_ae(const TaskVectorMatrix& m, const AeConfig& cfg);

// Rank-M PCA through the Gram eigensystem of the (optionally centered)
// collection; B = U_M S_M, decoder = V_Mᵀ. If m exceeds the numerical rank it
// is reduced, with a note in meta.
BasisModel fit_pca(const TaskVectorMatrix& m, std::size_t basis_count, bool center);

// Surrogate encoder for a PCA model: per column, softmax over the strictly
// positive loadings, zero elsewhere. A column with no positive loading falls
// back to uniform 1/T and its index is reported in fallback_columns.
struct PcaSurrogateWeights {
  Matrix weights;  // T x M, each column sums to 1
  std::vector<std::size_t> fallback_columns;
};

PcaSurrogateWeights pca_positive_softmax_weights(const BasisModel& model);

BasisModel fit_rand_select(const TaskVectorMatrix& m, std::size_t basis_count,
                           std::uint64_t seed);

BasisModel fit_rand_proj(const TaskVectorMatrix& m, std::size_t basis_count,
                         std::uint64_t seed);

// Randomized search for M linearly independent strictly positive vectors in
// the top-M eigenspace of g. `achievable == false` means "not found within
// budget", never a proof of impossibility. Witnesses are normalized to the
// simplex.
struct AchievabilityCertificate {
  bool achievable = false;
  std::vector<std::vector<double>> witnesses;
  std::size_t candidates_tried = 0;
};

AchievabilityCertificate achievability_certificate(const GramMatrix& g, std::size_t m,
                                                   std::size_t budget = 10000,
                                                   std::uint64_t seed = 0);

// Logits whose softmax at temperature tau reproduces the strictly positive
// simplex point b: a_i = tau * log(b_i).
std::vector<double> softmax_logits_for(std::span<const double> b, double tau);

// TVBM1 container (little-endian): magic "TVBM1", u8 float width, u32 d,
// u32 T, u8 method tag, u32 M, u8 flags (bit0 mean, bit1 encoder), then
// basis, encoder?, decoder, mean?, f64 loss, u32 metadata length + JSON
// metadata (config, seed, source names).
void save_model(const BasisModel& model, const std::filesystem::path& path,
                FloatWidth width = FloatWidth::f64);
BasisModel load_model(const std::filesystem::path& path);

}  // namespace tvb
