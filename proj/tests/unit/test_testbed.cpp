#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "tvb/testbed.hpp"

using namespace tvb;

namespace {

SuiteProfile clustered(std::size_t k, double cos_in, double cos_out) {
  SuiteProfile p;
  p.kind = SuiteProfile::Kind::clustered;
  p.clusters = k;
  p.cos_in = cos_in;
  p.cos_out = cos_out;
  return p;
}

SuiteProfile planted(double gamma) {
  SuiteProfile p;
  p.kind = SuiteProfile::Kind::planted_target;
  p.gamma = gamma;
  return p;
}

double pair_cos(const TaskVectorMatrix& m, std::size_t i, std::size_t j) {
  return dot(m.columns.col(i), m.columns.col(j)) /
         (norm(m.columns.col(i)) * norm(m.columns.col(j)));
}

std::vector<double> dirichlet_uniform(std::size_t n, Rng& rng) {
  std::vector<double> a(n);
  double sum = 0.0;
  for (double& x : a) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  for (double& x : a) x /= sum;
  return a;
}

}  // namespace

TEST_CASE("orthogonal suite realizes near-zero cosines") {
  QuadraticTaskSuite suite = generate_suite({}, 32, 6, {0.5, 1.5}, 3);
  TaskVectorMatrix m = suite.task_matrix();
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      CHECK(std::abs(pair_cos(m, i, j)) <= 0.02);
    }
  }
  TheoryConstants k = measure_constants(suite);
  CHECK(k.epsilon <= 0.02);
}

TEST_CASE("clustered suite realizes the requested cosine structure") {
  QuadraticTaskSuite suite = generate_suite(clustered(2, 0.9, 0.0), 48, 6, {1.0, 1.0}, 4);
  TaskVectorMatrix m = suite.task_matrix();
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      bool same = (i % 2) == (j % 2);
      if (same) {
        CHECK(pair_cos(m, i, j) >= 0.88);
      } else {
        CHECK(std::abs(pair_cos(m, i, j)) <= 0.02);
      }
    }
  }
}

TEST_CASE("planted target realizes gamma") {
  QuadraticTaskSuite suite = generate_suite(planted(0.8), 24, 5, {0.7, 1.3}, 5);
  REQUIRE(suite.target.has_value());
  TheoryConstants k = measure_constants(suite, &*suite.target);
  REQUIRE(k.gamma.has_value());
  CHECK(*k.gamma >= 0.78);
  CHECK(*k.gamma <= 0.82);
}

TEST_CASE("infeasible cosine structure is rejected before sampling") {
  // cos_out = -0.9 across 3+ tasks cannot form a PSD Gram.
  CHECK_THROWS_AS(generate_suite(clustered(3, 0.9, -0.9), 32, 6, {1.0, 1.0}, 6),
                  ValidationError);
}

TEST_CASE("hessian storage is exact against a dense brute force") {
  Rng rng(7);
  const std::size_t d = 12;
  HessianSpec h;
  h.diagonal.resize(d);
  for (double& v : h.diagonal) v = rng.uniform(0.1, 2.0);
  h.lowrank = random_gaussian(d, 2, rng);

  // Dense H = diag + L Lᵀ.
  Matrix dense(d, d);
  for (std::size_t i = 0; i < d; ++i) dense(i, i) = h.diagonal[i];
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        dense(i, j) += h.lowrank(i, r) * h.lowrank(j, r);
      }
    }
  }
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> delta(d);
    for (double& v : delta) v = rng.normal();
    double brute = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        brute += delta[i] * dense(i, j) * delta[j];
      }
    }
    CHECK(h.quadratic(delta) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("measure_constants closed forms") {
  SUBCASE("two identical unit vectors") {
    QuadraticTaskSuite suite;
    suite.theta0 = {0.0, 0.0};
    for (int i = 0; i < 2; ++i) {
      QuadraticTask t;
      t.name = "t" + std::to_string(i);
      t.minimizer = {1.0, 0.0};
      t.hessian.diagonal = {1.0, 1.0};
      suite.tasks.push_back(t);
    }
    TheoryConstants k = measure_constants(suite);
    CHECK(k.c == doctest::Approx(1.0));
    CHECK(k.epsilon == doctest::Approx(1.0));
  }
  SUBCASE("diagonal hessian smoothness via power iteration") {
    QuadraticTaskSuite suite;
    suite.theta0 = {0.0, 0.0, 0.0, 0.0};
    QuadraticTask t;
    t.name = "t";
    t.minimizer = {1.0, 0.0, 0.0, 0.0};
    t.hessian.diagonal = {2.0, 0.5, 0.3, 0.1};
    suite.tasks.push_back(t);
    TheoryConstants k = measure_constants(suite);
    CHECK(std::abs(k.smoothness[0] - 2.0) <= 1e-6 * 2.0);
  }
}

TEST_CASE("measured constants match an all-pairs oracle") {
  QuadraticTaskSuite suite = generate_suite(clustered(3, 0.7, 0.1), 40, 7, {0.6, 1.4}, 7);
  TheoryConstants k = measure_constants(suite);
  TaskVectorMatrix m = suite.task_matrix();
  double c = 0.0;
  double eps = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    c = std::max(c, norm_sq(m.columns.col(i)));
    for (std::size_t j = i + 1; j < 7; ++j) {
      eps = std::max(eps, std::abs(pair_cos(m, i, j)));
    }
  }
  CHECK(k.c == doctest::Approx(c).epsilon(1e-10));
  CHECK(k.epsilon == doctest::Approx(eps).epsilon(1e-10));
}

TEST_CASE("constants monotonicity") {
  QuadraticTaskSuite suite = generate_suite({}, 24, 4, {0.8, 1.2}, 8);
  TheoryConstants before = measure_constants(suite);

  SUBCASE("duplicating a task never decreases epsilon") {
    QuadraticTaskSuite bigger = suite;
    QuadraticTask dup = suite.tasks[0];
    dup.name = "task_dup";
    bigger.tasks.push_back(dup);
    TheoryConstants after = measure_constants(bigger);
    CHECK(after.epsilon >= before.epsilon - 1e-12);
    CHECK(after.epsilon == doctest::Approx(1.0));
  }
  SUBCASE("rescaling all vectors scales C quadratically") {
    QuadraticTaskSuite scaled = suite;
    const double s = 3.0;
    for (QuadraticTask& t : scaled.tasks) {
      for (std::size_t i = 0; i < t.minimizer.size(); ++i) {
        t.minimizer[i] = scaled.theta0[i] + s * (t.minimizer[i] - scaled.theta0[i]);
      }
    }
    TheoryConstants after = measure_constants(scaled);
    CHECK(after.c == doctest::Approx(s * s * before.c).epsilon(1e-10));
  }
}

TEST_CASE("addition bound: single task at alpha 1 has zero gap") {
  QuadraticTaskSuite suite = generate_suite({}, 8, 1, {1.0, 1.0}, 9);
  std::vector<double> alpha = {1.0};
  BoundReport report = verify_addition_bound(suite, alpha);
  REQUIRE(report.records.size() == 1);
  CHECK(report.records[0].gap <= 1e-12);
  CHECK(report.all_pass);
}

TEST_CASE("addition bound holds on orthogonal and clustered suites") {
  for (auto profile : {SuiteProfile{}, clustered(2, 0.9, 0.0)}) {
    QuadraticTaskSuite suite = generate_suite(profile, 32, 6, {0.8, 1.2}, 10);
    Rng rng(10);
    for (int draw = 0; draw < 25; ++draw) {
      std::vector<double> alpha = dirichlet_uniform(6, rng);
      BoundReport report = verify_addition_bound(suite, alpha);
      CHECK(report.all_pass);
    }
  }
}

TEST_CASE("addition bound through a basis uses phi = W_e alpha") {
  QuadraticTaskSuite suite = generate_suite(clustered(2, 0.9, 0.0), 32, 6, {0.9, 1.1}, 11);
  AeConfig cfg;
  cfg.basis_count = 3;
  cfg.steps = 300;
  BasisModel model = fit_ae(suite.task_matrix(), cfg);
  Rng rng(11);
  for (int draw = 0; draw < 25; ++draw) {
    std::vector<double> alpha = dirichlet_uniform(3, rng);
    BoundReport report = verify_addition_bound(suite, alpha, &model);
    CHECK(report.all_pass);
    auto phi = report.details["phi"].get<std::vector<double>>();
    double sum = 0.0;
    for (double p : phi) {
      CHECK(p >= -1e-12);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("addition bound rejects off-simplex alpha") {
  QuadraticTaskSuite suite = generate_suite({}, 8, 2, {1.0, 1.0}, 12);
  std::vector<double> bad = {0.7, 0.7};
  CHECK_THROWS_AS(verify_addition_bound(suite, bad), ValidationError);
}

TEST_CASE("ood bound") {
  SUBCASE("target equal to a source has gamma 1 and zero gap") {
    QuadraticTaskSuite suite = generate_suite({}, 16, 3, {1.0, 1.0}, 13);
    QuadraticTask target = suite.tasks[1];
    target.name = "target";
    BoundReport report = verify_ood_bound(suite, target);
    CHECK(report.applicable);
    CHECK(report.details["gamma_hat"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(report.records[0].gap <= 1e-10);
    CHECK(report.all_pass);
  }
  SUBCASE("planted suite passes with recorded slack") {
    QuadraticTaskSuite suite = generate_suite(planted(0.8), 24, 5, {0.7, 1.3}, 14);
    BoundReport report = verify_ood_bound(suite, *suite.target);
    CHECK(report.applicable);
    CHECK(report.all_pass);
    CHECK(report.records[0].slack >= 0.0);
  }
  SUBCASE("premise failure reports not-applicable") {
    // One source; the anti-aligned target has a strictly negative alignment.
    QuadraticTaskSuite suite = generate_suite({}, 16, 1, {1.0, 1.0}, 15);
    QuadraticTask target = suite.tasks[0];
    for (std::size_t i = 0; i < target.minimizer.size(); ++i) {
      target.minimizer[i] = suite.theta0[i] - (target.minimizer[i] - suite.theta0[i]);
    }
    BoundReport report = verify_ood_bound(suite, target);
    CHECK_FALSE(report.applicable);
  }
  SUBCASE("annealed basis reaches high coverage and a close bound") {
    QuadraticTaskSuite suite = generate_suite(planted(0.8), 32, 6, {0.7, 1.3}, 16);
    AeConfig cfg;
    cfg.basis_count = 3;
    cfg.steps = 3000;
    cfg.anneal = AnnealSchedule{500, 0.8};
    cfg.decoder_mode = DecoderMode::ols_refit;
    BasisModel model = fit_ae(suite.task_matrix(), cfg);
    BoundReport basis_report = verify_ood_bound(suite, *suite.target, &model);
    BoundReport raw_report = verify_ood_bound(suite, *suite.target);
    CHECK(basis_report.applicable);
    CHECK(basis_report.all_pass);
    double rho = basis_report.details["rho_hat"].get<double>();
    CHECK(rho >= 0.5);
    // Bound gap between the basis and raw variants is controlled by 1 - rho.
    double c = basis_report.details["c"].get<double>();
    double l = suite.target->smoothness();
    CHECK(basis_report.records[0].bound - raw_report.records[0].bound <=
          l * c * (1.0 - rho * 0.99) + 1e-9);
  }
}

TEST_CASE("negation bound") {
  QuadraticTaskSuite suite = generate_suite({}, 24, 5, {0.8, 1.2}, 17);
  SUBCASE("raw bound passes with positive slack on an orthogonal suite") {
    BoundReport report = verify_negation_bound(suite, 2, 1.0);
    CHECK(report.all_pass);
    for (const BoundRecord& rec : report.records) CHECK(rec.slack > 0.0);
    CHECK(report.records.size() == 4);
  }
  SUBCASE("exact reconstruction keeps the residual term at zero") {
    AeConfig cfg;
    cfg.basis_count = 5;
    cfg.steps = 100;
    cfg.decoder_mode = DecoderMode::ols_refit;
    Matrix init(5, 5);
    for (std::size_t i = 0; i < 5; ++i) init(i, i) = 60.0;
    cfg.init_logits = init;
    BasisModel model = fit_ae(suite.task_matrix(), cfg);
    BoundReport report = verify_negation_bound(suite, 1, 1.0, &model);
    CHECK(report.details["residual_norm_sq"].get<double>() <= 1e-12);
    CHECK(report.details["fit_reached_lb"].get<bool>());
    CHECK(report.all_pass);
  }
  SUBCASE("half-budget basis residual stays within the spectral gap") {
    QuadraticTaskSuite clustered_suite =
        generate_suite(clustered(2, 0.9, 0.0), 32, 6, {0.9, 1.1}, 18);
    AeConfig cfg;
    cfg.basis_count = 3;
    cfg.steps = 4000;
    cfg.anneal = AnnealSchedule{500, 0.8};
    cfg.decoder_mode = DecoderMode::ols_refit;
    BasisModel model = fit_ae(clustered_suite.task_matrix(), cfg);
    BoundReport report = verify_negation_bound(clustered_suite, 0, 1.0, &model);
    CHECK(report.all_pass);
    double residual = report.details["residual_norm_sq"].get<double>();
    TaskVectorMatrix m = clustered_suite.task_matrix();
    TaskVectorMatrix recon = reconstruct(model);
    double direct = 0.0;
    for (std::size_t r = 0; r < m.dim(); ++r) {
      double e = recon.columns(r, 0) - m.columns(r, 0);
      direct += e * e;
    }
    CHECK(residual == doctest::Approx(direct).epsilon(1e-10));
    if (report.details["fit_reached_lb"].get<bool>()) {
      CHECK(residual <= report.details["lambda_m_plus_1"].get<double>() + 1e-8);
    }
  }
  SUBCASE("alpha outside [0,1] is rejected") {
    CHECK_THROWS_AS(verify_negation_bound(suite, 0, 1.5), ValidationError);
  }
}

TEST_CASE("rho is always in (0, 1] for softmax encoders") {
  QuadraticTaskSuite suite = generate_suite(planted(0.7), 24, 5, {0.8, 1.2}, 19);
  AeConfig cfg;
  cfg.basis_count = 2;
  cfg.steps = 200;
  BasisModel model = fit_ae(suite.task_matrix(), cfg);
  TheoryConstants k = measure_constants(suite, &*suite.target, &model);
  REQUIRE(k.rho.has_value());
  CHECK(*k.rho > 0.0);
  CHECK(*k.rho <= 1.0);
}

TEST_CASE("suite serialization round trip") {
  QuadraticTaskSuite suite = generate_suite(planted(0.75), 16, 4, {0.8, 1.2}, 20);
  auto prefix = std::filesystem::temp_directory_path() / "tvb_test_suite";
  save_suite(suite, prefix);
  QuadraticTaskSuite back = load_suite(prefix);
  CHECK(back.theta0 == suite.theta0);
  REQUIRE(back.tasks.size() == suite.tasks.size());
  for (std::size_t i = 0; i < suite.tasks.size(); ++i) {
    CHECK(back.tasks[i].name == suite.tasks[i].name);
    CHECK(back.tasks[i].minimizer == suite.tasks[i].minimizer);
    CHECK(back.tasks[i].hessian.diagonal == suite.tasks[i].hessian.diagonal);
  }
  REQUIRE(back.target.has_value());
  CHECK(back.target->minimizer == suite.target->minimizer);
  std::filesystem::remove(std::filesystem::path(prefix.string() + ".tvb"));
  std::filesystem::remove(std::filesystem::path(prefix.string() + ".json"));
}

TEST_CASE("bound property sweep over random simplex draws") {
  Rng rng(21);
  std::vector<QuadraticTaskSuite> suites;
  suites.push_back(generate_suite({}, 24, 5, {0.8, 1.2}, 22));
  suites.push_back(generate_suite(clustered(2, 0.85, 0.05), 24, 5, {0.8, 1.2}, 23));
  suites.push_back(generate_suite(planted(0.8), 24, 5, {0.8, 1.2}, 24));
  for (const auto& suite : suites) {
    for (int draw = 0; draw < 30; ++draw) {
      std::vector<double> alpha = dirichlet_uniform(suite.count(), rng);
      CHECK(verify_addition_bound(suite, alpha).all_pass);
      double aj = rng.uniform();
      CHECK(verify_negation_bound(suite, rng.index(suite.count()), aj).all_pass);
    }
  }
}

TEST_CASE("large synthetic fixture survives the disk round trip") {
  QuadraticTaskSuite suite = generate_suite({}, 1024, 8, {0.8, 1.2}, 7);
  auto prefix = std::filesystem::temp_directory_path() / "tvb_big_suite";
  save_suite(suite, prefix);
  TaskVectorMatrix m =
      load_collection(std::filesystem::path(prefix.string() + ".tvb"));
  CHECK(m.count() == 8);
  CHECK(m.dim() == 1024);
  for (std::size_t c = 0; c < 8; ++c) {
    double n = norm(m.columns.col(c));
    CHECK(std::isfinite(n));
    CHECK(n > 0.0);
  }
  std::filesystem::remove(std::filesystem::path(prefix.string() + ".tvb"));
  std::filesystem::remove(std::filesystem::path(prefix.string() + ".json"));
}

TEST_CASE("generated hessians keep their spectral norm in [0.5, 2]") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    QuadraticTaskSuite suite = generate_suite({}, 24, 6, {0.8, 1.2}, 40 + seed);
    for (const QuadraticTask& task : suite.tasks) {
      double l = task.smoothness();
      CHECK(l >= 0.5);
      CHECK(l <= 2.0);
    }
  }
}

TEST_CASE("projection bases are outside the addition bound's premises") {
  QuadraticTaskSuite suite = generate_suite({}, 24, 4, {0.9, 1.1}, 44);
  BasisModel rp = fit_rand_proj(suite.task_matrix(), 2, 4);
  std::vector<double> alpha = {0.5, 0.5};
  BoundReport report = verify_addition_bound(suite, alpha, &rp);
  CHECK_FALSE(report.applicable);
}
