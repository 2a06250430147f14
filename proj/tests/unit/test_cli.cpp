#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tvb/bases.hpp"
#include "tvb/vecstore.hpp"
#include "tvbcli/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tvb_cli_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

nlohmann::json read_json(const std::string& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

std::string read_bytes(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int make_suite(const TempDir& dir, const std::string& name,
               const std::string& profile = "clustered") {
  std::vector<std::string> args = {"generate", "--profile", profile,
                                   "--d", "48", "--t", "8",
                                   "--seed", "7", "--out", dir / name};
  if (profile == "clustered") {
    args.insert(args.end(), {"--clusters", "4"});
  } else if (profile == "planted-target") {
    args.insert(args.end(), {"--gamma", "0.8"});
  }
  return tvbcli::run(args);
}

}  // namespace

TEST_CASE("cli generate writes suite and report") {
  TempDir dir;
  CHECK(make_suite(dir, "suite") == 0);
  CHECK(fs::exists(dir / "suite.tvb"));
  CHECK(fs::exists(dir / "suite.json"));
  nlohmann::json report = read_json(dir / "suite.report.json");
  CHECK(report["command"] == "generate");
  CHECK(report["resolved_config"]["seed"] == 7);
}

TEST_CASE("cli build ae reports a nonnegative gap and parses anneal notation") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  int rc = tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "ae",
                        "--m", "4", "--steps", "300", "--anneal", "500:0.8",
                        "--out", dir / "model.tvbm1"});
  CHECK(rc == 0);
  nlohmann::json report = read_json(dir / "model.tvbm1.report.json");
  CHECK(report["gap"].get<double>() >= 0.0);
  CHECK(report["resolved_config"]["anneal"] == "500:0.8");
  CHECK(report["achievability"].contains("achievable"));
}

TEST_CASE("cli build pca at full rank closes the gap") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  int rc = tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "pca",
                        "--m", "8", "--no-center", "--out", dir / "pca.tvbm1"});
  CHECK(rc == 0);
  nlohmann::json report = read_json(dir / "pca.tvbm1.report.json");
  CHECK(report["gap"].get<double>() <= 1e-8);
}

TEST_CASE("cli merge reproduces the 21-point grid and honors ties settings") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "ae", "--m",
                       "4", "--steps", "200", "--out", dir / "model.tvbm1"}) == 0);

  int rc = tvbcli::run({"merge", "--model", dir / "model.tvbm1", "--suite",
                        dir / "suite", "--method", "ta", "--alpha-grid", "0:1:21",
                        "--out", dir / "merged.tvb"});
  CHECK(rc == 0);
  nlohmann::json report = read_json(dir / "merged.tvb.report.json");
  auto grid = report["provenance"]["grid"].get<std::vector<double>>();
  REQUIRE(grid.size() == 21);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  CHECK(fs::exists(dir / "merged.tvb.provenance.json"));

  rc = tvbcli::run({"merge", "--model", dir / "model.tvbm1", "--suite", dir / "suite",
                    "--method", "ties", "--topk", "0.2", "--out", dir / "ties.tvb"});
  CHECK(rc == 0);
  nlohmann::json ties = read_json(dir / "ties.tvb.report.json");
  CHECK(ties["provenance"]["topk_fraction"].get<double>() == 0.2);
}

TEST_CASE("cli lns merge exports bit-packed masks") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "ae", "--m",
                       "2", "--steps", "200", "--out", dir / "model.tvbm1"}) == 0);
  int rc = tvbcli::run({"merge", "--model", dir / "model.tvbm1", "--suite",
                        dir / "suite", "--method", "lns", "--lns-lr", "0.5",
                        "--lns-epochs", "20", "--out", dir / "lns.tvb"});
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "lns.tvb.masks.bin"));
  nlohmann::json masks = read_json(dir / "lns.tvb.masks.bin.json");
  CHECK(masks["mask_count"] == 2);
  CHECK(masks["sparsity"].size() == 2);
  // 48 bits -> 6 bytes per mask.
  CHECK(fs::file_size(dir / "lns.tvb.masks.bin") == 12);
}

TEST_CASE("cli negate on an exact-fit model matches raw negation byte for byte") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  // Full rand-select keeps every column; its closed-form decoder makes
  // reconstruction exact to the bit.
  REQUIRE(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method",
                       "rand-select", "--m", "8", "--out", dir / "full.tvbm1"}) == 0);
  REQUIRE(tvbcli::run({"negate", "--model", dir / "full.tvbm1", "--suite",
                       dir / "suite", "--task", "3", "--control-floor", "0.5",
                       "--out", dir / "neg_model.tvb"}) == 0);
  REQUIRE(tvbcli::run({"negate", "--input", dir / "suite.tvb", "--suite",
                       dir / "suite", "--task", "3", "--control-floor", "0.5",
                       "--out", dir / "neg_raw.tvb"}) == 0);
  CHECK(read_bytes(dir / "neg_model.tvb") == read_bytes(dir / "neg_raw.tvb"));
}

TEST_CASE("cli negate warns for rand-select models below full budget") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method",
                       "rand-select", "--m", "4", "--out", dir / "rs.tvbm1"}) == 0);
  REQUIRE(tvbcli::run({"negate", "--model", dir / "rs.tvbm1", "--suite", dir / "suite",
                       "--task", "1", "--control-floor", "0.5", "--out",
                       dir / "neg.tvb"}) == 0);
  nlohmann::json report = read_json(dir / "neg.tvb.report.json");
  CHECK(report.contains("warnings"));
}

TEST_CASE("cli ood with planted target") {
  TempDir dir;
  REQUIRE(make_suite(dir, "planted", "planted-target") == 0);
  int rc = tvbcli::run({"ood", "--input", dir / "planted.tvb", "--suite",
                        dir / "planted", "--out", dir / "ood.tvb"});
  CHECK(rc == 0);
  nlohmann::json report = read_json(dir / "ood.tvb.report.json");
  CHECK(report["provenance"]["gamma_hat"].get<double>() > 0.7);
  CHECK(report.contains("target_loss"));
}

TEST_CASE("cli online run with repeats reports per-order variance") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"stream-export", "--suite", dir / "suite", "--out-dir",
                       dir / "stream"}) == 0);
  int rc = tvbcli::run({"online", "--manifest", dir / "stream/manifest.json",
                        "--suite", dir / "suite", "--m", "4", "--alpha", "0.3",
                        "--compaction", "rand-select", "--repeats", "3", "--seed",
                        "5", "--out-dir", dir / "online"});
  CHECK(rc == 0);
  nlohmann::json summary = read_json(dir / "online/summary.json");
  CHECK(summary["repeats"].size() == 3);
  CHECK(summary.contains("final_score_stddev"));
  CHECK(summary["total_compactions"].get<int>() == 12);
  std::ifstream csv(dir / "online/steps.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "repeat,step,task,score");
}

TEST_CASE("cli online flags zero compactions when the budget covers the stream") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"stream-export", "--suite", dir / "suite", "--out-dir",
                       dir / "stream"}) == 0);
  REQUIRE(tvbcli::run({"online", "--manifest", dir / "stream/manifest.json",
                       "--suite", dir / "suite", "--m", "8", "--out-dir",
                       dir / "online"}) == 0);
  nlohmann::json summary = read_json(dir / "online/summary.json");
  CHECK(summary["zero_compactions"].get<bool>());
}

TEST_CASE("cli verify passes on a clean setup and fails on a corrupted model") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "ae", "--m",
                       "4", "--steps", "300", "--out", dir / "model.tvbm1"}) == 0);
  CHECK(tvbcli::run({"verify", "--suite", dir / "suite", "--model",
                     dir / "model.tvbm1", "--draws", "20", "--report",
                     dir / "verify.json"}) == 0);
  nlohmann::json report = read_json(dir / "verify.json");
  CHECK(report["all_pass"].get<bool>());

  // Fault injection: scale one encoder column off the simplex.
  tvb::BasisModel model = tvb::load_model(dir / "model.tvbm1");
  tvb::scale(model.encoder.col(0), 2.0);
  tvb::save_model(model, dir / "bad.tvbm1");
  int rc = tvbcli::run({"verify", "--suite", dir / "suite", "--model",
                        dir / "bad.tvbm1", "--draws", "5", "--report",
                        dir / "verify_bad.json"});
  CHECK(rc == 3);
  nlohmann::json bad = read_json(dir / "verify_bad.json");
  CHECK_FALSE(bad["all_pass"].get<bool>());
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  SUBCASE("missing input file is an io error") {
    CHECK(tvbcli::run({"build", "--input", dir / "nope.tvb", "--method", "ae",
                       "--out", dir / "x.tvbm1"}) == 4);
  }
  SUBCASE("unknown flag is a validation error") {
    CHECK(tvbcli::run({"generate", "--frobulate", "--out", dir / "s"}) == 2);
  }
  SUBCASE("bad method is a validation error") {
    REQUIRE(make_suite(dir, "suite") == 0);
    CHECK(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "qr",
                       "--out", dir / "x.tvbm1"}) == 2);
  }
}

TEST_CASE("cli runs are deterministic and configs round-trip") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  auto build_args = [&](const std::string& out) {
    return std::vector<std::string>{"build", "--input", dir / "suite.tvb",
                                    "--method", "ae", "--m", "3", "--steps", "150",
                                    "--seed", "11", "--out", dir / out};
  };
  REQUIRE(tvbcli::run(build_args("a.tvbm1")) == 0);
  REQUIRE(tvbcli::run(build_args("b.tvbm1")) == 0);
  CHECK(read_bytes(dir / "a.tvbm1") == read_bytes(dir / "b.tvbm1"));

  nlohmann::json ra = read_json(dir / "a.tvbm1.report.json");
  nlohmann::json rb = read_json(dir / "b.tvbm1.report.json");
  ra.erase("timestamp");
  rb.erase("timestamp");
  CHECK(ra == rb);

  // Feeding the resolved config back reproduces the run.
  REQUIRE(tvbcli::run({"build", "--input", dir / "suite.tvb", "--method", "ae",
                       "--config", dir / "a.tvbm1.report.json", "--out",
                       dir / "c.tvbm1"}) == 0);
  CHECK(read_bytes(dir / "a.tvbm1") == read_bytes(dir / "c.tvbm1"));
}

TEST_CASE("cli online reruns are deterministic modulo timestamp and timings") {
  TempDir dir;
  REQUIRE(make_suite(dir, "suite") == 0);
  REQUIRE(tvbcli::run({"stream-export", "--suite", dir / "suite", "--out-dir",
                       dir / "stream"}) == 0);
  auto run_once = [&](const std::string& out) {
    return tvbcli::run({"online", "--manifest", dir / "stream/manifest.json",
                        "--suite", dir / "suite", "--m", "4", "--seed", "3",
                        "--ae-steps", "200", "--out-dir", dir / out});
  };
  REQUIRE(run_once("o1") == 0);
  REQUIRE(run_once("o2") == 0);
  CHECK(read_bytes(dir / "o1/steps.csv") == read_bytes(dir / "o2/steps.csv"));
  nlohmann::json a = read_json(dir / "o1/summary.json");
  nlohmann::json b = read_json(dir / "o2/summary.json");
  a.erase("timestamp");
  a.erase("timings");
  b.erase("timestamp");
  b.erase("timings");
  CHECK(a == b);
}
