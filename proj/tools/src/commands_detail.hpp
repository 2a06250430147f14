#pragma once

// Per-command parameter structs and entry points. The register_* functions
// wire CLI11 subcommands; the run_* functions do the work and are what the
// tests call directly.

#include <cstdint>
#include <memory>
#include <string>

#include <CLI11.hpp>

namespace tvbcli {

struct GenerateParams {
  std::string profile = "orthogonal";
  std::size_t d = 256;
  std::size_t t = 8;
  std::size_t clusters = 2;
  double cos_in = 0.9;
  double cos_out = 0.0;
  double gamma = 0.8;
  double norm_min = 0.8;
  double norm_max = 1.2;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
  std::string config;
};

struct BuildParams {
  std::string input;
  std::string method;
  std::size_t m = 4;
  std::size_t steps = 4000;
  double lr = 0.01;
  double tau = 5.0;
  std::string anneal;  // "period:factor", empty = none
  double weight_decay = 1e-6;
  std::string decoder_mode = "joint";
  bool center = true;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
  std::string config;
};

struct MergeParams {
  std::string model;
  std::string input;
  std::string suite;
  std::string method = "ta";
  std::string alpha_grid = "0:1:21";
  double topk = 0.2;
  double lns_bias = 5.0;
  double lns_l1 = 1.0;
  double lns_lr = 1e-7;
  std::size_t lns_epochs = 10;
  double lns_threshold = 0.5;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
  std::string config;
};

struct NegateParams {
  std::string model;
  std::string input;
  std::string suite;
  std::size_t task = 0;
  std::string alpha_grid = "0:1:21";
  double control_floor = 0.95;
  std::string out;
  std::string report;
  std::string config;
};

struct OodParams {
  std::string model;
  std::string input;
  std::string suite;
  std::string target;  // optional TVB1 single-column override
  std::string mode = "best-aligned";
  std::string alpha_grid = "0:1:21";
  std::string out;
  std::string report;
  std::string config;
};

struct OnlineParams {
  std::string manifest;
  std::string suite;
  std::size_t m = 4;
  std::string method = "ta";
  double alpha = 0.3;
  std::string compaction = "ae";
  std::size_t ae_steps = 1000;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::string out_dir;
  std::string config;
};

struct StreamExportParams {
  std::string suite;
  std::string out_dir;
};

struct VerifyParams {
  std::string suite;
  std::string model;
  std::size_t draws = 100;
  std::uint64_t seed = 0;
  std::string report;
  std::string config;
};

void register_generate(CLI::App& app);
void register_build(CLI::App& app);
void register_merge(CLI::App& app);
void register_negate(CLI::App& app);
void register_ood(CLI::App& app);
void register_online(CLI::App& app);
void register_stream_export(CLI::App& app);
void register_verify(CLI::App& app);

void run_generate(const GenerateParams& p);
void run_build(const BuildParams& p);
void run_merge(const MergeParams& p);
void run_negate(const NegateParams& p);
void run_ood(const OodParams& p);
void run_online(const OnlineParams& p);
void run_stream_export(const StreamExportParams& p);
// Returns false when a theorem check failed (exit 3).
bool run_verify(const VerifyParams& p);

}  // namespace tvbcli
