#pragma once

#include <json.hpp>

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/dynamics.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

inline constexpr std::string_view kCodeVersion = "ntklab/1.0.0";

// Dataset section of a config: either a synthetic generator plus target or
// an IDX file pair. `holdout` splits off the trailing records (IDX) or
// draws a separate sample (synthetic).
struct DataConfig {
  std::string source = "synthetic";  // "synthetic" | "idx"
  std::string generator = "sphere_uniform";
  int dim = 3;
  int grid = 8;  // blob_images raster edge; dim becomes grid^2
  int n = 128;
  int holdout = 0;
  std::string target_kind = "zero";
  std::vector<double> coefficients;
  std::uint64_t reference_seed = 1;
  std::string images;
  std::string labels;
  int target_class = 0;
};

struct SpectrumConfig {
  int k_max = 0;  // 0 resolves to n / 2
  bool save_gram = false;
};

struct DeviationConfig {
  std::vector<int> k_list = {1};
  double eps_slack = 1e-6;
};

struct ProbeConfig {
  std::vector<int> widths = {64, 128, 256};
  int inputs = 8;
  int iterations = 400;
};

struct CoverConfig {
  std::vector<double> axes = {3.0, 2.0};
  double gamma = 0.25;
  int audit_samples = 10000;
  bool has_metric = false;
  Eigen::MatrixXd metric;  // optional seminorm matrix, p <= 3
  double radius = 1.0;
  double eps = 1.0;
};

struct RankConfig {
  int sweep_points = 25;
  double eps_min_ratio = 1e-6;  // sweep spans [ratio * lambda_1, lambda_1]
  double radius = 2.0;
  double eps = 0.5;
  double gamma = 0.25;
};

struct ExperimentConfig {
  std::string recipe;
  std::uint64_t seed = 1;
  std::string out;  // optional output directory; flags take precedence
  NetworkSpec network;
  DataConfig data;
  Schedule schedule;
  int tracked = 3;
  SpectrumConfig spectrum;
  DeviationConfig deviation;
  ProbeConfig probe;
  CoverConfig cover;
  RankConfig rank;
};

// Validates a config document against the schema in README.md. Unknown
// keys raise validation_error naming the offending path ($.section.key).
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// The fully resolved document (defaults applied, checkpoints expanded)
// that every artifact embeds. parse_config of this round-trips.
nlohmann::json resolved_config_json(const ExperimentConfig& cfg);

// Dataset builder shared by the recipes: synthetic generation seeded from
// child stream 0 of the run seed, or IDX ingestion.
Dataset build_dataset(const ExperimentConfig& cfg);

struct RunOptions {
  std::filesystem::path out_dir = "ntklab-out";
  bool reproducible = false;
};

// Runs the configured recipe and writes its artifacts under out_dir.
// Returns 0 on success. On failure writes error.json there and returns 2
// for validation errors, 3 for anything else.
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);

// Command-line driver behind the ntklab binary:
//   ntklab <recipe> --config <path> [--seed N] [--out DIR] [--reproducible]
int run_cli(int argc, const char* const* argv);

}  // namespace ntklab
