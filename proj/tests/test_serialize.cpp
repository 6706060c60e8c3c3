#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "ntklab/serialize.hpp"
#include "test_util.hpp"

using namespace ntklab;
namespace fs = std::filesystem;

namespace {

Trajectory tiny_trajectory() {
  Trajectory traj;
  traj.times = {0.0, 0.5};
  Eigen::VectorXd r0(2), r1(2);
  r0 << 3.0, 4.0;
  r1 << 0.6, 0.8;
  traj.train_residuals = {r0, r1};
  traj.test_residuals = {r0, r1};
  Eigen::VectorXd p0(2), p1(2);
  p0 << 1.0, 2.0;
  p1 << 0.5, 0.25;
  traj.projections = {p0, p1};
  traj.step_times = {0.25, 0.5};
  traj.step_drift = {0.1, 0.15};
  traj.step_loss = {2.0, 0.25};
  traj.step_eta = {0.25, 0.25};
  return traj;
}

}  // namespace

TEST_CASE("double_repr emits shortest round-trip decimals") {
  CHECK(double_repr(0.1) == "0.1");
  CHECK(double_repr(1.0) == "1");
  CHECK(double_repr(-0.5) == "-0.5");
  CHECK(double_repr(1e300) == "1e+300");
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, 40.0 * rng.normal());
    const std::string text = double_repr(v);
    const double back = std::strtod(text.c_str(), nullptr);
    CHECK(back == v);
  }
  CHECK_THROWS_AS(double_repr(std::nan("")), validation_error);
}

TEST_CASE("spectrum_csv writes the documented columns") {
  std::vector<SpectrumEntry> entries = {{1, 2.0, 1.0}, {2, 0.5, 0.25}};
  CHECK(spectrum_csv(entries) ==
        "k,lambda,lambda_normalized\n1,2,1\n2,0.5,0.25\n");
  CHECK_THROWS_AS(spectrum_csv({}), validation_error);
}

TEST_CASE("projections_csv writes one row per checkpoint") {
  const Trajectory traj = tiny_trajectory();
  CHECK(projections_csv(traj) == "t,c_1,c_2\n0,1,2\n0.5,0.5,0.25\n");

  Trajectory bare;
  bare.times = {0.0};
  CHECK_THROWS_AS(projections_csv(bare), validation_error);

  Trajectory ragged = traj;
  ragged.projections.pop_back();
  CHECK_THROWS_AS(projections_csv(ragged), validation_error);
}

TEST_CASE("effective_rank_sweep_csv tabulates the threshold counts") {
  Eigen::VectorXd eigs(4);
  eigs << 3.0, 1.0, 0.5, 0.1;
  Eigen::VectorXd grid(3);
  grid << 0.4, 1.0, 5.0;
  CHECK(effective_rank_sweep_csv(eigs, grid) ==
        "epsilon,effective_rank\n0.4,3\n1,1\n5,0\n");
  Eigen::VectorXd bad(1);
  bad << -0.5;
  CHECK_THROWS_AS(effective_rank_sweep_csv(eigs, bad), validation_error);
  CHECK_THROWS_AS(effective_rank_sweep_csv(eigs, Eigen::VectorXd()),
                  validation_error);
}

TEST_CASE("trajectory_json carries metadata and monitors") {
  const nlohmann::json j = trajectory_json(tiny_trajectory());
  CHECK(j["checkpoint_count"] == 2);
  CHECK(j["times"] == nlohmann::json({0.0, 0.5}));
  CHECK(j["train_residual_norm"][0].get<double>() == doctest::Approx(5.0));
  CHECK(j["train_loss"][0].get<double>() == doctest::Approx(25.0 / 4.0));
  CHECK(j["test_residual_norm"].size() == 2);
  CHECK(j["projections"][1][1].get<double>() == 0.25);
  CHECK(j["steps"]["eta"] == nlohmann::json({0.25, 0.25}));
  const std::string a = j.dump(2);
  const std::string b = trajectory_json(tiny_trajectory()).dump(2);
  CHECK(a == b);
}

TEST_CASE("cover and bound reports serialize losslessly") {
  CoverReport rep;
  rep.gamma = 0.25;
  rep.k_lower = std::log(8.0);
  rep.mu_gamma = 2;
  rep.upper = std::log(8.0) + 2.0 * std::log(12.0);
  rep.constructed_count = 2;
  rep.rejection_limit = 10000;
  rep.centers = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
  const nlohmann::json j = cover_report_json(rep);
  CHECK(j["gamma"] == 0.25);
  CHECK(j["k_lower"].get<double>() == rep.k_lower);
  CHECK(j["mu_gamma"] == 2);
  CHECK(j["constructed_count"] == 2);
  CHECK(j["centers"][1] == nlohmann::json({1.0, 1.0}));

  LinearizedBound b;
  b.lower = std::log(2.0);
  b.upper = std::log(2.0) + 2.0 * std::log(12.0);
  b.mu_gamma = 2;
  b.effective_rank_scaled = 2;
  const nlohmann::json bj = linearized_bound_json(b);
  CHECK(bj["lower"].get<double>() == b.lower);
  CHECK(bj["effective_rank_scaled"] == 2);

  CoverEquivalenceReport eq;
  eq.cover = rep;
  eq.theta_centers = rep.centers;
  eq.samples = 10000;
  eq.violations = 0;
  const nlohmann::json ej = cover_equivalence_json(eq);
  CHECK(ej["cover"]["mu_gamma"] == 2);
  CHECK(ej["samples"] == 10000);
  CHECK(ej["violations"] == 0);
  CHECK(ej["theta_centers"].size() == 2);
}

TEST_CASE("spectrum_svg renders a deterministic log plot") {
  std::vector<SpectrumEntry> entries;
  for (int k = 1; k <= 16; ++k)
    entries.push_back({k, std::pow(2.0, -k), std::pow(2.0, 1.0 - k)});
  const std::string svg = spectrum_svg(entries);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<path") != std::string::npos);
  CHECK(svg.find("lambda_k / lambda_1") != std::string::npos);
  CHECK(svg.find("generated") == std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
  CHECK(svg == spectrum_svg(entries));

  PlotOptions stamped;
  stamped.timestamp = "2026-01-01T00:00:00Z";
  CHECK(spectrum_svg(entries, stamped).find(
            "<!-- generated 2026-01-01T00:00:00Z -->") != std::string::npos);

  // Zero and negative ratios clamp to the floor instead of breaking the
  // log scale.
  entries.push_back({17, 0.0, 0.0});
  entries.push_back({18, -1e-17, -1e-17});
  const std::string clamped = spectrum_svg(entries);
  CHECK(clamped.find("nan") == std::string::npos);
}

TEST_CASE("projection_decay_svg overlays one reference per coefficient") {
  const Trajectory traj = tiny_trajectory();
  Eigen::VectorXd rates(2);
  rates << 1.0, 2.0;
  const std::string svg = projection_decay_svg(traj, rates);
  CHECK(svg.find("|c_1|") != std::string::npos);
  CHECK(svg.find("|c_2|") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("exp(-sigma_i t) reference") != std::string::npos);
  CHECK(svg == projection_decay_svg(traj, rates));

  const std::string bare = projection_decay_svg(traj, Eigen::VectorXd());
  CHECK(bare.find("stroke-dasharray") == std::string::npos);

  Eigen::VectorXd wrong(3);
  wrong << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(projection_decay_svg(traj, wrong), validation_error);
  Trajectory empty;
  empty.times = {0.0};
  CHECK_THROWS_AS(projection_decay_svg(empty, rates), validation_error);
}

TEST_CASE("text file round-trip creates parent directories") {
  const fs::path root =
      fs::temp_directory_path() / "ntklab_serialize_test" / "nested";
  const fs::path file = root / "artifact.csv";
  std::error_code ec;
  fs::remove_all(root.parent_path(), ec);
  const std::string body = "a,b\n1,2\n";
  write_text_file(file, body);
  CHECK(read_text_file(file) == body);
  CHECK_THROWS_AS(read_text_file(root / "missing.csv"), std::runtime_error);
  fs::remove_all(root.parent_path(), ec);
}
