#pragma once

#include <json.hpp>

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "ntklab/dynamics.hpp"
#include "ntklab/entropy.hpp"
#include "ntklab/spectral.hpp"

namespace ntklab {

// Shortest decimal text that parses back to the same double, so repeated
// runs emit byte-identical artifacts. Throws validation_error on nonfinite
// input.
std::string double_repr(double v);

// CSV tables. Every writer returns the full file contents including the
// header line; rows end with '\n'.
std::string spectrum_csv(const std::vector<SpectrumEntry>& entries);
std::string projections_csv(const Trajectory& traj);
std::string effective_rank_sweep_csv(const Eigen::VectorXd& eigenvalues,
                                     const Eigen::VectorXd& eps_grid);

// JSON documents. Callers embed these into larger artifacts; keys are
// emitted in sorted order by the library, so output is deterministic.
nlohmann::json trajectory_json(const Trajectory& traj);
nlohmann::json cover_report_json(const CoverReport& rep);
nlohmann::json linearized_bound_json(const LinearizedBound& b);
nlohmann::json cover_equivalence_json(const CoverEquivalenceReport& rep);

// Log-scale line plots. Values at or below zero are clamped to log_floor
// before taking logs. The timestamp string is emitted as an SVG comment
// when nonempty and is the only run-dependent content a plot may carry.
struct PlotOptions {
  int width = 720;
  int height = 440;
  std::string title;
  std::string timestamp;
  double log_floor = 1e-16;
};

std::string spectrum_svg(const std::vector<SpectrumEntry>& entries,
                         const PlotOptions& opt = {});

// One solid line per tracked coefficient |c_i(t)| over the checkpoints.
// When `rates` is nonempty it must hold one decay constant per tracked
// coefficient; each adds a dashed |c_i(0)| * exp(-rate_i t) reference in
// the matching color.
std::string projection_decay_svg(const Trajectory& traj,
                                 const Eigen::VectorXd& rates,
                                 const PlotOptions& opt = {});

// Whole-file text IO; write creates parent directories as needed.
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ntklab
