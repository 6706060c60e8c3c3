#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ntklab/network.hpp"

namespace ntklab {

// Where a dataset came from, with enough detail to regenerate it bit-exactly:
// either an IDX file pair (paths plus an FNV-1a checksum over both payloads)
// or a synthetic generator (id string plus root seed).
struct Provenance {
  std::string kind;  // "idx" or "synthetic"
  std::string detail;
  std::uint64_t checksum = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Eigen::MatrixXd inputs;  // n x d
  Eigen::VectorXd labels;
  Eigen::MatrixXd holdout_inputs;  // may be empty
  Eigen::VectorXd holdout_labels;
  Provenance provenance;

  int n() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
  int n_holdout() const { return static_cast<int>(holdout_inputs.rows()); }
  // Sup of |target| over both splits; recorded rather than assumed bounded.
  double label_sup() const;
};

// Parses a big-endian IDX image/label pair (magics 0x00000803 and
// 0x00000801). Pixels are scaled to [0,1] by /255; class labels map to
// regression targets +1 for `target_class` and -1 otherwise. The last
// `holdout_count` records become the holdout split. Malformed input raises
// parse_error with the byte offset of the offending field.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path, int target_class = 0,
                 int holdout_count = 0);

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 14695981039346656037ull);

// Input generators: points on the unit sphere, standard Gaussians, or
// smooth synthetic grayscale images (sums of Gaussian bumps on a
// blob_grid x blob_grid raster, flattened to dim = blob_grid^2).
struct GeneratorSpec {
  std::string kind;  // "sphere_uniform" | "gaussian" | "blob_images"
  int dim = 0;
  int blob_grid = 0;

  static GeneratorSpec sphere(int d) { return {"sphere_uniform", d, 0}; }
  static GeneratorSpec gaussian(int d) { return {"gaussian", d, 0}; }
  static GeneratorSpec blobs(int q) { return {"blob_images", q * q, q}; }
};

// Target function choices. eigenfunction_mix and custom_coeffs build f* as
// sum_i coefficients[i] * phi_i of the reference kernel's Nystrom
// eigenfunctions; the mix is constructed on the holdout sample when one is
// requested (that is where projection diagnostics run) and on the training
// sample otherwise. random_smooth draws a bounded random quadratic.
struct TargetSpec {
  std::string kind = "zero";  // zero | eigenfunction_mix | custom_coeffs |
                              // random_smooth
  std::vector<double> coefficients;  // eigenfunction_mix defaults to (2,3)
  NetworkSpec reference;
  std::uint64_t reference_seed = 1;

  static TargetSpec zero() { return TargetSpec{}; }
};

Dataset synth_dataset(const GeneratorSpec& generator, const TargetSpec& target,
                      int n, int n_holdout, std::uint64_t seed);

}  // namespace ntklab
