#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ntklab/network.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

// Axis-aligned ellipsoid {v : sum v_i^2 / a_i^2 <= 1}. A zero half-axis
// flattens the ellipsoid in that direction.
struct Ellipsoid {
  Eigen::VectorXd half_axes;

  void validate() const;
  int dim() const { return static_cast<int>(half_axes.size()); }
};

// Log-covering-number bounds of an ellipsoid by unit balls, plus the
// optional constructive cover from construct_cover.
struct CoverReport {
  double gamma = 0.0;
  double k_lower = 0.0;  // sum of log a_i over a_i > 1
  int mu_gamma = 0;      // |{i : a_i > 1 - gamma}|
  double upper = 0.0;    // k_lower + mu_gamma * log(3/gamma)
  int constructed_count = 0;  // 0 when no cover was constructed
  std::vector<Eigen::VectorXd> centers;
  int rejection_limit = 0;  // consecutive-rejection stopping rule used
};

// Count of eigenvalues strictly above eps.
int effective_rank(const Eigen::VectorXd& eigenvalues, double eps);

CoverReport ellipsoid_cover_bounds(const Ellipsoid& e, double gamma);

// Greedy maximal gamma-packing of the ellipsoid projected onto its long
// axes (those above 1 - gamma), grown by rejection sampling until 10^4
// consecutive candidate rejections. The packing centers form a unit-ball
// cover of the full ellipsoid. Dimension must be at most 3.
CoverReport construct_cover(const Ellipsoid& e, double gamma, Rng& rng);

// Empirical Fisher information of the network output at params0. The
// Jacobian factor has rows grad f(x_i) / sqrt(N), so F = factor^T factor;
// the explicit p x p matrix is materialized only for p <= 2000, and all
// spectral queries go through the N x N Gram side.
struct FisherMatrix {
  Eigen::MatrixXd factor;           // N x p
  Eigen::MatrixXd explicit_matrix;  // p x p, empty when p > 2000
  std::string measure_tag = "empirical";

  Eigen::Index p() const { return factor.cols(); }
  Eigen::Index samples() const { return factor.rows(); }
  bool has_explicit() const { return explicit_matrix.size() > 0; }
  double trace() const { return factor.squaredNorm(); }
};

FisherMatrix fim(const NetworkSpec& spec, const Eigen::VectorXd& params0,
                 const Eigen::MatrixXd& X);

// Nonzero spectrum of F via the Gram side factor * factor^T, sorted
// nonincreasing, padded with exact zeros up to min(N, p) only (never p).
Eigen::VectorXd fim_nonzero_eigenvalues(const FisherMatrix& fm);

// Monte-Carlo coverage audit: draws `samples` points uniformly from the
// ellipsoid and counts how many sit farther than 1 from every center.
int cover_audit(const Ellipsoid& e,
                const std::vector<Eigen::VectorXd>& centers, int samples,
                Rng& rng);

struct LinearizedBound {
  double lower = 0.0;
  double upper = 0.0;
  int mu_gamma = 0;
  int effective_rank_scaled = 0;  // rank of F^(1/2) at scale 3*eps/(4*R)
};

// Covering bounds for the linearized function class with parameter radius R
// and accuracy eps: the ellipsoid axes are (R/eps) * sqrt(lambda_i).
LinearizedBound linearized_covering_bound(const Eigen::VectorXd& fim_eigs,
                                          double R, double eps, double gamma);

struct CoverEquivalenceReport {
  CoverReport cover;
  std::vector<Eigen::VectorXd> theta_centers;
  int samples = 0;
  int violations = 0;
};

// Realizes the seminorm-ball/ellipsoid correspondence: covers the ellipsoid
// with axes (R/eps) * sigma_i in the eigenbasis of M, maps centers back
// through the pseudo-inverse of M^(1/2), and audits with uniform samples
// from the parameter ball that every point is within eps of a center in
// the M-seminorm. p <= 3.
CoverEquivalenceReport cover_equivalence_check(const Eigen::MatrixXd& m,
                                               double R, double eps,
                                               double gamma, Rng& rng,
                                               int audit_samples = 10000);

}  // namespace ntklab
