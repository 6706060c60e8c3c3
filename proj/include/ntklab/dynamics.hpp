#pragma once

#include <Eigen/Core>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/network.hpp"
#include "ntklab/spectral.hpp"

namespace ntklab {

// Explicit-Euler schedule for discretized gradient flow. Continuous time is
// identified with the accumulated sum of accepted step sizes; steps shrink
// to land exactly on checkpoint times. On a loss increase the step size
// halves and the step retries, so the recorded loss is monotone.
struct Schedule {
  double eta0 = 1e-2;
  double t_max = 1.0;
  std::vector<double> checkpoints;  // strictly increasing, within (0, t_max]
};

std::vector<double> geometric_checkpoints(double t_min, double t_max,
                                          int count);

struct Trajectory {
  std::vector<double> times;  // checkpoint times, starting at 0
  std::vector<Eigen::VectorXd> params_snapshots;
  std::vector<Eigen::VectorXd> train_residuals;  // f(x_i) - y_i on train
  std::vector<Eigen::VectorXd> test_residuals;   // same on the holdout
  std::vector<Eigen::VectorXd> projections;  // tracked eigen-coefficients
  // Per accepted step: time after the step, parameter drift from theta_0,
  // loss after the step, and the step size used.
  std::vector<double> step_times;
  std::vector<double> step_drift;
  std::vector<double> step_loss;
  std::vector<double> step_eta;

  int checkpoint_count() const { return static_cast<int>(times.size()); }
  // Parameter-drift bound sqrt(t/2) * rms(r_0) with multiplicative slack,
  // checked at every checkpoint.
  bool drift_bound_ok(double slack = 0.05) const;
};

// Trains by explicit Euler on Phi(theta) = (1/2n) ||f(X) - y||^2. Residuals
// and projections are recorded at t = 0, at every checkpoint, and at t_max.
// If `tracked` is nonempty, projections of the holdout residual onto those
// eigenfunctions are recorded per checkpoint (the eigenfunction sample must
// be the dataset's holdout split). Throws std::runtime_error if a step
// cannot make progress after 20 halvings.
Trajectory train(const NetworkSpec& spec, const Eigen::VectorXd& params0,
                 const Dataset& data, const Schedule& schedule,
                 const std::vector<EigenFunction>& tracked = {});

// Closed-form kernel gradient flow r_t = V exp(-Sigma t) V^T r_0 built from
// an eigensystem of G/n. At t = 0 it returns r_0 exactly.
struct KernelDynamics {
  EigenSystem eigen;
  Eigen::VectorXd r0;
  Eigen::VectorXd coeffs0;  // V^T r0

  KernelDynamics(EigenSystem es, Eigen::VectorXd r0_in);
};

Eigen::VectorXd kernel_flow(const KernelDynamics& kd, double t);

// Coefficients <r, phi_i> for i < k in the empirical inner product
// (1/n') sum over the eigenfunctions' own sample, on which r must live.
Eigen::VectorXd project(const Eigen::VectorXd& r,
                        const std::vector<EigenFunction>& phis, int k);

struct DecayRateFit {
  double rate = 0.0;  // positive decay constant of |coefficient| ~ exp(-rate t)
  double r_squared = 0.0;
  int points_used = 0;
  bool fit_ok = false;
};

// Least-squares slope of log|projection_i| against t over the checkpoints
// whose magnitude sits above the 1e-6 noise floor; needs at least 5.
DecayRateFit decay_rate_fit(const Trajectory& traj, int index);

struct DampedDeviationRow {
  double t = 0.0;
  int k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

struct DampedDeviationReport {
  std::vector<DampedDeviationRow> projected;    // one row per (t, k)
  std::vector<DampedDeviationRow> unprojected;  // one row per t, k = 0
  bool all_ok = true;
};

// One-sided deviation check between the trained residual and the kernel
// flow on the eigenfunctions' sample: for each checkpoint t and each k,
//   ||P_k (r_t - flow_t)||^2 <= ((1 - exp(-sigma_k t)) / sigma_k)^2 * C
// with C = 4 * f_star_sup^2 * kernel_distance_sq + eps_slack, plus the
// unprojected variant with damping factor t.
DampedDeviationReport damped_deviation_report(
    const Trajectory& traj, const KernelDynamics& kd,
    const std::vector<EigenFunction>& phis, const std::vector<int>& k_list,
    double kernel_distance_sq, double f_star_sup, double eps_slack);

struct TestErrorReport {
  double projected_final_sq = 0.0;  // ||P_k r_T||^2
  double half_final_sq = 0.0;       // (1/2) ||r_T||^2
  double tail_initial_sq = 0.0;     // ||(I - P_k) r_0||^2
};

TestErrorReport test_error_report(const Trajectory& traj,
                                  const std::vector<EigenFunction>& phis,
                                  int k);

}  // namespace ntklab
