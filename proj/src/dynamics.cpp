#include "ntklab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

Eigen::VectorXd residuals(const NetworkSpec& spec,
                          const Eigen::VectorXd& params,
                          const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::VectorXd r(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    r[i] = forward(spec, params, X.row(i).transpose()) - y[i];
  return r;
}

double loss_of(const Eigen::VectorXd& r) {
  return r.squaredNorm() / (2.0 * static_cast<double>(r.size()));
}

double rms(const Eigen::VectorXd& v) {
  return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

}  // namespace

std::vector<double> geometric_checkpoints(double t_min, double t_max,
                                          int count) {
  if (!(t_min > 0.0) || !(t_max > t_min))
    throw validation_error("geometric_checkpoints: need 0 < t_min < t_max");
  if (count < 2)
    throw validation_error("geometric_checkpoints: need at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double ratio = std::pow(t_max / t_min, 1.0 / (count - 1));
  double t = t_min;
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = t;
    t *= ratio;
  }
  grid.back() = t_max;
  return grid;
}

bool Trajectory::drift_bound_ok(double slack) const {
  if (times.empty()) return false;
  const double r0_rms = rms(train_residuals.front());
  const Eigen::VectorXd& theta0 = params_snapshots.front();
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double drift = (params_snapshots[i] - theta0).norm();
    const double bound = std::sqrt(times[i] / 2.0) * r0_rms;
    if (drift > (1.0 + slack) * bound) return false;
  }
  return true;
}

Trajectory train(const NetworkSpec& spec, const Eigen::VectorXd& params0,
                 const Dataset& data, const Schedule& schedule,
                 const std::vector<EigenFunction>& tracked) {
  spec.validate();
  if (data.dim() != spec.input_dim)
    throw validation_error("train: dataset dimension does not match network");
  if (data.n() < 1) throw validation_error("train: empty training set");
  if (!(schedule.eta0 > 0.0))
    throw validation_error("train: eta0 must be positive");
  if (!(schedule.t_max >= schedule.eta0))
    throw validation_error("train: t_max must be at least eta0");
  std::vector<double> grid = schedule.checkpoints;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || grid[i] > schedule.t_max ||
        (i > 0 && grid[i] <= grid[i - 1]))
      throw validation_error(
          "train: checkpoints must be strictly increasing within (0, t_max]");
  }
  if (grid.empty() || grid.back() < schedule.t_max)
    grid.push_back(schedule.t_max);
  const bool track = !tracked.empty();
  if (track && (data.n_holdout() == 0 ||
                tracked.front().sample->rows() != data.n_holdout()))
    throw validation_error(
        "train: tracked eigenfunctions must live on the holdout sample");

  const int k_track = static_cast<int>(tracked.size());
  Trajectory traj;
  Eigen::VectorXd theta = params0;
  Eigen::VectorXd r = residuals(spec, theta, data.inputs, data.labels);
  double loss = loss_of(r);
  double t = 0.0;

  auto record = [&]() {
    traj.times.push_back(t);
    traj.params_snapshots.push_back(theta);
    traj.train_residuals.push_back(r);
    if (data.n_holdout() > 0) {
      traj.test_residuals.push_back(residuals(spec, theta, data.holdout_inputs,
                                              data.holdout_labels));
      if (track)
        traj.projections.push_back(
            project(traj.test_residuals.back(), tracked, k_track));
    }
  };
  record();

  const double n = static_cast<double>(data.n());
  double eta = schedule.eta0;
  std::size_t next_cp = 0;
  while (next_cp < grid.size()) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index i = 0; i < data.inputs.rows(); ++i)
      accumulate_grad(spec, theta, data.inputs.row(i).transpose(), r[i] / n,
                      g);
    int halvings = 0;
    for (;;) {
      const bool lands = grid[next_cp] - t <= eta;
      const double step = lands ? grid[next_cp] - t : eta;
      const Eigen::VectorXd theta_next = theta - step * g;
      const Eigen::VectorXd r_next =
          residuals(spec, theta_next, data.inputs, data.labels);
      const double loss_next = loss_of(r_next);
      if (loss_next <= loss) {
        theta = theta_next;
        r = r_next;
        loss = loss_next;
        t = lands ? grid[next_cp] : t + step;
        traj.step_times.push_back(t);
        traj.step_drift.push_back((theta - params0).norm());
        traj.step_loss.push_back(loss);
        traj.step_eta.push_back(step);
        break;
      }
      if (++halvings > 20) {
        std::ostringstream msg;
        msg << "train: step at t = " << t << " rejected after " << halvings - 1
            << " halvings (loss " << loss << " -> " << loss_next
            << "); flow integration failed";
        throw std::runtime_error(msg.str());
      }
      eta *= 0.5;
    }
    if (t >= grid[next_cp]) {
      record();
      ++next_cp;
    }
  }
  return traj;
}

KernelDynamics::KernelDynamics(EigenSystem es, Eigen::VectorXd r0_in)
    : eigen(std::move(es)), r0(std::move(r0_in)) {
  if (eigen.scale_tag != "G/n")
    throw validation_error("KernelDynamics: eigensystem must be of G/n");
  if (r0.size() != eigen.eigenvectors.rows())
    throw validation_error("KernelDynamics: r0 size mismatch");
  coeffs0 = eigen.eigenvectors.transpose() * r0;
}

Eigen::VectorXd kernel_flow(const KernelDynamics& kd, double t) {
  if (t < 0.0) throw validation_error("kernel_flow: negative time");
  if (t == 0.0) return kd.r0;
  Eigen::VectorXd damped(kd.coeffs0.size());
  for (Eigen::Index i = 0; i < damped.size(); ++i)
    damped[i] = std::exp(-kd.eigen.eigenvalues[i] * t) * kd.coeffs0[i];
  return kd.eigen.eigenvectors * damped;
}

Eigen::VectorXd project(const Eigen::VectorXd& r,
                        const std::vector<EigenFunction>& phis, int k) {
  if (k < 1 || k > static_cast<int>(phis.size()))
    throw validation_error("project: k exceeds available eigenpairs");
  const auto n = phis.front().sample->rows();
  if (r.size() != n)
    throw validation_error("project: residual does not live on the "
                           "eigenfunction sample");
  // phi_i at the sample points is sqrt(n) * u_i, so the normalized inner
  // product collapses to u_i . r / sqrt(n).
  Eigen::VectorXd coeffs(k);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (int i = 0; i < k; ++i)
    coeffs[i] = phis[static_cast<std::size_t>(i)].coefficients.dot(r) / root_n;
  return coeffs;
}

DecayRateFit decay_rate_fit(const Trajectory& traj, int index) {
  DecayRateFit fit;
  std::vector<double> ts, logs;
  for (std::size_t j = 0; j < traj.projections.size(); ++j) {
    if (index < 0 || index >= traj.projections[j].size()) continue;
    const double c = std::abs(traj.projections[j][index]);
    if (c > 1e-6) {
      ts.push_back(traj.times[j]);
      logs.push_back(std::log(c));
    }
  }
  fit.points_used = static_cast<int>(ts.size());
  if (fit.points_used < 5) return fit;
  const double m = static_cast<double>(ts.size());
  double st = 0.0, sy = 0.0;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    st += ts[j];
    sy += logs[j];
  }
  const double tbar = st / m, ybar = sy / m;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    stt += (ts[j] - tbar) * (ts[j] - tbar);
    sty += (ts[j] - tbar) * (logs[j] - ybar);
    syy += (logs[j] - ybar) * (logs[j] - ybar);
  }
  if (stt == 0.0) return fit;
  const double slope = sty / stt;
  const double ss_res = syy - sty * sty / stt;
  fit.rate = -slope;
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.fit_ok = true;
  return fit;
}

DampedDeviationReport damped_deviation_report(
    const Trajectory& traj, const KernelDynamics& kd,
    const std::vector<EigenFunction>& phis, const std::vector<int>& k_list,
    double kernel_distance_sq, double f_star_sup, double eps_slack) {
  if (traj.test_residuals.empty())
    throw validation_error("damped_deviation_report: trajectory has no "
                           "holdout residuals");
  if (traj.test_residuals.front().size() != kd.r0.size() ||
      (traj.test_residuals.front() - kd.r0).cwiseAbs().maxCoeff() >
          1e-12 * (1.0 + kd.r0.cwiseAbs().maxCoeff()))
    throw validation_error(
        "damped_deviation_report: trajectory and kernel dynamics do not "
        "share r_0");
  if (phis.empty() ||
      phis.front().sample->rows() != traj.test_residuals.front().size())
    throw validation_error(
        "damped_deviation_report: eigenfunctions on the wrong sample");
  for (int k : k_list)
    if (k < 1 || k > static_cast<int>(phis.size()))
      throw validation_error("damped_deviation_report: k out of range");

  const double constant =
      4.0 * f_star_sup * f_star_sup * kernel_distance_sq + eps_slack;
  const int k_max =
      k_list.empty() ? 0 : *std::max_element(k_list.begin(), k_list.end());
  const auto n = phis.front().sample->rows();

  DampedDeviationReport report;
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    const double t = traj.times[j];
    const Eigen::VectorXd dev = traj.test_residuals[j] - kernel_flow(kd, t);
    const Eigen::VectorXd coeffs =
        k_max > 0 ? project(dev, phis, k_max) : Eigen::VectorXd();
    for (int k : k_list) {
      const double sigma_k = phis[static_cast<std::size_t>(k - 1)].eigenvalue;
      const double damp =
          sigma_k > 0.0 ? -std::expm1(-sigma_k * t) / sigma_k : t;
      DampedDeviationRow row;
      row.t = t;
      row.k = k;
      row.lhs = coeffs.head(k).squaredNorm();
      row.rhs = damp * damp * constant;
      row.ok = row.lhs <= row.rhs;
      report.projected.push_back(row);
      report.all_ok = report.all_ok && row.ok;
    }
    DampedDeviationRow full;
    full.t = t;
    full.k = 0;
    full.lhs = dev.squaredNorm() / static_cast<double>(n);
    full.rhs = t * t * constant;
    full.ok = full.lhs <= full.rhs;
    report.unprojected.push_back(full);
    report.all_ok = report.all_ok && full.ok;
  }
  return report;
}

TestErrorReport test_error_report(const Trajectory& traj,
                                  const std::vector<EigenFunction>& phis,
                                  int k) {
  if (traj.test_residuals.empty())
    throw validation_error("test_error_report: trajectory has no holdout "
                           "residuals");
  const Eigen::VectorXd& r0 = traj.test_residuals.front();
  const Eigen::VectorXd& rT = traj.test_residuals.back();
  const double n = static_cast<double>(r0.size());
  TestErrorReport rep;
  rep.projected_final_sq = project(rT, phis, k).squaredNorm();
  rep.half_final_sq = 0.5 * rT.squaredNorm() / n;
  rep.tail_initial_sq = std::max(
      0.0, r0.squaredNorm() / n - project(r0, phis, k).squaredNorm());
  return rep;
}

}  // namespace ntklab
