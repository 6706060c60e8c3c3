// Acceptance suite: every quantitative promise the laboratory makes, run
// end to end at desk scale. One PASS/FAIL line per check; the exit code is
// nonzero when any check fails. Checks share a fixed numbering so log lines
// stay comparable across runs.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/dynamics.hpp"
#include "ntklab/entropy.hpp"
#include "ntklab/experiment.hpp"
#include "ntklab/network.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/rng.hpp"
#include "ntklab/serialize.hpp"
#include "ntklab/spectral.hpp"
#include "test_util.hpp"

using namespace ntklab;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

NetworkSpec shallow(int d, int m, Activation act, bool asi) {
  NetworkSpec spec;
  spec.input_dim = d;
  spec.layers.push_back(LayerSpec::fc(m));
  spec.activation = act;
  spec.asi = asi;
  return spec;
}

Eigen::MatrixXd sphere_points(int n, int d, Rng& rng) {
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x[j] = rng.normal();
    X.row(i) = x.transpose() / x.norm();
  }
  return X;
}

double damp_factor(double sigma, double t) {
  if (sigma <= 0.0) return t;
  return -std::expm1(-sigma * t) / sigma;
}

// The softplus training run shared by the spectral-bias, deviation-bound,
// and invariant checks: m = 512, n = 256 on the 5-sphere, ASI init, target
// built from the top-5 eigenfunctions of the init kernel. The eigensystem
// lives on the training sample itself (holdout = train), so the only gaps
// between the trained residual and the kernel flow are kernel drift along
// the trajectory and the Euler discretization.
struct BiasRun {
  NetworkSpec spec;
  Eigen::VectorXd params0;
  Dataset data;
  std::shared_ptr<NtkKernel> kernel;
  std::shared_ptr<Eigen::MatrixXd> sample;
  EigenSystem es;
  std::vector<EigenFunction> phis;
  Schedule sched;
  Trajectory traj;
  std::unique_ptr<KernelDynamics> kd;
  double dist_sq = 0.0;

  BiasRun() {
    const int n = 256, d = 5, m = 512, tracked = 5;
    spec = shallow(d, m, Activation::Softplus, true);
    Rng root(104729);
    Rng init_rng = root.child(1);
    params0 = init_params(spec, init_rng);
    Rng data_rng = root.child(0);
    const Eigen::MatrixXd X = sphere_points(n, d, data_rng);
    data.inputs = X;
    data.holdout_inputs = X;
    data.provenance.kind = "synthetic";
    data.provenance.detail = "acceptance-spectral-bias";
    data.provenance.seed = root.seed();

    kernel = std::make_shared<NtkKernel>(spec, params0);
    sample = std::make_shared<Eigen::MatrixXd>(X);
    es = eigh(gram(*kernel, *sample), GramScale::OverN);
    phis = nystrom_functions(es, kernel, sample, tracked);

    Eigen::VectorXd mix(tracked);
    mix << 0.5, 0.3, 0.2, 0.12, 0.08;
    data.labels = std::sqrt(static_cast<double>(n)) *
                  es.eigenvectors.leftCols(tracked) * mix;
    data.holdout_labels = data.labels;

    // Horizon: the top direction decays 20x; step: eta * sigma_1 = 5e-4,
    // finer than the linear-exactness run whose slack feeds the bound.
    const double sigma1 = es.eigenvalues[0];
    const double t_max = std::log(20.0) / sigma1;
    sched.eta0 = 5e-4 / sigma1;
    sched.t_max = t_max;
    sched.checkpoints = geometric_checkpoints(t_max / 64.0, t_max, 13);

    traj = train(spec, params0, data, sched, phis);
    kd = std::make_unique<KernelDynamics>(es, traj.test_residuals.front());

    const Eigen::MatrixXd base = kernel->cross(X, X);
    double drift = 0.0;
    for (std::size_t cp = 1; cp < traj.params_snapshots.size(); ++cp) {
      const NtkKernel kt(spec, traj.params_snapshots[cp]);
      drift = std::max(drift, (kt.cross(X, X) - base).cwiseAbs().maxCoeff());
    }
    dist_sq = drift * drift;
  }
};

struct SharedState {
  double linear_slack = std::numeric_limits<double>::quiet_NaN();
  std::unique_ptr<BiasRun> bias;
  std::string bias_error;

  BiasRun& bias_run() {
    if (!bias && bias_error.empty()) {
      try {
        bias = std::make_unique<BiasRun>();
      } catch (const std::exception& e) {
        bias_error = e.what();
      }
    }
    if (!bias)
      throw std::runtime_error("shared spectral-bias run failed: " +
                               bias_error);
    return *bias;
  }
};

// ---- check 1: backprop vs central finite differences ----

Result check_gradients() {
  std::vector<NetworkSpec> archs;
  {
    NetworkSpec fc;
    fc.input_dim = 6;
    fc.layers = {LayerSpec::fc(32), LayerSpec::fc(32), LayerSpec::fc(32)};
    archs.push_back(fc);
  }
  {
    NetworkSpec conv;
    conv.input_dim = 16;  // 1 channel x 16 pixels
    conv.layers = {LayerSpec::conv(3, 32, 16)};
    archs.push_back(conv);
  }
  {
    NetworkSpec res;
    res.input_dim = 6;
    res.layers = {LayerSpec::fc(32), LayerSpec::residual(32),
                  LayerSpec::residual(32)};
    archs.push_back(res);
  }

  Rng rng(1553);
  double worst = 0.0;
  for (NetworkSpec spec : archs) {
    for (Activation act : {Activation::Softplus, Activation::Tanh}) {
      spec.activation = act;
      spec.validate();
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd params = init_params(spec, rng);
        Eigen::VectorXd x(spec.input_dim);
        for (int j = 0; j < spec.input_dim; ++j) x[j] = rng.normal();
        const Eigen::VectorXd g = grad(spec, params, x);
        const Eigen::VectorXd fd = testutil::fd_grad(spec, params, x, 1e-5);
        worst = std::max(worst, testutil::rel_inf_error(g, fd));
      }
    }
  }
  return {worst < 1e-5,
          fmt("3 architectures x 2 activations x 20 draws, max rel err %.2e "
              "(limit 1e-5)",
              worst)};
}

// ---- check 2: ASI zero output and kernel preservation ----

Result check_asi() {
  const NetworkSpec spec = shallow(5, 64, Activation::Softplus, true);
  const NetworkSpec base = shallow(5, 64, Activation::Softplus, false);
  Rng rng(2671);
  const Eigen::VectorXd params = init_params(spec, rng);
  const ParamLayout layout = param_layout(spec);

  int zero_hits = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd x(5);
    for (int j = 0; j < 5; ++j) x[j] = rng.normal();
    if (forward(spec, params, x) == 0.0) ++zero_hits;
  }

  const Eigen::MatrixXd X = sphere_points(64, 5, rng);
  const Eigen::MatrixXd g_asi = gram(spec, params, X).values;
  const Eigen::MatrixXd g_base =
      gram(base, params.head(layout.half).eval(), X).values;
  const double gram_diff = (g_asi - g_base).cwiseAbs().maxCoeff();

  return {zero_hits == 100 && gram_diff < 1e-10,
          fmt("zero output on %d/100 inputs, gram max diff %.2e (limit "
              "1e-10) at n=64",
              zero_hits, gram_diff)};
}

// ---- check 3: Monte Carlo kernel vs the linear closed form ----

Result check_analytic_ntk() {
  const NetworkSpec spec = shallow(4, 64, Activation::Linear, false);
  Rng rng(3889);
  double worst_z = 0.0;
  for (int rep = 0; rep < 6; ++rep) {
    Eigen::VectorXd x(4), y(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.normal();
    for (int j = 0; j < 4; ++j) y[j] = rng.normal();
    x /= x.norm();
    y /= y.norm();
    const KernelEstimate est =
        analytic_ntk_mc(spec, x, y, 10000, rng.child(10 + rep));
    const double closed = 2.0 * x.dot(y);
    if (!(est.stderr_ > 0.0)) return {false, "degenerate standard error"};
    worst_z = std::max(worst_z, std::abs(est.value - closed) / est.stderr_);
  }
  return {worst_z < 5.0,
          fmt("6 input pairs at n_init=10^4, worst |z| = %.2f (limit 5 "
              "standard errors)",
              worst_z)};
}

// ---- check 4: linear-model trajectory exactness ----

Result check_linear_exactness(SharedState& S) {
  const NetworkSpec spec = shallow(3, 1024, Activation::Linear, true);
  Rng rng(1907);
  const Eigen::VectorXd params0 = init_params(spec, rng);
  Dataset data;
  data.inputs = sphere_points(24, 3, rng);
  data.provenance.kind = "synthetic";
  data.provenance.detail = "acceptance-linear";

  const EigenSystem es =
      eigh(gram(spec, params0, data.inputs), GramScale::OverN);
  Eigen::Vector3d mix(0.02, 0.03, 0.01);
  data.labels = std::sqrt(24.0) * es.eigenvectors.leftCols(3) * mix;

  Schedule sched;
  sched.eta0 = 1e-3;
  sched.t_max = 5.0;
  sched.checkpoints = geometric_checkpoints(0.1, 5.0, 12);
  const Trajectory traj = train(spec, params0, data, sched);

  const KernelDynamics kd(es, traj.train_residuals.front());
  const double r0_norm = traj.train_residuals.front().norm();
  double worst_rel = 0.0, worst_vs_r0 = 0.0;
  for (int j = 0; j < traj.checkpoint_count(); ++j) {
    const Eigen::VectorXd flow = kernel_flow(kd, traj.times[j]);
    const double diff = (traj.train_residuals[j] - flow).norm();
    worst_rel = std::max(worst_rel, diff / flow.norm());
    worst_vs_r0 = std::max(worst_vs_r0, diff / r0_norm);
  }
  S.linear_slack = worst_vs_r0;
  return {worst_rel < 0.01,
          fmt("T=5, eta=1e-3: max rel err %.2e (limit 1e-2); slack vs r0 "
              "%.2e feeds the deviation bound",
              worst_rel, worst_vs_r0)};
}

// ---- check 5: spectral bias at desk scale ----

Result check_spectral_bias(SharedState& S) {
  BiasRun& run = S.bias_run();
  const int tracked = static_cast<int>(run.phis.size());

  const double c1_start = std::abs(run.traj.projections.front()[0]);
  const double c1_end = std::abs(run.traj.projections.back()[0]);
  const double decay_factor = c1_start / std::max(c1_end, 1e-300);
  if (decay_factor < 10.0)
    return {false, fmt("top direction decayed only %.1fx (needs >= 10x)",
                       decay_factor)};

  std::vector<double> rates(tracked);
  double worst_ratio_lo = 1e9, worst_ratio_hi = 0.0;
  for (int i = 0; i < tracked; ++i) {
    const DecayRateFit fit = decay_rate_fit(run.traj, i);
    if (!fit.fit_ok)
      return {false, fmt("decay fit %d unusable (%d points)", i + 1,
                         fit.points_used)};
    rates[i] = fit.rate;
    const double ratio = fit.rate / run.es.eigenvalues[i];
    worst_ratio_lo = std::min(worst_ratio_lo, ratio);
    worst_ratio_hi = std::max(worst_ratio_hi, ratio);
  }
  const bool rates_ok = worst_ratio_lo >= 0.7 && worst_ratio_hi <= 1.3;

  bool order_ok = true;
  int separated_pairs = 0;
  for (int i = 0; i < tracked; ++i)
    for (int j = i + 1; j < tracked; ++j)
      if (run.es.eigenvalues[i] >= 2.0 * run.es.eigenvalues[j]) {
        ++separated_pairs;
        if (!(rates[i] > rates[j])) order_ok = false;
      }

  return {rates_ok && order_ok,
          fmt("top direction decayed %.0fx; rate/sigma in [%.3f, %.3f] "
              "(limits [0.7, 1.3]); ordering kept on %d 2x-separated pairs%s",
              decay_factor, worst_ratio_lo, worst_ratio_hi, separated_pairs,
              order_ok ? "" : " [VIOLATED]")};
}

// ---- check 6: damped-deviation one-sided bound ----

Result check_damped_deviations(SharedState& S) {
  BiasRun& run = S.bias_run();
  if (!std::isfinite(S.linear_slack))
    return {false, "missing oracle slack from the linear-exactness check"};

  const std::vector<int> k_list = {1, 3, 5};
  double damp_min = std::numeric_limits<double>::infinity();
  for (double t : run.sched.checkpoints)
    for (int k : k_list)
      damp_min = std::min(damp_min, damp_factor(run.es.eigenvalues[k - 1], t));

  // eps_hat charges the Euler discretization to the slack term: damp(t)^2 *
  // eps_hat >= (slack * ||r0||)^2 at every reported checkpoint, with slack
  // transferred from the linear-exactness run (whose eta * sigma product is
  // coarser than this run's).
  const Eigen::VectorXd& r0 = run.traj.test_residuals.front();
  const double r0_emp =
      r0.norm() / std::sqrt(static_cast<double>(r0.size()));
  const double eps_hat = std::pow(S.linear_slack * r0_emp / damp_min, 2.0);
  const double f_sup = run.data.label_sup();

  const DampedDeviationReport rep =
      damped_deviation_report(run.traj, *run.kd, run.phis, k_list,
                              run.dist_sq, f_sup, eps_hat);

  int violations = 0;
  double worst_margin = 0.0;
  for (const DampedDeviationRow& row : rep.projected) {
    if (!row.ok) ++violations;
    if (row.rhs > 0.0)
      worst_margin = std::max(worst_margin, row.lhs / row.rhs);
  }
  return {violations == 0,
          fmt("%zu (t, k) rows, %d violations; max lhs/rhs %.2e with D=%.2e, "
              "eps_hat=%.2e",
              rep.projected.size(), violations, worst_margin, run.dist_sq,
              eps_hat)};
}

// ---- check 7: trajectory invariants ----

Result check_trajectory_invariants(SharedState& S) {
  BiasRun& run = S.bias_run();
  const Trajectory& traj = run.traj;

  for (std::size_t i = 1; i < traj.step_loss.size(); ++i)
    if (traj.step_loss[i] > traj.step_loss[i - 1])
      return {false, fmt("loss increased at accepted step %zu", i)};

  const Eigen::VectorXd& r0 = traj.train_residuals.front();
  const double rms0 = r0.norm() / std::sqrt(static_cast<double>(r0.size()));
  double worst_drift = 0.0, worst_resid = 0.0;
  for (int j = 1; j < traj.checkpoint_count(); ++j) {
    const double t = traj.times[j];
    const double drift = (traj.params_snapshots[j] - traj.params_snapshots[0])
                             .norm();
    worst_drift =
        std::max(worst_drift, drift / (std::sqrt(t / 2.0) * rms0));
    worst_resid =
        std::max(worst_resid, traj.train_residuals[j].norm() / r0.norm());
  }
  const bool ok = worst_drift <= 1.05 && worst_resid <= 1.0 &&
                  traj.drift_bound_ok(0.05);
  return {ok,
          fmt("loss monotone over %zu steps; max drift/bound %.3f (limit "
              "1.05); max ||r_t||/||r_0|| %.3f (limit 1)",
              traj.step_loss.size(), worst_drift, worst_resid)};
}

// ---- check 8: Hessian operator-norm width scaling ----

Result check_hessian_scaling() {
  const std::vector<int> widths = {64, 128, 256, 512};
  const int d = 6, inputs = 8;
  Rng root(8881);
  Rng data_rng = root.child(0);
  const Eigen::MatrixXd X = sphere_points(inputs, d, data_rng);

  std::vector<double> opnorms;
  std::ostringstream per_width;
  for (std::size_t wi = 0; wi < widths.size(); ++wi) {
    const NetworkSpec spec = shallow(d, widths[wi], Activation::Softplus,
                                     false);
    Rng init_rng = root.child(100 + wi);
    const Eigen::VectorXd params = init_params(spec, init_rng);
    double best = 0.0;
    for (int i = 0; i < inputs; ++i) {
      Rng probe_rng = root.child(1000 + 64 * wi + static_cast<std::size_t>(i));
      const OpnormEstimate est = hessian_opnorm_estimate(
          spec, params, X.row(i).transpose(), 600, probe_rng);
      if (!est.converged)
        return {false, fmt("power iteration stalled at width %d", widths[wi])};
      best = std::max(best, est.value);
    }
    opnorms.push_back(best);
    per_width << (wi ? ", " : "") << widths[wi] << ":"
              << fmt("%.3f", best);
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const double x = std::log(static_cast<double>(widths[i]));
    const double y = std::log(opnorms[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double n = static_cast<double>(widths.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope >= -0.7 && slope <= -0.3,
          fmt("opnorms {%s}, log-log slope %.3f (limits [-0.7, -0.3])",
              per_width.str().c_str(), slope)};
}

// ---- check 9: covering sandwich and Monte Carlo audit ----

Result check_covering() {
  Rng rng(9949);
  const double gammas[3] = {0.1, 0.25, 0.4};
  int total_centers = 0, violations = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int dim = 1 + trial % 3;
    const double gamma = gammas[(trial / 3) % 3];
    Ellipsoid e;
    e.half_axes.resize(dim);
    for (int j = 0; j < dim; ++j)
      e.half_axes[j] = std::exp(std::log(0.3) +
                                rng.uniform() *
                                    (std::log(2.2) - std::log(0.3)));

    Rng pack_rng = rng.child(2 * trial);
    const CoverReport rep = construct_cover(e, gamma, pack_rng);
    const double log_count =
        std::log(static_cast<double>(rep.centers.size()));
    if (!(rep.k_lower <= log_count + 1e-12) ||
        !(log_count <= rep.upper + 1e-12))
      return {false,
              fmt("sandwich failed on trial %d: %.3f <= %.3f <= %.3f",
                  trial, rep.k_lower, log_count, rep.upper)};
    total_centers += static_cast<int>(rep.centers.size());

    Rng audit_rng = rng.child(2 * trial + 1);
    violations += cover_audit(e, rep.centers, 10000, audit_rng);
  }
  return {violations == 0,
          fmt("25 ellipsoids (dims 1-3, gamma in {0.1, 0.25, 0.4}), %d "
              "centers total, sandwich held, %d/250000 uncovered samples",
              total_centers, violations)};
}

// ---- check 10: FIM and Gram spectra coincide ----

// Eigenvalues below 1e-12 * lambda_1 on both sides count as numerically
// zero; everything above must agree pairwise.
double fim_gram_max_rel(const Eigen::VectorXd& fim_eigs,
                        const Eigen::VectorXd& gram_eigs) {
  const double floor = 1e-12 * gram_eigs[0];
  const Eigen::Index shared = std::min(fim_eigs.size(), gram_eigs.size());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < shared; ++i) {
    const double a = fim_eigs[i], b = gram_eigs[i];
    if (std::max(std::abs(a), std::abs(b)) <= floor) continue;
    worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), floor));
  }
  for (Eigen::Index i = shared; i < fim_eigs.size(); ++i)
    worst = std::max(worst, std::abs(fim_eigs[i]) / gram_eigs[0]);
  return worst;
}

Result check_fim_identity() {
  // (n, p) = (32, 200): explicit p x p matrix, both sides through Jacobi.
  Rng rng(4243);
  const NetworkSpec small = shallow(9, 20, Activation::Softplus, false);
  const Eigen::VectorXd params_a = init_params(small, rng);
  const Eigen::MatrixXd Xa = sphere_points(32, 9, rng);
  const FisherMatrix fm_a = fim(small, params_a, Xa);
  if (!fm_a.has_explicit() || fm_a.p() != 200)
    return {false, fmt("unexpected explicit form: p=%td", fm_a.p())};
  const EigenSystem es_fim = eigh(fm_a.explicit_matrix, "fim-explicit");
  const EigenSystem es_gram = eigh(gram(small, params_a, Xa),
                                   GramScale::OverN);
  const double rel_a = fim_gram_max_rel(es_fim.eigenvalues,
                                        es_gram.eigenvalues);

  // (n, p) = (64, 5000): factor form only.
  const NetworkSpec wide = shallow(9, 500, Activation::Softplus, false);
  const Eigen::VectorXd params_b = init_params(wide, rng);
  const Eigen::MatrixXd Xb = sphere_points(64, 9, rng);
  const FisherMatrix fm_b = fim(wide, params_b, Xb);
  if (fm_b.has_explicit() || fm_b.p() != 5000)
    return {false, fmt("unexpected factor form: p=%td", fm_b.p())};
  const Eigen::VectorXd ev_b = fim_nonzero_eigenvalues(fm_b);
  const EigenSystem es_gram_b = eigh(gram(wide, params_b, Xb),
                                     GramScale::OverN);
  const double rel_b = fim_gram_max_rel(ev_b, es_gram_b.eigenvalues);

  const double worst = std::max(rel_a, rel_b);
  return {worst < 1e-8,
          fmt("(32,200) explicit rel err %.2e, (64,5000) factor rel err "
              "%.2e (limit 1e-8)",
              rel_a, rel_b)};
}

// ---- check 11: image-batch spectrum profile ----
//
// Threshold pinned before this check was frozen: a reference run on
// 2026-08-14 with the seeds below measured lambda_128/lambda_1 = 4.7e-7 on
// the IDX conv batch and lambda_64/lambda_1 = 8.4e-5 on the synthetic
// batch, so the 1e-2 limit sits well above both observations.

void push_u32_be(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>((v >> 24) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>(v & 0xff));
}

// Synthetic IDX batch: smooth multi-bump grayscale images quantized to
// bytes, labels uniform over ten classes.
void write_idx_fixture(const fs::path& images_path,
                       const fs::path& labels_path, int n, int side,
                       Rng& rng) {
  std::string images, labels;
  push_u32_be(images, 0x00000803u);
  push_u32_be(images, static_cast<std::uint32_t>(n));
  push_u32_be(images, static_cast<std::uint32_t>(side));
  push_u32_be(images, static_cast<std::uint32_t>(side));
  push_u32_be(labels, 0x00000801u);
  push_u32_be(labels, static_cast<std::uint32_t>(n));

  for (int img = 0; img < n; ++img) {
    const int bumps = 2 + static_cast<int>(rng.next_u64() % 3);
    std::vector<double> cx(bumps), cy(bumps), ss(bumps), amp(bumps);
    for (int b = 0; b < bumps; ++b) {
      cx[b] = side * (0.15 + 0.7 * rng.uniform());
      cy[b] = side * (0.15 + 0.7 * rng.uniform());
      ss[b] = 1.5 + 3.5 * rng.uniform();
      amp[b] = 0.4 + 0.6 * rng.uniform();
    }
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        double v = 0.0;
        for (int b = 0; b < bumps; ++b) {
          const double dx = c - cx[b], dy = r - cy[b];
          v += amp[b] * std::exp(-(dx * dx + dy * dy) / (2.0 * ss[b] * ss[b]));
        }
        const int byte = static_cast<int>(std::lround(
            255.0 * std::min(v, 1.0)));
        images.push_back(static_cast<char>(byte));
      }
    labels.push_back(static_cast<char>(rng.next_u64() % 10));
  }
  write_text_file(images_path, images);
  write_text_file(labels_path, labels);
}

double spectrum_ratio_at(const nlohmann::json& report, int k,
                         bool* nonincreasing) {
  const nlohmann::json& entries = report.at("entries");
  double prev = std::numeric_limits<double>::infinity();
  *nonincreasing = true;
  for (const nlohmann::json& e : entries) {
    const double ratio = e.at("lambda_normalized").get<double>();
    if (ratio > prev + 1e-15) *nonincreasing = false;
    prev = ratio;
  }
  return entries.at(k - 1).at("lambda_normalized").get<double>();
}

Result check_spectrum_profiles() {
  const fs::path dir = fs::temp_directory_path() / "ntklab_acceptance" /
                       "spectrum";
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);

  Rng rng(1151);
  const fs::path images = dir / "images.idx";
  const fs::path labels = dir / "labels.idx";
  write_idx_fixture(images, labels, 512, 28, rng);

  nlohmann::json conv_doc = {
      {"recipe", "spectrum"},
      {"seed", 1101},
      {"network",
       {{"input_dim", 784},
        {"activation", "softplus"},
        {"layers",
         {{{"kind", "conv"}, {"filter_size", 5}, {"channels", 8},
           {"pixels", 784}},
          {{"kind", "fc"}, {"width", 16}}}}}},
      {"data",
       {{"source", "idx"},
        {"images", images.string()},
        {"labels", labels.string()}}},
      {"spectrum", {{"k_max", 256}}}};
  const fs::path out_a = dir / "idx-run";
  if (run_experiment(parse_config(conv_doc), RunOptions{out_a, true}) != 0)
    return {false, "spectrum recipe failed on the IDX batch"};
  bool mono_a = false;
  const double ratio_a = spectrum_ratio_at(
      nlohmann::json::parse(read_text_file(out_a / "spectrum.json")), 128,
      &mono_a);

  nlohmann::json synth_doc = {
      {"recipe", "spectrum"},
      {"seed", 1103},
      {"network",
       {{"input_dim", 1024},
        {"activation", "softplus"},
        {"layers", {{{"kind", "fc"}, {"width", 1024}}}}}},
      {"data",
       {{"source", "synthetic"},
        {"generator", "blob_images"},
        {"grid", 32},
        {"dim", 1024},
        {"n", 256}}},
      {"spectrum", {{"k_max", 128}}}};
  const fs::path out_b = dir / "synth-run";
  if (run_experiment(parse_config(synth_doc), RunOptions{out_b, true}) != 0)
    return {false, "spectrum recipe failed on the synthetic batch"};
  bool mono_b = false;
  const double ratio_b = spectrum_ratio_at(
      nlohmann::json::parse(read_text_file(out_b / "spectrum.json")), 64,
      &mono_b);

  const bool ok = mono_a && mono_b && ratio_a < 1e-2 && ratio_b < 1e-2;
  return {ok,
          fmt("idx conv batch lambda_128/lambda_1 = %.2e, synthetic "
              "lambda_64/lambda_1 = %.2e (limit 1e-2), profiles %s",
              ratio_a, ratio_b,
              (mono_a && mono_b) ? "nonincreasing" : "NOT monotone")};
}

// ---- check 12: reproducible artifact bytes ----

int run_cli_vec(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

Result check_determinism() {
  const fs::path dir = fs::temp_directory_path() / "ntklab_acceptance" /
                       "determinism";
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);

  const nlohmann::json network = {
      {"input_dim", 3},
      {"activation", "softplus"},
      {"asi", true},
      {"layers", {{{"kind", "fc"}, {"width", 64}}}}};
  std::vector<std::pair<std::string, nlohmann::json>> configs;
  configs.push_back(
      {"spectrum",
       {{"recipe", "spectrum"},
        {"seed", 7},
        {"network", network},
        {"data",
         {{"source", "synthetic"},
          {"generator", "sphere_uniform"},
          {"dim", 3},
          {"n", 48}}},
        {"spectrum", {{"k_max", 24}}}}});
  configs.push_back(
      {"spectral-bias",
       {{"recipe", "spectral-bias"},
        {"seed", 11},
        {"network", network},
        {"data",
         {{"source", "synthetic"},
          {"generator", "sphere_uniform"},
          {"dim", 3},
          {"n", 24},
          {"holdout", 24},
          {"target",
           {{"kind", "eigenfunction_mix"},
            {"coefficients", {0.2, 0.1, 0.05}}}}}},
        {"schedule",
         {{"eta0", 0.01},
          {"t_max", 1.0},
          {"checkpoints",
           {{"kind", "geometric"}, {"t_min", 0.1}, {"count", 5}}}}}}});
  configs.push_back(
      {"effective-rank",
       {{"recipe", "effective-rank"},
        {"seed", 5},
        {"network",
         {{"input_dim", 3},
          {"activation", "tanh"},
          {"layers", {{{"kind", "fc"}, {"width", 16}}}}}},
        {"data",
         {{"source", "synthetic"},
          {"generator", "sphere_uniform"},
          {"dim", 3},
          {"n", 24}}},
        {"rank", {{"sweep_points", 12}}}}});
  configs.push_back(
      {"hessian-probe",
       {{"recipe", "hessian-probe"},
        {"seed", 9},
        {"network", network},
        {"data", {{"source", "synthetic"}, {"dim", 3}}},
        {"probe",
         {{"widths", {16, 32}}, {"inputs", 2}, {"iterations", 200}}}}});
  configs.push_back(
      {"cover-audit",
       {{"recipe", "cover-audit"},
        {"seed", 13},
        {"cover",
         {{"axes", {2.0, 1.5}},
          {"gamma", 0.3},
          {"audit_samples", 2000}}}}});

  int files_compared = 0;
  for (const auto& [recipe, doc] : configs) {
    const fs::path cfg_path = dir / (recipe + ".json");
    write_text_file(cfg_path, doc.dump(2));
    const fs::path out_a = dir / (recipe + "-a");
    const fs::path out_b = dir / (recipe + "-b");
    for (const fs::path& out : {out_a, out_b}) {
      const int code = run_cli_vec({"ntklab", recipe, "--config",
                                    cfg_path.string(), "--out", out.string(),
                                    "--reproducible"});
      if (code != 0)
        return {false, fmt("%s exited with %d", recipe.c_str(), code)};
    }
    std::vector<std::string> names;
    for (const fs::directory_entry& entry : fs::directory_iterator(out_a))
      names.push_back(entry.path().filename().string());
    if (names.empty()) return {false, recipe + " produced no artifacts"};
    for (const std::string& name : names) {
      if (!fs::exists(out_b / name))
        return {false, recipe + " second run missed " + name};
      if (read_text_file(out_a / name) != read_text_file(out_b / name))
        return {false, recipe + " artifact " + name + " differs between runs"};
      ++files_compared;
    }
  }
  return {true,
          fmt("5 recipes run twice under --reproducible, %d artifacts "
              "byte-identical",
              files_compared)};
}

struct Check {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 means unconstrained
  std::function<Result()> body;
};

}  // namespace

int main() {
  SharedState S;
  const std::vector<Check> checks = {
      {1, "backprop matches central finite differences", 30.0,
       [] { return check_gradients(); }},
      {2, "asi zero output preserves the tangent kernel", 0.0,
       [] { return check_asi(); }},
      {3, "mc kernel matches the linear closed form", 60.0,
       [] { return check_analytic_ntk(); }},
      {4, "linear-model trajectory exactness", 0.0,
       [&S] { return check_linear_exactness(S); }},
      {5, "spectral bias decay rates at desk scale", 600.0,
       [&S] { return check_spectral_bias(S); }},
      {6, "damped-deviation one-sided bound", 0.0,
       [&S] { return check_damped_deviations(S); }},
      {7, "trajectory invariants", 0.0,
       [&S] { return check_trajectory_invariants(S); }},
      {8, "hessian operator norm shrinks with width", 300.0,
       [] { return check_hessian_scaling(); }},
      {9, "ellipsoid covering sandwich and audit", 0.0,
       [] { return check_covering(); }},
      {10, "fim spectrum equals the scaled gram spectrum", 0.0,
       [] { return check_fim_identity(); }},
      {11, "image-batch spectra collapse by lambda_{n/4}", 600.0,
       [] { return check_spectrum_profiles(); }},
      {12, "reproducible runs emit identical bytes", 0.0,
       [] { return check_determinism(); }},
  };

  int failures = 0;
  for (const Check& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    Result result;
    try {
      result = check.body();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    if (check.time_limit > 0.0 && seconds > check.time_limit) {
      result.pass = false;
      result.detail += fmt(" [over the %.0fs budget]", check.time_limit);
    }
    if (!result.pass) ++failures;
    std::printf("%s %2d/12 %s: %s (%.1fs)\n",
                result.pass ? "PASS" : "FAIL", check.id, check.name,
                result.detail.c_str(), seconds);
    std::fflush(stdout);
  }

  if (failures == 0) {
    std::printf("acceptance: all 12 checks passed\n");
    return 0;
  }
  std::printf("acceptance: %d of 12 checks FAILED\n", failures);
  return 1;
}
