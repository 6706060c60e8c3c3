#include "ntklab/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <memory>

#include "ntklab/entropy.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/serialize.hpp"
#include "ntklab/spectral.hpp"

namespace ntklab {

namespace {

namespace fs = std::filesystem;

std::string iso_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// CSV and JSON artifacts are byte-stable for a fixed config and seed; only
// SVG plots may carry a timestamp, and --reproducible suppresses it.
std::string plot_stamp(const RunOptions& opt) {
  return opt.reproducible ? std::string() : iso_now();
}

nlohmann::json base_meta(const ExperimentConfig& cfg) {
  nlohmann::json meta;
  meta["config"] = resolved_config_json(cfg);
  meta["code_version"] = std::string(kCodeVersion);
  meta["rng_algorithm"] = std::string(Rng::algorithm);
  return meta;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void emit_error(const RunOptions& opt, const std::string& kind,
                const std::string& message) {
  std::cerr << "ntklab: " << message << "\n";
  try {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    j["code_version"] = std::string(kCodeVersion);
    write_json(opt.out_dir / "error.json", j);
  } catch (const std::exception&) {
    // The error report is best effort; the exit code still signals failure.
  }
}

const NetworkSpec& require_network(const ExperimentConfig& cfg) {
  if (cfg.network.layers.empty())
    throw validation_error("config: $.network is required for recipe " +
                           cfg.recipe);
  return cfg.network;
}

Dataset checked_dataset(const ExperimentConfig& cfg, const NetworkSpec& net) {
  Dataset data = build_dataset(cfg);
  if (net.input_dim != data.dim())
    throw validation_error(
        "config: $.network.input_dim (" + std::to_string(net.input_dim) +
        ") does not match the dataset dimension (" +
        std::to_string(data.dim()) + ")");
  return data;
}

nlohmann::json provenance_json(const Dataset& data) {
  return {{"kind", data.provenance.kind},
          {"detail", data.provenance.detail},
          {"checksum", data.provenance.checksum},
          {"seed", data.provenance.seed}};
}

void run_spectrum(const ExperimentConfig& cfg, const RunOptions& opt) {
  const NetworkSpec& net = require_network(cfg);
  const Dataset data = checked_dataset(cfg, net);
  Rng init_rng = Rng(cfg.seed).child(1);
  const Eigen::VectorXd params0 = init_params(net, init_rng);
  const GramMatrix gm = gram(net, params0, data.inputs);
  const EigenSystem es = eigh(gm, GramScale::OverN);
  const int k_max = cfg.spectrum.k_max > 0 ? cfg.spectrum.k_max
                                           : std::max(1, data.n() / 2);
  const std::vector<SpectrumEntry> entries = spectrum_report(es, k_max);

  write_text_file(opt.out_dir / "spectrum.csv", spectrum_csv(entries));
  PlotOptions popt;
  popt.timestamp = plot_stamp(opt);
  popt.title = "spectrum: " + net.tag();
  write_text_file(opt.out_dir / "spectrum.svg", spectrum_svg(entries, popt));

  nlohmann::json j = base_meta(cfg);
  j["n"] = data.n();
  j["k_max"] = k_max;
  j["kernel_tag"] = gm.kernel_tag;
  j["source_tag"] = es.source_tag;
  j["provenance"] = provenance_json(data);
  nlohmann::json arr = nlohmann::json::array();
  for (const SpectrumEntry& e : entries)
    arr.push_back({{"k", e.k},
                   {"lambda", e.lambda},
                   {"lambda_normalized", e.ratio}});
  j["entries"] = arr;
  write_json(opt.out_dir / "spectrum.json", j);
  if (cfg.spectrum.save_gram)
    save_gram_binary((opt.out_dir / "gram.bin").string(), gm);
}

void run_spectral_bias(const ExperimentConfig& cfg, const RunOptions& opt) {
  const NetworkSpec& net = require_network(cfg);
  const Dataset data = checked_dataset(cfg, net);
  if (data.n_holdout() == 0)
    throw validation_error(
        "config: $.data.holdout must be positive for spectral-bias "
        "(eigenfunctions are tracked on the holdout sample)");
  if (cfg.tracked > data.n_holdout())
    throw validation_error(
        "config: $.tracked cannot exceed the holdout size");

  Rng init_rng = Rng(cfg.seed).child(1);
  const Eigen::VectorXd params0 = init_params(net, init_rng);
  auto kernel = std::make_shared<NtkKernel>(net, params0);
  auto sample = std::make_shared<Eigen::MatrixXd>(data.holdout_inputs);
  const EigenSystem es = eigh(gram(*kernel, *sample), GramScale::OverN);
  const std::vector<EigenFunction> phis =
      nystrom_functions(es, kernel, sample, cfg.tracked);

  const Trajectory traj = train(net, params0, data, cfg.schedule, phis);
  const KernelDynamics kd(es, traj.test_residuals.front());

  // Largest kernel drift encountered along the trajectory, over every
  // kernel entry the dynamics and the diagnostics touch.
  Eigen::MatrixXd all(data.n() + data.n_holdout(), data.dim());
  all.topRows(data.n()) = data.inputs;
  all.bottomRows(data.n_holdout()) = data.holdout_inputs;
  const Eigen::MatrixXd base = kernel->cross(all, data.inputs);
  double drift = 0.0;
  for (std::size_t cp = 1; cp < traj.params_snapshots.size(); ++cp) {
    const NtkKernel kt(net, traj.params_snapshots[cp]);
    drift = std::max(drift,
                     (kt.cross(all, data.inputs) - base).cwiseAbs().maxCoeff());
  }
  const double dist_sq = drift * drift;

  const DampedDeviationReport dev = damped_deviation_report(
      traj, kd, phis, cfg.deviation.k_list, dist_sq, data.label_sup(),
      cfg.deviation.eps_slack);

  nlohmann::json j = base_meta(cfg);
  j["provenance"] = provenance_json(data);
  j["trajectory"] = trajectory_json(traj);
  j["drift_bound_ok"] = traj.drift_bound_ok();
  std::vector<double> sigma(es.eigenvalues.data(),
                            es.eigenvalues.data() + cfg.tracked);
  j["sigma"] = sigma;
  nlohmann::json fits = nlohmann::json::array();
  for (int i = 0; i < cfg.tracked; ++i) {
    const DecayRateFit fit = decay_rate_fit(traj, i);
    fits.push_back({{"index", i + 1},
                    {"rate", fit.rate},
                    {"r_squared", fit.r_squared},
                    {"points_used", fit.points_used},
                    {"fit_ok", fit.fit_ok},
                    {"sigma", es.eigenvalues[i]}});
  }
  j["decay_fits"] = fits;
  const auto rows_json = [](const std::vector<DampedDeviationRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const DampedDeviationRow& r : rows)
      arr.push_back({{"t", r.t},
                     {"k", r.k},
                     {"lhs", r.lhs},
                     {"rhs", r.rhs},
                     {"ok", r.ok}});
    return arr;
  };
  j["deviation"] = {{"kernel_distance_sq", dist_sq},
                    {"f_star_sup", data.label_sup()},
                    {"eps_slack", cfg.deviation.eps_slack},
                    {"all_ok", dev.all_ok},
                    {"projected", rows_json(dev.projected)},
                    {"unprojected", rows_json(dev.unprojected)}};
  write_json(opt.out_dir / "trajectory.json", j);

  write_text_file(opt.out_dir / "projections.csv", projections_csv(traj));
  PlotOptions popt;
  popt.timestamp = plot_stamp(opt);
  popt.title = "projection decay: " + net.tag();
  write_text_file(
      opt.out_dir / "decay.svg",
      projection_decay_svg(traj, es.eigenvalues.head(cfg.tracked), popt));
}

void run_effective_rank(const ExperimentConfig& cfg, const RunOptions& opt) {
  const NetworkSpec& net = require_network(cfg);
  const Dataset data = checked_dataset(cfg, net);
  Rng init_rng = Rng(cfg.seed).child(1);
  const Eigen::VectorXd params0 = init_params(net, init_rng);
  const FisherMatrix fm = fim(net, params0, data.inputs);
  const Eigen::VectorXd eigs = fim_nonzero_eigenvalues(fm);
  if (eigs.size() == 0 || !(eigs[0] > 0.0))
    throw std::runtime_error("effective-rank: degenerate Fisher spectrum");

  const int pts = cfg.rank.sweep_points;
  Eigen::VectorXd grid(pts);
  for (int i = 0; i < pts; ++i) {
    const double frac =
        pts == 1 ? 0.0 : static_cast<double>(pts - 1 - i) / (pts - 1);
    grid[i] = eigs[0] * std::pow(cfg.rank.eps_min_ratio, frac);
  }
  write_text_file(opt.out_dir / "effective_rank.csv",
                  effective_rank_sweep_csv(eigs, grid));

  const LinearizedBound bound = linearized_covering_bound(
      eigs, cfg.rank.radius, cfg.rank.eps, cfg.rank.gamma);

  nlohmann::json j = base_meta(cfg);
  j["provenance"] = provenance_json(data);
  j["p"] = fm.p();
  j["samples"] = fm.samples();
  j["trace"] = fm.trace();
  const Eigen::Index head = std::min<Eigen::Index>(32, eigs.size());
  j["eigenvalues"] =
      std::vector<double>(eigs.data(), eigs.data() + head);
  j["bound"] = linearized_bound_json(bound);
  write_json(opt.out_dir / "effective_rank.json", j);
}

void run_hessian_probe(const ExperimentConfig& cfg, const RunOptions& opt) {
  const NetworkSpec& tmpl = require_network(cfg);
  ExperimentConfig probe_cfg = cfg;
  probe_cfg.data.source = "synthetic";
  probe_cfg.data.n = cfg.probe.inputs;
  probe_cfg.data.holdout = 0;
  probe_cfg.data.target_kind = "zero";
  const Dataset data = checked_dataset(probe_cfg, tmpl);

  Rng root(cfg.seed);
  std::vector<double> opnorms;
  std::vector<bool> converged;
  std::string csv = "width,opnorm,converged,iterations\n";
  for (std::size_t wi = 0; wi < cfg.probe.widths.size(); ++wi) {
    const int w = cfg.probe.widths[wi];
    if (w < 1)
      throw validation_error("config: $.probe.widths must be positive");
    NetworkSpec net = tmpl;
    for (LayerSpec& layer : net.layers)
      if (layer.kind != LayerKind::Convolutional) layer.width = w;
    net.validate();
    Rng init_rng = root.child(100 + wi);
    const Eigen::VectorXd params = init_params(net, init_rng);
    double best = 0.0;
    bool all_ok = true;
    int iterations = 0;
    for (int i = 0; i < cfg.probe.inputs; ++i) {
      Rng probe_rng = root.child(1000 + 64 * wi + static_cast<std::size_t>(i));
      const OpnormEstimate est =
          hessian_opnorm_estimate(net, params, data.inputs.row(i).transpose(),
                                  cfg.probe.iterations, probe_rng);
      best = std::max(best, est.value);
      all_ok = all_ok && est.converged;
      iterations = std::max(iterations, est.iterations);
    }
    opnorms.push_back(best);
    converged.push_back(all_ok);
    csv += std::to_string(w) + "," + double_repr(best) + "," +
           (all_ok ? "1" : "0") + "," + std::to_string(iterations) + "\n";
  }
  write_text_file(opt.out_dir / "hessian_probe.csv", csv);

  // Log-log slope of opnorm against width.
  const std::size_t count = cfg.probe.widths.size();
  double slope = 0.0, intercept = 0.0;
  if (count >= 2) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      if (!(opnorms[i] > 0.0))
        throw std::runtime_error("hessian-probe: zero operator norm");
      const double x = std::log(static_cast<double>(cfg.probe.widths[i]));
      const double y = std::log(opnorms[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(count);
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    intercept = (sy - slope * sx) / n;
  }

  nlohmann::json j = base_meta(cfg);
  j["widths"] = cfg.probe.widths;
  j["opnorms"] = opnorms;
  j["converged"] = converged;
  j["slope"] = slope;
  j["intercept"] = intercept;
  write_json(opt.out_dir / "hessian_probe.json", j);
}

void run_cover_audit(const ExperimentConfig& cfg, const RunOptions& opt) {
  Rng root(cfg.seed);
  nlohmann::json j = base_meta(cfg);
  if (cfg.cover.has_metric) {
    Rng rng = root.child(1);
    const CoverEquivalenceReport rep = cover_equivalence_check(
        cfg.cover.metric, cfg.cover.radius, cfg.cover.eps, cfg.cover.gamma,
        rng, cfg.cover.audit_samples);
    j.update(cover_equivalence_json(rep));
  } else {
    Ellipsoid e;
    e.half_axes = Eigen::Map<const Eigen::VectorXd>(
        cfg.cover.axes.data(),
        static_cast<Eigen::Index>(cfg.cover.axes.size()));
    Rng pack_rng = root.child(1);
    const CoverReport rep = construct_cover(e, cfg.cover.gamma, pack_rng);
    Rng audit_rng = root.child(2);
    const int violations =
        cover_audit(e, rep.centers, cfg.cover.audit_samples, audit_rng);
    j["cover"] = cover_report_json(rep);
    j["samples"] = cfg.cover.audit_samples;
    j["violations"] = violations;
  }
  write_json(opt.out_dir / "cover_audit.json", j);
}

fs::path resolve_out(const std::string& flag_out, const std::string& cfg_out) {
  if (!flag_out.empty()) return flag_out;
  if (!cfg_out.empty()) return cfg_out;
  if (const char* env = std::getenv("NTKLAB_OUT"); env != nullptr && *env)
    return env;
  return "ntklab-out";
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  try {
    fs::create_directories(opt.out_dir);
    write_json(opt.out_dir / "config.json", base_meta(cfg));
    if (cfg.recipe == "spectrum") {
      run_spectrum(cfg, opt);
    } else if (cfg.recipe == "spectral-bias") {
      run_spectral_bias(cfg, opt);
    } else if (cfg.recipe == "effective-rank") {
      run_effective_rank(cfg, opt);
    } else if (cfg.recipe == "hessian-probe") {
      run_hessian_probe(cfg, opt);
    } else if (cfg.recipe == "cover-audit") {
      run_cover_audit(cfg, opt);
    } else {
      throw validation_error(
          "config: $.recipe must be one of spectrum, spectral-bias, "
          "effective-rank, hessian-probe, cover-audit");
    }
    return 0;
  } catch (const validation_error& e) {
    emit_error(opt, "validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error(opt, "runtime", e.what());
    return 3;
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ntklab: a finite-width tangent-kernel laboratory"};
  std::string recipe, config_path, out_flag;
  std::uint64_t seed = 0;
  bool reproducible = false;
  app.add_option("recipe", recipe,
                 "one of spectrum, spectral-bias, effective-rank, "
                 "hessian-probe, cover-audit")
      ->required();
  app.add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_flag,
                 "output directory (falls back to the config's out field, "
                 "then $NTKLAB_OUT, then ntklab-out)");
  app.add_flag("--reproducible", reproducible,
               "suppress timestamps so artifacts are byte-stable");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  RunOptions opt;
  opt.reproducible = reproducible;
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (!cfg.recipe.empty() && cfg.recipe != recipe)
      throw validation_error("config: $.recipe (" + cfg.recipe +
                             ") does not match the command line recipe (" +
                             recipe + ")");
    cfg.recipe = recipe;
    if (seed_opt->count() > 0) cfg.seed = seed;
    opt.out_dir = resolve_out(out_flag, cfg.out);
  } catch (const validation_error& e) {
    opt.out_dir = resolve_out(out_flag, "");
    emit_error(opt, "validation", e.what());
    return 2;
  }
  return run_experiment(cfg, opt);
}

}  // namespace ntklab
