#include "ntklab/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::string fixed2(double v) {
  char buf[48];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

// Tick text: up to four significant digits, shortest form.
std::string tick_label(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::general, 4);
  return std::string(buf, res.ptr);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string label;
  std::string color;
  bool dashed = false;
  std::vector<double> x;
  std::vector<double> y;  // already positive (clamped by the caller)
};

const char* kPalette[6] = {"#1b6ca8", "#c23b22", "#2e7d32",
                           "#7b1fa2", "#e65100", "#00838f"};

// Shared log-y line plot scaffolding: frame, decade gridlines, tick text,
// axis labels and a legend line per labeled series.
std::string render_log_plot(const std::vector<Series>& series,
                            const PlotOptions& opt, const std::string& x_label,
                            const std::string& y_label) {
  if (series.empty()) throw validation_error("svg plot: no series");
  for (const Series& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw validation_error("svg plot: series sizes are inconsistent");
  }
  const double left = 72.0, right = 16.0, top = 34.0, bottom = 46.0;
  const double w = static_cast<double>(opt.width);
  const double h = static_cast<double>(opt.height);
  if (w - left - right < 50.0 || h - top - bottom < 50.0)
    throw validation_error("svg plot: canvas too small");

  double x_min = series[0].x[0], x_max = x_min;
  double ly_min = 0.0, ly_max = 0.0;
  bool first = true;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || s.y[i] <= 0.0)
        throw validation_error("svg plot: values must be finite and positive");
      const double ly = std::log10(s.y[i]);
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      ly_min = first ? ly : std::min(ly_min, ly);
      ly_max = first ? ly : std::max(ly_max, ly);
      first = false;
    }
  }
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  double dec_lo = std::floor(ly_min);
  double dec_hi = std::ceil(ly_max);
  if (dec_hi == dec_lo) dec_hi += 1.0;

  const auto px = [&](double x) {
    return left + (x - x_min) / (x_max - x_min) * (w - left - right);
  };
  const auto py = [&](double ly) {
    return h - bottom - (ly - dec_lo) / (dec_hi - dec_lo) * (h - top - bottom);
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(opt.width) + "\" height=\"" +
         std::to_string(opt.height) + "\" viewBox=\"0 0 " +
         std::to_string(opt.width) + " " + std::to_string(opt.height) +
         "\" font-family=\"monospace\">\n";
  if (!opt.timestamp.empty())
    out += "<!-- generated " + xml_escape(opt.timestamp) + " -->\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!opt.title.empty())
    out += "<text x=\"" + fixed2(w / 2.0) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" +
           xml_escape(opt.title) + "</text>\n";

  const int decades = static_cast<int>(dec_hi - dec_lo);
  const int tick_step = std::max(1, (decades + 7) / 8);
  for (int d = 0; d <= decades; d += tick_step) {
    const double ly = dec_lo + d;
    const std::string y = fixed2(py(ly));
    out += "<line x1=\"" + fixed2(left) + "\" y1=\"" + y + "\" x2=\"" +
           fixed2(w - right) + "\" y2=\"" + y +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + fixed2(left - 6.0) + "\" y=\"" +
           fixed2(py(ly) + 4.0) +
           "\" text-anchor=\"end\" font-size=\"11\">1e" +
           tick_label(ly) + "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = x_min + (x_max - x_min) * i / 4.0;
    out += "<text x=\"" + fixed2(px(x)) + "\" y=\"" +
           fixed2(h - bottom + 16.0) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + tick_label(x) +
           "</text>\n";
  }
  out += "<rect x=\"" + fixed2(left) + "\" y=\"" + fixed2(top) + "\" width=\"" +
         fixed2(w - left - right) + "\" height=\"" + fixed2(h - top - bottom) +
         "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  out += "<text x=\"" + fixed2(left + (w - left - right) / 2.0) + "\" y=\"" +
         fixed2(h - 10.0) + "\" text-anchor=\"middle\" font-size=\"12\">" +
         xml_escape(x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + fixed2(top + (h - top - bottom) / 2.0) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 "
         "16 " +
         fixed2(top + (h - top - bottom) / 2.0) + ")\">" +
         xml_escape(y_label) + "</text>\n";

  for (const Series& s : series) {
    std::string d = "M";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i > 0) d += " L";
      d += fixed2(px(s.x[i])) + "," + fixed2(py(std::log10(s.y[i])));
    }
    out += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\"";
    if (s.dashed) out += " stroke-dasharray=\"6 4\"";
    out += "/>\n";
  }

  double legend_y = top + 14.0;
  for (const Series& s : series) {
    if (s.label.empty()) continue;
    const double lx = w - right - 150.0;
    out += "<line x1=\"" + fixed2(lx) + "\" y1=\"" + fixed2(legend_y - 4.0) +
           "\" x2=\"" + fixed2(lx + 22.0) + "\" y2=\"" +
           fixed2(legend_y - 4.0) + "\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\"";
    if (s.dashed) out += " stroke-dasharray=\"6 4\"";
    out += "/>\n";
    out += "<text x=\"" + fixed2(lx + 28.0) + "\" y=\"" + fixed2(legend_y) +
           "\" font-size=\"11\">" + xml_escape(s.label) + "</text>\n";
    legend_y += 14.0;
  }

  out += "</svg>\n";
  return out;
}

}  // namespace

std::string double_repr(double v) {
  if (!std::isfinite(v)) throw validation_error("double_repr: nonfinite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string spectrum_csv(const std::vector<SpectrumEntry>& entries) {
  if (entries.empty()) throw validation_error("spectrum_csv: empty report");
  std::string out = "k,lambda,lambda_normalized\n";
  for (const SpectrumEntry& e : entries)
    out += std::to_string(e.k) + "," + double_repr(e.lambda) + "," +
           double_repr(e.ratio) + "\n";
  return out;
}

std::string projections_csv(const Trajectory& traj) {
  if (traj.projections.empty())
    throw validation_error("projections_csv: trajectory has no projections");
  if (traj.projections.size() != traj.times.size())
    throw validation_error(
        "projections_csv: projection rows do not match checkpoint times");
  const Eigen::Index k = traj.projections[0].size();
  std::string out = "t";
  for (Eigen::Index i = 0; i < k; ++i)
    out += ",c_" + std::to_string(i + 1);
  out += "\n";
  for (std::size_t row = 0; row < traj.times.size(); ++row) {
    if (traj.projections[row].size() != k)
      throw validation_error("projections_csv: ragged projection rows");
    out += double_repr(traj.times[row]);
    for (Eigen::Index i = 0; i < k; ++i)
      out += "," + double_repr(traj.projections[row][i]);
    out += "\n";
  }
  return out;
}

std::string effective_rank_sweep_csv(const Eigen::VectorXd& eigenvalues,
                                     const Eigen::VectorXd& eps_grid) {
  if (eps_grid.size() == 0)
    throw validation_error("effective_rank_sweep_csv: empty epsilon grid");
  std::string out = "epsilon,effective_rank\n";
  for (Eigen::Index i = 0; i < eps_grid.size(); ++i) {
    const double eps = eps_grid[i];
    if (!std::isfinite(eps) || eps <= 0.0)
      throw validation_error(
          "effective_rank_sweep_csv: epsilon values must be positive");
    out += double_repr(eps) + "," +
           std::to_string(effective_rank(eigenvalues, eps)) + "\n";
  }
  return out;
}

nlohmann::json trajectory_json(const Trajectory& traj) {
  if (traj.times.empty())
    throw validation_error("trajectory_json: empty trajectory");
  nlohmann::json j;
  j["checkpoint_count"] = traj.checkpoint_count();
  j["times"] = traj.times;
  std::vector<double> train_norm, train_loss;
  for (const Eigen::VectorXd& r : traj.train_residuals) {
    train_norm.push_back(r.norm());
    train_loss.push_back(r.squaredNorm() / (2.0 * static_cast<double>(r.size())));
  }
  j["train_residual_norm"] = train_norm;
  j["train_loss"] = train_loss;
  if (!traj.test_residuals.empty()) {
    std::vector<double> test_norm;
    for (const Eigen::VectorXd& r : traj.test_residuals)
      test_norm.push_back(r.norm());
    j["test_residual_norm"] = test_norm;
  }
  if (!traj.projections.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const Eigen::VectorXd& p : traj.projections) rows.push_back(to_vec(p));
    j["projections"] = rows;
  }
  j["steps"] = {{"t", traj.step_times},
                {"drift", traj.step_drift},
                {"loss", traj.step_loss},
                {"eta", traj.step_eta}};
  return j;
}

nlohmann::json cover_report_json(const CoverReport& rep) {
  nlohmann::json j;
  j["gamma"] = rep.gamma;
  j["k_lower"] = rep.k_lower;
  j["mu_gamma"] = rep.mu_gamma;
  j["upper"] = rep.upper;
  j["constructed_count"] = rep.constructed_count;
  j["rejection_limit"] = rep.rejection_limit;
  nlohmann::json centers = nlohmann::json::array();
  for (const Eigen::VectorXd& c : rep.centers) centers.push_back(to_vec(c));
  j["centers"] = centers;
  return j;
}

nlohmann::json linearized_bound_json(const LinearizedBound& b) {
  nlohmann::json j;
  j["lower"] = b.lower;
  j["upper"] = b.upper;
  j["mu_gamma"] = b.mu_gamma;
  j["effective_rank_scaled"] = b.effective_rank_scaled;
  return j;
}

nlohmann::json cover_equivalence_json(const CoverEquivalenceReport& rep) {
  nlohmann::json j;
  j["cover"] = cover_report_json(rep.cover);
  nlohmann::json centers = nlohmann::json::array();
  for (const Eigen::VectorXd& c : rep.theta_centers)
    centers.push_back(to_vec(c));
  j["theta_centers"] = centers;
  j["samples"] = rep.samples;
  j["violations"] = rep.violations;
  return j;
}

std::string spectrum_svg(const std::vector<SpectrumEntry>& entries,
                         const PlotOptions& opt) {
  if (entries.empty()) throw validation_error("spectrum_svg: empty report");
  Series s;
  s.color = kPalette[0];
  for (const SpectrumEntry& e : entries) {
    s.x.push_back(static_cast<double>(e.k));
    s.y.push_back(std::max(e.ratio, opt.log_floor));
  }
  PlotOptions local = opt;
  if (local.title.empty()) local.title = "normalized kernel spectrum";
  return render_log_plot({s}, local, "k", "lambda_k / lambda_1");
}

std::string projection_decay_svg(const Trajectory& traj,
                                 const Eigen::VectorXd& rates,
                                 const PlotOptions& opt) {
  if (traj.projections.empty())
    throw validation_error("projection_decay_svg: no tracked projections");
  if (traj.projections.size() != traj.times.size())
    throw validation_error(
        "projection_decay_svg: projection rows do not match times");
  const Eigen::Index k = traj.projections[0].size();
  if (rates.size() != 0 && rates.size() != k)
    throw validation_error(
        "projection_decay_svg: need one rate per tracked coefficient");

  std::vector<Series> series;
  for (Eigen::Index i = 0; i < k; ++i) {
    Series s;
    s.label = "|c_" + std::to_string(i + 1) + "|";
    s.color = kPalette[static_cast<std::size_t>(i) % 6];
    for (std::size_t row = 0; row < traj.times.size(); ++row) {
      if (traj.projections[row].size() != k)
        throw validation_error("projection_decay_svg: ragged projections");
      s.x.push_back(traj.times[row]);
      s.y.push_back(std::max(std::abs(traj.projections[row][i]),
                             opt.log_floor));
    }
    series.push_back(std::move(s));
  }
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    Series s;
    s.color = kPalette[static_cast<std::size_t>(i) % 6];
    s.dashed = true;
    if (i == 0) s.label = "exp(-sigma_i t) reference";
    const double c0 = std::max(std::abs(traj.projections[0][i]),
                               opt.log_floor);
    for (double t : traj.times) {
      s.x.push_back(t);
      s.y.push_back(std::max(c0 * std::exp(-rates[i] * t), opt.log_floor));
    }
    series.push_back(std::move(s));
  }
  PlotOptions local = opt;
  if (local.title.empty()) local.title = "projection decay";
  return render_log_plot(series, local, "t", "|<r_t, phi_i>|");
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(),
            static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ntklab
