#include "ntklab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  double off2 = 0.0;
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) off2 += 2.0 * a(p, q) * a(p, q);
  return std::sqrt(off2);
}

void fix_signs(Eigen::MatrixXd& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (v(i, j) == 0.0) continue;
      if (v(i, j) < 0.0) v.col(j) = -v.col(j);
      break;
    }
  }
}

}  // namespace

EigenSystem eigh(const Eigen::MatrixXd& a, const std::string& source_tag) {
  if (a.rows() != a.cols())
    throw validation_error("eigh: matrix must be square");
  const int n = static_cast<int>(a.rows());
  if (n == 0) throw validation_error("eigh: matrix must be nonempty");
  if (!a.allFinite())
    throw validation_error("eigh: matrix has nonfinite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    std::ostringstream msg;
    msg << "eigh: input asymmetric, max |A - A^T| = " << asym
        << " exceeds 1e-10 relative";
    throw validation_error(msg.str());
  }

  Eigen::MatrixXd w = 0.5 * (a + a.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double frob = w.norm();
  const double threshold = 1e-12 * frob;

  constexpr int kMaxSweeps = 100;
  int sweeps = 0;
  double off = off_diagonal_norm(w);
  while (off > threshold && frob > 0.0) {
    if (sweeps == kMaxSweeps) {
      std::ostringstream msg;
      msg << "eigh: Jacobi sweeps did not converge after " << kMaxSweeps
          << " sweeps, off-diagonal mass " << off << " vs threshold "
          << threshold;
      throw std::runtime_error(msg.str());
    }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = w(p, q);
        if (apq == 0.0) continue;
        const double tau = (w(q, q) - w(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(tau * tau + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double app = w(p, p);
        const double aqq = w(q, q);
        for (int i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = w(i, p);
          const double aiq = w(i, q);
          w(i, p) = w(p, i) = c * aip - s * aiq;
          w(i, q) = w(q, i) = s * aip + c * aiq;
        }
        w(p, p) = app - t * apq;
        w(q, q) = aqq + t * apq;
        w(p, q) = w(q, p) = 0.0;
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    ++sweeps;
    off = off_diagonal_norm(w);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&w](int i, int j) { return w(i, i) > w(j, j); });

  EigenSystem es;
  es.eigenvalues.resize(n);
  es.eigenvectors.resize(n, n);
  for (int j = 0; j < n; ++j) {
    es.eigenvalues[j] = w(order[static_cast<std::size_t>(j)],
                          order[static_cast<std::size_t>(j)]);
    es.eigenvectors.col(j) = v.col(order[static_cast<std::size_t>(j)]);
  }
  fix_signs(es.eigenvectors);
  es.source_tag = source_tag.empty() ? "matrix" : source_tag;
  es.scale_tag = "G";
  return es;
}

EigenSystem eigh(const GramMatrix& gm, GramScale scale) {
  if (gm.size() == 0) throw validation_error("eigh: empty Gram matrix");
  EigenSystem es;
  if (scale == GramScale::OverN) {
    es = eigh((gm.values / static_cast<double>(gm.size())).eval(),
              gm.kernel_tag);
    es.scale_tag = "G/n";
  } else {
    es = eigh(gm.values, gm.kernel_tag);
    es.scale_tag = "G";
  }
  return es;
}

std::vector<EigenFunction> nystrom_functions(
    const EigenSystem& es, std::shared_ptr<const Kernel> kernel,
    std::shared_ptr<const Eigen::MatrixXd> sample, int count) {
  if (!kernel || !sample)
    throw validation_error("nystrom_functions: kernel and sample required");
  if (es.scale_tag != "G/n")
    throw validation_error(
        "nystrom_functions: eigensystem must be of G/n, got scale '" +
        es.scale_tag + "'");
  if (sample->rows() != es.eigenvectors.rows())
    throw validation_error(
        "nystrom_functions: sample size does not match eigensystem");
  if (count < 1 || count > es.size())
    throw validation_error("nystrom_functions: count out of range");
  const double sigma1 = es.eigenvalues[0];
  std::vector<EigenFunction> phis;
  phis.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double sigma = es.eigenvalues[i];
    if (!(sigma > 1e-10 * sigma1)) {
      std::ostringstream msg;
      msg << "nystrom_functions: eigenvalue " << i << " = " << sigma
          << " below tolerance " << 1e-10 * sigma1
          << "; the extension is ill-posed";
      throw validation_error(msg.str());
    }
    EigenFunction phi;
    phi.coefficients = es.eigenvectors.col(i);
    phi.eigenvalue = sigma;
    phi.sample = sample;
    phi.kernel = kernel;
    phis.push_back(std::move(phi));
  }
  return phis;
}

double nystrom_eval(const EigenFunction& phi, const Eigen::VectorXd& x) {
  if (!phi.sample || !phi.kernel)
    throw validation_error("nystrom_eval: eigenfunction missing references");
  const Eigen::MatrixXd& xs = *phi.sample;
  const auto n = xs.rows();
  if (!(phi.eigenvalue > 0.0))
    throw validation_error("nystrom_eval: nonpositive eigenvalue");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    acc += (*phi.kernel)(x, xs.row(j).transpose()) * phi.coefficients[j];
  return acc / (std::sqrt(static_cast<double>(n)) * phi.eigenvalue);
}

Eigen::MatrixXd nystrom_eval_many(const std::vector<EigenFunction>& phis,
                                  const Eigen::MatrixXd& X) {
  if (phis.empty())
    throw validation_error("nystrom_eval_many: no eigenfunctions");
  for (const EigenFunction& phi : phis) {
    if (phi.sample != phis.front().sample || phi.kernel != phis.front().kernel)
      throw validation_error(
          "nystrom_eval_many: eigenfunctions must share sample and kernel");
  }
  const Eigen::MatrixXd& xs = *phis.front().sample;
  const Eigen::MatrixXd cross = phis.front().kernel->cross(X, xs);
  const double root_n = std::sqrt(static_cast<double>(xs.rows()));
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(phis.size()));
  for (std::size_t i = 0; i < phis.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) =
        cross * phis[i].coefficients / (root_n * phis[i].eigenvalue);
  return out;
}

std::vector<SpectrumEntry> spectrum_report(const EigenSystem& es, int k_max) {
  if (k_max < 1 || k_max > es.size())
    throw validation_error("spectrum_report: k_max out of range");
  const double lambda1 = es.eigenvalues[0];
  if (lambda1 == 0.0)
    throw validation_error("spectrum_report: zero leading eigenvalue");
  std::vector<SpectrumEntry> entries;
  entries.reserve(static_cast<std::size_t>(k_max));
  for (int k = 0; k < k_max; ++k)
    entries.push_back({k + 1, es.eigenvalues[k], es.eigenvalues[k] / lambda1});
  return entries;
}

std::vector<SpectrumEntry> spectrum_report(const EigenSystem& es) {
  return spectrum_report(es, std::max(1, es.size() / 2));
}

}  // namespace ntklab
