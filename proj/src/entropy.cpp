#include "ntklab/entropy.hpp"

#include <cmath>
#include <limits>

#include "ntklab/errors.hpp"
#include "ntklab/spectral.hpp"

namespace ntklab {

namespace {

constexpr int kRejectionLimit = 10000;

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 0.5))
    throw validation_error("gamma must lie in (0, 1/2)");
}

// Uniform point in the ellipsoid with the given axes (all positive), by
// rejection from the bounding box.
Eigen::VectorXd sample_ellipsoid(const Eigen::VectorXd& axes, Rng& rng) {
  const auto k = axes.size();
  Eigen::VectorXd v(k);
  for (;;) {
    double q = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      v[i] = (2.0 * rng.uniform() - 1.0) * axes[i];
      q += v[i] * v[i] / (axes[i] * axes[i]);
    }
    if (q <= 1.0) return v;
  }
}

}  // namespace

void Ellipsoid::validate() const {
  if (half_axes.size() < 1)
    throw validation_error("ellipsoid: dimension must be at least 1");
  if (!half_axes.allFinite() || half_axes.minCoeff() < 0.0)
    throw validation_error("ellipsoid: half-axes must be finite and "
                           "nonnegative");
}

int effective_rank(const Eigen::VectorXd& eigenvalues, double eps) {
  int count = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    if (eigenvalues[i] > eps) ++count;
  return count;
}

CoverReport ellipsoid_cover_bounds(const Ellipsoid& e, double gamma) {
  e.validate();
  check_gamma(gamma);
  CoverReport rep;
  rep.gamma = gamma;
  for (Eigen::Index i = 0; i < e.half_axes.size(); ++i) {
    const double a = e.half_axes[i];
    if (a > 1.0) rep.k_lower += std::log(a);
    if (a > 1.0 - gamma) ++rep.mu_gamma;
  }
  rep.upper = rep.k_lower + rep.mu_gamma * std::log(3.0 / gamma);
  return rep;
}

CoverReport construct_cover(const Ellipsoid& e, double gamma, Rng& rng) {
  e.validate();
  check_gamma(gamma);
  if (e.dim() > 3)
    throw validation_error("construct_cover: brute-force regime is limited "
                           "to dimension 3");
  CoverReport rep = ellipsoid_cover_bounds(e, gamma);
  rep.rejection_limit = kRejectionLimit;

  // Project onto the long axes; everything dropped has extent at most
  // 1 - gamma, so a gamma-cover of the projection is a unit cover of e.
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < e.half_axes.size(); ++i)
    if (e.half_axes[i] > 1.0 - gamma) kept.push_back(i);

  const int p = e.dim();
  if (kept.empty()) {
    rep.centers.push_back(Eigen::VectorXd::Zero(p));
    rep.constructed_count = 1;
    return rep;
  }

  Eigen::VectorXd axes(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i)
    axes[static_cast<Eigen::Index>(i)] = e.half_axes[kept[i]];

  std::vector<Eigen::VectorXd> packing;
  packing.push_back(Eigen::VectorXd::Zero(axes.size()));
  int rejections = 0;
  while (rejections < kRejectionLimit) {
    const Eigen::VectorXd candidate = sample_ellipsoid(axes, rng);
    bool separated = true;
    for (const Eigen::VectorXd& c : packing) {
      if ((candidate - c).norm() <= gamma) {
        separated = false;
        break;
      }
    }
    if (separated) {
      packing.push_back(candidate);
      rejections = 0;
    } else {
      ++rejections;
    }
  }

  for (const Eigen::VectorXd& c : packing) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i < kept.size(); ++i)
      full[kept[i]] = c[static_cast<Eigen::Index>(i)];
    rep.centers.push_back(std::move(full));
  }
  rep.constructed_count = static_cast<int>(rep.centers.size());
  return rep;
}

int cover_audit(const Ellipsoid& e,
                const std::vector<Eigen::VectorXd>& centers, int samples,
                Rng& rng) {
  e.validate();
  if (centers.empty())
    throw validation_error("cover_audit: need at least one center");
  if (samples < 1)
    throw validation_error("cover_audit: need at least one sample");
  for (const Eigen::VectorXd& c : centers)
    if (c.size() != e.half_axes.size())
      throw validation_error("cover_audit: center dimension mismatch");

  // Degenerate axes are measure-zero slices; sampling treats them as fixed
  // zero coordinates.
  Eigen::VectorXd axes = e.half_axes;
  std::vector<Eigen::Index> flat;
  for (Eigen::Index i = 0; i < axes.size(); ++i)
    if (axes[i] == 0.0) flat.push_back(i);

  int violations = 0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd v(axes.size());
    for (;;) {
      double q = 0.0;
      for (Eigen::Index i = 0; i < axes.size(); ++i) {
        if (axes[i] == 0.0) {
          v[i] = 0.0;
          continue;
        }
        v[i] = (2.0 * rng.uniform() - 1.0) * axes[i];
        q += v[i] * v[i] / (axes[i] * axes[i]);
      }
      if (q <= 1.0) break;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& c : centers)
      best = std::min(best, (v - c).norm());
    if (best > 1.0) ++violations;
  }
  return violations;
}

FisherMatrix fim(const NetworkSpec& spec, const Eigen::VectorXd& params0,
                 const Eigen::MatrixXd& X) {
  spec.validate();
  if (X.rows() < 1) throw validation_error("fim: empty sample");
  if (X.cols() != spec.input_dim)
    throw validation_error("fim: sample dimension mismatch");
  const auto n = X.rows();
  const Eigen::Index p = param_layout(spec).total;
  FisherMatrix fm;
  fm.factor.resize(n, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    fm.factor.row(i) =
        scale * grad(spec, params0, X.row(i).transpose()).transpose();
  if (p <= 2000)
    fm.explicit_matrix = fm.factor.transpose() * fm.factor;
  return fm;
}

Eigen::VectorXd fim_nonzero_eigenvalues(const FisherMatrix& fm) {
  if (fm.factor.size() == 0)
    throw validation_error("fim_nonzero_eigenvalues: empty factor");
  const Eigen::MatrixXd gram_side = fm.factor * fm.factor.transpose();
  Eigen::VectorXd eigs = eigh(gram_side).eigenvalues;
  for (Eigen::Index i = 0; i < eigs.size(); ++i)
    eigs[i] = std::max(eigs[i], 0.0);
  return eigs;
}

LinearizedBound linearized_covering_bound(const Eigen::VectorXd& fim_eigs,
                                          double R, double eps, double gamma) {
  if (!(R >= 1.0))
    throw validation_error("linearized_covering_bound: R must be at least 1");
  if (!(eps > 0.0))
    throw validation_error("linearized_covering_bound: eps must be positive");
  check_gamma(gamma);
  LinearizedBound b;
  const double rank_scale = 3.0 * eps / (4.0 * R);
  for (Eigen::Index i = 0; i < fim_eigs.size(); ++i) {
    const double lambda = std::max(fim_eigs[i], 0.0);
    const double s = std::sqrt(lambda);
    const double scaled = R / eps * s;
    if (scaled > 1.0) b.lower += std::log(scaled);
    if (scaled > 1.0 - gamma) ++b.mu_gamma;
    if (s > rank_scale) ++b.effective_rank_scaled;
  }
  b.upper = b.lower + b.mu_gamma * std::log(3.0 / gamma);
  return b;
}

CoverEquivalenceReport cover_equivalence_check(const Eigen::MatrixXd& m,
                                               double R, double eps,
                                               double gamma, Rng& rng,
                                               int audit_samples) {
  if (m.rows() > 3)
    throw validation_error("cover_equivalence_check: p must be at most 3");
  if (!(R >= 1.0) || !(eps > 0.0))
    throw validation_error("cover_equivalence_check: need R >= 1 and "
                           "eps > 0");
  check_gamma(gamma);
  const EigenSystem es = eigh(m);
  const Eigen::Index p = m.rows();
  const double floor = 1e-12 * std::max(1.0, es.eigenvalues[0]);

  Eigen::VectorXd sigma(p);
  for (Eigen::Index i = 0; i < p; ++i)
    sigma[i] = es.eigenvalues[i] > floor ? std::sqrt(es.eigenvalues[i]) : 0.0;

  Ellipsoid e;
  e.half_axes = (R / eps) * sigma;
  CoverEquivalenceReport rep;
  if (e.half_axes.maxCoeff() <= 1.0) {
    // The ellipsoid already fits in the unit ball, so the origin covers it
    // without running the packing.
    rep.cover = ellipsoid_cover_bounds(e, gamma);
    rep.cover.centers.push_back(Eigen::VectorXd::Zero(p));
    rep.cover.constructed_count = 1;
  } else {
    rep.cover = construct_cover(e, gamma, rng);
  }

  // Map each center v back to parameter space through the pseudo-inverse of
  // M^(1/2): theta = eps * V * diag(1/sigma) * v on the nonzero eigenspace.
  for (const Eigen::VectorXd& v : rep.cover.centers) {
    Eigen::VectorXd scaled = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i)
      if (sigma[i] > 0.0) scaled[i] = eps * v[i] / sigma[i];
    rep.theta_centers.push_back(es.eigenvectors * scaled);
  }

  rep.samples = audit_samples;
  const Eigen::MatrixXd msym = 0.5 * (m + m.transpose());
  for (int s = 0; s < audit_samples; ++s) {
    Eigen::VectorXd theta(p);
    for (;;) {
      for (Eigen::Index i = 0; i < p; ++i)
        theta[i] = (2.0 * rng.uniform() - 1.0) * R;
      if (theta.norm() <= R) break;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& c : rep.theta_centers) {
      const Eigen::VectorXd d = theta - c;
      best = std::min(best, std::sqrt(std::max(0.0, d.dot(msym * d))));
    }
    if (best > eps * (1.0 + 1e-9)) ++rep.violations;
  }
  return rep;
}

}  // namespace ntklab
