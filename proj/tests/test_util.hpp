#pragma once

#include <Eigen/Core>
#include <cmath>

#include "ntklab/network.hpp"

namespace testutil {

// Central finite differences of the scalar output, one coordinate at a time.
inline Eigen::VectorXd fd_grad(const ntklab::NetworkSpec& spec,
                               const Eigen::VectorXd& params,
                               const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(params.size());
  Eigen::VectorXd p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double fp = ntklab::forward(spec, p, x);
    p[i] = saved - h;
    const double fm = ntklab::forward(spec, p, x);
    p[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Central finite differences of the gradient along one direction.
inline Eigen::VectorXd fd_hvp(const ntklab::NetworkSpec& spec,
                              const Eigen::VectorXd& params,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& dir, double h) {
  const Eigen::VectorXd gp = ntklab::grad(spec, params + h * dir, x);
  const Eigen::VectorXd gm = ntklab::grad(spec, params - h * dir, x);
  return (gp - gm) / (2.0 * h);
}

inline double rel_inf_error(const Eigen::VectorXd& got,
                            const Eigen::VectorXd& want) {
  const double scale = want.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return got.lpNorm<Eigen::Infinity>();
  return (got - want).lpNorm<Eigen::Infinity>() / scale;
}

inline Eigen::VectorXd random_unit(Eigen::Index n, ntklab::Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v / v.norm();
}

}  // namespace testutil
