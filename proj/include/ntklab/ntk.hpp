#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ntklab/network.hpp"

namespace ntklab {

// Draws one input point; kernels are compared in L2 over this measure.
using Sampler = std::function<Eigen::VectorXd(Rng&)>;

// Symmetric positive semidefinite kernel over inputs.  Implementations may
// cache per-point work inside cross()/gram_values(); the scalar call is the
// reference semantics.
class Kernel {
 public:
  virtual ~Kernel() = default;

  virtual double operator()(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y) const = 0;

  // Matrix of K(a_i, b_j) for row-point matrices A, B.
  virtual Eigen::MatrixXd cross(const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B) const;

  // Gram over one sample; only the upper triangle is computed, then
  // mirrored, so symmetry holds exactly.
  virtual Eigen::MatrixXd gram_values(const Eigen::MatrixXd& X) const;

  virtual std::string tag() const = 0;
};

// Empirical tangent kernel K's value at fixed parameters,
// <grad f(x), grad f(y)>, evaluated through the factored gradient features.
class NtkKernel : public Kernel {
 public:
  NtkKernel(NetworkSpec spec, Eigen::VectorXd params);

  double operator()(const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y) const override;
  Eigen::MatrixXd cross(const Eigen::MatrixXd& A,
                        const Eigen::MatrixXd& B) const override;
  Eigen::MatrixXd gram_values(const Eigen::MatrixXd& X) const override;
  std::string tag() const override;

  const NetworkSpec& spec() const { return spec_; }
  const Eigen::VectorXd& params() const { return params_; }

 private:
  NetworkSpec spec_;
  Eigen::VectorXd params_;
};

// Monte Carlo estimate of the infinite-ensemble tangent kernel
// E_theta <grad f(x), grad f(y)>: the empirical kernel averaged over
// n_init fresh Gaussian initializations.  Initialization r always uses
// child stream r of the root seed, so every entry of every matrix is
// averaged over the same parameter draws and values are reproducible.
class McNtkKernel : public Kernel {
 public:
  McNtkKernel(NetworkSpec spec, int n_init, std::uint64_t root_seed);

  double operator()(const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y) const override;
  Eigen::MatrixXd cross(const Eigen::MatrixXd& A,
                        const Eigen::MatrixXd& B) const override;
  Eigen::MatrixXd gram_values(const Eigen::MatrixXd& X) const override;
  std::string tag() const override;

  int n_init() const { return n_init_; }

 private:
  NetworkSpec spec_;
  int n_init_ = 0;
  Rng root_;
};

// Pointwise kernel value at fixed parameters.
double ntk_value(const NetworkSpec& spec, const Eigen::VectorXd& params,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct GramMatrix {
  Eigen::MatrixXd values;
  std::vector<std::int64_t> point_ids;
  std::string kernel_tag;

  Eigen::Index size() const { return values.rows(); }
};

// Gram of a kernel over a sample (rows of X), ids defaulting to 0..n-1.
GramMatrix gram(const Kernel& kernel, const Eigen::MatrixXd& X);
GramMatrix gram(const NetworkSpec& spec, const Eigen::VectorXd& params,
                const Eigen::MatrixXd& X);

// Monte Carlo scalar estimate with its standard error.
struct KernelEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  int n_init = 0;
};

// Mean and stderr of <grad f(x), grad f(y)> over n_init fresh inits drawn
// from child streams of `rng`'s seed.
KernelEstimate analytic_ntk_mc(const NetworkSpec& spec,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y, int n_init,
                               const Rng& rng);

// Monte Carlo estimate of the squared L2(rho x rho) distance between two
// kernels, via n_pairs independent input pairs.  Identical kernel values
// give exactly zero.
struct DistanceEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  int n_pairs = 0;
};

DistanceEstimate kernel_l2_distance(const Kernel& k1, const Kernel& k2,
                                    const Sampler& sampler, int n_pairs,
                                    Rng& rng);

// Binary Gram container: magic "NTKGRAM1", then little-endian u64 n,
// u64 tag length, tag bytes, n i64 point ids, and the row-major float64
// upper triangle (diagonal included).  load reports malformed input via
// parse_error with the failing byte offset.
void save_gram_binary(const std::string& path, const GramMatrix& gm);
GramMatrix load_gram_binary(const std::string& path);

// CSV twin: header "i,j,value", upper triangle in row-major order.
void save_gram_csv(const std::string& path, const GramMatrix& gm);

}  // namespace ntklab
