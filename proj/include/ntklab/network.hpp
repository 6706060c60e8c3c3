#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ntklab/activation.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class LayerKind { FullyConnected, Convolutional, Residual };

struct LayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  int width = 0;        // output units (fc/residual) or channels (conv)
  int filter_size = 0;  // conv only; odd
  int pixels = 0;       // conv only; pixel count per channel

  static LayerSpec fc(int width) { return {LayerKind::FullyConnected, width, 0, 0}; }
  static LayerSpec conv(int filter_size, int channels, int pixels) {
    return {LayerKind::Convolutional, channels, filter_size, pixels};
  }
  static LayerSpec residual(int width) { return {LayerKind::Residual, width, 0, 0}; }
};

// Architecture description.  Activations flow as (channels x pixels)
// matrices stored row-major, so flattening keeps each channel contiguous;
// fully connected layers read the flattened state.  Layer scalings follow
// the NTK parameterization: the first layer contracts the raw input, every
// later layer divides by the square root of the width it contracts, and
// the output head contracts the flattened last state with a 1/sqrt(len)
// factor.  With `asi` set, the parameter vector holds two copies of the
// base network and the output is (f(x; theta) - f(x; theta')) / sqrt(2);
// initialization duplicates one draw into both halves, which makes the
// initial output exactly zero without changing the tangent kernel.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Activation activation = Activation::Softplus;
  int input_dim = 0;
  bool asi = false;

  // Throws validation_error on malformed architectures.
  void validate() const;

  // Short human-readable identifier used in artifact metadata.
  std::string tag() const;
};

// Shape of the activation after each layer; entry 0 is the input itself.
struct StateShape {
  int channels = 0;
  int pixels = 1;
  int flat() const { return channels * pixels; }
};
std::vector<StateShape> state_shapes(const NetworkSpec& spec);

// Placement of each weight block inside the flat parameter vector.  For a
// convolutional layer the block is a (taps x rows x cols) tensor stored
// tap-major; otherwise a (rows x cols) matrix stored row-major.
struct ParamSlice {
  LayerKind kind = LayerKind::FullyConnected;
  std::ptrdiff_t offset = 0;
  int taps = 1;
  int rows = 0;
  int cols = 0;
  std::ptrdiff_t size() const {
    return static_cast<std::ptrdiff_t>(taps) * rows * cols;
  }
};

struct ParamLayout {
  std::vector<ParamSlice> weights;  // one per layer, in network order
  std::ptrdiff_t head_offset = 0;   // output vector v
  int head_size = 0;
  std::ptrdiff_t half = 0;   // parameters per copy of the base network
  std::ptrdiff_t total = 0;  // half, or 2 * half under ASI
  bool asi = false;
};

ParamLayout param_layout(const NetworkSpec& spec);

// Order-3 convolution filter, indexed (tap, out channel, in channel).
struct ConvFilter {
  int taps = 0;
  int out_channels = 0;
  int in_channels = 0;
  Eigen::VectorXd w;

  ConvFilter() = default;
  ConvFilter(int k, int out, int in)
      : taps(k), out_channels(out), in_channels(in),
        w(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k) * out * in)) {}

  double& at(int k, int i, int j) {
    return w[(static_cast<Eigen::Index>(k) * out_channels + i) * in_channels + j];
  }
  double at(int k, int i, int j) const {
    return w[(static_cast<Eigen::Index>(k) * out_channels + i) * in_channels + j];
  }
};

// Zero-padded same-size convolution: out(i, q) = sum_{k, j} W(k, i, j) *
// alpha(j, q + k - (K-1)/2), with out-of-range pixels read as zero.
RowMat conv_apply(const ConvFilter& filter, const RowMat& alpha);

// Gaussian initialization; every coordinate is a standard normal drawn in
// layout order (weights layer by layer, then the head).  Under ASI the
// single draw is duplicated into both halves.
Eigen::VectorXd init_params(const NetworkSpec& spec, Rng& rng);

// Scalar network output.
double forward(const NetworkSpec& spec, const Eigen::VectorXd& params,
               const Eigen::VectorXd& x);

// Gradient of the output in a factored form: fully connected blocks are
// kept as their backprop rank-1 pair, so a dot product of two gradients
// costs O(sum of layer widths) instead of O(parameter count).
struct GradFeatures {
  struct Part {
    bool rank1 = false;
    Eigen::VectorXd dense;     // conv blocks and the output head
    Eigen::VectorXd out, in;   // fc/residual blocks: block = out * in^T
  };
  std::vector<Part> parts;  // slice order of param_layout, halves in sequence
};

GradFeatures grad_features(const NetworkSpec& spec,
                           const Eigen::VectorXd& params,
                           const Eigen::VectorXd& x);

// <grad_a, grad_b>; both must come from the same NetworkSpec.
double feature_dot(const GradFeatures& a, const GradFeatures& b);

// Expands features into the flat layout.
Eigen::VectorXd flatten_features(const NetworkSpec& spec,
                                 const GradFeatures& f);

// Flat gradient of forward() with respect to params.
Eigen::VectorXd grad(const NetworkSpec& spec, const Eigen::VectorXd& params,
                     const Eigen::VectorXd& x);

// buffer += coeff * grad(spec, params, x), without materializing features.
void accumulate_grad(const NetworkSpec& spec, const Eigen::VectorXd& params,
                     const Eigen::VectorXd& x, double coeff,
                     Eigen::VectorXd& buffer);

// Hessian-vector product of the scalar output, computed analytically by
// pushing a tangent through the forward and reverse sweeps.
struct HvpResult {
  Eigen::VectorXd value;
  std::string method = "forward-over-reverse";
};

HvpResult hvp(const NetworkSpec& spec, const Eigen::VectorXd& params,
              const Eigen::VectorXd& x, const Eigen::VectorXd& direction);

// Largest singular value of a symmetric operator given only through its
// matrix-vector product, via power iteration on the squared operator.
struct OpnormEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

template <typename MatVec>
OpnormEstimate opnorm_via_power(const MatVec& apply, Eigen::Index dim,
                                int max_iterations, double tol, Rng& rng) {
  Eigen::VectorXd u(dim);
  for (Eigen::Index i = 0; i < dim; ++i) u[i] = rng.normal();
  double norm = u.norm();
  if (norm == 0.0) return {0.0, true, 0};
  u /= norm;
  OpnormEstimate est;
  double prev = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd w = apply(apply(u));  // symmetric: H^2 has eigenvalue |H|^2
    const double lambda = u.dot(w);
    est.iterations = it;
    const double wn = w.norm();
    if (wn == 0.0) return {0.0, true, it};
    u = w / wn;
    if (it > 1 && std::abs(lambda - prev) <= tol * std::max(std::abs(lambda), 1e-300)) {
      est.value = std::sqrt(std::max(lambda, 0.0));
      est.converged = true;
      return est;
    }
    prev = lambda;
  }
  est.value = std::sqrt(std::max(prev, 0.0));
  est.converged = false;
  return est;
}

// Operator norm of the Hessian of the scalar output at (params, x).
OpnormEstimate hessian_opnorm_estimate(const NetworkSpec& spec,
                                       const Eigen::VectorXd& params,
                                       const Eigen::VectorXd& x,
                                       int max_iterations, Rng& rng);

}  // namespace ntklab
