#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ntklab {

// Activations are carried as a closed (value, first, second derivative)
// triple; the Hessian-vector product needs all three.
enum class Activation { Softplus, Tanh, Sigmoid, Linear };

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "softplus") return Activation::Softplus;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace detail {
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace detail

inline double act_value(Activation a, double x) {
  switch (a) {
    case Activation::Softplus:
      // log(1 + e^x), evaluated on the branch that never overflows.
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return detail::sigmoid(x);
    case Activation::Linear: return x;
  }
  return 0.0;
}

inline double act_deriv(Activation a, double x) {
  switch (a) {
    case Activation::Softplus: return detail::sigmoid(x);
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Sigmoid: {
      const double s = detail::sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Linear: return 1.0;
  }
  return 0.0;
}

inline double act_second(Activation a, double x) {
  switch (a) {
    case Activation::Softplus: {
      const double s = detail::sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Sigmoid: {
      const double s = detail::sigmoid(x);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Activation::Linear: return 0.0;
  }
  return 0.0;
}

}  // namespace ntklab
