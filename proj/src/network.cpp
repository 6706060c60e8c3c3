#include "ntklab/network.hpp"

#include <cmath>
#include <sstream>

namespace ntklab {

namespace {

constexpr double kHalfInv = 0.70710678118654752440;  // 1/sqrt(2)

RowMat apply_act(Activation a, const RowMat& z) {
  RowMat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    out.data()[i] = act_value(a, z.data()[i]);
  return out;
}

Eigen::Map<const Eigen::VectorXd> flat_view(const RowMat& m) {
  return {m.data(), m.size()};
}

// out(i, q) += sum_{k, j} w(k, i, j) a(j, q + k - (K-1)/2), built from one
// shifted matrix product per tap.
void conv_forward_into(const double* w, int taps, int out_c, int in_c,
                       const RowMat& a, RowMat& z) {
  const int q_count = static_cast<int>(a.cols());
  const int off = (taps - 1) / 2;
  for (int k = 0; k < taps; ++k) {
    const int shift = k - off;
    const int qlo = std::max(0, -shift);
    const int len = q_count - std::abs(shift);
    if (len <= 0) continue;
    Eigen::Map<const RowMat> wk(w + static_cast<std::ptrdiff_t>(k) * out_c * in_c,
                                out_c, in_c);
    z.block(0, qlo, out_c, len).noalias() += wk * a.block(0, qlo + shift, in_c, len);
  }
}

// Adjoint with respect to the input: ga(j, p) += sum_{k, i} w(k, i, j)
// gz(i, p - k + (K-1)/2).
void conv_adjoint_input_into(const double* w, int taps, int out_c, int in_c,
                             const RowMat& gz, RowMat& ga) {
  const int q_count = static_cast<int>(gz.cols());
  const int off = (taps - 1) / 2;
  for (int k = 0; k < taps; ++k) {
    const int shift = k - off;
    const int plo = std::max(0, shift);
    const int len = q_count - std::abs(shift);
    if (len <= 0) continue;
    Eigen::Map<const RowMat> wk(w + static_cast<std::ptrdiff_t>(k) * out_c * in_c,
                                out_c, in_c);
    ga.block(0, plo, in_c, len).noalias() +=
        wk.transpose() * gz.block(0, plo - shift, out_c, len);
  }
}

// gw(k, i, j) += s * sum_q gz(i, q) a(j, q + k - (K-1)/2).
void conv_filter_grad_into(const RowMat& gz, const RowMat& a, int taps,
                           double s, double* gw) {
  const int out_c = static_cast<int>(gz.rows());
  const int in_c = static_cast<int>(a.rows());
  const int q_count = static_cast<int>(gz.cols());
  const int off = (taps - 1) / 2;
  for (int k = 0; k < taps; ++k) {
    const int shift = k - off;
    const int qlo = std::max(0, -shift);
    const int len = q_count - std::abs(shift);
    Eigen::Map<RowMat> gk(gw + static_cast<std::ptrdiff_t>(k) * out_c * in_c,
                          out_c, in_c);
    if (len <= 0) {
      gk.setZero();
      continue;
    }
    gk.noalias() = s * (gz.block(0, qlo, out_c, len) *
                        a.block(0, qlo + shift, in_c, len).transpose());
  }
}

double layer_scale(const NetworkSpec& spec,
                   const std::vector<StateShape>& shapes, std::size_t l) {
  if (l == 0) return 1.0;
  const LayerSpec& ls = spec.layers[l];
  const int contracted = ls.kind == LayerKind::Convolutional
                             ? shapes[l].flat() / ls.pixels
                             : shapes[l].flat();
  return 1.0 / std::sqrt(static_cast<double>(contracted));
}

struct Trace {
  std::vector<RowMat> inputs;   // state entering each layer
  std::vector<RowMat> preacts;  // z of each layer
  RowMat final_state;
};

double run_forward_half(const NetworkSpec& spec,
                        const std::vector<StateShape>& shapes,
                        const ParamLayout& layout, const double* base,
                        const Eigen::VectorXd& x, Trace* trace) {
  RowMat state =
      Eigen::Map<const RowMat>(x.data(), shapes[0].channels, shapes[0].pixels);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const ParamSlice& sl = layout.weights[l];
    const double s = layer_scale(spec, shapes, l);
    RowMat z;
    if (ls.kind == LayerKind::Convolutional) {
      Eigen::Map<const RowMat> view(state.data(), sl.cols, ls.pixels);
      z = RowMat::Zero(sl.rows, ls.pixels);
      conv_forward_into(base + sl.offset, sl.taps, sl.rows, sl.cols, view, z);
      z *= s;
    } else {
      Eigen::Map<const RowMat> w(base + sl.offset, sl.rows, sl.cols);
      z = s * (w * flat_view(state));
    }
    if (trace) {
      trace->inputs.push_back(state);
      trace->preacts.push_back(z);
    }
    RowMat out = apply_act(spec.activation, z);
    if (ls.kind == LayerKind::Residual) out += flat_view(state);
    state = std::move(out);
  }
  Eigen::Map<const Eigen::VectorXd> head(base + layout.head_offset,
                                         layout.head_size);
  const double hs = 1.0 / std::sqrt(static_cast<double>(layout.head_size));
  if (trace) trace->final_state = state;
  return hs * head.dot(flat_view(state));
}

// Reverse sweep for one half; `coeff` folds the ASI factor into the seed so
// the emitted parts already represent coeff * grad f.
void run_backward_half(const NetworkSpec& spec,
                       const std::vector<StateShape>& shapes,
                       const ParamLayout& layout, const double* base,
                       const Trace& trace, double coeff,
                       std::vector<GradFeatures::Part>& parts) {
  const Activation act = spec.activation;
  const double hs = 1.0 / std::sqrt(static_cast<double>(layout.head_size));
  const std::size_t layer_count = spec.layers.size();
  std::vector<GradFeatures::Part> local(layer_count + 1);

  GradFeatures::Part& head_part = local[layer_count];
  head_part.rank1 = false;
  head_part.dense = (coeff * hs) * flat_view(trace.final_state);

  Eigen::Map<const Eigen::VectorXd> head(base + layout.head_offset,
                                         layout.head_size);
  Eigen::VectorXd g = (coeff * hs) * head;  // adjoint of the flat state

  for (std::size_t li = layer_count; li-- > 0;) {
    const LayerSpec& ls = spec.layers[li];
    const ParamSlice& sl = layout.weights[li];
    const double s = layer_scale(spec, shapes, li);
    const RowMat& z = trace.preacts[li];
    const RowMat& input = trace.inputs[li];
    GradFeatures::Part& part = local[li];

    if (ls.kind == LayerKind::Convolutional) {
      Eigen::Map<const RowMat> g_out(g.data(), sl.rows, ls.pixels);
      RowMat g_z(sl.rows, ls.pixels);
      for (Eigen::Index i = 0; i < z.size(); ++i)
        g_z.data()[i] = act_deriv(act, z.data()[i]) * g_out.data()[i];
      Eigen::Map<const RowMat> in_view(input.data(), sl.cols, ls.pixels);
      part.rank1 = false;
      part.dense.resize(sl.size());
      conv_filter_grad_into(g_z, in_view, sl.taps, s, part.dense.data());
      RowMat g_in = RowMat::Zero(sl.cols, ls.pixels);
      conv_adjoint_input_into(base + sl.offset, sl.taps, sl.rows, sl.cols, g_z,
                              g_in);
      g = s * flat_view(g_in);
    } else {
      Eigen::VectorXd g_z(sl.rows);
      for (int i = 0; i < sl.rows; ++i)
        g_z[i] = act_deriv(act, z.data()[i]) * g[i];
      part.rank1 = true;
      part.out = s * g_z;
      part.in = flat_view(input);
      Eigen::Map<const RowMat> w(base + sl.offset, sl.rows, sl.cols);
      Eigen::VectorXd g_in = s * (w.transpose() * g_z);
      if (ls.kind == LayerKind::Residual) g_in += g;
      g = std::move(g_in);
    }
  }
  for (auto& p : local) parts.push_back(std::move(p));
}

struct DualState {
  RowMat val, dot;
};

struct DualTrace {
  std::vector<RowMat> in_val, in_dot, z_val, z_dot;
  RowMat fin_val, fin_dot;
};

void run_forward_half_dual(const NetworkSpec& spec,
                           const std::vector<StateShape>& shapes,
                           const ParamLayout& layout, const double* base,
                           const double* dir, const Eigen::VectorXd& x,
                           DualTrace& trace) {
  DualState state;
  state.val =
      Eigen::Map<const RowMat>(x.data(), shapes[0].channels, shapes[0].pixels);
  state.dot = RowMat::Zero(shapes[0].channels, shapes[0].pixels);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const ParamSlice& sl = layout.weights[l];
    const double s = layer_scale(spec, shapes, l);
    RowMat z, dz;
    if (ls.kind == LayerKind::Convolutional) {
      Eigen::Map<const RowMat> a(state.val.data(), sl.cols, ls.pixels);
      Eigen::Map<const RowMat> da(state.dot.data(), sl.cols, ls.pixels);
      z = RowMat::Zero(sl.rows, ls.pixels);
      dz = RowMat::Zero(sl.rows, ls.pixels);
      conv_forward_into(base + sl.offset, sl.taps, sl.rows, sl.cols, a, z);
      conv_forward_into(dir + sl.offset, sl.taps, sl.rows, sl.cols, a, dz);
      conv_forward_into(base + sl.offset, sl.taps, sl.rows, sl.cols, da, dz);
      z *= s;
      dz *= s;
    } else {
      Eigen::Map<const RowMat> w(base + sl.offset, sl.rows, sl.cols);
      Eigen::Map<const RowMat> v(dir + sl.offset, sl.rows, sl.cols);
      z = s * (w * flat_view(state.val));
      dz = s * (v * flat_view(state.val) + w * flat_view(state.dot));
    }
    trace.in_val.push_back(state.val);
    trace.in_dot.push_back(state.dot);
    trace.z_val.push_back(z);
    trace.z_dot.push_back(dz);
    RowMat out(z.rows(), z.cols()), dout(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      out.data()[i] = act_value(spec.activation, z.data()[i]);
      dout.data()[i] = act_deriv(spec.activation, z.data()[i]) * dz.data()[i];
    }
    if (ls.kind == LayerKind::Residual) {
      out += flat_view(state.val);
      dout += flat_view(state.dot);
    }
    state.val = std::move(out);
    state.dot = std::move(dout);
  }
  trace.fin_val = state.val;
  trace.fin_dot = state.dot;
}

// Tangent of the reverse sweep; writes coeff * d/de [grad f](theta + e dir)
// into the buffer slices.
void run_backward_half_dual(const NetworkSpec& spec,
                            const std::vector<StateShape>& shapes,
                            const ParamLayout& layout, const double* base,
                            const double* dir, const DualTrace& trace,
                            double coeff, double* out_base) {
  const Activation act = spec.activation;
  const double hs = 1.0 / std::sqrt(static_cast<double>(layout.head_size));
  const std::size_t layer_count = spec.layers.size();

  Eigen::Map<Eigen::VectorXd> head_out(out_base + layout.head_offset,
                                       layout.head_size);
  head_out = (coeff * hs) * flat_view(trace.fin_dot);

  Eigen::Map<const Eigen::VectorXd> head(base + layout.head_offset,
                                         layout.head_size);
  Eigen::Map<const Eigen::VectorXd> dhead(dir + layout.head_offset,
                                          layout.head_size);
  Eigen::VectorXd g = (coeff * hs) * head;
  Eigen::VectorXd dg = (coeff * hs) * dhead;

  for (std::size_t li = layer_count; li-- > 0;) {
    const LayerSpec& ls = spec.layers[li];
    const ParamSlice& sl = layout.weights[li];
    const double s = layer_scale(spec, shapes, li);
    const RowMat& z = trace.z_val[li];
    const RowMat& dz = trace.z_dot[li];

    if (ls.kind == LayerKind::Convolutional) {
      Eigen::Map<const RowMat> g_out(g.data(), sl.rows, ls.pixels);
      Eigen::Map<const RowMat> dg_out(dg.data(), sl.rows, ls.pixels);
      RowMat g_z(sl.rows, ls.pixels), dg_z(sl.rows, ls.pixels);
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double d1 = act_deriv(act, z.data()[i]);
        const double d2 = act_second(act, z.data()[i]);
        g_z.data()[i] = d1 * g_out.data()[i];
        dg_z.data()[i] = d2 * dz.data()[i] * g_out.data()[i] + d1 * dg_out.data()[i];
      }
      Eigen::Map<const RowMat> a(trace.in_val[li].data(), sl.cols, ls.pixels);
      Eigen::Map<const RowMat> da(trace.in_dot[li].data(), sl.cols, ls.pixels);
      // The ASI coefficient already rides in g_z and dg_z via the seeds.
      Eigen::VectorXd block(sl.size());
      conv_filter_grad_into(dg_z, a, sl.taps, s, block.data());
      Eigen::VectorXd block2(sl.size());
      conv_filter_grad_into(g_z, da, sl.taps, s, block2.data());
      Eigen::Map<Eigen::VectorXd>(out_base + sl.offset, sl.size()) =
          block + block2;
      RowMat g_in = RowMat::Zero(sl.cols, ls.pixels);
      conv_adjoint_input_into(base + sl.offset, sl.taps, sl.rows, sl.cols, g_z,
                              g_in);
      RowMat dg_in = RowMat::Zero(sl.cols, ls.pixels);
      conv_adjoint_input_into(dir + sl.offset, sl.taps, sl.rows, sl.cols, g_z,
                              dg_in);
      conv_adjoint_input_into(base + sl.offset, sl.taps, sl.rows, sl.cols, dg_z,
                              dg_in);
      g = s * flat_view(g_in);
      dg = s * flat_view(dg_in);
    } else {
      Eigen::VectorXd g_z(sl.rows), dg_z(sl.rows);
      for (int i = 0; i < sl.rows; ++i) {
        const double d1 = act_deriv(act, z.data()[i]);
        const double d2 = act_second(act, z.data()[i]);
        g_z[i] = d1 * g[i];
        dg_z[i] = d2 * dz.data()[i] * g[i] + d1 * dg[i];
      }
      const auto& a = trace.in_val[li];
      const auto& da = trace.in_dot[li];
      Eigen::Map<RowMat> block(out_base + sl.offset, sl.rows, sl.cols);
      block.noalias() = s * (dg_z * flat_view(a).transpose());
      block.noalias() += s * (g_z * flat_view(da).transpose());
      Eigen::Map<const RowMat> w(base + sl.offset, sl.rows, sl.cols);
      Eigen::Map<const RowMat> v(dir + sl.offset, sl.rows, sl.cols);
      Eigen::VectorXd g_in = s * (w.transpose() * g_z);
      Eigen::VectorXd dg_in = s * (v.transpose() * g_z + w.transpose() * dg_z);
      if (ls.kind == LayerKind::Residual) {
        g_in += g;
        dg_in += dg;
      }
      g = std::move(g_in);
      dg = std::move(dg_in);
    }
  }
}

void check_args(const NetworkSpec& spec, const Eigen::VectorXd& params,
                const Eigen::VectorXd& x, const ParamLayout& layout) {
  if (x.size() != spec.input_dim)
    throw validation_error("input has dimension " + std::to_string(x.size()) +
                           ", spec expects " + std::to_string(spec.input_dim));
  if (params.size() != layout.total)
    throw validation_error("parameter vector has size " +
                           std::to_string(params.size()) + ", layout expects " +
                           std::to_string(layout.total));
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim < 1) throw validation_error("input_dim must be positive");
  if (layers.empty()) throw validation_error("network needs at least one layer");
  std::vector<StateShape> shapes;
  shapes.push_back({input_dim, 1});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& ls = layers[l];
    if (ls.width < 1)
      throw validation_error("layer " + std::to_string(l) + ": width must be positive");
    const int in_flat = shapes.back().flat();
    switch (ls.kind) {
      case LayerKind::FullyConnected:
        shapes.push_back({ls.width, 1});
        break;
      case LayerKind::Residual:
        if (ls.width != in_flat)
          throw validation_error("layer " + std::to_string(l) +
                                 ": residual width " + std::to_string(ls.width) +
                                 " does not match input length " +
                                 std::to_string(in_flat));
        shapes.push_back({ls.width, 1});
        break;
      case LayerKind::Convolutional:
        if (ls.filter_size < 1 || ls.filter_size % 2 == 0)
          throw validation_error("layer " + std::to_string(l) +
                                 ": filter_size must be odd and positive");
        if (ls.pixels < 1)
          throw validation_error("layer " + std::to_string(l) +
                                 ": pixels must be positive");
        if (in_flat % ls.pixels != 0)
          throw validation_error("layer " + std::to_string(l) + ": input length " +
                                 std::to_string(in_flat) +
                                 " is not divisible by pixel count " +
                                 std::to_string(ls.pixels));
        shapes.push_back({ls.width, ls.pixels});
        break;
    }
  }
}

std::string NetworkSpec::tag() const {
  std::ostringstream os;
  os << "d" << input_dim;
  for (const LayerSpec& ls : layers) {
    switch (ls.kind) {
      case LayerKind::FullyConnected: os << "-fc" << ls.width; break;
      case LayerKind::Residual: os << "-res" << ls.width; break;
      case LayerKind::Convolutional:
        os << "-conv" << ls.filter_size << "x" << ls.width << "q" << ls.pixels;
        break;
    }
  }
  os << "-" << activation_name(activation);
  if (asi) os << "-asi";
  return os.str();
}

std::vector<StateShape> state_shapes(const NetworkSpec& spec) {
  spec.validate();
  std::vector<StateShape> shapes;
  shapes.push_back({spec.input_dim, 1});
  for (const LayerSpec& ls : spec.layers) {
    if (ls.kind == LayerKind::Convolutional)
      shapes.push_back({ls.width, ls.pixels});
    else
      shapes.push_back({ls.width, 1});
  }
  return shapes;
}

ParamLayout param_layout(const NetworkSpec& spec) {
  const auto shapes = state_shapes(spec);
  ParamLayout layout;
  layout.asi = spec.asi;
  std::ptrdiff_t offset = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    ParamSlice slice;
    slice.kind = ls.kind;
    slice.offset = offset;
    if (ls.kind == LayerKind::Convolutional) {
      slice.taps = ls.filter_size;
      slice.rows = ls.width;
      slice.cols = shapes[l].flat() / ls.pixels;
    } else {
      slice.taps = 1;
      slice.rows = ls.width;
      slice.cols = shapes[l].flat();
    }
    offset += slice.size();
    layout.weights.push_back(slice);
  }
  layout.head_offset = offset;
  layout.head_size = shapes.back().flat();
  layout.half = offset + layout.head_size;
  layout.total = spec.asi ? 2 * layout.half : layout.half;
  return layout;
}

RowMat conv_apply(const ConvFilter& filter, const RowMat& alpha) {
  if (filter.taps < 1 || filter.taps % 2 == 0)
    throw validation_error("conv_apply: filter_size must be odd and positive");
  if (alpha.rows() != filter.in_channels)
    throw validation_error("conv_apply: input has " +
                           std::to_string(alpha.rows()) + " channels, filter expects " +
                           std::to_string(filter.in_channels));
  RowMat z = RowMat::Zero(filter.out_channels, alpha.cols());
  conv_forward_into(filter.w.data(), filter.taps, filter.out_channels,
                    filter.in_channels, alpha, z);
  return z;
}

Eigen::VectorXd init_params(const NetworkSpec& spec, Rng& rng) {
  const ParamLayout layout = param_layout(spec);
  Eigen::VectorXd params(layout.total);
  for (std::ptrdiff_t i = 0; i < layout.half; ++i) params[i] = rng.normal();
  if (spec.asi) params.tail(layout.half) = params.head(layout.half);
  return params;
}

double forward(const NetworkSpec& spec, const Eigen::VectorXd& params,
               const Eigen::VectorXd& x) {
  const auto shapes = state_shapes(spec);
  const ParamLayout layout = param_layout(spec);
  check_args(spec, params, x, layout);
  const double f0 =
      run_forward_half(spec, shapes, layout, params.data(), x, nullptr);
  if (!spec.asi) return f0;
  const double f1 = run_forward_half(spec, shapes, layout,
                                     params.data() + layout.half, x, nullptr);
  return kHalfInv * f0 - kHalfInv * f1;
}

GradFeatures grad_features(const NetworkSpec& spec,
                           const Eigen::VectorXd& params,
                           const Eigen::VectorXd& x) {
  const auto shapes = state_shapes(spec);
  const ParamLayout layout = param_layout(spec);
  check_args(spec, params, x, layout);
  GradFeatures f;
  {
    Trace trace;
    run_forward_half(spec, shapes, layout, params.data(), x, &trace);
    run_backward_half(spec, shapes, layout, params.data(), trace,
                      spec.asi ? kHalfInv : 1.0, f.parts);
  }
  if (spec.asi) {
    Trace trace;
    run_forward_half(spec, shapes, layout, params.data() + layout.half, x,
                     &trace);
    run_backward_half(spec, shapes, layout, params.data() + layout.half, trace,
                      -kHalfInv, f.parts);
  }
  return f;
}

double feature_dot(const GradFeatures& a, const GradFeatures& b) {
  if (a.parts.size() != b.parts.size())
    throw validation_error("feature_dot: mismatched feature structures");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    const auto& pa = a.parts[i];
    const auto& pb = b.parts[i];
    if (pa.rank1 != pb.rank1)
      throw validation_error("feature_dot: mismatched feature structures");
    if (pa.rank1)
      acc += pa.out.dot(pb.out) * pa.in.dot(pb.in);
    else
      acc += pa.dense.dot(pb.dense);
  }
  return acc;
}

namespace {

void add_features_into(const ParamLayout& layout, const GradFeatures& f,
                       double coeff, Eigen::VectorXd& buffer) {
  const std::size_t per_half = layout.weights.size() + 1;
  const std::size_t halves = f.parts.size() / per_half;
  for (std::size_t h = 0; h < halves; ++h) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(h) * layout.half;
    for (std::size_t l = 0; l < layout.weights.size(); ++l) {
      const ParamSlice& sl = layout.weights[l];
      const auto& part = f.parts[h * per_half + l];
      if (part.rank1) {
        Eigen::Map<RowMat> block(buffer.data() + base + sl.offset, sl.rows,
                                 sl.cols);
        block.noalias() += coeff * (part.out * part.in.transpose());
      } else {
        Eigen::Map<Eigen::VectorXd>(buffer.data() + base + sl.offset,
                                    sl.size()) += coeff * part.dense;
      }
    }
    const auto& head = f.parts[h * per_half + layout.weights.size()];
    Eigen::Map<Eigen::VectorXd>(buffer.data() + base + layout.head_offset,
                                layout.head_size) += coeff * head.dense;
  }
}

}  // namespace

Eigen::VectorXd flatten_features(const NetworkSpec& spec,
                                 const GradFeatures& f) {
  const ParamLayout layout = param_layout(spec);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(layout.total);
  add_features_into(layout, f, 1.0, out);
  return out;
}

Eigen::VectorXd grad(const NetworkSpec& spec, const Eigen::VectorXd& params,
                     const Eigen::VectorXd& x) {
  return flatten_features(spec, grad_features(spec, params, x));
}

void accumulate_grad(const NetworkSpec& spec, const Eigen::VectorXd& params,
                     const Eigen::VectorXd& x, double coeff,
                     Eigen::VectorXd& buffer) {
  const ParamLayout layout = param_layout(spec);
  if (buffer.size() != layout.total)
    throw validation_error("accumulate_grad: buffer size mismatch");
  add_features_into(layout, grad_features(spec, params, x), coeff, buffer);
}

HvpResult hvp(const NetworkSpec& spec, const Eigen::VectorXd& params,
              const Eigen::VectorXd& x, const Eigen::VectorXd& direction) {
  const auto shapes = state_shapes(spec);
  const ParamLayout layout = param_layout(spec);
  check_args(spec, params, x, layout);
  if (direction.size() != layout.total)
    throw validation_error("hvp: direction size mismatch");
  HvpResult result;
  result.value = Eigen::VectorXd::Zero(layout.total);
  {
    DualTrace trace;
    run_forward_half_dual(spec, shapes, layout, params.data(),
                          direction.data(), x, trace);
    run_backward_half_dual(spec, shapes, layout, params.data(),
                           direction.data(), trace,
                           spec.asi ? kHalfInv : 1.0, result.value.data());
  }
  if (spec.asi) {
    DualTrace trace;
    run_forward_half_dual(spec, shapes, layout, params.data() + layout.half,
                          direction.data() + layout.half, x, trace);
    run_backward_half_dual(spec, shapes, layout, params.data() + layout.half,
                           direction.data() + layout.half, trace, -kHalfInv,
                           result.value.data() + layout.half);
  }
  return result;
}

OpnormEstimate hessian_opnorm_estimate(const NetworkSpec& spec,
                                       const Eigen::VectorXd& params,
                                       const Eigen::VectorXd& x,
                                       int max_iterations, Rng& rng) {
  const ParamLayout layout = param_layout(spec);
  const auto apply = [&](const Eigen::VectorXd& v) {
    return hvp(spec, params, x, v).value;
  };
  return opnorm_via_power(apply, layout.total, max_iterations, 1e-6, rng);
}

}  // namespace ntklab
