#include "ntklab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/rng.hpp"
#include "ntklab/spectral.hpp"

namespace ntklab {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803u;
constexpr std::uint32_t kLabelMagic = 0x00000801u;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open '" + path + "'", 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset,
                        const std::string& path, const char* field) {
  if (offset + 4 > bytes.size()) {
    std::ostringstream msg;
    msg << path << ": truncated while reading " << field;
    throw parse_error(msg.str(), offset);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void check_magic(std::uint32_t got, std::uint32_t want,
                 const std::string& path, const char* what) {
  if (got == want) return;
  std::ostringstream msg;
  msg << path << ": " << what << " magic mismatch: got 0x" << std::hex << got
      << ", want 0x" << want;
  throw parse_error(msg.str(), 0);
}

}  // namespace

double Dataset::label_sup() const {
  double sup = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    sup = std::max(sup, std::abs(labels[i]));
  for (Eigen::Index i = 0; i < holdout_labels.size(); ++i)
    sup = std::max(sup, std::abs(holdout_labels[i]));
  return sup;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path, int target_class,
                 int holdout_count) {
  const std::string ibytes = read_file(images_path);
  const std::string lbytes = read_file(labels_path);

  check_magic(read_be32(ibytes, 0, images_path, "magic"), kImageMagic,
              images_path, "image");
  const std::uint32_t count = read_be32(ibytes, 4, images_path, "image count");
  const std::uint32_t rows = read_be32(ibytes, 8, images_path, "row count");
  const std::uint32_t cols = read_be32(ibytes, 12, images_path, "col count");
  const std::size_t pixel_bytes =
      std::size_t(count) * std::size_t(rows) * std::size_t(cols);
  if (ibytes.size() < 16 + pixel_bytes) {
    std::ostringstream msg;
    msg << images_path << ": truncated pixel data, have "
        << ibytes.size() - 16 << " bytes, need " << pixel_bytes;
    throw parse_error(msg.str(), ibytes.size());
  }

  check_magic(read_be32(lbytes, 0, labels_path, "magic"), kLabelMagic,
              labels_path, "label");
  const std::uint32_t lcount = read_be32(lbytes, 4, labels_path, "label count");
  if (lcount != count) {
    std::ostringstream msg;
    msg << labels_path << ": label count " << lcount
        << " does not match image count " << count;
    throw parse_error(msg.str(), 4);
  }
  if (lbytes.size() < 8 + std::size_t(count)) {
    std::ostringstream msg;
    msg << labels_path << ": truncated label data, have " << lbytes.size() - 8
        << " bytes, need " << count;
    throw parse_error(msg.str(), lbytes.size());
  }

  if (holdout_count < 0 || holdout_count >= static_cast<int>(count))
    throw validation_error("load_idx: holdout_count out of range");

  const int d = static_cast<int>(rows * cols);
  const int n_total = static_cast<int>(count);
  const int n_train = n_total - holdout_count;
  Dataset ds;
  ds.inputs.resize(n_train, d);
  ds.labels.resize(n_train);
  ds.holdout_inputs.resize(holdout_count, d);
  ds.holdout_labels.resize(holdout_count);
  const auto* pixels =
      reinterpret_cast<const unsigned char*>(ibytes.data()) + 16;
  const auto* classes =
      reinterpret_cast<const unsigned char*>(lbytes.data()) + 8;
  for (int i = 0; i < n_total; ++i) {
    const bool held = i >= n_train;
    Eigen::MatrixXd& x = held ? ds.holdout_inputs : ds.inputs;
    Eigen::VectorXd& y = held ? ds.holdout_labels : ds.labels;
    const int r = held ? i - n_train : i;
    for (int j = 0; j < d; ++j)
      x(r, j) = pixels[std::size_t(i) * d + j] / 255.0;
    y[r] = classes[i] == target_class ? 1.0 : -1.0;
  }
  ds.provenance.kind = "idx";
  ds.provenance.detail = images_path + ";" + labels_path +
                         ";class=" + std::to_string(target_class);
  ds.provenance.checksum =
      fnv1a64(lbytes.data(), lbytes.size(),
              fnv1a64(ibytes.data(), ibytes.size()));
  return ds;
}

namespace {

void draw_inputs(const GeneratorSpec& gen, int n, Rng& rng,
                 Eigen::MatrixXd& out) {
  out.resize(n, gen.dim);
  if (gen.kind == "sphere_uniform") {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x(gen.dim);
      for (int j = 0; j < gen.dim; ++j) x[j] = rng.normal();
      out.row(i) = x.transpose() / x.norm();
    }
  } else if (gen.kind == "gaussian") {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < gen.dim; ++j) out(i, j) = rng.normal();
  } else if (gen.kind == "blob_images") {
    const int q = gen.blob_grid;
    for (int i = 0; i < n; ++i) {
      const int blobs = 1 + static_cast<int>(rng.next_u64() % 3);
      Eigen::MatrixXd img = Eigen::MatrixXd::Constant(q, q, 0.3);
      for (int b = 0; b < blobs; ++b) {
        const double cx = rng.uniform() * q;
        const double cy = rng.uniform() * q;
        const double sigma = q / 6.0 + rng.uniform() * q / 6.0;
        const double amp = 0.5 + 0.5 * rng.uniform();
        for (int r = 0; r < q; ++r)
          for (int c = 0; c < q; ++c) {
            const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
            img(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
          }
      }
      for (int r = 0; r < q; ++r)
        for (int c = 0; c < q; ++c)
          out(i, r * q + c) = std::clamp(img(r, c), 0.0, 1.0);
    }
  } else {
    throw validation_error("synth_dataset: unknown generator '" + gen.kind +
                           "'");
  }
}

std::string generator_id(const GeneratorSpec& gen) {
  if (gen.kind == "blob_images")
    return gen.kind + "(q=" + std::to_string(gen.blob_grid) + ")";
  return gen.kind + "(d=" + std::to_string(gen.dim) + ")";
}

}  // namespace

Dataset synth_dataset(const GeneratorSpec& generator, const TargetSpec& target,
                      int n, int n_holdout, std::uint64_t seed) {
  if (n < 1) throw validation_error("synth_dataset: n must be positive");
  if (n_holdout < 0)
    throw validation_error("synth_dataset: negative holdout size");
  GeneratorSpec gen = generator;
  if (gen.kind == "blob_images") {
    if (gen.blob_grid < 2)
      throw validation_error("synth_dataset: blob grid must be at least 2");
    gen.dim = gen.blob_grid * gen.blob_grid;
  }
  if (gen.dim < 1)
    throw validation_error("synth_dataset: generator dimension must be "
                           "positive");

  Rng root(seed);
  Rng train_rng = root.child(0);
  Rng holdout_rng = root.child(1);
  Rng target_rng = root.child(2);

  Dataset ds;
  draw_inputs(gen, n, train_rng, ds.inputs);
  draw_inputs(gen, n_holdout, holdout_rng, ds.holdout_inputs);

  if (target.kind == "zero") {
    ds.labels = Eigen::VectorXd::Zero(n);
    ds.holdout_labels = Eigen::VectorXd::Zero(n_holdout);
  } else if (target.kind == "random_smooth") {
    const int d = gen.dim;
    const double a0 = target_rng.normal();
    Eigen::VectorXd a(d);
    for (int j = 0; j < d; ++j) a[j] = target_rng.normal() / std::sqrt(d);
    Eigen::MatrixXd b(d, d);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b.data()[i] = target_rng.normal() / d;
    auto eval = [&](const Eigen::MatrixXd& x, Eigen::VectorXd& y) {
      y.resize(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd xi = x.row(i).transpose();
        y[i] = a0 + a.dot(xi) + xi.dot(b * xi);
      }
    };
    eval(ds.inputs, ds.labels);
    eval(ds.holdout_inputs, ds.holdout_labels);
  } else if (target.kind == "eigenfunction_mix" ||
             target.kind == "custom_coeffs") {
    std::vector<double> coeffs = target.coefficients;
    if (coeffs.empty()) {
      if (target.kind == "custom_coeffs")
        throw validation_error(
            "synth_dataset: custom_coeffs requires coefficients");
      coeffs = {2.0, 3.0};
    }
    NetworkSpec ref = target.reference;
    ref.validate();
    if (ref.input_dim != gen.dim)
      throw validation_error(
          "synth_dataset: reference kernel input dimension mismatch");
    Rng ref_rng(target.reference_seed);
    const Eigen::VectorXd ref_params = init_params(ref, ref_rng);
    auto kernel = std::make_shared<NtkKernel>(ref, ref_params);
    const bool on_holdout = n_holdout > 0;
    auto mix_sample = std::make_shared<Eigen::MatrixXd>(
        on_holdout ? ds.holdout_inputs : ds.inputs);
    const EigenSystem es = eigh(gram(*kernel, *mix_sample), GramScale::OverN);
    const int k = static_cast<int>(coeffs.size());
    const auto phis = nystrom_functions(es, kernel, mix_sample, k);
    const Eigen::Map<const Eigen::VectorXd> c(coeffs.data(), k);

    // Exact values on the mix sample, Nystrom extension on the other split.
    const double root_m = std::sqrt(static_cast<double>(mix_sample->rows()));
    const Eigen::VectorXd on_mix =
        root_m * es.eigenvectors.leftCols(k) * c;
    if (on_holdout) {
      ds.holdout_labels = on_mix;
      ds.labels = nystrom_eval_many(phis, ds.inputs) * c;
    } else {
      ds.labels = on_mix;
      ds.holdout_labels.resize(0);
    }
  } else {
    throw validation_error("synth_dataset: unknown target '" + target.kind +
                           "'");
  }

  ds.provenance.kind = "synthetic";
  ds.provenance.detail = generator_id(gen) + "+" + target.kind;
  ds.provenance.seed = seed;
  return ds;
}

}  // namespace ntklab
