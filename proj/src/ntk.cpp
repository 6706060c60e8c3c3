#include "ntklab/ntk.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

std::vector<GradFeatures> features_of_rows(const NetworkSpec& spec,
                                           const Eigen::VectorXd& params,
                                           const Eigen::MatrixXd& X) {
  std::vector<GradFeatures> feats;
  feats.reserve(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    feats.push_back(grad_features(spec, params, X.row(i).transpose()));
  return feats;
}

void mirror_upper(Eigen::MatrixXd& g) {
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) g(j, i) = g(i, j);
}

}  // namespace

Eigen::MatrixXd Kernel::cross(const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      out(i, j) = (*this)(A.row(i).transpose(), B.row(j).transpose());
  return out;
}

Eigen::MatrixXd Kernel::gram_values(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd g(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i; j < X.rows(); ++j)
      g(i, j) = (*this)(X.row(i).transpose(), X.row(j).transpose());
  mirror_upper(g);
  return g;
}

NtkKernel::NtkKernel(NetworkSpec spec, Eigen::VectorXd params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != param_layout(spec_).total)
    throw validation_error("NtkKernel: parameter size mismatch");
}

double NtkKernel::operator()(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y) const {
  return feature_dot(grad_features(spec_, params_, x),
                     grad_features(spec_, params_, y));
}

Eigen::MatrixXd NtkKernel::cross(const Eigen::MatrixXd& A,
                                 const Eigen::MatrixXd& B) const {
  const auto fa = features_of_rows(spec_, params_, A);
  const auto fb = features_of_rows(spec_, params_, B);
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      out(i, j) = feature_dot(fa[i], fb[j]);
  return out;
}

Eigen::MatrixXd NtkKernel::gram_values(const Eigen::MatrixXd& X) const {
  const auto feats = features_of_rows(spec_, params_, X);
  Eigen::MatrixXd g(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i; j < X.rows(); ++j)
      g(i, j) = feature_dot(feats[i], feats[j]);
  mirror_upper(g);
  return g;
}

std::string NtkKernel::tag() const { return "ntk[" + spec_.tag() + "]"; }

McNtkKernel::McNtkKernel(NetworkSpec spec, int n_init, std::uint64_t root_seed)
    : spec_(std::move(spec)), n_init_(n_init), root_(root_seed) {
  spec_.validate();
  if (n_init_ < 1) throw validation_error("McNtkKernel: n_init must be positive");
}

double McNtkKernel::operator()(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) const {
  double acc = 0.0;
  for (int r = 0; r < n_init_; ++r) {
    Rng rng = root_.child(r);
    const Eigen::VectorXd params = init_params(spec_, rng);
    acc += feature_dot(grad_features(spec_, params, x),
                       grad_features(spec_, params, y));
  }
  return acc / n_init_;
}

Eigen::MatrixXd McNtkKernel::cross(const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows(), B.rows());
  for (int r = 0; r < n_init_; ++r) {
    Rng rng = root_.child(r);
    const Eigen::VectorXd params = init_params(spec_, rng);
    const auto fa = features_of_rows(spec_, params, A);
    const auto fb = features_of_rows(spec_, params, B);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < B.rows(); ++j)
        out(i, j) += feature_dot(fa[i], fb[j]);
  }
  return out / n_init_;
}

Eigen::MatrixXd McNtkKernel::gram_values(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(X.rows(), X.rows());
  for (int r = 0; r < n_init_; ++r) {
    Rng rng = root_.child(r);
    const Eigen::VectorXd params = init_params(spec_, rng);
    const auto feats = features_of_rows(spec_, params, X);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = i; j < X.rows(); ++j)
        g(i, j) += feature_dot(feats[i], feats[j]);
  }
  g /= n_init_;
  mirror_upper(g);
  return g;
}

std::string McNtkKernel::tag() const {
  return "ntk-mc[" + spec_.tag() + ";n_init=" + std::to_string(n_init_) + "]";
}

double ntk_value(const NetworkSpec& spec, const Eigen::VectorXd& params,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return feature_dot(grad_features(spec, params, x),
                     grad_features(spec, params, y));
}

GramMatrix gram(const Kernel& kernel, const Eigen::MatrixXd& X) {
  GramMatrix gm;
  gm.values = kernel.gram_values(X);
  gm.point_ids.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) gm.point_ids[i] = i;
  gm.kernel_tag = kernel.tag();
  return gm;
}

GramMatrix gram(const NetworkSpec& spec, const Eigen::VectorXd& params,
                const Eigen::MatrixXd& X) {
  return gram(NtkKernel(spec, params), X);
}

KernelEstimate analytic_ntk_mc(const NetworkSpec& spec,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y, int n_init,
                               const Rng& rng) {
  if (n_init < 2)
    throw validation_error("analytic_ntk_mc: n_init must be at least 2");
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < n_init; ++r) {
    Rng child = rng.child(r);
    const Eigen::VectorXd params = init_params(spec, child);
    const double v = ntk_value(spec, params, x, y);
    sum += v;
    sumsq += v * v;
  }
  KernelEstimate est;
  est.n_init = n_init;
  est.value = sum / n_init;
  const double var =
      std::max(0.0, (sumsq - sum * sum / n_init) / (n_init - 1));
  est.stderr_ = std::sqrt(var / n_init);
  return est;
}

DistanceEstimate kernel_l2_distance(const Kernel& k1, const Kernel& k2,
                                    const Sampler& sampler, int n_pairs,
                                    Rng& rng) {
  if (n_pairs < 2)
    throw validation_error("kernel_l2_distance: n_pairs must be at least 2");
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd x = sampler(rng);
    const Eigen::VectorXd y = sampler(rng);
    const double diff = k1(x, y) - k2(x, y);
    const double sq = diff * diff;
    sum += sq;
    sumsq += sq * sq;
  }
  DistanceEstimate est;
  est.n_pairs = n_pairs;
  est.value = sum / n_pairs;
  const double var =
      std::max(0.0, (sumsq - sum * sum / n_pairs) / (n_pairs - 1));
  est.stderr_ = std::sqrt(var / n_pairs);
  return est;
}

namespace {

constexpr char kGramMagic[8] = {'N', 'T', 'K', 'G', 'R', 'A', 'M', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::ifstream& in, std::uint64_t& offset) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (in.gcount() != 8)
    throw parse_error("gram file truncated while reading a u64 field", offset);
  offset += 8;
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_gram_binary(const std::string& path, const GramMatrix& gm) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kGramMagic, 8);
  const std::uint64_t n = static_cast<std::uint64_t>(gm.values.rows());
  write_u64(out, n);
  write_u64(out, gm.kernel_tag.size());
  out.write(gm.kernel_tag.data(),
            static_cast<std::streamsize>(gm.kernel_tag.size()));
  for (std::uint64_t i = 0; i < n; ++i)
    write_u64(out, static_cast<std::uint64_t>(gm.point_ids[i]));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = i; j < n; ++j) {
      const double v = gm.values(static_cast<Eigen::Index>(i),
                                 static_cast<Eigen::Index>(j));
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

GramMatrix load_gram_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::uint64_t offset = 0;
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kGramMagic, 8) != 0)
    throw parse_error("bad gram magic, expected \"NTKGRAM1\"", 0);
  offset = 8;
  const std::uint64_t n = read_u64(in, offset);
  const std::uint64_t tag_len = read_u64(in, offset);
  GramMatrix gm;
  gm.kernel_tag.resize(tag_len);
  in.read(gm.kernel_tag.data(), static_cast<std::streamsize>(tag_len));
  if (static_cast<std::uint64_t>(in.gcount()) != tag_len)
    throw parse_error("gram file truncated inside the kernel tag", offset);
  offset += tag_len;
  gm.point_ids.resize(n);
  for (std::uint64_t i = 0; i < n; ++i)
    gm.point_ids[i] = static_cast<std::int64_t>(read_u64(in, offset));
  gm.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = i; j < n; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      if (in.gcount() != sizeof(double))
        throw parse_error("gram file truncated inside the value triangle",
                          offset);
      offset += sizeof(double);
      gm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      gm.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  return gm;
}

void save_gram_csv(const std::string& path, const GramMatrix& gm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "i,j,value\n";
  char buf[64];
  for (Eigen::Index i = 0; i < gm.values.rows(); ++i)
    for (Eigen::Index j = i; j < gm.values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", gm.values(i, j));
      out << gm.point_ids[i] << ',' << gm.point_ids[j] << ',' << buf << '\n';
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ntklab
