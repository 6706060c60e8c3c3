#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "ntklab/ntk.hpp"

namespace ntklab {

// Sorted spectral decomposition of a symmetric matrix. Columns of
// `eigenvectors` pair with entries of `eigenvalues`, which are nonincreasing
// with ties broken by original index. Each column's sign is fixed so that its
// first nonzero component is positive. `scale_tag` records whether the values
// belong to G or to G/n.
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  std::string source_tag;
  std::string scale_tag = "G";

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

enum class GramScale { Raw, OverN };

// Cyclic Jacobi eigendecomposition. The input must be symmetric within
// 1e-10 relative to its largest entry; rotations stop once the off-diagonal
// Frobenius mass drops below 1e-12 * ||A||_F. Throws validation_error on an
// asymmetric input and std::runtime_error with sweep diagnostics if the
// threshold is not reached.
EigenSystem eigh(const Eigen::MatrixXd& a, const std::string& source_tag = "");

// Decomposes gm.values (GramScale::Raw) or gm.values / n (GramScale::OverN),
// tagging the result with the Gram's kernel tag.
EigenSystem eigh(const GramMatrix& gm, GramScale scale);

// Nystrom extension data for one eigenpair of G/n: f(x) =
// (1 / (n * eigenvalue)) * sum_j K(x, x_j) * sqrt(n) * coefficients[j].
// The restriction of f to the sample then has unit empirical L2 norm.
struct EigenFunction {
  Eigen::VectorXd coefficients;
  double eigenvalue = 0.0;
  std::shared_ptr<const Eigen::MatrixXd> sample;
  std::shared_ptr<const Kernel> kernel;
};

// Builds the top `count` eigenfunctions from a G/n eigensystem. Requires
// es.scale_tag == "G/n" and refuses eigenvalues below 1e-10 * sigma_1.
std::vector<EigenFunction> nystrom_functions(
    const EigenSystem& es, std::shared_ptr<const Kernel> kernel,
    std::shared_ptr<const Eigen::MatrixXd> sample, int count);

double nystrom_eval(const EigenFunction& phi, const Eigen::VectorXd& x);

// Evaluates several eigenfunctions sharing one sample and kernel on the rows
// of X, computing the kernel cross block once. Returns X.rows() x phis.size().
Eigen::MatrixXd nystrom_eval_many(const std::vector<EigenFunction>& phis,
                                  const Eigen::MatrixXd& X);

struct SpectrumEntry {
  int k = 0;  // 1-based rank
  double lambda = 0.0;
  double ratio = 0.0;  // lambda_k / lambda_1
};

// Normalized spectrum profile (k, lambda_k, lambda_k / lambda_1) for
// k = 1..k_max. The overload without k_max reports the first half of the
// spectrum, which is the part that sits above round-off in practice.
std::vector<SpectrumEntry> spectrum_report(const EigenSystem& es, int k_max);
std::vector<SpectrumEntry> spectrum_report(const EigenSystem& es);

}  // namespace ntklab
