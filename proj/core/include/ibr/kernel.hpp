#pragma once

#include "ibr/dataset.hpp"
#include "ibr/linalg.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace ibr {

enum class KernelFamily { gaussian, triangular, uniform, epanechnikov };

std::string_view to_string(KernelFamily family);

// Accepts the lower-case names printed by to_string(). Throws InputError.
KernelFamily parse_kernel_family(std::string_view name);

// Families whose Gram matrices are positive semidefinite for every design,
// i.e. the ones for which iterative bias reduction is well behaved.
bool is_positive_definite(KernelFamily family);

/// Univariate kernel profile K(u), u >= 0:
///   gaussian      exp(-u^2/2)
///   triangular    (1-u)+
///   uniform       0.5 * 1{u <= 1}
///   epanechnikov  0.75 * (1-u^2)+
/// Throws InputError for negative or non-finite u.
double kernel_eval(KernelFamily family, double u);

// Value at the origin, the diagonal of every Gram matrix.
double kernel_at_zero(KernelFamily family);

// Whether K(u) = 0 for u > 1.
bool has_compact_support(KernelFamily family);

/// Per-covariate bandwidths h_1..h_d, each finite and > 0.
class Bandwidth {
public:
  Bandwidth() = default;
  explicit Bandwidth(Eigen::VectorXd h);

  const Eigen::VectorXd& values() const { return h_; }
  Eigen::Index size() const { return h_.size(); }
  double operator[](Eigen::Index j) const { return h_(j); }

private:
  Eigen::VectorXd h_;
};

// sqrt(sum_j ((x_j - y_j) / h_j)^2)
double weighted_distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const Bandwidth& h);

/// Nadaraya-Watson smoother S = D K on a fixed design.
///
/// K is the symmetric Gram matrix K_ij = K(d_h(X_i, X_j)) and D the diagonal
/// row normalizer D_ii = 1 / sum_j K_ij. The spectrum is that of the symmetric
/// conjugate A = D^{1/2} K D^{1/2}, which shares its eigenvalues with S.
///
/// Eigenvalues within 1e-10 outside [0, 1] are clamped onto the interval;
/// larger excursions are kept as computed and reported through warnings().
struct KernelSmoother {
  KernelFamily family = KernelFamily::gaussian;
  Bandwidth h;
  Eigen::MatrixXd design;  // n x d copy of the covariates
  Eigen::MatrixXd gram;
  Eigen::VectorXd d_row;
  SymmetricSpectrum spectrum;
  std::vector<std::string> warnings;

  Eigen::Index n() const { return gram.rows(); }
  Eigen::MatrixXd smoother_matrix() const;
  Eigen::MatrixXd symmetric_matrix() const;

  // Raw kernel weights K(d_h(x, X_i)) against every design point.
  Eigen::VectorXd kernel_weights_at(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Row S(x) of the smoother at a new location. Throws ExtrapolationError when
  // every kernel weight is zero.
  Eigen::VectorXd weights_at(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// Gram matrix only (no normalization, no eigensolve).
Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& X, KernelFamily family, const Bandwidth& h);

KernelSmoother build_kernel_smoother(const Dataset& data, KernelFamily family, const Bandwidth& h);

// trace(S_h) for the smoother on a single covariate. O(n^2), no eigensolve.
double kernel_trace_1d(const Eigen::VectorXd& x_col, KernelFamily family, double h);

/// Bandwidth h for which the one-dimensional smoother on x_col has
/// trace(S_h) = target_df.
///
/// Bisection on log h over [1e-6, 1e6] x range(x_col), widening the bracket
/// tenfold up to five times. For the uniform kernel the trace is a step
/// function of h; the closest attainable value is returned.
/// Throws CalibrationError if the target lies outside the attainable range.
double bandwidth_for_df(const Eigen::VectorXd& x_col, KernelFamily family, double target_df);

// bandwidth_for_df applied column by column.
Bandwidth default_bandwidths(const Dataset& data, KernelFamily family, double per_var_df = 1.1);

}  // namespace ibr
