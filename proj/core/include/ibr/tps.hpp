#pragma once

#include "ibr/dataset.hpp"
#include "ibr/linalg.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ibr {

/// Number of d-variate monomials of total degree < nu0, binom(nu0+d-1, nu0-1).
/// Throws InputError for nu0 < 1 or d < 1 and NumericalError on overflow.
std::int64_t null_space_dim(int nu0, int d);

// Smallest admissible degree, floor(d/2) + 1.
int default_nu0(int d);

struct TpsSpec {
  int nu0 = 2;
  double lambda0 = 1.0;
  int d = 2;
};

/// Radial basis eta(r) of the thin-plate penalty of degree nu0 in dimension d:
/// c r^(2 nu0 - d) log r for even d, c r^(2 nu0 - d) for odd d.
double tps_radial(double r, int nu0, int d);

/// Lambda-independent part of a thin-plate spline smoother on a fixed design.
///
/// With T the n x M0 polynomial matrix, T = [Q1 Q2] [R; 0] its QR factorization
/// and E the radial matrix, the smoother for penalty lambda is
///   S = I - Q2 U diag(lambda / (gamma + lambda)) U' Q2'
/// where Q2' E Q2 = U diag(gamma) U'. Every lambda therefore shares the
/// eigenvectors [Q1, Q2 U]; the first M0 eigenvalues are 1 and the rest are
/// gamma / (gamma + lambda).
class TpsBasis {
public:
  static std::shared_ptr<const TpsBasis> build(const Eigen::MatrixXd& X, int nu0);

  int nu0() const { return nu0_; }
  int d() const { return static_cast<int>(design_.cols()); }
  Eigen::Index n() const { return design_.rows(); }
  Eigen::Index null_dim() const { return q1_.cols(); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& gamma() const { return gamma_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // trace(S_lambda) = M0 + sum gamma / (gamma + lambda).
  double trace(double lambda) const;

  // Eigenvalues (descending) and orthonormal eigenvectors of S_lambda.
  SymmetricSpectrum spectrum(double lambda) const;
  Eigen::MatrixXd smoother_matrix(double lambda) const;

  // S_lambda v without forming S.
  Eigen::VectorXd smooth(const Eigen::VectorXd& v, double lambda) const;

  /// Spline coefficients (delta, alpha) of the penalized fit to data v, so that
  /// f(x) = sum_i delta_i eta(|x - X_i|) + sum_m alpha_m p_m(x).
  struct Coefficients {
    Eigen::VectorXd delta;
    Eigen::VectorXd alpha;
  };
  Coefficients coefficients(const Eigen::VectorXd& v, double lambda) const;
  double evaluate(const Coefficients& c, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Monomials of total degree < nu0 at x, in the basis column order.
  Eigen::VectorXd polynomial_row(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd polynomial_matrix(const Eigen::MatrixXd& X) const;

private:
  int nu0_ = 2;
  Eigen::MatrixXd design_;
  std::vector<std::vector<int>> exponents_;
  Eigen::MatrixXd radial_;  // E
  Eigen::MatrixXd q1_;
  Eigen::MatrixXd r_;       // M0 x M0 upper triangular
  Eigen::MatrixXd q2u_;     // Q2 U
  Eigen::VectorXd gamma_;
  std::vector<std::string> warnings_;
};

struct TpsSmoother {
  TpsSpec spec;
  std::shared_ptr<const TpsBasis> basis;
  SymmetricSpectrum spectrum;

  Eigen::Index n() const { return basis->n(); }
  std::int64_t null_dim() const { return basis->null_dim(); }
  Eigen::MatrixXd smoother_matrix() const { return basis->smoother_matrix(spec.lambda0); }
};

/// Hat matrix of the thin-plate penalized least-squares problem.
/// Throws InputError when 2 nu0 <= d, NumericalError when M0 >= n, on duplicate
/// design points, or when the polynomial block is rank deficient.
TpsSmoother build_tps_smoother(const Dataset& data, const TpsSpec& spec);
TpsSmoother make_tps_smoother(std::shared_ptr<const TpsBasis> basis, double lambda0);

/// Penalty lambda0 with trace(S) = target_df, by bisection on log lambda.
/// Throws CalibrationError unless M0 < target_df < n.
double lambda_for_df(const Dataset& data, int nu0, double target_df);
double lambda_for_df(const TpsBasis& basis, double target_df);

}  // namespace ibr
