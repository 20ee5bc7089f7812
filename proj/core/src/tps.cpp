#include "ibr/tps.hpp"

#include "ibr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ibr {

namespace {

constexpr double kRidge = 1e-10;
constexpr double kMaxCondition = 1e12;

// All exponent tuples of length d with total degree < nu0, ordered by degree.
std::vector<std::vector<int>> monomial_exponents(int nu0, int d) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(d), 0);
  for (int degree = 0; degree < nu0; ++degree) {
    // Enumerate compositions of `degree` into d parts, lexicographically descending.
    auto recurse = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == d - 1) {
        current[static_cast<std::size_t>(pos)] = remaining;
        out.push_back(current);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        current[static_cast<std::size_t>(pos)] = e;
        self(self, pos + 1, remaining - e);
      }
    };
    recurse(recurse, 0, degree);
  }
  return out;
}

double radial_constant(int nu0, int d) {
  const double pi_d2 = std::pow(std::numbers::pi, 0.5 * d);
  const double fact_nu = std::tgamma(static_cast<double>(nu0));  // (nu0-1)!
  if (d % 2 == 0) {
    const double sign = ((nu0 + 1 + d / 2) % 2 == 0) ? 1.0 : -1.0;
    const double fact_half = std::tgamma(static_cast<double>(nu0 - d / 2 + 1));
    return sign / (std::pow(2.0, 2 * nu0 - 1) * pi_d2 * fact_nu * fact_half);
  }
  return std::tgamma(0.5 * d - nu0) / (std::pow(2.0, 2 * nu0) * pi_d2 * fact_nu);
}

void check_degree(int nu0, int d) {
  if (nu0 < 1 || d < 1) throw InputError("thin-plate spline: nu0 and d must be >= 1");
  if (2 * nu0 <= d) {
    throw InputError("thin-plate spline: need 2*nu0 > d (nu0=" + std::to_string(nu0) +
                     ", d=" + std::to_string(d) + ")");
  }
}

}  // namespace

std::int64_t null_space_dim(int nu0, int d) {
  if (nu0 < 1 || d < 1) throw InputError("null_space_dim: nu0 and d must be >= 1");
  // binom(nu0 + d - 1, k) with k = min(nu0 - 1, d)
  const std::int64_t top = static_cast<std::int64_t>(nu0) + d - 1;
  const std::int64_t k = std::min<std::int64_t>(nu0 - 1, d);
  std::int64_t result = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    const std::int64_t factor = top - k + i;
    // result * factor is divisible by i at every step.
    if (result > std::numeric_limits<std::int64_t>::max() / factor) {
      throw NumericalError("null_space_dim: binomial coefficient overflows 64 bits");
    }
    result = result * factor / i;
  }
  return result;
}

int default_nu0(int d) { return d / 2 + 1; }

double tps_radial(double r, int nu0, int d) {
  check_degree(nu0, d);
  if (r <= 0.0) return 0.0;
  const double c = radial_constant(nu0, d);
  const double p = std::pow(r, 2 * nu0 - d);
  return d % 2 == 0 ? c * p * std::log(r) : c * p;
}

Eigen::VectorXd TpsBasis::polynomial_row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd row(static_cast<Eigen::Index>(exponents_.size()));
  for (std::size_t m = 0; m < exponents_.size(); ++m) {
    double v = 1.0;
    for (std::size_t j = 0; j < exponents_[m].size(); ++j) {
      for (int e = 0; e < exponents_[m][j]; ++e) v *= x(static_cast<Eigen::Index>(j));
    }
    row(static_cast<Eigen::Index>(m)) = v;
  }
  return row;
}

Eigen::MatrixXd TpsBasis::polynomial_matrix(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd T(X.rows(), static_cast<Eigen::Index>(exponents_.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) T.row(i) = polynomial_row(X.row(i).transpose());
  return T;
}

std::shared_ptr<const TpsBasis> TpsBasis::build(const Eigen::MatrixXd& X, int nu0) {
  const int d = static_cast<int>(X.cols());
  check_degree(nu0, d);
  const std::int64_t m0 = null_space_dim(nu0, d);
  const Eigen::Index n = X.rows();
  if (m0 >= n) {
    throw NumericalError("thin-plate spline infeasible: null space dimension M0=" +
                         std::to_string(m0) + " >= n=" + std::to_string(n));
  }

  auto basis = std::make_shared<TpsBasis>();
  basis->nu0_ = nu0;
  basis->design_ = X;
  basis->exponents_ = monomial_exponents(nu0, d);

  Eigen::MatrixXd E(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    E(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (X.row(i) - X.row(j)).norm();
      if (r == 0.0) {
        throw NumericalError("thin-plate spline system is singular: design points " +
                             std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
      E(i, j) = E(j, i) = tps_radial(r, nu0, d);
    }
  }
  basis->radial_ = E;

  const Eigen::MatrixXd T = basis->polynomial_matrix(X);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(T);
  const Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::Index m = T.cols();
  basis->r_ = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const Eigen::VectorXd rdiag = basis->r_.diagonal().cwiseAbs();
  if (rdiag.minCoeff() <= 1e-10 * rdiag.maxCoeff()) {
    throw NumericalError("thin-plate spline: polynomial block is rank deficient on this design");
  }
  basis->q1_ = Q.leftCols(m);
  const Eigen::MatrixXd q2 = Q.rightCols(n - m);

  Eigen::MatrixXd inner = q2.transpose() * E * q2;
  inner = 0.5 * (inner + inner.transpose());
  SymmetricSpectrum inner_eig = symmetric_eigen(inner);
  Eigen::VectorXd gamma = inner_eig.values;
  const double gmax = gamma.maxCoeff();
  if (!(gmax > 0.0)) throw NumericalError("thin-plate spline: radial block is not positive");
  if (gamma.minCoeff() * kMaxCondition <= gmax) {
    gamma = gamma.cwiseMax(0.0).array() + kRidge;
    std::ostringstream msg;
    msg << "radial block condition number exceeds " << kMaxCondition << "; added ridge "
        << kRidge;
    basis->warnings_.push_back(msg.str());
  }
  basis->gamma_ = gamma;
  basis->q2u_ = q2 * inner_eig.vectors;
  return basis;
}

double TpsBasis::trace(double lambda) const {
  return static_cast<double>(null_dim()) +
         (gamma_.array() / (gamma_.array() + lambda)).sum();
}

SymmetricSpectrum TpsBasis::spectrum(double lambda) const {
  SymmetricSpectrum s;
  const Eigen::Index m = null_dim();
  s.values.resize(n());
  s.values.head(m).setOnes();
  s.values.tail(n() - m) = gamma_.array() / (gamma_.array() + lambda);
  s.vectors.resize(n(), n());
  s.vectors.leftCols(m) = q1_;
  s.vectors.rightCols(n() - m) = q2u_;
  return s;
}

Eigen::MatrixXd TpsBasis::smoother_matrix(double lambda) const {
  const Eigen::VectorXd shrink = lambda * (gamma_.array() + lambda).inverse();
  Eigen::MatrixXd S = -q2u_ * shrink.asDiagonal() * q2u_.transpose();
  S.diagonal().array() += 1.0;
  return 0.5 * (S + S.transpose());
}

Eigen::VectorXd TpsBasis::smooth(const Eigen::VectorXd& v, double lambda) const {
  const Eigen::VectorXd shrink = lambda * (gamma_.array() + lambda).inverse();
  return v - q2u_ * shrink.cwiseProduct(q2u_.transpose() * v);
}

TpsBasis::Coefficients TpsBasis::coefficients(const Eigen::VectorXd& v, double lambda) const {
  if (v.size() != n()) throw InputError("thin-plate spline: data length mismatch");
  Coefficients c;
  const Eigen::VectorXd inv = (gamma_.array() + lambda).inverse();
  c.delta = q2u_ * inv.cwiseProduct(q2u_.transpose() * v);
  const Eigen::VectorXd poly_part = smooth(v, lambda) - radial_ * c.delta;
  c.alpha = r_.triangularView<Eigen::Upper>().solve(q1_.transpose() * poly_part);
  return c;
}

double TpsBasis::evaluate(const Coefficients& c, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != d()) throw InputError("thin-plate spline: point dimension mismatch");
  if (!x.allFinite()) throw InputError("thin-plate spline: non-finite evaluation point");
  double value = polynomial_row(x).dot(c.alpha);
  for (Eigen::Index i = 0; i < n(); ++i) {
    value += c.delta(i) * tps_radial((x - design_.row(i).transpose()).norm(), nu0_, d());
  }
  return value;
}

TpsSmoother make_tps_smoother(std::shared_ptr<const TpsBasis> basis, double lambda0) {
  if (!std::isfinite(lambda0) || lambda0 <= 0.0) {
    throw InputError("thin-plate spline: lambda0 must be finite and > 0");
  }
  TpsSmoother sm;
  sm.spec = TpsSpec{basis->nu0(), lambda0, basis->d()};
  sm.spectrum = basis->spectrum(lambda0);
  sm.basis = std::move(basis);
  return sm;
}

TpsSmoother build_tps_smoother(const Dataset& data, const TpsSpec& spec) {
  if (spec.d != data.d()) throw InputError("thin-plate spline: spec dimension differs from data");
  return make_tps_smoother(TpsBasis::build(data.X(), spec.nu0), spec.lambda0);
}

double lambda_for_df(const TpsBasis& basis, double target_df) {
  const double m0 = static_cast<double>(basis.null_dim());
  const double n = static_cast<double>(basis.n());
  if (!(target_df > m0) || !(target_df < n)) {
    std::ostringstream msg;
    msg << "lambda_for_df: target df " << target_df << " unreachable; trace lies in (" << m0
        << ", " << n << ")";
    throw CalibrationError(msg.str());
  }
  const double gmax = basis.gamma().maxCoeff();
  const double gmin = std::max(basis.gamma().minCoeff(), gmax * 1e-300);
  double lo = std::log(gmin) - 60.0;
  double hi = std::log(gmax) + 60.0;
  if (basis.trace(std::exp(lo)) < target_df || basis.trace(std::exp(hi)) > target_df) {
    throw CalibrationError("lambda_for_df: target df outside the numerically attainable range");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    mid = 0.5 * (lo + hi);
    const double t = basis.trace(std::exp(mid));
    if (std::abs(t - target_df) <= 1e-10) break;
    if (t > target_df) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(mid);
}

double lambda_for_df(const Dataset& data, int nu0, double target_df) {
  const std::int64_t m0 = null_space_dim(nu0, static_cast<int>(data.d()));
  if (!(target_df > static_cast<double>(m0))) {
    throw CalibrationError("lambda_for_df: target df " + std::to_string(target_df) +
                           " must exceed the null space dimension M0=" + std::to_string(m0));
  }
  return lambda_for_df(*TpsBasis::build(data.X(), nu0), target_df);
}

}  // namespace ibr
