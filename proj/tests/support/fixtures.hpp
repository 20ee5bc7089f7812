#pragma once

#include "ibr/ibr.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace ibr::testing {

inline Eigen::MatrixXd random_design(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d,
                                     double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = u(rng);
  return X;
}

inline Eigen::VectorXd wiggly_response(std::mt19937_64& rng, const Eigen::MatrixXd& X,
                                       double noise = 0.1) {
  std::normal_distribution<double> eps(0.0, noise);
  Eigen::VectorXd Y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Y(i) = std::sin(2.0 * M_PI * X(i, 0)) + X.row(i).sum() + eps(rng);
  }
  return Y;
}

inline Dataset random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd X = random_design(rng, n, d);
  Eigen::VectorXd Y = wiggly_response(rng, X);
  return Dataset::make(std::move(X), std::move(Y));
}

// Dense S built entry by entry from the definition, no shared code path.
inline Eigen::MatrixXd dense_nw_smoother(const Eigen::MatrixXd& X, KernelFamily family,
                                         const Eigen::VectorXd& h) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = ((X.row(i) - X.row(j)).transpose().cwiseQuotient(h)).norm();
      S(i, j) = kernel_eval(family, u);
    }
    S.row(i) /= S.row(i).sum();
  }
  return S;
}

inline Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& A, int k) {
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  for (int j = 0; j < k; ++j) R = R * A;
  return R;
}

}  // namespace ibr::testing
