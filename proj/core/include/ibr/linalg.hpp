#pragma once

#include <Eigen/Dense>

namespace ibr {

/// Eigenpairs of a real symmetric matrix, eigenvalues sorted descending and
/// eigenvectors stored column-wise in matching order.
struct SymmetricSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  Eigen::Index size() const { return values.size(); }
  Eigen::MatrixXd reconstruct() const;
};

// Throws NumericalError if the solver does not converge.
SymmetricSpectrum symmetric_eigen(const Eigen::MatrixXd& A);

// Largest absolute asymmetry |A - A'|.
double asymmetry(const Eigen::MatrixXd& A);

}  // namespace ibr
