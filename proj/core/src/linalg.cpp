#include "ibr/linalg.hpp"

#include "ibr/error.hpp"

#include <sstream>

namespace ibr {

Eigen::MatrixXd SymmetricSpectrum::reconstruct() const {
  return vectors * values.asDiagonal() * vectors.transpose();
}

SymmetricSpectrum symmetric_eigen(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw InputError("symmetric_eigen: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "symmetric eigendecomposition failed (n=" << A.rows()
        << ", max|A|=" << A.cwiseAbs().maxCoeff() << ", asymmetry=" << asymmetry(A) << ")";
    throw NumericalError(msg.str());
  }
  // Eigen sorts ascending; flip to descending.
  SymmetricSpectrum out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

double asymmetry(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  return (A - A.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace ibr
