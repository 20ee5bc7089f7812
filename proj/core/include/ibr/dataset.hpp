#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ibr {

/// Regression sample: covariates X (n x d, one row per observation) and
/// responses Y (length n).
///
/// Construction through make() validates shapes and finiteness. Exact
/// duplicate rows are accepted but produce a warning, since they raise the
/// multiplicity of the unit eigenvalue of every kernel smoother and make
/// interpolation unreachable.
class Dataset {
public:
  Dataset() = default;

  static Dataset make(Eigen::MatrixXd X, Eigen::VectorXd Y);

  // Covariates only; responses are zero. Used by smoother constructors that
  // never look at Y.
  static Dataset design_only(Eigen::MatrixXd X);

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& Y() const { return Y_; }
  Eigen::Index n() const { return X_.rows(); }
  Eigen::Index d() const { return X_.cols(); }

  bool has_duplicate_rows() const { return has_duplicates_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Same design, new responses (validated for length and finiteness).
  Dataset with_response(Eigen::VectorXd Y) const;

  // Rows selected by index, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd Y_;
  bool has_duplicates_ = false;
  std::vector<std::string> warnings_;
};

}  // namespace ibr
