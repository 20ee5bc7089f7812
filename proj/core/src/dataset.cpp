#include "ibr/dataset.hpp"

#include "ibr/error.hpp"

#include <algorithm>
#include <numeric>

namespace ibr {

namespace {

bool any_duplicate_rows(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (X(a, j) != X(b, j)) return X(a, j) < X(b, j);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (X.row(order[i - 1]) == X.row(order[i])) return true;
  }
  return false;
}

}  // namespace

Dataset Dataset::make(Eigen::MatrixXd X, Eigen::VectorXd Y) {
  if (X.rows() < 1) throw InputError("dataset: need at least one observation");
  if (X.cols() < 1) throw InputError("dataset: need at least one covariate");
  if (Y.size() != X.rows()) {
    throw InputError("dataset: X has " + std::to_string(X.rows()) + " rows but Y has " +
                     std::to_string(Y.size()) + " entries");
  }
  if (!X.allFinite()) throw InputError("dataset: non-finite covariate value");
  if (!Y.allFinite()) throw InputError("dataset: non-finite response value");

  Dataset out;
  out.X_ = std::move(X);
  out.Y_ = std::move(Y);
  out.has_duplicates_ = any_duplicate_rows(out.X_);
  if (out.has_duplicates_) {
    out.warnings_.emplace_back(
        "dataset contains exactly duplicated design points; the unit eigenvalue of the "
        "smoother has raised multiplicity and interpolation is unreachable");
  }
  return out;
}

Dataset Dataset::design_only(Eigen::MatrixXd X) {
  Eigen::VectorXd Y = Eigen::VectorXd::Zero(X.rows());
  return make(std::move(X), std::move(Y));
}

Dataset Dataset::with_response(Eigen::VectorXd Y) const {
  if (Y.size() != n()) throw InputError("dataset: response length does not match design");
  if (!Y.allFinite()) throw InputError("dataset: non-finite response value");
  Dataset out = *this;
  out.Y_ = std::move(Y);
  return out;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), d());
  Eigen::VectorXd Y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    if (r < 0 || r >= n()) throw InputError("dataset: subset index out of range");
    X.row(static_cast<Eigen::Index>(i)) = X_.row(r);
    Y(static_cast<Eigen::Index>(i)) = Y_(r);
  }
  return make(std::move(X), std::move(Y));
}

}  // namespace ibr
