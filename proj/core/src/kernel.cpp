#include "ibr/kernel.hpp"

#include "ibr/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ibr {

namespace {

constexpr double kClampTol = 1e-10;

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::triangular: return "triangular";
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::epanechnikov: return "epanechnikov";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  for (auto f : {KernelFamily::gaussian, KernelFamily::triangular, KernelFamily::uniform,
                 KernelFamily::epanechnikov}) {
    if (name == to_string(f)) return f;
  }
  throw InputError("unknown kernel family '" + std::string(name) +
                   "' (expected gaussian, triangular, uniform or epanechnikov)");
}

bool is_positive_definite(KernelFamily family) {
  return family == KernelFamily::gaussian || family == KernelFamily::triangular;
}

double kernel_eval(KernelFamily family, double u) {
  if (!std::isfinite(u) || u < 0.0) {
    throw InputError("kernel_eval: argument must be finite and non-negative");
  }
  switch (family) {
    case KernelFamily::gaussian: return std::exp(-0.5 * u * u);
    case KernelFamily::triangular: return u < 1.0 ? 1.0 - u : 0.0;
    case KernelFamily::uniform: return u <= 1.0 ? 0.5 : 0.0;
    case KernelFamily::epanechnikov: return u < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

double kernel_at_zero(KernelFamily family) { return kernel_eval(family, 0.0); }

bool has_compact_support(KernelFamily family) { return family != KernelFamily::gaussian; }

Bandwidth::Bandwidth(Eigen::VectorXd h) : h_(std::move(h)) {
  if (h_.size() < 1) throw InputError("bandwidth: empty vector");
  for (Eigen::Index j = 0; j < h_.size(); ++j) {
    if (!std::isfinite(h_(j)) || h_(j) <= 0.0) {
      throw InputError("bandwidth: h[" + std::to_string(j) + "] must be finite and > 0");
    }
  }
}

double weighted_distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const Bandwidth& h) {
  if (x.size() != y.size() || x.size() != h.size()) {
    throw InputError("weighted_distance: dimension mismatch");
  }
  return (x - y).cwiseQuotient(h.values()).norm();
}

Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& X, KernelFamily family, const Bandwidth& h) {
  if (X.cols() != h.size()) throw InputError("kernel_gram: bandwidth length differs from d");
  const Eigen::Index n = X.rows();
  const Eigen::MatrixXd Z = X * h.values().cwiseInverse().asDiagonal();
  Eigen::MatrixXd K(n, n);
  const double k0 = kernel_at_zero(family);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = k0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = kernel_eval(family, (Z.row(i) - Z.row(j)).norm());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd KernelSmoother::smoother_matrix() const { return d_row.asDiagonal() * gram; }

Eigen::MatrixXd KernelSmoother::symmetric_matrix() const {
  const Eigen::VectorXd s = d_row.cwiseSqrt();
  return s.asDiagonal() * gram * s.asDiagonal();
}

Eigen::VectorXd KernelSmoother::kernel_weights_at(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != design.cols()) throw InputError("kernel smoother: point dimension mismatch");
  if (!x.allFinite()) throw InputError("kernel smoother: non-finite evaluation point");
  Eigen::VectorXd w(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    w(i) = kernel_eval(family, weighted_distance(x, design.row(i).transpose(), h));
  }
  return w;
}

Eigen::VectorXd KernelSmoother::weights_at(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd w = kernel_weights_at(x);
  const double total = w.sum();
  if (!(total > 0.0)) {
    throw ExtrapolationError("kernel smoother: no design point within the support of the " +
                             std::string(to_string(family)) + " kernel at this location");
  }
  return w / total;
}

KernelSmoother build_kernel_smoother(const Dataset& data, KernelFamily family, const Bandwidth& h) {
  if (h.size() != data.d()) {
    throw InputError("build_kernel_smoother: " + std::to_string(h.size()) + " bandwidths for " +
                     std::to_string(data.d()) + " covariates");
  }
  KernelSmoother sm;
  sm.family = family;
  sm.h = h;
  sm.design = data.X();
  sm.gram = kernel_gram(data.X(), family, h);
  sm.warnings = data.warnings();

  const Eigen::VectorXd row_sums = sm.gram.rowwise().sum();
  for (Eigen::Index i = 0; i < row_sums.size(); ++i) {
    if (!(row_sums(i) > 0.0) || !std::isfinite(row_sums(i))) {
      throw NumericalError("build_kernel_smoother: row " + std::to_string(i) +
                           " of the Gram matrix has non-positive sum");
    }
  }
  sm.d_row = row_sums.cwiseInverse();
  sm.spectrum = symmetric_eigen(sm.symmetric_matrix());

  Eigen::VectorXd& lam = sm.spectrum.values;
  double worst_low = 0.0;
  double worst_high = 1.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lam(j) > 1.0) {
      if (lam(j) <= 1.0 + kClampTol) {
        lam(j) = 1.0;
      } else {
        worst_high = std::max(worst_high, lam(j));
      }
    } else if (lam(j) < 0.0) {
      if (lam(j) >= -kClampTol) {
        lam(j) = 0.0;
      } else {
        worst_low = std::min(worst_low, lam(j));
      }
    }
  }
  if (worst_low < 0.0) {
    std::ostringstream msg;
    msg << "smoother has negative eigenvalue " << worst_low << " (" << to_string(family)
        << " kernel is not positive definite on this design)";
    sm.warnings.push_back(msg.str());
  }
  if (worst_high > 1.0) {
    std::ostringstream msg;
    msg << "smoother has eigenvalue " << worst_high << " above one";
    sm.warnings.push_back(msg.str());
  }
  return sm;
}

double kernel_trace_1d(const Eigen::VectorXd& x_col, KernelFamily family, double h) {
  const Eigen::Index n = x_col.size();
  const double k0 = kernel_at_zero(family);
  Eigen::VectorXd row_sums = Eigen::VectorXd::Constant(n, k0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = kernel_eval(family, std::abs(x_col(i) - x_col(j)) / h);
      row_sums(i) += v;
      row_sums(j) += v;
    }
  }
  return (k0 * row_sums.cwiseInverse()).sum();
}

double bandwidth_for_df(const Eigen::VectorXd& x_col, KernelFamily family, double target_df) {
  const Eigen::Index n = x_col.size();
  if (n < 2) throw InputError("bandwidth_for_df: need at least two observations");
  if (!x_col.allFinite()) throw InputError("bandwidth_for_df: non-finite covariate value");
  if (!(target_df > 1.0) || !(target_df < static_cast<double>(n))) {
    throw CalibrationError("bandwidth_for_df: target df " + std::to_string(target_df) +
                           " must lie strictly between 1 and n=" + std::to_string(n));
  }
  const double range = x_col.maxCoeff() - x_col.minCoeff();
  if (!(range > 0.0)) {
    throw CalibrationError("bandwidth_for_df: covariate has a single distinct value");
  }

  // trace(S_h) is nonincreasing in h.
  auto trace = [&](double log_h) { return kernel_trace_1d(x_col, family, std::exp(log_h)); };
  double lo = std::log(1e-6 * range);
  double hi = std::log(1e6 * range);
  double t_lo = trace(lo);
  double t_hi = trace(hi);
  for (int expand = 0; expand < 5 && !(t_lo >= target_df && t_hi <= target_df); ++expand) {
    if (t_lo < target_df) {
      lo -= std::log(10.0);
      t_lo = trace(lo);
    }
    if (t_hi > target_df) {
      hi += std::log(10.0);
      t_hi = trace(hi);
    }
  }
  if (t_lo < target_df || t_hi > target_df) {
    std::ostringstream msg;
    msg << "bandwidth_for_df: target df " << target_df << " unreachable; attainable range is ["
        << t_hi << ", " << t_lo << "]";
    throw CalibrationError(msg.str());
  }

  constexpr double kDfTol = 1e-9;
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double t = trace(mid);
    if (std::abs(t - target_df) <= kDfTol) return std::exp(mid);
    if (t > target_df) {
      lo = mid;
      t_lo = t;
    } else {
      hi = mid;
      t_hi = t;
    }
  }
  // Discontinuous trace (uniform kernel): closest side of the jump.
  return std::abs(t_lo - target_df) <= std::abs(t_hi - target_df) ? std::exp(lo) : std::exp(hi);
}

Bandwidth default_bandwidths(const Dataset& data, KernelFamily family, double per_var_df) {
  Eigen::VectorXd h(data.d());
  for (Eigen::Index j = 0; j < data.d(); ++j) {
    try {
      h(j) = bandwidth_for_df(data.X().col(j), family, per_var_df);
    } catch (const CalibrationError& e) {
      throw CalibrationError("column " + std::to_string(j) + ": " + e.what());
    }
  }
  return Bandwidth(std::move(h));
}

}  // namespace ibr
