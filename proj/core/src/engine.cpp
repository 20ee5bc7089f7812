#include "ibr/engine.hpp"

#include "ibr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ibr {

namespace {

constexpr double kDivergenceTol = 1e-8;
constexpr std::int64_t kGridHardCap = 100000;

void check_k(std::int64_t k) {
  if (k < 1) throw InputError("iteration count k must be >= 1, got " + std::to_string(k));
}

void check_response(const BaseSpectrum& spec, const Eigen::VectorXd& Y) {
  if (Y.size() != spec.n()) throw InputError("response length does not match the smoother");
}

// 1 - (1 - lambda)^k without cancellation for small lambda.
double one_minus_power_complement(double lambda, std::int64_t k) {
  if (lambda < 1.0) return -std::expm1(static_cast<double>(k) * std::log1p(-lambda));
  return 1.0 - one_minus_pow(lambda, k);
}

// Coordinates of D^{-1/2} Y in the eigenbasis.
Eigen::VectorXd eigen_coords(const BaseSpectrum& spec, const Eigen::VectorXd& Y) {
  return spec.P.transpose() * Y.cwiseQuotient(spec.d_row.cwiseSqrt());
}

// D^{1/2} P w
Eigen::VectorXd from_coords(const BaseSpectrum& spec, const Eigen::VectorXd& w) {
  return (spec.P * w).cwiseProduct(spec.d_row.cwiseSqrt());
}

void refuse_nonpd(KernelFamily family) {
  throw DivergenceError(
      "the " + std::string(to_string(family)) +
      " kernel is not positive definite: its smoother acquires negative eigenvalues and "
      "iterative bias reduction diverges (set allow_nonpd / --allow-nonpd to override)");
}

}  // namespace

BaseSpectrum BaseSpectrum::from_kernel(const KernelSmoother& sm) {
  return BaseSpectrum{sm.spectrum.values, sm.spectrum.vectors, sm.d_row};
}

BaseSpectrum BaseSpectrum::from_tps(const TpsSmoother& sm) {
  return BaseSpectrum{sm.spectrum.values, sm.spectrum.vectors,
                      Eigen::VectorXd::Ones(sm.spectrum.size())};
}

bool BaseSpectrum::is_divergent() const {
  return lambdas.size() > 0 &&
         (lambdas.minCoeff() < -kDivergenceTol || lambdas.maxCoeff() > 1.0 + kDivergenceTol);
}

void BaseSpectrum::validate(bool allow_divergent) const {
  if (P.rows() != n() || P.cols() != n() || d_row.size() != n()) {
    throw InputError("base spectrum: inconsistent shapes");
  }
  if ((d_row.array() <= 0.0).any()) throw InputError("base spectrum: non-positive normalizer");
  if (is_divergent() && !allow_divergent) {
    std::ostringstream msg;
    msg << "base smoother eigenvalues span [" << lambdas.minCoeff() << ", " << lambdas.maxCoeff()
        << "], outside [0, 1]: the bias-reduction iteration diverges";
    throw DivergenceError(msg.str());
  }
}

Eigen::MatrixXd BaseSpectrum::smoother_matrix() const {
  const Eigen::VectorXd s = d_row.cwiseSqrt();
  return s.asDiagonal() * P * lambdas.asDiagonal() * P.transpose() * s.cwiseInverse().asDiagonal();
}

double one_minus_pow(double lambda, std::int64_t k) {
  const double base = 1.0 - lambda;
  if (base > 0.0) return std::exp(static_cast<double>(k) * std::log1p(-lambda));
  if (base == 0.0) return 0.0;
  return std::pow(base, static_cast<double>(k));
}

Eigen::VectorXd fitted_at_k(const BaseSpectrum& spec, const Eigen::VectorXd& Y, std::int64_t k) {
  check_k(k);
  check_response(spec, Y);
  Eigen::VectorXd w = eigen_coords(spec, Y);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    w(j) *= one_minus_power_complement(spec.lambdas(j), k);
  }
  return from_coords(spec, w);
}

Eigen::VectorXd iterate_naive(const Eigen::MatrixXd& S, const Eigen::VectorXd& Y, std::int64_t k) {
  check_k(k);
  if (S.rows() != S.cols() || S.rows() != Y.size()) {
    throw InputError("iterate_naive: shape mismatch");
  }
  Eigen::VectorXd m = S * Y;
  for (std::int64_t j = 1; j < k; ++j) m += S * (Y - m);
  return m;
}

Eigen::VectorXd bias_at_k(const BaseSpectrum& spec, const Eigen::VectorXd& Y, std::int64_t k) {
  check_k(k);
  check_response(spec, Y);
  Eigen::VectorXd w = eigen_coords(spec, Y);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double lam = spec.lambdas(j);
    w(j) *= -lam * one_minus_pow(lam, k);
  }
  return from_coords(spec, w);
}

Eigen::VectorXd beta_at_k(const BaseSpectrum& spec, const Eigen::VectorXd& Y, std::int64_t k) {
  check_k(k);
  check_response(spec, Y);
  Eigen::VectorXd w = eigen_coords(spec, Y);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double lam = spec.lambdas(j);
    const double g = std::abs(lam) > kLambdaEps ? one_minus_power_complement(lam, k) / lam
                                                : static_cast<double>(k);
    w(j) *= g;
  }
  return from_coords(spec, w);
}

double gcv_score(double rss, double df, std::int64_t n) {
  if (n < 1) throw InputError("gcv_score: n must be positive");
  if (!(rss >= 0.0) || !std::isfinite(rss)) throw InputError("gcv_score: rss must be >= 0");
  if (!std::isfinite(df) || df < 0.0) throw InputError("gcv_score: df must be >= 0");
  const double nd = static_cast<double>(n);
  if (df >= nd) throw NumericalError("gcv_score: undefined at df >= n (interpolation)");
  if (rss == 0.0) throw NumericalError("gcv_score: zero residual sum of squares");
  return std::log(rss / nd) - 2.0 * std::log1p(-df / nd);
}

std::vector<std::int64_t> default_grid(std::int64_t max_k) {
  if (max_k < 1) throw InputError("iteration grid cap must be >= 1");
  std::vector<std::int64_t> grid;
  for (std::int64_t k = 1; k <= std::min<std::int64_t>(10, max_k); ++k) grid.push_back(k);
  for (int i = 1;; ++i) {
    const double v = std::ceil(10.0 * std::pow(1.2, i));
    if (v > static_cast<double>(max_k)) break;
    const auto k = static_cast<std::int64_t>(v);
    if (k > grid.back()) grid.push_back(k);
  }
  if (grid.back() != max_k) grid.push_back(max_k);
  return grid;
}

std::int64_t default_grid_cap(std::int64_t n, std::optional<int> tps_nu0, int d) {
  if (!tps_nu0) return kGridHardCap;
  const double cap = std::floor(std::pow(static_cast<double>(n), 2.0 * *tps_nu0 / d));
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::min(cap, 1e5)));
}

IbrPath run_path(const BaseSpectrum& spec, const Eigen::VectorXd& Y,
                 const std::vector<std::int64_t>& grid) {
  check_response(spec, Y);
  if (grid.empty()) throw InputError("run_path: empty iteration grid");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    check_k(grid[g]);
    if (g > 0 && grid[g] <= grid[g - 1]) throw InputError("run_path: grid must be increasing");
  }
  const Eigen::Index n = spec.n();
  const auto G = static_cast<Eigen::Index>(grid.size());
  const Eigen::VectorXd z = eigen_coords(spec, Y);

  IbrPath path;
  path.ks = grid;
  path.df.resize(grid.size());
  path.rss.resize(grid.size());
  path.sigma2.resize(grid.size());
  path.gcv.resize(grid.size());
  path.bias_norm.resize(grid.size());
  path.valid.resize(grid.size());

  // Residuals Y - m_k = D^{1/2} P (1 - Lambda)^k z and biases, all grid points at once.
  Eigen::MatrixXd resid_coords(n, G);
  Eigen::MatrixXd bias_coords(n, G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const std::int64_t k = grid[static_cast<std::size_t>(g)];
    double df = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double lam = spec.lambdas(j);
      const double p = one_minus_pow(lam, k);
      df += one_minus_power_complement(lam, k);
      resid_coords(j, g) = p * z(j);
      bias_coords(j, g) = -lam * p * z(j);
    }
    path.df[static_cast<std::size_t>(g)] = df;
  }
  const Eigen::VectorXd s = spec.d_row.cwiseSqrt();
  const Eigen::MatrixXd resid = s.asDiagonal() * (spec.P * resid_coords);
  const Eigen::MatrixXd bias = s.asDiagonal() * (spec.P * bias_coords);

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto col = static_cast<Eigen::Index>(g);
    path.rss[g] = resid.col(col).squaredNorm();
    path.sigma2[g] = path.rss[g] / static_cast<double>(n);
    path.bias_norm[g] = bias.col(col).norm();
    try {
      path.gcv[g] = gcv_score(path.rss[g], std::max(0.0, path.df[g]), n);
      path.valid[g] = std::isfinite(path.gcv[g]);
    } catch (const Error&) {
      path.gcv[g] = std::numeric_limits<double>::quiet_NaN();
      path.valid[g] = false;
    }
  }
  return path;
}

Selection select_k_gcv(const IbrPath& path) {
  Selection sel;
  bool found = false;
  double best = 0.0;
  for (std::size_t g = 0; g < path.size(); ++g) {
    if (!path.valid[g]) continue;
    if (!found || path.gcv[g] < best) {
      best = path.gcv[g];
      sel.index = g;
      found = true;
    }
  }
  if (!found) throw NumericalError("select_k_gcv: no valid grid point on the GCV path");
  sel.k = path.ks[sel.index];
  sel.at_boundary = sel.index + 1 == path.size();
  if (sel.at_boundary) {
    sel.warnings.push_back("GCV minimum at the last grid point k=" + std::to_string(sel.k) +
                           "; the iteration grid is likely too short");
  }
  return sel;
}

BaseSmoother build_base(const Dataset& data, const BaseRequest& request) {
  BaseSmoother base;
  if (const auto* kr = std::get_if<KernelRequest>(&request)) {
    const Bandwidth h =
        kr->bandwidth ? *kr->bandwidth : default_bandwidths(data, kr->family, kr->df_per_var);
    const KernelSmoother sm = build_kernel_smoother(data, kr->family, h);
    base.spectrum = BaseSpectrum::from_kernel(sm);
    base.info = KernelBaseInfo{kr->family, h};
    base.warnings = sm.warnings;
  } else {
    const auto& tr = std::get<TpsRequest>(request);
    const int d = static_cast<int>(data.d());
    const int nu0 = tr.nu0.value_or(default_nu0(d));
    auto basis = TpsBasis::build(data.X(), nu0);
    const double lambda0 = tr.lambda0 ? *tr.lambda0
                                      : lambda_for_df(*basis, tr.df_mult * basis->null_dim());
    const TpsSmoother sm = make_tps_smoother(basis, lambda0);
    base.spectrum = BaseSpectrum::from_tps(sm);
    base.info = TpsBaseInfo{nu0, lambda0, basis->null_dim()};
    base.warnings = data.warnings();
    base.warnings.insert(base.warnings.end(), basis->warnings().begin(), basis->warnings().end());
    base.tps_basis = std::move(basis);
  }
  return base;
}

IbrFit fit_ibr(const Dataset& data, const BaseRequest& request, const FitOptions& options) {
  if (const auto* kr = std::get_if<KernelRequest>(&request)) {
    if (!is_positive_definite(kr->family) && !options.allow_nonpd) refuse_nonpd(kr->family);
  }
  return fit_ibr(data, build_base(data, request), options);
}

IbrFit fit_ibr(const Dataset& data, const BaseSmoother& base, const FitOptions& options) {
  if (data.n() < 2) throw InputError("fit_ibr: need at least two observations");
  if (base.spectrum.n() != data.n()) throw InputError("fit_ibr: smoother size differs from data");
  const auto* kinfo = std::get_if<KernelBaseInfo>(&base.info);
  if (kinfo && !is_positive_definite(kinfo->family) && !options.allow_nonpd) {
    refuse_nonpd(kinfo->family);
  }
  base.spectrum.validate(options.allow_nonpd);

  IbrFit fit;
  fit.base = base.info;
  fit.tps_basis = base.tps_basis;
  fit.warnings = base.warnings;
  if (base.spectrum.is_divergent()) {
    fit.warnings.push_back(
        "base smoother has eigenvalues outside [0, 1]; the iterates diverge as k grows");
  }
  fit.pilot_df = base.spectrum.lambdas.sum();

  std::vector<std::int64_t> grid;
  if (options.grid) {
    grid = *options.grid;
  } else {
    std::int64_t cap = options.grid_max.value_or(0);
    if (cap == 0) {
      const auto* tinfo = std::get_if<TpsBaseInfo>(&base.info);
      cap = tinfo ? default_grid_cap(data.n(), tinfo->nu0, static_cast<int>(data.d()))
                  : default_grid_cap(data.n());
    }
    grid = default_grid(cap);
  }

  const Eigen::VectorXd& Y = data.Y();
  fit.path = run_path(base.spectrum, Y, grid);
  const bool exact = std::all_of(fit.path.rss.begin(), fit.path.rss.end(),
                                 [](double r) { return r == 0.0; });
  if (exact) {
    // GCV is undefined when every iterate reproduces Y; the pilot already does.
    fit.warnings.push_back("response reproduced exactly at every grid point; keeping the first");
    fit.path.valid.assign(fit.path.size(), false);
    fit.k_hat = fit.path.ks.front();
    fit.beta = beta_at_k(base.spectrum, Y, fit.k_hat);
    fit.fitted = fitted_at_k(base.spectrum, Y, fit.k_hat);
    return fit;
  }
  Selection sel = select_k_gcv(fit.path);
  if (sel.at_boundary && options.auto_extend && !options.grid) {
    fit.warnings.push_back("extending the iteration grid tenfold after a boundary selection");
    fit.path = run_path(base.spectrum, Y, default_grid(grid.back() * 10));
    sel = select_k_gcv(fit.path);
  }
  fit.warnings.insert(fit.warnings.end(), sel.warnings.begin(), sel.warnings.end());
  fit.k_hat = sel.k;
  fit.beta = beta_at_k(base.spectrum, Y, fit.k_hat);
  fit.fitted = fitted_at_k(base.spectrum, Y, fit.k_hat);
  return fit;
}

Predictor::Predictor(const IbrFit& fit, const Dataset& data) : base_(fit.base), beta_(fit.beta) {
  init(data, fit.tps_basis);
}

Predictor::Predictor(BaseInfo base, Eigen::VectorXd beta, const Dataset& data)
    : base_(std::move(base)), beta_(std::move(beta)) {
  init(data, nullptr);
}

void Predictor::init(const Dataset& data, std::shared_ptr<const TpsBasis> tps_basis) {
  if (beta_.size() != data.n()) {
    throw InputError("predictor: coefficient vector length " + std::to_string(beta_.size()) +
                     " differs from the training sample size " + std::to_string(data.n()));
  }
  design_ = data.X();
  if (const auto* k = std::get_if<KernelBaseInfo>(&base_)) {
    if (k->h.size() != data.d()) throw InputError("predictor: bandwidth length differs from d");
    return;
  }
  const auto& t = std::get<TpsBaseInfo>(base_);
  if (!tps_basis || tps_basis->n() != data.n() || tps_basis->design() != data.X()) {
    tps_basis = TpsBasis::build(data.X(), t.nu0);
  }
  tps_basis_ = std::move(tps_basis);
  tps_coef_ = tps_basis_->coefficients(beta_, t.lambda0);
}

double Predictor::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != design_.cols()) {
    throw InputError("predict: point has " + std::to_string(x.size()) + " coordinates, model has " +
                     std::to_string(design_.cols()));
  }
  if (!x.allFinite()) throw InputError("predict: non-finite evaluation point");
  if (const auto* k = std::get_if<KernelBaseInfo>(&base_)) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < design_.rows(); ++i) {
      const double w =
          kernel_eval(k->family, weighted_distance(x, design_.row(i).transpose(), k->h));
      num += w * beta_(i);
      den += w;
    }
    if (!(den > 0.0)) {
      throw ExtrapolationError("predict: no training point within the support of the " +
                               std::string(to_string(k->family)) + " kernel");
    }
    return num / den;
  }
  return tps_basis_->evaluate(tps_coef_, x);
}

double predict(const IbrFit& fit, const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return Predictor(fit, data)(x);
}

}  // namespace ibr
