#pragma once

#include "ibr/dataset.hpp"
#include "ibr/kernel.hpp"
#include "ibr/tps.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ibr {

/// Spectral form of a base smoother S = D^{1/2} P diag(lambdas) P' D^{-1/2}.
/// For symmetric smoothers (thin-plate splines) d_row is all ones.
struct BaseSpectrum {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd P;
  Eigen::VectorXd d_row;

  Eigen::Index n() const { return lambdas.size(); }

  static BaseSpectrum from_kernel(const KernelSmoother& sm);
  static BaseSpectrum from_tps(const TpsSmoother& sm);

  // Eigenvalues outside [-1e-8, 1 + 1e-8] make the iteration diverge. Throws
  // DivergenceError unless allow_divergent is set.
  void validate(bool allow_divergent = false) const;

  // Dense S, for oracles and diagnostics.
  Eigen::MatrixXd smoother_matrix() const;
  bool is_divergent() const;
};

/// Tolerance below which an eigenvalue is treated as zero in the geometric sum.
inline constexpr double kLambdaEps = 1e-12;

// (1 - lambda)^k, via exp(k log1p(-lambda)) when 1 - lambda > 0.
double one_minus_pow(double lambda, std::int64_t k);

/// m_k = [I - (I - S)^k] Y through the eigenbasis. O(n^2).
Eigen::VectorXd fitted_at_k(const BaseSpectrum& spec, const Eigen::VectorXd& Y, std::int64_t k);

/// m_1 = S Y, then m_{j+1} = m_j + S (Y - m_j), k-1 times. The dense oracle for
/// fitted_at_k.
Eigen::VectorXd iterate_naive(const Eigen::MatrixXd& S, const Eigen::VectorXd& Y, std::int64_t k);

/// b_k = -S (I - S)^k Y, the bias estimate subtracted at step k.
Eigen::VectorXd bias_at_k(const BaseSpectrum& spec, const Eigen::VectorXd& Y, std::int64_t k);

/// beta_k = [I + (I - S) + ... + (I - S)^{k-1}] Y, so that m_k = S beta_k and
/// m_k(x) = S(x)' beta_k.
Eigen::VectorXd beta_at_k(const BaseSpectrum& spec, const Eigen::VectorXd& Y, std::int64_t k);

/// log(rss / n) - 2 log(1 - df / n). Throws NumericalError when df >= n or
/// rss == 0, InputError on negative inputs.
double gcv_score(double rss, double df, std::int64_t n);

/// {1, ..., 10} together with ceil(10 * 1.2^i), capped at max_k (which is
/// always included as the last point). Strictly increasing.
std::vector<std::int64_t> default_grid(std::int64_t max_k);

// Grid cap: 1e5, or min(1e5, floor(n^(2 nu0 / d))) for thin-plate bases.
std::int64_t default_grid_cap(std::int64_t n, std::optional<int> tps_nu0 = std::nullopt,
                              int d = 1);

struct IbrPath {
  std::vector<std::int64_t> ks;
  std::vector<double> df;
  std::vector<double> rss;
  std::vector<double> sigma2;
  std::vector<double> gcv;  // NaN where invalid
  std::vector<double> bias_norm;
  std::vector<bool> valid;

  std::size_t size() const { return ks.size(); }
};

/// Evaluates df, rss, sigma^2 = rss/n, GCV and ||b_k|| at each grid point.
/// Grid points with undefined GCV are marked invalid rather than aborting.
IbrPath run_path(const BaseSpectrum& spec, const Eigen::VectorXd& Y,
                 const std::vector<std::int64_t>& grid);

struct Selection {
  std::int64_t k = 1;
  std::size_t index = 0;
  bool at_boundary = false;
  std::vector<std::string> warnings;
};

/// Smallest k attaining the minimal valid GCV. Warns when that is the last
/// grid point. Throws NumericalError when no grid point is valid.
Selection select_k_gcv(const IbrPath& path);

struct KernelRequest {
  KernelFamily family = KernelFamily::gaussian;
  double df_per_var = 1.1;
  std::optional<Bandwidth> bandwidth;  // overrides df_per_var calibration
};

struct TpsRequest {
  std::optional<int> nu0;  // default floor(d/2) + 1
  double df_mult = 1.5;
  std::optional<double> lambda0;  // overrides df_mult calibration
};

using BaseRequest = std::variant<KernelRequest, TpsRequest>;

struct FitOptions {
  std::optional<std::vector<std::int64_t>> grid;
  std::optional<std::int64_t> grid_max;
  bool allow_nonpd = false;
  // Extend the grid once (cap x 10) when GCV selects its last point.
  bool auto_extend = false;
};

struct KernelBaseInfo {
  KernelFamily family = KernelFamily::gaussian;
  Bandwidth h;
};

struct TpsBaseInfo {
  int nu0 = 2;
  double lambda0 = 1.0;
  std::int64_t null_dim = 0;
};

using BaseInfo = std::variant<KernelBaseInfo, TpsBaseInfo>;

struct IbrFit {
  std::int64_t k_hat = 1;
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  IbrPath path;
  BaseInfo base;
  double pilot_df = 0.0;
  std::vector<std::string> warnings;
  // Kept so that thin-plate predictions do not rebuild the basis.
  std::shared_ptr<const TpsBasis> tps_basis;
};

struct BaseSmoother {
  BaseSpectrum spectrum;
  BaseInfo info;
  std::shared_ptr<const TpsBasis> tps_basis;
  std::vector<std::string> warnings;
};

// Builds and calibrates the pilot smoother described by the request.
BaseSmoother build_base(const Dataset& data, const BaseRequest& request);

/// Pilot smoother, GCV path, selected k and coefficient vector.
/// Non-positive-definite kernel families are refused with DivergenceError
/// unless options.allow_nonpd is set.
IbrFit fit_ibr(const Dataset& data, const BaseRequest& request, const FitOptions& options = {});

// As fit_ibr, on an already constructed base smoother.
IbrFit fit_ibr(const Dataset& data, const BaseSmoother& base, const FitOptions& options = {});

/// Evaluates m_k(x) = S(x)' beta_k for a fitted model. Build once, query many.
class Predictor {
public:
  Predictor(const IbrFit& fit, const Dataset& data);
  // Rebuilds from the base description alone (as read from a model file).
  Predictor(BaseInfo base, Eigen::VectorXd beta, const Dataset& data);

  // Throws ExtrapolationError for compact kernels far from the data.
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::Index d() const { return design_.cols(); }

private:
  void init(const Dataset& data, std::shared_ptr<const TpsBasis> tps_basis);

  BaseInfo base_;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd design_;
  std::shared_ptr<const TpsBasis> tps_basis_;
  TpsBasis::Coefficients tps_coef_;
};

double predict(const IbrFit& fit, const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace ibr
