#pragma once

#include "ibr/dataset.hpp"
#include "ibr/engine.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ibr {

// Wendelberger's bivariate test surface, evaluated term by term
// (including the + sign inside the second exponential).
double wendelberger(double x, double y);

struct TestFunction {
  std::string name;
  int d = 0;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> eval;
  double lower = 0.0;  // every coordinate shares the same interval
  double upper = 1.0;
};

/// Simulation test functions on (1, 2)^d:
///   product3, sincos3, product5, sincos5, product7, sincos7
/// plus "wendelberger" on (0, 1)^2. Throws InputError for other names.
TestFunction sim_function(std::string_view name);
std::vector<std::string> sim_function_names();

enum class Method { ibr_kernel, ibr_tps, tps_gcv };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct SimConfig {
  TestFunction function;
  Eigen::Index n = 200;
  int reps = 100;
  double noise_ratio = 0.1;  // sd(noise) / sd(m(X))
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::ibr_kernel, Method::ibr_tps, Method::tps_gcv};
  KernelFamily kernel = KernelFamily::gaussian;
  double df_per_var = 1.1;
  double tps_df_mult = 1.5;
  bool auto_extend = false;  // forwarded to fit_ibr for both IBR methods
  int threads = 1;
};

struct Sample {
  Dataset data;
  Eigen::VectorXd truth;  // m(X_i)
};

// Independent, reproducible stream for replicate `index` of run `seed`.
std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index);

/// X i.i.d. uniform on the function's domain and Y = m(X) + eps with
/// eps ~ N(0, (noise_ratio * sd(m(X)))^2), sd over the drawn sample.
Sample generate_sample(const SimConfig& cfg, int rep_index);

// Responses on a fixed design, noise sd = noise_ratio * sd(m(X)).
Sample sample_on_design(const TestFunction& f, const Eigen::MatrixXd& X, double noise_ratio,
                        std::mt19937_64& rng);

// {0.05, 0.15, ..., 0.95}^2, 100 points, first coordinate varying slowest.
Eigen::MatrixXd unit_square_grid(int per_side = 10);

double mse_against_truth(const Eigen::VectorXd& fitted, const Eigen::VectorXd& truth);

struct TpsGcvResult {
  double lambda = 0.0;
  double df = 0.0;
  Eigen::VectorXd fitted;
};

/// Plain thin-plate spline with lambda minimizing GCV over 40 geometric
/// points spanning df from M0 + 0.5 to n - 1.
TpsGcvResult tps_gcv_fit(const TpsBasis& basis, const Eigen::VectorXd& Y);

struct SimResult {
  std::vector<Method> methods;
  Eigen::MatrixXd mse;                       // reps x methods, NaN = missing cell
  std::vector<std::vector<std::int64_t>> k_hat;  // [rep][method], 0 where not applicable
  std::vector<std::string> notes;
  std::vector<double> medians;               // per method, NaN if all missing
  std::vector<double> ratios;                // median / median(ibr-kernel)
};

/// Per replicate: draw a sample, fit every method, record MSE against the
/// noiseless truth. Infeasible methods become missing cells with a note.
SimResult run_simulation(const SimConfig& cfg);

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

/// Comma-separated file with a header row. Surrounding double quotes are
/// stripped; a leading column with an empty name (R row names) is dropped.
/// Throws SchemaError.
CsvTable read_csv(const std::filesystem::path& path);

// Dataset with `response` as Y (by header name) and every other column as X.
Dataset dataset_from_table(const CsvTable& table, const std::string& response);

// Boston housing: 13 covariates plus medv. Throws SchemaError.
Dataset load_boston(const std::filesystem::path& path);

struct BostonSplit {
  std::uint64_t index = 0;
  Eigen::Index train_size = 0;
  Eigen::Index test_size = 0;
  double mpse = 0.0;  // NaN if the fit failed
  std::int64_t k_hat = 0;
  std::string error;
};

struct BostonSummary {
  std::vector<BostonSplit> splits;
  double mean_mpse = 0.0;
  double median_k_hat = 0.0;
  int failed = 0;
};

struct BostonConfig {
  int splits = 30;
  std::uint64_t seed = 1;
  Eigen::Index train_size = 350;
  double df_per_var = 1.1;
  bool log_response = false;
  int threads = 1;
};

/// Random train/test splits; gaussian-kernel IBR with GCV stopping on the
/// training part, mean squared prediction error on the test part.
BostonSummary boston_study(const Dataset& data, const BostonConfig& cfg);

// Runs body(i) for i in [0, count) on up to `threads` threads.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

double median(std::vector<double> values);

}  // namespace ibr
