#include "ibr/harness.hpp"

#include "ibr/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

namespace ibr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double product_of(const Eigen::Ref<const Eigen::VectorXd>& x, int from, int to) {
  double p = 1.0;
  for (int j = from; j <= to; ++j) p *= x(j);
  return p;
}

// sin(2 pi (x_1..x_a)^(1/a)) + cos(2 pi (x_b..x_d)^(1/a)), 0-based inclusive ranges.
TestFunction sincos(std::string name, int d, int group) {
  TestFunction f;
  f.name = std::move(name);
  f.d = d;
  f.lower = 1.0;
  f.upper = 2.0;
  f.eval = [d, group](const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double inv = 1.0 / group;
    return std::sin(kTwoPi * std::pow(product_of(x, 0, group - 1), inv)) +
           std::cos(kTwoPi * std::pow(product_of(x, d - group, d - 1), inv));
  };
  return f;
}

TestFunction product(std::string name, int d) {
  TestFunction f;
  f.name = std::move(name);
  f.d = d;
  f.lower = 1.0;
  f.upper = 2.0;
  f.eval = [d](const Eigen::Ref<const Eigen::VectorXd>& x) { return product_of(x, 0, d - 1); };
  return f;
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

double wendelberger(double x, double y) {
  const double a = 9.0 * x;
  const double b = 9.0 * y;
  return 0.75 * std::exp(-((a - 2.0) * (a - 2.0) + (b - 2.0) * (b - 2.0)) / 4.0) +
         0.75 * std::exp(-(a + 1.0) * (a + 1.0) / 49.0 + (b + 1.0) * (b + 1.0) / 10.0) +
         0.5 * std::exp(-((a - 7.0) * (a - 7.0) + (b - 3.0) * (b - 3.0)) / 4.0) -
         0.2 * std::exp(-(a - 4.0) * (a - 4.0) - (b - 7.0) * (b - 7.0));
}

std::vector<std::string> sim_function_names() {
  return {"product3", "sincos3", "product5", "sincos5", "product7", "sincos7", "wendelberger"};
}

TestFunction sim_function(std::string_view name) {
  if (name == "product3") return product("product3", 3);
  if (name == "product5") return product("product5", 5);
  if (name == "product7") return product("product7", 7);
  if (name == "sincos3") return sincos("sincos3", 3, 2);
  if (name == "sincos5") return sincos("sincos5", 5, 3);
  if (name == "sincos7") return sincos("sincos7", 7, 4);
  if (name == "wendelberger") {
    TestFunction f;
    f.name = "wendelberger";
    f.d = 2;
    f.eval = [](const Eigen::Ref<const Eigen::VectorXd>& x) { return wendelberger(x(0), x(1)); };
    return f;
  }
  throw InputError("unknown test function '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ibr_kernel: return "ibr-kernel";
    case Method::ibr_tps: return "ibr-tps";
    case Method::tps_gcv: return "tps-gcv";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::ibr_kernel, Method::ibr_tps, Method::tps_gcv}) {
    if (name == to_string(m)) return m;
  }
  throw InputError("unknown method '" + std::string(name) +
                   "' (expected ibr-kernel, ibr-tps or tps-gcv)");
}

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Sample sample_on_design(const TestFunction& f, const Eigen::MatrixXd& X, double noise_ratio,
                        std::mt19937_64& rng) {
  if (X.cols() != f.d) throw InputError("sample_on_design: design dimension differs from function");
  if (!(noise_ratio >= 0.0)) throw InputError("sample_on_design: noise ratio must be >= 0");
  Eigen::VectorXd truth(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) truth(i) = f.eval(X.row(i).transpose());
  Eigen::VectorXd Y = truth;
  const double sigma = noise_ratio * sample_sd(truth);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) += noise(rng);
  }
  return Sample{Dataset::make(X, std::move(Y)), std::move(truth)};
}

Sample generate_sample(const SimConfig& cfg, int rep_index) {
  if (cfg.n < 2) throw InputError("generate_sample: n must be >= 2");
  auto rng = replicate_rng(cfg.seed, static_cast<std::uint64_t>(rep_index));
  std::uniform_real_distribution<double> unif(cfg.function.lower, cfg.function.upper);
  Eigen::MatrixXd X(cfg.n, cfg.function.d);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = unif(rng);
  }
  return sample_on_design(cfg.function, X, cfg.noise_ratio, rng);
}

Eigen::MatrixXd unit_square_grid(int per_side) {
  Eigen::MatrixXd X(per_side * per_side, 2);
  for (int a = 0; a < per_side; ++a) {
    for (int b = 0; b < per_side; ++b) {
      X(a * per_side + b, 0) = (a + 0.5) / per_side;
      X(a * per_side + b, 1) = (b + 0.5) / per_side;
    }
  }
  return X;
}

double mse_against_truth(const Eigen::VectorXd& fitted, const Eigen::VectorXd& truth) {
  if (fitted.size() != truth.size()) throw InputError("mse_against_truth: length mismatch");
  if (fitted.size() == 0) throw InputError("mse_against_truth: empty vectors");
  return (fitted - truth).squaredNorm() / static_cast<double>(fitted.size());
}

TpsGcvResult tps_gcv_fit(const TpsBasis& basis, const Eigen::VectorXd& Y) {
  const double m0 = static_cast<double>(basis.null_dim());
  const double n = static_cast<double>(basis.n());
  const double df_hi = n - 1.0;
  const double df_lo = m0 + 0.5;
  if (!(df_hi > df_lo)) throw NumericalError("tps_gcv_fit: sample too small for a df range");
  const double log_smooth = std::log(lambda_for_df(basis, df_lo));
  const double log_rough = std::log(lambda_for_df(basis, df_hi));
  constexpr int kPoints = 40;

  TpsGcvResult best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int p = 0; p < kPoints; ++p) {
    const double lambda = std::exp(log_rough + (log_smooth - log_rough) * p / (kPoints - 1));
    Eigen::VectorXd fitted = basis.smooth(Y, lambda);
    const double df = basis.trace(lambda);
    double score;
    try {
      score = gcv_score((Y - fitted).squaredNorm(), df, basis.n());
    } catch (const Error&) {
      continue;
    }
    if (score < best_score) {
      best_score = score;
      best = TpsGcvResult{lambda, df, std::move(fitted)};
    }
  }
  if (!std::isfinite(best_score)) throw NumericalError("tps_gcv_fit: no valid GCV value");
  return best;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

double median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return kNaN;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

SimResult run_simulation(const SimConfig& cfg) {
  if (cfg.reps < 1) throw InputError("run_simulation: reps must be >= 1");
  if (!(cfg.noise_ratio >= 0.0)) throw InputError("run_simulation: noise ratio must be >= 0");
  if (cfg.methods.empty()) throw InputError("run_simulation: no methods requested");

  const int d = cfg.function.d;
  const auto n_methods = static_cast<Eigen::Index>(cfg.methods.size());
  SimResult result;
  result.methods = cfg.methods;
  result.mse = Eigen::MatrixXd::Constant(cfg.reps, n_methods, kNaN);
  result.k_hat.assign(static_cast<std::size_t>(cfg.reps),
                      std::vector<std::int64_t>(cfg.methods.size(), 0));

  const int nu0 = default_nu0(d);
  const bool tps_feasible = 2 * nu0 > d && null_space_dim(nu0, d) < cfg.n;
  if (!tps_feasible) {
    std::ostringstream msg;
    msg << "thin-plate methods skipped: M0=" << null_space_dim(nu0, d) << " >= n=" << cfg.n;
    result.notes.push_back(msg.str());
  }

  std::vector<std::vector<std::string>> rep_notes(static_cast<std::size_t>(cfg.reps));
  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t rep) {
    const Sample s = generate_sample(cfg, static_cast<int>(rep));
    std::shared_ptr<const TpsBasis> basis;
    auto tps_basis = [&]() -> const std::shared_ptr<const TpsBasis>& {
      if (!basis) basis = TpsBasis::build(s.data.X(), nu0);
      return basis;
    };
    for (Eigen::Index m = 0; m < n_methods; ++m) {
      const Method method = cfg.methods[static_cast<std::size_t>(m)];
      if (method != Method::ibr_kernel && !tps_feasible) continue;
      try {
        switch (method) {
          case Method::ibr_kernel: {
            const IbrFit fit = fit_ibr(s.data, KernelRequest{cfg.kernel, cfg.df_per_var, {}},
                                       FitOptions{.grid = {},
                                                  .grid_max = {},
                                                  .allow_nonpd = !is_positive_definite(cfg.kernel),
                                                  .auto_extend = cfg.auto_extend});
            result.mse(static_cast<Eigen::Index>(rep), m) = mse_against_truth(fit.fitted, s.truth);
            result.k_hat[rep][static_cast<std::size_t>(m)] = fit.k_hat;
            break;
          }
          case Method::ibr_tps: {
            const auto& b = tps_basis();
            const double lambda0 = lambda_for_df(*b, cfg.tps_df_mult * b->null_dim());
            const TpsSmoother sm = make_tps_smoother(b, lambda0);
            BaseSmoother base{BaseSpectrum::from_tps(sm), TpsBaseInfo{nu0, lambda0, b->null_dim()},
                              b, {}};
            const IbrFit fit = fit_ibr(s.data, base, FitOptions{.grid = {},
                                                                .grid_max = {},
                                                                .allow_nonpd = false,
                                                                .auto_extend = cfg.auto_extend});
            result.mse(static_cast<Eigen::Index>(rep), m) = mse_against_truth(fit.fitted, s.truth);
            result.k_hat[rep][static_cast<std::size_t>(m)] = fit.k_hat;
            break;
          }
          case Method::tps_gcv: {
            const TpsGcvResult r = tps_gcv_fit(*tps_basis(), s.data.Y());
            result.mse(static_cast<Eigen::Index>(rep), m) = mse_against_truth(r.fitted, s.truth);
            break;
          }
        }
      } catch (const Error& e) {
        rep_notes[rep].push_back("replicate " + std::to_string(rep) + ", " +
                                 std::string(to_string(method)) + ": " + e.what());
      }
    }
  });
  for (auto& notes : rep_notes) {
    result.notes.insert(result.notes.end(), notes.begin(), notes.end());
  }

  const auto ref = std::find(cfg.methods.begin(), cfg.methods.end(), Method::ibr_kernel);
  double ref_median = kNaN;
  for (Eigen::Index m = 0; m < n_methods; ++m) {
    const Eigen::VectorXd col = result.mse.col(m);
    result.medians.push_back(median(std::vector<double>(col.data(), col.data() + col.size())));
  }
  if (ref != cfg.methods.end()) {
    ref_median = result.medians[static_cast<std::size_t>(ref - cfg.methods.begin())];
  }
  for (double med : result.medians) result.ratios.push_back(med / ref_median);
  return result;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CSV file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV file " + path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  CsvTable table;
  table.header = split_line(line);
  const bool drop_first = !table.header.empty() && table.header.front().empty();
  if (drop_first) table.header.erase(table.header.begin());
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  if (cols == 0) throw SchemaError("CSV file " + path.string() + " has an empty header");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (drop_first && !fields.empty()) fields.erase(fields.begin());
    if (static_cast<Eigen::Index>(fields.size()) != cols) {
      throw SchemaError("CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(cols) + " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f.size()) {
        throw SchemaError("CSV line " + std::to_string(line_no) + ": cannot parse '" + f + "'");
      }
      if (!std::isfinite(v)) {
        throw SchemaError("CSV line " + std::to_string(line_no) + ": non-finite value");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      table.values(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  return table;
}

Dataset dataset_from_table(const CsvTable& table, const std::string& response) {
  const auto it = std::find(table.header.begin(), table.header.end(), response);
  if (it == table.header.end()) throw SchemaError("response column '" + response + "' not found");
  if (table.values.rows() == 0) throw SchemaError("CSV file has a header but no data rows");
  const auto y_col = static_cast<Eigen::Index>(it - table.header.begin());
  const Eigen::Index cols = table.values.cols();
  if (cols < 2) throw SchemaError("CSV file needs at least one covariate column");
  Eigen::MatrixXd X(table.values.rows(), cols - 1);
  for (Eigen::Index j = 0, out = 0; j < cols; ++j) {
    if (j != y_col) X.col(out++) = table.values.col(j);
  }
  return Dataset::make(std::move(X), table.values.col(y_col));
}

Dataset load_boston(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto has_medv = std::find(table.header.begin(), table.header.end(), "medv");
  const std::string response = has_medv != table.header.end() ? "medv" : table.header.back();
  if (table.header.size() != 14) {
    throw SchemaError("Boston file must have 13 covariates plus the response, found " +
                      std::to_string(table.header.size()) + " columns");
  }
  return dataset_from_table(table, response);
}

BostonSummary boston_study(const Dataset& data, const BostonConfig& cfg) {
  if (cfg.splits < 1) throw InputError("boston_study: splits must be >= 1");
  if (cfg.train_size < 2 || cfg.train_size >= data.n()) {
    throw InputError("boston_study: training size must lie in [2, n)");
  }
  Eigen::VectorXd Y = data.Y();
  if (cfg.log_response) {
    if ((Y.array() <= 0.0).any()) throw InputError("boston_study: log scale needs positive responses");
    Y = Y.array().log();
  }
  const Dataset full = data.with_response(Y);

  BostonSummary summary;
  summary.splits.resize(static_cast<std::size_t>(cfg.splits));
  parallel_for(summary.splits.size(), cfg.threads, [&](std::size_t s) {
    BostonSplit& out = summary.splits[s];
    out.index = s;
    auto rng = replicate_rng(cfg.seed, s);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(full.n()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<Eigen::Index> train(order.begin(), order.begin() + cfg.train_size);
    const std::vector<Eigen::Index> test(order.begin() + cfg.train_size, order.end());
    out.train_size = static_cast<Eigen::Index>(train.size());
    out.test_size = static_cast<Eigen::Index>(test.size());
    try {
      const Dataset train_data = full.subset(train);
      const IbrFit fit =
          fit_ibr(train_data, KernelRequest{KernelFamily::gaussian, cfg.df_per_var, {}});
      const Predictor predictor(fit, train_data);
      double sse = 0.0;
      for (const Eigen::Index i : test) {
        const double r = full.Y()(i) - predictor(full.X().row(i).transpose());
        sse += r * r;
      }
      out.mpse = sse / static_cast<double>(test.size());
      out.k_hat = fit.k_hat;
    } catch (const Error& e) {
      out.mpse = kNaN;
      out.error = e.what();
    }
  });

  std::vector<double> mpse;
  std::vector<double> ks;
  for (const auto& s : summary.splits) {
    if (std::isnan(s.mpse)) {
      ++summary.failed;
      continue;
    }
    mpse.push_back(s.mpse);
    ks.push_back(static_cast<double>(s.k_hat));
  }
  summary.mean_mpse =
      mpse.empty() ? kNaN : std::accumulate(mpse.begin(), mpse.end(), 0.0) / mpse.size();
  summary.median_k_hat = median(ks);
  return summary;
}

}  // namespace ibr
