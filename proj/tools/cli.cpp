#include "cli.hpp"

#include "ibr/ibr.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

namespace ibr::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kFitFormat = "ibr-fit/1";

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
  return a;
}

Eigen::VectorXd vector_from_json(const json& a, const std::string& what) {
  if (!a.is_array()) throw SchemaError("model file: '" + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw SchemaError("model file: non-numeric entry in '" + what + "'");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

json base_to_json(const BaseInfo& base) {
  if (const auto* k = std::get_if<KernelBaseInfo>(&base)) {
    return {{"type", "kernel"},
            {"kernel", std::string(to_string(k->family))},
            {"bandwidths", to_json(k->h.values())}};
  }
  const auto& t = std::get<TpsBaseInfo>(base);
  return {{"type", "tps"}, {"nu0", t.nu0}, {"lambda0", t.lambda0}, {"null_dim", t.null_dim}};
}

BaseInfo base_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw SchemaError("model file: missing base.type");
  const std::string type = j.at("type").get<std::string>();
  if (type == "kernel") {
    return KernelBaseInfo{parse_kernel_family(j.at("kernel").get<std::string>()),
                          Bandwidth(vector_from_json(j.at("bandwidths"), "bandwidths"))};
  }
  if (type == "tps") {
    return TpsBaseInfo{j.at("nu0").get<int>(), j.at("lambda0").get<double>(),
                       j.at("null_dim").get<std::int64_t>()};
  }
  throw SchemaError("model file: unknown base type '" + type + "'");
}

json path_to_json(const IbrPath& p) {
  json gcv = json::array();
  for (double g : p.gcv) gcv.push_back(finite_or_null(g));
  return {{"k", p.ks}, {"df", p.df}, {"sigma2", p.sigma2}, {"gcv", gcv},
          {"bias_norm", p.bias_norm}, {"valid", p.valid}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << std::setw(2) << j << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("IBR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Covariate columns of `table` (everything but `response`, if given).
std::vector<std::string> covariate_names(const CsvTable& table, const std::string& response) {
  std::vector<std::string> names;
  for (const auto& h : table.header) {
    if (h != response) names.push_back(h);
  }
  return names;
}

Eigen::MatrixXd select_columns(const CsvTable& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd X(table.values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto it = std::find(table.header.begin(), table.header.end(), names[c]);
    if (it == table.header.end()) throw SchemaError("column '" + names[c] + "' not found");
    X.col(static_cast<Eigen::Index>(c)) =
        table.values.col(static_cast<Eigen::Index>(it - table.header.begin()));
  }
  return X;
}

struct FitArgs {
  std::string data;
  std::string response;
  std::string base = "kernel";
  std::string kernel = "gaussian";
  double df_per_var = 1.1;
  int nu0 = 0;
  double df_mult = 1.5;
  std::int64_t grid_max = 100000;
  bool allow_nonpd = false;
  bool auto_extend = false;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const CsvTable table = read_csv(a.data);
  const Dataset data = dataset_from_table(table, a.response);
  const FitOptions options{.grid = std::nullopt,
                           .grid_max = a.grid_max,
                           .allow_nonpd = a.allow_nonpd,
                           .auto_extend = a.auto_extend};
  BaseRequest request;
  if (a.base == "kernel") {
    request = KernelRequest{parse_kernel_family(a.kernel), a.df_per_var, {}};
  } else {
    TpsRequest tr;
    if (a.nu0 > 0) tr.nu0 = a.nu0;
    tr.df_mult = a.df_mult;
    request = tr;
  }
  const IbrFit fit = fit_ibr(data, request, options);

  json j;
  j["format"] = kFitFormat;
  j["response"] = a.response;
  j["covariates"] = covariate_names(table, a.response);
  j["n"] = data.n();
  j["d"] = data.d();
  j["base"] = base_to_json(fit.base);
  j["k_hat"] = fit.k_hat;
  j["pilot_df"] = fit.pilot_df;
  j["path"] = path_to_json(fit.path);
  j["fitted"] = to_json(fit.fitted);
  j["beta"] = to_json(fit.beta);
  j["warnings"] = fit.warnings;
  write_json(a.out, j);
  out << "k_hat=" << fit.k_hat << " pilot_df=" << fit.pilot_df << '\n';
  return kOk;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string points;
  std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  std::ifstream mf(a.model);
  if (!mf) throw InputError("cannot open model file " + a.model);
  json model;
  try {
    mf >> model;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (model.value("format", "") != kFitFormat) throw SchemaError("model file: unexpected format");
  const auto response = model.at("response").get<std::string>();
  const auto covariates = model.at("covariates").get<std::vector<std::string>>();

  const CsvTable table = read_csv(a.data);
  if (static_cast<std::size_t>(table.values.cols()) != covariates.size() + 1) {
    throw InputError("training data has " + std::to_string(table.values.cols() - 1) +
                     " covariates, model has " + std::to_string(covariates.size()));
  }
  const Dataset data = Dataset::make(select_columns(table, covariates),
                                     select_columns(table, {response}).col(0));
  const Predictor predictor(base_from_json(model.at("base")),
                            vector_from_json(model.at("beta"), "beta"), data);

  const CsvTable pts = read_csv(a.points);
  std::vector<std::string> pcols = pts.header;
  std::erase(pcols, response);
  if (pcols.size() != covariates.size()) {
    throw InputError("points file has " + std::to_string(pcols.size()) + " covariates, model has " +
                     std::to_string(covariates.size()));
  }
  const Eigen::MatrixXd P = select_columns(pts, covariates);

  std::ofstream f(a.out);
  if (!f) throw InputError("cannot write " + a.out);
  f << "prediction\n";
  int extrapolated = 0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    try {
      f << format_double(predictor(P.row(i).transpose())) << '\n';
    } catch (const ExtrapolationError&) {
      f << '\n';
      ++extrapolated;
    }
  }
  if (extrapolated > 0) {
    err << "warning: " << extrapolated << " point(s) outside the kernel support; left empty\n";
  }
  out << "predicted " << P.rows() << " point(s)\n";
  return kOk;
}

struct SpectrumArgs {
  std::string data;
  std::string kernel;
  std::string response;
  double df_per_var = 1.1;
  std::vector<double> bandwidths;
  std::string out;
};

int cmd_spectrum(const SpectrumArgs& a, std::ostream& out) {
  const CsvTable table = read_csv(a.data);
  if (table.values.rows() == 0) throw SchemaError("CSV file has a header but no data rows");
  const Dataset data = Dataset::design_only(select_columns(table, covariate_names(table, a.response)));
  const KernelFamily family = parse_kernel_family(a.kernel);
  Bandwidth h;
  if (!a.bandwidths.empty()) {
    h = Bandwidth(Eigen::Map<const Eigen::VectorXd>(a.bandwidths.data(),
                                                    static_cast<Eigen::Index>(a.bandwidths.size())));
  } else if (data.n() < 2) {
    h = Bandwidth(Eigen::VectorXd::Ones(data.d()));
  } else {
    h = default_bandwidths(data, family, a.df_per_var);
  }
  const SpectrumReport r = diagnose(data, family, h);
  json j{{"family", std::string(to_string(r.family))},
         {"n", r.n},
         {"min_eig", r.min_eig},
         {"max_eig", r.max_eig},
         {"verdict", std::string(to_string(r.verdict))},
         {"tolerance", kSpectrumTol},
         {"bandwidths", to_json(h.values())},
         {"witness", nullptr}};
  if (r.witness) {
    j["witness"] = {{"indices", r.witness->idx}, {"det", r.witness->det}};
  }
  if (a.out.empty()) {
    out << std::setw(2) << j << '\n';
  } else {
    write_json(a.out, j);
  }
  return kOk;
}

struct SimulateArgs {
  std::string function;
  Eigen::Index n = 200;
  int reps = 100;
  std::vector<std::string> methods{"ibr-kernel", "ibr-tps", "tps-gcv"};
  std::uint64_t seed = 1;
  double noise_ratio = 0.1;
  bool surface_grid = false;
  bool auto_extend = false;
  int threads = 0;
  std::string out;
};

void write_surface(const SimConfig& cfg, const fs::path& path, std::vector<std::string>& notes) {
  const TestFunction& f = cfg.function;
  if (f.d != 2) {
    notes.push_back("surface grid skipped: only bivariate functions have a surface");
    return;
  }
  const Sample s = generate_sample(cfg, 0);
  struct Column {
    std::string name;
    Predictor predictor;
  };
  std::vector<Column> columns;
  for (Method m : cfg.methods) {
    if (m == Method::tps_gcv) continue;
    BaseRequest req = m == Method::ibr_kernel
                          ? BaseRequest{KernelRequest{cfg.kernel, cfg.df_per_var, {}}}
                          : BaseRequest{TpsRequest{std::nullopt, cfg.tps_df_mult, std::nullopt}};
    try {
      const IbrFit fit = fit_ibr(s.data, req, FitOptions{.grid = {}, .grid_max = {}, .allow_nonpd = true});
      const std::string name(to_string(m));
      columns.push_back({name + "_pilot", Predictor(fit.base, s.data.Y(), s.data)});
      columns.push_back({name + "_k" + std::to_string(fit.k_hat), Predictor(fit, s.data)});
    } catch (const Error& e) {
      notes.push_back("surface grid, " + std::string(to_string(m)) + ": " + e.what());
    }
  }
  std::ofstream o(path);
  if (!o) throw InputError("cannot write " + path.string());
  o << "x1,x2,truth";
  for (const auto& c : columns) o << ',' << c.name;
  o << '\n';
  constexpr int kSide = 50;
  Eigen::VectorXd x(2);
  for (int a = 0; a < kSide; ++a) {
    for (int b = 0; b < kSide; ++b) {
      x << f.lower + (f.upper - f.lower) * a / (kSide - 1),
          f.lower + (f.upper - f.lower) * b / (kSide - 1);
      o << format_double(x(0)) << ',' << format_double(x(1)) << ',' << format_double(f.eval(x));
      for (const auto& c : columns) {
        o << ',';
        try {
          o << format_double(c.predictor(x));
        } catch (const ExtrapolationError&) {
        }
      }
      o << '\n';
    }
  }
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg;
  cfg.function = sim_function(a.function);
  cfg.n = a.n;
  cfg.reps = a.reps;
  cfg.noise_ratio = a.noise_ratio;
  cfg.seed = a.seed;
  cfg.methods.clear();
  for (const auto& m : a.methods) cfg.methods.push_back(parse_method(m));
  cfg.auto_extend = a.auto_extend;
  cfg.threads = resolve_threads(a.threads);

  const SimResult r = run_simulation(cfg);
  const fs::path dir(a.out);
  ensure_dir(dir);
  {
    std::ofstream o(dir / "mse.csv");
    if (!o) throw InputError("cannot write " + (dir / "mse.csv").string());
    o << "replicate";
    for (Method m : r.methods) o << ',' << to_string(m);
    o << '\n';
    for (Eigen::Index i = 0; i < r.mse.rows(); ++i) {
      o << i;
      for (Eigen::Index m = 0; m < r.mse.cols(); ++m) o << ',' << format_double(r.mse(i, m));
      o << '\n';
    }
  }
  json methods = json::object();
  for (std::size_t m = 0; m < r.methods.size(); ++m) {
    std::vector<std::int64_t> ks;
    for (const auto& row : r.k_hat) {
      if (row[m] > 0) ks.push_back(row[m]);
    }
    int missing = 0;
    for (Eigen::Index i = 0; i < r.mse.rows(); ++i) {
      if (std::isnan(r.mse(i, static_cast<Eigen::Index>(m)))) ++missing;
    }
    methods[std::string(to_string(r.methods[m]))] = {{"median_mse", finite_or_null(r.medians[m])},
                                                     {"ratio", finite_or_null(r.ratios[m])},
                                                     {"missing", missing},
                                                     {"k_hat", ks}};
  }
  std::vector<std::string> notes = r.notes;
  if (a.surface_grid) write_surface(cfg, dir / "surface.csv", notes);
  json summary{{"function", cfg.function.name}, {"d", cfg.function.d},    {"n", cfg.n},
               {"reps", cfg.reps},              {"seed", cfg.seed},       {"noise_ratio", cfg.noise_ratio},
               {"auto_extend", cfg.auto_extend},
               {"reference", "ibr-kernel"},     {"methods", methods},     {"notes", notes}};
  write_json(dir / "summary.json", summary);
  for (std::size_t m = 0; m < r.methods.size(); ++m) {
    out << to_string(r.methods[m]) << ": median MSE " << r.medians[m] << ", ratio "
        << r.ratios[m] << '\n';
  }
  return kOk;
}

struct BostonArgs {
  std::string data;
  int splits = 30;
  std::uint64_t seed = 1;
  bool log_response = false;
  int threads = 0;
  std::string out;
};

int cmd_boston(const BostonArgs& a, std::ostream& out) {
  const Dataset data = load_boston(a.data);
  BostonConfig cfg;
  cfg.splits = a.splits;
  cfg.seed = a.seed;
  cfg.log_response = a.log_response;
  cfg.threads = resolve_threads(a.threads);
  const BostonSummary s = boston_study(data, cfg);

  const fs::path dir(a.out);
  ensure_dir(dir);
  {
    std::ofstream o(dir / "splits.csv");
    if (!o) throw InputError("cannot write " + (dir / "splits.csv").string());
    o << "split,train_size,test_size,mpse,k_hat\n";
    for (const auto& sp : s.splits) {
      o << sp.index << ',' << sp.train_size << ',' << sp.test_size << ',' << format_double(sp.mpse)
        << ',' << sp.k_hat << '\n';
    }
  }
  std::vector<std::int64_t> ks;
  std::vector<std::string> errors;
  for (const auto& sp : s.splits) {
    if (sp.error.empty()) {
      ks.push_back(sp.k_hat);
    } else {
      errors.push_back("split " + std::to_string(sp.index) + ": " + sp.error);
    }
  }
  json summary{{"splits", a.splits},
               {"seed", a.seed},
               {"log_response", a.log_response},
               {"train_size", cfg.train_size},
               {"test_size", data.n() - cfg.train_size},
               {"mean_mpse", finite_or_null(s.mean_mpse)},
               {"median_k_hat", finite_or_null(s.median_k_hat)},
               {"k_hat", ks},
               {"failed", s.failed},
               {"errors", errors}};
  write_json(dir / "summary.json", summary);
  out << "mean MPSE " << s.mean_mpse << " over " << (a.splits - s.failed) << " split(s), median k "
      << s.median_k_hat << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative bias reduction for multivariate nonparametric regression"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an IBR smoother and write it as JSON");
  fit_cmd->add_option("--data", fit.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--response", fit.response, "Response column name")->required();
  fit_cmd->add_option("--base", fit.base, "Base smoother")
      ->check(CLI::IsMember({"kernel", "tps"}))
      ->capture_default_str();
  fit_cmd->add_option("--kernel", fit.kernel, "Kernel family")
      ->check(CLI::IsMember({"gaussian", "triangular", "uniform", "epanechnikov"}))
      ->capture_default_str();
  fit_cmd->add_option("--df-per-var", fit.df_per_var, "Pilot df per covariate (kernel)")
      ->capture_default_str();
  fit_cmd->add_option("--nu0", fit.nu0, "Thin-plate degree (default floor(d/2)+1)");
  fit_cmd->add_option("--df-mult", fit.df_mult, "Pilot df as a multiple of M0 (tps)")
      ->capture_default_str();
  fit_cmd->add_option("--grid-max", fit.grid_max, "Largest iteration count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit_cmd->add_flag("--allow-nonpd", fit.allow_nonpd, "Allow non-positive-definite kernels");
  fit_cmd->add_flag("--auto-extend", fit.auto_extend,
                    "Extend the grid tenfold once if GCV picks its last point");
  fit_cmd->add_option("--out", fit.out, "Output JSON")->required();

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Predict at new points from a fitted model");
  pred_cmd->add_option("--model", pred.model, "Model JSON from fit")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--data", pred.data, "Training CSV used for the fit")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--points", pred.points, "CSV of evaluation points")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", pred.out, "Output CSV")->required();

  SpectrumArgs spec;
  auto* spec_cmd = app.add_subcommand("spectrum", "Eigenvalue range and negative-minor witness");
  spec_cmd->add_option("--data", spec.data, "Design CSV")->required()->check(CLI::ExistingFile);
  spec_cmd->add_option("--kernel", spec.kernel, "Kernel family")
      ->required()
      ->check(CLI::IsMember({"gaussian", "triangular", "uniform", "epanechnikov"}));
  spec_cmd->add_option("--response", spec.response, "Column to exclude from the design");
  spec_cmd->add_option("--df-per-var", spec.df_per_var, "Bandwidth calibration target")
      ->capture_default_str();
  spec_cmd->add_option("--bandwidth", spec.bandwidths, "Explicit bandwidths, one per covariate")
      ->delimiter(',');
  spec_cmd->add_option("--out", spec.out, "Output JSON (default stdout)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo comparison of smoothers");
  sim_cmd->add_option("--function", sim.function, "Test function")
      ->required()
      ->check(CLI::IsMember(sim_function_names()));
  sim_cmd->add_option("--n", sim.n, "Sample size")->required()->check(CLI::Range(2, 100000));
  sim_cmd->add_option("--reps", sim.reps, "Replicates")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--methods", sim.methods, "Comma-separated methods")
      ->delimiter(',')
      ->check(CLI::IsMember({"ibr-kernel", "ibr-tps", "tps-gcv"}));
  sim_cmd->add_option("--seed", sim.seed, "RNG seed")->required();
  sim_cmd->add_option("--noise-ratio", sim.noise_ratio, "sd(noise)/sd(signal)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sim_cmd->add_flag("--auto-extend", sim.auto_extend,
                    "Extend the iteration grid tenfold once after a boundary selection");
  sim_cmd->add_flag("--surface-grid", sim.surface_grid, "Also write surface.csv (bivariate only)");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (default IBR_THREADS or all cores)");
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();

  BostonArgs boston;
  auto* boston_cmd = app.add_subcommand("boston", "Boston housing split study");
  boston_cmd->add_option("--data", boston.data, "Boston CSV")->required()->check(CLI::ExistingFile);
  boston_cmd->add_option("--splits", boston.splits, "Random splits")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  boston_cmd->add_option("--seed", boston.seed, "RNG seed")->required();
  boston_cmd->add_flag("--log-response", boston.log_response, "Model log(medv)");
  boston_cmd->add_option("--threads", boston.threads, "Worker threads (default IBR_THREADS or all cores)");
  boston_cmd->add_option("--out", boston.out, "Output directory")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*pred_cmd) return cmd_predict(pred, out, err);
    if (*spec_cmd) return cmd_spectrum(spec, out);
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*boston_cmd) return cmd_boston(boston, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const json::exception& e) {
    err << "error: malformed model file: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace ibr::cli
