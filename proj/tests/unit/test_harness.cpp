#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ibr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Second implementation, coded separately.
double wendelberger_oracle(double x, double y) {
  const double t1 = std::pow(9 * x - 2, 2) + std::pow(9 * y - 2, 2);
  const double t2 = -std::pow(9 * x + 1, 2) / 49 + std::pow(9 * y + 1, 2) / 10;
  const double t3 = std::pow(9 * x - 7, 2) + std::pow(9 * y - 3, 2);
  const double t4 = std::pow(9 * x - 4, 2) + std::pow(9 * y - 7, 2);
  return 3.0 / 4 * std::exp(-t1 / 4) + 3.0 / 4 * std::exp(t2) + 1.0 / 2 * std::exp(-t3 / 4) -
         1.0 / 5 * std::exp(-t4);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("ibr_harness_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  std::filesystem::path dir_;
};

}  // namespace

TEST(Wendelberger, LiteralFormula) {
  // 0.75 + 0.75 exp(-9/49 + 9/10) + 0.5 exp(-26/4) - 0.2 exp(-29)
  EXPECT_NEAR(wendelberger(2.0 / 9, 2.0 / 9), 2.2859268379659485, 1e-12);
  EXPECT_NEAR(wendelberger(0.0, 0.0), 0.9136354645354411, 1e-12);
}

TEST(Wendelberger, GridMatchesIndependentEvaluator) {
  const MatrixXd G = unit_square_grid(10);
  ASSERT_EQ(G.rows(), 100);
  EXPECT_DOUBLE_EQ(G(0, 0), 0.05);
  EXPECT_DOUBLE_EQ(G(1, 1), 0.15);
  EXPECT_DOUBLE_EQ(G(10, 0), 0.15);
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    EXPECT_NEAR(wendelberger(G(i, 0), G(i, 1)), wendelberger_oracle(G(i, 0), G(i, 1)), 1e-12);
  }
}

TEST(Wendelberger, Continuity) {
  // The second term grows like exp((9y+1)^2/10), up to e^10 at y = 1,
  // so the step is bounded relative to the function's size.
  std::mt19937_64 rng(80);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng);
    const double m = wendelberger(x, y);
    EXPECT_LE(std::abs(m - wendelberger(x + 1e-8, y)), 1e-6 * std::max(1.0, std::abs(m)));
  }
}

TEST(SimFunction, Examples) {
  EXPECT_DOUBLE_EQ(sim_function("product3").eval(VectorXd::Ones(3)), 1.0);
  EXPECT_NEAR(sim_function("sincos3").eval(VectorXd::Ones(3)), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(sim_function("product7").eval(VectorXd::Constant(7, 2.0)), 128.0);
  EXPECT_THROW(sim_function("product4"), InputError);
  for (const auto& name : sim_function_names()) {
    const TestFunction f = sim_function(name);
    EXPECT_EQ(f.name, name);
    const VectorXd mid = VectorXd::Constant(f.d, 0.5 * (f.lower + f.upper));
    EXPECT_TRUE(std::isfinite(f.eval(mid))) << name;
  }
  EXPECT_EQ(sim_function("sincos5").d, 5);
  EXPECT_EQ(sim_function("wendelberger").upper, 1.0);
}

TEST(Methods, NamesRoundTrip) {
  for (auto m : {Method::ibr_kernel, Method::ibr_tps, Method::tps_gcv}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("tps"), InputError);
}

TEST(GenerateSample, NoiselessAndDeterministic) {
  SimConfig cfg;
  cfg.function = sim_function("sincos3");
  cfg.n = 50;
  cfg.noise_ratio = 0.0;
  const Sample s = generate_sample(cfg, 3);
  EXPECT_EQ(s.data.Y(), s.truth);
  EXPECT_GE(s.data.X().minCoeff(), 1.0);
  EXPECT_LE(s.data.X().maxCoeff(), 2.0);

  cfg.noise_ratio = 0.1;
  const Sample a = generate_sample(cfg, 7);
  const Sample b = generate_sample(cfg, 7);
  const Sample c = generate_sample(cfg, 8);
  EXPECT_EQ(a.data.X(), b.data.X());
  EXPECT_EQ(a.data.Y(), b.data.Y());
  EXPECT_NE(a.data.X(), c.data.X());
}

TEST(GenerateSample, NoiseRatio) {
  SimConfig cfg;
  cfg.function = sim_function("product3");
  cfg.n = 800;
  cfg.noise_ratio = 0.1;
  cfg.seed = 81;
  auto sd = [](const VectorXd& v) {
    return std::sqrt((v.array() - v.mean()).square().sum() / (v.size() - 1.0));
  };
  for (int rep = 0; rep < 50; ++rep) {
    const Sample s = generate_sample(cfg, rep);
    const double ratio = sd(s.data.Y() - s.truth) / sd(s.truth);
    EXPECT_GE(ratio, 0.08);
    EXPECT_LE(ratio, 0.12);
  }
}

TEST(MseAgainstTruth, Examples) {
  const VectorXd t = VectorXd::LinSpaced(5, 0.0, 1.0);
  EXPECT_EQ(mse_against_truth(t, t), 0.0);
  EXPECT_DOUBLE_EQ(mse_against_truth(t.array() + 1.0, t), 1.0);
  EXPECT_DOUBLE_EQ(mse_against_truth(VectorXd{{1.0, 2.0}}, VectorXd::Zero(2)), 2.5);
  EXPECT_THROW(mse_against_truth(t, VectorXd::Zero(4)), InputError);
}

TEST(Median, EvenOddAndNaN) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(median({NAN, 5.0, 1.0}), 3.0);
  EXPECT_TRUE(std::isnan(median({NAN})));
}

TEST(TpsGcvFit, SelectsInteriorLambda) {
  std::mt19937_64 rng(82);
  const MatrixXd X = ibr::testing::random_design(rng, 80, 2);
  const VectorXd Y = ibr::testing::wiggly_response(rng, X);
  const auto basis = TpsBasis::build(X, 2);
  const TpsGcvResult r = tps_gcv_fit(*basis, Y);
  EXPECT_GT(r.df, 3.0);
  EXPECT_LT(r.df, 79.0);
  EXPECT_NEAR(basis->trace(r.lambda), r.df, 1e-8);
  EXPECT_LE((r.fitted - basis->smooth(Y, r.lambda)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RunSimulation, NoiselessInterpolation) {
  SimConfig cfg;
  cfg.function = sim_function("product3");
  cfg.n = 40;
  cfg.reps = 1;
  cfg.noise_ratio = 0.0;
  cfg.methods = {Method::ibr_kernel};
  cfg.df_per_var = 3.0;
  const SimResult r = run_simulation(cfg);
  EXPECT_LT(r.mse(0, 0), 1e-3);
  EXPECT_DOUBLE_EQ(r.ratios[0], 1.0);
}

TEST(RunSimulation, InfeasibleThinPlateIsMissing) {
  SimConfig cfg;
  cfg.function = sim_function("sincos7");
  cfg.n = 50;
  cfg.reps = 2;
  cfg.methods = {Method::ibr_kernel, Method::ibr_tps, Method::tps_gcv};
  const SimResult r = run_simulation(cfg);
  EXPECT_FALSE(std::isnan(r.mse(0, 0)));
  EXPECT_TRUE(std::isnan(r.mse(0, 1)));
  EXPECT_TRUE(std::isnan(r.mse(1, 2)));
  EXPECT_TRUE(std::isnan(r.medians[1]));
  ASSERT_FALSE(r.notes.empty());
  EXPECT_NE(r.notes.front().find("M0=120"), std::string::npos);
}

TEST(RunSimulation, ThreadCountDoesNotChangeResults) {
  SimConfig cfg;
  cfg.function = sim_function("sincos3");
  cfg.n = 60;
  cfg.reps = 4;
  cfg.seed = 83;
  const SimResult one = run_simulation(cfg);
  cfg.threads = 3;
  const SimResult three = run_simulation(cfg);
  EXPECT_EQ(one.mse, three.mse);
  EXPECT_EQ(one.k_hat, three.k_hat);
  EXPECT_TRUE((one.mse.array() >= 0.0).all());
}

TEST(RunSimulation, InvalidConfig) {
  SimConfig cfg;
  cfg.function = sim_function("product3");
  cfg.reps = 0;
  EXPECT_THROW(run_simulation(cfg), InputError);
  cfg.reps = 1;
  cfg.noise_ratio = -1.0;
  EXPECT_THROW(run_simulation(cfg), InputError);
}

TEST_F(TempDir, ReadCsvHandlesQuotesAndRowNames) {
  const auto p = write("t.csv", "\"\",\"a\",\"b\"\n\"1\",1.5,2\n\"2\",3,4e-1\n");
  const CsvTable t = read_csv(p);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.values.rows(), 2);
  EXPECT_DOUBLE_EQ(t.values(1, 1), 0.4);
}

TEST_F(TempDir, ReadCsvErrors) {
  EXPECT_THROW(read_csv(dir_ / "missing.csv"), SchemaError);
  EXPECT_THROW(read_csv(write("empty.csv", "")), SchemaError);
  EXPECT_THROW(read_csv(write("ragged.csv", "a,b\n1,2\n3\n")), SchemaError);
  EXPECT_THROW(read_csv(write("text.csv", "a,b\n1,x\n")), SchemaError);
  EXPECT_THROW(read_csv(write("inf.csv", "a,b\n1,inf\n")), SchemaError);
}

TEST_F(TempDir, DatasetFromTable) {
  const CsvTable t = read_csv(write("d.csv", "x1,y,x2\n1,10,2\n3,30,4\n"));
  const Dataset data = dataset_from_table(t, "y");
  EXPECT_EQ(data.d(), 2);
  EXPECT_EQ(data.Y(), (VectorXd{{10.0, 30.0}}));
  EXPECT_EQ(data.X()(1, 1), 4.0);
  EXPECT_THROW(dataset_from_table(t, "z"), SchemaError);
  EXPECT_THROW(dataset_from_table(read_csv(write("h.csv", "x,y\n")), "y"), SchemaError);
}

TEST_F(TempDir, LoadBostonSchema) {
  EXPECT_THROW(load_boston(write("short.csv", "a,b,medv\n1,2,3\n")), SchemaError);
}

TEST(Boston, SplitSizes) {
  std::mt19937_64 rng(84);
  const MatrixXd X = ibr::testing::random_design(rng, 60, 2);
  const Dataset data = Dataset::make(X, ibr::testing::wiggly_response(rng, X));
  BostonConfig cfg;
  cfg.splits = 3;
  cfg.train_size = 42;
  cfg.seed = 85;
  const BostonSummary s = boston_study(data, cfg);
  ASSERT_EQ(s.splits.size(), 3u);
  for (const auto& split : s.splits) {
    EXPECT_EQ(split.train_size, 42);
    EXPECT_EQ(split.test_size, 18);
    EXPECT_GT(split.k_hat, 0);
  }
  EXPECT_EQ(s.failed, 0);
  cfg.train_size = 60;
  EXPECT_THROW(boston_study(data, cfg), InputError);
}

TEST(Boston, FullFileShape) {
  const std::filesystem::path path = IBR_DEFAULT_BOSTON_CSV;
  if (!std::filesystem::exists(path)) GTEST_SKIP() << "Boston CSV not present at " << path;
  const Dataset data = load_boston(path);
  EXPECT_EQ(data.n(), 506);
  EXPECT_EQ(data.d(), 13);
  EXPECT_DOUBLE_EQ(data.Y()(0), 24.0);
  EXPECT_EQ(data.n() - 350, 156);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(37, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(3, 2, [](std::size_t i) {
                 if (i == 1) throw InputError("boom");
               }),
               InputError);
}
