#include "cli.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ibr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::mt19937_64 rng(90);
    X_ = ibr::testing::random_design(rng, 40, 2);
    Y_ = ibr::testing::wiggly_response(rng, X_);
    std::ofstream f(path("train.csv"));
    f.precision(17);
    f << "x1,x2,y\n";
    for (Eigen::Index i = 0; i < X_.rows(); ++i) f << X_(i, 0) << ',' << X_(i, 1) << ',' << Y_(i) << '\n';
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "ibr");
    out_.str("");
    err_.str("");
    return ibr::cli::run(args, out_, err_);
  }

  static json load(const std::string& p) {
    std::ifstream f(p);
    return json::parse(f);
  }

  fs::path dir_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd Y_;
  std::ostringstream out_, err_;
};

std::vector<double> read_predictions(const std::string& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "prediction");
  std::vector<double> v;
  while (std::getline(f, line)) v.push_back(line.empty() ? NAN : std::stod(line));
  return v;
}

}  // namespace

TEST_F(Cli, FitPredictRoundTrip) {
  ASSERT_EQ(run({"fit", "--data", path("train.csv"), "--response", "y", "--out", path("m.json")}), 0)
      << err_.str();
  const json m = load(path("m.json"));
  EXPECT_EQ(m["format"], "ibr-fit/1");
  EXPECT_EQ(m["n"], 40);
  EXPECT_EQ(m["base"]["type"], "kernel");
  EXPECT_EQ(m["covariates"], (json{"x1", "x2"}));
  EXPECT_NE(out_.str().find("k_hat="), std::string::npos);

  ASSERT_EQ(run({"predict", "--model", path("m.json"), "--data", path("train.csv"), "--points",
                 path("train.csv"), "--out", path("p.csv")}),
            0)
      << err_.str();
  const auto pred = read_predictions(path("p.csv"));
  ASSERT_EQ(pred.size(), 40u);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    EXPECT_NEAR(pred[i], m["fitted"][i].get<double>(), 1e-8);
  }
}

TEST_F(Cli, TpsFitRoundTrip) {
  ASSERT_EQ(run({"fit", "--data", path("train.csv"), "--response", "y", "--base", "tps", "--out",
                 path("m.json")}),
            0)
      << err_.str();
  const json m = load(path("m.json"));
  EXPECT_EQ(m["base"]["null_dim"], 3);
  ASSERT_EQ(run({"predict", "--model", path("m.json"), "--data", path("train.csv"), "--points",
                 path("train.csv"), "--out", path("p.csv")}),
            0);
  const auto pred = read_predictions(path("p.csv"));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    EXPECT_NEAR(pred[i], m["fitted"][i].get<double>(), 1e-8);
  }
}

TEST_F(Cli, NonPositiveDefiniteKernelIsNumericalError) {
  EXPECT_EQ(run({"fit", "--data", path("train.csv"), "--response", "y", "--kernel", "epanechnikov",
                 "--out", path("m.json")}),
            3);
  EXPECT_NE(err_.str().find("positive definite"), std::string::npos);
}

TEST_F(Cli, PredictDimensionMismatch) {
  ASSERT_EQ(run({"fit", "--data", path("train.csv"), "--response", "y", "--out", path("m.json")}), 0);
  std::ofstream(path("pts.csv")) << "x1\n0.5\n";
  EXPECT_EQ(run({"predict", "--model", path("m.json"), "--data", path("train.csv"), "--points",
                 path("pts.csv"), "--out", path("p.csv")}),
            2);
  std::ofstream(path("empty.csv")) << "x1,x2\n";
  EXPECT_EQ(run({"predict", "--model", path("m.json"), "--data", path("train.csv"), "--points",
                 path("empty.csv"), "--out", path("p.csv")}),
            0);
  EXPECT_TRUE(read_predictions(path("p.csv")).empty());
}

TEST_F(Cli, MalformedModel) {
  std::ofstream(path("bad.json")) << "{\"format\": 3";
  EXPECT_EQ(run({"predict", "--model", path("bad.json"), "--data", path("train.csv"), "--points",
                 path("train.csv"), "--out", path("p.csv")}),
            2);
}

TEST_F(Cli, ParseErrors) {
  EXPECT_EQ(run({"fit", "--bogus"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"fit", "--data", path("missing.csv"), "--response", "y", "--out", path("m.json")}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Cli, SpectrumJson) {
  std::ofstream(path("line.csv")) << "x\n0\n0.9\n1.8\n";
  ASSERT_EQ(run({"spectrum", "--data", path("line.csv"), "--kernel", "uniform", "--bandwidth", "1",
                 "--out", path("s.json")}),
            0)
      << err_.str();
  const json s = load(path("s.json"));
  EXPECT_EQ(s["verdict"], "negative-found");
  EXPECT_EQ(s["witness"]["indices"], (json{0, 1, 2}));
  EXPECT_DOUBLE_EQ(s["witness"]["det"].get<double>(), -0.125);

  ASSERT_EQ(run({"spectrum", "--data", path("train.csv"), "--response", "y", "--kernel", "gaussian"}), 0);
  const json g = json::parse(out_.str());
  EXPECT_EQ(g["verdict"], "certified-nonneg");
  EXPECT_EQ(g["n"], 40);
  EXPECT_TRUE(g["witness"].is_null());
}

TEST_F(Cli, SimulateOutputs) {
  ASSERT_EQ(run({"simulate", "--function", "wendelberger", "--n", "60", "--reps", "2", "--seed", "3",
                 "--threads", "1", "--surface-grid", "--out", path("sim")}),
            0)
      << err_.str();
  const json s = load(path("sim/summary.json"));
  EXPECT_EQ(s["reps"], 2);
  EXPECT_EQ(s["reference"], "ibr-kernel");
  EXPECT_DOUBLE_EQ(s["methods"]["ibr-kernel"]["ratio"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(path("sim/mse.csv")));
  std::ifstream surface(path("sim/surface.csv"));
  int lines = 0;
  for (std::string l; std::getline(surface, l);) ++lines;
  EXPECT_EQ(lines, 1 + 50 * 50);

  EXPECT_EQ(run({"simulate", "--function", "nope", "--n", "60", "--reps", "1", "--seed", "1", "--out",
                 path("sim2")}),
            2);
  // A surface only exists for bivariate functions; the request is skipped with a note.
  ASSERT_EQ(run({"simulate", "--function", "sincos3", "--n", "60", "--reps", "1", "--seed", "1",
                 "--methods", "ibr-kernel", "--surface-grid", "--out", path("sim3")}),
            0);
  EXPECT_FALSE(fs::exists(path("sim3/surface.csv")));
  EXPECT_NE(load(path("sim3/summary.json"))["notes"].dump().find("surface grid skipped"), std::string::npos);
}

TEST_F(Cli, BostonOutputs) {
  std::ofstream f(path("b.csv"));
  f.precision(17);
  f << "c1,c2,c3,c4,c5,c6,c7,c8,c9,c10,c11,c12,c13,medv\n";
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    double s = 0.0;
    for (int j = 0; j < 13; ++j) {
      const double v = u(rng);
      s += v;
      f << v << ',';
    }
    f << 10.0 + s << '\n';
  }
  f.close();
  ASSERT_EQ(run({"boston", "--data", path("b.csv"), "--splits", "2", "--seed", "4", "--threads", "1",
                 "--out", path("bo")}),
            0)
      << err_.str();
  const json s = load(path("bo/summary.json"));
  EXPECT_EQ(s["splits"], 2);
  EXPECT_EQ(s["train_size"], 350);
  EXPECT_EQ(s["test_size"], 50);
  EXPECT_EQ(s["failed"], 0);
  EXPECT_TRUE(fs::exists(path("bo/splits.csv")));
}
