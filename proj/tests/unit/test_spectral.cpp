#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ibr;
using ibr::testing::random_design;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset line(std::initializer_list<double> xs) {
  MatrixXd X(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) X(i++, 0) = x;
  return Dataset::design_only(X);
}

const Bandwidth kUnit(VectorXd::Ones(1));

}  // namespace

TEST(Minor3Det, UniformConstruction) {
  const Dataset data = line({0.0, 0.9, 1.8});
  EXPECT_DOUBLE_EQ(minor3_det(data, KernelFamily::uniform, kUnit, {0, 1, 2}), -0.125);
}

TEST(Minor3Det, CoincidentPointsGiveZero) {
  const Dataset data = line({0.3, 0.3, 0.3});
  for (auto f : {KernelFamily::gaussian, KernelFamily::triangular, KernelFamily::uniform,
                 KernelFamily::epanechnikov}) {
    EXPECT_NEAR(minor3_det(data, f, kUnit, {0, 1, 2}), 0.0, 1e-15);
  }
}

TEST(Minor3Det, AgreesWithDeterminantAndIsPositiveForGaussian) {
  std::mt19937_64 rng(70);
  const Dataset data = Dataset::design_only(random_design(rng, 30, 2));
  const Bandwidth h(VectorXd::Constant(2, 0.3));
  const MatrixXd K = kernel_gram(data.X(), KernelFamily::gaussian, h);
  std::uniform_int_distribution<Eigen::Index> pick(0, 29);
  int checked = 0;
  while (checked < 100) {
    const IndexTriple t{pick(rng), pick(rng), pick(rng)};
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    MatrixXd sub(3, 3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) sub(a, b) = K(t[static_cast<std::size_t>(a)], t[static_cast<std::size_t>(b)]);
    const double det = minor3_det(data, KernelFamily::gaussian, h, t);
    EXPECT_NEAR(det, sub.determinant(), 1e-12);
    EXPECT_GT(det, 0.0);
    // Eigensolver oracle: the minor is positive definite.
    EXPECT_GT(symmetric_eigen(sub).values.minCoeff(), 0.0);
    ++checked;
  }
}

TEST(Minor3Det, IndexErrors) {
  const Dataset data = line({0.0, 1.0, 2.0});
  EXPECT_THROW(minor3_det(data, KernelFamily::uniform, kUnit, {0, 0, 1}), InputError);
  EXPECT_THROW(minor3_det(data, KernelFamily::uniform, kUnit, {0, 1, 3}), InputError);
  EXPECT_THROW(minor3_det(data, KernelFamily::uniform, kUnit, {-1, 1, 2}), InputError);
}

TEST(FindNegativeTriple, UniformWitness) {
  const auto t = find_negative_triple(line({0.0, 0.9, 1.8}), KernelFamily::uniform, kUnit);
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(*t, (IndexTriple{0, 1, 2}));
}

TEST(FindNegativeTriple, EpanechnikovSmallSpacing) {
  const Dataset data = line({0.0, 0.1, 0.2});
  const auto t = find_negative_triple(data, KernelFamily::epanechnikov, kUnit);
  ASSERT_TRUE(t.has_value());
  EXPECT_LT(minor3_det(data, KernelFamily::epanechnikov, kUnit, *t), 0.0);
  const MatrixXd K = kernel_gram(data.X(), KernelFamily::epanechnikov, kUnit);
  EXPECT_LT(symmetric_eigen(K).values.minCoeff(), 0.0);
}

TEST(FindNegativeTriple, PreconditionsAndAbsence) {
  EXPECT_THROW(find_negative_triple(line({0, 1, 2}), KernelFamily::gaussian, kUnit), InputError);
  EXPECT_THROW(find_negative_triple(line({0, 1, 2}), KernelFamily::triangular, kUnit), InputError);
  EXPECT_FALSE(find_negative_triple(line({0.0, 5.0, 10.0}), KernelFamily::uniform, kUnit));
  EXPECT_FALSE(find_negative_triple(line({0.0, 0.5}), KernelFamily::uniform, kUnit));
}

TEST(FindNegativeTriple, LexicographicFirstHit) {
  // Triples (0,1,2) and (1,2,3) both qualify; the scan must return the first.
  const auto t = find_negative_triple(line({0.0, 0.9, 1.8, 2.7}), KernelFamily::uniform, kUnit);
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(*t, (IndexTriple{0, 1, 2}));
}

TEST(SpectrumReport, Examples) {
  std::mt19937_64 rng(71);
  const Dataset data = Dataset::design_only(random_design(rng, 100, 3));
  const auto sm = build_kernel_smoother(data, KernelFamily::gaussian,
                                        default_bandwidths(data, KernelFamily::gaussian));
  const SpectrumReport r = spectrum_report(sm);
  EXPECT_EQ(r.verdict, Verdict::certified_nonneg);
  EXPECT_EQ(r.n, 100);
  EXPECT_NEAR(r.max_eig, 1.0, 1e-10);

  const Dataset one = Dataset::design_only(MatrixXd::Zero(1, 2));
  const SpectrumReport r1 =
      spectrum_report(build_kernel_smoother(one, KernelFamily::uniform, Bandwidth(VectorXd::Ones(2))));
  EXPECT_EQ(r1.min_eig, 1.0);
  EXPECT_EQ(r1.max_eig, 1.0);

  const SpectrumReport ru = diagnose(line({0.0, 0.9, 1.8}), KernelFamily::uniform, kUnit);
  EXPECT_EQ(ru.verdict, Verdict::negative_found);
  ASSERT_TRUE(ru.witness.has_value());
  EXPECT_DOUBLE_EQ(ru.witness->det, -0.125);
  EXPECT_EQ(to_string(ru.verdict), "negative-found");
  EXPECT_EQ(to_string(Verdict::certified_nonneg), "certified-nonneg");
}

// ---------------------------------------------------------------------------
// properties

TEST(SpectralProperty, NonPositiveDefiniteFamiliesGoNegative) {
  std::mt19937_64 rng(72);
  for (auto f : {KernelFamily::uniform, KernelFamily::epanechnikov}) {
    int negative = 0;
    for (int rep = 0; rep < 50; ++rep) {
      const Dataset data = Dataset::design_only(random_design(rng, 100, 2));
      const auto r = spectrum_report(build_kernel_smoother(data, f, default_bandwidths(data, f)));
      negative += r.min_eig < -kSpectrumTol;
    }
    EXPECT_GE(negative, 45) << to_string(f);
  }
}

TEST(SpectralProperty, WitnessImpliesNegativeSpectrum) {
  std::mt19937_64 rng(73);
  int witnesses = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset data = Dataset::design_only(random_design(rng, 40, 1 + rep % 2));
    for (auto f : {KernelFamily::uniform, KernelFamily::epanechnikov}) {
      const Bandwidth h(VectorXd::Constant(data.d(), 0.15));
      const SpectrumReport r = diagnose(data, f, h);
      if (r.witness) {
        ++witnesses;
        EXPECT_LT(r.witness->det, 0.0);
        EXPECT_EQ(r.verdict, Verdict::negative_found);
        // Interlacing: a negative 3x3 minor forces a negative eigenvalue of K.
        EXPECT_LT(symmetric_eigen(kernel_gram(data.X(), f, h)).values.minCoeff(), 0.0);
      }
    }
  }
  EXPECT_GT(witnesses, 0);
}

TEST(SpectralProperty, VerdictConsistentWithEvidence) {
  std::mt19937_64 rng(74);
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset data = Dataset::design_only(random_design(rng, 30, 2));
    for (auto f : {KernelFamily::uniform, KernelFamily::epanechnikov, KernelFamily::gaussian}) {
      const SpectrumReport r = diagnose(data, f, default_bandwidths(data, f));
      if (r.verdict == Verdict::negative_found) {
        EXPECT_TRUE(r.min_eig < -kSpectrumTol || (r.witness && r.witness->det < 0.0));
      }
    }
  }
}
