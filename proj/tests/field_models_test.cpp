#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rfim/errors.hpp"
#include "rfim/field_models.hpp"
#include "rfim/lattice.hpp"

using rfim::CounterRng;
using rfim::FieldModel;
using rfim::LatticeRegion;

TEST(FieldModel, RejectsInvalidParameters) {
  EXPECT_THROW(FieldModel::gaussian(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(FieldModel::gaussian(0.0, -1.0), std::invalid_argument);
  EXPECT_THROW(FieldModel::uniform(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(FieldModel::uniform(2.0, 1.0), std::invalid_argument);
}

TEST(Pushforward, Examples) {
  const auto g = rfim::pushforward_eval(FieldModel::gaussian(0.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(g.u, 2.0);
  EXPECT_DOUBLE_EQ(g.du, 2.0);
  const auto u = rfim::pushforward_eval(FieldModel::uniform(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(u.u, 0.5);
  EXPECT_NEAR(u.du, 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(u.du, 0.398942, 1e-6);
}

TEST(Pushforward, DerivativeMatchesFiniteDifference) {
  const double h = 1e-5;
  for (const auto& m : {FieldModel::gaussian(0.3, 1.7), FieldModel::uniform(-2.0, 5.0)}) {
    for (double z = -3.0; z <= 3.0; z += 0.25) {
      const double fd = (m.pushforward(z + h).u - m.pushforward(z - h).u) / (2.0 * h);
      EXPECT_NEAR(fd, m.pushforward(z).du, 1e-6 * std::abs(m.pushforward(z).du)) << m.describe() << " z=" << z;
    }
  }
}

TEST(Pushforward, LipschitzConstantBoundsDerivative) {
  for (const auto& m : {FieldModel::gaussian(0.0, 1.0), FieldModel::uniform(-1.0, 3.0)}) {
    double worst = 0.0;
    for (int i = -6000; i <= 6000; ++i) worst = std::max(worst, std::abs(m.pushforward(i * 1e-3).du));
    EXPECT_LE(worst, m.lipschitz() + 1e-12);
  }
}

TEST(SampleField, GaussianMean) {
  const auto region = LatticeRegion::cube(2, 100);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto f = rfim::sample_field(FieldModel::gaussian(0.0, 1.0), region, CounterRng(s));
    for (double x : f.phi) sum += x;
    n += f.size();
  }
  EXPECT_EQ(n, 1000000u);
  EXPECT_LT(std::abs(sum / static_cast<double>(n)), 4e-3);
}

TEST(SampleField, UniformSupport) {
  const auto f = rfim::sample_field(FieldModel::uniform(-1.0, 1.0), LatticeRegion::cube(2, 50), CounterRng(9));
  for (double x : f.phi) {
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(SampleField, GaussianIsAffineInZ) {
  const auto f = rfim::sample_field(FieldModel::gaussian(1.5, 0.5), LatticeRegion::cube(2, 5), CounterRng(4));
  ASSERT_TRUE(f.has_gaussian());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f.phi[i], 1.5 + 0.5 * f.z[i]);
    EXPECT_EQ(f.uprime[i], 0.5);
  }
}

TEST(SampleField, Reproducible) {
  const auto region = LatticeRegion::cube(2, 6);
  const auto a = rfim::sample_field(FieldModel::uniform(0.0, 2.0), region, CounterRng(123));
  const auto b = rfim::sample_field(FieldModel::uniform(0.0, 2.0), region, CounterRng(123));
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.uprime, b.uprime);
  const auto c = rfim::sample_field(FieldModel::uniform(0.0, 2.0), region, CounterRng(124));
  EXPECT_NE(a.phi, c.phi);
}

TEST(SampleField, EmpiricalCdfMatchesModel) {
  for (const auto& m : {FieldModel::gaussian(-1.0, 2.0), FieldModel::uniform(-3.0, 1.0)}) {
    const auto f = rfim::sample_field(m, LatticeRegion::cube(1, 100000), CounterRng(77));
    std::vector<double> x = f.phi;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = m.cdf(x[i]);
      ks = std::max({ks, std::abs((i + 1) / n - p), std::abs(i / n - p)});
    }
    EXPECT_LT(ks, 0.01) << m.describe();
  }
}

TEST(Realization, RestrictAndRequireGaussian) {
  const auto f = rfim::sample_field(FieldModel::gaussian(0.0, 1.0), LatticeRegion::cube(2, 3), CounterRng(1));
  const std::vector<std::size_t> idx{4, 0, 8};
  const auto r = rfim::restrict_field(f, idx);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r.phi[0], f.phi[4]);
  EXPECT_EQ(r.z[2], f.z[8]);
  rfim::FieldRealization bare;
  bare.phi = {0.1, 0.2};
  EXPECT_FALSE(bare.has_gaussian());
  EXPECT_THROW(rfim::require_gaussian(bare, "test"), rfim::MissingGaussianError);
  EXPECT_NO_THROW(rfim::require_gaussian(f, "test"));
}
