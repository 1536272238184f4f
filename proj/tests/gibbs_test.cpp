#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "rfim/errors.hpp"
#include "rfim/field_models.hpp"
#include "rfim/gibbs.hpp"
#include "rfim/groundstate.hpp"

using rfim::BoundaryCondition;
using rfim::CounterRng;
using rfim::FieldModel;
using rfim::LatticeRegion;
using rfim::Site;

namespace {

std::vector<double> random_field(const LatticeRegion& r, std::uint64_t seed, double sd = 1.0) {
  return rfim::sample_field(FieldModel::gaussian(0.0, sd), r, CounterRng(seed)).phi;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

const LatticeRegion single = LatticeRegion::from_sites({Site{0}});

}  // namespace

TEST(Hamiltonian, Examples) {
  const std::vector<double> zero1{0.0};
  EXPECT_DOUBLE_EQ(rfim::hamiltonian(single, BoundaryCondition::plus(), zero1, rfim::SpinConfig{1}), -2.0);
  EXPECT_DOUBLE_EQ(rfim::hamiltonian(single, BoundaryCondition::plus(), zero1, rfim::SpinConfig{-1}), 2.0);
  const auto box = LatticeRegion::cube(2, 2);
  const std::vector<double> zero4(4, 0.0);
  EXPECT_DOUBLE_EQ(rfim::hamiltonian(box, BoundaryCondition::plus(), zero4, rfim::SpinConfig(4, 1)), -12.0);
}

TEST(Hamiltonian, MatchesOracleOnRandomConfigs) {
  const auto region = LatticeRegion::from_sites({Site{0, 0}, Site{1, 0}, Site{2, 0}, Site{0, 1}, Site{0, 2}, Site{1, 1}});
  const auto phi = random_field(region, 3);
  for (std::uint64_t m = 0; m < 64; ++m) {
    const auto s = oracle::config(region.size(), m);
    const rfim::SpinConfig s8(s.begin(), s.end());
    EXPECT_NEAR(rfim::hamiltonian(region, BoundaryCondition::minus(), phi, s8), oracle::energy(region, -1, phi, s),
                1e-12);
  }
}

TEST(Hamiltonian, RejectsWrongLengths) {
  const std::vector<double> phi{0.0, 0.0};
  EXPECT_THROW(rfim::hamiltonian(single, BoundaryCondition::plus(), phi, rfim::SpinConfig{1}), std::invalid_argument);
  const std::vector<double> one{0.0};
  EXPECT_THROW(rfim::hamiltonian(single, BoundaryCondition::plus(), one, rfim::SpinConfig{1, 1}), std::invalid_argument);
}

TEST(BoundaryCondition, ExplicitValidation) {
  EXPECT_THROW(BoundaryCondition::explicit_values({1, 0}), std::invalid_argument);
  const auto bc = BoundaryCondition::explicit_values({1, 1, 1});
  const std::vector<double> phi{0.0};
  EXPECT_THROW(rfim::effective_field(single, bc, phi), std::invalid_argument);
  EXPECT_THROW(BoundaryCondition::parse("up"), std::invalid_argument);
  EXPECT_EQ(BoundaryCondition::parse("minus").kind(), BoundaryCondition::Kind::minus);
}

TEST(SolveEnumeration, SingleSiteClosedForm) {
  for (double beta : {0.1, 1.0, 7.0}) {
    for (double phi : {-3.0, -0.4, 0.0, 1.3}) {
      const std::vector<double> f{phi};
      const auto s = rfim::solve_enumeration(single, BoundaryCondition::plus(), f, beta);
      EXPECT_NEAR(s.free_energy, -std::log(2.0 * std::cosh(beta * (2.0 + phi))) / beta, 1e-12);
      EXPECT_NEAR(s.magnetization[0], std::tanh(beta * (2.0 + phi)), 1e-12);
      EXPECT_NEAR(s.free_energy, -s.log_partition / beta, 1e-12);
    }
    const std::vector<double> zero{0.0};
    const auto m = rfim::solve_enumeration(single, BoundaryCondition::minus(), zero, beta);
    EXPECT_NEAR(m.magnetization[0], -std::tanh(2.0 * beta), 1e-12);
  }
}

TEST(SolveEnumeration, MatchesOracle) {
  const std::vector<LatticeRegion> regions{
      LatticeRegion::cube(2, 3), LatticeRegion::cube(3, 2), LatticeRegion::cube(1, 6),
      LatticeRegion::from_sites({Site{0, 0}, Site{1, 0}, Site{2, 0}, Site{0, 1}, Site{0, 2}})};
  for (const auto& region : regions) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto phi = random_field(region, seed);
      for (int b : {1, -1}) {
        const auto bc = b > 0 ? BoundaryCondition::plus() : BoundaryCondition::minus();
        const double beta = 0.3 + 0.7 * static_cast<double>(seed);
        const auto got = rfim::solve_enumeration(region, bc, phi, beta);
        const auto want = oracle::solve(region, b, phi, beta);
        EXPECT_LT(rel(got.free_energy, want.free_energy), 1e-12);
        for (std::size_t i = 0; i < region.size(); ++i) {
          EXPECT_NEAR(got.magnetization[i], want.magnetization[i], 1e-12);
        }
      }
    }
  }
}

TEST(SolveEnumeration, Errors) {
  const std::vector<double> f{0.0};
  EXPECT_THROW(rfim::solve_enumeration(single, BoundaryCondition::plus(), f, 0.0), std::domain_error);
  EXPECT_THROW(rfim::solve_enumeration(single, BoundaryCondition::plus(), f, -1.0), std::domain_error);
  const auto big = LatticeRegion::cube(2, 5);
  EXPECT_THROW(rfim::solve_enumeration(big, BoundaryCondition::plus(), std::vector<double>(25, 0.0), 1.0),
               rfim::CapacityError);
}

TEST(SolveTransfer, MatchesEnumerationOnBoxes) {
  const std::vector<LatticeRegion> regions{
      LatticeRegion::cube(2, 3), LatticeRegion::from_extent({0, 0}, {3, 4}), LatticeRegion::from_extent({0, 0}, {6, 1}),
      LatticeRegion::from_extent({-2, 5}, {1, 8}), LatticeRegion::from_extent({0, 0}, {0, 0}),
      LatticeRegion::from_extent({0, 0}, {1, 9})};
  for (const auto& region : regions) {
    for (double beta : {0.5, 1.0, 3.0}) {
      const auto phi = random_field(region, 17);
      for (const auto& bc : {BoundaryCondition::plus(), BoundaryCondition::minus()}) {
        const auto tm = rfim::solve_transfer_matrix(region, bc, phi, beta);
        const auto en = rfim::solve_enumeration(region, bc, phi, beta);
        EXPECT_LT(rel(tm.free_energy, en.free_energy), 1e-10);
        EXPECT_LT(rel(tm.log_partition, en.log_partition), 1e-10);
        for (std::size_t i = 0; i < region.size(); ++i) {
          EXPECT_NEAR(tm.magnetization[i], en.magnetization[i], 1e-10);
        }
      }
    }
  }
}

TEST(SolveTransfer, ChainsMatchEnumeration) {
  for (int n = 1; n <= 20; n += (n < 4 ? 1 : 4)) {
    const auto chain = LatticeRegion::from_extent({0, 0}, {0, n - 1});
    const auto line = LatticeRegion::cube(1, n);
    const auto phi = random_field(chain, 100 + n);
    const auto en = rfim::solve_enumeration(chain, BoundaryCondition::plus(), phi, 0.8);
    const auto tm = rfim::solve_transfer_matrix(chain, BoundaryCondition::plus(), phi, 0.8);
    EXPECT_LT(rel(tm.free_energy, en.free_energy), 1e-10) << n;
    // In d = 1 each site has two neighbours instead of four; compare with its own enumeration.
    const auto en1 = rfim::solve_enumeration(line, BoundaryCondition::plus(), phi, 0.8);
    const auto tm1 = rfim::solve_transfer_matrix(line, BoundaryCondition::plus(), phi, 0.8);
    EXPECT_LT(rel(tm1.free_energy, en1.free_energy), 1e-10) << n;
    for (std::size_t i = 0; i < line.size(); ++i) EXPECT_NEAR(tm1.magnetization[i], en1.magnetization[i], 1e-10);
  }
}

TEST(SolveTransfer, SingleSiteClosedForm) {
  const auto one = LatticeRegion::cube(2, 1);
  const std::vector<double> f{0.7};
  const auto s = rfim::solve_transfer_matrix(one, BoundaryCondition::plus(), f, 1.5);
  EXPECT_NEAR(s.free_energy, -std::log(2.0 * std::cosh(1.5 * (4.0 + 0.7))) / 1.5, 1e-12);
  EXPECT_NEAR(s.magnetization[0], std::tanh(1.5 * 4.7), 1e-12);
}

TEST(SolveTransfer, StableAtLargeBeta) {
  const auto region = LatticeRegion::cube(2, 4);
  const auto phi = random_field(region, 5, 3.0);
  for (double beta : {50.0, 200.0, 1000.0}) {
    const auto tm = rfim::solve_transfer_matrix(region, BoundaryCondition::minus(), phi, beta);
    const auto en = rfim::solve_enumeration(region, BoundaryCondition::minus(), phi, beta);
    EXPECT_TRUE(std::isfinite(tm.free_energy));
    EXPECT_LT(rel(tm.free_energy, en.free_energy), 1e-10);
    for (std::size_t i = 0; i < region.size(); ++i) EXPECT_NEAR(tm.magnetization[i], en.magnetization[i], 1e-9);
  }
}

TEST(SolveTransfer, ShapeErrors) {
  const auto lshape = LatticeRegion::from_sites({Site{0, 0}, Site{1, 0}, Site{0, 1}});
  EXPECT_THROW(rfim::solve_transfer_matrix(lshape, BoundaryCondition::plus(), std::vector<double>(3, 0.0), 1.0),
               rfim::UnsupportedShapeError);
  const auto cube = LatticeRegion::cube(3, 2);
  EXPECT_THROW(rfim::solve_transfer_matrix(cube, BoundaryCondition::plus(), std::vector<double>(8, 0.0), 1.0),
               rfim::UnsupportedShapeError);
  const auto wide = LatticeRegion::cube(2, 21);
  EXPECT_THROW(rfim::solve_transfer_matrix(wide, BoundaryCondition::plus(), std::vector<double>(441, 0.0), 1.0),
               rfim::CapacityError);
  EXPECT_THROW(rfim::solve(wide, BoundaryCondition::plus(), std::vector<double>(441, 0.0), 1.0), rfim::CapacityError);
}

TEST(Solve, DispatchAgreesAcrossSolvers) {
  const auto region = LatticeRegion::cube(2, 4);
  const auto phi = random_field(region, 8);
  const auto a = rfim::solve(region, BoundaryCondition::plus(), phi, 1.0);
  const auto b = rfim::solve_enumeration(region, BoundaryCondition::plus(), phi, 1.0);
  EXPECT_LT(rel(a.free_energy, b.free_energy), 1e-10);
  EXPECT_NEAR(rfim::free_energy(region, BoundaryCondition::plus(), phi, 1.0), b.free_energy, 1e-10);
  for (std::size_t i = 0; i < region.size(); ++i) {
    EXPECT_NEAR(rfim::site_magnetization(region, BoundaryCondition::plus(), phi, 1.0, i), b.magnetization[i], 1e-10);
  }
}

TEST(Solve, ExplicitBoundaryBetweenPlusAndMinus) {
  const auto region = LatticeRegion::cube(2, 3);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto phi = random_field(region, seed);
    CounterRng r(1000 + seed);
    std::vector<std::int8_t> g(region.boundary().size());
    for (auto& v : g) v = r.below(2) ? 1 : -1;
    const auto bc = BoundaryCondition::explicit_values(g);
    const auto mp = rfim::solve(region, BoundaryCondition::plus(), phi, 1.0).magnetization;
    const auto mg = rfim::solve(region, bc, phi, 1.0).magnetization;
    const auto mm = rfim::solve(region, BoundaryCondition::minus(), phi, 1.0).magnetization;
    for (std::size_t i = 0; i < region.size(); ++i) {
      EXPECT_GE(mp[i], mg[i] - 1e-12);
      EXPECT_GE(mg[i], mm[i] - 1e-12);
    }
  }
  const auto all_plus = BoundaryCondition::explicit_values(std::vector<std::int8_t>(12, 1));
  const auto phi = random_field(region, 1);
  EXPECT_NEAR(rfim::free_energy(region, all_plus, phi, 2.0), rfim::free_energy(region, BoundaryCondition::plus(), phi, 2.0),
              1e-12);
}

TEST(Monotonicity, NestedBoxesWithPlusBoundary) {
  const auto outer = LatticeRegion::from_extent({-2, -2}, {2, 1});
  const auto inner = LatticeRegion::from_extent({-1, -1}, {1, 1});
  std::vector<std::size_t> host;
  for (const Site& s : inner.sites()) host.push_back(*outer.index_of(s));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto phi = random_field(outer, seed);
    std::vector<double> phi_in;
    for (std::size_t h : host) phi_in.push_back(phi[h]);
    for (double beta : {0.4, 1.0, 3.0}) {
      const auto mo = rfim::solve_enumeration(outer, BoundaryCondition::plus(), phi, beta).magnetization;
      const auto mi = rfim::solve_enumeration(inner, BoundaryCondition::plus(), phi_in, beta).magnetization;
      for (std::size_t a = 0; a < inner.size(); ++a) EXPECT_GE(mi[a], mo[host[a]] - 1e-12);
    }
  }
}

TEST(Monotonicity, IncreasingFieldIncreasesMagnetization) {
  const auto region = LatticeRegion::cube(2, 3);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto phi = random_field(region, seed);
    const auto before = rfim::solve(region, BoundaryCondition::plus(), phi, 1.0).magnetization;
    phi[seed % region.size()] += 0.5;
    const auto after = rfim::solve(region, BoundaryCondition::plus(), phi, 1.0).magnetization;
    for (std::size_t i = 0; i < region.size(); ++i) {
      EXPECT_GE(after[i], before[i] - 1e-12);
      EXPECT_LE(std::abs(after[i]), 1.0);
    }
  }
}

TEST(DeltaF, ZeroShift) {
  const auto region = LatticeRegion::cube(2, 3);
  const auto phi = random_field(region, 2);
  EXPECT_EQ(rfim::delta_F(region, BoundaryCondition::plus(), phi, 4, phi[4], 1.0), 0.0);
}

TEST(DeltaF, MatchesTwoSolves) {
  const auto region = LatticeRegion::cube(2, 3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto phi = random_field(region, seed);
    CounterRng r(seed + 500);
    const std::size_t i = r.below(region.size());
    const double phi_prime = r.normal();
    for (double beta : {0.3, 1.0, 3.0}) {
      auto moved = phi;
      moved[i] = phi_prime;
      const double want = rfim::solve_enumeration(region, BoundaryCondition::plus(), phi, beta).free_energy -
                          rfim::solve_enumeration(region, BoundaryCondition::plus(), moved, beta).free_energy;
      const double got = rfim::delta_F(region, BoundaryCondition::plus(), phi, i, phi_prime, beta);
      EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(DeltaF, SingleSiteClosedForm) {
  const double beta = 1.3, phi = 0.4, phi_prime = -1.1;
  const std::vector<double> f{phi};
  const double want = -std::log(2.0 * std::cosh(beta * (2.0 + phi))) / beta +
                      std::log(2.0 * std::cosh(beta * (2.0 + phi_prime))) / beta;
  EXPECT_NEAR(rfim::delta_F(single, BoundaryCondition::plus(), f, 0, phi_prime, beta), want, 1e-12);
}

TEST(FreeEnergyShift, StableForLargeAlpha) {
  // m = +-1 limits: (1/beta) log(e^{+-alpha}).
  EXPECT_NEAR(rfim::free_energy_shift(800.0, 1.0, 1.0), 800.0, 1e-9);
  EXPECT_NEAR(rfim::free_energy_shift(-800.0, 1.0, 1.0), -800.0, 1e-9);
  EXPECT_TRUE(std::isfinite(rfim::free_energy_shift(800.0, -1.0, 1.0)));
  EXPECT_NEAR(rfim::free_energy_shift(0.3, 0.2, 2.0),
              std::log(std::cosh(0.3) + 0.2 * std::sinh(0.3)) / 2.0, 1e-15);
}

TEST(Gradient, FiniteDifferenceInZ) {
  const auto region = LatticeRegion::cube(2, 3);
  for (const auto& model : {FieldModel::gaussian(0.2, 1.3), FieldModel::uniform(-2.0, 2.0)}) {
    const auto f = rfim::sample_field(model, region, CounterRng(31));
    const double beta = 1.0, h = 1e-4;
    const auto sol = rfim::solve(region, BoundaryCondition::plus(), f.phi, beta);
    for (std::size_t i = 0; i < region.size(); ++i) {
      auto zp = f.z, zm = f.z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (rfim::free_energy(region, BoundaryCondition::plus(), rfim::realize(model, zp).phi, beta) -
                         rfim::free_energy(region, BoundaryCondition::plus(), rfim::realize(model, zm).phi, beta)) /
                        (2.0 * h);
      const double want = -f.uprime[i] * sol.magnetization[i];
      EXPECT_NEAR(fd, want, 1e-5 * std::max(std::abs(want), 1e-3));
    }
  }
}

TEST(Sandwich, GroundStateBoundsFreeEnergy) {
  const auto region = LatticeRegion::cube(2, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto phi = random_field(region, seed);
    const double g = rfim::ground_state_mincut(region, BoundaryCondition::plus(), phi).energy;
    for (double beta : {0.5, 5.0, 50.0}) {
      const double f = rfim::free_energy(region, BoundaryCondition::plus(), phi, beta);
      EXPECT_LE(f, g + 1e-9);
      EXPECT_GE(f, g - 9.0 * std::log(2.0) / beta - 1e-9);
    }
  }
}
