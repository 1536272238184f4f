#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rfim/field_models.hpp"
#include "rfim/gibbs.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"
#include "rfim/quadrature.hpp"
#include "rfim/rng.hpp"
#include "rfim/stats.hpp"

namespace rfim {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Exact subset-weight identities

inline BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt c = 1;
  for (unsigned j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return c;
}

// 1 / (n C(n-1, a)): weight of one subset of size a in the resampling sum.
inline Rational subset_weight_closed_form(unsigned n0, unsigned a1) {
  if (n0 == 0 || a1 > n0 - 1) {
    throw std::invalid_argument("subset_weight_closed_form: need 0 <= a1 <= n0 - 1");
  }
  return Rational(BigInt(1), BigInt(n0) * binomial(n0 - 1, a1));
}

// Sum over all A subset of [n] \ {i} of 1 / (n C(n-1, |A|)).
inline Rational subset_weight_sum(unsigned n) {
  Rational s = 0;
  for (unsigned a = 0; a < n; ++a) s += Rational(binomial(n - 1, a)) * subset_weight_closed_form(n, a);
  return s;
}

/// Total weight of the subsets A = A1 u A2 with A2 ranging over the
/// complement of a neighbourhood of size n0 in a region of size n_total:
/// (1/N) sum_k C(N - n0, k) / C(N - 1, a1 + k).
inline Rational subset_weight_marginal(unsigned n_total, unsigned n0, unsigned a1) {
  if (n0 == 0 || n0 > n_total || a1 > n0 - 1) {
    throw std::invalid_argument("subset_weight_marginal: need a1 < n0 <= n_total");
  }
  Rational s = 0;
  const unsigned rest = n_total - n0;
  for (unsigned k = 0; k <= rest; ++k) {
    s += Rational(binomial(rest, k), binomial(n_total - 1, a1 + k));
  }
  return s / Rational(n_total);
}

/// Both sides of sum_{k=0}^n C(n,k)/C(n+m,k+l) = (n+m+1)/((m+1) C(m,l)).
inline std::pair<Rational, Rational> beta_subset_identity(unsigned n, unsigned m, unsigned l) {
  if (l > m) throw std::invalid_argument("beta_subset_identity: need m >= l >= 0");
  Rational lhs = 0;
  for (unsigned k = 0; k <= n; ++k) lhs += Rational(binomial(n, k), binomial(n + m, k + l));
  const Rational rhs(BigInt(n + m + 1), BigInt(m + 1) * binomial(m, l));
  return {lhs, rhs};
}

// ---------------------------------------------------------------------------
// Subset law

/// Law on subsets A of [n] \ {i} with P(A) = 1 / (n C(n-1, |A|)):
/// |A| uniform on {0..n-1}, then A uniform among subsets of that size.
struct SubsetLaw {
  std::size_t n = 1;

  [[nodiscard]] std::vector<std::size_t> sample(std::size_t i, CounterRng rng) const {
    if (n == 0) throw std::invalid_argument("SubsetLaw: n must be >= 1");
    if (i >= n) throw std::out_of_range("SubsetLaw: coordinate out of range");
    const std::size_t size = rng.below(n);
    std::vector<std::size_t> pool;
    pool.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) pool.push_back(j);
    }
    for (std::size_t a = 0; a < size; ++a) {
      const std::size_t pick = a + rng.below(pool.size() - a);
      std::swap(pool[a], pool[pick]);
    }
    pool.resize(size);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  [[nodiscard]] double probability(std::size_t subset_size) const {
    return 1.0 / (static_cast<double>(n) *
                  static_cast<double>(binomial(static_cast<unsigned>(n - 1),
                                               static_cast<unsigned>(subset_size))));
  }
};

inline std::vector<std::size_t> sample_subset(const SubsetLaw& law, std::size_t i, CounterRng rng) {
  return law.sample(i, rng);
}

// ---------------------------------------------------------------------------
// Resampling statistic T

/// Monte Carlo estimate of E(T) = Var f(X).
///
/// Each replication draws X, X', a uniform coordinate i and A from the subset
/// law, and records (n/2) Delta_i f(X) Delta_i f(X^A); the factor n undoes
/// the uniform choice of i. `draw(CounterRng)` samples one coordinate.
template <class F, class Draw>
Estimate estimate_T(F&& f, std::size_t n, Draw&& draw, const CounterRng& rng, std::size_t reps,
                    unsigned workers = 1) {
  if (reps < 2) throw std::invalid_argument("estimate_T: need at least 2 replications");
  if (n == 0) throw std::invalid_argument("estimate_T: need at least one coordinate");
  const SubsetLaw law{n};
  const auto values = parallel_map<double>(reps, workers, [&](std::size_t r) {
    const CounterRng rr = rng.split(r);
    const CounterRng rx = rr.split(stream::primary);
    const CounterRng rxp = rr.split(stream::copy);
    using Coord = decltype(draw(rx.split(0)));
    std::vector<Coord> x(n), xp(n);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = draw(rx.split(j));
      xp[j] = draw(rxp.split(j));
    }
    CounterRng pick = rr.split(stream::site_choice);
    const std::size_t i = pick.below(n);
    const auto subset = law.sample(i, rr.split(stream::subset));
    std::vector<Coord> xa = x;
    for (std::size_t j : subset) xa[j] = xp[j];
    std::vector<Coord> xi = x;
    xi[i] = xp[i];
    std::vector<Coord> xai = xa;
    xai[i] = xp[i];
    const double d0 = f(x) - f(xi);
    const double d1 = f(xa) - f(xai);
    return 0.5 * static_cast<double>(n) * d0 * d1;
  });
  return mean_estimate(values);
}

// ---------------------------------------------------------------------------
// Neighbourhoods

/// N_i = box_region(i, k) intersected with the region, for every site.
struct NeighborhoodSystem {
  int k = 0;
  std::vector<SubRegion> nbhd;
  std::vector<bool> interior;                   // N_i is the full box
  std::vector<std::vector<std::size_t>> overlaps;  // j with N_i and N_j intersecting (i included)

  static NeighborhoodSystem build(const LatticeRegion& region, int k) {
    NeighborhoodSystem ns;
    ns.k = k;
    const std::size_t n = region.size();
    ns.nbhd.reserve(n);
    std::vector<std::vector<std::size_t>> members(n);  // x -> {i : x in N_i}
    for (std::size_t i = 0; i < n; ++i) {
      ns.nbhd.push_back(local_box(region, i, k));
      ns.interior.push_back(box_contained(region, region.site(i), k));
      for (std::size_t x : ns.nbhd.back().host_index) members[x].push_back(i);
    }
    ns.overlaps.resize(n);
    std::vector<std::size_t> stamp(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t x : ns.nbhd[i].host_index) {
        for (std::size_t j : members[x]) {
          if (stamp[j] != i) {
            stamp[j] = i;
            ns.overlaps[i].push_back(j);
          }
        }
      }
      std::sort(ns.overlaps[i].begin(), ns.overlaps[i].end());
    }
    return ns;
  }

  [[nodiscard]] std::size_t size() const noexcept { return nbhd.size(); }

  // Number of ordered pairs (i, j) with intersecting neighbourhoods.
  [[nodiscard]] std::size_t overlap_count() const noexcept {
    std::size_t c = 0;
    for (const auto& o : overlaps) c += o.size();
    return c;
  }

  [[nodiscard]] std::vector<std::size_t> interior_sites() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < interior.size(); ++i) {
      if (interior[i]) out.push_back(i);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Local approximants

// Log-odds of sigma_center on the neighbourhood with a uniform boundary condition.
inline double local_log_odds(const SubRegion& nb, std::span<const double> host_phi, double beta,
                             const BoundaryCondition& bc = BoundaryCondition::plus()) {
  std::vector<double> phi(nb.host_index.size());
  for (std::size_t a = 0; a < phi.size(); ++a) phi[a] = host_phi[nb.host_index[a]];
  return site_log_odds(nb.region, bc, phi, beta, nb.center);
}

// <sigma_center> on the neighbourhood with a uniform boundary condition.
inline double local_magnetization(const SubRegion& nb, std::span<const double> host_phi, double beta,
                                  const BoundaryCondition& bc = BoundaryCondition::plus()) {
  return std::tanh(0.5 * local_log_odds(nb, host_phi, beta, bc));
}

/// g_i = (1/beta) log(cosh a_i + <sigma_i>_{N_i,+} sinh a_i), a_i = beta (phi'_i - phi_i).
inline double local_g_finite(const SubRegion& nb, std::span<const double> host_phi, double phi_prime_i,
                             double beta, const BoundaryCondition& bc = BoundaryCondition::plus()) {
  const double phi_i = host_phi[nb.host_index[nb.center]];
  const double alpha = beta * (phi_prime_i - phi_i);
  if (alpha == 0.0) return 0.0;
  return free_energy_shift_log_odds(alpha, local_log_odds(nb, host_phi, beta, bc), beta);
}

inline double local_g_finite(const LatticeRegion& region, std::span<const double> phi, std::size_t i, int k,
                             double phi_prime_i, double beta) {
  return local_g_finite(local_box(region, i, k), phi, phi_prime_i, beta);
}

/// g_i = -u'(z_i) sigma_hat_i^k.
inline double local_g_ground(const SubRegion& nb, const FieldRealization& host) {
  require_gaussian(host, "local_g_ground");
  const std::size_t i = nb.host_index[nb.center];
  return -host.uprime[i] * local_ground_spin(nb, host.phi);
}

inline double local_g_ground(const LatticeRegion& region, const FieldRealization& host, std::size_t i, int k) {
  return local_g_ground(local_box(region, i, k), host);
}

// ---------------------------------------------------------------------------
// Moment profile

/// Per-site L^p norms of the derivative (m) and of the approximation gap
/// (eps), plus ||g||_4, each with a jackknife standard error.
struct MomentProfile {
  std::vector<Estimate> m2, m3, m4;
  std::vector<Estimate> eps2, eps4;
  std::vector<Estimate> g4;

  [[nodiscard]] std::size_t size() const noexcept { return m2.size(); }
};

/// Profile from samples laid out [replication][site].
inline MomentProfile moment_profile(const std::vector<std::vector<double>>& delta,
                                    const std::vector<std::vector<double>>& g) {
  const std::size_t reps = delta.size();
  if (reps < 100) throw std::invalid_argument("moment profile: need at least 100 replications");
  if (g.size() != reps) throw std::invalid_argument("moment profile: sample shapes differ");
  const std::size_t n = delta.front().size();
  MomentProfile p;
  std::vector<double> d(reps), gap(reps), gv(reps);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < reps; ++r) {
      d[r] = delta[r][i];
      gv[r] = g[r][i];
      gap[r] = d[r] - gv[r];
    }
    p.m2.push_back(lp_norm_estimate(d, 2.0));
    p.m3.push_back(lp_norm_estimate(d, 3.0));
    p.m4.push_back(lp_norm_estimate(d, 4.0));
    p.eps2.push_back(lp_norm_estimate(gap, 2.0));
    p.eps4.push_back(lp_norm_estimate(gap, 4.0));
    p.g4.push_back(lp_norm_estimate(gv, 4.0));
  }
  return p;
}

/// eval(replication stream) -> (derivative values, approximant values),
/// one entry per site.
template <class Eval>
MomentProfile estimate_moment_profile(Eval&& eval, const CounterRng& rng, std::size_t reps,
                                      unsigned workers = 1) {
  if (reps < 100) throw std::invalid_argument("estimate_moment_profile: need at least 100 replications");
  using Pair = std::pair<std::vector<double>, std::vector<double>>;
  auto samples = parallel_map<Pair>(reps, workers, [&](std::size_t r) { return eval(rng.split(r)); });
  std::vector<std::vector<double>> delta(reps), g(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    delta[r] = std::move(samples[r].first);
    g[r] = std::move(samples[r].second);
  }
  return moment_profile(delta, g);
}

/// Derivative and approximant samples for several k on shared realizations.
struct ApproximationSamples {
  std::vector<int> ks;
  std::vector<std::vector<double>> delta;               // [rep][site]
  std::vector<std::vector<std::vector<double>>> g;      // [k index][rep][site]

  [[nodiscard]] MomentProfile profile(std::size_t k_index) const { return moment_profile(delta, g[k_index]); }
};

/// Finite beta: Delta_i F by the closed form on the full region, g_i on N_i.
inline ApproximationSamples sample_finite_approximations(const LatticeRegion& region, const BoundaryCondition& bc,
                                                         const FieldModel& model, double beta,
                                                         const std::vector<NeighborhoodSystem>& systems,
                                                         const CounterRng& rng, std::size_t reps,
                                                         unsigned workers = 1) {
  const BoundaryCondition local_bc =
      bc.kind() == BoundaryCondition::Kind::minus ? BoundaryCondition::minus() : BoundaryCondition::plus();
  struct Row {
    std::vector<double> delta;
    std::vector<std::vector<double>> g;
  };
  const std::size_t n = region.size();
  auto rows = parallel_map<Row>(reps, workers, [&](std::size_t r) {
    const CounterRng rr = rng.split(r);
    const FieldRealization x = sample_field(model, region, rr.split(stream::primary));
    const FieldRealization xp = sample_field(model, region, rr.split(stream::copy));
    const GibbsSolution full = solve(region, bc, x.phi, beta);
    Row row;
    row.delta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      row.delta[i] = free_energy_shift(beta * (xp.phi[i] - x.phi[i]), full.magnetization[i], beta);
    }
    for (const auto& ns : systems) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) {
        const SubRegion& nb = ns.nbhd[i];
        const bool whole = nb.region.size() == n && bc.kind() == local_bc.kind();
        const double a = beta * (xp.phi[i] - x.phi[i]);
        g[i] = whole ? free_energy_shift(a, full.magnetization[i], beta)
                     : free_energy_shift_log_odds(a, local_log_odds(nb, x.phi, beta, local_bc), beta);
      }
      row.g.push_back(std::move(g));
    }
    return row;
  });
  ApproximationSamples out;
  for (const auto& ns : systems) out.ks.push_back(ns.k);
  out.g.resize(systems.size());
  for (auto& row : rows) {
    out.delta.push_back(std::move(row.delta));
    for (std::size_t q = 0; q < systems.size(); ++q) out.g[q].push_back(std::move(row.g[q]));
  }
  return out;
}

/// beta = infinity: d_i G = -u'(z_i) sigma_hat_i on the full region, g_i on N_i.
inline ApproximationSamples sample_ground_approximations(const LatticeRegion& region, const BoundaryCondition& bc,
                                                         const FieldModel& model,
                                                         const std::vector<NeighborhoodSystem>& systems,
                                                         const CounterRng& rng, std::size_t reps,
                                                         unsigned workers = 1) {
  struct Row {
    std::vector<double> delta;
    std::vector<std::vector<double>> g;
  };
  const std::size_t n = region.size();
  auto rows = parallel_map<Row>(reps, workers, [&](std::size_t r) {
    const FieldRealization x = sample_field(model, region, rng.split(r).split(stream::primary));
    const GroundState gs = ground_state_mincut(region, bc, x.phi);
    Row row;
    row.delta = ground_gradient(gs, x);
    for (const auto& ns : systems) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = local_g_ground(ns.nbhd[i], x);
      row.g.push_back(std::move(g));
    }
    return row;
  });
  ApproximationSamples out;
  for (const auto& ns : systems) out.ks.push_back(ns.k);
  out.g.resize(systems.size());
  for (auto& row : rows) {
    out.delta.push_back(std::move(row.delta));
    for (std::size_t q = 0; q < systems.size(); ++q) out.g[q].push_back(std::move(row.g[q]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistic S, finite beta

/// E(S) and the per-site interior value E(S_0).
struct SEstimate {
  Estimate total;
  Estimate interior_site;  // NaN when the region has no k-interior
  std::size_t interior_count = 0;
};

// One sample of 2 S_i = g_i g_i^{A1}, with A1 drawn from the subset law on N_i.
inline double sample_g_product(const SubRegion& nb, std::span<const double> phi, std::span<const double> phi_prime,
                               double beta, const BoundaryCondition& local_bc, const CounterRng& subset_rng) {
  const std::size_t m = nb.host_index.size();
  std::vector<double> local(m), swapped(m);
  for (std::size_t a = 0; a < m; ++a) local[a] = phi[nb.host_index[a]];
  swapped = local;
  for (std::size_t a : SubsetLaw{m}.sample(nb.center, subset_rng)) swapped[a] = phi_prime[nb.host_index[a]];
  const std::size_t i = nb.host_index[nb.center];
  const double alpha = beta * (phi_prime[i] - phi[i]);
  if (alpha == 0.0) return 0.0;
  const double g0 = free_energy_shift_log_odds(alpha, site_log_odds(nb.region, local_bc, local, beta, nb.center), beta);
  const double g1 = free_energy_shift_log_odds(alpha, site_log_odds(nb.region, local_bc, swapped, beta, nb.center), beta);
  return g0 * g1;
}

/// E(S) = sum_i E(S_i) with S_i = 1/2 E_{A1}[g_i g_i^{A1}].
///
/// The weight of A1 inside N_i is 1/(|N_i| C(|N_i|-1, |A1|)) regardless of
/// the region, so A1 is drawn from the subset law on N_i. With
/// `translation_invariance` only one interior site is simulated and counted
/// |interior| times.
inline SEstimate estimate_S_finite(const LatticeRegion& region, const BoundaryCondition& bc, const FieldModel& model,
                                   const NeighborhoodSystem& ns, double beta, const CounterRng& rng,
                                   std::size_t reps, bool translation_invariance = true, unsigned workers = 1) {
  if (reps < 2) throw std::invalid_argument("estimate_S_finite: need at least 2 replications");
  const BoundaryCondition local_bc =
      bc.kind() == BoundaryCondition::Kind::minus ? BoundaryCondition::minus() : BoundaryCondition::plus();
  const std::vector<std::size_t> inner = ns.interior_sites();
  std::vector<std::size_t> simulate;
  std::optional<std::size_t> representative;
  if (translation_invariance && !inner.empty()) {
    // Interior site closest to the middle of the interior list.
    representative = inner[inner.size() / 2];
    for (std::size_t i = 0; i < region.size(); ++i) {
      if (!ns.interior[i]) simulate.push_back(i);
    }
  } else {
    simulate.resize(region.size());
    std::iota(simulate.begin(), simulate.end(), 0);
  }
  struct Row {
    double total;
    double interior;
  };
  const auto rows = parallel_map<Row>(reps, workers, [&](std::size_t r) {
    const CounterRng rr = rng.split(r);
    const FieldRealization x = sample_field(model, region, rr.split(stream::primary));
    const FieldRealization xp = sample_field(model, region, rr.split(stream::copy));
    const CounterRng subsets = rr.split(stream::subset);
    Row row{0.0, 0.0};
    double interior_sum = 0.0;
    std::size_t interior_seen = 0;
    std::vector<double> parts;
    for (std::size_t i : simulate) {
      const double s = 0.5 * sample_g_product(ns.nbhd[i], x.phi, xp.phi, beta, local_bc, subsets.split(i));
      parts.push_back(s);
      if (ns.interior[i]) {
        interior_sum += s;
        ++interior_seen;
      }
    }
    if (representative) {
      const double s0 = 0.5 * sample_g_product(ns.nbhd[*representative], x.phi, xp.phi, beta, local_bc,
                                               subsets.split(*representative));
      parts.push_back(static_cast<double>(inner.size()) * s0);
      row.interior = s0;
    } else {
      row.interior = interior_seen ? interior_sum / static_cast<double>(interior_seen)
                                   : std::numeric_limits<double>::quiet_NaN();
    }
    row.total = pairwise_sum(parts);
    return row;
  });
  std::vector<double> tot(reps), in(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    tot[r] = rows[r].total;
    in[r] = rows[r].interior;
  }
  SEstimate out;
  out.total = mean_estimate(tot);
  out.interior_count = inner.size();
  out.interior_site = inner.empty() ? Estimate{std::numeric_limits<double>::quiet_NaN(), 0.0} : mean_estimate(in);
  return out;
}

/// a_k = E(S_0) for the centre of a box of radius k, which equals the
/// per-site value at any k-interior site of any region.
inline Estimate estimate_S0_finite(int k, std::size_t d, const FieldModel& model, double beta,
                                   const CounterRng& rng, std::size_t reps, unsigned workers = 1) {
  const LatticeRegion box = LatticeRegion::box(Site(std::vector<int>(d, 0)), k);
  const SubRegion whole = local_box(box, *box.index_of(Site(std::vector<int>(d, 0))), k);
  const auto values = parallel_map<double>(reps, workers, [&](std::size_t r) {
    const CounterRng rr = rng.split(r);
    const FieldRealization x = sample_field(model, box, rr.split(stream::primary));
    const FieldRealization xp = sample_field(model, box, rr.split(stream::copy));
    return 0.5 * sample_g_product(whole, x.phi, xp.phi, beta, BoundaryCondition::plus(), rr.split(stream::subset));
  });
  return mean_estimate(values);
}

// ---------------------------------------------------------------------------
// Decay of the local approximation

struct DeltaProfile {
  int k_ref = 0;
  std::vector<int> ks;
  std::vector<Estimate> delta;        // E|m_k - m_{k_ref}|
  std::vector<Estimate> decrement;    // paired delta_k - delta_{next k}; size ks.size() - 1
  std::vector<Estimate> sensitivity;  // paired delta_k(k_ref + 1) - delta_k(k_ref); empty if not requested
};

/// delta_k proxy on coupled realizations: the field is drawn once on the
/// largest box and restricted, so m_k >= m_{k+1} >= ... >= m_{k_ref} holds
/// pathwise. m_j is the centre magnetization (finite beta) or the centre
/// ground spin (beta = nullopt, i.e. infinity) on the radius-j box with plus
/// boundary.
inline DeltaProfile estimate_delta_profile(std::vector<int> ks, int k_ref, std::size_t d, const FieldModel& model,
                                           std::optional<double> beta, const CounterRng& rng, std::size_t reps,
                                           bool sensitivity = false, unsigned workers = 1) {
  if (ks.empty()) throw std::invalid_argument("estimate_delta_profile: no k given");
  std::sort(ks.begin(), ks.end());
  if (ks.front() < 0) throw std::invalid_argument("estimate_delta_profile: k must be >= 0");
  if (ks.back() > k_ref) throw std::invalid_argument("estimate_delta_profile: need k_ref >= k");
  if (reps < 2) throw std::invalid_argument("estimate_delta_profile: need at least 2 replications");
  const int outer = sensitivity ? k_ref + 1 : k_ref;
  const Site origin(std::vector<int>(d, 0));
  const LatticeRegion big = LatticeRegion::box(origin, outer);
  const std::size_t center = *big.index_of(origin);
  std::vector<int> radii = ks;
  radii.push_back(k_ref);
  if (sensitivity) radii.push_back(k_ref + 1);
  std::vector<SubRegion> boxes;
  for (int j : radii) boxes.push_back(local_box(big, center, j));

  const auto rows = parallel_map<std::vector<double>>(reps, workers, [&](std::size_t r) {
    const FieldRealization x = sample_field(model, big, rng.split(r));
    std::vector<double> m(boxes.size());
    for (std::size_t q = 0; q < boxes.size(); ++q) {
      m[q] = beta ? local_magnetization(boxes[q], x.phi, *beta) : local_ground_spin(boxes[q], x.phi);
    }
    return m;
  });

  DeltaProfile out;
  out.k_ref = k_ref;
  out.ks = ks;
  const std::size_t ref = ks.size();
  auto column = [&](std::size_t q, std::size_t against) {
    std::vector<double> v(reps);
    for (std::size_t r = 0; r < reps; ++r) v[r] = std::abs(rows[r][q] - rows[r][against]);
    return v;
  };
  std::vector<std::vector<double>> cols;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    cols.push_back(column(q, ref));
    out.delta.push_back(mean_estimate(cols.back()));
  }
  for (std::size_t q = 0; q + 1 < ks.size(); ++q) {
    std::vector<double> diff(reps);
    for (std::size_t r = 0; r < reps; ++r) diff[r] = cols[q][r] - cols[q + 1][r];
    out.decrement.push_back(mean_estimate(diff));
  }
  if (sensitivity) {
    for (std::size_t q = 0; q < ks.size(); ++q) {
      const std::vector<double> further = column(q, ref + 1);
      std::vector<double> diff(reps);
      for (std::size_t r = 0; r < reps; ++r) diff[r] = further[r] - cols[q][r];
      out.sensitivity.push_back(mean_estimate(diff));
    }
  }
  return out;
}

inline Estimate estimate_delta_k(int k, int k_ref, std::size_t d, const FieldModel& model,
                                 std::optional<double> beta, const CounterRng& rng, std::size_t reps) {
  if (k_ref < k) throw std::invalid_argument("estimate_delta_k: need k_ref >= k");
  if (k == k_ref) return {0.0, 0.0};
  return estimate_delta_profile({k}, k_ref, d, model, beta, rng, reps).delta.front();
}

// ---------------------------------------------------------------------------
// Gaussian interpolation and the continuous statistic S

/// sqrt(t) z + sqrt(1 - t) z'.
inline std::vector<double> gaussian_interpolant(std::span<const double> z, std::span<const double> z_prime,
                                                double t) {
  if (z.size() != z_prime.size()) throw std::invalid_argument("gaussian_interpolant: length mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("gaussian_interpolant: t must lie in [0, 1]");
  const double a = std::sqrt(t);
  const double b = std::sqrt(1.0 - t);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = a * z[i] + b * z_prime[i];
  return out;
}

/// E of integral_0^1 (1/(2 sqrt t)) g(Z) . g(Z^t) dt.
///
/// With t = u^2 the weight becomes du, so each replication is a plain
/// Gauss-Legendre sum in u over [0, 1]. `g(z)` returns one value per site.
template <class G>
Estimate estimate_S_continuous(G&& g, std::size_t n, const CounterRng& rng, std::size_t reps,
                               std::size_t quad_points = 16, unsigned workers = 1) {
  if (quad_points < 8) throw std::invalid_argument("estimate_S_continuous: need at least 8 quadrature points");
  if (reps < 2) throw std::invalid_argument("estimate_S_continuous: need at least 2 replications");
  const QuadratureRule rule = gauss_legendre_unit(quad_points);
  const auto values = parallel_map<double>(reps, workers, [&](std::size_t r) {
    const CounterRng rr = rng.split(r);
    const std::vector<double> z = gaussian_vector(rr.split(stream::primary), n);
    const std::vector<double> zp = gaussian_vector(rr.split(stream::copy), n);
    const std::vector<double> g0 = g(std::span<const double>(z));
    double s = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double u = rule.nodes[q];
      const std::vector<double> zt = gaussian_interpolant(z, zp, u * u);
      const std::vector<double> gt = g(std::span<const double>(zt));
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += g0[i] * gt[i];
      s += rule.weights[q] * dot;
    }
    return s;
  });
  return mean_estimate(values);
}

// g_i(z) = -u'(z_i) sigma_hat_i^{N_i}(u(z)) for every site.
inline auto ground_local_approximant(const FieldModel& model, const NeighborhoodSystem& ns) {
  return [&model, &ns](std::span<const double> z) {
    const FieldRealization f = realize(model, z);
    std::vector<double> g(z.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = local_g_ground(ns.nbhd[i], f);
    return g;
  };
}

// Full ground-state gradient -u'(z_i) sigma_hat_i(u(z)).
inline auto ground_full_gradient(const FieldModel& model, const LatticeRegion& region, const BoundaryCondition& bc) {
  return [&model, &region, bc](std::span<const double> z) {
    const FieldRealization f = realize(model, z);
    return ground_gradient(ground_state_mincut(region, bc, f.phi), f);
  };
}

// ---------------------------------------------------------------------------
// Bounds

/// Computed normal-approximation bound with its breakdown.
///
/// Finite beta ("finite"): terms are the approximation error sum, the overlap
/// (sqrt Var S) term and the third-moment term of the Wasserstein bound.
/// Ground state ("ground"): the first two are the terms of the total
/// variation bound and the third is zero.
struct SteinReport {
  std::string mode;
  std::size_t n_sites = 0;
  int k = 0;
  std::optional<Estimate> estimate_T;
  std::optional<Estimate> estimate_S;
  double variance_estimate = 0.0;
  double variance_gap_bound = 0.0;  // bound on |sigma^2 - E(S)|
  std::array<double, 3> terms{0.0, 0.0, 0.0};
  double bound_wasserstein = std::numeric_limits<double>::quiet_NaN();
  double bound_tv = std::numeric_limits<double>::quiet_NaN();
  double bound_kolmogorov = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct BoundSums {
  double err4 = 0.0;     // sum 2 eps4 m4 + eps4^2
  double err2 = 0.0;     // sum 2 eps2 m2 + eps2^2
  double overlap = 0.0;  // sum over intersecting (i, j) of (m4+eps4)_i^2 (m4+eps4)_j^2
  double third = 0.0;    // sum m3^3
};

inline BoundSums bound_sums(const MomentProfile& p, const NeighborhoodSystem& ns, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("Stein bound: variance must be > 0");
  if (p.size() != ns.size()) throw std::invalid_argument("Stein bound: profile and neighbourhoods differ in size");
  BoundSums s;
  std::vector<double> w(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m2 = p.m2[i].value, m3 = p.m3[i].value, m4 = p.m4[i].value;
    const double e2 = p.eps2[i].value, e4 = p.eps4[i].value;
    if (m2 < 0 || m3 < 0 || m4 < 0 || e2 < 0 || e4 < 0) {
      throw std::invalid_argument("Stein bound: norms must be nonnegative");
    }
    s.err4 += 2.0 * e4 * m4 + e4 * e4;
    s.err2 += 2.0 * e2 * m2 + e2 * e2;
    s.third += m3 * m3 * m3;
    w[i] = (m4 + e4) * (m4 + e4);
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j : ns.overlaps[i]) s.overlap += w[i] * w[j];
  }
  return s;
}

}  // namespace detail

/// Wasserstein bound for the resampling construction:
/// (1/2s^2) sum(2 e4 m4 + e4^2) + (1/2s^2) sqrt(overlap sum) + (1/2s^3) sum m3^3,
/// and |s^2 - E S| <= 1/2 sum(2 e2 m2 + e2^2).
inline SteinReport bound_normcomb(const MomentProfile& profile, const NeighborhoodSystem& ns, double sigma2) {
  const auto s = detail::bound_sums(profile, ns, sigma2);
  SteinReport r;
  r.mode = "finite";
  r.n_sites = profile.size();
  r.k = ns.k;
  r.variance_estimate = sigma2;
  r.variance_gap_bound = 0.5 * s.err2;
  r.terms[0] = s.err4 / (2.0 * sigma2);
  r.terms[1] = std::sqrt(s.overlap) / (2.0 * sigma2);
  r.terms[2] = s.third / (2.0 * sigma2 * std::sqrt(sigma2));
  r.bound_wasserstein = r.terms[0] + r.terms[1] + r.terms[2];
  r.bound_kolmogorov = std::min(1.0, 2.0 * std::sqrt(r.bound_wasserstein));
  return r;
}

/// Total variation bound for the Gaussian-interpolation construction:
/// (2/s^2) sum(2 e4 m4 + e4^2) + (2/s^2) sqrt(overlap sum),
/// and |s^2 - E S| <= sum(2 e2 m2 + e2^2).
inline SteinReport bound_normcont(const MomentProfile& profile, const NeighborhoodSystem& ns, double sigma2) {
  const auto s = detail::bound_sums(profile, ns, sigma2);
  SteinReport r;
  r.mode = "ground";
  r.n_sites = profile.size();
  r.k = ns.k;
  r.variance_estimate = sigma2;
  r.variance_gap_bound = s.err2;
  r.terms[0] = 2.0 * s.err4 / sigma2;
  r.terms[1] = 2.0 * std::sqrt(s.overlap) / sigma2;
  r.terms[2] = 0.0;
  r.bound_tv = r.terms[0] + r.terms[1];
  r.bound_kolmogorov = std::min(1.0, r.bound_tv);
  return r;
}

}  // namespace rfim
