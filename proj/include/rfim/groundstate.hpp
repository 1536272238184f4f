#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfim/field_models.hpp"
#include "rfim/gibbs.hpp"
#include "rfim/lattice.hpp"
#include "rfim/maxflow.hpp"

namespace rfim {

/// Minimum-energy configuration and its energy G (beta = infinity).
struct GroundState {
  SpinConfig sigma_hat;
  double energy = 0.0;
  std::vector<double> gradient;  // -u'(z_i) sigma_hat_i, filled by ground_gradient
};

struct GroundStateOptions {
  // Energies are multiplied by this factor and rounded to integer capacities.
  double capacity_scale = 1e9;
};

/// Ground state by s-t min-cut.
///
/// Source side = spin +1, sink side = spin -1. Each internal bond is an
/// undirected edge of capacity 1 (a disagreeing pair costs 2 energy units);
/// an effective field h_i > 0 becomes source -> i with capacity h_i, h_i < 0
/// becomes i -> sink with capacity |h_i|. Among minimum cuts the largest
/// source set is taken, so exact ties resolve toward +1. The returned energy
/// is recomputed from the configuration.
inline GroundState ground_state_mincut(const LatticeRegion& region, const BoundaryCondition& bc,
                                       std::span<const double> phi,
                                       const GroundStateOptions& opts = {}) {
  const std::vector<double> h = effective_field(region, bc, phi);
  const std::size_t n = region.size();
  const std::size_t src = n;
  const std::size_t snk = n + 1;
  const double scale = opts.capacity_scale;
  const auto bond_cap = static_cast<MaxFlow::Capacity>(std::llround(scale));

  MaxFlow g(n + 2);
  for (const auto& [i, j] : region.bonds()) g.add_edge(i, j, bond_cap, bond_cap);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cap = static_cast<MaxFlow::Capacity>(std::llround(std::abs(h[i]) * scale));
    if (cap == 0) continue;
    if (h[i] > 0.0) {
      g.add_edge(src, i, cap);
    } else {
      g.add_edge(i, snk, cap);
    }
  }
  g.solve(src, snk);
  const std::vector<bool> minus = g.reaches_sink(snk);

  GroundState gs;
  gs.sigma_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) gs.sigma_hat[i] = minus[i] ? -1 : 1;
  gs.energy = hamiltonian(region, bc, phi, gs.sigma_hat);
  return gs;
}

/// Ground state by exhaustive enumeration; reference for the min-cut solver.
inline GroundState ground_state_enumeration(const LatticeRegion& region, const BoundaryCondition& bc,
                                            std::span<const double> phi,
                                            std::size_t cutoff = 24) {
  detail::check_enumerable(region, cutoff);
  const std::vector<double> h = effective_field(region, bc, phi);
  GroundState gs;
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_configuration(region, h, [&](const SpinConfig& s, double e) {
    if (e < best) {
      best = e;
      gs.sigma_hat = s;
    }
  });
  gs.energy = hamiltonian(region, bc, phi, gs.sigma_hat);
  return gs;
}

/// -u'(z_i) sigma_hat_i: the derivative of G in z_i away from switch points.
inline std::vector<double> ground_gradient(const GroundState& state, const FieldRealization& field) {
  require_gaussian(field, "ground_gradient");
  if (field.size() != state.sigma_hat.size()) {
    throw std::invalid_argument("ground_gradient: realization and ground state differ in size");
  }
  std::vector<double> g(field.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -field.uprime[i] * state.sigma_hat[i];
  return g;
}

// Ground state with the gradient filled in.
inline GroundState ground_state_with_gradient(const LatticeRegion& region, const BoundaryCondition& bc,
                                              const FieldRealization& field,
                                              const GroundStateOptions& opts = {}) {
  GroundState gs = ground_state_mincut(region, bc, field.phi, opts);
  gs.gradient = ground_gradient(gs, field);
  return gs;
}

/// Centre spin of the plus-boundary ground state on a local box.
/// `host_phi` is the field on the host region the box was cut from.
inline int local_ground_spin(const SubRegion& box, std::span<const double> host_phi,
                             const GroundStateOptions& opts = {}) {
  std::vector<double> phi(box.host_index.size());
  for (std::size_t a = 0; a < phi.size(); ++a) phi[a] = host_phi[box.host_index[a]];
  return ground_state_mincut(box.region, BoundaryCondition::plus(), phi, opts).sigma_hat[box.center];
}

/// sigma_hat_i^k: centre spin of the ground state on box_region(i, k) (cut to
/// the host region) with plus boundary.
inline int local_ground_spin(const LatticeRegion& host, std::span<const double> host_phi, std::size_t i,
                             int k, const GroundStateOptions& opts = {}) {
  return local_ground_spin(local_box(host, i, k), host_phi, opts);
}

}  // namespace rfim
