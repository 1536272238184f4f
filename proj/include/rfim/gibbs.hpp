#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rfim/errors.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

using SpinConfig = std::vector<std::int8_t>;

/// Fixed +-1 spins on the exterior boundary of a region.
class BoundaryCondition {
 public:
  enum class Kind { plus, minus, explicit_values };

  static BoundaryCondition plus() { return BoundaryCondition(Kind::plus, {}); }
  static BoundaryCondition minus() { return BoundaryCondition(Kind::minus, {}); }

  // One value per site of region.boundary(), in its (sorted) order.
  static BoundaryCondition explicit_values(std::vector<std::int8_t> values) {
    for (auto v : values) {
      if (v != 1 && v != -1) {
        throw std::invalid_argument("BoundaryCondition: values must be +1 or -1");
      }
    }
    return BoundaryCondition(Kind::explicit_values, std::move(values));
  }

  static BoundaryCondition parse(const std::string& name) {
    if (name == "plus" || name == "+") return plus();
    if (name == "minus" || name == "-") return minus();
    throw std::invalid_argument("unknown boundary condition '" + name + "'");
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

  [[nodiscard]] std::int8_t value(std::size_t boundary_index) const {
    switch (kind_) {
      case Kind::plus:
        return 1;
      case Kind::minus:
        return -1;
      case Kind::explicit_values:
        return values_.at(boundary_index);
    }
    return 1;
  }

  // Per region site: sum of the adjacent boundary spins.
  [[nodiscard]] std::vector<double> site_field(const LatticeRegion& region) const {
    if (kind_ == Kind::explicit_values && values_.size() != region.boundary().size()) {
      throw std::invalid_argument("BoundaryCondition: explicit values must cover the boundary exactly (" +
                                  std::to_string(values_.size()) + " given, " +
                                  std::to_string(region.boundary().size()) + " needed)");
    }
    std::vector<double> out(region.size(), 0.0);
    for (std::size_t i = 0; i < region.size(); ++i) {
      for (std::size_t b : region.boundary_neighbors(i)) out[i] += value(b);
    }
    return out;
  }

  [[nodiscard]] std::string name() const {
    return kind_ == Kind::plus ? "plus" : kind_ == Kind::minus ? "minus" : "explicit";
  }

 private:
  BoundaryCondition(Kind k, std::vector<std::int8_t> v) : kind_(k), values_(std::move(v)) {}

  Kind kind_;
  std::vector<std::int8_t> values_;
};

// h_i = phi_i + (boundary spins adjacent to i). With it the energy reads
// H = -sum_{bonds} s_i s_j - sum_i h_i s_i.
inline std::vector<double> effective_field(const LatticeRegion& region, const BoundaryCondition& bc,
                                           std::span<const double> phi) {
  if (phi.size() != region.size()) {
    throw std::invalid_argument("field length " + std::to_string(phi.size()) +
                                " does not match region size " + std::to_string(region.size()));
  }
  std::vector<double> h = bc.site_field(region);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += phi[i];
  return h;
}

/// H(sigma) = -sum_{internal pairs} s_x s_y - sum_{x~y in boundary} s_x g_y - sum_x phi_x s_x.
///
/// Each unordered internal pair is counted once.
inline double hamiltonian(const LatticeRegion& region, const BoundaryCondition& bc,
                          std::span<const double> phi, std::span<const std::int8_t> sigma) {
  if (sigma.size() != region.size()) {
    throw std::invalid_argument("hamiltonian: spin configuration has wrong length");
  }
  const std::vector<double> bfield = bc.site_field(region);
  if (phi.size() != region.size()) throw std::invalid_argument("hamiltonian: field has wrong length");
  double pair = 0.0;
  for (const auto& [i, j] : region.bonds()) pair += sigma[i] * sigma[j];
  double boundary_term = 0.0;
  double field_term = 0.0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    boundary_term += sigma[i] * bfield[i];
    field_term += phi[i] * sigma[i];
  }
  return -pair - boundary_term - field_term;
}

/// Exact finite-temperature solution on one region.
struct GibbsSolution {
  double beta = 0.0;
  double free_energy = 0.0;    // F = -log_partition / beta
  double log_partition = 0.0;  // log sum_sigma exp(-beta H)
  std::vector<double> magnetization;  // <sigma_i>, empty if not requested
};

struct SolveOptions {
  std::size_t enumeration_cutoff = 24;
  std::size_t transfer_cutoff = 20;
  bool magnetization = true;
};

namespace detail {

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double log_add_exp(double x, double y) {
  if (x < y) std::swap(x, y);
  if (y == -std::numeric_limits<double>::infinity()) return x;
  return x + std::log1p(std::exp(y - x));
}

}  // namespace detail

/// (1/beta) log(cosh a + m sinh a) = F(phi) - F(phi'), where site i has
/// log-odds L = log(P(sigma_i = +1) / P(sigma_i = -1)) under phi and its
/// field moves by a/beta. Working from L keeps 1 +- m accurate near m = +-1.
inline double free_energy_shift_log_odds(double alpha, double log_odds, double beta) {
  if (alpha == 0.0) return 0.0;
  const double log_plus = -detail::softplus(-log_odds);
  const double log_minus = -detail::softplus(log_odds);
  return detail::log_add_exp(alpha + log_plus, -alpha + log_minus) / beta;
}

/// Same shift from the magnetization m itself.
inline double free_energy_shift(double alpha, double m, double beta) {
  return free_energy_shift_log_odds(alpha, std::log1p(m) - std::log1p(-m), beta);
}

namespace detail {

inline void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::domain_error("inverse temperature must be finite and > 0");
  }
}

/// Visits all 2^n configurations in Gray-code order, calling
/// visit(spins, energy) for each. Energies are updated incrementally and
/// resynchronised periodically to bound rounding drift.
template <class Visit>
void for_each_configuration(const LatticeRegion& region, std::span<const double> h, Visit&& visit) {
  const std::size_t n = region.size();
  SpinConfig s(n, -1);
  auto exact_energy = [&] {
    double e = 0.0;
    for (const auto& [i, j] : region.bonds()) e -= s[i] * s[j];
    for (std::size_t i = 0; i < n; ++i) e -= h[i] * s[i];
    return e;
  };
  double energy = exact_energy();
  visit(std::as_const(s), energy);
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const auto j = static_cast<std::size_t>(std::countr_zero(step));
    double local = h[j];
    for (std::size_t nb : region.internal_neighbors(j)) local += s[nb];
    energy += 2.0 * s[j] * local;
    s[j] = static_cast<std::int8_t>(-s[j]);
    if ((step & 0xfff) == 0) energy = exact_energy();
    visit(std::as_const(s), energy);
  }
}

inline void check_enumerable(const LatticeRegion& region, std::size_t cutoff) {
  if (region.size() > cutoff || region.size() > 62) {
    throw CapacityError("enumeration: region has " + std::to_string(region.size()) +
                        " sites, cutoff is " + std::to_string(cutoff));
  }
}

// Sweep geometry of a box: position t = c * width + r visits region site order[t].
struct TransferLayout {
  std::size_t cols = 0;
  std::size_t width = 0;
  std::vector<std::size_t> order;
};

inline bool transfer_capable(const LatticeRegion& region, std::size_t cutoff) {
  const auto& ext = region.extent();
  if (!ext) return false;
  if (region.dim() == 1) return true;
  if (region.dim() != 2) return false;
  return static_cast<std::size_t>(std::min(ext->side(0), ext->side(1))) <= cutoff;
}

inline TransferLayout make_layout(const LatticeRegion& region, std::size_t cutoff) {
  const auto& ext = region.extent();
  if (!ext || region.dim() > 2) {
    throw UnsupportedShapeError("transfer matrix: region must be an axis-aligned box in d <= 2");
  }
  TransferLayout L;
  if (region.dim() == 1) {
    L.cols = static_cast<std::size_t>(ext->side(0));
    L.width = 1;
    for (std::size_t c = 0; c < L.cols; ++c) L.order.push_back(c);
    return L;
  }
  const auto s0 = static_cast<std::size_t>(ext->side(0));
  const auto s1 = static_cast<std::size_t>(ext->side(1));
  if (std::min(s0, s1) > cutoff) {
    throw CapacityError("transfer matrix: min side " + std::to_string(std::min(s0, s1)) +
                        " exceeds cutoff " + std::to_string(cutoff));
  }
  // Lexicographic index of (x0, x1) is x0 * s1 + x1. Sweep along the longer axis.
  const bool along0 = s0 >= s1;
  L.cols = along0 ? s0 : s1;
  L.width = along0 ? s1 : s0;
  L.order.resize(s0 * s1);
  for (std::size_t c = 0; c < L.cols; ++c) {
    for (std::size_t r = 0; r < L.width; ++r) {
      L.order[c * L.width + r] = along0 ? c * s1 + r : r * s1 + c;
    }
  }
  return L;
}

/// Site-by-site transfer matrix over a frontier of `width` spins.
///
/// Bit r of a frontier state holds the spin of row r (1 = +1). Adding the
/// site at (c, r) replaces the spin of (c-1, r) by the new spin; its left
/// neighbour is the replaced spin and its upper neighbour is bit r-1.
class TransferSweep {
 public:
  TransferSweep(const TransferLayout& layout, std::span<const double> h, double beta)
      : L_(layout), h_(h), beta_(beta), weights_(layout.order.size()) {
    double hmax = 0.0;
    for (std::size_t t = 0; t < L_.order.size(); ++t) hmax = std::max(hmax, std::abs(h_[L_.order[t]]));
    // Frontier states differ in partial energy by at most 2 width (2 + hmax).
    // Past exp(-600) a linear vector could lose the state that later dominates.
    log_domain_ = 2.0 * beta_ * static_cast<double>(L_.width) * (2.0 + hmax) > 600.0;
    for (std::size_t t = 0; t < L_.order.size(); ++t) {
      const std::size_t c = t / L_.width;
      const std::size_t r = t % L_.width;
      const double jl = c > 0 ? 1.0 : 0.0;
      const double ju = r > 0 ? 1.0 : 0.0;
      const double hi = h_[L_.order[t]];
      const double shift = beta_ * (jl + ju + std::abs(hi));
      auto& w = weights_[t];
      w.shift = shift;
      for (int nw = 0; nw < 2; ++nw) {
        for (int old = 0; old < 2; ++old) {
          for (int up = 0; up < 2; ++up) {
            const double x = nw ? 1.0 : -1.0;
            const double l = old ? 1.0 : -1.0;
            const double u = up ? 1.0 : -1.0;
            const double e = beta_ * (jl * x * l + ju * x * u + hi * x) - shift;
            w.w[nw][old][up] = log_domain_ ? e : std::exp(e);
          }
        }
      }
    }
  }

  [[nodiscard]] std::size_t states() const noexcept { return std::size_t{1} << L_.width; }
  [[nodiscard]] std::size_t steps() const noexcept { return L_.order.size(); }
  [[nodiscard]] std::size_t row(std::size_t t) const noexcept { return t % L_.width; }
  [[nodiscard]] const TransferLayout& layout() const noexcept { return L_; }
  [[nodiscard]] bool log_domain() const noexcept { return log_domain_; }

  [[nodiscard]] std::vector<double> initial() const {
    std::vector<double> v(states(), zero());
    v[0] = one();
    return v;
  }

  // Backward vectors start at all ones.
  [[nodiscard]] std::vector<double> terminal() const { return std::vector<double>(states(), one()); }

  // v <- M_t v; accumulates the removed scale into log_scale.
  void forward(std::vector<double>& v, std::size_t t, double& log_scale) const {
    apply(v, t, false);
    log_scale += weights_[t].shift;
    renormalize(v, log_scale);
  }

  // b <- M_t^T b.
  void backward(std::vector<double>& b, std::size_t t, double& log_scale) const {
    apply(b, t, true);
    log_scale += weights_[t].shift;
    renormalize(b, log_scale);
  }

  // Zero the entries whose bit for step t differs from `spin`.
  void clamp(std::vector<double>& v, std::size_t t, int spin) const {
    const std::size_t bit = std::size_t{1} << row(t);
    const std::size_t keep = spin > 0 ? bit : 0;
    for (std::size_t s = 0; s < v.size(); ++s) {
      if ((s & bit) != keep) v[s] = zero();
    }
  }

  // log of the total weight held in v.
  [[nodiscard]] double log_total(const std::vector<double>& v, double log_scale) const {
    if (!log_domain_) {
      double s = 0.0;
      for (double x : v) s += x;
      return s > 0.0 ? std::log(s) + log_scale : -std::numeric_limits<double>::infinity();
    }
    const double m = *std::max_element(v.begin(), v.end());
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s) + log_scale;
  }

  // <sigma> of the spin held at `bit`, from matching forward and backward vectors.
  [[nodiscard]] double spin_mean(const std::vector<double>& f, const std::vector<double>& b, std::size_t bit) const {
    const std::size_t n = f.size();
    if (!log_domain_) {
      double num = 0.0, den = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double p = f[s] * b[s];
        den += p;
        num += (s & bit) ? p : -p;
      }
      return std::clamp(num / den, -1.0, 1.0);
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) m = std::max(m, f[s] + b[s]);
    double up = 0.0, down = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double p = std::exp(f[s] + b[s] - m);
      ((s & bit) ? up : down) += p;
    }
    return std::clamp((up - down) / (up + down), -1.0, 1.0);
  }

 private:
  struct StepWeights {
    double w[2][2][2];  // [new][old][up], log weights in the log domain
    double shift;
  };

  [[nodiscard]] double zero() const noexcept { return log_domain_ ? -std::numeric_limits<double>::infinity() : 0.0; }
  [[nodiscard]] double one() const noexcept { return log_domain_ ? 0.0 : 1.0; }

  void apply(std::vector<double>& v, std::size_t t, bool transpose) const {
    const std::size_t r = row(t);
    const std::size_t half = std::size_t{1} << r;
    const std::size_t n = v.size();
    const auto& w = weights_[t].w;
    auto pass = [&](std::size_t lo, std::size_t hi, int up, std::size_t base) {
      const double a = w[0][0][up], b = w[0][1][up], c = w[1][0][up], d = w[1][1][up];
      double* p0 = v.data() + base;
      double* p1 = p0 + half;
      if (log_domain_) {
        const double b2 = transpose ? c : b, c2 = transpose ? b : c;
        for (std::size_t k = lo; k < hi; ++k) {
          const double x0 = p0[k], x1 = p1[k];
          p0[k] = log_add_exp(a + x0, b2 + x1);
          p1[k] = log_add_exp(c2 + x0, d + x1);
        }
      } else if (!transpose) {
        for (std::size_t k = lo; k < hi; ++k) {
          const double x0 = p0[k], x1 = p1[k];
          p0[k] = a * x0 + b * x1;
          p1[k] = c * x0 + d * x1;
        }
      } else {
        for (std::size_t k = lo; k < hi; ++k) {
          const double x0 = p0[k], x1 = p1[k];
          p0[k] = a * x0 + c * x1;
          p1[k] = b * x0 + d * x1;
        }
      }
    };
    for (std::size_t base = 0; base < n; base += 2 * half) {
      if (r == 0) {
        pass(0, 1, 0, base);
      } else {
        // Bit r-1 (the upper neighbour) is 0 on the first half-block, 1 on the second.
        const std::size_t q = half / 2;
        pass(0, q, 0, base);
        pass(q, half, 1, base);
      }
    }
  }

  void renormalize(std::vector<double>& v, double& log_scale) const {
    const double m = *std::max_element(v.begin(), v.end());
    if (log_domain_) {
      if (m == -std::numeric_limits<double>::infinity()) return;
      for (double& x : v) x -= m;
      log_scale += m;
      return;
    }
    if (m == 0.0) return;
    if (m < 1e-30 || m > 1e100) {
      const double inv = 1.0 / m;
      for (double& x : v) x *= inv;
      log_scale += std::log(m);
    }
  }

  const TransferLayout& L_;
  std::span<const double> h_;
  double beta_;
  std::vector<StepWeights> weights_;
  bool log_domain_ = false;
};

}  // namespace detail

/// Exact solution by summing over all 2^n configurations (log-sum-exp
/// relative to the minimum energy).
inline GibbsSolution solve_enumeration(const LatticeRegion& region, const BoundaryCondition& bc,
                                       std::span<const double> phi, double beta,
                                       const SolveOptions& opts = {}) {
  detail::check_beta(beta);
  detail::check_enumerable(region, opts.enumeration_cutoff);
  const std::vector<double> h = effective_field(region, bc, phi);
  const std::size_t n = region.size();

  double emin = std::numeric_limits<double>::infinity();
  detail::for_each_configuration(region, h, [&](const SpinConfig&, double e) { emin = std::min(emin, e); });

  double z = 0.0;
  std::vector<double> plus_weight(opts.magnetization ? n : 0, 0.0);
  detail::for_each_configuration(region, h, [&](const SpinConfig& s, double e) {
    const double w = std::exp(-beta * (e - emin));
    z += w;
    if (opts.magnetization) {
      for (std::size_t i = 0; i < n; ++i) {
        if (s[i] > 0) plus_weight[i] += w;
      }
    }
  });

  GibbsSolution sol;
  sol.beta = beta;
  sol.log_partition = -beta * emin + std::log(z);
  sol.free_energy = emin - std::log(z) / beta;
  if (opts.magnetization) {
    sol.magnetization.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      sol.magnetization[i] = std::clamp(2.0 * plus_weight[i] / z - 1.0, -1.0, 1.0);
    }
  }
  return sol;
}

/// Exact solution of a box in d <= 2 by a site-by-site transfer matrix over
/// the shorter side. Magnetizations use a backward sweep against forward
/// vectors recomputed per column from column-start checkpoints.
inline GibbsSolution solve_transfer_matrix(const LatticeRegion& region, const BoundaryCondition& bc,
                                           std::span<const double> phi, double beta,
                                           const SolveOptions& opts = {}) {
  detail::check_beta(beta);
  const detail::TransferLayout layout = detail::make_layout(region, opts.transfer_cutoff);
  const std::vector<double> h = effective_field(region, bc, phi);
  const detail::TransferSweep sweep(layout, h, beta);

  std::vector<std::vector<double>> checkpoints;
  if (opts.magnetization) checkpoints.reserve(layout.cols);
  std::vector<double> v = sweep.initial();
  double log_scale = 0.0;
  for (std::size_t t = 0; t < sweep.steps(); ++t) {
    if (opts.magnetization && t % layout.width == 0) checkpoints.push_back(v);
    sweep.forward(v, t, log_scale);
  }

  GibbsSolution sol;
  sol.beta = beta;
  sol.log_partition = sweep.log_total(v, log_scale);
  sol.free_energy = -sol.log_partition / beta;
  if (!opts.magnetization) return sol;

  sol.magnetization.assign(region.size(), 0.0);
  std::vector<double> b = sweep.terminal();
  double bscale = 0.0;
  std::vector<std::vector<double>> column(layout.width);
  for (std::size_t c = layout.cols; c-- > 0;) {
    std::vector<double> f = checkpoints[c];
    double fscale = 0.0;
    for (std::size_t r = 0; r < layout.width; ++r) {
      sweep.forward(f, c * layout.width + r, fscale);
      column[r] = f;
    }
    for (std::size_t r = layout.width; r-- > 0;) {
      const std::size_t t = c * layout.width + r;
      sol.magnetization[layout.order[t]] = sweep.spin_mean(column[r], b, std::size_t{1} << r);
      sweep.backward(b, t, bscale);
    }
  }
  return sol;
}

/// Dispatches to the transfer matrix for boxes in d <= 2 and to enumeration
/// otherwise; throws CapacityError if neither applies.
inline GibbsSolution solve(const LatticeRegion& region, const BoundaryCondition& bc,
                           std::span<const double> phi, double beta, const SolveOptions& opts = {}) {
  if (detail::transfer_capable(region, opts.transfer_cutoff)) {
    return solve_transfer_matrix(region, bc, phi, beta, opts);
  }
  if (region.size() <= opts.enumeration_cutoff) return solve_enumeration(region, bc, phi, beta, opts);
  throw CapacityError("no exact finite-beta solver for a non-box region of " +
                      std::to_string(region.size()) + " sites (enumeration cutoff " +
                      std::to_string(opts.enumeration_cutoff) + ")");
}

inline double free_energy(const LatticeRegion& region, const BoundaryCondition& bc,
                          std::span<const double> phi, double beta, SolveOptions opts = {}) {
  opts.magnetization = false;
  return solve(region, bc, phi, beta, opts).free_energy;
}

/// log(P(sigma_site = +1) / P(sigma_site = -1)). On transfer-capable boxes
/// this runs two clamped sweeps instead of the full magnetization pass.
inline double site_log_odds(const LatticeRegion& region, const BoundaryCondition& bc,
                                 std::span<const double> phi, double beta, std::size_t site,
                                 const SolveOptions& opts = {}) {
  if (site >= region.size()) throw std::out_of_range("site_log_odds: site not in region");
  if (!detail::transfer_capable(region, opts.transfer_cutoff)) {
    const double m = solve(region, bc, phi, beta, opts).magnetization[site];
    return std::log1p(m) - std::log1p(-m);
  }
  detail::check_beta(beta);
  const detail::TransferLayout layout = detail::make_layout(region, opts.transfer_cutoff);
  const std::vector<double> h = effective_field(region, bc, phi);
  const detail::TransferSweep sweep(layout, h, beta);
  std::size_t target = 0;
  while (layout.order[target] != site) ++target;

  std::vector<double> v = sweep.initial();
  double scale = 0.0;
  for (std::size_t t = 0; t <= target; ++t) sweep.forward(v, t, scale);
  std::vector<double> vp = v, vm = v;
  double sp = scale, sm = scale;
  sweep.clamp(vp, target, +1);
  sweep.clamp(vm, target, -1);
  for (std::size_t t = target + 1; t < sweep.steps(); ++t) {
    sweep.forward(vp, t, sp);
    sweep.forward(vm, t, sm);
  }
  const double lp = sweep.log_total(vp, sp);
  const double lm = sweep.log_total(vm, sm);
  return lp - lm;
}

/// <sigma_site>.
inline double site_magnetization(const LatticeRegion& region, const BoundaryCondition& bc,
                                 std::span<const double> phi, double beta, std::size_t site,
                                 const SolveOptions& opts = {}) {
  return std::tanh(0.5 * site_log_odds(region, bc, phi, beta, site, opts));
}

/// Delta_i F = F(phi) - F(phi with phi_i replaced by phi_prime_i), via the
/// closed form in the magnetization of site i.
inline double delta_F(const LatticeRegion& region, const BoundaryCondition& bc,
                      std::span<const double> phi, std::size_t site, double phi_prime_i, double beta,
                      const SolveOptions& opts = {}) {
  detail::check_beta(beta);
  if (site >= region.size()) throw std::out_of_range("delta_F: site not in region");
  const double alpha = beta * (phi_prime_i - phi[site]);
  if (alpha == 0.0) return 0.0;
  return free_energy_shift_log_odds(alpha, site_log_odds(region, bc, phi, beta, site, opts), beta);
}

}  // namespace rfim
