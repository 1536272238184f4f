#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfim/errors.hpp"
#include "rfim/lattice.hpp"
#include "rfim/rng.hpp"

namespace rfim {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Value of the push-forward map and its derivative at one Gaussian point.
struct PushforwardValue {
  double u = 0.0;
  double du = 0.0;
};

/// i.i.d. random field law, always represented as u(Z) with Z ~ N(0, 1).
///
/// gaussian(m, s): u(z) = m + s z.
/// uniform(a, b):  u(z) = a + (b - a) Phi(z), Lipschitz constant (b - a)/sqrt(2 pi).
class FieldModel {
 public:
  enum class Kind { gaussian, uniform };

  static FieldModel gaussian(double mean, double stddev) {
    if (!(stddev > 0.0) || !std::isfinite(mean) || !std::isfinite(stddev)) {
      throw std::invalid_argument("gaussian field: stddev must be > 0");
    }
    return FieldModel(Kind::gaussian, mean, stddev);
  }

  static FieldModel uniform(double a, double b) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
      throw std::invalid_argument("uniform field: need a < b");
    }
    return FieldModel(Kind::uniform, a, b);
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  // (mean, stddev) for gaussian, (a, b) for uniform.
  [[nodiscard]] double first() const noexcept { return p1_; }
  [[nodiscard]] double second() const noexcept { return p2_; }

  [[nodiscard]] bool has_pushforward() const noexcept { return true; }

  [[nodiscard]] PushforwardValue pushforward(double z) const noexcept {
    switch (kind_) {
      case Kind::gaussian:
        return {p1_ + p2_ * z, p2_};
      case Kind::uniform:
        return {p1_ + (p2_ - p1_) * normal_cdf(z), (p2_ - p1_) * normal_density(z)};
    }
    return {};
  }

  [[nodiscard]] double lipschitz() const noexcept {
    return kind_ == Kind::gaussian ? p2_ : (p2_ - p1_) / std::sqrt(2.0 * std::numbers::pi);
  }

  // Analytic CDF of the field law.
  [[nodiscard]] double cdf(double x) const noexcept {
    if (kind_ == Kind::gaussian) return normal_cdf((x - p1_) / p2_);
    if (x <= p1_) return 0.0;
    if (x >= p2_) return 1.0;
    return (x - p1_) / (p2_ - p1_);
  }

  [[nodiscard]] std::string describe() const {
    return (kind_ == Kind::gaussian ? "gaussian(" : "uniform(") + std::to_string(p1_) +
           ", " + std::to_string(p2_) + ")";
  }

 private:
  FieldModel(Kind k, double p1, double p2) : kind_(k), p1_(p1), p2_(p2) {}

  Kind kind_;
  double p1_;
  double p2_;
};

inline PushforwardValue pushforward_eval(const FieldModel& model, double z) {
  if (!model.has_pushforward()) {
    throw std::invalid_argument("pushforward_eval: model has no push-forward form");
  }
  return model.pushforward(z);
}

/// Per-site field values phi, with the Gaussian coordinates z and u'(z)
/// they were generated from (empty when not available).
struct FieldRealization {
  std::vector<double> phi;
  std::vector<double> z;
  std::vector<double> uprime;

  [[nodiscard]] std::size_t size() const noexcept { return phi.size(); }
  [[nodiscard]] bool has_gaussian() const noexcept {
    return !z.empty() && z.size() == phi.size() && uprime.size() == phi.size();
  }
};

// Field realization from explicit Gaussian coordinates.
inline FieldRealization realize(const FieldModel& model, std::span<const double> z) {
  FieldRealization f;
  f.phi.resize(z.size());
  f.z.assign(z.begin(), z.end());
  f.uprime.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto v = model.pushforward(z[i]);
    f.phi[i] = v.u;
    f.uprime[i] = v.du;
  }
  return f;
}

// Standard normal vector of length n; coordinate i depends only on
// (rng.key(), i).
inline std::vector<double> gaussian_vector(const CounterRng& rng, std::size_t n) {
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.split(i).normal();
  return z;
}

/// Draws an i.i.d. field over the region. Site i's value is a function of
/// (rng.key(), i) only.
inline FieldRealization sample_field(const FieldModel& model, const LatticeRegion& region,
                                     const CounterRng& rng) {
  const std::vector<double> z = gaussian_vector(rng, region.size());
  return realize(model, z);
}

// Realization restricted to the given host indices (in that order).
inline FieldRealization restrict_field(const FieldRealization& f,
                                       std::span<const std::size_t> host_index) {
  FieldRealization out;
  out.phi.reserve(host_index.size());
  for (std::size_t h : host_index) out.phi.push_back(f.phi[h]);
  if (f.has_gaussian()) {
    for (std::size_t h : host_index) {
      out.z.push_back(f.z[h]);
      out.uprime.push_back(f.uprime[h]);
    }
  }
  return out;
}

inline void require_gaussian(const FieldRealization& f, const char* where) {
  if (!f.has_gaussian()) {
    throw MissingGaussianError(std::string(where) +
                               ": realization has no Gaussian coordinates z / u'(z)");
  }
}

}  // namespace rfim
