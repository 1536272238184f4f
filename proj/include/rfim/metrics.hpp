#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "rfim/field_models.hpp"
#include "rfim/stats.hpp"

namespace rfim {

enum class Standardize { yes, no };

// Integration range is widened to at least [-tail, tail]; the normal mass
// outside contributes below 1e-22.
inline constexpr double wasserstein_tail = 10.0;

namespace detail {

// Antiderivative of the standard normal CDF.
inline double cdf_primitive(double x) { return x * normal_cdf(x) + normal_density(x); }

// Integral over [a, b] of |c - Phi(x)| for a constant c in [0, 1].
inline double abs_gap_integral(double a, double b, double c) {
  if (b <= a) return 0.0;
  const double split = c <= 0.0   ? -std::numeric_limits<double>::infinity()
                       : c >= 1.0 ? std::numeric_limits<double>::infinity()
                                  : boost::math::quantile(boost::math::normal_distribution<double>(), c);
  auto below = [&](double lo, double hi) {  // Phi <= c on [lo, hi]
    return c * (hi - lo) - (cdf_primitive(hi) - cdf_primitive(lo));
  };
  auto above = [&](double lo, double hi) {
    return (cdf_primitive(hi) - cdf_primitive(lo)) - c * (hi - lo);
  };
  if (split <= a) return std::max(0.0, above(a, b));
  if (split >= b) return std::max(0.0, below(a, b));
  return std::max(0.0, below(a, split)) + std::max(0.0, above(split, b));
}

inline std::vector<double> prepared(std::span<const double> samples, Standardize mode) {
  std::vector<double> x(samples.begin(), samples.end());
  if (mode == Standardize::yes) {
    if (x.size() < 2) throw std::invalid_argument("standardization needs at least 2 samples");
    const double m = mean_of(x);
    const double sd = std::sqrt(sample_variance(x));
    if (!(sd > 0.0)) throw std::invalid_argument("samples have zero variance");
    for (double& v : x) v = (v - m) / sd;
  }
  std::sort(x.begin(), x.end());
  return x;
}

}  // namespace detail

/// W1 between the empirical law of the samples and N(0, 1), as the exact
/// integral of |F_emp - Phi| evaluated piecewise between order statistics.
inline double wasserstein_to_normal(std::span<const double> samples,
                                    Standardize mode = Standardize::yes) {
  if (samples.size() < 2) throw std::invalid_argument("wasserstein_to_normal: need >= 2 samples");
  const std::vector<double> x = detail::prepared(samples, mode);
  const std::size_t n = x.size();
  const double lo = std::min(x.front(), -wasserstein_tail);
  const double hi = std::max(x.back(), wasserstein_tail);
  std::vector<double> pieces;
  pieces.reserve(n + 1);
  pieces.push_back(detail::abs_gap_integral(lo, x.front(), 0.0));
  for (std::size_t j = 1; j < n; ++j) {
    pieces.push_back(detail::abs_gap_integral(x[j - 1], x[j], static_cast<double>(j) / static_cast<double>(n)));
  }
  pieces.push_back(detail::abs_gap_integral(x.back(), hi, 1.0));
  return pairwise_sum(pieces);
}

/// sup_t |F_emp(t) - Phi(t)|, attained at an order statistic.
inline double kolmogorov_to_normal(std::span<const double> samples,
                                   Standardize mode = Standardize::no) {
  if (samples.empty()) throw std::invalid_argument("kolmogorov_to_normal: empty input");
  const std::vector<double> x = detail::prepared(samples, mode);
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = normal_cdf(x[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - p), std::abs(static_cast<double>(i) / n - p)});
  }
  return std::min(d, 1.0);
}

/// d_K <= 2 sqrt(d_W), which holds between any law and N(0, 1).
inline bool kkw_check(double d_k, double d_w) {
  if (d_k < 0.0 || d_w < 0.0) throw std::invalid_argument("kkw_check: distances must be >= 0");
  return d_k <= 2.0 * std::sqrt(d_w) + 1e-12;
}

struct DistanceReport {
  std::size_t n_samples = 0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  double d_wasserstein = 0.0;
  double d_kolmogorov = 0.0;
  bool kkw_satisfied = true;
};

// Distances of the standardized samples to N(0, 1).
inline DistanceReport distance_report(std::span<const double> samples) {
  DistanceReport r;
  r.n_samples = samples.size();
  r.sample_mean = mean_of(samples);
  r.sample_variance = sample_variance(samples);
  r.d_wasserstein = wasserstein_to_normal(samples, Standardize::yes);
  r.d_kolmogorov = kolmogorov_to_normal(samples, Standardize::yes);
  r.kkw_satisfied = kkw_check(r.d_kolmogorov, r.d_wasserstein);
  return r;
}

}  // namespace rfim
