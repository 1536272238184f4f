#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rfim {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// q-point Gauss-Legendre rule mapped to [0, 1]; exact for polynomials of
// degree <= 2q - 1. Roots by Newton iteration on P_q.
inline QuadratureRule gauss_legendre_unit(std::size_t q) {
  if (q == 0) throw std::invalid_argument("gauss_legendre_unit: need at least one point");
  QuadratureRule rule{std::vector<double>(q), std::vector<double>(q)};
  const auto n = static_cast<double>(q);
  for (std::size_t i = 0; i < (q + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t j = 2; j <= q; ++j) {
        const auto jj = static_cast<double>(j);
        const double p2 = ((2.0 * jj - 1.0) * x * p1 - (jj - 1.0) * p0) / jj;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // x is the i-th largest root; map [-1, 1] -> [0, 1].
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[q - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[q - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace rfim
