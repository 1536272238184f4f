#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rfim {

/// A Monte Carlo estimate together with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Pairwise (cascade) summation. The reduction tree depends only on the input
// length, so results are independent of how the inputs were produced.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean_of(std::span<const double> xs) {
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

// Unbiased sample variance.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) {
    throw std::invalid_argument("sample_variance: need at least 2 samples");
  }
  const double m = mean_of(xs);
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
  return pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
}

// Sample mean with its standard error sd / sqrt(n).
inline Estimate mean_estimate(std::span<const double> xs) {
  if (xs.size() < 2) {
    throw std::invalid_argument("mean_estimate: need at least 2 replications");
  }
  return {mean_of(xs),
          std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()))};
}

// Sample variance with the large-sample standard error sqrt((m4 - s^4) / n).
inline Estimate variance_estimate(std::span<const double> xs) {
  const double v = sample_variance(xs);
  const double m = mean_of(xs);
  std::vector<double> q(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - m;
    q[i] = d * d * d * d;
  }
  const double m4 = mean_of(q);
  return {v, std::sqrt(std::max(0.0, m4 - v * v) /
                       static_cast<double>(xs.size()))};
}

/// Plug-in L^p norm (mean |x|^p)^{1/p} with a jackknife standard error.
///
/// Leave-one-out values are obtained from the total in O(1) each.
inline Estimate lp_norm_estimate(std::span<const double> xs, double p) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("lp_norm_estimate: need >= 2 samples");
  std::vector<double> pw(n);
  for (std::size_t j = 0; j < n; ++j) pw[j] = std::pow(std::abs(xs[j]), p);
  const double total = pairwise_sum(pw);
  const double nn = static_cast<double>(n);
  const double full = std::pow(total / nn, 1.0 / p);
  std::vector<double> loo(n);
  for (std::size_t j = 0; j < n; ++j) {
    loo[j] = std::pow(std::max(0.0, total - pw[j]) / (nn - 1.0), 1.0 / p);
  }
  const double loo_mean = mean_of(loo);
  std::vector<double> dev(n);
  for (std::size_t j = 0; j < n; ++j) {
    dev[j] = (loo[j] - loo_mean) * (loo[j] - loo_mean);
  }
  return {full, std::sqrt((nn - 1.0) / nn * pairwise_sum(dev))};
}

// Worker count: RFIMLAB_WORKERS if set, else hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("RFIMLAB_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(r) for r in [0, count) on `workers` threads and returns the
/// results in index order. Each replication must derive its own randomness
/// from r, which makes the output independent of the worker count.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, unsigned workers, Fn&& fn) {
  std::vector<T> out(count);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(
                                                         std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t r = 0; r < count; ++r) out[r] = fn(r);
    return out;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < count; r += workers) out[r] = fn(r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace rfim
