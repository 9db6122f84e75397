#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "levycouple/error.hpp"

namespace levycouple {

/// Above this mean, e^{-mean} underflows and weights are seeded in the log domain.
inline constexpr double kLogDomainThreshold = 700.0;

/// Exact Poisson(mean) pmf at k, evaluated in the log domain.
inline double poisson_pmf(double mean, long long k) {
  if (k < 0) return 0.0;
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kk = static_cast<double>(k);
  return std::exp(-mean + kk * std::log(mean) - std::lgamma(kk + 1.0));
}

/// Poisson(mean) weights for n = 0..n_max.
///
/// For mean <= 700 the forward recurrence w_{n+1} = w_n * mean / (n + 1) runs
/// from e^{-mean}. Larger means seed the mode from its log value and recur in
/// both directions; the table is then rescaled to unit sum, which removes the
/// common relative error of the log-gamma seed.
inline std::vector<double> poisson_pmf_table(double mean, std::size_t n_max) {
  require(std::isfinite(mean) && mean >= 0.0, ErrorCode::InvalidArgument,
          "Poisson mean must be finite and nonnegative");
  std::vector<double> w(n_max + 1, 0.0);
  if (mean == 0.0) {
    w[0] = 1.0;
    return w;
  }
  if (mean <= kLogDomainThreshold) {
    w[0] = std::exp(-mean);
    for (std::size_t n = 0; n < n_max; ++n) w[n + 1] = w[n] * mean / static_cast<double>(n + 1);
    return w;
  }
  const std::size_t mode = std::min(n_max, static_cast<std::size_t>(std::floor(mean)));
  w[mode] = poisson_pmf(mean, static_cast<long long>(mode));
  for (std::size_t n = mode; n < n_max; ++n) w[n + 1] = w[n] * mean / static_cast<double>(n + 1);
  for (std::size_t n = mode; n > 0; --n) w[n - 1] = w[n] * static_cast<double>(n) / mean;
  if (n_max >= mode + 1) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
  }
  return w;
}

/// Index beyond which the Poisson(mean) tail is below double precision.
inline std::size_t poisson_negligible_index(double mean) {
  return static_cast<std::size_t>(std::ceil(mean + 40.0 * std::sqrt(mean) + 60.0));
}

/// Right-truncated Poisson weights: `order` is the smallest N whose tail
/// P(N_t > N) is at most the requested tolerance.
struct PoissonTruncation {
  double mean = 0.0;
  std::size_t order = 0;
  std::vector<double> weights;  // n = 0..order
  double tail_mass = 0.0;       // sum over n > order
};

inline PoissonTruncation poisson_truncation(double mean, double tol) {
  require(tol > 0.0 && tol < 1.0, ErrorCode::InvalidArgument, "tolerance must lie in (0, 1)");
  const std::size_t n_hi = poisson_negligible_index(mean);
  auto table = poisson_pmf_table(mean, n_hi);
  // tail[n] = sum_{m > n} w_m, accumulated from the small end.
  std::vector<double> tail(n_hi + 1, 0.0);
  for (std::size_t n = n_hi; n > 0; --n) tail[n - 1] = tail[n] + table[n];
  std::size_t order = 0;
  while (order < n_hi && tail[order] > tol) ++order;
  PoissonTruncation out;
  out.mean = mean;
  out.order = order;
  out.tail_mass = tail[order];
  out.weights.assign(table.begin(), table.begin() + static_cast<std::ptrdiff_t>(order + 1));
  return out;
}

}  // namespace levycouple
