#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "levycouple/error.hpp"
#include "levycouple/measure.hpp"
#include "levycouple/poisson.hpp"
#include "levycouple/semigroup.hpp"

namespace levycouple {

/// Values at or below this are numerical zeros and stay out of rate fits.
inline constexpr double kRateFitFloor = 1e-13;
/// Slopes at or above this are reported as "no decay".
inline constexpr double kNoDecaySlope = -0.05;

/// 2 e^{-lambda t} (1 - delta_xy) + sqrt(2) C (1 - e^{-lambda t}) / sqrt(lambda t), capped at 2.
inline double couplingo2_bound(double rate, double t, double c_xy, bool x_equals_y) {
  require(rate > 0.0 && t > 0.0 && c_xy >= 0.0, ErrorCode::InvalidArgument,
          "rate and t must be positive, c_xy nonnegative");
  const double m = rate * t;
  const double e = std::exp(-m);
  const double b = 2.0 * e * (x_equals_y ? 0.0 : 1.0) + std::sqrt(2.0) * c_xy * (-std::expm1(-m)) / std::sqrt(m);
  return std::min(2.0, b);
}

struct JensenCheck {
  double lhs = 0.0;        // sum_{n=1}^{N} m^n / (sqrt(n) n!)
  double lhs_tail = 0.0;   // bound on the omitted terms
  double rhs = 0.0;        // sqrt(2) (e^m - 1) / sqrt(m)
  bool holds() const { return lhs + lhs_tail <= rhs; }
};

/// Both sides of sum_n m^n / (sqrt(n) n!) <= sqrt(2) (e^m - 1) / sqrt(m), m = lambda t.
/// The left sum is e^m sum_n P(N = n) / sqrt(n) with N ~ Poisson(m); terms past the
/// truncation order weigh at most e^m times the Poisson tail.
inline JensenCheck jensen_chain_check(double rate, double t) {
  const double m = rate * t;
  require(m > 0.0 && m < 700.0, ErrorCode::InvalidArgument, "lambda t must lie in (0, 700)");
  const auto p = poisson_truncation(m, 1e-17);
  double s = 0.0;
  for (std::size_t n = 1; n < p.weights.size(); ++n) s += p.weights[n] / std::sqrt(static_cast<double>(n));
  JensenCheck out;
  const double em = std::exp(m);
  out.lhs = em * s;
  out.lhs_tail = em * p.tail_mass;
  out.rhs = std::sqrt(2.0) * std::expm1(m) / std::sqrt(m);
  return out;
}

/// min(2, c (1 + |x - y|) / sqrt(t)).
inline double th2_bound(double t, const Point& x, const Point& y, double c) {
  require(t > 0.0 && c >= 0.0, ErrorCode::InvalidArgument, "t must be positive and c nonnegative");
  return std::min(2.0, c * (1.0 + (x - y).norm()) / std::sqrt(t));
}

struct RateFit {
  std::vector<double> times;   // points used in the fit
  std::vector<double> values;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_excluded = 0;  // values at or below the floor
  bool no_decay = false;
};

/// Least squares of log value on log time.
inline RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values) {
  require(times.size() == values.size(), ErrorCode::InvalidArgument, "times and values differ in length");
  RateFit fit;
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(std::isfinite(times[i]) && times[i] > 0.0, ErrorCode::InvalidArgument, "times must be positive");
    if (!(values[i] > kRateFitFloor) || !std::isfinite(values[i])) {
      ++fit.n_excluded;
      continue;
    }
    fit.times.push_back(times[i]);
    fit.values.push_back(values[i]);
  }
  const std::size_t n = fit.times.size();
  if (n < 5) fail(ErrorCode::InsufficientData, "need at least 5 usable points, have " + std::to_string(n));
  const auto [lo, hi] = std::minmax_element(fit.times.begin(), fit.times.end());
  if (std::log10(*hi / *lo) < 2.0 - 1e-12)
    fail(ErrorCode::InsufficientData, "times must span at least two decades");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(fit.times[i]);
    my += std::log(fit.values[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(fit.times[i]) - mx, dy = std::log(fit.values[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(fit.values[i]) - (fit.intercept + fit.slope * std::log(fit.times[i]));
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
  fit.no_decay = fit.slope >= kNoDecaySlope;
  return fit;
}

/// Empirical C(x, y) = max over 1 <= n <= n_max of sqrt(n) ||P(x + S_n) - P(y + S_n)||.
inline double empirical_c_xy(const MixedMeasure& step_law, const Point& x, const Point& y, std::size_t n_max = 200,
                             const ConvolveOptions& opts = {}) {
  const auto tv = rw_tv_sequence(step_law, x, y, n_max, opts);
  double c = 0.0;
  for (std::size_t n = 1; n < tv.size(); ++n) c = std::max(c, std::sqrt(static_cast<double>(n)) * tv[n]);
  return c;
}

/// Smallest c with th2_bound(t, 0, d, c) >= cp_tv upper for every t in `times`
/// and every displacement d, i.e. the max of upper sqrt(t) / (1 + |d|).
inline double calibrate_th2_constant(const MixedMeasure& step_law, double rate, const std::vector<double>& times,
                                     const std::vector<Point>& displacements, double tol = kDefaultSeriesTolerance,
                                     const ConvolveOptions& opts = {}) {
  SeriesOptions so;
  so.keep_powers = false;
  so.convolve = opts;
  const auto path = build_series_path(step_law, rate, times, tol, so);
  const Point origin = Point::zero(step_law.dim());
  double c = 0.0;
  for (const auto& s : path) {
    require(s.time() > 0.0, ErrorCode::InvalidArgument, "calibration times must be positive");
    for (const auto& d : displacements)
      c = std::max(c, cp_tv(s, origin, d).upper * std::sqrt(s.time()) / (1.0 + d.norm()));
  }
  return c;
}

}  // namespace levycouple
