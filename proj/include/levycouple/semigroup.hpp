#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "levycouple/error.hpp"
#include "levycouple/measure.hpp"
#include "levycouple/poisson.hpp"

namespace levycouple {

/// Default truncation tolerance for the Poisson-weighted series.
inline constexpr double kDefaultSeriesTolerance = 1e-8;

struct SeriesOptions {
  /// Keep nu0^{*n}, n <= N, for later per-power evaluations.
  bool keep_powers = true;
  ConvolveOptions convolve;
};

/// Compound Poisson transition law from the origin,
///   P_t(0, .) = e^{-lambda t} sum_n (lambda t)^n / n! nu0^{*n},
/// truncated at the smallest N whose Poisson tail is within tolerance.
/// Immutable after construction; evaluating at another start point is a shift.
class SemigroupSeries {
 public:
  const MixedMeasure& step_law() const noexcept { return step_law_; }
  double rate() const noexcept { return rate_; }
  double time() const noexcept { return time_; }
  double tolerance() const noexcept { return tol_; }
  std::size_t truncation_order() const noexcept { return poisson_.order; }
  double tail_mass() const noexcept { return poisson_.tail_mass; }
  const std::vector<double>& weights() const noexcept { return poisson_.weights; }

  /// Sub-probability measure sum_{n <= N} w_n nu0^{*n}; mass 1 - tail_mass.
  const MixedMeasure& law_from_origin() const noexcept { return origin_law_; }

  bool has_powers() const noexcept { return powers_ != nullptr; }
  const std::vector<MixedMeasure>& powers() const {
    require(powers_ != nullptr, ErrorCode::InvalidArgument, "series was built without a powers cache");
    return *powers_;
  }

 private:
  friend std::vector<SemigroupSeries> build_series_path(const MixedMeasure&, double,
                                                        const std::vector<double>&, double,
                                                        const SeriesOptions&);

  MixedMeasure step_law_;
  double rate_ = 0.0;
  double time_ = 0.0;
  double tol_ = kDefaultSeriesTolerance;
  PoissonTruncation poisson_;
  MixedMeasure origin_law_;
  std::shared_ptr<const std::vector<MixedMeasure>> powers_;
};

struct TvInterval {
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
  double tail_mass = 0.0;
};

namespace detail {

inline void check_step_law(const MixedMeasure& step_law) {
  require(is_probability(step_law), ErrorCode::InvalidArgument,
          "step law must be a probability measure (mass " + std::to_string(step_law.total_mass()) + ")");
}

/// Iterates nu0^{*0}, nu0^{*1}, ... by successive convolution with nu0.
class PowerSequence {
 public:
  PowerSequence(const MixedMeasure& step, const ConvolveOptions& opts)
      : step_(step), opts_(opts), current_(MixedMeasure::dirac(Point::zero(step.dim()))) {}

  const MixedMeasure& current() const noexcept { return current_; }
  std::size_t index() const noexcept { return index_; }

  void advance() {
    try {
      current_ = convolve(current_, step_, opts_);
    } catch (const BudgetError& e) {
      throw BudgetError(index_, std::string(e.what()) + " (achieved power " + std::to_string(index_) + ")");
    }
    ++index_;
  }

 private:
  const MixedMeasure& step_;
  ConvolveOptions opts_;
  MixedMeasure current_;
  std::size_t index_ = 0;
};

}  // namespace detail

/// Law of start + S_n for the random walk with steps distributed as step_law.
inline MixedMeasure rw_law(const MixedMeasure& step_law, std::size_t n, const Point& start,
                           const ConvolveOptions& opts = {}) {
  detail::check_step_law(step_law);
  return shift(convolution_power(step_law, n, opts), start);
}

/// Builds the series for several times at once. Convolution powers are
/// computed once and shared; each time gets its own truncation order.
inline std::vector<SemigroupSeries> build_series_path(const MixedMeasure& step_law, double rate,
                                                      const std::vector<double>& times, double tol,
                                                      const SeriesOptions& opts = {}) {
  detail::check_step_law(step_law);
  require(std::isfinite(rate) && rate > 0.0, ErrorCode::InvalidArgument, "rate must be positive");
  require(tol > 0.0 && tol < 1.0, ErrorCode::InvalidArgument, "tolerance must lie in (0, 1)");
  std::vector<SemigroupSeries> out(times.size());
  std::size_t n_max = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(std::isfinite(times[i]) && times[i] >= 0.0, ErrorCode::InvalidArgument,
            "times must be finite and nonnegative");
    auto& s = out[i];
    s.step_law_ = step_law;
    s.rate_ = rate;
    s.time_ = times[i];
    s.tol_ = tol;
    s.poisson_ = poisson_truncation(rate * times[i], tol);
    s.origin_law_ = MixedMeasure(step_law.dim());
    n_max = std::max(n_max, s.poisson_.order);
  }

  auto powers = opts.keep_powers ? std::make_shared<std::vector<MixedMeasure>>() : nullptr;
  detail::PowerSequence seq(step_law, opts.convolve);
  for (std::size_t n = 0; n <= n_max; ++n) {
    if (n > 0) seq.advance();
    if (powers) powers->push_back(seq.current());
    for (auto& s : out) {
      if (n > s.poisson_.order) continue;
      const double w = s.poisson_.weights[n];
      if (w == 0.0) continue;
      s.origin_law_ = sum(s.origin_law_, scaled(seq.current(), w));
    }
  }
  if (powers) {
    std::shared_ptr<const std::vector<MixedMeasure>> shared = powers;
    for (auto& s : out) s.powers_ = shared;
  }
  return out;
}

inline SemigroupSeries build_series(const MixedMeasure& step_law, double rate, double t,
                                    double tol = kDefaultSeriesTolerance,
                                    const SeriesOptions& opts = {}) {
  return build_series_path(step_law, rate, {t}, tol, opts).front();
}

/// P_t(x, .) truncated at order N: the origin law shifted to x.
inline MixedMeasure cp_transition(const SemigroupSeries& series, const Point& x) {
  return shift(series.law_from_origin(), x);
}

/// Interval certified to contain ||P_t(x, .) - P_t(y, .)||_var. The truncated
/// laws differ from the exact ones by tail_mass each, so the half-width is
/// 2 tail_mass; the upper end is capped at 2.
inline TvInterval cp_tv(const SemigroupSeries& series, const Point& x, const Point& y) {
  const double center = tv_distance(cp_transition(series, x), cp_transition(series, y));
  const double tail = series.tail_mass();
  return {std::max(0.0, center - 2.0 * tail), std::min(2.0, center + 2.0 * tail), center, tail};
}

/// ||P(x + S_n in .) - P(y + S_n in .)||_var for n = 0..n_max.
inline std::vector<double> rw_tv_sequence(const MixedMeasure& step_law, const Point& x, const Point& y,
                                          std::size_t n_max, const ConvolveOptions& opts = {}) {
  detail::check_step_law(step_law);
  std::vector<double> tv;
  tv.reserve(n_max + 1);
  detail::PowerSequence seq(step_law, opts);
  for (std::size_t n = 0; n <= n_max; ++n) {
    if (n > 0) seq.advance();
    tv.push_back(tv_distance(shift(seq.current(), x), shift(seq.current(), y)));
  }
  return tv;
}

/// Truncated right-hand side of the mixture inequality
///   ||P_t(x,.) - P_t(y,.)|| <= sum_n w_n ||P(x+S_n) - P(y+S_n)||,
/// plus 2 tail_mass for the omitted terms. `rw_tv[n]` is the walk TV at step n.
inline double series_tv_bound(const SemigroupSeries& series, const std::vector<double>& rw_tv) {
  const auto& w = series.weights();
  require(rw_tv.size() >= w.size(), ErrorCode::InvalidArgument, "walk TV sequence is too short");
  double bound = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) bound += w[n] * rw_tv[n];
  return bound + 2.0 * series.tail_mass();
}

inline double series_tv_bound(const SemigroupSeries& series, const Point& x, const Point& y,
                              const ConvolveOptions& opts = {}) {
  std::vector<double> tv;
  if (series.has_powers()) {
    for (std::size_t n = 0; n <= series.truncation_order(); ++n) {
      const auto& p = series.powers()[n];
      tv.push_back(tv_distance(shift(p, x), shift(p, y)));
    }
  } else {
    tv = rw_tv_sequence(series.step_law(), x, y, series.truncation_order(), opts);
  }
  // The n = 0 term is ||delta_x - delta_y|| = 2 (1 - delta_{x,y}).
  tv[0] = x.approx_equal(y, kDefaultDedupTolerance) ? 0.0 : 2.0;
  return series_tv_bound(series, tv);
}

/// cp_tv centers along strictly increasing times. t -> ||P_t(x,.) - P_t(y,.)||
/// is non-increasing, so the result should be too, up to 4 tol.
inline std::vector<double> monotone_tv_check(const MixedMeasure& step_law, double rate, const Point& x,
                                             const Point& y, const std::vector<double>& times,
                                             double tol = kDefaultSeriesTolerance,
                                             const ConvolveOptions& opts = {}) {
  for (std::size_t i = 1; i < times.size(); ++i)
    require(times[i] > times[i - 1], ErrorCode::InvalidArgument, "times must be strictly increasing");
  SeriesOptions so;
  so.keep_powers = false;
  so.convolve = opts;
  const auto path = build_series_path(step_law, rate, times, tol, so);
  std::vector<double> centers;
  centers.reserve(path.size());
  for (const auto& s : path) centers.push_back(cp_tv(s, x, y).center);
  return centers;
}

/// Checks P_{t+s} f(i) >= e^{-lambda s} P_t f(i) for the rate-lambda Poisson
/// process on Z, for every indicator f of a point in [-R, R] and every start
/// i in [-R, R], using exact pmfs.
inline bool poisson_shift_inequality_check(double rate, double t, double s, long long radius) {
  require(rate > 0.0 && t >= 0.0 && s >= 0.0 && radius >= 0, ErrorCode::InvalidArgument,
          "rate must be positive; t, s, radius nonnegative");
  const double damp = std::exp(-rate * s);
  for (long long i = -radius; i <= radius; ++i)
    for (long long j = -radius; j <= radius; ++j) {
      const long long k = j - i;
      const double later = poisson_pmf(rate * (t + s), k);
      const double earlier = damp * poisson_pmf(rate * t, k);
      if (later < earlier - 1e-12) return false;
    }
  return true;
}

}  // namespace levycouple
