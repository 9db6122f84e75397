#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "levycouple/criteria.hpp"
#include "levycouple/error.hpp"
#include "levycouple/measure.hpp"
#include "levycouple/parallel.hpp"
#include "levycouple/poisson.hpp"
#include "levycouple/sampling.hpp"

namespace levycouple {

inline constexpr std::uint64_t kDefaultMaxSteps = 10'000'000;

/// Joint law of (xi, xi') for one coupled step, in the frame where the
/// displacement is |a| e1. Component k is drawn with probability p_k, xi from
/// comp_k, and xi' = xi + {+|a| e1, -|a| e1, 0}[k].
struct MinekaStepLaw {
  Point displacement = Point::zero(1);
  double step = 0.0;  // |a|
  MixedMeasure base_law;
  MixedMeasure comp_plus;
  MixedMeasure comp_minus;
  MixedMeasure comp_zero;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double p_zero = 0.0;
  double stay_prob = 0.0;

  /// p_plus comp_plus + p_minus comp_minus + p_zero comp_zero.
  MixedMeasure mixture() const {
    auto m = sum(scaled(comp_plus, p_plus), scaled(comp_minus, p_minus));
    return p_zero > 0.0 ? sum(m, scaled(comp_zero, p_zero)) : m;
  }
};

inline MinekaStepLaw build_mineka(const MixedMeasure& nu0, const Point& a) {
  require(is_probability(nu0), ErrorCode::InvalidArgument, "step law must be a probability measure");
  require(a.dim() == nu0.dim(), ErrorCode::DimensionMismatch, "displacement has wrong dimension");
  if (a.is_zero()) fail(ErrorCode::ZeroDisplacement, "displacement must be nonzero");
  MinekaStepLaw law;
  law.displacement = a;
  law.step = a.norm();
  law.base_law = rotate_to_e1(nu0, a);
  const auto& nu = law.base_law;
  const Point e = Point::unit(nu.dim(), 0, law.step);
  const auto meet_plus = meet(nu, shift(nu, -e));   // xi and xi + |a| e1 both in the support
  const auto meet_minus = meet(nu, shift(nu, e));
  const double overlap = meet_plus.total_mass();
  if (overlap <= kPositivityThreshold)
    fail(ErrorCode::DegenerateOverlap, "step law does not overlap its shift by " + a.to_string());
  require(std::abs(overlap - meet_minus.total_mass()) <= 1e-12, ErrorCode::InvalidArgument,
          "overlaps with the two opposite shifts differ");
  law.p_plus = law.p_minus = 0.5 * overlap;
  law.p_zero = law.stay_prob = std::max(0.0, 1.0 - overlap);
  law.comp_plus = normalize(meet_plus).first;
  law.comp_minus = normalize(meet_minus).first;
  const auto residual = positive_part_of_difference(nu, scaled(sum(meet_plus, meet_minus), 0.5));
  law.comp_zero = residual.total_mass() > 1e-15 ? normalize(residual).first : MixedMeasure(nu.dim());
  return law;
}

struct CoupledStep {
  Point xi;
  Point xi_prime;
};

/// Samplers for the three components, built once per law.
class MinekaSampler {
 public:
  explicit MinekaSampler(const MinekaStepLaw& law)
      : law_(law), plus_(law.comp_plus), minus_(law.comp_minus) {
    if (law.p_zero > 0.0 && law.comp_zero.total_mass() > 0.0) zero_.emplace(law.comp_zero);
  }

  CoupledStep operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    const Point e = Point::unit(law_.base_law.dim(), 0, law_.step);
    if (u < law_.p_plus) {
      Point xi = plus_(rng);
      return {xi, xi + e};
    }
    if (u < law_.p_plus + law_.p_minus || !zero_) {
      Point xi = minus_(rng);
      return {xi, xi - e};
    }
    Point xi = (*zero_)(rng);
    return {xi, xi};
  }

 private:
  const MinekaStepLaw& law_;
  MeasureSampler plus_;
  MeasureSampler minus_;
  std::optional<MeasureSampler> zero_;
};

inline CoupledStep sample_coupled_step(const MinekaStepLaw& law, Rng& rng) { return MinekaSampler(law)(rng); }

namespace detail {

/// log P(T > 2m - 1) = log P(T > 2m) = log(C(2m, m) / 4^m) for the fair walk.
inline double log_fair_survival(std::uint64_t m) {
  const double md = static_cast<double>(m);
  return std::lgamma(2.0 * md + 1.0) - 2.0 * std::lgamma(md + 1.0) - 2.0 * md * std::log(2.0);
}

/// First passage of the fair +-1 walk from 0 to 1, by inversion of its
/// survival function; nullopt if it exceeds max_steps.
inline std::optional<std::uint64_t> sample_fair_passage(std::uint64_t max_steps, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u;
  do u = unit(rng);
  while (u == 0.0);
  const double lu = std::log(u);
  // T = 2k - 1 with k the smallest index whose survival falls below u.
  const std::uint64_t k_cap = max_steps / 2 + 1;
  if (log_fair_survival(k_cap) >= lu) return std::nullopt;
  std::uint64_t lo = 0, hi = k_cap;  // survival(lo) >= u > survival(hi)
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (log_fair_survival(mid) < lu ? hi : lo) = mid;
  }
  const std::uint64_t t = 2 * hi - 1;
  if (t > max_steps) return std::nullopt;
  return t;
}

}  // namespace detail

/// First n >= 1 with Z_n = +1 for the lazy walk Z (steps +-1 w.p. (1 - p)/2
/// each, 0 w.p. p) started at 0; nullopt when censored at max_steps.
/// The moving steps form a fair walk; the lazy steps add a negative binomial
/// number of holds, so the time is drawn exactly without stepping.
inline std::optional<std::uint64_t> simulate_t_s(double stay_prob, std::uint64_t max_steps, Rng& rng) {
  require(stay_prob >= 0.0 && stay_prob < 1.0, ErrorCode::InvalidArgument, "stay_prob must lie in [0, 1)");
  require(max_steps >= 1, ErrorCode::InvalidArgument, "max_steps must be at least 1");
  const auto moves = detail::sample_fair_passage(max_steps, rng);
  if (!moves) return std::nullopt;
  std::uint64_t total = *moves;
  if (stay_prob > 0.0) {
    std::negative_binomial_distribution<std::uint64_t> holds(*moves, 1.0 - stay_prob);
    total += holds(rng);
  }
  if (total > max_steps) return std::nullopt;
  return total;
}

inline std::optional<std::uint64_t> simulate_t_s(const MinekaStepLaw& law, std::uint64_t max_steps, Rng& rng) {
  return simulate_t_s(law.stay_prob, max_steps, rng);
}

/// Step-by-step simulation of the difference walk; slow, kept as a reference.
inline std::optional<std::uint64_t> simulate_t_s_stepwise(double stay_prob, std::uint64_t max_steps, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double up = 0.5 * (1.0 - stay_prob);
  long long z = 0;
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    const double u = unit(rng);
    if (u < up) ++z;
    else if (u < 2.0 * up) --z;
    if (z == 1) return n;
  }
  return std::nullopt;
}

struct PairTrace {
  std::vector<Point> s;        // S_n
  std::vector<Point> s_prime;  // S'_n
  std::optional<std::uint64_t> t_s;
};

/// Full coupled pair (S_n, S'_n) from the origin until S^1 = S'^1 + |a|.
inline PairTrace simulate_pair(const MinekaStepLaw& law, std::uint64_t max_steps, Rng& rng) {
  MinekaSampler sampler(law);
  const std::size_t d = law.base_law.dim();
  PairTrace tr;
  tr.s.push_back(Point::zero(d));
  tr.s_prime.push_back(Point::zero(d));
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    auto [xi, xi_p] = sampler(rng);
    tr.s.push_back(tr.s.back() + xi);
    tr.s_prime.push_back(tr.s_prime.back() + xi_p);
    if (std::abs(tr.s.back()[0] - tr.s_prime.back()[0] - law.step) <= 1e-9 * std::max(1.0, law.step)) {
      tr.t_s = n;
      break;
    }
  }
  return tr;
}

/// P(T > n) for n = 0..n_max, T the first passage of the lazy walk from 0
/// to +1. Mass is propagated on states -K..0; mass pushed below -K is kept
/// as surviving. Reaching +1 from there within n_max steps needs a deviation
/// of K + 2 > 12 sqrt(n_max), so the error is below exp(-72). For n_max <= 12
/// the window covers every reachable state.
inline std::vector<double> exact_first_passage(double stay_prob, std::size_t n_max) {
  require(stay_prob >= 0.0 && stay_prob < 1.0, ErrorCode::InvalidArgument, "stay_prob must lie in [0, 1)");
  require(n_max >= 1, ErrorCode::InvalidArgument, "n_max must be at least 1");
  const double up = 0.5 * (1.0 - stay_prob);
  const std::size_t K = std::min<std::size_t>(
      n_max, static_cast<std::size_t>(std::ceil(12.0 * std::sqrt(static_cast<double>(n_max)))) + 16);
  // cur[i] holds the mass at state -i.
  std::vector<double> cur(K + 1, 0.0), nxt(K + 1, 0.0);
  cur[0] = 1.0;
  double deep = 0.0;
  std::vector<double> tail(n_max + 1);
  tail[0] = 1.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const std::size_t reach = std::min(n, K);
    std::fill(nxt.begin(), nxt.begin() + static_cast<std::ptrdiff_t>(reach + 1), 0.0);
    for (std::size_t i = 0; i <= reach; ++i) {
      const double m = cur[i];
      if (m == 0.0) continue;
      nxt[i] += stay_prob * m;
      if (i > 0) nxt[i - 1] += up * m;  // from 0, the up move is absorbed
      if (i < K) nxt[i + 1] += up * m;
      else deep += up * m;
    }
    std::swap(cur, nxt);
    double alive = deep;
    for (std::size_t i = 0; i <= std::min(n, K); ++i) alive += cur[i];
    tail[n] = alive;
  }
  return tail;
}

/// P(0 <= Z_n <= 1) for the free lazy walk, n = 0..n_max.
inline std::vector<double> free_walk_occupation(double stay_prob, std::size_t n_max) {
  require(stay_prob >= 0.0 && stay_prob < 1.0, ErrorCode::InvalidArgument, "stay_prob must lie in [0, 1)");
  const double up = 0.5 * (1.0 - stay_prob);
  const std::size_t off = n_max + 1;
  std::vector<double> cur(2 * n_max + 3, 0.0), nxt(cur.size(), 0.0);
  cur[off] = 1.0;
  std::vector<double> occ(n_max + 1);
  occ[0] = 1.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (std::size_t i = off - n + 1; i <= off + n - 1; ++i) {
      const double m = cur[i];
      nxt[i] += stay_prob * m;
      nxt[i - 1] += up * m;
      nxt[i + 1] += up * m;
    }
    std::swap(cur, nxt);
    occ[n] = cur[off] + cur[off + 1];
  }
  return occ;
}

/// P(T^L > t) = P(N_t < T^S) = sum_k P(N_t = k) P(T^S > k), with the
/// Poisson sum truncated where its remaining weight is below 1e-15.
inline double subordinated_tail(double stay_prob, double rate, double t) {
  require(rate > 0.0 && t >= 0.0, ErrorCode::InvalidArgument, "rate must be positive and t nonnegative");
  const auto pois = poisson_truncation(rate * t, 1e-15);
  const auto tails = exact_first_passage(stay_prob, std::max<std::size_t>(1, pois.order));
  double p = 0.0;
  for (std::size_t k = 0; k <= pois.order; ++k) p += pois.weights[k] * tails[k];
  return p;
}

/// One draw of the coupling times. T^L is the T^S-th arrival of a rate
/// lambda Poisson clock, a Gamma(T^S, lambda) variable; k_xy is the same time
/// seen as the first t with N_t >= T^S.
struct CouplingSample {
  std::optional<std::uint64_t> t_s;  // nullopt: censored
  std::uint64_t poisson_path_seed = 0;
  double t_l = std::numeric_limits<double>::infinity();
  double k_xy = std::numeric_limits<double>::infinity();
  bool censored() const noexcept { return !t_s.has_value(); }
};

using TsSampler = std::function<std::optional<std::uint64_t>(Rng&)>;

inline TsSampler lazy_walk_ts_sampler(double stay_prob, std::uint64_t max_steps) {
  return [stay_prob, max_steps](Rng& rng) { return simulate_t_s(stay_prob, max_steps, rng); };
}

inline CouplingSample simulate_t_l(const TsSampler& ts, double rate, Rng& rng) {
  require(rate > 0.0, ErrorCode::InvalidArgument, "rate must be positive");
  CouplingSample s;
  s.t_s = ts(rng);
  s.poisson_path_seed = rng();
  if (!s.t_s) return s;
  Rng clock(s.poisson_path_seed);
  std::gamma_distribution<double> arrival(static_cast<double>(*s.t_s), 1.0 / rate);
  s.t_l = arrival(clock);
  s.k_xy = s.t_l;
  return s;
}

inline CouplingSample simulate_t_l(const MinekaStepLaw& law, double rate, std::uint64_t max_steps, Rng& rng) {
  return simulate_t_l(lazy_walk_ts_sampler(law.stay_prob, max_steps), rate, rng);
}

struct MonteCarloOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t chunk_size = 10'000;
  std::size_t n_samples = 100'000;
  std::uint64_t max_steps = kDefaultMaxSteps;
};

struct TailRow {
  double t = 0.0;
  std::size_t n_samples = 0;
  double p_hat = 0.0;
  double stderr_ = 0.0;
  std::size_t n_censored = 0;
};

/// Monte Carlo estimate of P(T^L > t) on a time grid. Chunk c draws from
/// make_stream(seed, c) and chunk results are combined in chunk order, so the
/// output depends on (seed, chunk_size) but not on the worker count.
/// Censored samples are counted as T^L > t: their T^L is at least the
/// max_steps-th arrival, which lies far beyond any practical t.
inline std::vector<TailRow> estimate_coupling_tail(const TsSampler& ts, double rate, const std::vector<double>& times,
                                                   const MonteCarloOptions& opts) {
  require(opts.n_samples >= 1 && opts.chunk_size >= 1, ErrorCode::InvalidArgument,
          "n_samples and chunk_size must be positive");
  const std::size_t n_chunks = (opts.n_samples + opts.chunk_size - 1) / opts.chunk_size;
  std::vector<std::vector<std::size_t>> exceed(n_chunks, std::vector<std::size_t>(times.size(), 0));
  std::vector<std::size_t> censored(n_chunks, 0);
  parallel_for(n_chunks, opts.workers, [&](std::size_t c) {
    Rng rng = make_stream(opts.seed, c);
    const std::size_t n = std::min(opts.chunk_size, opts.n_samples - c * opts.chunk_size);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = simulate_t_l(ts, rate, rng);
      if (s.censored()) ++censored[c];
      for (std::size_t j = 0; j < times.size(); ++j)
        if (s.t_l > times[j]) ++exceed[c][j];
    }
  });
  std::size_t total_censored = 0;
  for (auto v : censored) total_censored += v;
  std::vector<TailRow> rows;
  const double n = static_cast<double>(opts.n_samples);
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < n_chunks; ++c) k += exceed[c][j];
    const double p = static_cast<double>(k) / n;
    rows.push_back({times[j], opts.n_samples, p, std::sqrt(p * (1.0 - p) / n), total_censored});
  }
  return rows;
}

inline std::vector<TailRow> estimate_coupling_tail(const MinekaStepLaw& law, double rate,
                                                   const std::vector<double>& times, const MonteCarloOptions& opts) {
  return estimate_coupling_tail(lazy_walk_ts_sampler(law.stay_prob, opts.max_steps), rate, times, opts);
}

/// Chaining bound k * 2 P(T^S > n) for ||P(x + S_n) - P(y + S_n)||, with
/// k = floor(|x - y| / delta) + 1 equally spaced links. The stay probability is
/// the worst over the displacement grid, raised further if the actual link
/// displacement is worse.
inline double chained_tv_bound(const MixedMeasure& nu0, double delta, const Point& x, const Point& y, std::size_t n,
                               double grid_step, std::size_t workers = 0) {
  require(n >= 1, ErrorCode::InvalidArgument, "n must be at least 1");
  const double eta = eta0(nu0, delta, grid_step, workers);
  if (eta <= kPositivityThreshold)
    fail(ErrorCode::CriterionFailed, "shift overlap vanishes on the displacement grid");
  const double dist = (y - x).norm();
  const std::size_t k = static_cast<std::size_t>(std::floor(dist / delta)) + 1;
  double gamma = 1.0 - eta;
  if (dist > 0.0) {
    const Point link = (1.0 / static_cast<double>(k)) * (y - x);
    gamma = std::max(gamma, 1.0 - shift_overlap(nu0, link));
  }
  require(gamma < 1.0, ErrorCode::CriterionFailed, "link displacement has no overlap");
  return std::min(2.0 * static_cast<double>(k), static_cast<double>(k) * 2.0 * exact_first_passage(gamma, n)[n]);
}

}  // namespace levycouple
