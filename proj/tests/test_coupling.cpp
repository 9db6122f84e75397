#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "levycouple/coupling.hpp"
#include "levycouple/semigroup.hpp"
#include "test_support.hpp"

namespace lc = levycouple;
using lc::AtomicMeasure;
using lc::GridDensity;
using lc::MixedMeasure;
using lc::Point;

namespace {

MixedMeasure two_point() { return MixedMeasure(AtomicMeasure(1, {{Point{-1.0}, 0.5}, {Point{1.0}, 0.5}})); }

// P(T > n) by enumerating all 3^n step sequences.
double enumerate_tail(double stay, int n) {
  const double up = 0.5 * (1.0 - stay);
  double alive = 0.0;
  std::vector<int> steps(n, 0);
  long long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    double p = 1.0;
    int z = 0;
    bool hit = false;
    for (int i = 0; i < n; ++i) {
      const int s = static_cast<int>(c % 3) - 1;
      c /= 3;
      p *= s == 0 ? stay : up;
      z += s;
      if (z == 1) {
        hit = true;
        break;
      }
    }
    if (!hit) alive += p;
  }
  return alive;
}

// P(T > n) = sum_m Binom(n, 1 - stay)(m) * C(m, floor(m/2)) / 2^m, in logs.
double closed_form_tail(double stay, long long n) {
  long double acc = 0.0L;
  for (long long m = 0; m <= n; ++m) {
    const double lb = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) +
                      (m > 0 ? m * std::log1p(-stay) : 0.0) + (n - m > 0 ? (n - m) * std::log(stay) : 0.0);
    const double lf = std::lgamma(m + 1.0) - std::lgamma(m / 2 + 1.0) - std::lgamma(m - m / 2 + 1.0) - m * std::log(2.0);
    acc += std::exp(static_cast<long double>(lb + lf));
  }
  return static_cast<double>(acc);
}

}  // namespace

TEST(BuildMineka, UniformQuarterShift) {
  auto law = lc::build_mineka(MixedMeasure(GridDensity::uniform(0.0, 1.0, 1.0 / 512)), Point{0.25});
  EXPECT_NEAR(law.p_plus, 0.375, 1e-12);
  EXPECT_NEAR(law.p_minus, 0.375, 1e-12);
  EXPECT_NEAR(law.p_zero, 0.25, 1e-12);
  EXPECT_EQ(law.stay_prob, law.p_zero);
  EXPECT_NEAR(law.p_plus + law.p_minus + law.p_zero, 1.0, 1e-12);
  EXPECT_LE(lc::tv_distance(law.mixture(), law.base_law), 1e-9);
}

TEST(BuildMineka, TwoPointLaw) {
  auto law = lc::build_mineka(two_point(), Point{2.0});
  EXPECT_NEAR(law.p_plus, 0.25, 1e-15);
  EXPECT_NEAR(law.p_zero, 0.5, 1e-15);
  // comp_plus sits where xi + 2 is also an atom.
  ASSERT_EQ(law.comp_plus.atomic().size(), 1u);
  EXPECT_EQ(law.comp_plus.atomic().location(0)[0], -1.0);
  EXPECT_LE(lc::tv_distance(law.mixture(), law.base_law), 1e-12);
}

TEST(BuildMineka, Errors) {
  try {
    lc::build_mineka(two_point(), Point{1.0});
    FAIL();
  } catch (const lc::Error& e) {
    EXPECT_EQ(e.code(), lc::ErrorCode::DegenerateOverlap);
  }
  try {
    lc::build_mineka(two_point(), Point{0.0});
    FAIL();
  } catch (const lc::Error& e) {
    EXPECT_EQ(e.code(), lc::ErrorCode::ZeroDisplacement);
  }
}

TEST(BuildMineka, MixtureIdentityOnRandomLaws) {
  std::mt19937_64 rng(3);
  int built = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = 1 + rep % 2;
    auto nu0 = lc::testing::random_probability(rng, dim, 8, 1);
    std::vector<double> a(dim, 0.0);
    a[rep % dim] = (rep % 3 == 0 ? -0.25 : 0.25) * (1 + rep % 2);
    try {
      auto law = lc::build_mineka(nu0, Point(a));
      EXPECT_EQ(law.p_plus, law.p_minus);
      EXPECT_NEAR(law.p_plus + law.p_minus + law.p_zero, 1.0, 1e-12);
      EXPECT_LE(lc::tv_distance(law.mixture(), law.base_law), 1e-9);
      EXPECT_NEAR(law.p_zero, 1.0 - lc::shift_overlap(nu0, Point(a)), 1e-12);
      ++built;
    } catch (const lc::Error& e) {
      EXPECT_EQ(e.code(), lc::ErrorCode::DegenerateOverlap);
    }
  }
  EXPECT_GT(built, 30);
}

TEST(SampleCoupledStep, MarginalsAndSymmetry) {
  auto law = lc::build_mineka(MixedMeasure(GridDensity::uniform(0.0, 1.0, 1.0 / 512)), Point{0.25});
  lc::MinekaSampler sampler(law);
  auto rng = lc::make_stream(11, 0);
  const int n = 200'000, bins = 32;
  std::vector<double> h1(bins, 0.0), h2(bins, 0.0);
  long long plus = 0, minus = 0;
  for (int i = 0; i < n; ++i) {
    auto [xi, xp] = sampler(rng);
    const double d = xp[0] - xi[0];
    ASSERT_TRUE(std::abs(d) < 1e-12 || std::abs(std::abs(d) - 0.25) < 1e-12) << d;
    if (d > 0.1) ++plus;
    if (d < -0.1) ++minus;
    h1[std::min(bins - 1, static_cast<int>(xi[0] * bins))] += 1.0 / n;
    h2[std::min(bins - 1, static_cast<int>(xp[0] * bins))] += 1.0 / n;
  }
  double tv1 = 0.0, tv2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    tv1 += std::abs(h1[b] - 1.0 / bins);
    tv2 += std::abs(h2[b] - 1.0 / bins);
  }
  EXPECT_LE(tv1, 0.02);
  EXPECT_LE(tv2, 0.02);
  EXPECT_LE(std::abs(plus - minus), 3.0 * std::sqrt(static_cast<double>(plus + minus)));
  EXPECT_NEAR(static_cast<double>(n - plus - minus) / n, 0.25, 3 * std::sqrt(0.25 * 0.75 / n));
}

TEST(ExactFirstPassage, SmallValues) {
  auto t = lc::exact_first_passage(0.0, 3);
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[1], 0.5);
  EXPECT_EQ(t[2], 0.5);
  EXPECT_EQ(t[3], 0.375);  // 1 - 1/2 - 1/8
}

TEST(ExactFirstPassage, EqualsEnumeration) {
  for (double stay : {0.0, 0.25, 0.5}) {
    auto t = lc::exact_first_passage(stay, 12);
    for (int n = 0; n <= 12; ++n) EXPECT_EQ(t[n], enumerate_tail(stay, n)) << stay << " " << n;
  }
}

TEST(ExactFirstPassage, MatchesClosedFormAtLargeN) {
  for (double stay : {0.0, 0.25, 0.75}) {
    auto t = lc::exact_first_passage(stay, 20'000);
    for (long long n : {100LL, 1'001LL, 5'000LL, 20'000LL}) {
      const double oracle = stay == 0.0 ? std::exp(std::lgamma(n + 1.0) - std::lgamma(n / 2 + 1.0) -
                                                   std::lgamma(n - n / 2 + 1.0) - n * std::log(2.0))
                                        : closed_form_tail(stay, n);
      EXPECT_NEAR(t[n] / oracle, 1.0, 1e-9) << stay << " " << n;
    }
  }
}

TEST(ExactFirstPassage, ReflectionBound) {
  for (double stay : {0.0, 0.25, 0.5, 0.75}) {
    auto t = lc::exact_first_passage(stay, 200);
    auto occ = lc::free_walk_occupation(stay, 200);
    for (int n = 1; n <= 200; ++n) EXPECT_LE(t[n], 2.0 * occ[n] + 1e-15) << stay << " " << n;
  }
}

TEST(ExactFirstPassage, InverseSquareRootRate) {
  for (double stay : {0.0, 0.5}) {
    auto t = lc::exact_first_passage(stay, 100'000);
    double lo = 1e300, hi = 0.0;
    for (std::size_t n = 100; n <= 100'000; n += 99) {
      const double v = std::sqrt(static_cast<double>(n)) * t[n];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LE(hi / lo, 2.0);
  }
}

TEST(SimulateTs, MatchesDp) {
  const int runs = 100'000;
  for (double stay : {0.0, 0.5}) {
    auto dp = lc::exact_first_passage(stay, 50);
    auto rng = lc::make_stream(7, static_cast<std::uint64_t>(stay * 4));
    auto rng2 = lc::make_stream(8, static_cast<std::uint64_t>(stay * 4));
    std::vector<int> exceed(51, 0), exceed_step(51, 0);
    for (int i = 0; i < runs; ++i) {
      auto t = lc::simulate_t_s(stay, 10'000'000, rng);
      auto u = lc::simulate_t_s_stepwise(stay, 60, rng2);
      for (int n : {1, 5, 10, 50}) {
        if (!t || *t > static_cast<std::uint64_t>(n)) ++exceed[n];
        if (!u || *u > static_cast<std::uint64_t>(n)) ++exceed_step[n];
      }
    }
    for (int n : {1, 5, 10, 50}) {
      const double sigma = std::sqrt(dp[n] * (1 - dp[n]) / runs);
      EXPECT_NEAR(exceed[n] / double(runs), dp[n], 3 * sigma) << stay << " " << n;
      EXPECT_NEAR(exceed_step[n] / double(runs), dp[n], 3 * sigma) << stay << " " << n;
    }
  }
}

TEST(SimulateTs, FairWalkFirstStep) {
  auto rng = lc::make_stream(1, 1);
  const int runs = 100'000;
  int ones = 0;
  for (int i = 0; i < runs; ++i) ones += lc::simulate_t_s(0.0, 1000, rng) == std::optional<std::uint64_t>(1);
  EXPECT_NEAR(ones / double(runs), 0.5, 3 * std::sqrt(0.25 / runs));
}

TEST(SimulatePair, DifferenceWalkHitsAtReportedTime) {
  auto law = lc::build_mineka(two_point(), Point{2.0});
  auto rng = lc::make_stream(2, 0);
  for (int i = 0; i < 200; ++i) {
    auto tr = lc::simulate_pair(law, 10'000, rng);
    if (!tr.t_s) continue;
    for (std::size_t n = 1; n < *tr.t_s; ++n) EXPECT_LT(tr.s[n][0] - tr.s_prime[n][0], 2.0 - 1e-9);
    EXPECT_NEAR(tr.s.back()[0] - tr.s_prime.back()[0], 2.0, 1e-12);
  }
}

TEST(SimulateTl, DeterministicStubIsExponential) {
  const lc::TsSampler one = [](lc::Rng&) { return std::optional<std::uint64_t>(1); };
  auto rng = lc::make_stream(3, 0);
  const int runs = 100'000;
  const double rate = 2.0;
  double sum = 0.0;
  for (int i = 0; i < runs; ++i) {
    auto s = lc::simulate_t_l(one, rate, rng);
    EXPECT_EQ(s.t_l, s.k_xy);
    sum += s.t_l;
  }
  EXPECT_NEAR(sum / runs, 1.0 / rate, 3.0 / (rate * std::sqrt(runs)));
}

TEST(SimulateTl, CensoredSamplesStayInfinite) {
  auto rng = lc::make_stream(4, 0);
  int censored = 0;
  for (int i = 0; i < 2000; ++i) {
    auto s = lc::simulate_t_l(lc::lazy_walk_ts_sampler(0.5, 3), 1.0, rng);
    if (s.censored()) {
      ++censored;
      EXPECT_TRUE(std::isinf(s.t_l));
    }
  }
  EXPECT_GT(censored, 0);
}

TEST(SubordinatedTail, SmallCases) {
  EXPECT_NEAR(lc::subordinated_tail(0.0, 1.0, 0.0), 1.0, 1e-15);
  // Direct formula e^{-t}[1 + sum_k P(T > k) t^k / k!] for stay 0, t = 1.
  auto dp = lc::exact_first_passage(0.0, 40);
  double s = 1.0, term = 1.0;
  for (int k = 1; k <= 40; ++k) {
    term /= k;
    s += dp[k] * term;
  }
  EXPECT_NEAR(lc::subordinated_tail(0.0, 1.0, 1.0), std::exp(-1.0) * s, 1e-14);
}

TEST(EstimateCouplingTail, MatchesSubordinationIdentity) {
  lc::MonteCarloOptions o;
  o.seed = 2024;
  o.n_samples = 100'000;
  o.workers = 2;
  const std::vector<double> times{1.0, 5.0, 20.0};
  auto rows = lc::estimate_coupling_tail(lc::lazy_walk_ts_sampler(0.25, o.max_steps), 1.0, times, o);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    const double exact = lc::subordinated_tail(0.25, 1.0, r.t);
    EXPECT_NEAR(r.p_hat, exact, 3 * std::sqrt(exact * (1 - exact) / r.n_samples)) << r.t;
  }
}

TEST(EstimateCouplingTail, IndependentOfWorkerCount) {
  lc::MonteCarloOptions o;
  o.seed = 77;
  o.n_samples = 20'000;
  o.chunk_size = 1'000;
  auto ts = lc::lazy_walk_ts_sampler(0.25, o.max_steps);
  o.workers = 1;
  auto a = lc::estimate_coupling_tail(ts, 1.0, {1.0, 10.0}, o);
  o.workers = 4;
  auto b = lc::estimate_coupling_tail(ts, 1.0, {1.0, 10.0}, o);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].p_hat, b[i].p_hat);
    EXPECT_EQ(a[i].n_censored, b[i].n_censored);
  }
}

TEST(CouplingInequality, UniformJumpLaw) {
  // ||P_t(0, .) - P_t(a, .)|| <= 2 P(T^L > t) for the Mineka coupling at a.
  const MixedMeasure nu0(GridDensity::uniform(0.0, 1.0, 1.0 / 64));
  auto law = lc::build_mineka(nu0, Point{0.25});
  EXPECT_NEAR(law.stay_prob, 0.25, 1e-12);
  lc::MonteCarloOptions o;
  o.seed = 5;
  o.n_samples = 100'000;
  auto rows = lc::estimate_coupling_tail(law, 1.0, {5.0}, o);
  auto s = lc::build_series(nu0, 1.0, 5.0);
  const auto iv = lc::cp_tv(s, Point{0.0}, Point{0.25});
  EXPECT_GE(2 * rows[0].p_hat + 6 * rows[0].stderr_, iv.upper);
}

TEST(ChainedTvBound, LinkCounts) {
  const MixedMeasure nu0(GridDensity::uniform(0.0, 1.0, 0.1));
  const double one = lc::chained_tv_bound(nu0, 0.5, Point{0.0}, Point{0.4}, 16, 0.1);
  // One link; gamma = 1 - eta0 = 0.5, attained at |x| = delta.
  EXPECT_NEAR(one, 2 * lc::exact_first_passage(0.5, 16)[16], 1e-15);
  const double four = lc::chained_tv_bound(nu0, 0.5, Point{0.0}, Point{1.6}, 16, 0.1);
  EXPECT_NEAR(four, 4 * one, 1e-14);
  EXPECT_THROW(lc::chained_tv_bound(two_point(), 0.5, Point{0.0}, Point{0.5}, 4, 0.25), lc::Error);
}

TEST(ChainedTvBound, DominatesExactWalkDistance) {
  const MixedMeasure nu0(GridDensity::uniform(0.0, 1.0, 0.1));
  for (double d : {0.3, 1.2})
    for (std::size_t n : {4u, 16u, 64u}) {
      const auto p = lc::convolution_power(nu0, n);
      const double exact = lc::tv_distance(p, lc::shift(p, Point{d}));
      EXPECT_LE(exact, lc::chained_tv_bound(nu0, 0.5, Point{0.0}, Point{d}, n, 0.1)) << d << " " << n;
    }
}
