#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "levycouple/bounds.hpp"

namespace lc = levycouple;
using lc::AtomicMeasure;
using lc::GridDensity;
using lc::MixedMeasure;
using lc::Point;

namespace {

MixedMeasure lazy_walk() {
  return MixedMeasure(AtomicMeasure(1, {{Point{-1.0}, 1.0 / 3}, {Point{0.0}, 1.0 / 3}, {Point{1.0}, 1.0 / 3}}));
}

std::vector<double> powers_of_two(double lo, double hi) {
  std::vector<double> t;
  for (double v = lo; v <= hi; v *= 2) t.push_back(v);
  return t;
}

}  // namespace

TEST(Couplingo2Bound, Examples) {
  EXPECT_EQ(lc::couplingo2_bound(1.0, 3.0, 0.0, true), 0.0);
  EXPECT_NEAR(lc::couplingo2_bound(1.0, 1e6, 0.8, false), std::sqrt(2.0) * 0.8 / 1e3, 1e-3);
  EXPECT_EQ(lc::couplingo2_bound(1.0, 1e-6, 5.0, false), 2.0);
  EXPECT_THROW(lc::couplingo2_bound(0.0, 1.0, 1.0, false), lc::Error);
}

TEST(Couplingo2Bound, DominatesLazyWalkDistance) {
  const Point x{0.0}, y{1.0};
  const double c = lc::empirical_c_xy(lazy_walk(), x, y, 200);
  EXPECT_GT(c, 0.0);
  for (double t : {1.0, 10.0, 100.0}) {
    auto s = lc::build_series(lazy_walk(), 1.0, t);
    EXPECT_GE(lc::couplingo2_bound(1.0, t, c, false), lc::cp_tv(s, x, y).upper) << t;
  }
}

TEST(JensenChain, HoldsOnGrid) {
  for (double m : {0.01, 0.1, 1.0, 10.0, 100.0, 500.0}) {
    auto j = lc::jensen_chain_check(1.0, m);
    EXPECT_TRUE(j.holds()) << m;
    EXPECT_LT(j.lhs, j.rhs) << m;
  }
}

TEST(JensenChain, DirectSummationOracle) {
  double direct = 0.0, fact = 1.0;
  for (int n = 1; n <= 40; ++n) {
    fact *= n;
    direct += 1.0 / (std::sqrt(double(n)) * fact);
  }
  auto j = lc::jensen_chain_check(1.0, 1.0);
  EXPECT_NEAR(j.lhs, direct, 1e-14);
  EXPECT_NEAR(j.rhs, std::sqrt(2.0) * (std::exp(1.0) - 1.0), 1e-14);
  EXPECT_NEAR(j.rhs, 2.4300, 1e-3);

  auto small = lc::jensen_chain_check(0.5, 0.02);
  EXPECT_NEAR(small.lhs, 0.01, 1e-4);
  EXPECT_NEAR(small.rhs, 0.1414, 1e-3);

  // Log-domain check at m = 100 against long double summation of the terms.
  long double acc = 0.0L;
  for (int n = 1; n <= 400; ++n)
    acc += std::exp(static_cast<long double>(n * std::log(100.0) - std::lgamma(n + 1.0) - 0.5 * std::log(double(n))));
  EXPECT_NEAR(lc::jensen_chain_check(1.0, 100.0).lhs / static_cast<double>(acc), 1.0, 1e-12);
  EXPECT_THROW(lc::jensen_chain_check(1.0, 800.0), lc::Error);
}

TEST(Th2Bound, Examples) {
  EXPECT_EQ(lc::th2_bound(1e-12, Point{0.0}, Point{1.0}, 1.0), 2.0);
  EXPECT_EQ(lc::th2_bound(5.0, Point{0.0}, Point{1.0}, 0.0), 0.0);
  EXPECT_NEAR(lc::th2_bound(4.0, Point{0.0}, Point{1.0}, 0.5), 0.5, 1e-15);
}

TEST(Th2Bound, CalibratedConstantOnUniformJumps) {
  const MixedMeasure u(GridDensity::uniform(0.0, 1.0, 1.0 / 8));
  const auto times = powers_of_two(1.0, 1024.0);
  const double c = lc::calibrate_th2_constant(u, 1.0, times, {Point{0.25}, Point{1.0}, Point{3.0}});
  // Regression constant from this calibration (uniform[0,1], cells of 1/8, tol 1e-8).
  EXPECT_NEAR(c, 1.1429541118929234, 1e-9);
  // Held-out displacement 2 is dominated too.
  auto path = lc::build_series_path(u, 1.0, times, lc::kDefaultSeriesTolerance, {false, {}});
  for (const auto& s : path)
    EXPECT_GE(lc::th2_bound(s.time(), Point{0.0}, Point{2.0}, c), lc::cp_tv(s, Point{0.0}, Point{2.0}).upper)
        << s.time();
}

TEST(FitRate, ExactPowerLaw) {
  std::vector<double> t, v;
  for (double s = 1; s <= 1e4; s *= 2) {
    t.push_back(s);
    v.push_back(std::pow(s, -0.5));
  }
  auto f = lc::fit_rate(t, v);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_FALSE(f.no_decay);
}

TEST(FitRate, NoisyPowerLaw) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> t, v;
  for (double s = 1; s <= 1e4; s *= 1.5) {
    t.push_back(s);
    v.push_back(3.0 * std::pow(s, -0.5) * (1.0 + 0.01 * noise(rng)));
  }
  auto f = lc::fit_rate(t, v);
  EXPECT_GE(f.slope, -0.52);
  EXPECT_LE(f.slope, -0.48);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 0.1);
}

TEST(FitRate, FloorAndInsufficientData) {
  std::vector<double> t{1, 10, 100, 1000, 10000, 100000}, v{1, 0.3, 0.1, 0.03, 0.01, 1e-14};
  auto f = lc::fit_rate(t, v);
  EXPECT_EQ(f.n_excluded, 1u);
  EXPECT_EQ(f.times.size(), 5u);
  try {
    lc::fit_rate({1, 2, 3, 4}, {1, 1, 1, 1});
    FAIL();
  } catch (const lc::Error& e) {
    EXPECT_EQ(e.code(), lc::ErrorCode::InsufficientData);
  }
  EXPECT_THROW(lc::fit_rate({1, 2, 4, 8, 16, 32}, {1, 1, 1, 1, 1, 1}), lc::Error);  // 1.5 decades
}

TEST(FitRate, ConstantSeriesHasNoDecay) {
  std::vector<double> t, v;
  for (double s = 4; s <= 4096; s *= 2) {
    t.push_back(s);
    v.push_back(2.0 * (1.0 - 1e-9));
  }
  auto f = lc::fit_rate(t, v);
  EXPECT_NEAR(f.slope, 0.0, 1e-12);
  EXPECT_TRUE(f.no_decay);
}

TEST(FitRate, LazyWalkRate) {
  const auto times = powers_of_two(4.0, 1024.0);
  const auto tv = lc::monotone_tv_check(lazy_walk(), 1.0, Point{0.0}, Point{1.0}, times);
  auto f = lc::fit_rate(times, tv);
  EXPECT_GE(f.slope, -0.55);
  EXPECT_LE(f.slope, -0.45);
  EXPECT_GE(f.r_squared, 0.99);
}
