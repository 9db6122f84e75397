#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "levycouple/error.hpp"
#include "levycouple/measure.hpp"
#include "levycouple/parallel.hpp"

namespace levycouple {

/// Overlap masses below this are treated as exact zeros.
inline constexpr double kPositivityThreshold = 1e-12;
inline constexpr std::size_t kDefaultSearchDepth = 6;

/// Generator triplet (b, Q, nu). `levy` is finite in this representation;
/// `infinite_activity` marks it as a stand-in for a measure whose mass near
/// the origin has been cut, so truncation at `cutoff` applies.
struct LevyTriplet {
  std::size_t dim = 1;
  Point drift = Point::zero(1);
  Eigen::MatrixXd gaussian = Eigen::MatrixXd::Zero(1, 1);
  MixedMeasure levy = MixedMeasure(1);
  double cutoff = 1.0;
  bool infinite_activity = false;

  bool has_gaussian() const { return gaussian.cwiseAbs().maxCoeff() > 0.0; }

  void validate() const {
    require(dim >= 1, ErrorCode::InvalidArgument, "dim must be at least 1");
    require(drift.dim() == dim, ErrorCode::DimensionMismatch, "drift has wrong dimension");
    require(levy.dim() == dim, ErrorCode::DimensionMismatch, "levy measure has wrong dimension");
    require(gaussian.rows() == static_cast<Eigen::Index>(dim) && gaussian.cols() == static_cast<Eigen::Index>(dim),
            ErrorCode::DimensionMismatch, "gaussian must be a dim x dim matrix");
    require(gaussian.allFinite(), ErrorCode::InvalidArgument, "gaussian has non-finite entries");
    require((gaussian - gaussian.transpose()).cwiseAbs().maxCoeff() <= 1e-10, ErrorCode::InvalidArgument,
            "gaussian must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gaussian, Eigen::EigenvaluesOnly);
    require(eig.eigenvalues().minCoeff() >= -1e-10, ErrorCode::InvalidArgument,
            "gaussian must be positive semidefinite");
    require(std::isfinite(cutoff) && cutoff > 0.0, ErrorCode::InvalidArgument, "cutoff must be positive");
    if (levy.total_mass() == 0.0) {
      require(has_gaussian() || !drift.is_zero(), ErrorCode::InvalidArgument,
              "levy measure is empty and there is no gaussian or drift part");
      return;
    }
    (void)truncate_levy(levy, cutoff, infinite_activity);  // throws EmptyTruncation
  }
};

enum class Verdict { Coupling, NoCoupling, Inconclusive };

inline const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Coupling: return "Coupling";
    case Verdict::NoCoupling: return "NoCoupling";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

struct AcMassRecord {
  std::size_t l = 0;
  double ac_mass = 0.0;
};

struct OverlapRecord {
  std::size_t l = 0;
  double delta = 0.0;
  double infimum = 0.0;
};

struct CriterionReport {
  double eta0 = 0.0;
  double delta = 0.0;
  double eps = 0.0;
  double grid_step = 0.0;
  bool th22_holds = false;
  std::optional<AcMassRecord> ex2_cond1;
  std::optional<OverlapRecord> ex2_cond2;
  Verdict verdict = Verdict::Inconclusive;
  std::string witness;
};

namespace detail {

/// Grid points x with coordinates in grid_step * Z and |x| <= delta.
inline std::vector<Point> ball_grid(std::size_t dim, double delta, double grid_step) {
  const long long r = static_cast<long long>(std::floor(delta / grid_step + 1e-9));
  std::vector<Point> out;
  std::vector<long long> idx(dim, -r);
  for (;;) {
    std::vector<double> x(dim);
    double sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = static_cast<double>(idx[i]) * grid_step;
      sq += x[i] * x[i];
    }
    if (std::sqrt(sq) <= delta * (1.0 + 1e-12)) out.emplace_back(std::move(x));
    std::size_t k = 0;
    while (k < dim && idx[k] == r) idx[k++] = -r;
    if (k == dim) break;
    ++idx[k];
  }
  return out;
}

inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace detail

/// Overlap mass (mu ^ (delta_x * mu))(R^d).
inline double shift_overlap(const MixedMeasure& mu, const Point& x) { return meet(mu, shift(mu, x)).total_mass(); }

/// Minimum shift overlap over the grid {x in grid_step Z^d : |x| <= delta}.
/// A grid minimum can only overestimate the continuum infimum.
inline double eta0(const MixedMeasure& nu0, double delta, double grid_step, std::size_t workers = 0) {
  require(delta > 0.0 && grid_step > 0.0, ErrorCode::InvalidArgument, "delta and grid_step must be positive");
  require(grid_step <= delta, ErrorCode::InvalidArgument, "grid_step must not exceed delta");
  const auto grid = detail::ball_grid(nu0.dim(), delta, grid_step);
  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), workers ? workers : detail::default_workers(),
               [&](std::size_t i) { vals[i] = shift_overlap(nu0, grid[i]); });
  return *std::min_element(vals.begin(), vals.end());
}

/// Mass of the absolutely continuous part of nu^{*l}: every term of the
/// binomial expansion that involves the density is absolutely continuous.
inline double ac_mass_of_power(const MixedMeasure& nu_eps, std::size_t l) {
  require(l >= 1, ErrorCode::InvalidArgument, "l must be at least 1");
  const double lambda = nu_eps.total_mass();
  const double atoms = nu_eps.atomic_mass();
  const double ld = static_cast<double>(l);
  return std::max(0.0, std::pow(lambda, ld) - std::pow(atoms, ld));
}

/// Grid minimum of the shift overlap of the normalized l-th convolution power.
inline double check_ex2_cond2(const MixedMeasure& nu_eps, std::size_t l, double delta, double grid_step,
                              const ConvolveOptions& opts = {}, std::size_t workers = 0) {
  require(l >= 1, ErrorCode::InvalidArgument, "l must be at least 1");
  const auto power = normalize(convolution_power(nu_eps, l, opts)).first;
  return eta0(power, delta, grid_step, workers);
}

struct CriteriaOptions {
  double delta = 0.5;
  double grid_step = 1.0 / 64;
  std::size_t search_depth = kDefaultSearchDepth;
  std::size_t workers = 0;
  ConvolveOptions convolve;
};

/// Shift-overlap condition on the normalized truncated measure. A purely
/// atomic measure has finitely many overlapping shifts, so its continuum
/// infimum is exactly 0 whatever the grid says. With a density, shifts must
/// stay on its lattice: grid_step is rounded up to a multiple of the spacing
/// and the report carries the step actually used.
inline CriterionReport check_th22(const LevyTriplet& triplet, double eps, double delta, double grid_step,
                                  std::size_t workers = 0) {
  CriterionReport r;
  r.eps = eps;
  r.delta = delta;
  r.grid_step = grid_step;
  const auto nu_eps = truncate_levy(triplet.levy, eps, triplet.infinite_activity);
  if (!nu_eps.has_density()) {
    r.eta0 = 0.0;
  } else {
    const double h = nu_eps.density()->spacing();
    r.grid_step = h * std::max(1.0, std::ceil(grid_step / h - 1e-9));
    if (r.grid_step > delta) {
      // Only x = 0 lies on the grid; nothing is established.
      r.eta0 = 1.0;
      r.th22_holds = false;
      return r;
    }
    r.eta0 = eta0(normalize(nu_eps).first, delta, r.grid_step, workers);
  }
  r.th22_holds = r.eta0 > kPositivityThreshold;
  return r;
}

inline CriterionReport decide_coupling_property(const LevyTriplet& triplet, const CriteriaOptions& opts = {}) {
  triplet.validate();
  CriterionReport r;
  r.eps = triplet.cutoff;
  r.delta = opts.delta;
  r.grid_step = opts.grid_step;

  const bool empty_levy = triplet.levy.total_mass() == 0.0;
  if (!empty_levy) r = check_th22(triplet, triplet.cutoff, opts.delta, opts.grid_step, opts.workers);

  if (triplet.has_gaussian()) {
    r.verdict = Verdict::Coupling;
    r.witness = "gaussian";
    return r;
  }
  if (empty_levy) {
    // Pure drift: P_t(x, .) and P_t(y, .) are distinct point masses.
    r.verdict = Verdict::NoCoupling;
    r.witness = "deterministic drift, no jumps";
    return r;
  }

  const auto nu_eps = truncate_levy(triplet.levy, triplet.cutoff, triplet.infinite_activity);
  for (std::size_t l = 1; l <= opts.search_depth; ++l) {
    const double ac = ac_mass_of_power(nu_eps, l);
    if (ac > kPositivityThreshold) {
      r.ex2_cond1 = AcMassRecord{l, ac};
      break;
    }
  }
  if (r.ex2_cond1) {
    r.ex2_cond2 = OverlapRecord{1, opts.delta, r.eta0};
    r.verdict = Verdict::Coupling;
    r.witness = "ex2(1), l=" + std::to_string(r.ex2_cond1->l);
    return r;
  }
  if (r.th22_holds) {
    r.verdict = Verdict::Coupling;
    r.witness = "th22";
    return r;
  }
  // Purely atomic from here on: every power stays atomic, so no condition can hold.
  if (!triplet.infinite_activity) {
    r.verdict = Verdict::NoCoupling;
    r.witness = "purely atomic finite jump measure";
  } else {
    r.verdict = Verdict::Inconclusive;
    r.witness = "purely atomic truncation of an infinite-activity measure";
  }
  return r;
}

}  // namespace levycouple
