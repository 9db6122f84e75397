#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levycouple/atomic_measure.hpp"
#include "levycouple/error.hpp"
#include "levycouple/grid_density.hpp"
#include "levycouple/point.hpp"

namespace levycouple {

/// Default cap on atoms plus cells produced by a convolution.
inline constexpr std::size_t kDefaultBudget = 10'000'000;

struct ConvolveOptions {
  /// Snap atom offsets onto the density lattice instead of failing.
  bool snap = false;
  std::size_t budget = kDefaultBudget;
};

/// Finite nonnegative measure: an atomic part plus an optional grid density.
/// Values are immutable once built; every operation returns a new measure.
class MixedMeasure {
 public:
  explicit MixedMeasure(std::size_t dim = 1) : atomic_(dim) {}

  MixedMeasure(AtomicMeasure atomic) : atomic_(std::move(atomic)) {}  // NOLINT

  MixedMeasure(GridDensity density)  // NOLINT
      : atomic_(density.dim()), density_(std::move(density)) {
    drop_empty_density();
  }

  MixedMeasure(AtomicMeasure atomic, std::optional<GridDensity> density)
      : atomic_(std::move(atomic)), density_(std::move(density)) {
    if (density_)
      require(density_->dim() == atomic_.dim(), ErrorCode::DimensionMismatch,
              "density dimension differs from ambient dimension");
    drop_empty_density();
  }

  static MixedMeasure dirac(const Point& x, double mass = 1.0) {
    return MixedMeasure(AtomicMeasure::dirac(x, mass));
  }

  std::size_t dim() const noexcept { return atomic_.dim(); }
  const AtomicMeasure& atomic() const noexcept { return atomic_; }
  const std::optional<GridDensity>& density() const noexcept { return density_; }
  bool has_density() const noexcept { return density_.has_value(); }

  double atomic_mass() const noexcept { return atomic_.total_mass(); }
  double density_mass() const noexcept { return density_ ? density_->total_mass() : 0.0; }
  double total_mass() const noexcept { return atomic_mass() + density_mass(); }

  /// Atoms plus grid cells; the quantity bounded by the convolution budget.
  std::size_t support_size() const noexcept {
    return atomic_.size() + (density_ ? density_->cell_count() : 0);
  }

  double snap_distance() const noexcept { return density_ ? density_->snap_distance() : 0.0; }

 private:
  void drop_empty_density() {
    if (density_ && density_->total_mass() <= 0.0) density_.reset();
  }

  AtomicMeasure atomic_;
  std::optional<GridDensity> density_;
};

namespace detail {

inline void check_dims(const MixedMeasure& mu, const MixedMeasure& nu) {
  require(mu.dim() == nu.dim(), ErrorCode::DimensionMismatch,
          "measures of dimension " + std::to_string(mu.dim()) + " and " +
              std::to_string(nu.dim()));
}

template <class Op>
std::optional<GridDensity> combine_optional(const std::optional<GridDensity>& a,
                                            const std::optional<GridDensity>& b, Op&& op) {
  if (a && b) return combine_cells(*a, *b, op);
  if (a) return combine_cells(*a, GridDensity(a->origin(), a->spacing(), {1, 1}, {0.0}), op);
  if (b) return combine_cells(GridDensity(b->origin(), b->spacing(), {1, 1}, {0.0}), *b, op);
  return std::nullopt;
}

// Atom x atom convolution. The larger measure is shifted by each atom of the
// smaller one; each shifted copy is a sorted run, so canonicalization merges
// instead of sorting. Large products are processed in blocks.
inline AtomicMeasure convolve_atoms(const AtomicMeasure& mu, const AtomicMeasure& nu,
                                    std::size_t budget) {
  const std::size_t dim = mu.dim();
  const double tol = std::max(mu.dedup_tolerance(), nu.dedup_tolerance());
  if (mu.empty() || nu.empty()) return AtomicMeasure(dim, tol);
  const AtomicMeasure& big = mu.size() >= nu.size() ? mu : nu;
  const AtomicMeasure& small = mu.size() >= nu.size() ? nu : mu;
  constexpr std::size_t kBlockPairs = std::size_t{1} << 22;
  const std::size_t per_block = std::max<std::size_t>(1, kBlockPairs / big.size());

  AtomicMeasure acc(dim, tol);
  for (std::size_t start = 0; start < small.size(); start += per_block) {
    const std::size_t stop = std::min(small.size(), start + per_block);
    std::vector<double> coords;
    std::vector<double> masses;
    std::vector<std::size_t> runs{0};
    coords.reserve((stop - start) * big.size() * dim);
    masses.reserve((stop - start) * big.size());
    for (std::size_t s = start; s < stop; ++s) {
      const auto shift = small.location(s);
      const double w = small.mass(s);
      for (std::size_t b = 0; b < big.size(); ++b) {
        const auto loc = big.location(b);
        for (std::size_t k = 0; k < dim; ++k) coords.push_back(loc[k] + shift[k]);
        masses.push_back(big.mass(b) * w);
      }
      runs.push_back(masses.size());
    }
    AtomicMeasure block = AtomicMeasure::from_flat(dim, tol, std::move(coords), std::move(masses), runs);
    acc = acc.empty() ? std::move(block) : combine_atoms(acc, block, [](double a, double b) { return a + b; });
    if (acc.size() > budget)
      throw BudgetError(0, "atom convolution exceeds budget of " + std::to_string(budget));
  }
  return acc;
}

// Sum of copies of `density` shifted by each atom. Offsets must be lattice
// multiples unless snapping is enabled.
inline std::optional<GridDensity> spread_density(const AtomicMeasure& atoms,
                                                 const GridDensity& density,
                                                 const ConvolveOptions& opts) {
  if (atoms.empty()) return std::nullopt;
  const std::size_t dim = density.dim();
  const double h = density.spacing();
  std::vector<GridDensity::Index> steps(atoms.size(), GridDensity::Index{0, 0});
  double snapped = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto loc = atoms.location(i);
    for (std::size_t k = 0; k < dim; ++k) {
      if (auto s = lattice_steps(loc[k], h)) {
        steps[i][k] = *s;
        continue;
      }
      if (!opts.snap)
        fail(ErrorCode::SnapError, "atom offset " + std::to_string(loc[k]) +
                                       " is not a multiple of grid spacing " + std::to_string(h));
      const double n = std::nearbyint(loc[k] / h);
      snapped = std::max(snapped, std::abs(loc[k] - n * h));
      steps[i][k] = static_cast<long long>(n);
    }
  }
  GridDensity::Index lo = steps.front();
  GridDensity::Index hi = steps.front();
  for (const auto& s : steps)
    for (std::size_t k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], s[k]);
      hi[k] = std::max(hi[k], s[k]);
    }
  const auto e = density.extents();
  const std::size_t n0 = e[0] + static_cast<std::size_t>(hi[0] - lo[0]);
  const std::size_t n1 = e[1] + static_cast<std::size_t>(hi[1] - lo[1]);
  if (n0 * n1 > opts.budget)
    throw BudgetError(0, "shifted density exceeds budget of " + std::to_string(opts.budget));
  std::vector<double> cells(n0 * n1, 0.0);
  const auto& src = density.cells();
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const double w = atoms.mass(a);
    const auto o0 = static_cast<std::size_t>(steps[a][0] - lo[0]);
    const auto o1 = static_cast<std::size_t>(steps[a][1] - lo[1]);
    for (std::size_t i = 0; i < e[0]; ++i) {
      double* row = cells.data() + (i + o0) * n1 + o1;
      const double* in = src.data() + i * e[1];
      for (std::size_t j = 0; j < e[1]; ++j) row[j] += w * in[j];
    }
  }
  GridDensity out(density.corner(lo[0], lo[1]), h, {n0, n1}, std::move(cells));
  out.record_snap(std::max(density.snap_distance(), snapped));
  return out;
}

inline std::optional<GridDensity> add_densities(std::optional<GridDensity> a,
                                                const std::optional<GridDensity>& b) {
  if (!b) return a;
  if (!a) return b;
  return combine_cells(*a, *b, [](double x, double y) { return x + y; });
}

}  // namespace detail

/// Largest measure dominated by both arguments: min of matched atom masses
/// plus min of aligned cell masses. Atoms never meet density cells.
inline MixedMeasure meet(const MixedMeasure& mu, const MixedMeasure& nu) {
  detail::check_dims(mu, nu);
  auto mn = [](double a, double b) { return std::min(a, b); };
  AtomicMeasure atoms = combine_atoms(mu.atomic(), nu.atomic(), mn);
  std::optional<GridDensity> dens;
  if (mu.density() && nu.density()) dens = combine_cells(*mu.density(), *nu.density(), mn);
  return MixedMeasure(std::move(atoms), std::move(dens));
}

/// Total variation norm of mu - nu, summed as |mu - nu| over atoms and cells.
inline double tv_distance(const MixedMeasure& mu, const MixedMeasure& nu) {
  detail::check_dims(mu, nu);
  double tv = 0.0;
  for_each_aligned(mu.atomic(), nu.atomic(),
                   [&](std::span<const double>, double a, double b) { tv += std::abs(a - b); });
  if (mu.density() && nu.density()) {
    for_each_aligned_cell(*mu.density(), *nu.density(),
                          [&](double a, double b) { tv += std::abs(a - b); });
  } else {
    tv += mu.density_mass() + nu.density_mass();
  }
  return tv;
}

inline MixedMeasure sum(const MixedMeasure& mu, const MixedMeasure& nu) {
  detail::check_dims(mu, nu);
  auto plus = [](double a, double b) { return a + b; };
  return MixedMeasure(combine_atoms(mu.atomic(), nu.atomic(), plus),
                      detail::add_densities(mu.density(), nu.density()));
}

/// (mu - nu)^+ from the Jordan-Hahn decomposition of mu - nu.
inline MixedMeasure positive_part_of_difference(const MixedMeasure& mu, const MixedMeasure& nu) {
  detail::check_dims(mu, nu);
  auto pos = [](double a, double b) { return a - b > 0.0 ? a - b : 0.0; };
  return MixedMeasure(combine_atoms(mu.atomic(), nu.atomic(), pos),
                      detail::combine_optional(mu.density(), nu.density(), pos));
}

inline MixedMeasure scaled(const MixedMeasure& mu, double factor) {
  std::optional<GridDensity> dens;
  if (mu.density()) dens = mu.density()->scaled(factor);
  return MixedMeasure(mu.atomic().scaled(factor), std::move(dens));
}

/// delta_x * mu: atoms and grid origin translated by x.
inline MixedMeasure shift(const MixedMeasure& mu, const Point& x) {
  require(x.dim() == mu.dim(), ErrorCode::DimensionMismatch, "shift dimension mismatch");
  std::optional<GridDensity> dens;
  if (mu.density()) dens = mu.density()->shifted(x);
  return MixedMeasure(mu.atomic().shifted(x.coords()), std::move(dens));
}

inline MixedMeasure convolve(const MixedMeasure& mu, const MixedMeasure& nu,
                             const ConvolveOptions& opts = {}) {
  detail::check_dims(mu, nu);
  AtomicMeasure atoms = detail::convolve_atoms(mu.atomic(), nu.atomic(), opts.budget);
  std::optional<GridDensity> dens;
  if (mu.density()) dens = detail::add_densities(dens, detail::spread_density(nu.atomic(), *mu.density(), opts));
  if (nu.density()) dens = detail::add_densities(dens, detail::spread_density(mu.atomic(), *nu.density(), opts));
  if (mu.density() && nu.density()) {
    const auto ea = mu.density()->extents();
    const auto eb = nu.density()->extents();
    if ((ea[0] + eb[0] - 1) * (ea[1] + eb[1] - 1) > opts.budget)
      throw BudgetError(0, "density convolution exceeds budget of " + std::to_string(opts.budget));
    dens = detail::add_densities(dens, convolve_cells(*mu.density(), *nu.density()));
  }
  MixedMeasure out(std::move(atoms), std::move(dens));
  if (out.support_size() > opts.budget)
    throw BudgetError(0, "convolution exceeds budget of " + std::to_string(opts.budget));
  return out;
}

/// mu^{*n} by repeated squaring; mu^{*0} is the unit mass at the origin.
inline MixedMeasure convolution_power(const MixedMeasure& mu, std::size_t n,
                                      const ConvolveOptions& opts = {}) {
  MixedMeasure result = MixedMeasure::dirac(Point::zero(mu.dim()));
  MixedMeasure base = mu;
  std::size_t achieved = 0;
  std::size_t base_power = 1;
  try {
    while (n > 0) {
      if (n & 1U) {
        result = convolve(result, base, opts);
        achieved += base_power;
      }
      n >>= 1U;
      if (n > 0) {
        base = convolve(base, base, opts);
        base_power *= 2;
      }
    }
  } catch (const BudgetError& e) {
    throw BudgetError(achieved, std::string(e.what()) + " (achieved power " +
                                    std::to_string(achieved) + ")");
  }
  return result;
}

/// Orthogonal map (row-major d x d) sending `a` to |a| e_1: the Householder
/// reflection about a - |a| e_1, or the identity when a already points along +e_1.
inline std::vector<double> householder_to_e1(const Point& a) {
  const std::size_t d = a.dim();
  const double len = a.norm();
  require(len > 0.0, ErrorCode::ZeroDisplacement, "displacement must be nonzero");
  std::vector<double> h(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) h[i * d + i] = 1.0;
  std::vector<double> v(a.coords().begin(), a.coords().end());
  v[0] -= len;
  double vv = 0.0;
  for (double c : v) vv += c * c;
  if (vv == 0.0) return h;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) h[i * d + j] -= 2.0 * v[i] * v[j] / vv;
  return h;
}

/// Image measure mu o R_a^{-1}, with R_a the map sending a to |a| e_1.
/// Densities can only be transformed in 1D (R_a = +-1) or when R_a is the identity.
inline MixedMeasure rotate_to_e1(const MixedMeasure& mu, const Point& a) {
  require(a.dim() == mu.dim(), ErrorCode::DimensionMismatch, "displacement dimension mismatch");
  const std::size_t d = mu.dim();
  const auto h = householder_to_e1(a);
  bool identity = true;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (h[i * d + j] != (i == j ? 1.0 : 0.0)) identity = false;
  if (identity) return mu;

  std::optional<GridDensity> dens;
  if (mu.density()) {
    require(d == 1, ErrorCode::DensityRotationUnsupported,
            "rotating a grid density is only supported in one dimension");
    const GridDensity& g = *mu.density();
    std::vector<double> cells(g.cells().rbegin(), g.cells().rend());
    const double far_edge = g.origin()[0] + static_cast<double>(g.cell_count()) * g.spacing();
    GridDensity flipped(Point{-far_edge}, g.spacing(), std::move(cells));
    flipped.record_snap(g.snap_distance());
    dens = std::move(flipped);
  }

  const AtomicMeasure& atoms = mu.atomic();
  std::vector<double> coords(atoms.size() * d, 0.0);
  for (std::size_t n = 0; n < atoms.size(); ++n) {
    const auto z = atoms.location(n);
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += h[i * d + j] * z[j];
      coords[n * d + i] = s;
    }
  }
  std::vector<double> masses(atoms.masses().begin(), atoms.masses().end());
  return MixedMeasure(
      AtomicMeasure::from_flat(d, atoms.dedup_tolerance(), std::move(coords), std::move(masses)),
      std::move(dens));
}

/// Small-jump truncation: for infinite-activity measures, removes atoms and
/// cells (by center) strictly inside the ball of radius eps.
inline MixedMeasure truncate_levy(const MixedMeasure& nu, double eps, bool infinite_activity) {
  require(std::isfinite(eps) && eps > 0.0, ErrorCode::InvalidArgument, "cutoff eps must be positive");
  MixedMeasure out = nu;
  if (infinite_activity) {
    auto outside = [eps](std::span<const double> z) {
      double s = 0.0;
      for (double c : z) s += c * c;
      return std::sqrt(s) >= eps;
    };
    std::optional<GridDensity> dens;
    if (nu.density())
      dens = nu.density()->filtered([&](const Point& c) { return outside(c.coords()); }).trimmed();
    out = MixedMeasure(nu.atomic().filtered(outside), std::move(dens));
  }
  require(out.total_mass() > 0.0, ErrorCode::EmptyTruncation,
          "truncated Levy measure has zero mass (eps = " + std::to_string(eps) + ")");
  return out;
}

/// Returns (nu / lambda, lambda) with lambda the total mass.
inline std::pair<MixedMeasure, double> normalize(const MixedMeasure& nu) {
  const double lambda = nu.total_mass();
  require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::ZeroMass,
          "cannot normalize a measure of zero mass");
  return {scaled(nu, 1.0 / lambda), lambda};
}

inline bool is_probability(const MixedMeasure& mu, double tol = 1e-9) {
  return std::abs(mu.total_mass() - 1.0) <= tol;
}

}  // namespace levycouple
