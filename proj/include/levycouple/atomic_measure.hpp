#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "levycouple/error.hpp"
#include "levycouple/point.hpp"

namespace levycouple {

inline constexpr double kDefaultDedupTolerance = 1e-9;

namespace detail {

// Greedy clustering of a lexicographically sorted sequence: each unvisited
// entry becomes an anchor and absorbs every later entry whose coordinates are
// all within `tol` of it. Sorted order bounds the scan by the first coordinate.
template <class CoordFn, class Visit>
void group_within_tolerance(std::size_t n, std::size_t dim, double tol, CoordFn&& coord,
                            Visit&& visit) {
  std::vector<char> used(n, 0);
  std::vector<std::size_t> members;
  for (std::size_t p = 0; p < n; ++p) {
    if (used[p]) continue;
    members.clear();
    members.push_back(p);
    const double first = coord(p, 0);
    for (std::size_t q = p + 1; q < n && coord(q, 0) - first <= tol; ++q) {
      if (used[q]) continue;
      bool close = true;
      for (std::size_t k = 1; k < dim && close; ++k) close = std::abs(coord(q, k) - coord(p, k)) <= tol;
      if (close) {
        used[q] = 1;
        members.push_back(q);
      }
    }
    visit(p, std::span<const std::size_t>(members));
  }
}

inline bool lex_less(const double* a, const double* b, std::size_t dim) noexcept {
  for (std::size_t k = 0; k < dim; ++k) {
    if (a[k] < b[k]) return true;
    if (b[k] < a[k]) return false;
  }
  return false;
}

}  // namespace detail

/// Finite nonnegative measure carried by finitely many points.
///
/// Storage is flat and canonical: atoms are sorted lexicographically, masses
/// are strictly positive, and no two locations are within the dedup tolerance
/// in every coordinate (coincident atoms are merged, masses added).
class AtomicMeasure {
 public:
  struct Atom {
    Point location;
    double mass;
  };

  explicit AtomicMeasure(std::size_t dim = 1, double dedup_tolerance = kDefaultDedupTolerance)
      : dim_(dim), tol_(dedup_tolerance) {
    require(dim >= 1, ErrorCode::InvalidArgument, "measure dimension must be >= 1");
    require(dedup_tolerance >= 0.0, ErrorCode::InvalidArgument, "dedup tolerance must be >= 0");
  }

  AtomicMeasure(std::size_t dim, const std::vector<Atom>& atoms,
                double dedup_tolerance = kDefaultDedupTolerance)
      : AtomicMeasure(dim, dedup_tolerance) {
    std::vector<double> coords;
    std::vector<double> masses;
    coords.reserve(atoms.size() * dim);
    masses.reserve(atoms.size());
    for (const auto& a : atoms) {
      require(a.location.dim() == dim, ErrorCode::DimensionMismatch,
              "atom location dimension differs from measure dimension");
      coords.insert(coords.end(), a.location.coords().begin(), a.location.coords().end());
      masses.push_back(a.mass);
    }
    *this = from_flat(dim, dedup_tolerance, std::move(coords), std::move(masses));
  }

  static AtomicMeasure dirac(const Point& x, double mass = 1.0) {
    return AtomicMeasure(x.dim(), {{x, mass}});
  }

  /// Builds a canonical measure from flat coordinates. `runs` optionally lists
  /// boundaries of already-sorted index ranges, which are merged instead of sorted.
  static AtomicMeasure from_flat(std::size_t dim, double tol, std::vector<double> coords,
                                 std::vector<double> masses,
                                 std::span<const std::size_t> runs = {}) {
    AtomicMeasure out(dim, tol);
    const std::size_t n = masses.size();
    require(coords.size() == n * dim, ErrorCode::InvalidArgument, "coordinate array size mismatch");
    for (double m : masses)
      require(std::isfinite(m) && m >= 0.0, ErrorCode::InvalidArgument,
              "atom masses must be finite and nonnegative");
    for (double c : coords)
      require(std::isfinite(c), ErrorCode::InvalidArgument, "atom coordinates must be finite");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double* c = coords.data();
    auto less = [c, dim](std::size_t a, std::size_t b) {
      return detail::lex_less(c + a * dim, c + b * dim, dim);
    };
    if (runs.size() >= 2) {
      // Bottom-up pairwise merge of sorted runs.
      std::vector<std::size_t> bounds(runs.begin(), runs.end());
      while (bounds.size() > 2) {
        std::vector<std::size_t> next;
        next.push_back(bounds.front());
        for (std::size_t i = 0; i + 2 < bounds.size(); i += 2) {
          std::inplace_merge(order.begin() + static_cast<std::ptrdiff_t>(bounds[i]),
                             order.begin() + static_cast<std::ptrdiff_t>(bounds[i + 1]),
                             order.begin() + static_cast<std::ptrdiff_t>(bounds[i + 2]), less);
          next.push_back(bounds[i + 2]);
        }
        if (bounds.size() % 2 == 0) next.push_back(bounds.back());
        bounds = std::move(next);
      }
    } else {
      std::stable_sort(order.begin(), order.end(), less);
    }

    out.coords_.reserve(coords.size());
    out.masses_.reserve(n);
    auto coord = [&](std::size_t p, std::size_t k) { return c[order[p] * dim + k]; };
    detail::group_within_tolerance(n, dim, tol, coord,
                                   [&](std::size_t anchor, std::span<const std::size_t> members) {
                                     double m = 0.0;
                                     for (std::size_t q : members) m += masses[order[q]];
                                     if (m > 0.0) out.push_back(c + order[anchor] * dim, m);
                                   });
    return out;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return masses_.size(); }
  bool empty() const noexcept { return masses_.empty(); }
  double dedup_tolerance() const noexcept { return tol_; }
  double total_mass() const noexcept { return total_; }

  std::span<const double> location(std::size_t i) const {
    return std::span<const double>(coords_).subspan(i * dim_, dim_);
  }
  Point point(std::size_t i) const { return Point(location(i)); }
  double mass(std::size_t i) const { return masses_[i]; }
  std::span<const double> masses() const noexcept { return masses_; }
  std::span<const double> coords() const noexcept { return coords_; }

  std::vector<Atom> atoms() const {
    std::vector<Atom> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back({point(i), masses_[i]});
    return out;
  }

  /// Translation preserves the canonical order, so no re-sort is needed.
  AtomicMeasure shifted(std::span<const double> x) const {
    require(x.size() == dim_, ErrorCode::DimensionMismatch, "shift dimension mismatch");
    AtomicMeasure out = *this;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t k = 0; k < dim_; ++k) out.coords_[i * dim_ + k] += x[k];
    return out;
  }

  AtomicMeasure scaled(double factor) const {
    require(std::isfinite(factor) && factor >= 0.0, ErrorCode::InvalidArgument,
            "scale factor must be finite and nonnegative");
    if (factor == 0.0) return AtomicMeasure(dim_, tol_);
    AtomicMeasure out = *this;
    for (double& m : out.masses_) m *= factor;
    out.total_ *= factor;
    return out;
  }

  /// Keeps atoms satisfying `keep(location)`.
  template <class Pred>
  AtomicMeasure filtered(Pred&& keep) const {
    AtomicMeasure out(dim_, tol_);
    for (std::size_t i = 0; i < size(); ++i)
      if (keep(location(i))) out.push_back(coords_.data() + i * dim_, masses_[i]);
    return out;
  }

 private:
  void push_back(const double* x, double m) {
    coords_.insert(coords_.end(), x, x + dim_);
    masses_.push_back(m);
    total_ += m;
  }

  std::size_t dim_;
  double tol_;
  std::vector<double> coords_;
  std::vector<double> masses_;
  double total_ = 0.0;
};

/// Visits every location carried by `mu` or `nu` once, reporting the mass each
/// measure puts there (0 when absent). Locations are matched with the larger
/// of the two dedup tolerances. Visit order is lexicographic.
template <class Visit>
void for_each_aligned(const AtomicMeasure& mu, const AtomicMeasure& nu, Visit&& visit) {
  require(mu.dim() == nu.dim(), ErrorCode::DimensionMismatch,
          "atomic measures of dimension " + std::to_string(mu.dim()) + " and " +
              std::to_string(nu.dim()));
  const std::size_t dim = mu.dim();
  const double tol = std::max(mu.dedup_tolerance(), nu.dedup_tolerance());
  struct Entry {
    const double* x;
    double a;
    double b;
  };
  std::vector<Entry> entries;
  entries.reserve(mu.size() + nu.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < mu.size() || j < nu.size()) {
    const bool take_mu =
        j == nu.size() ||
        (i < mu.size() && !detail::lex_less(nu.location(j).data(), mu.location(i).data(), dim));
    if (take_mu) {
      entries.push_back({mu.location(i).data(), mu.mass(i), 0.0});
      ++i;
    } else {
      entries.push_back({nu.location(j).data(), 0.0, nu.mass(j)});
      ++j;
    }
  }
  auto coord = [&](std::size_t p, std::size_t k) { return entries[p].x[k]; };
  detail::group_within_tolerance(entries.size(), dim, tol, coord,
                                 [&](std::size_t anchor, std::span<const std::size_t> members) {
                                   double a = 0.0;
                                   double b = 0.0;
                                   for (std::size_t q : members) {
                                     a += entries[q].a;
                                     b += entries[q].b;
                                   }
                                   visit(std::span<const double>(entries[anchor].x, dim), a, b);
                                 });
}

/// Pointwise combination `op(a, b)` over the union of supports.
template <class Op>
AtomicMeasure combine_atoms(const AtomicMeasure& mu, const AtomicMeasure& nu, Op&& op) {
  const std::size_t dim = mu.dim();
  const double tol = std::max(mu.dedup_tolerance(), nu.dedup_tolerance());
  std::vector<double> coords;
  std::vector<double> masses;
  coords.reserve((mu.size() + nu.size()) * dim);
  masses.reserve(mu.size() + nu.size());
  for_each_aligned(mu, nu, [&](std::span<const double> x, double a, double b) {
    const double m = op(a, b);
    if (m > 0.0) {
      coords.insert(coords.end(), x.begin(), x.end());
      masses.push_back(m);
    }
  });
  // Already sorted and separated; a single run skips the sort.
  const std::size_t runs[] = {0, masses.size()};
  return AtomicMeasure::from_flat(dim, tol, std::move(coords), std::move(masses), runs);
}

}  // namespace levycouple
