#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "levycouple/error.hpp"
#include "levycouple/point.hpp"

namespace levycouple {

/// Piecewise-constant density on a regular grid in one or two dimensions.
///
/// The stored quantity is the mass of each cell, so the density value on a
/// cell is `cell / spacing^dim`. Cell (i, j) covers
/// [origin_0 + i h, origin_0 + (i+1) h) x [origin_1 + j h, origin_1 + (j+1) h).
/// In 1D the second extent is 1. Storage is row-major along axis 0.
class GridDensity {
 public:
  using Index = std::array<long long, 2>;

  /// One-dimensional grid.
  GridDensity(Point origin, double spacing, std::vector<double> cells)
      : origin_(std::move(origin)), spacing_(spacing), extents_{cells.size(), 1}, cells_(std::move(cells)) {
    validate();
  }

  /// Grid with explicit extents; `extents[1]` must be 1 when the origin is 1D.
  GridDensity(Point origin, double spacing, std::array<std::size_t, 2> extents,
              std::vector<double> cells)
      : origin_(std::move(origin)), spacing_(spacing), extents_(extents), cells_(std::move(cells)) {
    validate();
  }

  /// Uniform law of total mass `mass` on [lo, hi] in 1D; `hi - lo` must be a
  /// whole number of cells.
  static GridDensity uniform(double lo, double hi, double spacing, double mass = 1.0) {
    const double n_real = (hi - lo) / spacing;
    const auto n = static_cast<std::size_t>(std::llround(n_real));
    require(n >= 1 && std::abs(n_real - static_cast<double>(n)) < 1e-9, ErrorCode::InvalidArgument,
            "interval length must be a positive multiple of the spacing");
    return GridDensity(Point{lo}, spacing, std::vector<double>(n, mass / static_cast<double>(n)));
  }

  std::size_t dim() const noexcept { return origin_.dim(); }
  const Point& origin() const noexcept { return origin_; }
  double spacing() const noexcept { return spacing_; }
  std::array<std::size_t, 2> extents() const noexcept { return extents_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }
  const std::vector<double>& cells() const noexcept { return cells_; }
  double total_mass() const noexcept { return total_; }

  /// Largest distance an atom offset was moved to land on this lattice.
  double snap_distance() const noexcept { return snap_distance_; }
  void record_snap(double d) noexcept { snap_distance_ = std::max(snap_distance_, d); }

  double at(long long i, long long j = 0) const noexcept {
    if (i < 0 || j < 0 || i >= static_cast<long long>(extents_[0]) ||
        j >= static_cast<long long>(extents_[1]))
      return 0.0;
    return cells_[static_cast<std::size_t>(i) * extents_[1] + static_cast<std::size_t>(j)];
  }

  Point cell_center(std::size_t i, std::size_t j = 0) const {
    if (dim() == 1) return Point{origin_[0] + (static_cast<double>(i) + 0.5) * spacing_};
    return Point{origin_[0] + (static_cast<double>(i) + 0.5) * spacing_,
                 origin_[1] + (static_cast<double>(j) + 0.5) * spacing_};
  }

  GridDensity shifted(const Point& x) const {
    GridDensity out = *this;
    out.origin_ = origin_ + x;
    return out;
  }

  GridDensity scaled(double factor) const {
    require(std::isfinite(factor) && factor >= 0.0, ErrorCode::InvalidArgument,
            "scale factor must be finite and nonnegative");
    GridDensity out = *this;
    for (double& m : out.cells_) m *= factor;
    out.total_ *= factor;
    return out;
  }

  /// Drops all-zero border rows and columns. Returns nullopt when no mass is left.
  std::optional<GridDensity> trimmed() const {
    long long lo0 = -1, hi0 = -1, lo1 = -1, hi1 = -1;
    for (std::size_t i = 0; i < extents_[0]; ++i)
      for (std::size_t j = 0; j < extents_[1]; ++j)
        if (cells_[i * extents_[1] + j] > 0.0) {
          const auto ii = static_cast<long long>(i);
          const auto jj = static_cast<long long>(j);
          if (lo0 < 0 || ii < lo0) lo0 = ii;
          if (ii > hi0) hi0 = ii;
          if (lo1 < 0 || jj < lo1) lo1 = jj;
          if (jj > hi1) hi1 = jj;
        }
    if (lo0 < 0) return std::nullopt;
    if (lo0 == 0 && lo1 == 0 && hi0 + 1 == static_cast<long long>(extents_[0]) &&
        hi1 + 1 == static_cast<long long>(extents_[1]))
      return *this;
    return window(lo0, lo1, static_cast<std::size_t>(hi0 - lo0 + 1),
                  static_cast<std::size_t>(hi1 - lo1 + 1));
  }

  /// Sub- or super-grid starting at cell (i0, j0) of this grid with the given
  /// extents; cells outside the original grid are zero.
  GridDensity window(long long i0, long long j0, std::size_t n0, std::size_t n1) const {
    std::vector<double> cells(n0 * n1, 0.0);
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t j = 0; j < n1; ++j)
        cells[i * n1 + j] = at(i0 + static_cast<long long>(i), j0 + static_cast<long long>(j));
    GridDensity out(corner(i0, j0), spacing_, {n0, n1}, std::move(cells));
    out.snap_distance_ = snap_distance_;
    return out;
  }

  /// Keeps cells whose center satisfies `keep(center)`; others become zero.
  template <class Pred>
  GridDensity filtered(Pred&& keep) const {
    GridDensity out = *this;
    out.total_ = 0.0;
    for (std::size_t i = 0; i < extents_[0]; ++i)
      for (std::size_t j = 0; j < extents_[1]; ++j) {
        double& m = out.cells_[i * extents_[1] + j];
        if (!keep(cell_center(i, j))) m = 0.0;
        out.total_ += m;
      }
    return out;
  }

  /// Lower-left corner of cell (i, j), which may lie outside the grid.
  Point corner(long long i, long long j = 0) const {
    if (dim() == 1) return Point{origin_[0] + static_cast<double>(i) * spacing_};
    return Point{origin_[0] + static_cast<double>(i) * spacing_,
                 origin_[1] + static_cast<double>(j) * spacing_};
  }

 private:
  void validate() {
    require(origin_.dim() == 1 || origin_.dim() == 2, ErrorCode::InvalidArgument,
            "grid densities are supported in dimension 1 or 2 only");
    require(origin_.dim() == 2 || extents_[1] == 1, ErrorCode::InvalidArgument,
            "1D grid must have a single column");
    require(std::isfinite(spacing_) && spacing_ > 0.0, ErrorCode::InvalidArgument,
            "grid spacing must be positive");
    require(cells_.size() == extents_[0] * extents_[1], ErrorCode::InvalidArgument,
            "cell array size does not match grid extents");
    for (double m : cells_) {
      require(std::isfinite(m) && m >= 0.0, ErrorCode::InvalidArgument,
              "cell masses must be finite and nonnegative");
      total_ += m;
    }
  }

  Point origin_;
  double spacing_;
  std::array<std::size_t, 2> extents_;
  std::vector<double> cells_;
  double total_ = 0.0;
  double snap_distance_ = 0.0;
};

/// Tolerance, in coordinate units, for deciding that two lattices coincide.
inline constexpr double kLatticeTolerance = 1e-9;

/// Rounds `value / spacing` to an integer when `value` is a lattice multiple.
inline std::optional<long long> lattice_steps(double value, double spacing,
                                              double tol = kLatticeTolerance) {
  const double steps = std::nearbyint(value / spacing);
  if (std::abs(value - steps * spacing) > tol) return std::nullopt;
  return static_cast<long long>(steps);
}

/// Cell offset of `to`'s origin relative to `from`'s origin when both grids
/// lie on one lattice (same spacing, origins congruent modulo the spacing).
inline std::optional<GridDensity::Index> lattice_offset(const GridDensity& from,
                                                        const GridDensity& to) {
  if (from.dim() != to.dim()) return std::nullopt;
  if (std::abs(from.spacing() - to.spacing()) > 1e-12 * from.spacing()) return std::nullopt;
  GridDensity::Index off{0, 0};
  for (std::size_t k = 0; k < from.dim(); ++k) {
    auto s = lattice_steps(to.origin()[k] - from.origin()[k], from.spacing());
    if (!s) return std::nullopt;
    off[k] = *s;
  }
  return off;
}

/// Cell-wise `op(a, b)` over the union of both grids, trimmed.
template <class Op>
std::optional<GridDensity> combine_cells(const GridDensity& a, const GridDensity& b, Op&& op) {
  const auto off = lattice_offset(a, b);
  require(off.has_value(), ErrorCode::IncompatibleGrids,
          "grid densities do not share a lattice (spacing or origin mismatch)");
  const auto ea = a.extents();
  const auto eb = b.extents();
  const long long lo0 = std::min(0LL, (*off)[0]);
  const long long lo1 = std::min(0LL, (*off)[1]);
  const long long hi0 = std::max(static_cast<long long>(ea[0]), (*off)[0] + static_cast<long long>(eb[0]));
  const long long hi1 = std::max(static_cast<long long>(ea[1]), (*off)[1] + static_cast<long long>(eb[1]));
  const auto n0 = static_cast<std::size_t>(hi0 - lo0);
  const auto n1 = static_cast<std::size_t>(hi1 - lo1);
  std::vector<double> cells(n0 * n1, 0.0);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      const long long ia = lo0 + static_cast<long long>(i);
      const long long ja = lo1 + static_cast<long long>(j);
      const double m = op(a.at(ia, ja), b.at(ia - (*off)[0], ja - (*off)[1]));
      cells[i * n1 + j] = m > 0.0 ? m : 0.0;
    }
  GridDensity out(a.corner(lo0, lo1), a.spacing(), {n0, n1}, std::move(cells));
  out.record_snap(std::max(a.snap_distance(), b.snap_distance()));
  return out.trimmed();
}

/// Visits aligned cell pairs over the union of both grids.
template <class Visit>
void for_each_aligned_cell(const GridDensity& a, const GridDensity& b, Visit&& visit) {
  const auto off = lattice_offset(a, b);
  require(off.has_value(), ErrorCode::IncompatibleGrids,
          "grid densities do not share a lattice (spacing or origin mismatch)");
  const auto ea = a.extents();
  const auto eb = b.extents();
  const long long lo0 = std::min(0LL, (*off)[0]);
  const long long lo1 = std::min(0LL, (*off)[1]);
  const long long hi0 = std::max(static_cast<long long>(ea[0]), (*off)[0] + static_cast<long long>(eb[0]));
  const long long hi1 = std::max(static_cast<long long>(ea[1]), (*off)[1] + static_cast<long long>(eb[1]));
  for (long long i = lo0; i < hi0; ++i)
    for (long long j = lo1; j < hi1; ++j) visit(a.at(i, j), b.at(i - (*off)[0], j - (*off)[1]));
}

/// Discrete convolution of cell masses: cell i of `a` and cell j of `b`
/// contribute to cell i + j of a grid anchored at origin_a + origin_b.
inline GridDensity convolve_cells(const GridDensity& a, const GridDensity& b) {
  require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "grid dimension mismatch");
  require(std::abs(a.spacing() - b.spacing()) <= 1e-12 * a.spacing(), ErrorCode::IncompatibleGrids,
          "cannot convolve grids of different spacing");
  const auto ea = a.extents();
  const auto eb = b.extents();
  const std::size_t n0 = ea[0] + eb[0] - 1;
  const std::size_t n1 = ea[1] + eb[1] - 1;
  std::vector<double> cells(n0 * n1, 0.0);
  const auto& ca = a.cells();
  const auto& cb = b.cells();
  for (std::size_t i = 0; i < ea[0]; ++i)
    for (std::size_t j = 0; j < ea[1]; ++j) {
      const double wa = ca[i * ea[1] + j];
      if (wa == 0.0) continue;
      for (std::size_t k = 0; k < eb[0]; ++k) {
        double* row = cells.data() + (i + k) * n1 + j;
        const double* src = cb.data() + k * eb[1];
        for (std::size_t l = 0; l < eb[1]; ++l) row[l] += wa * src[l];
      }
    }
  GridDensity out(a.origin() + b.origin(), a.spacing(), {n0, n1}, std::move(cells));
  out.record_snap(std::max(a.snap_distance(), b.snap_distance()));
  return out;
}

}  // namespace levycouple
