#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "levycouple/error.hpp"

namespace levycouple {

/// A location in R^d with finite coordinates.
class Point {
 public:
  Point() = default;

  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) { validate(); }

  Point(std::initializer_list<double> coords) : coords_(coords) { validate(); }

  explicit Point(std::span<const double> coords) : coords_(coords.begin(), coords.end()) {
    validate();
  }

  static Point zero(std::size_t dim) { return Point(std::vector<double>(dim, 0.0)); }

  static Point unit(std::size_t dim, std::size_t axis, double length = 1.0) {
    std::vector<double> c(dim, 0.0);
    c.at(axis) = length;
    return Point(std::move(c));
  }

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }

  double norm() const noexcept {
    double s = 0.0;
    for (double c : coords_) s += c * c;
    return std::sqrt(s);
  }

  bool is_zero() const noexcept {
    for (double c : coords_)
      if (c != 0.0) return false;
    return true;
  }

  /// Coordinate-wise closeness, the same rule used for atom deduplication.
  bool approx_equal(const Point& other, double tol) const noexcept {
    if (other.dim() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
      if (std::abs(coords_[i] - other.coords_[i]) > tol) return false;
    return true;
  }

  friend Point operator+(const Point& a, const Point& b) {
    check_same_dim(a, b);
    std::vector<double> c(a.dim());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.coords_[i] + b.coords_[i];
    return Point(std::move(c));
  }

  friend Point operator-(const Point& a, const Point& b) {
    check_same_dim(a, b);
    std::vector<double> c(a.dim());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.coords_[i] - b.coords_[i];
    return Point(std::move(c));
  }

  friend Point operator-(const Point& a) {
    std::vector<double> c(a.coords_);
    for (double& v : c) v = -v;
    return Point(std::move(c));
  }

  friend Point operator*(double s, const Point& a) {
    std::vector<double> c(a.coords_);
    for (double& v : c) v *= s;
    return Point(std::move(c));
  }

  friend bool operator==(const Point&, const Point&) = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dim(); ++i) {
      if (i) s += ", ";
      s += std::to_string(coords_[i]);
    }
    return s + ")";
  }

 private:
  void validate() const {
    require(!coords_.empty(), ErrorCode::InvalidArgument, "point must have dimension >= 1");
    for (double c : coords_)
      require(std::isfinite(c), ErrorCode::InvalidArgument, "point coordinates must be finite");
  }

  static void check_same_dim(const Point& a, const Point& b) {
    require(a.dim() == b.dim(), ErrorCode::DimensionMismatch,
            "points of dimension " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  }

  std::vector<double> coords_;
};

}  // namespace levycouple
