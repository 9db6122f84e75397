#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "levycouple/error.hpp"
#include "levycouple/measure.hpp"

namespace levycouple {

using Rng = std::mt19937_64;

/// Independent generator for stream `index` under a master seed. Both words
/// go through seed_seq, so neighbouring indices give unrelated states.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Draws from a finite measure normalized to unit mass. Atoms are returned
/// exactly; density cells are sampled uniformly inside the cell.
class MeasureSampler {
 public:
  explicit MeasureSampler(const MixedMeasure& mu) : mu_(mu) {
    require(mu.total_mass() > 0.0, ErrorCode::ZeroMass, "cannot sample from a zero measure");
    double acc = 0.0;
    for (double m : mu.atomic().masses()) cumulative_.push_back(acc += m);
    if (mu.density())
      for (double m : mu.density()->cells()) cumulative_.push_back(acc += m);
  }

  const MixedMeasure& measure() const noexcept { return mu_; }

  Point operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                          cumulative_.size() - 1);
    // Skip zero-mass slots that upper_bound can land on at a cumulative plateau.
    while (k + 1 < cumulative_.size() && k > 0 && cumulative_[k] == cumulative_[k - 1]) ++k;
    const auto& atoms = mu_.atomic();
    if (k < atoms.size()) return atoms.point(k);
    const auto& g = *mu_.density();
    const std::size_t c = k - atoms.size();
    const std::size_t n1 = g.extents()[1];
    const Point lo = g.corner(static_cast<long long>(c / n1), static_cast<long long>(c % n1));
    std::vector<double> x(lo.coords().begin(), lo.coords().end());
    for (double& v : x) v += unit(rng) * g.spacing();
    return Point(std::move(x));
  }

 private:
  MixedMeasure mu_;
  std::vector<double> cumulative_;
};

}  // namespace levycouple
