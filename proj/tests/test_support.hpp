#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "levycouple/measure.hpp"

namespace levycouple::testing {

/// Random atomic measure with up to `max_atoms` atoms. Locations are drawn on
/// the lattice (1/4) Z^d within [-range, range] so that pairs overlap often.
inline MixedMeasure random_discrete(std::mt19937_64& rng, std::size_t dim, std::size_t max_atoms,
                                    int range = 3) {
  std::uniform_int_distribution<std::size_t> count(1, max_atoms);
  std::uniform_int_distribution<int> coord(-4 * range, 4 * range);
  std::uniform_real_distribution<double> mass(0.05, 1.0);
  std::vector<AtomicMeasure::Atom> atoms;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    for (auto& c : x) c = 0.25 * coord(rng);
    atoms.push_back({Point(std::move(x)), mass(rng)});
  }
  return MixedMeasure(AtomicMeasure(dim, atoms));
}

inline MixedMeasure random_probability(std::mt19937_64& rng, std::size_t dim, std::size_t max_atoms,
                                       int range = 3) {
  return normalize(random_discrete(rng, dim, max_atoms, range)).first;
}

/// Location -> mass map built by exact lookup; usable as an independent
/// oracle when every location is exactly representable.
using MassMap = std::map<std::vector<double>, double>;

inline MassMap to_map(const AtomicMeasure& mu) {
  MassMap m;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto loc = mu.location(i);
    m[std::vector<double>(loc.begin(), loc.end())] += mu.mass(i);
  }
  return m;
}

}  // namespace levycouple::testing
