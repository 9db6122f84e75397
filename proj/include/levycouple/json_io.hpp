#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "levycouple/criteria.hpp"
#include "levycouple/error.hpp"
#include "levycouple/measure.hpp"

namespace levycouple::io {

using Json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void bad(const std::string& field, const std::string& what) {
  fail(ErrorCode::ParseError, "field '" + field + "': " + what);
}

inline double number(const Json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const Json& j, const std::string& field) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) bad(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline const Json& member(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where.empty() ? key : where + "." + key, "missing");
  return j.at(key);
}

}  // namespace detail

/// {"dim": d, "atoms": [{"x": [..], "w": m}, ...],
///  "density": {"origin": [..], "spacing": h, "cells": [..] or [[..], ..]}
///          or {"uniform": [lo, hi], "spacing": h, "mass": m}}
inline MixedMeasure measure_from_json(const Json& j, const std::string& where = "measure") {
  using detail::bad;
  if (!j.is_object()) bad(where, "expected an object");
  const auto dim_v = detail::number(detail::member(j, "dim", where), where + ".dim");
  if (dim_v < 1 || dim_v != static_cast<double>(static_cast<std::size_t>(dim_v))) bad(where + ".dim", "must be a positive integer");
  const auto dim = static_cast<std::size_t>(dim_v);

  std::vector<AtomicMeasure::Atom> atoms;
  if (j.contains("atoms")) {
    const auto& a = j.at("atoms");
    if (!a.is_array()) bad(where + ".atoms", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string f = where + ".atoms[" + std::to_string(i) + "]";
      auto x = detail::numbers(detail::member(a[i], "x", f), f + ".x");
      if (x.size() != dim) bad(f + ".x", "has " + std::to_string(x.size()) + " coordinates, dim is " + std::to_string(dim));
      atoms.push_back({Point(std::move(x)), detail::number(detail::member(a[i], "w", f), f + ".w")});
    }
  }
  AtomicMeasure atomic(dim, std::move(atoms));

  std::optional<GridDensity> density;
  if (j.contains("density") && !j.at("density").is_null()) {
    const auto& d = j.at("density");
    const std::string f = where + ".density";
    const double h = detail::number(detail::member(d, "spacing", f), f + ".spacing");
    if (d.contains("uniform")) {
      const auto lohi = detail::numbers(d.at("uniform"), f + ".uniform");
      if (dim != 1 || lohi.size() != 2) bad(f + ".uniform", "expected [lo, hi] for a 1-dimensional measure");
      const double mass = d.contains("mass") ? detail::number(d.at("mass"), f + ".mass") : 1.0;
      density = GridDensity::uniform(lohi[0], lohi[1], h, mass);
    } else {
      auto origin = detail::numbers(detail::member(d, "origin", f), f + ".origin");
      if (origin.size() != dim) bad(f + ".origin", "dimension does not match dim");
      const auto& c = detail::member(d, "cells", f);
      if (!c.is_array() || c.empty()) bad(f + ".cells", "expected a non-empty array");
      if (dim == 1) {
        density = GridDensity(Point(std::move(origin)), h, detail::numbers(c, f + ".cells"));
      } else if (dim == 2) {
        std::vector<double> flat;
        std::size_t n1 = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
          auto row = detail::numbers(c[i], f + ".cells[" + std::to_string(i) + "]");
          if (i == 0) n1 = row.size();
          if (row.size() != n1) bad(f + ".cells", "rows have different lengths");
          flat.insert(flat.end(), row.begin(), row.end());
        }
        density = GridDensity(Point(std::move(origin)), h, {c.size(), n1}, std::move(flat));
      } else {
        bad(f, "densities are supported in dimension 1 or 2 only");
      }
    }
  }
  return MixedMeasure(std::move(atomic), std::move(density));
}

inline Json measure_to_json(const MixedMeasure& mu) {
  Json j;
  j["dim"] = mu.dim();
  Json atoms = Json::array();
  for (std::size_t i = 0; i < mu.atomic().size(); ++i) {
    auto loc = mu.atomic().location(i);
    atoms.push_back({{"x", std::vector<double>(loc.begin(), loc.end())}, {"w", mu.atomic().mass(i)}});
  }
  j["atoms"] = std::move(atoms);
  if (mu.density()) {
    const auto& g = *mu.density();
    Json d;
    d["origin"] = std::vector<double>(g.origin().coords().begin(), g.origin().coords().end());
    d["spacing"] = g.spacing();
    if (g.dim() == 1) {
      d["cells"] = g.cells();
    } else {
      Json rows = Json::array();
      const auto [n0, n1] = g.extents();
      for (std::size_t i = 0; i < n0; ++i)
        rows.push_back(std::vector<double>(g.cells().begin() + static_cast<std::ptrdiff_t>(i * n1),
                                           g.cells().begin() + static_cast<std::ptrdiff_t>((i + 1) * n1)));
      d["cells"] = std::move(rows);
    }
    j["density"] = std::move(d);
  }
  return j;
}

/// {"dim": d, "drift": [..], "gaussian": [[..], ..], "levy": measure,
///  "cutoff": eps, "infinite_activity": bool}; drift and gaussian default to 0.
inline LevyTriplet triplet_from_json(const Json& j) {
  using detail::bad;
  if (!j.is_object()) bad("triplet", "expected an object");
  LevyTriplet t;
  const double dim_v = detail::number(detail::member(j, "dim", ""), "dim");
  if (dim_v < 1 || dim_v != static_cast<double>(static_cast<std::size_t>(dim_v))) bad("dim", "must be a positive integer");
  t.dim = static_cast<std::size_t>(dim_v);
  t.drift = j.contains("drift") ? Point(detail::numbers(j.at("drift"), "drift")) : Point::zero(t.dim);
  t.gaussian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.dim), static_cast<Eigen::Index>(t.dim));
  if (j.contains("gaussian")) {
    const auto& g = j.at("gaussian");
    if (!g.is_array() || g.size() != t.dim) bad("gaussian", "expected a dim x dim array");
    for (std::size_t r = 0; r < t.dim; ++r) {
      auto row = detail::numbers(g[r], "gaussian[" + std::to_string(r) + "]");
      if (row.size() != t.dim) bad("gaussian[" + std::to_string(r) + "]", "expected dim entries");
      for (std::size_t c = 0; c < t.dim; ++c)
        t.gaussian(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  if (j.contains("levy")) {
    Json levy = j.at("levy");
    if (levy.is_object() && !levy.contains("dim")) levy["dim"] = t.dim;
    t.levy = measure_from_json(levy, "levy");
  } else {
    t.levy = MixedMeasure(t.dim);
  }
  t.cutoff = j.contains("cutoff") ? detail::number(j.at("cutoff"), "cutoff") : 1.0;
  if (j.contains("infinite_activity")) {
    if (!j.at("infinite_activity").is_boolean()) bad("infinite_activity", "expected true or false");
    t.infinite_activity = j.at("infinite_activity").get<bool>();
  }
  return t;
}

inline Json report_to_json(const CriterionReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["witness"] = r.witness;
  j["eta0"] = r.eta0;
  j["eta0_note"] = "grid minimum; upper bound on the continuum infimum";
  j["delta"] = r.delta;
  j["eps"] = r.eps;
  j["grid_step"] = r.grid_step;
  j["th22_holds"] = r.th22_holds;
  j["ex2_cond1"] = r.ex2_cond1 ? Json{{"l", r.ex2_cond1->l}, {"ac_mass", r.ex2_cond1->ac_mass}} : Json(nullptr);
  j["ex2_cond2"] = r.ex2_cond2 ? Json{{"l", r.ex2_cond2->l}, {"delta", r.ex2_cond2->delta}, {"infimum", r.ex2_cond2->infimum}}
                               : Json(nullptr);
  return j;
}

}  // namespace levycouple::io
