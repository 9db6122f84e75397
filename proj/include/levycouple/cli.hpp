#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "levycouple/bounds.hpp"
#include "levycouple/coupling.hpp"
#include "levycouple/criteria.hpp"
#include "levycouple/error.hpp"
#include "levycouple/json_io.hpp"
#include "levycouple/semigroup.hpp"

namespace levycouple::cli {

inline constexpr const char* kToolName = "levycouple";
inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 1,
  kExitInvariant = 2,
  kExitNoCoupling = 3,
  kExitInconclusive = 4,
  kExitBudget = 5,
  kExitDegenerate = 6,
  kExitInsufficientData = 7,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return kExitParse;
    case ErrorCode::BudgetExceeded: return kExitBudget;
    case ErrorCode::DegenerateOverlap: return kExitDegenerate;
    case ErrorCode::InsufficientData: return kExitInsufficientData;
    default: return kExitInvariant;
  }
}

struct RunConfig {
  std::string command;
  std::string input_path;
  std::string output_path;
  std::string summary_path;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  double tol = kDefaultSeriesTolerance;
  std::string t_grid = "1,2,4,8,16,32,64";
  double delta = 0.5;
  std::optional<double> eps;
  double grid_step = 1.0 / 64;
  std::size_t depth = kDefaultSearchDepth;
  std::string x = "0";
  std::string y;
  std::string displacement;
  std::size_t samples = 100'000;
  std::uint64_t max_steps = kDefaultMaxSteps;
  std::size_t chunk_size = 10'000;
  std::size_t budget = kDefaultBudget;
  std::optional<std::uint64_t> fixed_ts;
  std::optional<double> th2_c;
  std::string column;
};

/// Shortest round-trip decimal form; independent of the global locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s, const std::string& field) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCode::ParseError, field + ": cannot read '" + std::string(s) + "' as a number");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// "1,2,5" lists the times; "lo:hi:xk" is the geometric grid lo, k lo, ... <= hi
/// and "lo:hi:+s" the arithmetic one.
inline std::vector<double> parse_grid(const std::string& spec, const std::string& field = "--t-grid") {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    const auto parts = split(spec, ':');
    if (parts.size() != 3 || parts[2].size() < 2 || (parts[2][0] != 'x' && parts[2][0] != '+'))
      fail(ErrorCode::ParseError, field + ": expected lo:hi:xFACTOR or lo:hi:+STEP");
    const double lo = parse_number(parts[0], field), hi = parse_number(parts[1], field);
    const double k = parse_number(std::string_view(parts[2]).substr(1), field);
    const bool geometric = parts[2][0] == 'x';
    require(geometric ? (lo > 0.0 && k > 1.0) : k > 0.0, ErrorCode::InvalidArgument,
            field + ": grid step must move upward");
    for (std::size_t i = 0;; ++i) {
      const double v = geometric ? lo * std::pow(k, static_cast<double>(i)) : lo + k * static_cast<double>(i);
      if (v > hi * (1.0 + 1e-12)) break;
      out.push_back(v);
    }
  } else {
    for (const auto& p : split(spec, ',')) out.push_back(parse_number(p, field));
  }
  require(!out.empty(), ErrorCode::InvalidArgument, field + ": empty grid");
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(std::isfinite(out[i]) && out[i] > 0.0, ErrorCode::InvalidArgument, field + ": times must be positive");
    if (i > 0) require(out[i] > out[i - 1], ErrorCode::InvalidArgument, field + ": times must be strictly increasing");
  }
  return out;
}

inline Point parse_point(const std::string& spec, const std::string& field) {
  std::vector<double> v;
  for (const auto& p : split(spec, ',')) v.push_back(parse_number(p, field));
  if (v.empty()) fail(ErrorCode::ParseError, field + ": empty point");
  return Point(std::move(v));
}

inline io::Json config_echo(const RunConfig& c) {
  io::Json j;
  j["command"] = c.command;
  j["input"] = c.input_path;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["tol"] = c.tol;
  j["t_grid"] = c.t_grid;
  j["delta"] = c.delta;
  j["eps"] = c.eps ? io::Json(*c.eps) : io::Json(nullptr);
  j["grid_step"] = c.grid_step;
  j["depth"] = c.depth;
  j["x"] = c.x;
  j["y"] = c.y;
  j["displacement"] = c.displacement;
  j["samples"] = c.samples;
  j["max_steps"] = c.max_steps;
  j["chunk_size"] = c.chunk_size;
  j["budget"] = c.budget;
  j["fixed_ts"] = c.fixed_ts ? io::Json(*c.fixed_ts) : io::Json(nullptr);
  j["th2_c"] = c.th2_c ? io::Json(*c.th2_c) : io::Json(nullptr);
  j["column"] = c.column;
  return j;
}

inline io::Json artifact_header(const RunConfig& c) {
  io::Json j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["seed"] = c.seed;
  j["config"] = config_echo(c);
  return j;
}

inline void write_csv_preamble(std::ostream& os, const RunConfig& c) {
  os << "# " << kToolName << ' ' << kVersion << '\n';
  os << "# seed: " << c.seed << '\n';
  os << "# config: " << config_echo(c).dump() << '\n';
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, "cannot open input '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline io::Json load_json(const std::string& path) {
  require(!path.empty(), ErrorCode::ParseError, "--input is required");
  try {
    return io::Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, "malformed JSON in '" + path + "': " + e.what());
  }
}

/// Step law and rate of the compound Poisson part: nu_eps = lambda * step.
struct CompoundPoisson {
  MixedMeasure step;
  double rate = 0.0;
};

inline CompoundPoisson compound_poisson_from(const LevyTriplet& t, const RunConfig& c) {
  t.validate();
  require(!t.has_gaussian(), ErrorCode::InvalidArgument,
          "gaussian: must be zero here; only compound Poisson laws are evaluated exactly");
  require(t.levy.total_mass() > 0.0, ErrorCode::InvalidArgument, "levy: measure is empty");
  const auto nu_eps = truncate_levy(t.levy, c.eps.value_or(t.cutoff), t.infinite_activity);
  auto [step, rate] = normalize(nu_eps);
  return {std::move(step), rate};
}

class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      require(file_.good(), ErrorCode::InvalidArgument, "cannot open output '" + path + "'");
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline int cmd_check(const RunConfig& c, std::ostream& out) {
  auto t = io::triplet_from_json(load_json(c.input_path));
  if (c.eps) t.cutoff = *c.eps;
  CriteriaOptions opts;
  opts.delta = c.delta;
  opts.grid_step = c.grid_step;
  opts.search_depth = c.depth;
  opts.workers = c.workers;
  opts.convolve.budget = c.budget;
  const auto report = decide_coupling_property(t, opts);
  auto j = artifact_header(c);
  j["report"] = io::report_to_json(report);
  Sink sink(c.output_path, out);
  sink.stream() << j.dump(2) << '\n';
  switch (report.verdict) {
    case Verdict::Coupling: return kExitOk;
    case Verdict::NoCoupling: return kExitNoCoupling;
    case Verdict::Inconclusive: return kExitInconclusive;
  }
  return kExitInvariant;
}

struct TvRow {
  double t, lower, upper, series, co2, th2;
};

struct TvRun {
  std::vector<TvRow> rows;
  double c_xy = 0.0;
  std::size_t c_xy_n = 0;  // largest n in the max defining c_xy
  double th2_c = 0.0;
};

inline TvRun tv_rows(const CompoundPoisson& cp, const Point& x, const Point& y, const std::vector<double>& times,
                     const RunConfig& c) {
  SeriesOptions so;
  so.keep_powers = false;
  so.convolve.budget = c.budget;
  const auto path = build_series_path(cp.step, cp.rate, times, c.tol, so);
  std::size_t n_max = 0;
  for (const auto& s : path) n_max = std::max(n_max, s.truncation_order());
  std::vector<double> rw_tv;
  try {
    rw_tv = rw_tv_sequence(cp.step, x, y, std::max<std::size_t>(n_max, 200), so.convolve);
  } catch (const BudgetError&) {
    if (n_max >= 200) throw;
    rw_tv = rw_tv_sequence(cp.step, x, y, n_max, so.convolve);
  }
  TvRun run;
  run.c_xy_n = std::min<std::size_t>(200, rw_tv.size() - 1);
  for (std::size_t n = 1; n <= run.c_xy_n; ++n)
    run.c_xy = std::max(run.c_xy, std::sqrt(static_cast<double>(n)) * rw_tv[n]);
  const bool same = x.approx_equal(y, kDefaultDedupTolerance);
  for (const auto& s : path) {
    const auto iv = cp_tv(s, x, y);
    run.rows.push_back({s.time(), iv.lower, iv.upper, series_tv_bound(s, rw_tv),
                        couplingo2_bound(cp.rate, s.time(), run.c_xy, same), 0.0});
  }
  if (c.th2_c) {
    run.th2_c = *c.th2_c;
  } else {
    for (const auto& r : run.rows)
      run.th2_c = std::max(run.th2_c, r.upper * std::sqrt(r.t) / (1.0 + (x - y).norm()));
  }
  for (auto& r : run.rows) r.th2 = th2_bound(r.t, x, y, run.th2_c);
  return run;
}

inline int cmd_tv(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto cp = compound_poisson_from(io::triplet_from_json(load_json(c.input_path)), c);
  require(!c.y.empty(), ErrorCode::InvalidArgument, "--y is required");
  const Point x = parse_point(c.x, "--x"), y = parse_point(c.y, "--y");
  require(x.dim() == cp.step.dim() && y.dim() == cp.step.dim(), ErrorCode::DimensionMismatch,
          "--x/--y: dimension does not match the triplet");
  auto times = parse_grid(c.t_grid);
  TvRun run;
  int status = kExitOk;
  try {
    run = tv_rows(cp, x, y, times, c);
  } catch (const BudgetError& e) {
    // Keep the times whose series fits within the power that was reached.
    std::vector<double> ok;
    for (double t : times)
      if (poisson_truncation(cp.rate * t, c.tol).order <= e.achieved()) ok.push_back(t);
    err << "error: " << e.what() << '\n';
    if (ok.empty()) {
      err << "no time in the grid could be completed\n";
      return kExitBudget;
    }
    err << "largest completed t: " << format_number(ok.back()) << '\n';
    run = tv_rows(cp, x, y, ok, c);
    status = kExitBudget;
  }
  Sink sink(c.output_path, out);
  auto& os = sink.stream();
  write_csv_preamble(os, c);
  os << "# rate: " << format_number(cp.rate) << '\n';
  os << "# c_xy (empirical, n <= " << run.c_xy_n << "): " << format_number(run.c_xy) << '\n';
  os << "# th2 constant (" << (c.th2_c ? "supplied" : "calibrated on these rows") << "): "
     << format_number(run.th2_c) << '\n';
  os << "t,tv_lower,tv_upper,series_bound,couplingo2_bound,th2_bound\n";
  for (const auto& r : run.rows)
    os << format_number(r.t) << ',' << format_number(r.lower) << ',' << format_number(r.upper) << ','
       << format_number(r.series) << ',' << format_number(r.co2) << ',' << format_number(r.th2) << '\n';
  return status;
}

inline int cmd_couple(const RunConfig& c, std::ostream& out) {
  const auto cp = compound_poisson_from(io::triplet_from_json(load_json(c.input_path)), c);
  Point a = Point::zero(cp.step.dim());
  if (!c.displacement.empty()) {
    a = parse_point(c.displacement, "--displacement");
  } else {
    require(!c.y.empty(), ErrorCode::InvalidArgument, "--y or --displacement is required");
    a = parse_point(c.y, "--y") - parse_point(c.x, "--x");
  }
  require(a.dim() == cp.step.dim(), ErrorCode::DimensionMismatch, "displacement: dimension does not match the triplet");
  const auto law = build_mineka(cp.step, a);
  const auto times = parse_grid(c.t_grid);
  require(c.workers >= 1 && c.samples >= 1 && c.chunk_size >= 1 && c.max_steps >= 1, ErrorCode::InvalidArgument,
          "--workers, --samples, --chunk-size and --max-steps must be positive");

  MonteCarloOptions mc;
  mc.seed = c.seed;
  mc.workers = c.workers;
  mc.chunk_size = c.chunk_size;
  mc.n_samples = c.samples;
  mc.max_steps = c.max_steps;
  TsSampler ts = lazy_walk_ts_sampler(law.stay_prob, c.max_steps);
  if (c.fixed_ts) {
    require(*c.fixed_ts >= 1, ErrorCode::InvalidArgument, "--fixed-ts must be at least 1");
    const auto k = *c.fixed_ts;
    ts = [k](Rng&) { return std::optional<std::uint64_t>(k); };
  }
  const auto rows = estimate_coupling_tail(ts, cp.rate, times, mc);

  std::vector<double> exact;
  for (double t : times) {
    if (c.fixed_ts) {
      // P(N_t < k) for the deterministic walk time k.
      const auto w = poisson_pmf_table(cp.rate * t, *c.fixed_ts - 1);
      double p = 0.0;
      for (double v : w) p += v;
      exact.push_back(p);
    } else {
      exact.push_back(subordinated_tail(law.stay_prob, cp.rate, t));
    }
  }

  {
    Sink sink(c.output_path, out);
    auto& os = sink.stream();
    write_csv_preamble(os, c);
    os << "# rate: " << format_number(cp.rate) << '\n';
    os << "# stay_prob: " << format_number(law.stay_prob) << '\n';
    os << "# n_samples: " << c.samples << '\n';
    os << "t,p_hat_TL_gt_t,stderr,n_censored,p_subordinated\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
      os << format_number(rows[i].t) << ',' << format_number(rows[i].p_hat) << ',' << format_number(rows[i].stderr_)
         << ',' << rows[i].n_censored << ',' << format_number(exact[i]) << '\n';
  }

  std::string summary = c.summary_path;
  if (summary.empty() && !c.output_path.empty()) summary = c.output_path + ".summary.json";
  if (!summary.empty()) {
    auto j = artifact_header(c);
    j["rate"] = cp.rate;
    j["mineka"] = {{"step", law.step},       {"p_plus", law.p_plus}, {"p_minus", law.p_minus},
                   {"p_zero", law.p_zero},   {"stay_prob", law.stay_prob}};
    j["n_samples"] = c.samples;
    j["n_censored"] = rows.empty() ? 0 : rows.front().n_censored;
    j["censoring"] = "censored samples are counted as T^L > t";
    io::Json arr = io::Json::array();
    for (std::size_t i = 0; i < rows.size(); ++i)
      arr.push_back({{"t", rows[i].t}, {"p_hat", rows[i].p_hat}, {"stderr", rows[i].stderr_},
                     {"p_subordinated", exact[i]}});
    j["rows"] = std::move(arr);
    std::ofstream f(summary, std::ios::binary);
    require(f.good(), ErrorCode::InvalidArgument, "cannot open summary '" + summary + "'");
    f << j.dump(2) << '\n';
  }
  return kExitOk;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                      std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    for (const auto& cell : cells) row.push_back(parse_number(cell, "line " + std::to_string(line_no)));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) fail(ErrorCode::ParseError, "input has no header row");
  return t;
}

inline int cmd_rate(const RunConfig& c, std::ostream& out) {
  require(!c.input_path.empty(), ErrorCode::ParseError, "--input is required");
  const auto table = read_csv(read_file(c.input_path));
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const auto t_col = col("t");
  if (!t_col) fail(ErrorCode::ParseError, "input has no 't' column");
  std::string name = c.column;
  if (name.empty()) {
    for (const char* cand : {"tv_upper", "p_hat_TL_gt_t", "value"})
      if (col(cand)) {
        name = cand;
        break;
      }
  }
  const auto v_col = col(name);
  if (!v_col) fail(ErrorCode::ParseError, "input has no column '" + (name.empty() ? std::string("tv_upper") : name) + "'");
  std::vector<double> times, values;
  for (const auto& r : table.rows) {
    times.push_back(r[*t_col]);
    values.push_back(r[*v_col]);
  }
  const auto fit = fit_rate(times, values);
  auto j = artifact_header(c);
  j["column"] = name;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r_squared"] = fit.r_squared;
  j["n_used"] = fit.times.size();
  j["n_excluded"] = fit.n_excluded;
  j["no_decay"] = fit.no_decay;
  j["flag"] = fit.no_decay ? "no decay" : "";
  j["note"] = "empirical log-log fit";
  Sink sink(c.output_path, out);
  sink.stream() << j.dump(2) << '\n';
  return kExitOk;
}

inline void add_common_options(CLI::App& sub, RunConfig& c) {
  sub.add_option("--input", c.input_path, "input file (triplet JSON, or CSV for rate)");
  sub.add_option("--output", c.output_path, "output file (default: stdout)");
  sub.add_option("--seed", c.seed, "master RNG seed");
  sub.add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  sub.add_option("--tol", c.tol, "Poisson truncation tolerance")->check(CLI::Range(1e-300, 0.5));
  sub.add_option("--t-grid", c.t_grid, "times: a,b,c or lo:hi:xFACTOR or lo:hi:+STEP");
  sub.add_option("--delta", c.delta, "radius of the shift ball")->check(CLI::PositiveNumber);
  sub.add_option("--eps", c.eps, "small-jump cutoff (default: the triplet's)")->check(CLI::PositiveNumber);
  sub.add_option("--grid-step", c.grid_step, "spacing of the shift grid")->check(CLI::PositiveNumber);
  sub.add_option("--depth", c.depth, "largest convolution power searched")->check(CLI::PositiveNumber);
  sub.add_option("--x", c.x, "start point x (comma-separated)");
  sub.add_option("--y", c.y, "start point y (comma-separated)");
  sub.add_option("--displacement", c.displacement, "coupling displacement a (default: y - x)");
  sub.add_option("--samples", c.samples, "Monte Carlo sample count")->check(CLI::PositiveNumber);
  sub.add_option("--max-steps", c.max_steps, "censoring horizon for the walk coupling time")
      ->check(CLI::PositiveNumber);
  sub.add_option("--chunk-size", c.chunk_size, "samples per RNG stream")->check(CLI::PositiveNumber);
  sub.add_option("--budget", c.budget, "largest atom + cell count of any convolution power")
      ->check(CLI::PositiveNumber);
  sub.add_option("--summary", c.summary_path, "JSON summary path for couple (default: OUTPUT.summary.json)");
  sub.add_option("--fixed-ts", c.fixed_ts, "replace the walk coupling time by a constant (diagnostic)");
  sub.add_option("--th2-c", c.th2_c, "constant for the th2 bound column (default: calibrated)");
  sub.add_option("--column", c.column, "CSV column to fit in rate");
}

/// Parses argv and runs one subcommand; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Coupling and total-variation tools for compound Poisson and Levy processes", kToolName};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  struct Sub {
    const char* name;
    const char* help;
  };
  for (const Sub s : {Sub{"check", "decide the coupling property of a triplet"},
                      Sub{"tv", "exact total variation between P_t(x, .) and P_t(y, .)"},
                      Sub{"couple", "Monte Carlo tail of the compound Poisson coupling time"},
                      Sub{"rate", "fit a log-log decay rate to a CSV column"}}) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common_options(*sub, c);
    sub->callback([&c, name = std::string(s.name)] { c.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kExitOk : kExitParse;
  }
  try {
    if (c.command == "check") return cmd_check(c, out);
    if (c.command == "tv") return cmd_tv(c, out, err);
    if (c.command == "couple") return cmd_couple(c, out);
    if (c.command == "rate") return cmd_rate(c, out);
    err << "error: unknown command\n";
    return kExitParse;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvariant;
  }
}

}  // namespace levycouple::cli
