#pragma once

// Desk-scale experiments built on the simulator and the spectral solver,
// with tabular reports and a per-rule cache of the critical time.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "bsrlab/bsr_sim.hpp"
#include "bsrlab/ode.hpp"
#include "bsrlab/rules.hpp"
#include "json.hpp"

namespace bsrlab {

using Cell = std::variant<std::string, double, std::int64_t, std::uint64_t, bool>;

/// Rectangular table; doubles print with 17 significant digits, non-finite
/// doubles as empty CSV fields and JSON nulls.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  void write_csv(std::ostream& out) const;
  void write_json(std::ostream& out) const;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string name;
  Table rows;     // every row carries the seed that produced it
  Table summary;
  std::vector<Check> checks;
  nlohmann::ordered_json meta;  // rule hash, grids, tolerances, fitted constants
  bool skipped = false;
  std::string note;

  bool all_passed() const;
};

struct ExperimentConfig {
  std::string out_dir;  // holds the critical-time cache; empty disables it
  std::uint64_t seed = 1;
  int replicas = 20;
  SimMode mode = SimMode::Poissonized;
  double ode_step = kDefaultOdeStep;
  double tc_tol = 1e-6;

  // subcritical
  std::vector<std::uint64_t> n_list;  // default 2^16 .. 2^22
  double gamma = 0.2;
  double eps_fixed = 0.2;

  // concentration
  std::uint64_t n = 1000000;
  double delta = 0.4;
  double T = 1.5;
  double sample_step = 0.05;

  // perturbation
  double t = 1.0;
  std::vector<double> eps_list{0.04, 0.02, 0.01, 0.005};
  int grid_points = 50;
  double slack = 1e-6;
};

struct TcLookup {
  double tc = 0;
  bool from_cache = false;
  std::string path;  // cache file, empty when caching is off
};

/// Critical time of the rule from <out_dir>/tc_<hash>.json when present with
/// matching step and tolerance, else computed and stored there.
TcLookup cached_tc(const Rule& rule, const std::string& out_dir, double ode_step, double tol);
/// Writes the cache entry read by cached_tc; returns its path.
std::string store_tc(const Rule& rule, const std::string& out_dir, double ode_step, double tol,
                     double tc);

/// Largest component at t_n = t_c - n^-gamma and at t_c - eps_fixed.
/// gamma must lie in (0, 1/4).
ExperimentReport run_subcritical(const Rule& rule, const ExperimentConfig& cfg);

/// Sup over a sample grid and all classes of |xbar_i(t) - x_i(t)| per replica,
/// and the fraction of replicas exceeding n^-delta. delta must lie in (0, 1/2).
ExperimentReport run_concentration(const Rule& rule, const ExperimentConfig& cfg);

/// |rho(rates +- eps) - rho(rates)| at time t with a log-log exponent fit, and
/// the two-sided increment bounds on a uniform time grid over (0, T].
ExperimentReport run_perturbation(const Rule& rule, const ExperimentConfig& cfg);

/// Writes <name>.<fmt>, <name>_summary.<fmt> and <name>_meta.json into dir.
void write_report(const ExperimentReport& report, const std::string& dir,
                  const std::string& format);

/// Least-squares slope and intercept of y on x, with the RMS residual.
struct LineFit {
  double slope = 0, intercept = 0, rms = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

double median_of(std::vector<double> v);

/// Rule hash as 16 lowercase hex digits.
std::string rule_hash_hex(const Rule& rule);

}  // namespace bsrlab
