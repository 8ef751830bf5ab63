#include "bsrlab/experiments.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "bsrlab/error.hpp"
#include "bsrlab/format.hpp"
#include "bsrlab/irg.hpp"
#include "bsrlab/parallel.hpp"
#include "bsrlab/rng.hpp"
#include "bsrlab/spectral.hpp"

namespace bsrlab {

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string csv_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<V, double>) {
          return std::isfinite(v) ? fmt_double(v) : std::string();
        } else if constexpr (std::is_same_v<V, bool>) {
          return v ? "true" : "false";
        } else {
          return std::to_string(v);
        }
      },
      c);
}

std::string json_cell(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return nlohmann::json(*s).dump();
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? fmt_double(*d) : "null";
  return csv_cell(c);
}

nlohmann::ordered_json base_meta(const std::string& name, const Rule& rule,
                                 const ExperimentConfig& cfg) {
  nlohmann::ordered_json m;
  m["experiment"] = name;
  m["rule_hash"] = hash_hex(rule.hash());
  m["rule"] = nlohmann::json::parse(serialize_rule(rule));
  m["seed"] = cfg.seed;
  m["replicas"] = cfg.replicas;
  m["mode"] = to_string(cfg.mode);
  m["ode_step"] = cfg.ode_step;
  return m;
}

std::vector<double> uniform_grid(double T, double step) {
  std::vector<double> g;
  const auto m = static_cast<std::size_t>(std::ceil(T / step - 1e-9));
  for (std::size_t k = 0; k < m; ++k) g.push_back(static_cast<double>(k) * step);
  g.push_back(T);
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tables and reports

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::logic_error("table row width mismatch");
  rows.push_back(std::move(row));
}

void Table::write_csv(std::ostream& out) const {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << csv_cell(r[c]);
    out << '\n';
  }
}

void Table::write_json(std::ostream& out) const {
  out << "[\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << "  {";
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? ", " : "") << nlohmann::json(columns[c]).dump() << ": " << json_cell(rows[i][c]);
    out << (i + 1 < rows.size() ? "},\n" : "}\n");
  }
  out << "]\n";
}

bool ExperimentReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

void write_report(const ExperimentReport& report, const std::string& dir,
                  const std::string& format) {
  if (format != "csv" && format != "json") throw DomainError("format must be csv or json");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create output directory " + dir + ": " + ec.message());
  auto open = [&](const std::string& file) {
    std::ofstream f(std::filesystem::path(dir) / file);
    if (!f) throw ResourceError("cannot write " + (std::filesystem::path(dir) / file).string());
    return f;
  };
  auto write_table = [&](const Table& t, const std::string& stem) {
    auto f = open(stem + "." + format);
    if (format == "csv")
      t.write_csv(f);
    else
      t.write_json(f);
  };
  write_table(report.rows, report.name);
  write_table(report.summary, report.name + "_summary");
  nlohmann::ordered_json meta = report.meta;
  meta["skipped"] = report.skipped;
  meta["note"] = report.note;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  meta["checks"] = checks;
  open(report.name + "_meta.json") << meta.dump(2) << '\n';
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  if (m < 2 || y.size() != m) throw DomainError("line fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  const double md = static_cast<double>(m);
  LineFit f;
  f.slope = (md * sxy - sx * sy) / (md * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / md;
  double ss = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double r = y[k] - (f.intercept + f.slope * x[k]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / md);
  return f;
}

std::string rule_hash_hex(const Rule& rule) { return hash_hex(rule.hash()); }

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// Critical-time cache

TcLookup cached_tc(const Rule& rule, const std::string& out_dir, double ode_step, double tol) {
  TcLookup out;
  const std::string hex = hash_hex(rule.hash());
  if (!out_dir.empty()) {
    out.path = (std::filesystem::path(out_dir) / ("tc_" + hex + ".json")).string();
    std::ifstream in(out.path);
    if (in) {
      try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("rule_hash") == hex && j.at("ode_step") == ode_step && j.at("tol") == tol) {
          out.tc = j.at("tc").get<double>();
          out.from_cache = true;
          return out;
        }
      } catch (const nlohmann::json::exception&) {
        // Unreadable cache entries are recomputed and overwritten.
      }
    }
  }
  out.tc = find_tc(rule, ode_step, tol).tc;
  if (!out_dir.empty()) store_tc(rule, out_dir, ode_step, tol, out.tc);
  return out;
}

std::string store_tc(const Rule& rule, const std::string& out_dir, double ode_step, double tol,
                     double tc) {
  const std::string hex = hash_hex(rule.hash());
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  const std::string path = (std::filesystem::path(out_dir) / ("tc_" + hex + ".json")).string();
  std::ofstream f(path);
  if (!f) throw ResourceError("cannot write t_c cache " + path);
  nlohmann::ordered_json j;
  j["rule_hash"] = hex;
  j["tc"] = tc;
  j["ode_step"] = ode_step;
  j["tol"] = tol;
  f << j.dump(2) << '\n';
  return path;
}

// ---------------------------------------------------------------------------
// Subcritical scaling

ExperimentReport run_subcritical(const Rule& rule, const ExperimentConfig& cfg) {
  if (!(cfg.gamma > 0 && cfg.gamma < 0.25))
    throw DomainError("gamma must lie in (0, 1/4), the barely subcritical hypothesis");
  if (cfg.replicas < 1) throw DomainError("replicas must be at least 1");
  std::vector<std::uint64_t> ns = cfg.n_list;
  if (ns.empty())
    for (int e = 16; e <= 22; ++e) ns.push_back(std::uint64_t{1} << e);
  std::sort(ns.begin(), ns.end());

  const TcLookup tc = cached_tc(rule, cfg.out_dir, cfg.ode_step, cfg.tc_tol);
  const double t_eps = tc.tc - cfg.eps_fixed;
  const bool has_eps = cfg.eps_fixed > 0 && t_eps > 0;
  std::vector<double> tn(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < 2) throw DomainError("n must be at least 2");
    tn[i] = tc.tc - std::pow(static_cast<double>(ns[i]), -cfg.gamma);
    if (!(tn[i] > 0))
      throw DomainError("n = " + std::to_string(ns[i]) + " too small: t_n = t_c - n^-gamma <= 0");
  }

  struct Result {
    std::uint64_t seed = 0, c1_tn = 0, c1_eps = 0;
  };
  const auto R = static_cast<std::size_t>(cfg.replicas);
  std::vector<Result> res(ns.size() * R);
  parallel_for(res.size(), [&](std::size_t job) {
    const std::size_t i = job / R, r = job % R;
    Result& out = res[job];
    out.seed = derive_seed(cfg.seed, ns[i], r);
    std::vector<double> samples{tn[i]};
    if (has_eps) samples.push_back(t_eps);
    std::sort(samples.begin(), samples.end());
    const auto series = simulate(rule, ns[i], samples.back(), out.seed, cfg.mode, samples);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (samples[k] == tn[i]) out.c1_tn = series.rows[k].c1;
      if (has_eps && samples[k] == t_eps) out.c1_eps = series.rows[k].c1;
    }
  });

  ExperimentReport rep;
  rep.name = "subcritical";
  rep.rows.columns = {"n", "replica", "seed", "t_n", "c1_t_n", "r_n", "t_eps", "c1_eps", "eps_ratio"};
  rep.summary.columns = {"n", "t_n", "median_c1_t_n", "median_r_n", "median_c1_eps",
                         "median_eps_ratio"};
  std::vector<double> med_r, med_eps;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double nd = static_cast<double>(ns[i]);
    const double L = std::log(nd);
    const double gap = tc.tc - tn[i];
    std::vector<double> c1s, rs, c1e, es;
    for (std::size_t r = 0; r < R; ++r) {
      const Result& x = res[i * R + r];
      const double c1 = static_cast<double>(x.c1_tn);
      const double rn = c1 * gap * gap / (L * L * L * L);
      const double ce = static_cast<double>(x.c1_eps);
      const double er = has_eps ? ce * cfg.eps_fixed * cfg.eps_fixed / L : std::nan("");
      rep.rows.add({ns[i], static_cast<std::uint64_t>(r), x.seed, tn[i], x.c1_tn, rn,
                    has_eps ? t_eps : std::nan(""), x.c1_eps, er});
      c1s.push_back(c1);
      rs.push_back(rn);
      c1e.push_back(ce);
      es.push_back(er);
    }
    med_r.push_back(median_of(rs));
    med_eps.push_back(has_eps ? median_of(es) : std::nan(""));
    rep.summary.add({ns[i], tn[i], median_of(c1s), med_r.back(),
                     has_eps ? median_of(c1e) : std::nan(""), med_eps.back()});
  }

  const double B = *std::max_element(med_r.begin(), med_r.end());
  if (ns.size() >= 2) {
    const double earlier = *std::max_element(med_r.begin(), med_r.end() - 1);
    rep.checks.push_back({"r(n) bounded", med_r.back() <= earlier,
                          "median r at largest n " + fmt_double(med_r.back()) +
                              " vs max over smaller n " + fmt_double(earlier)});
  }
  if (ns.size() >= 3) {
    const std::size_t m = ns.size();
    const bool ok = med_r[m - 3] >= med_r[m - 2] && med_r[m - 2] >= med_r[m - 1];
    rep.checks.push_back({"top-three r(n) non-increasing", ok,
                          fmt_double(med_r[m - 3]) + " >= " + fmt_double(med_r[m - 2]) +
                              " >= " + fmt_double(med_r[m - 1])});
  }
  double band = std::nan("");
  if (has_eps) {
    const auto [lo, hi] = std::minmax_element(med_eps.begin(), med_eps.end());
    band = *hi / *lo;
    rep.checks.push_back({"fixed-eps ratio within factor 4", band <= 4.0,
                          "max/min of median C1 eps^2/log n = " + fmt_double(band)});
  }

  rep.meta = base_meta(rep.name, rule, cfg);
  rep.meta["tc"] = tc.tc;
  rep.meta["tc_from_cache"] = tc.from_cache;
  rep.meta["tolerances"] = {{"tc_tol", cfg.tc_tol}};
  rep.meta["gamma"] = cfg.gamma;
  rep.meta["eps_fixed"] = cfg.eps_fixed;
  rep.meta["n_list"] = ns;
  rep.meta["fitted"] = {{"B_max_median_r", B}, {"eps_band_ratio", band}};
  if (ns.size() >= 2) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      x.push_back(std::log(std::log(static_cast<double>(ns[i]))));
      y.push_back(std::log(med_r[i]));
    }
    const LineFit f = fit_line(x, y);
    rep.meta["fitted"]["log_r_vs_loglog_n_slope"] = f.slope;
    rep.meta["fitted"]["log_r_vs_loglog_n_rms"] = f.rms;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Concentration

ExperimentReport run_concentration(const Rule& rule, const ExperimentConfig& cfg) {
  if (!(cfg.delta > 0 && cfg.delta < 0.5)) throw DomainError("delta must lie in (0, 1/2)");
  if (!(cfg.T > 0)) throw DomainError("T must be positive");
  if (!(cfg.sample_step > 0)) throw DomainError("sample step must be positive");
  if (cfg.replicas < 1) throw DomainError("replicas must be at least 1");

  ExperimentReport rep;
  rep.name = "concentration";
  rep.rows.columns = {"replica", "seed", "sup_dev", "threshold", "exceeded"};
  rep.summary.columns = {"n", "delta", "T", "replicas", "exceed_count", "exceed_fraction"};
  rep.meta = base_meta(rep.name, rule, cfg);
  const double nd = static_cast<double>(cfg.n);
  const double threshold = std::pow(nd, -cfg.delta);
  rep.meta["n"] = cfg.n;
  rep.meta["delta"] = cfg.delta;
  rep.meta["T"] = cfg.T;
  rep.meta["sample_step"] = cfg.sample_step;
  rep.meta["threshold"] = threshold;

  // The deviation bound decays like exp(-C n^{1-2 delta}); below this scale
  // it carries no information.
  if (std::pow(nd, 1.0 - 2.0 * cfg.delta) < 10.0) {
    rep.skipped = true;
    rep.note = "n too small for asymptotic regime (n^(1-2 delta) < 10)";
    return rep;
  }

  const std::vector<double> grid = uniform_grid(cfg.T, cfg.sample_step);
  const double step = std::min(cfg.ode_step, cfg.T);
  const DensityTrajectory traj = solve_densities(rule, cfg.T, step);
  std::vector<std::vector<double>> x_ode;
  for (double t : grid) x_ode.push_back(interpolate(traj, t));

  const auto R = static_cast<std::size_t>(cfg.replicas);
  std::vector<double> sup(R);
  std::vector<std::uint64_t> seeds(R);
  parallel_for(R, [&](std::size_t r) {
    seeds[r] = derive_seed(cfg.seed, r);
    const auto series = simulate(rule, cfg.n, cfg.T, seeds[r], cfg.mode, grid);
    double s = 0;
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (std::size_t i = 0; i < x_ode[k].size(); ++i)
        s = std::max(s, std::abs(series.rows[k].x[i] - x_ode[k][i]));
    sup[r] = s;
  });

  std::uint64_t exceed = 0;
  for (std::size_t r = 0; r < R; ++r) {
    const bool e = sup[r] > threshold;
    exceed += e;
    rep.rows.add({static_cast<std::uint64_t>(r), seeds[r], sup[r], threshold, e});
  }
  const double frac = static_cast<double>(exceed) / static_cast<double>(R);
  rep.summary.add({cfg.n, cfg.delta, cfg.T, static_cast<std::uint64_t>(R), exceed, frac});
  rep.checks.push_back({"exceedance fraction <= 5%", frac <= 0.05,
                        std::to_string(exceed) + " of " + std::to_string(R) +
                            " replicas exceed n^-delta = " + fmt_double(threshold)});
  rep.meta["fitted"] = {{"median_sup_dev", median_of(sup)},
                        {"max_sup_dev", *std::max_element(sup.begin(), sup.end())}};
  return rep;
}

// ---------------------------------------------------------------------------
// Perturbation

ExperimentReport run_perturbation(const Rule& rule, const ExperimentConfig& cfg) {
  if (!(cfg.t > 0)) throw DomainError("t must be positive");
  if (!(cfg.T > 0)) throw DomainError("T must be positive");
  if (cfg.grid_points < 2) throw DomainError("grid needs at least two points");
  for (double e : cfg.eps_list)
    if (!(e >= 0)) throw DomainError("perturbation sizes must be nonnegative");

  const double horizon = std::max(cfg.t, cfg.T);
  const RateBundle bundle = solve_rates(rule, horizon, std::min(cfg.ode_step, horizon));

  ExperimentReport rep;
  rep.name = "perturbation";
  rep.rows.columns = {"eps", "rho", "rho_plus", "rho_minus", "d_plus", "d_minus", "d_max",
                      "sqrt_law", "ratio"};
  rep.summary.columns = {"t1", "t2", "rho_t1", "rho_t2", "increment", "lower", "upper",
                         "lower_ok", "upper_ok"};

  const double rho0 = rho_of_t(bundle, cfg.t).value;
  std::vector<double> lx, ly;
  double max_ratio = 0;
  for (double eps : cfg.eps_list) {
    double rp = rho0, rm = rho0;
    if (eps > 0) {
      rp = rho_of_t(perturb_rates(bundle, eps, Sign::Plus), cfg.t).value;
      rm = rho_of_t(perturb_rates(bundle, eps, Sign::Minus), cfg.t).value;
    }
    const double dp = std::abs(rp - rho0), dm = std::abs(rm - rho0);
    const double d = std::max(dp, dm);
    const double law = eps > 0 ? std::sqrt(eps) * std::log(eps) * std::log(eps) : 0.0;
    const double ratio = law > 0 ? d / law : std::nan("");
    if (law > 0) max_ratio = std::max(max_ratio, ratio);
    rep.rows.add({eps, rho0, rp, rm, dp, dm, d, law, ratio});
    if (eps > 0 && d > 0) {
      lx.push_back(std::log(eps));
      ly.push_back(std::log(d));
    }
  }

  rep.meta = base_meta(rep.name, rule, cfg);
  rep.meta["t"] = cfg.t;
  rep.meta["T"] = cfg.T;
  rep.meta["eps_list"] = cfg.eps_list;
  rep.meta["dual_intervals"] = kDefaultDualIntervals;
  rep.meta["tolerances"] = {{"slack", cfg.slack}};
  rep.meta["fitted"] = {{"max_ratio_to_sqrt_law", max_ratio}};
  if (lx.size() >= 2) {
    const LineFit f = fit_line(lx, ly);
    rep.meta["fitted"]["eps_exponent"] = f.slope;
    rep.meta["fitted"]["eps_exponent_rms"] = f.rms;
    rep.checks.push_back({"eps exponent in [0.4, 0.6]", f.slope >= 0.4 && f.slope <= 0.6,
                          "fitted exponent " + fmt_double(f.slope)});
  }

  // Increment bounds on t_k = k T / m.
  const RateFunctions rates = irg_rates(bundle);
  const auto m = static_cast<std::size_t>(cfg.grid_points);
  std::vector<double> ts(m), rho(m);
  for (std::size_t k = 0; k < m; ++k) ts[k] = cfg.T * static_cast<double>(k + 1) / static_cast<double>(m);
  parallel_for(m, [&](std::size_t k) { rho[k] = rho_of_t(rates, ts[k]).value; });
  std::size_t lower_fail = 0, upper_fail = 0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const IncrementBounds b = rho_increment_bounds(rates, ts[k], ts[k + 1], rho[k]);
    const double inc = rho[k + 1] - rho[k];
    const bool lo = inc >= b.lower - cfg.slack, hi = inc <= b.upper + cfg.slack;
    lower_fail += !lo;
    upper_fail += !hi;
    rep.summary.add({ts[k], ts[k + 1], rho[k], rho[k + 1], inc, b.lower, b.upper, lo, hi});
  }
  rep.checks.push_back({"increment lower bound on grid", lower_fail == 0,
                        std::to_string(lower_fail) + " violations over " + std::to_string(m - 1) +
                            " intervals"});
  rep.checks.push_back({"increment upper bound on grid", upper_fail == 0,
                        std::to_string(upper_fail) + " violations over " + std::to_string(m - 1) +
                            " intervals"});
  return rep;
}

}  // namespace bsrlab
