// Command-line front end. Exit codes: 0 success, 2 domain error (bad flags,
// invalid rule, violated precondition), 3 resource error.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bsrlab/bsr_sim.hpp"
#include "bsrlab/coupling.hpp"
#include "bsrlab/error.hpp"
#include "bsrlab/experiments.hpp"
#include "bsrlab/irg.hpp"
#include "bsrlab/ode.hpp"
#include "bsrlab/parallel.hpp"
#include "bsrlab/rng.hpp"
#include "bsrlab/rules.hpp"
#include "bsrlab/spectral.hpp"
#include "json.hpp"

using namespace bsrlab;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
  std::string rule_path;
  std::string out = "out";
  std::uint64_t seed = 1;
  int replicas = 1;
  std::string format = "csv";
};

void add_common(CLI::App* sub, Common& c, int default_replicas) {
  c.replicas = default_replicas;
  sub->add_option("--rule", c.rule_path, "Rule JSON file")->required();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sub->add_option("--replicas", c.replicas, "Independent replicas")->capture_default_str();
  sub->add_option("--format", c.format, "Table format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

[[noreturn]] void flag_error(const std::string& flag, const std::string& msg) {
  throw DomainError(flag + ": " + msg);
}

Rule load_rule(const Common& c) {
  try {
    return load_rule_file(c.rule_path);
  } catch (const DomainError& e) {
    flag_error("--rule", e.what());
  }
}

void prepare(const Common& c) {
  if (c.replicas < 1) flag_error("--replicas", "must be at least 1");
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw ResourceError("--out: cannot create directory " + c.out + ": " + ec.message());
}

std::ofstream open_out(const Common& c, const std::string& file) {
  const fs::path p = fs::path(c.out) / file;
  std::ofstream f(p);
  if (!f) throw ResourceError("--out: cannot write " + p.string());
  return f;
}

void write_table(const Common& c, const Table& t, const std::string& stem) {
  auto f = open_out(c, stem + "." + c.format);
  if (c.format == "csv")
    t.write_csv(f);
  else
    t.write_json(f);
  std::cout << "wrote " << (fs::path(c.out) / (stem + "." + c.format)).string() << '\n';
}

Json base_meta(const std::string& command, const Common& c, const Rule& rule) {
  Json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["rule_hash"] = rule_hash_hex(rule);
  m["rule"] = Json::parse(serialize_rule(rule));
  m["seed"] = c.seed;
  m["replicas"] = c.replicas;
  return m;
}

void write_meta(const Common& c, const std::string& stem, Json meta, double wall) {
  meta["wall_time_s"] = wall;
  open_out(c, stem + "_meta.json") << meta.dump(2) << '\n';
}

std::vector<std::uint64_t> replica_seeds(const Common& c) {
  std::vector<std::uint64_t> s;
  for (int r = 0; r < c.replicas; ++r) s.push_back(derive_seed(c.seed, static_cast<std::uint64_t>(r)));
  return s;
}

void require_positive(const std::string& flag, double v) {
  if (!(v > 0) || !std::isfinite(v)) flag_error(flag, "must be positive");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsrlab: bounded-size rule random graphs, their limits and couplings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // ode / rates
  Common c_ode, c_rates;
  double ode_t = 1.5, ode_step = kDefaultOdeStep, rates_t = 1.5, rates_step = kDefaultOdeStep;
  auto* ode = app.add_subcommand("ode", "Integrate the density ODE");
  add_common(ode, c_ode, 1);
  ode->add_option("--t", ode_t, "Horizon")->capture_default_str();
  ode->add_option("--step", ode_step, "RK4 step")->capture_default_str();
  auto* rates = app.add_subcommand("rates", "Rate functions a, b, c along the ODE");
  add_common(rates, c_rates, 1);
  rates->add_option("--t", rates_t, "Horizon")->capture_default_str();
  rates->add_option("--step", rates_step, "RK4 step")->capture_default_str();

  // simulate
  Common c_sim;
  std::uint64_t sim_n = 1000000;
  double sim_t = 1.5;
  std::string sim_mode = "poisson";
  std::vector<double> sim_samples;
  auto* sim = app.add_subcommand("simulate", "Simulate the n-vertex process");
  add_common(sim, c_sim, 1);
  sim->add_option("--n", sim_n, "Vertices")->capture_default_str();
  sim->add_option("--t", sim_t, "Horizon")->capture_default_str();
  sim->add_option("--mode", sim_mode, "Round clock")
      ->check(CLI::IsMember({"poisson", "discrete"}))
      ->capture_default_str();
  sim->add_option("--samples", sim_samples, "Sample times (comma separated; default: t)")
      ->delimiter(',');

  // irg
  Common c_irg;
  double irg_n = 100000, irg_t = 1.0, irg_step = kDefaultOdeStep;
  std::string irg_method = "candidates";
  bool allow_quadratic = false, keep_edges = false;
  auto* irg = app.add_subcommand("irg", "Sample the inhomogeneous random graph of a rule");
  add_common(irg, c_irg, 1);
  irg->add_option("--n", irg_n, "Scale parameter n")->capture_default_str();
  irg->add_option("--t", irg_t, "Time")->capture_default_str();
  irg->add_option("--step", irg_step, "RK4 step for the rates")->capture_default_str();
  irg->add_option("--method", irg_method, "Edge sampler")
      ->check(CLI::IsMember({"candidates", "pairs"}))
      ->capture_default_str();
  irg->add_flag("--allow-quadratic", allow_quadratic, "Permit the pair loop on large graphs");
  irg->add_flag("--keep-edges", keep_edges, "Write full graphs and component volumes");

  // rho
  Common c_rho;
  std::vector<double> rho_t{1.0};
  std::size_t rho_intervals = kDefaultDualIntervals, rho_mc = 0;
  double rho_step = kDefaultOdeStep;
  auto* rho = app.add_subcommand("rho", "Operator norm rho(t)");
  add_common(rho, c_rho, 1);
  rho->add_option("--t", rho_t, "Times (comma separated)")->delimiter(',')->capture_default_str();
  rho->add_option("--intervals", rho_intervals, "Dual grid intervals")->capture_default_str();
  rho->add_option("--mc-samples", rho_mc, "Monte Carlo Gram samples (0: off)")
      ->capture_default_str();
  rho->add_option("--step", rho_step, "RK4 step for the rates")->capture_default_str();

  // tc
  Common c_tc;
  double tc_tol = 1e-6, tc_step = kDefaultOdeStep, tc_grid = 0.005, tc_threshold = 0;
  std::uint64_t tc_oracle_n = 1000000;
  int tc_oracle_reps = 5;
  auto* tc = app.add_subcommand("tc", "Critical time from rho(t) = 1, with a simulation oracle");
  add_common(tc, c_tc, 1);
  tc->add_option("--tol", tc_tol, "Bisection tolerance on rho")->capture_default_str();
  tc->add_option("--step", tc_step, "RK4 step")->capture_default_str();
  tc->add_option("--oracle-n", tc_oracle_n, "Oracle system size, 0 disables")
      ->capture_default_str();
  tc->add_option("--oracle-replicas", tc_oracle_reps, "Oracle replicas")->capture_default_str();
  tc->add_option("--oracle-grid", tc_grid, "Oracle time grid spacing")->capture_default_str();
  tc->add_option("--oracle-threshold", tc_threshold, "Oracle S2/n threshold (default n^(1/3))");

  // couple
  Common c_cpl;
  std::uint64_t cpl_n = 100000;
  double cpl_t = 1.0, cpl_delta = 0.25;
  auto* cpl = app.add_subcommand("couple", "Three-way sandwich coupling");
  add_common(cpl, c_cpl, 1);
  cpl->add_option("--n", cpl_n, "Vertices")->capture_default_str();
  cpl->add_option("--t", cpl_t, "Time")->capture_default_str();
  cpl->add_option("--delta", cpl_delta, "Perturbation exponent, eps = n^-delta")
      ->capture_default_str();

  // experiments
  Common c_sub, c_con, c_per;
  ExperimentConfig sub_cfg, con_cfg, per_cfg;
  std::string sub_mode = "poisson", con_mode = "poisson";
  auto* exp_sub = app.add_subcommand("exp-subcritical", "Largest component below t_c");
  add_common(exp_sub, c_sub, 20);
  exp_sub->add_option("--n", sub_cfg.n_list, "System sizes (default 2^16..2^22)")->delimiter(',');
  exp_sub->add_option("--gamma", sub_cfg.gamma, "t_n = t_c - n^-gamma")->capture_default_str();
  exp_sub->add_option("--eps", sub_cfg.eps_fixed, "Fixed distance below t_c")
      ->capture_default_str();
  exp_sub->add_option("--mode", sub_mode, "Round clock")
      ->check(CLI::IsMember({"poisson", "discrete"}))
      ->capture_default_str();

  auto* exp_con = app.add_subcommand("exp-concentration", "Density concentration");
  add_common(exp_con, c_con, 100);
  exp_con->add_option("--n", con_cfg.n, "Vertices")->capture_default_str();
  exp_con->add_option("--delta", con_cfg.delta, "Deviation exponent")->capture_default_str();
  exp_con->add_option("--t", con_cfg.T, "Horizon")->capture_default_str();
  exp_con->add_option("--sample-step", con_cfg.sample_step, "Sample spacing")
      ->capture_default_str();
  exp_con->add_option("--mode", con_mode, "Round clock")
      ->check(CLI::IsMember({"poisson", "discrete"}))
      ->capture_default_str();

  auto* exp_per = app.add_subcommand("exp-perturb", "Sensitivity of rho to rate perturbations");
  add_common(exp_per, c_per, 1);
  exp_per->add_option("--t", per_cfg.t, "Evaluation time")->capture_default_str();
  exp_per->add_option("--eps", per_cfg.eps_list, "Perturbation sizes")
      ->delimiter(',')
      ->capture_default_str();
  exp_per->add_option("--horizon", per_cfg.T, "End of the increment grid")->capture_default_str();
  exp_per->add_option("--grid-points", per_cfg.grid_points, "Increment grid points")
      ->capture_default_str();
  exp_per->add_option("--slack", per_cfg.slack, "Numerical slack")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "bsrlab: " << e.what() << '\n';
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  std::string command = app.get_subcommands().front()->get_name();

  try {
    if (ode->parsed() || rates->parsed()) {
      const bool is_ode = ode->parsed();
      const Common& c = is_ode ? c_ode : c_rates;
      const double T = is_ode ? ode_t : rates_t, step = is_ode ? ode_step : rates_step;
      require_positive("--t", T);
      require_positive("--step", step);
      if (step > T) flag_error("--step", "exceeds --t");
      const Rule rule = load_rule(c);
      prepare(c);
      const DensityTrajectory traj = solve_densities(rule, T, step);
      Table table;
      table.columns.push_back("t");
      const int K = rule.K();
      if (is_ode) {
        for (int i = 1; i <= K; ++i) table.columns.push_back("x_" + std::to_string(i));
        table.columns.push_back("x_w");
        for (std::size_t k = 0; k < traj.ts.size(); ++k) {
          std::vector<Cell> row{traj.ts[k]};
          for (double v : traj.xs[k]) row.emplace_back(v);
          table.add(std::move(row));
        }
      } else {
        const RateBundle b = rates_trajectory(rule, traj);
        for (int i = 1; i <= K; ++i) table.columns.push_back("a_" + std::to_string(i));
        table.columns.push_back("b");
        for (int i = 1; i <= K; ++i) table.columns.push_back("c_" + std::to_string(i));
        for (std::size_t k = 0; k < b.ts.size(); ++k) {
          std::vector<Cell> row{b.ts[k]};
          for (int i = 0; i < K; ++i) row.emplace_back(b.a[i][k]);
          row.emplace_back(b.b[k]);
          for (int i = 0; i < K; ++i) row.emplace_back(b.c[i][k]);
          table.add(std::move(row));
        }
      }
      write_table(c, table, command);
      Json meta = base_meta(command, c, rule);
      meta["t"] = T;
      meta["grid_step"] = step;
      meta["integrator"] = "rk4";
      write_meta(c, command, meta, wall());
    } else if (sim->parsed()) {
      const Common& c = c_sim;
      if (sim_n < 1 || sim_n > UINT32_MAX) flag_error("--n", "must lie in [1, 2^32)");
      if (!(sim_t >= 0)) flag_error("--t", "must be nonnegative");
      for (double s : sim_samples)
        if (!(s >= 0 && s <= sim_t)) flag_error("--samples", "times must lie in [0, t]");
      const Rule rule = load_rule(c);
      prepare(c);
      const SimMode mode = parse_sim_mode(sim_mode);
      const auto seeds = replica_seeds(c);
      std::vector<ObservableSeries> runs(seeds.size());
      parallel_for(seeds.size(), [&](std::size_t r) {
        runs[r] = simulate(rule, sim_n, sim_t, seeds[r], mode, sim_samples);
      });
      Table table;
      table.columns = {"replica", "seed", "t"};
      for (int i = 1; i <= rule.K(); ++i) table.columns.push_back("x_" + std::to_string(i));
      table.columns.push_back("x_w");
      for (const char* col : {"s2_over_n", "c1", "c1_over_n", "edges", "redundant"})
        table.columns.emplace_back(col);
      for (std::size_t r = 0; r < runs.size(); ++r)
        for (const auto& row : runs[r].rows) {
          std::vector<Cell> cells{static_cast<std::uint64_t>(r), seeds[r], row.t};
          for (double v : row.x) cells.emplace_back(v);
          cells.emplace_back(row.s2_over_n);
          cells.emplace_back(row.c1);
          cells.emplace_back(static_cast<double>(row.c1) / static_cast<double>(sim_n));
          cells.emplace_back(row.edges);
          cells.emplace_back(row.redundant);
          table.add(std::move(cells));
        }
      write_table(c, table, command);
      Json meta = base_meta(command, c, rule);
      meta["n"] = sim_n;
      meta["t"] = sim_t;
      meta["mode"] = to_string(mode);
      meta["seeds"] = seeds;
      write_meta(c, command, meta, wall());
    } else if (irg->parsed()) {
      const Common& c = c_irg;
      require_positive("--n", irg_n);
      require_positive("--t", irg_t);
      require_positive("--step", irg_step);
      const Rule rule = load_rule(c);
      if (rule.K() < 1) flag_error("--rule", "the random graph model needs K >= 1");
      prepare(c);
      const RateBundle bundle = solve_rates(rule, irg_t, std::min(irg_step, irg_t));
      IrgOptions opts;
      opts.method = irg_method == "pairs" ? EdgeMethod::PairLoop : EdgeMethod::Candidates;
      opts.allow_quadratic = allow_quadratic;
      const auto seeds = replica_seeds(c);
      Table table;
      table.columns = {"replica", "seed",       "vertices",   "edges",
                       "components", "max_volume", "max_volume_size", "total_volume"};
      for (std::size_t r = 0; r < seeds.size(); ++r) {
        Rng rng(seeds[r]);
        const IrgGraph g = build_irg(bundle, irg_t, irg_n, rng, opts);
        const auto top = max_volume_component(g);
        std::uint64_t total = 0;
        for (auto v : g.comp_volume) total += v;
        table.add({static_cast<std::uint64_t>(r), seeds[r],
                   static_cast<std::uint64_t>(g.vertices.size()),
                   static_cast<std::uint64_t>(g.edges.size()),
                   static_cast<std::uint64_t>(g.comp_volume.size()),
                   top ? top->volume : std::uint64_t{0}, top ? top->size : std::uint64_t{0},
                   total});
        if (keep_edges) {
          auto gf = open_out(c, "irg_graph_" + std::to_string(r) + ".json");
          write_graph_json(gf, g);
          auto vf = open_out(c, "irg_volumes_" + std::to_string(r) + ".csv");
          write_volume_csv(vf, g);
        }
      }
      write_table(c, table, command);
      Json meta = base_meta(command, c, rule);
      meta["n"] = irg_n;
      meta["t"] = irg_t;
      meta["grid_step"] = std::min(irg_step, irg_t);
      meta["method"] = irg_method;
      meta["seeds"] = seeds;
      write_meta(c, command, meta, wall());
    } else if (rho->parsed()) {
      const Common& c = c_rho;
      for (double t : rho_t)
        if (!(t >= 0)) flag_error("--t", "times must be nonnegative");
      if (rho_intervals < 2) flag_error("--intervals", "must be at least 2");
      if (rho_mc != 0 && rho_mc < 100) flag_error("--mc-samples", "must be 0 or at least 100");
      require_positive("--step", rho_step);
      const Rule rule = load_rule(c);
      if (rule.K() < 1) flag_error("--rule", "rho needs K >= 1");
      prepare(c);
      const double T = *std::max_element(rho_t.begin(), rho_t.end());
      RateFunctions rates;
      if (T > 0) rates = irg_rates(solve_rates(rule, T, std::min(rho_step, T)));
      Table table;
      table.columns = {"t", "rho", "method", "grid_points", "iterations", "residual", "mc_rho",
                       "mc_stderr", "mc_seed"};
      for (std::size_t k = 0; k < rho_t.size(); ++k) {
        const double t = rho_t[k];
        NormEstimate est;
        est.method = "dual-ode";
        if (t > 0) est = rho_of_t(rates, t, rho_intervals);
        double mc = std::nan(""), se = std::nan("");
        const std::uint64_t mc_seed = derive_seed(c.seed, k);
        if (rho_mc > 0 && t > 0) {
          Rng rng(mc_seed);
          const NormEstimate m = mc_gram_norm(rates, t, rho_mc, rng);
          mc = m.value;
          se = m.std_error;
        }
        table.add({t, est.value, est.method, static_cast<std::uint64_t>(est.size),
                   static_cast<std::uint64_t>(est.iterations), est.residual, mc, se, mc_seed});
      }
      write_table(c, table, command);
      Json meta = base_meta(command, c, rule);
      meta["grid_step"] = rho_step;
      meta["dual_intervals"] = rho_intervals;
      meta["mc_samples"] = rho_mc;
      meta["tolerances"] = {{"power_iteration", 1e-8}};
      write_meta(c, command, meta, wall());
    } else if (tc->parsed()) {
      const Common& c = c_tc;
      require_positive("--tol", tc_tol);
      require_positive("--step", tc_step);
      require_positive("--oracle-grid", tc_grid);
      if (tc_oracle_reps < 1) flag_error("--oracle-replicas", "must be at least 1");
      const Rule rule = load_rule(c);
      if (rule.K() < 1) flag_error("--rule", "the rho characterization needs K >= 1");
      prepare(c);
      const TcResult res = find_tc(rule, tc_step, tc_tol);
      store_tc(rule, c.out, tc_step, tc_tol, res.tc);
      Json meta = base_meta(command, c, rule);
      meta["grid_step"] = tc_step;
      meta["tolerances"] = {{"rho", tc_tol}};
      meta["horizon"] = res.horizon;
      meta["bisections"] = res.bisections;
      double oracle = std::nan("");
      if (tc_oracle_n > 0) {
        const double thr =
            tc_threshold > 0 ? tc_threshold : std::max(10.0, std::cbrt(static_cast<double>(tc_oracle_n)));
        std::vector<double> grid;
        const double lo = std::max(tc_grid, res.tc - 0.2);
        for (double t = lo; t <= res.tc + 0.1 + 1e-12; t += tc_grid) grid.push_back(t);
        const auto est =
            estimate_tc_susceptibility(rule, tc_oracle_n, grid, tc_oracle_reps, thr, c.seed);
        if (est.crossed) oracle = est.tc;
        meta["oracle"] = {{"n", tc_oracle_n},
                          {"sizes", {tc_oracle_n, 4 * tc_oracle_n}},
                          {"replicas", tc_oracle_reps},
                          {"threshold", thr},
                          {"grid_spacing", tc_grid},
                          {"crossed", est.crossed},
                          {"uncertainty", est.uncertainty},
                          {"t_zero_n", est.at_n.t_zero},
                          {"t_zero_4n", est.at_4n.t_zero},
                          {"note", est.note},
                          {"seeds", {derive_seed(c.seed, 0), derive_seed(c.seed, 1)}}};
      }
      {
        auto f = open_out(c, "tc.json");
        write_tc_json(f, c.rule_path, res, oracle);
      }
      std::cout << "wrote " << (fs::path(c.out) / "tc.json").string() << '\n';
      write_meta(c, command, meta, wall());
    } else if (cpl->parsed()) {
      const Common& c = c_cpl;
      if (!(cpl_delta > 0 && cpl_delta < 0.5)) flag_error("--delta", "must lie in (0, 1/2)");
      if (cpl_n < 1) flag_error("--n", "must be positive");
      if (!(cpl_t >= 0)) flag_error("--t", "must be nonnegative");
      const Rule rule = load_rule(c);
      if (rule.K() < 1) flag_error("--rule", "the coupling needs K >= 1");
      prepare(c);
      const auto st = volume_sandwich_stats(rule, cpl_n, cpl_t, cpl_delta, c.replicas, c.seed);
      {
        auto f = open_out(c, "couple.jsonl");
        for (const auto& row : st.replicas) write_coupling_json(f, cpl_n, cpl_t, cpl_delta, row);
      }
      Table table;
      table.columns = {"replica", "seed", "sigma_hit", "sandwich", "rg_minus", "gamma", "rg_plus",
                       "chain"};
      for (std::size_t r = 0; r < st.replicas.size(); ++r) {
        const auto& v = st.replicas[r];
        table.add({static_cast<std::uint64_t>(r), v.seed, v.sigma_hit, v.sandwich, v.rg_minus,
                   v.gamma, v.rg_plus, v.chain()});
      }
      write_table(c, table, command);
      Json meta = base_meta(command, c, rule);
      meta["n"] = cpl_n;
      meta["t"] = cpl_t;
      meta["delta"] = cpl_delta;
      meta["eps"] = std::pow(static_cast<double>(cpl_n), -cpl_delta);
      meta["grid_step"] = kDefaultOdeStep;
      meta["chain_fraction"] = st.chain_fraction;
      meta["sandwich_fraction"] = st.sandwich_fraction;
      write_meta(c, command, meta, wall());
    } else {
      const bool is_sub = exp_sub->parsed(), is_con = exp_con->parsed();
      const Common& c = is_sub ? c_sub : is_con ? c_con : c_per;
      ExperimentConfig cfg = is_sub ? sub_cfg : is_con ? con_cfg : per_cfg;
      if (is_sub && !(cfg.gamma > 0 && cfg.gamma < 0.25))
        flag_error("--gamma", "must lie in (0, 1/4), the barely subcritical hypothesis");
      if (is_con && !(cfg.delta > 0 && cfg.delta < 0.5)) flag_error("--delta", "must lie in (0, 1/2)");
      if (is_con) require_positive("--t", cfg.T);
      if (!is_sub && !is_con) {
        require_positive("--t", cfg.t);
        require_positive("--horizon", cfg.T);
        for (double e : cfg.eps_list)
          if (!(e >= 0)) flag_error("--eps", "sizes must be nonnegative");
      }
      const Rule rule = load_rule(c);
      prepare(c);
      cfg.out_dir = c.out;
      cfg.seed = c.seed;
      cfg.replicas = c.replicas;
      if (is_sub) cfg.mode = parse_sim_mode(sub_mode);
      if (is_con) cfg.mode = parse_sim_mode(con_mode);
      ExperimentReport rep = is_sub ? run_subcritical(rule, cfg)
                             : is_con ? run_concentration(rule, cfg)
                                      : run_perturbation(rule, cfg);
      rep.meta["command"] = command;
      rep.meta["version"] = kVersion;
      rep.meta["wall_time_s"] = wall();
      write_report(rep, c.out, c.format);
      std::cout << "wrote " << (fs::path(c.out) / rep.name).string() << ".* (" << c.format
                << ")\n";
      if (rep.skipped) std::cout << "skipped: " << rep.note << '\n';
      for (const auto& ch : rep.checks)
        std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << '\n';
    }
  } catch (const DomainError& e) {
    std::cerr << "bsrlab " << command << ": " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "bsrlab " << command << ": " << e.what() << '\n';
    return 3;
  } catch (const std::bad_alloc&) {
    std::cerr << "bsrlab " << command << ": out of memory\n";
    return 3;
  }
  return 0;
}
