#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "bsrlab/error.hpp"
#include "bsrlab/experiments.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace bsrlab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bsrlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("table output") {
  Table t;
  t.columns = {"name", "x", "k", "ok"};
  t.add({std::string("a"), 0.1, std::int64_t{-3}, true});
  t.add({std::string("b"), std::numeric_limits<double>::quiet_NaN(), std::uint64_t{7}, false});
  CHECK_THROWS(t.add({1.0}));

  std::ostringstream csv;
  t.write_csv(csv);
  CHECK(csv.str() == "name,x,k,ok\na,0.10000000000000001,-3,true\nb,,7,false\n");

  std::ostringstream js;
  t.write_json(js);
  const auto j = nlohmann::json::parse(js.str());
  REQUIRE(j.size() == 2);
  CHECK(j[0]["x"].get<double>() == 0.1);  // 17 digits round-trip exactly
  CHECK(j[1]["x"].is_null());
  CHECK(j[1]["k"] == 7);
  CHECK(j[0]["ok"] == true);
}

TEST_CASE("line fit and median") {
  const auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.rms == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(median_of({3, 1, 2}) == 2.0);
  CHECK(median_of({4, 1, 3, 2}) == 2.5);
}

TEST_CASE("rule hash is stable hex") {
  const auto h = rule_hash_hex(rules::bohman_frieze());
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(h == rule_hash_hex(rules::bohman_frieze()));
  CHECK(h != rule_hash_hex(rules::erdos_renyi()));
}

TEST_CASE("critical time cache") {
  const auto dir = fresh_dir("tc_cache");
  const Rule bf = rules::bohman_frieze();
  const auto first = cached_tc(bf, dir.string(), kDefaultOdeStep, 1e-4);
  CHECK(!first.from_cache);
  CHECK(fs::exists(first.path));
  CHECK(first.tc == doctest::Approx(1.1763).epsilon(1e-3));
  const auto second = cached_tc(bf, dir.string(), kDefaultOdeStep, 1e-4);
  CHECK(second.from_cache);
  CHECK(second.tc == first.tc);
  // A different tolerance is a cache miss.
  CHECK(!cached_tc(bf, dir.string(), kDefaultOdeStep, 1e-3).from_cache);
  // Corrupt entries are recomputed.
  std::ofstream(first.path) << "{not json";
  CHECK(!cached_tc(bf, dir.string(), kDefaultOdeStep, 1e-4).from_cache);
  CHECK(cached_tc(bf, "", kDefaultOdeStep, 1e-4).path.empty());
  fs::remove_all(dir);
}

TEST_CASE("subcritical experiment") {
  ExperimentConfig cfg;
  cfg.gamma = 0.3;
  CHECK_THROWS_AS(run_subcritical(rules::bohman_frieze(), cfg), DomainError);
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(run_subcritical(rules::bohman_frieze(), cfg), DomainError);

  cfg.gamma = 0.2;
  cfg.n_list = {4000, 1000, 2000};
  cfg.replicas = 3;
  const auto rep = run_subcritical(rules::bohman_frieze(), cfg);
  CHECK(rep.rows.rows.size() == 9);
  CHECK(rep.summary.rows.size() == 3);
  CHECK(rep.checks.size() == 3);
  CHECK(rep.meta.contains("rule_hash"));
  CHECK(rep.meta["fitted"].contains("B_max_median_r"));
  // Sizes are processed in increasing order.
  CHECK(std::get<std::uint64_t>(rep.summary.rows.front()[0]) == 1000);
  // Below t_c the largest component is far from linear.
  for (const auto& row : rep.rows.rows) CHECK(std::get<double>(row[5]) < 0.2);
}

TEST_CASE("concentration experiment") {
  ExperimentConfig cfg;
  cfg.n = 100;
  cfg.delta = 0.45;
  const auto skipped = run_concentration(rules::bohman_frieze(), cfg);
  CHECK(skipped.skipped);
  CHECK(skipped.note.find("n too small for asymptotic regime") == 0);
  CHECK(skipped.rows.rows.empty());
  cfg.delta = 0.6;
  CHECK_THROWS_AS(run_concentration(rules::bohman_frieze(), cfg), DomainError);

  cfg.n = 20000;
  cfg.delta = 0.2;
  cfg.replicas = 4;
  const auto rep = run_concentration(rules::bohman_frieze(), cfg);
  CHECK(!rep.skipped);
  REQUIRE(rep.rows.rows.size() == 4);
  // n^-0.2 = 0.138 is far above the O(n^-1/2) fluctuations.
  CHECK(rep.all_passed());
  for (const auto& row : rep.rows.rows) CHECK(std::get<double>(row[2]) < 0.05);
}

TEST_CASE("perturbation experiment") {
  ExperimentConfig cfg;
  cfg.eps_list = {0.0};
  cfg.grid_points = 10;
  const auto zero = run_perturbation(rules::bohman_frieze(), cfg);
  REQUIRE(zero.rows.rows.size() == 1);
  CHECK(std::get<double>(zero.rows.rows[0][6]) == 0.0);
  CHECK(zero.summary.rows.size() == 9);

  cfg.eps_list = {0.02, 0.01};
  const auto rep = run_perturbation(rules::bohman_frieze(), cfg);
  const double d1 = std::get<double>(rep.rows.rows[0][6]);
  const double d2 = std::get<double>(rep.rows.rows[1][6]);
  CHECK(d1 > d2);
  CHECK(d2 > 0);
  CHECK(rep.meta["fitted"].contains("eps_exponent"));
}

TEST_CASE("reports are written and reproducible") {
  ExperimentConfig cfg;
  cfg.n_list = {1000, 2000};
  cfg.replicas = 2;
  const auto a = fresh_dir("report_a"), b = fresh_dir("report_b");
  cfg.out_dir = a.string();
  write_report(run_subcritical(rules::bohman_frieze(), cfg), a.string(), "csv");
  cfg.out_dir = b.string();
  write_report(run_subcritical(rules::bohman_frieze(), cfg), b.string(), "csv");
  for (const char* f : {"subcritical.csv", "subcritical_summary.csv"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto meta = nlohmann::json::parse(slurp(a / "subcritical_meta.json"));
  CHECK(meta["checks"].size() >= 2);
  CHECK(meta["skipped"] == false);

  write_report(run_subcritical(rules::bohman_frieze(), cfg), a.string(), "json");
  CHECK(nlohmann::json::parse(slurp(a / "subcritical.json")).size() == 4);
  CHECK_THROWS_AS(write_report(ExperimentReport{}, "/proc/no/such/dir", "csv"), ResourceError);
  fs::remove_all(a);
  fs::remove_all(b);
}
