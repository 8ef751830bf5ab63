#include <cmath>
#include <numbers>
#include <sstream>

#include "bsrlab/error.hpp"
#include "bsrlab/spectral.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace bsrlab;

namespace {

constexpr double kPi = std::numbers::pi;

RateFunctions analytic(double T) { return RateFunctions::constant(1, {0.5}, 0.5, {0.0}, T); }

const RateFunctions& bf_rates() {
  static const RateFunctions r = irg_rates(solve_rates(rules::bohman_frieze(), 2.0));
  return r;
}

}  // namespace

TEST_CASE("moment ODEs") {
  const auto zero = moment_odes(RateFunctions::constant(1, {0.0}, 0.5, {0.3}, 1.0), 1.0, 0.01);
  for (std::size_t k = 0; k < zero.u.size(); ++k) {
    CHECK(zero.psi[k] == 0.0);
    CHECK(zero.phi[k] == 0.0);
  }

  const double a = 0.3;
  const auto lin = moment_odes(RateFunctions::constant(1, {a}, 0.5, {0.0}, 1.0), 1.0, 0.01);
  for (std::size_t k = 0; k < lin.u.size(); ++k) {
    CHECK(lin.psi[k] == doctest::Approx(2 * a * lin.u[k]).epsilon(1e-13));
    CHECK(lin.phi[k] == doctest::Approx(4 * a * lin.u[k]).epsilon(1e-13));
  }

  const auto rates = RateFunctions::constant(1, {a}, 0.5, {1.0}, 1.0);
  const auto e1 = moment_odes(rates, 1.0, 1e-3);
  const auto e2 = moment_odes(rates, 1.0, 5e-4);
  CHECK(e1.psi.back() == doctest::Approx(2 * a * (std::exp(1.0) - 1)).epsilon(1e-10));
  CHECK(std::abs(e1.psi.back() - e2.psi.back()) <= 1e-8 * e2.psi.back());
  CHECK_THROWS_AS(moment_odes(rates, 0.5, 0.6), DomainError);

  const auto bf = moment_odes(bf_rates(), 1.5, 1e-3);
  for (std::size_t k = 1; k < bf.u.size(); ++k) {
    CHECK(bf.psi[k] >= bf.psi[k - 1]);
    CHECK(bf.phi[k] >= bf.phi[k - 1]);
    CHECK(bf.G[k] >= bf.G[k - 1]);
    const double mass = bf_rates().mass(bf.u[k]);
    CHECK(bf.phi[k] * mass >= bf.psi[k] * bf.psi[k] * (1 - 1e-12));
  }
}

TEST_CASE("dual kernel matrix") {
  const double a = 0.25, b = 0.5;
  const auto dk = moment_odes(RateFunctions::constant(1, {a}, b, {0.0}, 1.0), 1.0, 0.05);
  const auto M = dual_kernel_matrix(dk);
  for (std::size_t p = 0; p < M.n; ++p)
    for (std::size_t q = 0; q < M.n; ++q) {
      CHECK(M(p, q) == M(q, p));
      CHECK(M(p, q) == doctest::Approx(4 * a * b * std::min(dk.u[p], dk.u[q])).epsilon(1e-12));
    }
  const auto bfk = moment_odes(bf_rates(), 1.0, 0.01);
  const auto Mb = dual_kernel_matrix(bfk);
  for (std::size_t p = 0; p < Mb.n; p += 10) CHECK(Mb(p, p) == doctest::Approx(bfk.beta[p] * bfk.phi[p]));
  const auto z = dual_kernel_matrix(moment_odes(RateFunctions::constant(1, {0.0}, b, {0.0}, 1.0), 1.0, 0.1));
  CHECK(std::all_of(z.a.begin(), z.a.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("operator norm") {
  SymMatrix zero{3, std::vector<double>(9, 0.0)};
  CHECK(operator_norm(zero, {1, 1, 1}).value == 0.0);

  SymMatrix ones{4, std::vector<double>(16, 2.0)};
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  CHECK(operator_norm(ones, w).value == doctest::Approx(2.0 * 1.0).epsilon(1e-10));

  for (double t : {0.5, 1.0, 1.5}) {
    const std::size_t M = 2000;
    SymMatrix mk{M + 1, std::vector<double>((M + 1) * (M + 1))};
    std::vector<double> wt(M + 1, t / M);
    wt.front() = wt.back() = t / M / 2;
    for (std::size_t p = 0; p <= M; ++p)
      for (std::size_t q = 0; q <= M; ++q) mk.a[p * (M + 1) + q] = t * std::min(p, q) / M;
    const auto est = operator_norm(mk, wt);
    CHECK(std::abs(est.value / (4 * t * t / (kPi * kPi)) - 1) <= 1e-3);
    CHECK(est.residual <= 1e-8);
  }
}

TEST_CASE("rho on the analytic bundle") {
  for (double t : {0.5, 1.0, 1.5}) {
    const auto est = rho_of_t(analytic(2.0), t);
    CHECK(est.method == "dual-ode");
    CHECK(std::abs(est.value / (4 * t * t / (kPi * kPi)) - 1) <= 1e-3);
  }
  CHECK(rho_of_t(analytic(2.0), 0.0).value == 0.0);
  // Constant-rate family: 4 (sum alpha_i (K+i)^2) beta t^2 / pi^2.
  const auto two = RateFunctions::constant(2, {0.1, 0.2}, 0.3, {0.0, 0.0}, 1.0);
  const double c = (0.1 * 9 + 0.2 * 16) * 0.3;
  CHECK(rho_of_t(two, 1.0).value == doctest::Approx(4 * c / (kPi * kPi)).epsilon(1e-3));
}

TEST_CASE("rho on Bohman-Frieze") {
  double prev = -1;
  for (int k = 0; k < 50; ++k) {
    const double t = 0.2 + 1.1 * k / 49;
    const double r = rho_of_t(bf_rates(), t, 500).value;
    CHECK(r > prev);
    prev = r;
  }
  const double fine = rho_of_t(bf_rates(), 1.0, 4000).value;
  const double base = rho_of_t(bf_rates(), 1.0).value;
  CHECK(std::abs(fine - base) <= 1e-4);
}

TEST_CASE("Monte Carlo Gram oracle") {
  Rng rng(1);
  CHECK(mc_gram_norm(RateFunctions::constant(1, {0.0}, 0.5, {0.0}, 1.0), 1.0, 200, rng).value == 0.0);
  CHECK_THROWS_AS(mc_gram_norm(analytic(1.0), 1.0, 50, rng), DomainError);

  const auto an = mc_gram_norm(analytic(1.5), 1.5, 1500, rng);
  CHECK(an.method == "mc-gram");
  CHECK(std::abs(an.value / (4 * 1.5 * 1.5 / (kPi * kPi)) - 1) <= 0.02 + 3 * an.std_error);
  CHECK(an.std_error > 0);

  const auto mc = mc_gram_norm(bf_rates(), 1.0, 1500, rng);
  const auto dual = rho_of_t(bf_rates(), 1.0);
  CHECK(std::abs(mc.value - dual.value) <= 0.01 * dual.value + 3 * mc.std_error);
}

TEST_CASE("truncated norms") {
  Rng a(5), b(5), c(5);
  const auto& r = bf_rates();
  CHECK(truncated_norm(r, 1.0, 1.5, 300, a).value == 0.0);
  const auto full = mc_gram_norm(r, 1.0, 300, b);
  const auto inf = truncated_norm(r, 1.0, std::numeric_limits<double>::infinity(), 300, c);
  CHECK(full.value == inf.value);
  double prev_gap = 1e300;
  for (double A : {10.0, 20.0, 40.0}) {
    Rng s(5);
    const double gap = full.value - truncated_norm(r, 1.0, A, 300, s).value;
    CHECK(gap >= 0.0);
    CHECK(gap <= prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("critical time") {
  const auto an = find_tc(RateProvider(analytic), 1e-6);
  CHECK(std::abs(an.tc - kPi / 2) <= 1e-3);
  CHECK(an.lo <= an.tc);
  CHECK(an.hi >= an.tc);
  CHECK(std::abs(an.rho_residual) <= 1e-6);

  const auto bf = find_tc(rules::bohman_frieze());
  CHECK(std::abs(bf.tc - 1.176) <= 0.005);
  const auto coarse = find_tc(rules::bohman_frieze(), kDefaultOdeStep, 1e-3);
  CHECK(std::abs(bf.tc - coarse.tc) <= 2e-3);

  const auto never = [](double T) { return RateFunctions::constant(1, {0.0}, 0.5, {0.0}, T); };
  CHECK_THROWS_AS(find_tc(RateProvider(never)), DomainError);
}

TEST_CASE("perturbed bundles") {
  const auto bundle = solve_rates(rules::bohman_frieze(), 1.5);
  const auto same = perturb_rates(bundle, 0.0, Sign::Minus);
  CHECK(same.a == bundle.a);
  CHECK(same.b == bundle.b);
  CHECK(same.c == bundle.c);
  const auto minus = perturb_rates(bundle, 0.01, Sign::Minus);
  CHECK(minus.c[0][0] == 0.0);
  CHECK(minus.c[0][1] == 0.0);
  const auto plus = perturb_rates(bundle, 0.01, Sign::Plus);
  CHECK(plus.b[10] == doctest::Approx(bundle.b[10] + 0.01));

  const double base = rho_of_t(bundle, 1.0).value;
  auto delta = [&](double eps) {
    return std::abs(rho_of_t(perturb_rates(bundle, eps, Sign::Plus), 1.0).value - base);
  };
  const double ratio = delta(0.04) / delta(0.01);
  CHECK(ratio <= std::sqrt(4.0) * std::pow(std::log(0.01) / std::log(0.04), 2) * 1.5);
  CHECK(delta(0.0) == 0.0);
}

TEST_CASE("increment bounds on a time grid") {
  const auto& r = bf_rates();
  std::vector<double> ts, rho;
  for (int k = 0; k < 50; ++k) {
    ts.push_back(0.2 + 1.1 * k / 49);
    rho.push_back(rho_of_t(r, ts.back(), 500).value);
  }
  for (int k = 0; k + 1 < 50; ++k) {
    const auto b = rho_increment_bounds(r, ts[k], ts[k + 1], rho[k]);
    CHECK(rho[k + 1] - rho[k] >= b.lower - 1e-6);
    CHECK(rho[k + 1] - rho[k] <= b.upper + 1e-6);
  }
}

TEST_CASE("report formats") {
  std::ostringstream csv, js;
  NormEstimate e;
  e.value = 0.5;
  e.method = "dual-ode";
  write_rho_csv(csv, {{1.0, e}});
  CHECK(csv.str() == "t,rho,method,stderr\n1,0.5,dual-ode,0\n");
  TcResult tc;
  tc.tc = 1.17;
  tc.lo = 1.16;
  tc.hi = 1.18;
  write_tc_json(js, "bf", tc, 1.18);
  const auto doc = nlohmann::json::parse(js.str());
  CHECK(doc["tc"].get<double>() == 1.17);
  CHECK(doc["bracket"][1].get<double>() == 1.18);
  CHECK(doc["oracle_tc"].get<double>() == 1.18);
}
