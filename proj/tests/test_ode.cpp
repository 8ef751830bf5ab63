#include <cmath>
#include <sstream>

#include "bsrlab/error.hpp"
#include "bsrlab/ode.hpp"
#include "doctest.h"

using namespace bsrlab;

TEST_CASE("density ODE initial condition and domain checks") {
  const Rule bf = rules::bohman_frieze();
  const auto t0 = solve_densities(bf, 0.0);
  REQUIRE(t0.ts.size() == 1);
  CHECK(t0.xs[0] == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(solve_densities(bf, 0.5, 1.0), DomainError);
  CHECK_THROWS_AS(solve_densities(bf, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(solve_densities(rules::erdos_renyi(), 1.0), DomainError);
}

TEST_CASE("Bohman-Frieze densities stay on the simplex") {
  const auto traj = solve_densities(rules::bohman_frieze(), 2.0, 1e-3);
  CHECK(traj.ts.back() == 2.0);
  for (std::size_t k = 0; k < traj.ts.size(); ++k) {
    const auto& x = traj.xs[k];
    CHECK(std::abs(x[0] + x[1] - 1.0) <= 1e-9);
    CHECK(x[0] > 0.0);
    if (k > 0) {
      CHECK(x[0] < traj.xs[k - 1][0]);
      CHECK(x[1] >= traj.xs[k - 1][1]);
    }
  }
}

TEST_CASE("step halving agrees to 1e-8 and converges at fourth order") {
  const Rule bf = rules::bohman_frieze();
  const auto h = solve_densities(bf, 2.0, 1e-3);
  const auto h2 = solve_densities(bf, 2.0, 5e-4);
  for (double t : {0.5, 1.0, 1.5}) {
    const double a = interpolate(h, t)[0], b = interpolate(h2, t)[0];
    CHECK(std::abs(a - b) / b <= 1e-8);
  }
  // Larger steps expose the error ratio above round-off.
  const auto c1 = solve_densities(bf, 1.0, 0.1);
  const auto c2 = solve_densities(bf, 1.0, 0.05);
  const auto c4 = solve_densities(bf, 1.0, 0.025);
  const double ratio = (c1.xs.back()[0] - c2.xs.back()[0]) / (c2.xs.back()[0] - c4.xs.back()[0]);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("large-time behavior of Bohman-Frieze") {
  const Rule bf = rules::bohman_frieze();
  const auto traj = solve_densities(bf, 20.0, 1e-2);
  CHECK(traj.xs.back()[1] >= 0.99);
  const auto rates = rates_trajectory(bf, traj);
  CHECK(rates.b.back() >= 0.49);
  CHECK(rates.b.back() <= 0.5 + 1e-12);
  for (std::size_t k = 1; k < rates.ts.size(); ++k) {
    CHECK(rates.a[0][k] > 0.0);
    CHECK(rates.b[k] > 0.0);
    CHECK(rates.c[0][k] > 0.0);
  }
}

TEST_CASE("rates at t = 0 and interpolation") {
  const Rule bf = rules::bohman_frieze();
  const auto traj = solve_densities(bf, 1.0, 0.01);
  const auto rates = rates_trajectory(bf, traj);
  CHECK(rates.a[0][0] == doctest::Approx(0.5));
  CHECK(rates.b[0] == 0.0);
  CHECK(rates.c[0][0] == 0.0);
  CHECK(interpolate(rates, 0.0).b == 0.0);

  CHECK(interpolate(traj, traj.ts[37]) == traj.xs[37]);
  const double mid = 0.5 * (traj.ts[10] + traj.ts[11]);
  const auto xm = interpolate(traj, mid);
  CHECK(xm[0] == doctest::Approx(0.5 * (traj.xs[10][0] + traj.xs[11][0])).epsilon(1e-14));
  CHECK_THROWS_AS(interpolate(traj, 1.5), DomainError);
  CHECK_THROWS_AS(interpolate(traj, -0.1), DomainError);
}

TEST_CASE("CSV headers") {
  const Rule bf = rules::bohman_frieze();
  const auto traj = solve_densities(bf, 0.01, 0.005);
  std::ostringstream a, b;
  write_trajectory_csv(a, traj);
  write_rates_csv(b, rates_trajectory(bf, traj));
  CHECK(a.str().rfind("t,x_1,x_w\n0,1,0\n", 0) == 0);
  CHECK(b.str().rfind("t,a_1,b,c_1\n", 0) == 0);
  CHECK(a.str().find("0.0050000000000000001") != std::string::npos);
}
