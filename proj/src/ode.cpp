#include "bsrlab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bsrlab/error.hpp"
#include "bsrlab/format.hpp"

namespace bsrlab {

namespace {

constexpr double kRenormThreshold = 1e-12;

void axpy(std::vector<double>& out, const std::vector<double>& x, double h,
          const std::vector<double>& k) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h * k[i];
}

// Bracketing cell for t on a sorted grid, with a fractional position.
std::pair<std::size_t, double> locate(const std::vector<double>& ts, double t) {
  if (ts.empty()) throw DomainError("empty grid");
  const double slack = 1e-12 * std::max(1.0, std::abs(ts.back()));
  if (t < ts.front() - slack || t > ts.back() + slack)
    throw DomainError("time outside grid range");
  if (ts.size() == 1) return {0, 0.0};
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t k = it == ts.begin() ? 0 : static_cast<std::size_t>(it - ts.begin()) - 1;
  k = std::min(k, ts.size() - 2);
  const double f = std::clamp((t - ts[k]) / (ts[k + 1] - ts[k]), 0.0, 1.0);
  return {k, f};
}

}  // namespace

DensityTrajectory solve_densities(const Rule& rule, double t_end, double step) {
  if (rule.K() < 1) throw DomainError("density ODE needs K >= 1");
  if (!(t_end >= 0)) throw DomainError("t_end must be nonnegative");
  if (!(step > 0)) throw DomainError("ODE step must be positive");
  if (t_end > 0 && step > t_end) throw DomainError("ODE step exceeds t_end");

  const int m = rule.num_classes();
  DensityTrajectory traj;
  traj.K = rule.K();
  std::vector<double> x(m, 0.0);
  x[0] = 1.0;
  traj.ts.push_back(0.0);
  traj.xs.push_back(x);
  if (t_end == 0) return traj;

  const auto nsteps = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));
  traj.ts.reserve(nsteps + 1);
  traj.xs.reserve(nsteps + 1);
  std::vector<double> tmp(m);
  for (std::size_t k = 1; k <= nsteps; ++k) {
    const double t0 = traj.ts.back();
    const double t1 = k == nsteps ? t_end : static_cast<double>(k) * step;
    const double h = t1 - t0;
    const auto k1 = drift(rule, x);
    axpy(tmp, x, h / 2, k1);
    const auto k2 = drift(rule, tmp);
    axpy(tmp, x, h / 2, k2);
    const auto k3 = drift(rule, tmp);
    axpy(tmp, x, h, k3);
    const auto k4 = drift(rule, tmp);
    for (int i = 0; i < m; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

    for (int i = 0; i < m; ++i) {
      if (std::isnan(x[i])) throw DomainError("NaN in density ODE at t = " + std::to_string(t1));
      if (x[i] < 0) {
        if (x[i] < -kRenormThreshold)
          throw DomainError("density ODE left the simplex at t = " + std::to_string(t1));
        x[i] = 0.0;
      }
    }
    const double s = std::accumulate(x.begin(), x.end(), 0.0);
    if (std::abs(s - 1.0) > kRenormThreshold) {
      for (auto& v : x) v /= s;
      ++traj.renormalizations;
    }
    traj.ts.push_back(t1);
    traj.xs.push_back(x);
  }
  return traj;
}

RateBundle rates_trajectory(const Rule& rule, const DensityTrajectory& traj) {
  if (rule.K() < 1) throw DomainError("rate functions need K >= 1");
  if (traj.K != rule.K()) throw DomainError("trajectory was solved for a different K");
  RateBundle r;
  r.K = rule.K();
  r.ts = traj.ts;
  r.a.assign(r.K, std::vector<double>(traj.ts.size()));
  r.c.assign(r.K, std::vector<double>(traj.ts.size()));
  r.b.resize(traj.ts.size());
  for (std::size_t k = 0; k < traj.ts.size(); ++k) {
    const auto p = rate_functions_at(rule, traj.xs[k]);
    for (int i = 0; i < r.K; ++i) {
      r.a[i][k] = std::max(0.0, p.a[i]);
      r.c[i][k] = std::max(0.0, p.c[i]);
    }
    r.b[k] = std::max(0.0, p.b);
  }
  return r;
}

RateBundle solve_rates(const Rule& rule, double t_end, double step) {
  return rates_trajectory(rule, solve_densities(rule, t_end, step));
}

std::vector<double> interpolate(const DensityTrajectory& traj, double t) {
  const auto [k, f] = locate(traj.ts, t);
  if (f == 0.0 || traj.ts.size() == 1) return traj.xs[k];
  if (f == 1.0) return traj.xs[k + 1];
  std::vector<double> out(traj.xs[k].size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = traj.xs[k][i] + f * (traj.xs[k + 1][i] - traj.xs[k][i]);
  return out;
}

RatePoint interpolate(const RateBundle& bundle, double t) {
  const auto [k, f] = locate(bundle.ts, t);
  auto lerp = [&, k = k, f = f](const std::vector<double>& v) {
    if (bundle.ts.size() == 1 || f == 0.0) return v[k];
    if (f == 1.0) return v[k + 1];
    return v[k] + f * (v[k + 1] - v[k]);
  };
  RatePoint p;
  for (int i = 0; i < bundle.K; ++i) {
    p.a.push_back(lerp(bundle.a[i]));
    p.c.push_back(lerp(bundle.c[i]));
  }
  p.b = lerp(bundle.b);
  return p;
}

void write_trajectory_csv(std::ostream& out, const DensityTrajectory& traj) {
  out << "t";
  for (int i = 1; i <= traj.K; ++i) out << ",x_" << i;
  out << ",x_w\n";
  for (std::size_t k = 0; k < traj.ts.size(); ++k) {
    out << fmt_double(traj.ts[k]);
    for (double v : traj.xs[k]) out << ',' << fmt_double(v);
    out << '\n';
  }
}

void write_rates_csv(std::ostream& out, const RateBundle& bundle) {
  out << "t";
  for (int i = 1; i <= bundle.K; ++i) out << ",a_" << i;
  out << ",b";
  for (int i = 1; i <= bundle.K; ++i) out << ",c_" << i;
  out << '\n';
  for (std::size_t k = 0; k < bundle.ts.size(); ++k) {
    out << fmt_double(bundle.ts[k]);
    for (int i = 0; i < bundle.K; ++i) out << ',' << fmt_double(bundle.a[i][k]);
    out << ',' << fmt_double(bundle.b[k]);
    for (int i = 0; i < bundle.K; ++i) out << ',' << fmt_double(bundle.c[i][k]);
    out << '\n';
  }
}

}  // namespace bsrlab
