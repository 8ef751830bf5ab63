#include "bsrlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "bsrlab/error.hpp"
#include "bsrlab/format.hpp"
#include "bsrlab/parallel.hpp"
#include "json.hpp"

namespace bsrlab {

namespace {

constexpr std::size_t kJackknifeGroups = 20;

using MatVec = std::function<void(const std::vector<double>&, std::vector<double>&)>;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Power iteration for a symmetric nonnegative operator.
NormEstimate power_iteration(const MatVec& apply, std::vector<double> x, double tol,
                             std::size_t max_iter) {
  NormEstimate est;
  est.size = x.size();
  if (x.empty()) return est;
  double nx = std::sqrt(dot(x, x));
  for (auto& v : x) v /= nx;
  std::vector<double> y(x.size());
  double lambda = 0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    apply(x, y);
    const double next = dot(x, y);
    double res2 = 0;
    for (std::size_t k = 0; k < x.size(); ++k) res2 += (y[k] - next * x[k]) * (y[k] - next * x[k]);
    est.iterations = it;
    if (next <= 0) {
      // Nonnegative operator with no mass along x: the norm is 0 here.
      if (dot(y, y) == 0) {
        est.value = 0;
        est.residual = 0;
        return est;
      }
    }
    const double residual = next > 0 ? std::sqrt(res2) / next : std::numeric_limits<double>::infinity();
    const double change = lambda > 0 ? std::abs(next - lambda) / next : 1.0;
    lambda = next;
    est.value = lambda;
    est.residual = residual;
    if (change <= tol && residual <= tol) return est;
    const double ny = std::sqrt(dot(y, y));
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = y[k] / ny;
  }
  throw DomainError("power iteration did not converge after " + std::to_string(max_iter) +
                    " iterations; last residual " + fmt_double(est.residual));
}

std::vector<double> eigvec_guess(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace

// ---------------------------------------------------------------------------
// Dual kernel

DualKernel moment_odes(const RateFunctions& rates, double t, double grid_step) {
  if (rates.K < 1) throw DomainError("spectral computations need K >= 1");
  if (!(t >= 0) || t > rates.t_end() + 1e-12) throw DomainError("time outside the rate horizon");
  if (!(grid_step > 0)) throw DomainError("grid step must be positive");
  if (t > 0 && grid_step > t) throw DomainError("grid step exceeds t");
  DualKernel dk;
  dk.t = t;
  const std::size_t M = t > 0 ? static_cast<std::size_t>(std::ceil(t / grid_step - 1e-9)) : 0;
  const double h = M ? t / static_cast<double>(M) : 0.0;
  dk.u.resize(M + 1);
  for (std::size_t k = 0; k <= M; ++k) dk.u[k] = k == M ? t : h * static_cast<double>(k);
  const int K = rates.K;

  auto clamp_t = [&](double u) { return std::min(u, rates.t_end()); };
  auto sources = [&](double u, double& s1, double& s2, double& g, double& hh) {
    u = clamp_t(u);
    s1 = s2 = g = hh = 0;
    for (int i = 1; i <= K; ++i) {
      const double a = rates.alpha[i - 1](u);
      s1 += a * (K + i);
      s2 += a * static_cast<double>(K + i) * (K + i);
      const double c = rates.gamma[i - 1](u);
      g += i * c;
      hh += static_cast<double>(i) * i * c;
    }
  };
  auto rhs = [&](double u, double psi, double phi, double& dpsi, double& dphi) {
    double s1, s2, g, hh;
    sources(u, s1, s2, g, hh);
    dpsi = s1 + g * psi;
    dphi = s2 + 2 * g * phi + hh * psi;
  };

  dk.psi.assign(M + 1, 0.0);
  dk.phi.assign(M + 1, 0.0);
  dk.G.assign(M + 1, 0.0);
  dk.beta.resize(M + 1);
  double psi = 0, phi = 0;
  for (std::size_t k = 0; k < M; ++k) {
    const double u0 = dk.u[k], hk = dk.u[k + 1] - u0;
    double a1, b1, a2, b2, a3, b3, a4, b4;
    rhs(u0, psi, phi, a1, b1);
    rhs(u0 + hk / 2, psi + hk / 2 * a1, phi + hk / 2 * b1, a2, b2);
    rhs(u0 + hk / 2, psi + hk / 2 * a2, phi + hk / 2 * b2, a3, b3);
    rhs(u0 + hk, psi + hk * a3, phi + hk * b3, a4, b4);
    psi += hk / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    phi += hk / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    dk.psi[k + 1] = psi;
    dk.phi[k + 1] = phi;
  }
  for (std::size_t k = 0; k <= M; ++k) {
    double G = 0;
    for (int j = 1; j <= K; ++j) G += j * rates.gamma[j - 1].cumulative(clamp_t(dk.u[k]));
    dk.G[k] = G;
    dk.beta[k] = std::max(0.0, rates.beta(clamp_t(dk.u[k])));
  }
  dk.weights.assign(M + 1, h);
  if (M) {
    dk.weights.front() = h / 2;
    dk.weights.back() = h / 2;
  } else {
    dk.weights[0] = 0.0;
  }
  return dk;
}

SymMatrix dual_kernel_matrix(const DualKernel& dk) {
  SymMatrix M;
  M.n = dk.u.size();
  M.a.assign(M.n * M.n, 0.0);
  std::vector<double> sb(M.n), eg(M.n);
  const double g0 = dk.G.empty() ? 0.0 : dk.G.back();
  for (std::size_t k = 0; k < M.n; ++k) {
    sb[k] = std::sqrt(dk.beta[k]);
    eg[k] = std::exp(dk.G[k] - g0);  // scaled to avoid overflow; ratios are exact
  }
  parallel_for(M.n, [&](std::size_t p) {
    for (std::size_t q = 0; q <= p; ++q) {
      // q <= p so u_q = min, u_p = max.
      const double v = sb[p] * sb[q] * (eg[p] / eg[q]) * dk.phi[q];
      M.a[p * M.n + q] = v;
      M.a[q * M.n + p] = v;
    }
  });
  return M;
}

NormEstimate operator_norm(const SymMatrix& M, const std::vector<double>& weights, double tol,
                           std::size_t max_iter) {
  if (weights.size() != M.n) throw DomainError("weights do not match the matrix size");
  for (double w : weights)
    if (w < 0) throw DomainError("quadrature weights must be nonnegative");
  std::vector<double> sw(M.n);
  for (std::size_t k = 0; k < M.n; ++k) sw[k] = std::sqrt(weights[k]);
  const MatVec apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t p = 0; p < M.n; ++p) {
      const double* row = &M.a[p * M.n];
      double acc = 0;
      for (std::size_t q = 0; q < M.n; ++q) acc += row[q] * sw[q] * x[q];
      y[p] = sw[p] * acc;
    }
  };
  return power_iteration(apply, eigvec_guess(M.n), tol, max_iter);
}

NormEstimate rho_of_t(const RateFunctions& rates, double t, std::size_t intervals) {
  if (intervals < 1) throw DomainError("need at least one grid interval");
  NormEstimate est;
  est.method = "dual-ode";
  if (t == 0) {
    if (rates.K < 1) throw DomainError("spectral computations need K >= 1");
    est.size = 1;
    return est;
  }
  const auto dk = moment_odes(rates, t, t / static_cast<double>(intervals));
  est = operator_norm(dual_kernel_matrix(dk), dk.weights);
  est.method = "dual-ode";
  return est;
}

NormEstimate rho_of_t(const RateBundle& bundle, double t, std::size_t intervals) {
  return rho_of_t(irg_rates(bundle), t, intervals);
}

// ---------------------------------------------------------------------------
// Monte Carlo Gram oracle

namespace {

std::vector<TypePoint> sample_normalized(const RateFunctions& rates, double t, std::size_t N,
                                         double mass, Rng& rng) {
  std::vector<double> class_mass(rates.K);
  for (int i = 0; i < rates.K; ++i) class_mass[i] = rates.alpha[i].cumulative(t);
  const AttachmentLaw law(rates.gamma);
  std::vector<TypePoint> pts(N);
  for (auto& x : pts) {
    double target = uniform01(rng) * mass;
    int cls = rates.K - 1;
    for (int i = 0; i < rates.K; ++i) {
      target -= class_mass[i];
      if (target < 0) {
        cls = i;
        break;
      }
    }
    while (class_mass[cls] <= 0) --cls;  // guards rounding into an empty class
    x.s = std::min(t, rates.alpha[cls].inverse_cumulative(uniform01(rng) * class_mass[cls]));
    x.path = sample_attach_path(law, x.s, cls + 1, t, rng);
  }
  return pts;
}

NormEstimate gram_norm(const RateFunctions& rates, double t, double A, std::size_t N, Rng& rng) {
  if (N < 100) throw DomainError("Monte Carlo norm needs at least 100 samples");
  if (rates.K < 1) throw DomainError("spectral computations need K >= 1");
  NormEstimate est;
  est.method = "mc-gram";
  est.size = N;
  const double mass = rates.mass(t);
  if (!(mass > 0) || t == 0) return est;
  const auto pts = sample_normalized(rates, t, N, mass, rng);
  std::vector<char> keep(N);
  for (std::size_t k = 0; k < N; ++k) keep[k] = static_cast<double>(pts[k].path.value(t)) <= A;

  std::vector<double> G(N * N, 0.0);
  parallel_for(N, [&](std::size_t i) {
    if (!keep[i]) return;
    for (std::size_t j = 0; j <= i; ++j) {
      if (!keep[j]) continue;
      const double v = kernel_eval(rates.beta, pts[i], pts[j], t);
      G[i * N + j] = v;
      G[j * N + i] = v;
    }
  });

  // Eigenvalue of (mass / |S|) G restricted to the index set S.
  auto eig = [&](std::size_t skip_lo, std::size_t skip_hi, const std::vector<double>& start) {
    const double scale = mass / static_cast<double>(N - (skip_hi - skip_lo));
    const MatVec apply = [&](const std::vector<double>& x, std::vector<double>& y) {
      for (std::size_t p = 0; p < N; ++p) {
        if (p >= skip_lo && p < skip_hi) {
          y[p] = 0;
          continue;
        }
        const double* row = &G[p * N];
        double acc = 0;
        for (std::size_t q = 0; q < skip_lo; ++q) acc += row[q] * x[q];
        for (std::size_t q = skip_hi; q < N; ++q) acc += row[q] * x[q];
        y[p] = scale * acc;
      }
    };
    std::vector<double> x = start;
    for (std::size_t k = skip_lo; k < skip_hi; ++k) x[k] = 0;
    return power_iteration(apply, x, 1e-10, 100000);
  };

  const MatVec full = [&](const std::vector<double>& x, std::vector<double>& y) {
    const double scale = mass / static_cast<double>(N);
    for (std::size_t p = 0; p < N; ++p) {
      const double* row = &G[p * N];
      double acc = 0;
      for (std::size_t q = 0; q < N; ++q) acc += row[q] * x[q];
      y[p] = scale * acc;
    }
  };
  std::vector<double> start(N);
  for (std::size_t k = 0; k < N; ++k) start[k] = keep[k] ? 1.0 : 0.0;
  if (std::none_of(keep.begin(), keep.end(), [](char c) { return c != 0; })) return est;
  const NormEstimate whole = power_iteration(full, start, 1e-10, 100000);
  est.value = whole.value;
  est.iterations = whole.iterations;
  est.residual = whole.residual;
  if (!(whole.value > 0)) return est;

  // Warm start from the full eigenvector.
  std::vector<double> vec(start);
  {
    std::vector<double> y(N);
    for (std::size_t it = 0; it < whole.iterations + 5; ++it) {
      full(vec, y);
      const double ny = std::sqrt(dot(y, y));
      for (std::size_t k = 0; k < N; ++k) vec[k] = y[k] / ny;
    }
  }
  const std::size_t groups = std::min(kJackknifeGroups, N);
  std::vector<double> loo(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * N / groups, hi = (g + 1) * N / groups;
    loo[g] = eig(lo, hi, vec).value;
  }
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(groups);
  double ss = 0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  est.std_error = std::sqrt(static_cast<double>(groups - 1) / static_cast<double>(groups) * ss);
  return est;
}

}  // namespace

NormEstimate mc_gram_norm(const RateFunctions& rates, double t, std::size_t samples, Rng& rng) {
  return gram_norm(rates, t, std::numeric_limits<double>::infinity(), samples, rng);
}

NormEstimate truncated_norm(const RateFunctions& rates, double t, double A, std::size_t samples,
                            Rng& rng) {
  if (!(A > 0)) throw DomainError("truncation level must be positive");
  return gram_norm(rates, t, A, samples, rng);
}

// ---------------------------------------------------------------------------
// Critical time

TcResult find_tc(const RateProvider& provider, double tol) {
  if (!(tol > 0)) throw DomainError("tolerance must be positive");
  constexpr double kHorizonCap = 16.0;
  double T = 1.0;
  RateFunctions rates = provider(T);
  double rho_T = rho_of_t(rates, T).value;
  while (!(rho_T > 1.0)) {
    if (T >= kHorizonCap)
      throw DomainError("no crossing on horizon: rho(" + fmt_double(T) + ") = " + fmt_double(rho_T));
    T *= 2;
    rates = provider(T);
    rho_T = rho_of_t(rates, T).value;
  }
  TcResult r;
  r.horizon = T;
  double lo = 0, hi = T;
  double mid = T, rho_mid = rho_T;
  for (std::size_t it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    rho_mid = rho_of_t(rates, mid).value;
    ++r.bisections;
    if (std::abs(rho_mid - 1.0) <= tol) break;
    (rho_mid < 1.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-14 * hi) break;
  }
  r.tc = mid;
  r.lo = lo;
  r.hi = hi;
  r.rho_residual = rho_mid - 1.0;
  return r;
}

TcResult find_tc(const Rule& rule, double ode_step, double tol) {
  if (rule.K() < 1) throw DomainError("critical-time search needs K >= 1");
  return find_tc([&](double T) { return irg_rates(solve_rates(rule, T, ode_step)); }, tol);
}

RateBundle perturb_rates(const RateBundle& bundle, double eps, Sign sign) {
  if (!(eps >= 0)) throw DomainError("perturbation size must be nonnegative");
  RateBundle r = bundle;
  const double d = sign == Sign::Plus ? eps : -eps;
  auto shift = [&](std::vector<double>& v) {
    for (auto& x : v) x = std::max(0.0, x + d);
  };
  for (auto& a : r.a) shift(a);
  shift(r.b);
  for (auto& c : r.c) shift(c);
  return r;
}

IncrementBounds rho_increment_bounds(const RateFunctions& rates, double t1, double t2,
                                     double rho_t1) {
  if (!(t1 > 0) || t2 < t1) throw DomainError("need 0 < t1 <= t2");
  // Suprema over [0, t2], taken at grid nodes and at t2 itself.
  auto sup_sum = [&](const std::vector<PiecewiseLinear>& fs) {
    std::vector<double> pts{0.0, t2};
    for (const auto& f : fs)
      for (double u : f.ts())
        if (u < t2) pts.push_back(u);
    double best = 0;
    for (double u : pts) {
      double s = 0;
      for (const auto& f : fs) s += f(u);
      best = std::max(best, s);
    }
    return best;
  };
  const double beta_sup = sup_sum({rates.beta});
  const double alpha_sup = sup_sum(rates.alpha);
  const double gamma_sup = sup_sum(rates.gamma);
  const double K = rates.K;
  IncrementBounds b;
  b.lower = beta_sup > 0 ? (t2 - t1) * rates.beta.inf_on(t1, t2) / (t1 * beta_sup) * rho_t1 : 0.0;
  b.upper = (t2 - t1) * 6 * t2 * K * K * beta_sup * alpha_sup * std::exp(2 * t2 * K * gamma_sup);
  return b;
}

void write_rho_csv(std::ostream& out, const std::vector<RhoRow>& rows) {
  out << "t,rho,method,stderr\n";
  for (const auto& r : rows)
    out << fmt_double(r.t) << ',' << fmt_double(r.est.value) << ',' << r.est.method << ','
        << fmt_double(r.est.std_error) << '\n';
}

void write_tc_json(std::ostream& out, const std::string& rule, const TcResult& tc,
                   double oracle_tc) {
  nlohmann::ordered_json doc;
  doc["rule"] = rule;
  doc["tc"] = tc.tc;
  doc["bracket"] = {tc.lo, tc.hi};
  doc["rho_residual"] = tc.rho_residual;
  if (std::isfinite(oracle_tc))
    doc["oracle_tc"] = oracle_tc;
  else
    doc["oracle_tc"] = nullptr;
  out << doc.dump(2) << '\n';
}

}  // namespace bsrlab
