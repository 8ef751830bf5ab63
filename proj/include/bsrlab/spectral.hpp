#pragma once

// Operator norm rho(t) of the IRG integral operator. kappa_t factors through
// time as int_0^t g_u(x) g_u(y) du with g_u(x) = sqrt(beta(u)) w_x(u), so the
// norm equals the top eigenvalue of the time kernel
//   M(u, v) = sqrt(beta(u) beta(v)) E_mu[w(u) w(v)]
//           = sqrt(beta(u) beta(v)) exp(G(u v v) - G(u ^ v)) Phi(u ^ v),
// where Phi(u) = E_mu[w(u)^2] and G = int g with g = sum_j j gamma_j.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsrlab/irg.hpp"
#include "bsrlab/ode.hpp"
#include "bsrlab/rng.hpp"

namespace bsrlab {

constexpr std::size_t kDefaultDualIntervals = 2000;

struct DualKernel {
  double t = 0;
  std::vector<double> u;        // uniform grid on [0, t]
  std::vector<double> psi;      // mass-weighted first moment of w(u)
  std::vector<double> phi;      // mass-weighted second moment of w(u)
  std::vector<double> G;        // int_0^u sum_j j gamma_j
  std::vector<double> beta;     // beta(u)
  std::vector<double> weights;  // trapezoid weights
};

/// Dense symmetric matrix, row-major.
struct SymMatrix {
  std::size_t n = 0;
  std::vector<double> a;
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

struct NormEstimate {
  double value = 0;
  std::string method;  // "dual-ode" or "mc-gram"
  std::size_t size = 0;  // grid points or samples
  std::size_t iterations = 0;
  double residual = 0;
  double std_error = 0;  // jackknife standard error, Monte Carlo only
};

/// Integrates
///   Psi' = sum_i alpha_i (K+i) + g Psi,
///   Phi' = sum_i alpha_i (K+i)^2 + 2 g Phi + h Psi,   Psi(0) = Phi(0) = 0
/// by RK4 on a uniform grid with step at most grid_step (h = sum_j j^2 gamma_j).
DualKernel moment_odes(const RateFunctions& rates, double t, double grid_step);

SymMatrix dual_kernel_matrix(const DualKernel& dk);

/// Top eigenvalue of W^1/2 M W^1/2 by power iteration from the all-ones vector.
/// Stops once the Rayleigh quotient's relative change and the relative
/// residual are both at most tol; throws DomainError after max_iter.
NormEstimate operator_norm(const SymMatrix& M, const std::vector<double>& weights,
                           double tol = 1e-8, std::size_t max_iter = 100000);

NormEstimate rho_of_t(const RateFunctions& rates, double t,
                      std::size_t intervals = kDefaultDualIntervals);
NormEstimate rho_of_t(const RateBundle& bundle, double t,
                      std::size_t intervals = kDefaultDualIntervals);

/// Gram-matrix oracle: N points from normalized mu_t, G_ij = kappa m / N,
/// grouped-jackknife standard error.
NormEstimate mc_gram_norm(const RateFunctions& rates, double t, std::size_t samples, Rng& rng);

/// Same estimator with kappa restricted to w_x(t) <= A and w_y(t) <= A.
/// With A = infinity it reproduces mc_gram_norm on the same stream.
NormEstimate truncated_norm(const RateFunctions& rates, double t, double A, std::size_t samples,
                            Rng& rng);

struct TcResult {
  double tc = 0;
  double lo = 0, hi = 0;    // final bisection bracket
  double rho_residual = 0;  // rho(tc) - 1
  double horizon = 0;
  std::size_t bisections = 0;
};

/// Rate functions on [0, T] for a requested horizon T.
using RateProvider = std::function<RateFunctions(double T)>;

/// Doubles the horizon from T = 1 (cap 16) until rho(T) > 1, then bisects
/// to |rho - 1| <= tol.
TcResult find_tc(const RateProvider& provider, double tol = 1e-6);
TcResult find_tc(const Rule& rule, double ode_step = kDefaultOdeStep, double tol = 1e-6);

enum class Sign { Plus, Minus };

/// Shifts every rate by +eps, or by -eps clipped at 0.
RateBundle perturb_rates(const RateBundle& bundle, double eps, Sign sign);

/// Increment bounds on rho over [t1, t2]:
///   lower = (t2-t1) inf_[t1,t2] beta / (t1 |beta|) rho(t1),
///   upper = (t2-t1) 6 t2 K^2 |beta| |alpha| exp(2 t2 K |gamma|),
/// with sup norms over [0, t2].
struct IncrementBounds {
  double lower = 0, upper = 0;
};
IncrementBounds rho_increment_bounds(const RateFunctions& rates, double t1, double t2,
                                     double rho_t1);

struct RhoRow {
  double t;
  NormEstimate est;
};
void write_rho_csv(std::ostream& out, const std::vector<RhoRow>& rows);
void write_tc_json(std::ostream& out, const std::string& rule, const TcResult& tc,
                   double oracle_tc);

}  // namespace bsrlab
