#pragma once

// Limiting density ODE x' = F^x(x), x(0) = (1, 0, ..., 0), and the derived
// immigration / edge / attachment rate functions along its solution.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "bsrlab/rules.hpp"

namespace bsrlab {

struct DensityTrajectory {
  int K = 0;
  std::vector<double> ts;
  std::vector<std::vector<double>> xs;  // xs[k] has K+1 entries
  std::size_t renormalizations = 0;     // simplex projections applied
};

/// Rates (a, b, c) sampled on a grid. Series are stored per class:
/// a[i][k] = a_{i+1}(ts[k]).
struct RateBundle {
  int K = 0;
  std::vector<double> ts;
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<std::vector<double>> c;

  double t_end() const { return ts.back(); }
};

constexpr double kDefaultOdeStep = 1e-3;

/// Classical fixed-step RK4. The last step is shortened to land on t_end.
DensityTrajectory solve_densities(const Rule& rule, double t_end, double step = kDefaultOdeStep);

RateBundle rates_trajectory(const Rule& rule, const DensityTrajectory& traj);

/// Convenience: solve then evaluate rates.
RateBundle solve_rates(const Rule& rule, double t_end, double step = kDefaultOdeStep);

/// Linear interpolation between bracketing grid points; exact at grid points.
std::vector<double> interpolate(const DensityTrajectory& traj, double t);
RatePoint interpolate(const RateBundle& bundle, double t);

void write_trajectory_csv(std::ostream& out, const DensityTrajectory& traj);
void write_rates_csv(std::ostream& out, const RateBundle& bundle);

}  // namespace bsrlab
