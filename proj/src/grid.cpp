#include "bsrlab/grid.hpp"

#include <algorithm>
#include <cmath>

#include "bsrlab/error.hpp"

namespace bsrlab {

namespace {
constexpr double kEdgeSlack = 1e-12;
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> ts, std::vector<double> vs)
    : ts_(std::move(ts)), vs_(std::move(vs)) {
  if (ts_.empty() || ts_.size() != vs_.size())
    throw DomainError("piecewise-linear function needs matching, nonempty grids");
  for (std::size_t k = 1; k < ts_.size(); ++k)
    if (!(ts_[k] > ts_[k - 1])) throw DomainError("grid must be strictly increasing");
  cum_.assign(ts_.size(), 0.0);
  for (std::size_t k = 1; k < ts_.size(); ++k)
    cum_[k] = cum_[k - 1] + 0.5 * (vs_[k] + vs_[k - 1]) * (ts_[k] - ts_[k - 1]);
}

PiecewiseLinear PiecewiseLinear::constant(double value, double t_end) {
  if (t_end <= 0) return PiecewiseLinear({0.0}, {value});
  return PiecewiseLinear({0.0, t_end}, {value, value});
}

std::size_t PiecewiseLinear::cell(double t) const {
  if (t < ts_.front() - kEdgeSlack || t > ts_.back() + kEdgeSlack)
    throw DomainError("time " + std::to_string(t) + " outside grid range [" +
                      std::to_string(ts_.front()) + ", " + std::to_string(ts_.back()) + "]");
  if (ts_.size() == 1) return 0;
  auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
  std::size_t k = it == ts_.begin() ? 0 : static_cast<std::size_t>(it - ts_.begin()) - 1;
  return std::min(k, ts_.size() - 2);
}

double PiecewiseLinear::operator()(double t) const {
  const std::size_t k = cell(t);
  if (ts_.size() == 1) return vs_[0];
  const double h = ts_[k + 1] - ts_[k];
  const double d = std::clamp(t - ts_[k], 0.0, h);
  if (d == 0.0) return vs_[k];
  if (d == h) return vs_[k + 1];
  return vs_[k] + (vs_[k + 1] - vs_[k]) * (d / h);
}

double PiecewiseLinear::cumulative(double t) const {
  const std::size_t k = cell(t);
  if (ts_.size() == 1) return 0.0;
  const double h = ts_[k + 1] - ts_[k];
  const double d = std::clamp(t - ts_[k], 0.0, h);
  return cum_[k] + vs_[k] * d + (vs_[k + 1] - vs_[k]) * d * d / (2.0 * h);
}

double PiecewiseLinear::inverse_cumulative(double y) const {
  if (ts_.size() == 1) return ts_[0];
  if (y <= 0) return ts_.front();
  if (y >= cum_.back()) return ts_.back();
  auto it = std::upper_bound(cum_.begin(), cum_.end(), y);
  const std::size_t k = static_cast<std::size_t>(it - cum_.begin()) - 1;
  const double h = ts_[k + 1] - ts_[k];
  const double r = y - cum_[k];
  const double v0 = vs_[k];
  const double slope = (vs_[k + 1] - vs_[k]) / h;
  // Solve v0*d + slope*d^2/2 = r on [0, h].
  double d;
  if (std::abs(slope) * h < 1e-14 * std::max(1.0, std::abs(v0))) {
    d = v0 > 0 ? r / v0 : 0.0;
  } else {
    const double disc = std::max(0.0, v0 * v0 + 2.0 * slope * r);
    d = 2.0 * r / (v0 + std::sqrt(disc));  // stable root form
  }
  return ts_[k] + std::clamp(d, 0.0, h);
}

double PiecewiseLinear::sup() const { return *std::max_element(vs_.begin(), vs_.end()); }

double PiecewiseLinear::inf_on(double a, double b) const {
  double m = std::min((*this)(a), (*this)(b));
  for (std::size_t k = 0; k < ts_.size(); ++k)
    if (ts_[k] > a && ts_[k] < b) m = std::min(m, vs_[k]);
  return m;
}

}  // namespace bsrlab
