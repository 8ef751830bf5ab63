#pragma once

#include <span>
#include <vector>

namespace bsrlab {

/// Continuous piecewise-linear function through (ts[k], vs[k]) with exact
/// cumulative integrals. Evaluation outside [ts.front(), ts.back()] throws.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> ts, std::vector<double> vs);

  static PiecewiseLinear constant(double value, double t_end);

  double operator()(double t) const;
  /// Integral over [0, t] measured from ts.front().
  double cumulative(double t) const;
  double integral(double a, double b) const { return cumulative(b) - cumulative(a); }
  /// Smallest t with cumulative(t) = y, for 0 <= y <= total (requires values >= 0).
  double inverse_cumulative(double y) const;

  double sup() const;
  /// Minimum over [a, b] (attained at an endpoint or interior node).
  double inf_on(double a, double b) const;

  double t_begin() const { return ts_.front(); }
  double t_end() const { return ts_.back(); }
  const std::vector<double>& ts() const { return ts_; }
  const std::vector<double>& values() const { return vs_; }

 private:
  std::size_t cell(double t) const;

  std::vector<double> ts_;
  std::vector<double> vs_;
  std::vector<double> cum_;
};

}  // namespace bsrlab
