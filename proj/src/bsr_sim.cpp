#include "bsrlab/bsr_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <new>
#include <numeric>
#include <ostream>

#include "bsrlab/error.hpp"
#include "bsrlab/format.hpp"
#include "bsrlab/parallel.hpp"
#include "bsrlab/rng.hpp"

namespace bsrlab {

std::string to_string(SimMode m) { return m == SimMode::Poissonized ? "poisson" : "discrete"; }

SimMode parse_sim_mode(const std::string& s) {
  if (s == "poisson" || s == "poissonized") return SimMode::Poissonized;
  if (s == "discrete") return SimMode::Discrete;
  throw DomainError("--mode must be poisson or discrete, got \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// GraphState

GraphState::GraphState(std::uint32_t n, int K) : K_(K), s2_(n) {
  if (n == 0) throw DomainError("graph needs at least one vertex");
  if (K < 0) throw DomainError("cutoff K must be nonnegative");
  try {
    parent_.resize(n);
    size_.assign(n, 1);
    next_.resize(n);
  } catch (const std::bad_alloc&) {
    throw ResourceError("cannot allocate union-find arrays for n = " + std::to_string(n));
  }
  std::iota(parent_.begin(), parent_.end(), 0u);
  std::iota(next_.begin(), next_.end(), 0u);
  counts_.assign(K + 1, 0);
  counts_[class_of_size(1)] = n;
}

std::uint32_t GraphState::find(std::uint32_t v) {
  while (parent_[v] != v) {
    parent_[v] = parent_[parent_[v]];
    v = parent_[v];
  }
  return v;
}

int GraphState::class_index(std::uint32_t v) { return class_of_size(size_[find(v)]); }

RoundOutcome GraphState::add_edge(std::uint32_t a, std::uint32_t b) {
  RoundOutcome out;
  out.u = a;
  out.v = b;
  std::uint32_t ra = find(a);
  std::uint32_t rb = find(b);
  out.root_u = ra;
  out.root_v = rb;
  out.size_u = size_[ra];
  out.size_v = size_[rb];
  if (ra == rb) {
    out.redundant = true;
    out.new_root = ra;
    ++redundant_;
    return out;
  }
  const std::uint64_t sa = size_[ra];
  const std::uint64_t sb = size_[rb];
  counts_[class_of_size(sa)] -= sa;
  counts_[class_of_size(sb)] -= sb;
  counts_[class_of_size(sa + sb)] += sa + sb;
  s2_ += 2 * sa * sb;
  if (sa < sb) std::swap(ra, rb);
  parent_[rb] = ra;
  size_[ra] = static_cast<std::uint32_t>(sa + sb);
  std::swap(next_[ra], next_[rb]);
  c1_ = std::max<std::uint64_t>(c1_, sa + sb);
  ++edges_;
  out.new_root = ra;
  return out;
}

std::pair<std::uint32_t, std::uint32_t> GraphState::choose(
    const Rule& rule, const std::array<std::uint32_t, 4>& v) {
  // With K = 0 every component is large, so the decision is constant.
  const bool first =
      K_ == 0 ? rule.contains_index(0, 0, 0, 0)
              : rule.contains_index(class_index(v[0]), class_index(v[1]), class_index(v[2]),
                                    class_index(v[3]));
  return first ? std::pair{v[0], v[1]} : std::pair{v[2], v[3]};
}

RoundOutcome GraphState::step(const Rule& rule, const std::array<std::uint32_t, 4>& v) {
  const auto [a, b] = choose(rule, v);
  return add_edge(a, b);
}

bool GraphState::verify() {
  std::vector<std::uint64_t> counts(K_ + 1, 0);
  std::uint64_t s2 = 0, c1 = 0, total = 0;
  for (std::uint32_t v = 0; v < n(); ++v) {
    if (find(v) != v) continue;
    const std::uint64_t s = size_[v];
    std::uint64_t members = 0;
    for_each_member(v, [&](std::uint32_t) { ++members; });
    if (members != s) return false;
    counts[class_of_size(s)] += s;
    s2 += s * s;
    c1 = std::max(c1, s);
    total += s;
  }
  return total == n() && counts == counts_ && s2 == s2_ && c1 == c1_;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

Snapshot take_snapshot(double t, const GraphState& g) {
  Snapshot s;
  s.t = t;
  const double n = static_cast<double>(g.n());
  for (auto c : g.counts()) s.x.push_back(static_cast<double>(c) / n);
  s.s2_over_n = static_cast<double>(g.s2()) / n;
  s.c1 = g.c1();
  s.edges = g.edges();
  s.redundant = g.redundant_rounds();
  return s;
}

}  // namespace

ObservableSeries simulate(const Rule& rule, std::uint64_t n, double t_end, std::uint64_t seed,
                          SimMode mode, std::vector<double> sample_times,
                          const RoundObserver& observer,
                          const std::function<void(GraphState&)>& at_end) {
  if (n < 1) throw DomainError("--n must be at least 1");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ResourceError("--n above 2^32 - 1");
  if (!(t_end >= 0)) throw DomainError("--t must be nonnegative");
  if (sample_times.empty()) sample_times.push_back(t_end);
  std::sort(sample_times.begin(), sample_times.end());
  for (double s : sample_times)
    if (s < 0 || s > t_end) throw DomainError("sample time outside [0, t_end]");

  ObservableSeries series;
  series.K = rule.K();
  series.n = n;
  series.seed = seed;
  series.mode = mode;

  GraphState g(static_cast<std::uint32_t>(n), rule.K());
  Rng count_rng(derive_seed(seed, 0));
  Rng vertex_rng(derive_seed(seed, 1));

  std::vector<double> round_times;
  std::uint64_t rounds = 0;
  if (mode == SimMode::Poissonized) {
    rounds = poisson(count_rng, static_cast<double>(n) * t_end / 2.0);
    try {
      round_times.resize(rounds);
    } catch (const std::bad_alloc&) {
      throw ResourceError("cannot allocate round times");
    }
    for (auto& r : round_times) r = uniform01(count_rng) * t_end;
    std::sort(round_times.begin(), round_times.end());
  } else {
    rounds = static_cast<std::uint64_t>(std::floor(static_cast<double>(n) * t_end / 2.0 + 1e-9));
  }
  series.total_rounds = rounds;

  auto round_time = [&](std::uint64_t k) {
    return mode == SimMode::Poissonized ? round_times[k]
                                        : 2.0 * static_cast<double>(k + 1) / static_cast<double>(n);
  };

  std::size_t next_sample = 0;
  for (std::uint64_t k = 0; k < rounds; ++k) {
    const double t = round_time(k);
    while (next_sample < sample_times.size() && sample_times[next_sample] < t) {
      series.rows.push_back(take_snapshot(sample_times[next_sample], g));
      ++next_sample;
    }
    std::array<std::uint32_t, 4> v;
    for (auto& x : v) x = static_cast<std::uint32_t>(uniform_index(vertex_rng, n));
    const auto [a, b] = g.choose(rule, v);
    if (observer) observer(t, a, b, g);
    g.add_edge(a, b);
  }
  while (next_sample < sample_times.size()) {
    series.rows.push_back(take_snapshot(sample_times[next_sample], g));
    ++next_sample;
  }
  if (at_end) at_end(g);
  return series;
}

std::vector<ObservableSeries> simulate_replicas(const Rule& rule, std::uint64_t n, double t_end,
                                                std::uint64_t seed, SimMode mode,
                                                const std::vector<double>& sample_times,
                                                int replicas) {
  if (replicas < 1) throw DomainError("--replicas must be at least 1");
  std::vector<ObservableSeries> out(replicas);
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t r) {
    out[r] = simulate(rule, n, t_end, derive_seed(seed, r), mode, sample_times);
  });
  return out;
}

void write_series_csv(std::ostream& out, const ObservableSeries& series) {
  out << "t";
  for (int i = 1; i <= series.K; ++i) out << ",x_" << i;
  out << ",x_w,s2_over_n,c1,edges,redundant\n";
  for (const auto& r : series.rows) {
    out << fmt_double(r.t);
    for (double v : r.x) out << ',' << fmt_double(v);
    out << ',' << fmt_double(r.s2_over_n) << ',' << r.c1 << ',' << r.edges << ',' << r.redundant
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Susceptibility crossing

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

CrossingEstimate susceptibility_crossing(const Rule& rule, std::uint64_t n,
                                         const std::vector<double>& time_grid, int replicas,
                                         double threshold, std::uint64_t seed, SimMode mode) {
  if (time_grid.empty()) throw DomainError("time grid is empty");
  if (!(threshold > 1)) throw DomainError("threshold must exceed 1");
  std::vector<double> grid = time_grid;
  std::sort(grid.begin(), grid.end());
  const auto runs = simulate_replicas(rule, n, grid.back(), seed, mode, grid, replicas);

  CrossingEstimate est;
  est.n = n;
  est.median_s2.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> vals;
    for (const auto& r : runs) vals.push_back(r.rows[k].s2_over_n);
    est.median_s2[k] = median(std::move(vals));
  }

  std::size_t hit = grid.size();
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (est.median_s2[k] >= threshold) {
      hit = k;
      break;
    }
  if (hit == grid.size() || hit == 0) return est;
  est.crossed = true;

  // Inverse susceptibility is close to linear in t below t_c; interpolate it.
  const double y0 = 1.0 / est.median_s2[hit - 1];
  const double y1 = 1.0 / est.median_s2[hit];
  const double yt = 1.0 / threshold;
  est.t_cross = grid[hit - 1] + (grid[hit] - grid[hit - 1]) * (y0 - yt) / (y0 - y1);

  // Least-squares line through n/S2 over the window threshold/8 <= S2/n <= threshold.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 0; k < hit; ++k) {
    const double s = est.median_s2[k];
    if (s < threshold / 8.0) continue;
    const double y = 1.0 / s;
    sx += grid[k];
    sy += y;
    sxx += grid[k] * grid[k];
    sxy += grid[k] * y;
    ++m;
  }
  if (m >= 2) {
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / m;
    est.t_zero = slope < 0 ? -icpt / slope : est.t_cross;
  } else {
    // Fall back to the bracketing secant.
    est.t_zero = grid[hit] + (grid[hit] - grid[hit - 1]) * y1 / (y0 - y1);
  }
  return est;
}

SusceptibilityTc estimate_tc_susceptibility(const Rule& rule, std::uint64_t n,
                                            const std::vector<double>& time_grid, int replicas,
                                            double threshold, std::uint64_t seed, SimMode mode) {
  SusceptibilityTc out;
  out.at_n = susceptibility_crossing(rule, n, time_grid, replicas, threshold, derive_seed(seed, 0),
                                     mode);
  out.at_4n = susceptibility_crossing(rule, 4 * n, time_grid, replicas, threshold,
                                      derive_seed(seed, 1), mode);
  if (!out.at_n.crossed || !out.at_4n.crossed) {
    out.note = "no-crossing: median S2/n never reached the threshold on the grid";
    return out;
  }
  out.crossed = true;
  // t(n) = t_inf + C n^{-1/3}; with sizes n and 4n the ratio is r = 4^{-1/3}.
  const double r = std::pow(4.0, -out.exponent);
  auto extrapolate = [&](double small, double large) { return (large - r * small) / (1.0 - r); };
  out.t_cross_limit = extrapolate(out.at_n.t_cross, out.at_4n.t_cross);
  out.t_zero_limit = extrapolate(out.at_n.t_zero, out.at_4n.t_zero);
  out.tc = out.t_zero_limit;

  std::vector<double> grid = time_grid;
  std::sort(grid.begin(), grid.end());
  double spacing = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) spacing = std::max(spacing, grid[k] - grid[k - 1]);
  // Systematic budget: size of the finite-size correction, the gap between
  // the two estimators, and grid resolution.
  const double fs = std::abs(out.t_zero_limit - out.at_4n.t_zero);
  const double gap = std::abs(out.t_zero_limit - out.t_cross_limit);
  out.uncertainty = std::sqrt(fs * fs + gap * gap) + 0.5 * spacing;
  out.note = "finite-size exponent 1/3 is a heuristic choice";
  return out;
}

}  // namespace bsrlab
