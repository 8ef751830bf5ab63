#pragma once

// n-vertex bounded-size rule process. Each round picks four vertices
// uniformly from [n]^4 (with replacement) and adds (v1,v2) if the class
// quadruple lies in F, else (v3,v4). Poissonized mode runs rounds at rate n/2;
// discrete mode runs exactly floor(n t / 2) rounds at times 2k/n.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bsrlab/rules.hpp"

namespace bsrlab {

enum class SimMode { Poissonized, Discrete };

std::string to_string(SimMode m);
SimMode parse_sim_mode(const std::string& s);

/// Outcome of one round, reported before/after the merge for event logging.
struct RoundOutcome {
  bool redundant = false;
  std::uint32_t u = 0, v = 0;            // endpoints of the added edge
  std::uint32_t root_u = 0, root_v = 0;  // roots before the merge
  std::uint64_t size_u = 0, size_v = 0;  // component sizes before the merge
  std::uint32_t new_root = 0;            // root after the merge
};

/// Union-find component structure with size-class counts, susceptibility and
/// largest-component tracking.
class GraphState {
 public:
  GraphState(std::uint32_t n, int K);

  std::uint32_t n() const { return static_cast<std::uint32_t>(parent_.size()); }
  int K() const { return K_; }

  std::uint32_t find(std::uint32_t v);
  std::uint64_t component_size(std::uint32_t v) { return size_[find(v)]; }
  /// Dense class index of v's component (0..K-1 small sizes, K large).
  int class_index(std::uint32_t v);

  /// Endpoints the rule selects for the quadruple of vertex ids v.
  std::pair<std::uint32_t, std::uint32_t> choose(const Rule& rule,
                                                 const std::array<std::uint32_t, 4>& v);

  /// Applies one round with the quadruple of vertex ids v.
  RoundOutcome step(const Rule& rule, const std::array<std::uint32_t, 4>& v);

  /// Adds edge (a,b) directly (no rule decision).
  RoundOutcome add_edge(std::uint32_t a, std::uint32_t b);

  /// Visits every vertex of the component rooted at `root`.
  template <class Fn>
  void for_each_member(std::uint32_t root, Fn&& fn) const {
    std::uint32_t v = root;
    do {
      fn(v);
      v = next_[v];
    } while (v != root);
  }

  const std::vector<std::uint64_t>& counts() const { return counts_; }  // X_1..X_K, X_w
  std::uint64_t s2() const { return s2_; }
  std::uint64_t c1() const { return c1_; }
  std::uint64_t edges() const { return edges_; }
  std::uint64_t redundant_rounds() const { return redundant_; }
  std::uint64_t rounds() const { return edges_ + redundant_; }

  /// Recomputes counts, s2 and c1 from scratch; true when they match.
  bool verify();

 private:
  int class_of_size(std::uint64_t s) const {
    return s <= static_cast<std::uint64_t>(K_) ? static_cast<int>(s) - 1 : K_;
  }

  int K_;
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
  std::vector<std::uint32_t> next_;  // circular member lists
  std::vector<std::uint64_t> counts_;
  std::uint64_t s2_;
  std::uint64_t c1_ = 1;
  std::uint64_t edges_ = 0;
  std::uint64_t redundant_ = 0;
};

struct Snapshot {
  double t = 0;
  std::vector<double> x;  // densities x_1..x_K, x_w
  double s2_over_n = 0;
  std::uint64_t c1 = 0;
  std::uint64_t edges = 0;
  std::uint64_t redundant = 0;
};

struct ObservableSeries {
  int K = 0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  SimMode mode = SimMode::Poissonized;
  std::uint64_t total_rounds = 0;
  std::vector<Snapshot> rows;
};

/// Sees the edge (a, b) chosen by each round before it is applied.
using RoundObserver =
    std::function<void(double t, std::uint32_t a, std::uint32_t b, GraphState& state)>;

/// Runs the process to t_end and snapshots the observables at each sample
/// time (state after all rounds with time <= sample). Empty samples means
/// {t_end}. at_end sees the final state.
ObservableSeries simulate(const Rule& rule, std::uint64_t n, double t_end, std::uint64_t seed,
                          SimMode mode, std::vector<double> sample_times,
                          const RoundObserver& observer = {},
                          const std::function<void(GraphState&)>& at_end = {});

/// Independent replicas with seeds derive_seed(seed, r), run on the worker pool.
std::vector<ObservableSeries> simulate_replicas(const Rule& rule, std::uint64_t n, double t_end,
                                                std::uint64_t seed, SimMode mode,
                                                const std::vector<double>& sample_times,
                                                int replicas);

void write_series_csv(std::ostream& out, const ObservableSeries& series);

/// Susceptibility-crossing estimate at one system size.
struct CrossingEstimate {
  std::uint64_t n = 0;
  bool crossed = false;
  double t_cross = 0;      // first time the replica-median S2/n reaches the threshold
  double t_zero = 0;       // zero of the linear fit of n/S2 just below the threshold
  std::vector<double> median_s2;  // replica-median S2/n on the grid
};

struct SusceptibilityTc {
  bool crossed = false;
  double tc = 0;           // finite-size extrapolated estimate
  double uncertainty = 0;  // half-width of the reported interval
  double t_cross_limit = 0;
  double t_zero_limit = 0;
  double exponent = 1.0 / 3.0;  // n^{-exponent} extrapolation, heuristic
  CrossingEstimate at_n, at_4n;
  std::string note;
};

/// Critical-time estimate from the blow-up of S2/n, using sizes n and 4n.
SusceptibilityTc estimate_tc_susceptibility(const Rule& rule, std::uint64_t n,
                                            const std::vector<double>& time_grid, int replicas,
                                            double threshold = 100.0, std::uint64_t seed = 1,
                                            SimMode mode = SimMode::Poissonized);

/// Crossing analysis for one n (exposed for tests and the CLI).
CrossingEstimate susceptibility_crossing(const Rule& rule, std::uint64_t n,
                                         const std::vector<double>& time_grid, int replicas,
                                         double threshold, std::uint64_t seed, SimMode mode);

}  // namespace bsrlab
