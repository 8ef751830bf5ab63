#pragma once

// Inhomogeneous random graphs on the type space [0, inf) x D([0, inf): N0).
// A vertex is an immigrant born at time s with K+i members whose size then
// grows by attachments; kappa_t(x, y) = int_0^t beta(u) w_x(u) w_y(u) du and
// a pair is joined with probability 1 ^ kappa_t / n.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "bsrlab/grid.hpp"
#include "bsrlab/ode.hpp"
#include "bsrlab/rng.hpp"

namespace bsrlab {

/// Generic rate functions (alpha, beta, gamma) on [0, t_end]. alpha and gamma
/// have K entries; beta is the per-pair edge intensity entering kappa.
struct RateFunctions {
  int K = 0;
  std::vector<PiecewiseLinear> alpha;
  PiecewiseLinear beta;
  std::vector<PiecewiseLinear> gamma;

  double t_end() const { return beta.t_end(); }
  /// Suprema over the horizon of sum_i alpha_i, beta and sum_j gamma_j.
  double alpha_sup() const;
  double beta_sup() const { return beta.sup(); }
  double gamma_sup() const;
  /// mu_t mass: sum_i int_0^t alpha_i.
  double mass(double t) const;

  static RateFunctions constant(int K, std::vector<double> alpha, double beta,
                                std::vector<double> gamma, double t_end);
};

/// Rate functions of the large-component graph of a rule: alpha = a,
/// gamma = c, and beta = 2b. b is the per-ordered-pair rate, so an unordered
/// pair of large vertices is joined at rate 2b/n.
RateFunctions irg_rates(const RateBundle& bundle);

struct Jump {
  double time;
  int size;
  bool operator==(const Jump&) const = default;
};

/// Right-continuous step path: 0 before start, initial from start on, plus
/// the sizes of all jumps at or before u.
struct MarkedPath {
  double start = 0;
  int initial = 0;
  std::vector<Jump> jumps;

  std::uint64_t value(double u) const;
  bool operator==(const MarkedPath&) const = default;
};

struct TypePoint {
  double s = 0;  // equals path.start
  MarkedPath path;
};

/// Attachment dynamics: from state k a jump of size j occurs at rate
/// k * gamma_j(u). Sampled exactly by thinning against k * dominating.
class AttachmentLaw {
 public:
  explicit AttachmentLaw(std::vector<PiecewiseLinear> gamma);
  int K() const { return static_cast<int>(gamma_.size()); }
  double dominating() const { return dominating_; }
  const std::vector<PiecewiseLinear>& gamma() const { return gamma_; }

 private:
  std::vector<PiecewiseLinear> gamma_;
  double dominating_ = 0;
};

/// Path of an immigrant of size K+i born at s, simulated up to t_end.
MarkedPath sample_attach_path(const AttachmentLaw& law, double s, int i, double t_end, Rng& rng);
MarkedPath sample_attach_path(const std::vector<PiecewiseLinear>& gamma, double s, int i,
                              double t_end, Rng& rng);

/// Poisson point process with intensity n * mu_t, sorted by immigration time.
/// Each class count is Poisson(n int_0^t alpha_i); times come from inverting
/// the cumulative intensity; paths use per-vertex streams derived from one
/// draw of rng.
std::vector<TypePoint> sample_vertices(const RateFunctions& rates, double t, double n, Rng& rng);

/// int_0^t f(u) w_x(u) w_y(u) du, where F(u) = int_0^u f.
template <class Cumulative>
double path_kernel(const Cumulative& F, const MarkedPath& x, const MarkedPath& y, double t) {
  const double lo = x.start > y.start ? x.start : y.start;
  if (lo >= t) return 0.0;
  // w_x w_y is constant between consecutive jumps of either path.
  auto ix = x.jumps.begin(), ex = x.jumps.end();
  auto iy = y.jumps.begin(), ey = y.jumps.end();
  double wx = x.initial, wy = y.initial;
  while (ix != ex && ix->time <= lo) wx += (ix++)->size;
  while (iy != ey && iy->time <= lo) wy += (iy++)->size;
  double acc = 0.0;
  double u = lo;
  double cum_u = F(u);
  while (u < t) {
    double next = t;
    if (ix != ex && ix->time < next) next = ix->time;
    if (iy != ey && iy->time < next) next = iy->time;
    const double cum_next = F(next);
    acc += wx * wy * (cum_next - cum_u);
    u = next;
    cum_u = cum_next;
    while (ix != ex && ix->time <= u) wx += (ix++)->size;
    while (iy != ey && iy->time <= u) wy += (iy++)->size;
  }
  return acc;
}

/// Exact int_0^t beta(u) w_x(u) w_y(u) du.
double kernel_eval(const PiecewiseLinear& beta, const TypePoint& x, const TypePoint& y, double t);

struct IrgGraph {
  double t = 0;
  std::vector<TypePoint> vertices;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // i < j
  std::vector<std::uint32_t> component;  // dense ids in order of first vertex
  std::vector<std::uint64_t> comp_size;
  std::vector<std::uint64_t> comp_volume;  // sum of w(t) over members

  /// Rebuilds component, comp_size, comp_volume from vertices and edges.
  void compute_components();
  bool verify_volumes() const;
};

enum class EdgeMethod {
  Candidates,  // bounded candidate pairs, then exact acceptance
  PairLoop,    // every unordered pair, O(N^2)
};

struct IrgOptions {
  EdgeMethod method = EdgeMethod::Candidates;
  bool allow_quadratic = false;  // pair loop beyond kMaxPairLoop vertices
};

constexpr std::size_t kMaxPairLoop = 100000;

/// Independent edges with probability 1 ^ kappa_t(x_i, x_j) / n.
std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_edges(
    const std::vector<TypePoint>& vertices, const PiecewiseLinear& beta, double t, double n,
    Rng& rng, const IrgOptions& opts = {});

/// Samples RG^(n)(alpha, beta, gamma)(t).
IrgGraph build_irg(const RateFunctions& rates, double t, double n, Rng& rng,
                   const IrgOptions& opts = {});
IrgGraph build_irg(const RateBundle& bundle, double t, double n, Rng& rng,
                   const IrgOptions& opts = {});

/// Candidate pairs with independent inclusion probabilities
/// min(1, W_i W_j scale) for the given weights.
std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_candidate_pairs(
    const std::vector<double>& weights, double scale, Rng& rng);

struct ComponentVolume {
  std::uint32_t id = 0;
  std::uint64_t size = 0;
  std::uint64_t volume = 0;
};

/// Component of largest volume, ties to the smallest id; empty graph gives nullopt.
std::optional<ComponentVolume> max_volume_component(const IrgGraph& g);

/// Likelihood ratio of the path under gamma_tilde against gamma on [s, t].
double rn_weight(const MarkedPath& path, const std::vector<PiecewiseLinear>& gamma,
                 const std::vector<PiecewiseLinear>& gamma_tilde, double s, double t);

/// 2 n D exp(-C delta^2 m) with C = 1 / (8 phi_sup (1 + 3 kappa_sup mu_mass)).
double largest_volume_tail_bound(double delta, double m, double n, double D, double phi_sup,
                                 double kappa_sup, double mu_mass);

/// Bound on mu_T({w(T) > l}): 2 T |alpha| exp(-l e^{-T K |gamma|} / (2K)).
double mu_tail_bound(const RateFunctions& rates, double T, double l);

void write_graph_json(std::ostream& out, const IrgGraph& g);
void write_volume_csv(std::ostream& out, const IrgGraph& g);

}  // namespace bsrlab
