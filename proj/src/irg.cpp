#include "bsrlab/irg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bsrlab/error.hpp"
#include "bsrlab/format.hpp"
#include "bsrlab/parallel.hpp"

namespace bsrlab {

namespace {

// Supremum of the pointwise sum; exact when all summands share a grid.
double sup_of_sum(const std::vector<PiecewiseLinear>& fs) {
  if (fs.empty()) return 0.0;
  const auto& ts = fs.front().ts();
  const bool shared =
      std::all_of(fs.begin(), fs.end(), [&](const PiecewiseLinear& f) { return f.ts() == ts; });
  if (!shared) {
    double s = 0;
    for (const auto& f : fs) s += f.sup();
    return s;
  }
  double best = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    double s = 0;
    for (const auto& f : fs) s += f.values()[k];
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

double RateFunctions::alpha_sup() const { return sup_of_sum(alpha); }
double RateFunctions::gamma_sup() const { return sup_of_sum(gamma); }

double RateFunctions::mass(double t) const {
  double m = 0;
  for (const auto& a : alpha) m += a.cumulative(t);
  return m;
}

RateFunctions RateFunctions::constant(int K, std::vector<double> alpha, double beta,
                                      std::vector<double> gamma, double t_end) {
  if (K < 1) throw DomainError("rate functions need K >= 1");
  if (static_cast<int>(alpha.size()) != K || static_cast<int>(gamma.size()) != K)
    throw DomainError("alpha and gamma need K entries");
  RateFunctions r;
  r.K = K;
  for (double a : alpha) r.alpha.push_back(PiecewiseLinear::constant(a, t_end));
  r.beta = PiecewiseLinear::constant(beta, t_end);
  for (double g : gamma) r.gamma.push_back(PiecewiseLinear::constant(g, t_end));
  return r;
}

RateFunctions irg_rates(const RateBundle& bundle) {
  if (bundle.K < 1) throw DomainError("rate functions need K >= 1");
  RateFunctions r;
  r.K = bundle.K;
  for (int i = 0; i < bundle.K; ++i) {
    r.alpha.emplace_back(bundle.ts, bundle.a[i]);
    r.gamma.emplace_back(bundle.ts, bundle.c[i]);
  }
  std::vector<double> beta(bundle.b.size());
  std::transform(bundle.b.begin(), bundle.b.end(), beta.begin(), [](double b) { return 2.0 * b; });
  r.beta = PiecewiseLinear(bundle.ts, std::move(beta));
  return r;
}

std::uint64_t MarkedPath::value(double u) const {
  if (u < start) return 0;
  std::uint64_t w = static_cast<std::uint64_t>(initial);
  for (const auto& j : jumps) {
    if (j.time > u) break;
    w += static_cast<std::uint64_t>(j.size);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Attachment paths

AttachmentLaw::AttachmentLaw(std::vector<PiecewiseLinear> gamma) : gamma_(std::move(gamma)) {
  for (const auto& g : gamma_)
    for (double v : g.values())
      if (v < 0) throw DomainError("attachment rates must be nonnegative");
  dominating_ = sup_of_sum(gamma_);
}

MarkedPath sample_attach_path(const AttachmentLaw& law, double s, int i, double t_end, Rng& rng) {
  const int K = law.K();
  if (i < 1 || i > K) throw DomainError("immigrant class must lie in 1..K");
  if (s < 0 || s > t_end) throw DomainError("birth time must lie in [0, t_end]");
  MarkedPath p;
  p.start = s;
  p.initial = K + i;
  const double dom = law.dominating();
  if (!(dom > 0)) return p;
  std::uint64_t w = static_cast<std::uint64_t>(p.initial);
  double u = s;
  for (;;) {
    u += exponential(rng, static_cast<double>(w) * dom);
    if (u > t_end) break;
    double target = uniform01(rng) * dom;
    for (int j = 0; j < K; ++j) {
      target -= law.gamma()[j](u);
      if (target < 0) {
        p.jumps.push_back({u, j + 1});
        w += static_cast<std::uint64_t>(j + 1);
        break;
      }
    }
  }
  return p;
}

MarkedPath sample_attach_path(const std::vector<PiecewiseLinear>& gamma, double s, int i,
                              double t_end, Rng& rng) {
  return sample_attach_path(AttachmentLaw(gamma), s, i, t_end, rng);
}

std::vector<TypePoint> sample_vertices(const RateFunctions& rates, double t, double n, Rng& rng) {
  if (rates.K < 1) throw DomainError("vertex sampling needs K >= 1");
  if (!(t >= 0) || t > rates.t_end() + 1e-12) throw DomainError("time outside the rate horizon");
  if (!(n > 0)) throw DomainError("scale n must be positive");
  const std::uint64_t base = rng();
  std::vector<TypePoint> out;
  for (int i = 0; i < rates.K; ++i) {
    const double total = rates.alpha[i].cumulative(t);
    const std::uint64_t count = poisson(rng, n * total);
    for (std::uint64_t k = 0; k < count; ++k) {
      TypePoint x;
      x.s = std::min(t, rates.alpha[i].inverse_cumulative(uniform01(rng) * total));
      x.path.start = x.s;
      x.path.initial = i + 1;  // class marker until the path is drawn
      out.push_back(std::move(x));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TypePoint& a, const TypePoint& b) { return a.s < b.s; });
  const AttachmentLaw law(rates.gamma);
  parallel_for(out.size(), [&](std::size_t v) {
    Rng vr(derive_seed(base, v));
    out[v].path = sample_attach_path(law, out[v].s, out[v].path.initial, t, vr);
  });
  return out;
}

double kernel_eval(const PiecewiseLinear& beta, const TypePoint& x, const TypePoint& y, double t) {
  return path_kernel([&](double u) { return beta.cumulative(u); }, x.path, y.path, t);
}

// ---------------------------------------------------------------------------
// Graphs

void IrgGraph::compute_components() {
  const std::size_t N = vertices.size();
  std::vector<std::uint32_t> parent(N);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& [a, b] : edges) {
    const auto ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  component.assign(N, 0);
  comp_size.clear();
  comp_volume.clear();
  std::vector<std::uint32_t> id_of_root(N, UINT32_MAX);
  for (std::uint32_t v = 0; v < N; ++v) {
    const auto r = find(v);
    if (id_of_root[r] == UINT32_MAX) {
      id_of_root[r] = static_cast<std::uint32_t>(comp_size.size());
      comp_size.push_back(0);
      comp_volume.push_back(0);
    }
    const auto c = id_of_root[r];
    component[v] = c;
    ++comp_size[c];
    comp_volume[c] += vertices[v].path.value(t);
  }
}

bool IrgGraph::verify_volumes() const {
  if (component.size() != vertices.size()) return false;
  std::vector<std::uint64_t> size(comp_size.size(), 0), vol(comp_size.size(), 0);
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (component[v] >= comp_size.size()) return false;
    ++size[component[v]];
    vol[component[v]] += vertices[v].path.value(t);
  }
  for (const auto& [a, b] : edges)
    if (component[a] != component[b]) return false;
  return size == comp_size && vol == comp_volume;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_candidate_pairs(
    const std::vector<double>& weights, double scale, Rng& rng) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  const std::size_t N = weights.size();
  if (N < 2 || !(scale > 0)) return out;
  std::vector<std::uint32_t> order(N);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return weights[a] > weights[b]; });
  // Geometric skipping over a nonincreasing probability sequence, then
  // thinning by the ratio of the exact to the skipping probability.
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const double wi = weights[order[i]];
    std::size_t j = i + 1;
    double p = std::min(1.0, wi * weights[order[j]] * scale);
    while (j < N && p > 0) {
      if (p < 1) {
        const double r = uniform_open0(rng);
        const double skip = std::floor(std::log(r) / std::log1p(-p));
        if (skip >= static_cast<double>(N - j)) break;
        j += static_cast<std::size_t>(skip);
      }
      const double q = std::min(1.0, wi * weights[order[j]] * scale);
      if (uniform01(rng) < q / p) {
        const auto a = order[i], b = order[j];
        out.emplace_back(std::min(a, b), std::max(a, b));
      }
      p = q;
      ++j;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_edges(
    const std::vector<TypePoint>& vertices, const PiecewiseLinear& beta, double t, double n,
    Rng& rng, const IrgOptions& opts) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  const std::size_t N = vertices.size();
  if (opts.method == EdgeMethod::PairLoop) {
    if (N > kMaxPairLoop && !opts.allow_quadratic)
      throw ResourceError("pair loop over " + std::to_string(N) +
                          " vertices refused; pass --allow-quadratic");
    for (std::uint32_t i = 0; i < N; ++i)
      for (std::uint32_t j = i + 1; j < N; ++j) {
        const double p = std::min(1.0, kernel_eval(beta, vertices[i], vertices[j], t) / n);
        if (uniform01(rng) < p) edges.emplace_back(i, j);
      }
    return edges;
  }
  // w is nondecreasing, so kappa(x, y) <= W_x W_y B(t) with W = w(t).
  std::vector<double> w(N);
  for (std::size_t v = 0; v < N; ++v) w[v] = static_cast<double>(vertices[v].path.value(t));
  const double B = beta.cumulative(t);
  for (const auto& [i, j] : sample_candidate_pairs(w, B / n, rng)) {
    const double q = std::min(1.0, w[i] * w[j] * B / n);
    const double p = std::min(1.0, kernel_eval(beta, vertices[i], vertices[j], t) / n);
    if (uniform01(rng) * q < p) edges.emplace_back(i, j);
  }
  return edges;
}

IrgGraph build_irg(const RateFunctions& rates, double t, double n, Rng& rng,
                   const IrgOptions& opts) {
  IrgGraph g;
  g.t = t;
  g.vertices = sample_vertices(rates, t, n, rng);
  g.edges = sample_edges(g.vertices, rates.beta, t, n, rng, opts);
  g.compute_components();
  return g;
}

IrgGraph build_irg(const RateBundle& bundle, double t, double n, Rng& rng,
                   const IrgOptions& opts) {
  return build_irg(irg_rates(bundle), t, n, rng, opts);
}

std::optional<ComponentVolume> max_volume_component(const IrgGraph& g) {
  if (g.comp_volume.empty()) return std::nullopt;
  ComponentVolume best;
  for (std::uint32_t c = 0; c < g.comp_volume.size(); ++c)
    if (c == 0 || g.comp_volume[c] > best.volume) best = {c, g.comp_size[c], g.comp_volume[c]};
  return best;
}

// ---------------------------------------------------------------------------
// Likelihood ratios and bounds

double rn_weight(const MarkedPath& path, const std::vector<PiecewiseLinear>& gamma,
                 const std::vector<PiecewiseLinear>& gamma_tilde, double s, double t) {
  if (gamma.size() != gamma_tilde.size()) throw DomainError("gamma sizes differ");
  double log_w = 0.0;
  for (const auto& j : path.jumps) {
    if (j.time <= s || j.time > t) continue;
    const double g = gamma[j.size - 1](j.time);
    const double gt = gamma_tilde[j.size - 1](j.time);
    if (g == 0.0) {
      if (gt == 0.0) continue;
      throw DomainError("likelihood ratio is singular: jump where the reference rate vanishes");
    }
    if (gt == 0.0) return 0.0;
    log_w += std::log(gt / g);
  }
  // Compensator: int_s^t w(u) sum_j (gamma_tilde_j - gamma_j)(u) du.
  auto diff_cum = [&](double u) {
    double d = 0;
    for (std::size_t k = 0; k < gamma.size(); ++k)
      d += gamma_tilde[k].cumulative(u) - gamma[k].cumulative(u);
    return d;
  };
  const double lo = std::max(s, path.start);
  double comp = 0.0;
  if (lo < t) {
    double u = lo;
    double w = static_cast<double>(path.value(u));
    double cu = diff_cum(u);
    for (const auto& j : path.jumps) {
      if (j.time <= u) continue;
      if (j.time >= t) break;
      const double cj = diff_cum(j.time);
      comp += w * (cj - cu);
      u = j.time;
      cu = cj;
      w += j.size;
    }
    comp += w * (diff_cum(t) - cu);
  }
  return std::exp(log_w - comp);
}

double largest_volume_tail_bound(double delta, double m, double n, double D, double phi_sup,
                                 double kappa_sup, double mu_mass) {
  if (!(delta > 0) || delta > 1) throw DomainError("delta must lie in (0, 1]");
  if (!(m > 0) || !(n > 0) || !(D > 0) || !(phi_sup > 0))
    throw DomainError("m, n, D and the weight bound must be positive");
  if (kappa_sup < 0 || mu_mass < 0) throw DomainError("kernel bound and mass must be nonnegative");
  const double C = 1.0 / (8.0 * phi_sup * (1.0 + 3.0 * kappa_sup * mu_mass));
  return 2.0 * n * D * std::exp(-C * delta * delta * m);
}

double mu_tail_bound(const RateFunctions& rates, double T, double l) {
  if (!(l > 0)) throw DomainError("level l must be positive");
  const double K = rates.K;
  return 2.0 * T * rates.alpha_sup() *
         std::exp(-l * std::exp(-T * K * rates.gamma_sup()) / (2.0 * K));
}

void write_graph_json(std::ostream& out, const IrgGraph& g) {
  // Streamed by hand so doubles keep 17 significant digits.
  out << "{\"t\":" << fmt_double(g.t) << ",\"vertices\":[";
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    const auto& x = g.vertices[v];
    out << (v ? "," : "") << "{\"s\":" << fmt_double(x.s) << ",\"init\":" << x.path.initial
        << ",\"jumps\":[";
    for (std::size_t k = 0; k < x.path.jumps.size(); ++k)
      out << (k ? "," : "") << '[' << fmt_double(x.path.jumps[k].time) << ','
          << x.path.jumps[k].size << ']';
    out << "]}";
  }
  out << "],\"edges\":[";
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    out << (e ? "," : "") << '[' << g.edges[e].first << ',' << g.edges[e].second << ']';
  out << "]}\n";
}

void write_volume_csv(std::ostream& out, const IrgGraph& g) {
  out << "component,size,volume\n";
  for (std::size_t c = 0; c < g.comp_size.size(); ++c)
    out << c << ',' << g.comp_size[c] << ',' << g.comp_volume[c] << '\n';
}

}  // namespace bsrlab
