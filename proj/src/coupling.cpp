#include "bsrlab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "json.hpp"

#include "bsrlab/bsr_sim.hpp"
#include "bsrlab/error.hpp"
#include "bsrlab/parallel.hpp"
#include "bsrlab/rng.hpp"
#include "bsrlab/spectral.hpp"

namespace bsrlab {

namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

Edge ordered(std::uint32_t a, std::uint32_t b) { return {std::min(a, b), std::max(a, b)}; }

void sort_unique(std::vector<Edge>& e) {
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
}

// Right-continuous step function built by appending pieces in time order,
// with its running integral from 0.
class StepFunction {
 public:
  void push(double t, double v) {
    if (!ts_.empty() && t <= ts_.back()) {
      vs_.back() = v;
      return;
    }
    cum_.push_back(ts_.empty() ? 0.0 : cum_.back() + vs_.back() * (t - ts_.back()));
    ts_.push_back(t);
    vs_.push_back(v);
  }

  double cumulative(double u) const {
    const auto it = std::upper_bound(ts_.begin(), ts_.end(), u);
    if (it == ts_.begin()) return 0.0;
    const auto k = static_cast<std::size_t>(it - ts_.begin()) - 1;
    return cum_[k] + vs_[k] * (u - ts_[k]);
  }

 private:
  std::vector<double> ts_, vs_, cum_;
};

// Explicit small-component configuration: N[i-1] components of size i <= K
// and Xw vertices in large components.
struct Pool {
  int K = 0;
  double n = 0;
  std::vector<std::int64_t> N;
  std::int64_t Xw = 0;
  std::vector<double> x;

  Pool(int K_, std::uint64_t n_) : K(K_), n(static_cast<double>(n_)), N(K_, 0), x(K_ + 1, 0.0) {
    N[0] = static_cast<std::int64_t>(n_);
    refresh();
  }
  void refresh() {
    for (int i = 0; i < K; ++i) x[i] = static_cast<double>((i + 1) * N[i]) / n;
    x[K] = static_cast<double>(Xw) / n;
  }
  void remove_pair(int i1, int i2) {
    --N[i1 - 1];
    --N[i2 - 1];
  }
};

struct PairRate {
  int i1, i2;    // component sizes, i1 <= i2
  double rate;   // merges occur at n * rate
};

// Exact intensities of the pool. Pairs of equal size exclude the two
// endpoints falling into the same component.
struct PoolRates {
  std::vector<PairRate> merge;                   // i1 + i2 <= K
  std::vector<std::vector<PairRate>> immigrate;  // by class, i1 + i2 = K + i
  std::vector<double> a, c;
  double b = 0;
  double merge_total = 0;
};

PoolRates pool_rates(const RatePolynomials& P, const Pool& pool) {
  const int K = pool.K;
  PoolRates r;
  r.immigrate.resize(K);
  r.a.assign(K, 0.0);
  r.c.assign(K, 0.0);
  for (int i1 = 1; i1 <= K; ++i1)
    for (int i2 = i1; i2 <= K; ++i2) {
      double R = P.pair_at(i1 - 1, i2 - 1)(pool.x);
      if (i1 == i2) {
        const auto Ni = pool.N[i1 - 1];
        R = Ni >= 2 ? R * (1.0 - 1.0 / static_cast<double>(Ni)) : 0.0;
      }
      if (i1 + i2 <= K) {
        r.merge.push_back({i1, i2, R});
        r.merge_total += R;
      } else {
        const int cls = i1 + i2 - K - 1;
        r.immigrate[cls].push_back({i1, i2, R});
        r.a[cls] += R;
      }
    }
  for (int j = 0; j < K; ++j) r.c[j] = P.attach[j](pool.x);
  r.b = P.edge(pool.x);
  return r;
}

// Picks an entry with probability proportional to its rate given a uniform
// position pos in [0, total).
const PairRate& pick(const std::vector<PairRate>& v, double pos) {
  double acc = 0;
  for (const auto& p : v) {
    acc += p.rate;
    if (pos < acc) return p;
  }
  for (auto it = v.rbegin(); it != v.rend(); ++it)
    if (it->rate > 0) return *it;
  return v.back();
}

void apply_merge(Pool& pool, const PairRate& p) {
  pool.remove_pair(p.i1, p.i2);
  ++pool.N[p.i1 + p.i2 - 1];
}

constexpr double kRel = 1e-12;

bool le(double a, double b) { return a <= b + kRel * std::max(1.0, std::abs(b)); }

// Gamma rates lie in [minus(u), plus(u)] componentwise.
bool in_band(const PoolRates& r, const RateFunctions& plus, const RateFunctions& minus, double u) {
  for (int i = 0; i < plus.K; ++i) {
    if (!le(minus.alpha[i](u), r.a[i]) || !le(r.a[i], plus.alpha[i](u))) return false;
    if (!le(minus.gamma[i](u), r.c[i]) || !le(r.c[i], plus.gamma[i](u))) return false;
  }
  const double beta = 2.0 * r.b;
  return le(minus.beta(u), beta) && le(beta, plus.beta(u));
}

struct SkeletonEvent {
  double time;
  std::uint32_t v;
  int size;
  bool immigration;
};

VolumeTriple triple_of(const CouplingRun& run) {
  auto vol = [](const IrgGraph& g) -> std::uint64_t {
    const auto c = max_volume_component(g);
    return c ? c->volume : 0;
  };
  VolumeTriple v;
  v.seed = run.seed;
  v.sigma_hit = run.sigma_hit;
  v.sandwich = run.sandwich_held;
  v.rg_minus = vol(run.rg_minus);
  v.gamma = vol(run.gamma);
  v.rg_plus = vol(run.rg_plus);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gamma from a BSR run

GammaGraph gamma_from_bsr(const Rule& rule, std::uint64_t n, double t, std::uint64_t seed) {
  const int K = rule.K();
  if (K < 1) throw DomainError("gamma_from_bsr requires K >= 1");
  if (n < 1 || n > UINT32_MAX) throw DomainError("n out of range");
  const auto Kz = static_cast<std::uint64_t>(K);

  GammaGraph out;
  std::vector<std::uint32_t> group(n, kNoVertex);
  std::vector<TypePoint> verts;
  std::vector<Edge> edges;

  auto observer = [&](double s, std::uint32_t a, std::uint32_t b, GraphState& g) {
    const auto ra = g.find(a), rb = g.find(b);
    const std::uint64_t sa = g.component_size(ra), sb = g.component_size(rb);
    const bool la = sa > Kz, lb = sb > Kz;
    if (la && lb) {
      if (group[a] != group[b]) edges.push_back(ordered(group[a], group[b]));
      return;
    }
    if (ra == rb) return;
    if (!la && !lb) {
      if (sa + sb <= Kz) return;
      const auto G = static_cast<std::uint32_t>(verts.size());
      TypePoint p;
      p.s = s;
      p.path.start = s;
      p.path.initial = static_cast<int>(sa + sb);
      verts.push_back(std::move(p));
      out.bsr_vertex.push_back(a);
      g.for_each_member(ra, [&](std::uint32_t v) { group[v] = G; });
      g.for_each_member(rb, [&](std::uint32_t v) { group[v] = G; });
      return;
    }
    const std::uint32_t small_root = la ? rb : ra;
    const std::uint32_t large_vertex = la ? a : b;
    const std::uint32_t G = group[large_vertex];
    verts[G].path.jumps.push_back({s, static_cast<int>(la ? sb : sa)});
    g.for_each_member(small_root, [&](std::uint32_t v) { group[v] = G; });
  };

  auto at_end = [&](GraphState& g) {
    sort_unique(edges);
    out.graph.t = t;
    out.graph.vertices = std::move(verts);
    out.graph.edges = std::move(edges);
    out.graph.compute_components();
    out.large_volume = g.counts()[K];

    const std::size_t C = out.graph.comp_volume.size();
    std::vector<std::uint32_t> root(C, kNoVertex);
    bool ok = true;
    for (std::size_t v = 0; v < out.graph.vertices.size(); ++v) {
      const auto c = out.graph.component[v];
      const auto r = g.find(out.bsr_vertex[v]);
      if (root[c] == kNoVertex)
        root[c] = r;
      else if (root[c] != r)
        ok = false;
    }
    out.bsr_component_size.resize(C);
    std::vector<std::uint32_t> sorted_roots;
    std::uint64_t total = 0;
    for (std::size_t c = 0; c < C; ++c) {
      out.bsr_component_size[c] = g.component_size(root[c]);
      ok = ok && out.bsr_component_size[c] == out.graph.comp_volume[c];
      total += out.graph.comp_volume[c];
      sorted_roots.push_back(root[c]);
    }
    std::sort(sorted_roots.begin(), sorted_roots.end());
    ok = ok && std::adjacent_find(sorted_roots.begin(), sorted_roots.end()) == sorted_roots.end();
    std::size_t large_roots = 0;
    for (std::uint32_t v = 0; v < g.n(); ++v)
      if (g.find(v) == v && g.component_size(v) > Kz) ++large_roots;
    out.volumes_match = ok && large_roots == C && total == out.large_volume;
  };

  simulate(rule, n, t, seed, SimMode::Poissonized, {t}, observer, at_end);
  return out;
}

// ---------------------------------------------------------------------------
// Sandwich

CouplingRun build_sandwich(const Rule& rule, std::uint64_t n, double t, double delta,
                           std::uint64_t seed) {
  if (!(t > 0)) return build_sandwich(rule, RateBundle{}, n, t, delta, seed);
  return build_sandwich(rule, solve_rates(rule, t, std::min(kDefaultOdeStep, t)), n, t, delta,
                        seed);
}

CouplingRun build_sandwich(const Rule& rule, const RateBundle& bundle, std::uint64_t n, double t,
                           double delta, std::uint64_t seed) {
  const int K = rule.K();
  if (K < 1) throw DomainError("coupling requires K >= 1");
  if (!(delta > 0 && delta < 0.5)) throw DomainError("delta must lie in (0, 1/2)");
  if (!(t >= 0)) throw DomainError("t must be nonnegative");
  if (n < 1) throw DomainError("n must be positive");

  CouplingRun run;
  run.n = n;
  run.t = t;
  run.delta = delta;
  run.eps = std::pow(static_cast<double>(n), -delta);
  run.seed = seed;
  run.sigma = t;
  run.rg_plus.t = run.gamma.t = run.rg_minus.t = t;
  if (t == 0) {
    run.sandwich_held = true;
    return run;
  }
  if (bundle.K != K || bundle.t_end() < t * (1 - 1e-12))
    throw DomainError("rate bundle does not cover [0, t]");

  const double nd = static_cast<double>(n);
  const RateFunctions plus = irg_rates(perturb_rates(bundle, run.eps, Sign::Plus));
  const RateFunctions minus = irg_rates(perturb_rates(bundle, run.eps, Sign::Minus));
  const RatePolynomials& P = rule.polynomials();

  Rng vertex_rng(derive_seed(seed, 0));
  const std::uint64_t edge_seed = derive_seed(seed, 1);
  Rng thin(derive_seed(seed, 2));
  Rng cand_rng(derive_seed(seed, 3));
  Rng post(derive_seed(seed, 4));

  const std::vector<TypePoint> V = sample_vertices(plus, t, nd, vertex_rng);
  const auto NV = static_cast<std::uint32_t>(V.size());

  std::vector<SkeletonEvent> events;
  for (std::uint32_t v = 0; v < NV; ++v) {
    events.push_back({V[v].s, v, V[v].path.initial, true});
    for (const auto& j : V[v].path.jumps) events.push_back({j.time, v, j.size, false});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const SkeletonEvent& a, const SkeletonEvent& b) { return a.time < b.time; });

  // Gamma and RG^- state.
  std::vector<std::uint32_t> gid(NV, kNoVertex);
  std::vector<std::uint64_t> wplus(NV, 0);
  std::vector<TypePoint> gv, mv;
  std::vector<std::uint64_t> wg, wm;
  std::vector<std::uint32_t> mid;
  Pool pool(K, n);
  PoolRates r = pool_rates(P, pool);
  StepFunction beta_star;
  beta_star.push(0.0, 2.0 * r.b);

  auto refresh = [&](double now) {
    pool.refresh();
    r = pool_rates(P, pool);
    beta_star.push(now, 2.0 * r.b);
  };

  // Band check on [t0, t1] with the pool frozen: the bounds are linear
  // between grid nodes, so nodes and endpoints suffice.
  const std::vector<double>& nodes = plus.beta.ts();
  std::size_t node = 0;
  auto band_ok = [&](double t0, double t1) {
    if (!in_band(r, plus, minus, t0)) {
      run.sigma = t0;
      return false;
    }
    while (node < nodes.size() && nodes[node] <= t0) ++node;
    for (; node < nodes.size() && nodes[node] < t1; ++node)
      if (!in_band(r, plus, minus, nodes[node])) {
        run.sigma = nodes[node];
        return false;
      }
    if (!in_band(r, plus, minus, t1)) {
      run.sigma = t1;
      return false;
    }
    return true;
  };

  auto new_point = [](double s, int size) {
    TypePoint p;
    p.s = s;
    p.path.start = s;
    p.path.initial = size;
    return p;
  };

  double now = 0;
  std::size_t k = 0;
  bool hit = false;
  while (true) {
    const double next_event = k < events.size() ? events[k].time : t;
    const double dt = r.merge_total > 0 ? exponential(thin, nd * r.merge_total)
                                        : std::numeric_limits<double>::infinity();
    if (now + dt < next_event) {
      if (!band_ok(now, now + dt)) {
        hit = true;
        break;
      }
      now += dt;
      apply_merge(pool, pick(r.merge, uniform01(thin) * r.merge_total));
      refresh(now);
      continue;
    }
    if (!band_ok(now, next_event)) {
      hit = true;
      break;
    }
    now = next_event;
    if (k == events.size()) break;

    const SkeletonEvent& e = events[k++];
    if (e.immigration) {
      const int cls = e.size - K - 1;
      wplus[e.v] = static_cast<std::uint64_t>(e.size);
      const double a_plus = plus.alpha[cls](e.time);
      const double a_star = r.a[cls];
      if (!le(a_star, a_plus)) ++run.acceptance_violations;
      const double pos = uniform01(thin) * a_plus;
      if (pos < a_star) {
        const PairRate& p = pick(r.immigrate[cls], pos);
        pool.remove_pair(p.i1, p.i2);
        pool.Xw += e.size;
        const auto g = static_cast<std::uint32_t>(gv.size());
        gv.push_back(new_point(e.time, e.size));
        wg.push_back(static_cast<std::uint64_t>(e.size));
        run.psi_plus.push_back(e.v);
        gid[e.v] = g;
        const double a_minus = minus.alpha[cls](e.time);
        if (!le(a_minus, a_star)) ++run.acceptance_violations;
        if (uniform01(thin) * a_star < a_minus) {
          mid.push_back(static_cast<std::uint32_t>(mv.size()));
          mv.push_back(new_point(e.time, e.size));
          wm.push_back(static_cast<std::uint64_t>(e.size));
          run.psi_minus.push_back(g);
        } else {
          mid.push_back(kNoVertex);
        }
        refresh(now);
      }
    } else {
      const std::uint32_t g = gid[e.v];
      const int j = e.size;
      if (g != kNoVertex) {
        const double num = static_cast<double>(wg[g]) * r.c[j - 1];
        const double den = static_cast<double>(wplus[e.v]) * plus.gamma[j - 1](e.time);
        if (!le(num, den)) ++run.acceptance_violations;
        if (uniform01(thin) * den < num) {
          gv[g].path.jumps.push_back({e.time, j});
          wg[g] += static_cast<std::uint64_t>(j);
          --pool.N[j - 1];
          pool.Xw += j;
          const std::uint32_t m = mid[g];
          if (m != kNoVertex) {
            const double num_minus = static_cast<double>(wm[m]) * minus.gamma[j - 1](e.time);
            if (!le(num_minus, num)) ++run.acceptance_violations;
            if (uniform01(thin) * num < num_minus) {
              mv[m].path.jumps.push_back({e.time, j});
              wm[m] += static_cast<std::uint64_t>(j);
            }
          }
          refresh(now);
        }
      }
      wplus[e.v] += static_cast<std::uint64_t>(j);
    }
  }

  run.sigma_hit = hit;
  if (hit) {
    // Gamma continues with its own exact dynamics from sigma; RG^- is drawn
    // independently from its own law.
    now = run.sigma;
    std::vector<std::uint32_t> units;  // one entry per large vertex, by group
    for (std::uint32_t g = 0; g < gv.size(); ++g) units.insert(units.end(), wg[g], g);
    while (true) {
      double imm_total = 0, att_total = 0;
      for (int i = 0; i < K; ++i) {
        imm_total += nd * r.a[i];
        att_total += static_cast<double>(pool.Xw) * r.c[i];
      }
      const double merge_total = nd * r.merge_total;
      const double total = merge_total + imm_total + att_total;
      if (!(total > 0)) break;
      now += exponential(post, total);
      if (now > t) break;
      double pos = uniform01(post) * total;
      if (pos < merge_total) {
        apply_merge(pool, pick(r.merge, pos / nd));
      } else if ((pos -= merge_total) < imm_total) {
        int cls = 0;
        while (cls + 1 < K && pos >= nd * r.a[cls]) pos -= nd * r.a[cls++];
        const PairRate& p = pick(r.immigrate[cls], pos / nd);
        const int size = K + cls + 1;
        pool.remove_pair(p.i1, p.i2);
        pool.Xw += size;
        const auto g = static_cast<std::uint32_t>(gv.size());
        gv.push_back(new_point(now, size));
        wg.push_back(static_cast<std::uint64_t>(size));
        run.psi_plus.push_back(kNoVertex);
        units.insert(units.end(), static_cast<std::size_t>(size), g);
      } else {
        pos -= imm_total;
        int j = 0;
        const double X = static_cast<double>(pool.Xw);
        while (j + 1 < K && pos >= X * r.c[j]) pos -= X * r.c[j++];
        const std::uint32_t g = units[uniform_index(post, units.size())];
        const int size = j + 1;
        gv[g].path.jumps.push_back({now, size});
        wg[g] += static_cast<std::uint64_t>(size);
        --pool.N[j];
        pool.Xw += size;
        units.insert(units.end(), static_cast<std::size_t>(size), g);
      }
      refresh(now);
    }
    mv = sample_vertices(minus, t, nd, post);
    run.psi_minus.clear();
  }

  // Edges. Candidate pairs dominate every edge probability of RG^+, and of
  // Gamma and RG^- as long as the thresholds are nested.
  auto beta_star_cum = [&](double u) { return beta_star.cumulative(u); };
  std::vector<double> W(NV);
  for (std::uint32_t v = 0; v < NV; ++v) W[v] = static_cast<double>(V[v].path.value(t));
  const double Bplus = plus.beta.cumulative(t);
  for (const auto& [i, j] : sample_candidate_pairs(W, Bplus / nd, cand_rng)) {
    const double q = std::min(1.0, W[i] * W[j] * Bplus / nd);
    const double u = q * keyed_uniform(edge_seed, i, j);
    const double p_plus = std::min(1.0, kernel_eval(plus.beta, V[i], V[j], t) / nd);
    if (u <= p_plus) run.rg_plus.edges.emplace_back(i, j);
    if (hit) continue;
    const std::uint32_t gi = gid[i], gj = gid[j];
    if (gi == kNoVertex || gj == kNoVertex) continue;
    const double p_star = -std::expm1(-path_kernel(beta_star_cum, gv[gi].path, gv[gj].path, t) / nd);
    if (p_star > p_plus) ++run.threshold_violations;
    if (u <= p_star) run.gamma.edges.push_back(ordered(gi, gj));
    const std::uint32_t mi = mid[gi], mj = mid[gj];
    if (mi == kNoVertex || mj == kNoVertex) continue;
    const double p_minus = std::min(1.0, kernel_eval(minus.beta, mv[mi], mv[mj], t) / nd);
    if (p_minus > p_star) ++run.threshold_violations;
    if (u <= p_minus) run.rg_minus.edges.push_back(ordered(mi, mj));
  }
  if (hit) {
    std::vector<double> Wg(gv.size());
    for (std::size_t g = 0; g < gv.size(); ++g) Wg[g] = static_cast<double>(wg[g]);
    const double Bstar = beta_star.cumulative(t);
    for (const auto& [i, j] : sample_candidate_pairs(Wg, Bstar / nd, post)) {
      const double q = std::min(1.0, Wg[i] * Wg[j] * Bstar / nd);
      const double p = -std::expm1(-path_kernel(beta_star_cum, gv[i].path, gv[j].path, t) / nd);
      if (uniform01(post) * q < p) run.gamma.edges.emplace_back(i, j);
    }
    run.rg_minus.edges = sample_edges(mv, minus.beta, t, nd, post);
  }

  run.rg_plus.vertices = V;
  run.gamma.vertices = std::move(gv);
  run.rg_minus.vertices = std::move(mv);
  for (IrgGraph* g : {&run.rg_plus, &run.gamma, &run.rg_minus}) {
    sort_unique(g->edges);
    g->compute_components();
  }
  run.sandwich_held = !hit && run.threshold_violations == 0 && run.acceptance_violations == 0 &&
                      check_sandwich(run);
  return run;
}

bool check_sandwich(const CouplingRun& run) {
  // Inner path below outer path at every change point of the inner path.
  auto dominated = [&](const MarkedPath& inner, const MarkedPath& outer) {
    if (static_cast<std::uint64_t>(inner.initial) > outer.value(inner.start)) return false;
    std::uint64_t w = static_cast<std::uint64_t>(inner.initial);
    for (const auto& j : inner.jumps) {
      if (j.time > run.t) break;
      w += static_cast<std::uint64_t>(j.size);
      if (w > outer.value(j.time)) return false;
    }
    return inner.value(run.t) <= outer.value(run.t);
  };
  auto embeds = [&](const IrgGraph& inner, const IrgGraph& outer,
                    const std::vector<std::uint32_t>& psi) {
    if (psi.size() != inner.vertices.size()) return false;
    std::vector<char> used(outer.vertices.size(), 0);
    for (std::size_t x = 0; x < psi.size(); ++x) {
      const auto y = psi[x];
      if (y >= outer.vertices.size() || used[y]) return false;
      used[y] = 1;
      if (!dominated(inner.vertices[x].path, outer.vertices[y].path)) return false;
    }
    for (const auto& [a, b] : inner.edges) {
      if (a >= psi.size() || b >= psi.size()) return false;
      if (!std::binary_search(outer.edges.begin(), outer.edges.end(), ordered(psi[a], psi[b])))
        return false;
    }
    return true;
  };
  return embeds(run.gamma, run.rg_plus, run.psi_plus) &&
         embeds(run.rg_minus, run.gamma, run.psi_minus);
}

VolumeTriple summarize(const CouplingRun& run) { return triple_of(run); }

VolumeSandwichStats volume_sandwich_stats(const Rule& rule, std::uint64_t n, double t,
                                          double delta, int replicas, std::uint64_t seed) {
  if (replicas < 1) throw DomainError("replicas must be at least 1");
  const RateBundle bundle =
      t > 0 ? solve_rates(rule, t, std::min(kDefaultOdeStep, t)) : RateBundle{};
  VolumeSandwichStats out;
  out.replicas.resize(static_cast<std::size_t>(replicas));
  parallel_for(out.replicas.size(), [&](std::size_t r) {
    out.replicas[r] = triple_of(build_sandwich(rule, bundle, n, t, delta, derive_seed(seed, r)));
  });
  std::size_t chain = 0, sandwich = 0;
  for (const auto& v : out.replicas) {
    chain += v.chain();
    sandwich += v.sandwich;
  }
  out.chain_fraction = static_cast<double>(chain) / replicas;
  out.sandwich_fraction = static_cast<double>(sandwich) / replicas;
  return out;
}

void write_coupling_json(std::ostream& out, std::uint64_t n, double t, double delta,
                         const VolumeTriple& row) {
  nlohmann::ordered_json j;
  j["sigma_hit"] = row.sigma_hit;
  j["sandwich"] = row.sandwich;
  j["vols"] = {{"rg_minus", row.rg_minus}, {"gamma", row.gamma}, {"rg_plus", row.rg_plus}};
  j["n"] = n;
  j["t"] = t;
  j["delta"] = delta;
  j["seed"] = row.seed;
  out << j.dump() << '\n';
}

void write_coupling_json(std::ostream& out, const CouplingRun& run) {
  write_coupling_json(out, run.n, run.t, run.delta, triple_of(run));
}

}  // namespace bsrlab
