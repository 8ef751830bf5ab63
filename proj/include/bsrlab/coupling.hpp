#pragma once

// Three-way coupling RG^- (t) c Gamma(t) c RG^+ (t) of the large-component
// graph of a bounded-size rule between two inhomogeneous random graphs with
// rates shifted by -/+ eps, eps = n^-delta.
//
// RG^+ is sampled first. Its immigrations and path jumps form a time-ordered
// skeleton; each skeleton point is accepted into Gamma with the ratio of the
// exact Gamma intensity (read off an explicit pool of small components) to
// the RG^+ intensity. Accepted Gamma points are thinned once more into RG^-.
// Every unordered RG^+ pair carries one keyed uniform shared by all three
// edge decisions. Enforcement stops at sigma, the first time the Gamma rates
// leave the band [rate - eps, rate + eps].

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "bsrlab/irg.hpp"
#include "bsrlab/ode.hpp"
#include "bsrlab/rules.hpp"

namespace bsrlab {

constexpr std::uint32_t kNoVertex = std::numeric_limits<std::uint32_t>::max();

/// Large-component graph read off a BSR run. Vertex g is an immigrant group;
/// bsr_vertex[g] is one BSR vertex of the group.
struct GammaGraph {
  IrgGraph graph;
  std::vector<std::uint32_t> bsr_vertex;
  std::vector<std::uint64_t> bsr_component_size;  // per Gamma component
  std::uint64_t large_volume = 0;                 // X_w(t)
  bool volumes_match = false;  // |BSR component| = Gamma volume, bijectively
};

GammaGraph gamma_from_bsr(const Rule& rule, std::uint64_t n, double t, std::uint64_t seed);

struct CouplingRun {
  std::uint64_t n = 0;
  double t = 0;
  double delta = 0;
  double eps = 0;
  std::uint64_t seed = 0;

  IrgGraph rg_plus;
  IrgGraph gamma;
  IrgGraph rg_minus;
  std::vector<std::uint32_t> psi_plus;   // Gamma vertex -> RG^+ vertex or kNoVertex
  std::vector<std::uint32_t> psi_minus;  // RG^- vertex -> Gamma vertex

  double sigma = 0;  // t when never hit
  bool sigma_hit = false;
  std::uint64_t threshold_violations = 0;   // pairs where an inner edge probability exceeds an outer one
  std::uint64_t acceptance_violations = 0;  // thinning ratios above 1 before sigma
  bool sandwich_held = false;
};

/// delta in (0, 1/2), K >= 1.
CouplingRun build_sandwich(const Rule& rule, std::uint64_t n, double t, double delta,
                           std::uint64_t seed);
/// Same, reusing a rate bundle that covers [0, t].
CouplingRun build_sandwich(const Rule& rule, const RateBundle& bundle, std::uint64_t n, double t,
                           double delta, std::uint64_t seed);

/// Weight dominance at time t and edge preservation for both embeddings.
bool check_sandwich(const CouplingRun& run);

struct VolumeTriple {
  std::uint64_t seed = 0;
  bool sigma_hit = false;
  bool sandwich = false;
  std::uint64_t rg_minus = 0, gamma = 0, rg_plus = 0;  // largest component volumes
  bool chain() const { return rg_minus <= gamma && gamma <= rg_plus; }
};

struct VolumeSandwichStats {
  std::vector<VolumeTriple> replicas;
  double chain_fraction = 0;
  double sandwich_fraction = 0;
};

/// Replica r uses seed derive_seed(seed, r).
VolumeSandwichStats volume_sandwich_stats(const Rule& rule, std::uint64_t n, double t,
                                          double delta, int replicas, std::uint64_t seed);

VolumeTriple summarize(const CouplingRun& run);
void write_coupling_json(std::ostream& out, const CouplingRun& run);
void write_coupling_json(std::ostream& out, std::uint64_t n, double t, double delta,
                         const VolumeTriple& row);

}  // namespace bsrlab
