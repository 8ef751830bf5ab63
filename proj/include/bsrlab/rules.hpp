#pragma once

// Bounded-size rules and the polynomial rate functionals evaluated on
// size-class density vectors x = (x_1, ..., x_K, x_w).

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bsrlab {

/// Element of {1, ..., K, w}. The "large" class w is a separate variant, not
/// an integer sentinel. Ordering puts every small class before w.
class SizeClass {
 public:
  static SizeClass small(int size);
  static SizeClass large() { return SizeClass(Kind::Large, 0); }

  bool is_large() const { return kind_ == Kind::Large; }
  int size() const;  // throws on the large class

  /// Dense index into vectors over the classes: 0..K-1 for sizes 1..K, K for w.
  int index(int K) const { return is_large() ? K : size_ - 1; }
  static SizeClass from_index(int idx, int K);

  /// "1".."K" or "w".
  std::string token() const;

  auto operator<=>(const SizeClass&) const = default;

 private:
  enum class Kind : std::uint8_t { Small = 0, Large = 1 };
  SizeClass(Kind k, int s) : kind_(k), size_(s) {}
  Kind kind_;
  int size_;
};

using Quadruple = std::array<SizeClass, 4>;

/// Returns the class of a component of the given size: the size itself if
/// it is at most K, the large class otherwise.
SizeClass classify(std::uint64_t size, int K);

/// Sum of two classes, saturating to w above K (and w absorbs everything).
SizeClass class_sum(SizeClass a, SizeClass b, int K);

/// Homogeneous polynomial of degree <= 4 in the K+1 class densities.
class Polynomial {
 public:
  struct Term {
    std::array<std::uint8_t, 4> vars{};  // sorted variable indices
    std::uint8_t degree = 0;
    double coef = 0.0;
  };

  Polynomial() = default;
  explicit Polynomial(std::vector<Term> terms) : terms_(std::move(terms)) {}

  double operator()(std::span<const double> x) const;
  const std::vector<Term>& terms() const { return terms_; }

  /// Removes one factor x_var from every term. Throws if some term lacks it.
  Polynomial divided_by(int var) const;

 private:
  std::vector<Term> terms_;
};

/// Precompiled polynomial forms of the drift and rate functionals of a rule.
struct RatePolynomials {
  int K = 0;
  std::vector<Polynomial> drift;      // K+1 entries, F^x_i
  std::vector<Polynomial> pair;       // (K+1)^2 entries, F^x_{i1,i2}, symmetric
  std::vector<Polynomial> immigrate;  // K entries, a_i
  std::vector<Polynomial> attach;     // K entries, c_i with x_w cancelled
  Polynomial edge;                    // b with x_w^2 cancelled

  const Polynomial& pair_at(int i1, int i2) const { return pair[i1 * (K + 1) + i2]; }
};

/// A bounded-size rule: cutoff K and the decision set F of class quadruples.
/// F is stored sorted and deduplicated.
class Rule {
 public:
  static constexpr int kMaxK = 16;

  Rule(int K, std::vector<Quadruple> F);

  int K() const { return K_; }
  int num_classes() const { return K_ + 1; }
  const std::vector<Quadruple>& quadruples() const { return F_; }

  bool contains(const Quadruple& q) const;
  /// Membership by dense class indices; the simulator's hot path.
  bool contains_index(int c1, int c2, int c3, int c4) const {
    const int m = K_ + 1;
    return member_[((c1 * m + c2) * m + c3) * m + c4] != 0;
  }

  const RatePolynomials& polynomials() const { return *polys_; }

  /// FNV-1a over the canonical serialization.
  std::uint64_t hash() const;

  bool operator==(const Rule& o) const { return K_ == o.K_ && F_ == o.F_; }

 private:
  int K_;
  std::vector<Quadruple> F_;
  std::vector<std::uint8_t> member_;
  std::shared_ptr<const RatePolynomials> polys_;
};

/// Change of X_i caused by a non-redundant round whose four endpoint classes
/// are j. The pair (j1,j2) is used when j is in F, otherwise (j3,j4).
int delta_jump(const Rule& rule, const Quadruple& j, SizeClass i);

/// Drift vector (F^x_i(x))_i. With strict set, x must sum to 1 within 1e-9.
std::vector<double> drift(const Rule& rule, std::span<const double> x, bool strict = false);

/// Rate F^x_{i1,i2}(x) at which (scaled by n) components of classes i1, i2 merge.
double pair_rate(const Rule& rule, std::span<const double> x, SizeClass i1, SizeClass i2);

/// Immigration, edge and attachment rates at one density vector.
struct RatePoint {
  std::vector<double> a;  // a_1..a_K
  double b = 0.0;
  std::vector<double> c;  // c_1..c_K
};

RatePoint rate_functions_at(const Rule& rule, std::span<const double> x);

/// Parses {"K": int, "quadruples": [[e,e,e,e], ...]} with e in "1".."K", "w", "*".
Rule parse_rule(std::string_view json_text);
Rule load_rule_file(const std::string& path);
std::string serialize_rule(const Rule& rule);

namespace rules {
Rule erdos_renyi();    // K = 0, F = {(w,w,w,w)}
Rule bohman_frieze();  // K = 1, F = {(1,1,*,*)}
Rule always_first(int K);  // F = Omega_K^4
}  // namespace rules

}  // namespace bsrlab
