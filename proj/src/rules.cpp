#include "bsrlab/rules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "bsrlab/error.hpp"
#include "json.hpp"

namespace bsrlab {

SizeClass SizeClass::small(int size) {
  if (size < 1) throw DomainError("size class must be at least 1, got " + std::to_string(size));
  return SizeClass(Kind::Small, size);
}

int SizeClass::size() const {
  if (is_large()) throw DomainError("the large class has no integer size");
  return size_;
}

SizeClass SizeClass::from_index(int idx, int K) {
  if (idx < 0 || idx > K) throw DomainError("class index out of range");
  return idx == K ? large() : small(idx + 1);
}

std::string SizeClass::token() const { return is_large() ? "w" : std::to_string(size_); }

SizeClass classify(std::uint64_t size, int K) {
  if (size == 0) throw DomainError("components cannot be empty (size 0)");
  if (K < 0) throw DomainError("cutoff K must be nonnegative");
  return size <= static_cast<std::uint64_t>(K) ? SizeClass::small(static_cast<int>(size))
                                               : SizeClass::large();
}

SizeClass class_sum(SizeClass a, SizeClass b, int K) {
  if (a.is_large() || b.is_large()) return SizeClass::large();
  const int s = a.size() + b.size();
  return s > K ? SizeClass::large() : SizeClass::small(s);
}

// ---------------------------------------------------------------------------
// Polynomial

double Polynomial::operator()(std::span<const double> x) const {
  double acc = 0.0;
  for (const auto& t : terms_) {
    double m = t.coef;
    for (int k = 0; k < t.degree; ++k) m *= x[t.vars[k]];
    acc += m;
  }
  return acc;
}

Polynomial Polynomial::divided_by(int var) const {
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) {
    auto end = t.vars.begin() + t.degree;
    auto it = std::find(t.vars.begin(), end, static_cast<std::uint8_t>(var));
    if (it == end) throw DomainError("polynomial term is not divisible by the requested factor");
    Term r;
    r.coef = t.coef;
    r.degree = static_cast<std::uint8_t>(t.degree - 1);
    std::copy(t.vars.begin(), it, r.vars.begin());
    std::copy(it + 1, end, r.vars.begin() + (it - t.vars.begin()));
    out.push_back(r);
  }
  return Polynomial(std::move(out));
}

namespace {

using Key = std::array<std::uint8_t, 4>;

struct Accumulator {
  std::map<Key, double> terms;

  void add(std::array<int, 4> idx, double coef) {
    if (coef == 0.0) return;
    std::sort(idx.begin(), idx.end());
    Key k{};
    for (int i = 0; i < 4; ++i) k[i] = static_cast<std::uint8_t>(idx[i]);
    terms[k] += coef;
  }

  Polynomial finish() const {
    std::vector<Polynomial::Term> out;
    for (const auto& [k, c] : terms) {
      if (c == 0.0) continue;
      Polynomial::Term t;
      t.vars = k;
      t.degree = 4;
      t.coef = c;
      out.push_back(t);
    }
    return Polynomial(std::move(out));
  }
};

// Change of X_i when the chosen pair has classes (p, q).
int pair_delta(SizeClass p, SizeClass q, SizeClass i, int K) {
  const SizeClass sum = class_sum(p, q, K);
  if (!i.is_large()) {
    const int v = i.size();
    return v * ((sum == i ? 1 : 0) - (p == i ? 1 : 0) - (q == i ? 1 : 0));
  }
  if (!sum.is_large()) return 0;
  return (p.is_large() ? 0 : p.size()) + (q.is_large() ? 0 : q.size());
}

std::shared_ptr<const RatePolynomials> compile(int K, const std::vector<std::uint8_t>& member) {
  const int m = K + 1;
  std::vector<Accumulator> drift(m), pair(m * m);
  for (int c1 = 0; c1 < m; ++c1)
    for (int c2 = 0; c2 < m; ++c2)
      for (int c3 = 0; c3 < m; ++c3)
        for (int c4 = 0; c4 < m; ++c4) {
          const bool first = member[((c1 * m + c2) * m + c3) * m + c4] != 0;
          const int p = first ? c1 : c3;
          const int q = first ? c2 : c4;
          const std::array<int, 4> idx{c1, c2, c3, c4};
          const SizeClass cp = SizeClass::from_index(p, K);
          const SizeClass cq = SizeClass::from_index(q, K);
          for (int i = 0; i < m; ++i) {
            const int d = pair_delta(cp, cq, SizeClass::from_index(i, K), K);
            drift[i].add(idx, 0.5 * d);
          }
          // F^x_{i1,i2} collects quadruples whose chosen pair is {i1,i2}.
          pair[p * m + q].add(idx, 0.5);
          if (p != q) pair[q * m + p].add(idx, 0.5);
        }

  auto polys = std::make_shared<RatePolynomials>();
  polys->K = K;
  for (auto& d : drift) polys->drift.push_back(d.finish());
  for (auto& p : pair) polys->pair.push_back(p.finish());
  if (K >= 1) {
    for (int i = 1; i <= K; ++i) {
      // Immigrants of size K+i: unordered pairs {i1 <= i2} of small classes.
      Accumulator acc;
      for (int i1 = 1; i1 <= K; ++i1) {
        const int i2 = K + i - i1;
        if (i2 < i1 || i2 > K) continue;
        for (const auto& t : polys->pair[(i1 - 1) * m + (i2 - 1)].terms())
          acc.add({t.vars[0], t.vars[1], t.vars[2], t.vars[3]}, t.coef);
      }
      polys->immigrate.push_back(acc.finish());
      polys->attach.push_back(polys->pair[(i - 1) * m + K].divided_by(K));
    }
    polys->edge = polys->pair[K * m + K].divided_by(K).divided_by(K);
  }
  return polys;
}

void require_normalized(std::span<const double> x, int K) {
  if (static_cast<int>(x.size()) != K + 1)
    throw DomainError("density vector must have K+1 = " + std::to_string(K + 1) + " entries");
  const double s = std::accumulate(x.begin(), x.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-9) throw DomainError("density vector is not normalized (sum != 1)");
}

}  // namespace

// ---------------------------------------------------------------------------
// Rule

Rule::Rule(int K, std::vector<Quadruple> F) : K_(K), F_(std::move(F)) {
  if (K < 0) throw DomainError("cutoff K must be nonnegative");
  if (K > kMaxK) throw DomainError("cutoff K above supported maximum " + std::to_string(kMaxK));
  for (const auto& q : F_)
    for (const auto& e : q)
      if (!e.is_large() && e.size() > K)
        throw DomainError("quadruple entry " + e.token() + " exceeds K = " + std::to_string(K));
  std::sort(F_.begin(), F_.end());
  F_.erase(std::unique(F_.begin(), F_.end()), F_.end());

  const int m = K + 1;
  member_.assign(static_cast<std::size_t>(m) * m * m * m, 0);
  for (const auto& q : F_)
    member_[((q[0].index(K) * m + q[1].index(K)) * m + q[2].index(K)) * m + q[3].index(K)] = 1;
  polys_ = compile(K, member_);
}

bool Rule::contains(const Quadruple& q) const {
  for (const auto& e : q)
    if (!e.is_large() && e.size() > K_) return false;
  return contains_index(q[0].index(K_), q[1].index(K_), q[2].index(K_), q[3].index(K_));
}

std::uint64_t Rule::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : serialize_rule(*this)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

int delta_jump(const Rule& rule, const Quadruple& j, SizeClass i) {
  const int K = rule.K();
  for (const auto& e : j)
    if (!e.is_large() && e.size() > K) throw DomainError("quadruple entry exceeds K");
  if (!i.is_large() && i.size() > K) throw DomainError("class exceeds K");
  return rule.contains(j) ? pair_delta(j[0], j[1], i, K) : pair_delta(j[2], j[3], i, K);
}

std::vector<double> drift(const Rule& rule, std::span<const double> x, bool strict) {
  if (strict) require_normalized(x, rule.K());
  if (static_cast<int>(x.size()) != rule.num_classes())
    throw DomainError("density vector has the wrong length");
  const auto& polys = rule.polynomials();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = polys.drift[i](x);
  return out;
}

double pair_rate(const Rule& rule, std::span<const double> x, SizeClass i1, SizeClass i2) {
  if (static_cast<int>(x.size()) != rule.num_classes())
    throw DomainError("density vector has the wrong length");
  const int K = rule.K();
  return rule.polynomials().pair_at(i1.index(K), i2.index(K))(x);
}

RatePoint rate_functions_at(const Rule& rule, std::span<const double> x) {
  if (rule.K() < 1) throw DomainError("rate functions need K >= 1");
  if (static_cast<int>(x.size()) != rule.num_classes())
    throw DomainError("density vector has the wrong length");
  const auto& polys = rule.polynomials();
  RatePoint r;
  r.a.resize(rule.K());
  r.c.resize(rule.K());
  for (int i = 0; i < rule.K(); ++i) {
    r.a[i] = polys.immigrate[i](x);
    r.c[i] = polys.attach[i](x);
  }
  r.b = polys.edge(x);
  return r;
}

// ---------------------------------------------------------------------------
// Rule documents

namespace {

std::vector<SizeClass> expand_token(const nlohmann::json& e, int K) {
  if (!e.is_string()) throw DomainError("malformed rule document: quadruple entries must be strings");
  const std::string s = e.get<std::string>();
  std::vector<SizeClass> out;
  if (s == "*") {
    for (int i = 0; i <= K; ++i) out.push_back(SizeClass::from_index(i, K));
    return out;
  }
  if (s == "w") return {SizeClass::large()};
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      s.size() > 6)
    throw DomainError("unknown class token \"" + s + "\" (expected 1..K, w or *)");
  const int v = std::stoi(s);
  if (v < 1 || v > K)
    throw DomainError("class entry \"" + s + "\" out of range for K = " + std::to_string(K));
  return {SizeClass::small(v)};
}

}  // namespace

Rule parse_rule(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError(std::string("malformed rule document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("K") || !doc.contains("quadruples"))
    throw DomainError("malformed rule document: expected {\"K\": int, \"quadruples\": [...]}");
  if (!doc["K"].is_number_integer()) throw DomainError("malformed rule document: K must be an integer");
  const int K = doc["K"].get<int>();
  if (K < 0 || K > Rule::kMaxK) throw DomainError("K out of supported range [0, 16]");
  if (!doc["quadruples"].is_array()) throw DomainError("malformed rule document: quadruples must be a list");

  std::vector<Quadruple> F;
  for (const auto& q : doc["quadruples"]) {
    if (!q.is_array() || q.size() != 4)
      throw DomainError("malformed rule document: each quadruple needs exactly 4 entries");
    std::array<std::vector<SizeClass>, 4> options;
    for (int k = 0; k < 4; ++k) options[k] = expand_token(q[k], K);
    for (auto a : options[0])
      for (auto b : options[1])
        for (auto c : options[2])
          for (auto d : options[3]) F.push_back({a, b, c, d});
  }
  return Rule(K, std::move(F));
}

Rule load_rule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open rule file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rule(ss.str());
}

std::string serialize_rule(const Rule& rule) {
  nlohmann::json doc;
  doc["K"] = rule.K();
  auto qs = nlohmann::json::array();
  for (const auto& q : rule.quadruples())
    qs.push_back({q[0].token(), q[1].token(), q[2].token(), q[3].token()});
  doc["quadruples"] = qs;
  return doc.dump();
}

namespace rules {

Rule erdos_renyi() {
  const auto w = SizeClass::large();
  return Rule(0, {{w, w, w, w}});
}

Rule bohman_frieze() { return parse_rule(R"({"K":1,"quadruples":[["1","1","*","*"]]})"); }

Rule always_first(int K) {
  return parse_rule(R"({"K":)" + std::to_string(K) + R"(,"quadruples":[["*","*","*","*"]]})");
}

}  // namespace rules

}  // namespace bsrlab
