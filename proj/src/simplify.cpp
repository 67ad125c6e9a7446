#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "ioext/expr.hpp"

namespace ioext {
namespace {

constexpr int kMaxPasses = 16;
constexpr int kMaxExpandPower = 4;
constexpr std::size_t kMaxExpansionTerms = 512;

double int_power(double b, int k) {
  if (k < 0) return 1.0 / int_power(b, -k);
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= b;
  return r;
}

using FactorMap = std::map<Expr, int, ExprLess>;

// coefficient * prod(base^exponent); bases are never Pow or Const nodes
// except for a literal zero kept under a negative exponent.
struct Monomial {
  double coeff = 1.0;
  FactorMap factors;
};

void add_factor(FactorMap& factors, const Expr& base, int k) {
  int& slot = factors[base];
  slot += k;
  if (slot == 0) factors.erase(base);
}

Monomial to_monomial(const Expr& e) {
  Monomial m;
  switch (e.op()) {
    case Op::kConst:
      m.coeff = e.value();
      break;
    case Op::kMul:
      for (const Expr& f : e.args()) {
        if (f.is_constant()) {
          m.coeff *= f.value();
        } else if (f.op() == Op::kPow) {
          add_factor(m.factors, f.arg(0), f.exponent());
        } else {
          add_factor(m.factors, f, 1);
        }
      }
      break;
    case Op::kPow:
      add_factor(m.factors, e.arg(0), e.exponent());
      break;
    default:
      add_factor(m.factors, e, 1);
      break;
  }
  return m;
}

Expr from_monomial(double coeff, const FactorMap& factors) {
  if (coeff == 0.0) return Expr::constant(0.0);
  std::vector<Expr> fs;
  fs.reserve(factors.size() + 1);
  if (coeff != 1.0 || factors.empty()) fs.push_back(Expr::constant(coeff));
  for (const auto& [base, k] : factors) {
    fs.push_back(k == 1 ? base : Expr::pow(base, k));
  }
  return Expr::mul(std::move(fs));
}

Expr simplify_add(const std::vector<Expr>& args);
Expr simplify_mul(const std::vector<Expr>& args);
Expr simplify_pow(const Expr& base, int k);

Expr simplify_mul(const std::vector<Expr>& args) {
  Monomial m;
  std::vector<Expr> sums;
  auto absorb = [&](auto&& self, const Expr& a) -> void {
    switch (a.op()) {
      case Op::kConst:
        m.coeff *= a.value();
        return;
      case Op::kMul:
        for (const Expr& f : a.args()) self(self, f);
        return;
      case Op::kPow:
        if (a.arg(0).op() == Op::kAdd && a.exponent() > 0 && a.exponent() <= kMaxExpandPower) {
          for (int i = 0; i < a.exponent(); ++i) sums.push_back(a.arg(0));
        } else {
          add_factor(m.factors, a.arg(0), a.exponent());
        }
        return;
      case Op::kAdd:
        sums.push_back(a);
        return;
      default:
        add_factor(m.factors, a, 1);
        return;
    }
  };
  for (const Expr& a : args) absorb(absorb, a);
  if (m.coeff == 0.0) return Expr::constant(0.0);
  if (sums.empty()) return from_monomial(m.coeff, m.factors);

  std::size_t estimate = 1;
  for (const Expr& s : sums) {
    estimate *= s.args().size();
    if (estimate > kMaxExpansionTerms) break;
  }
  if (estimate > kMaxExpansionTerms) {
    for (const Expr& s : sums) add_factor(m.factors, s, 1);
    return from_monomial(m.coeff, m.factors);
  }

  std::vector<Expr> terms{from_monomial(m.coeff, m.factors)};
  for (const Expr& s : sums) {
    std::vector<Expr> next;
    next.reserve(terms.size() * s.args().size());
    for (const Expr& t : terms) {
      for (const Expr& a : s.args()) next.push_back(simplify_mul({t, a}));
    }
    terms = std::move(next);
  }
  return simplify_add(terms);
}

// c*sin(a)^2*R + c*cos(a)^2*R -> c*R, repeated until no pair matches.
bool collapse_pythagorean(std::map<Expr, double, ExprLess>& coeffs, double& constant) {
  for (auto it = coeffs.begin(); it != coeffs.end(); ++it) {
    Monomial m = to_monomial(it->first);
    for (const auto& [base, k] : m.factors) {
      if (base.op() != Op::kSin || k < 2) continue;
      FactorMap rest = m.factors;
      add_factor(rest, base, -2);
      FactorMap partner = rest;
      add_factor(partner, Expr::cos(base.arg(0)), 2);
      auto jt = coeffs.find(from_monomial(1.0, partner));
      if (jt == coeffs.end() || jt->second != it->second) continue;
      double c = it->second;
      coeffs.erase(jt);
      coeffs.erase(it);
      if (rest.empty()) {
        constant += c;
      } else {
        coeffs[from_monomial(1.0, rest)] += c;
      }
      return true;
    }
  }
  return false;
}

Expr simplify_add(const std::vector<Expr>& args) {
  double constant = 0.0;
  std::map<Expr, double, ExprLess> coeffs;
  auto absorb = [&](auto&& self, const Expr& a) -> void {
    if (a.op() == Op::kAdd) {
      for (const Expr& t : a.args()) self(self, t);
      return;
    }
    if (a.is_constant()) {
      constant += a.value();
      return;
    }
    Monomial m = to_monomial(a);
    coeffs[from_monomial(1.0, m.factors)] += m.coeff;
  };
  for (const Expr& a : args) absorb(absorb, a);

  for (auto it = coeffs.begin(); it != coeffs.end();) {
    it = it->second == 0.0 ? coeffs.erase(it) : std::next(it);
  }
  while (collapse_pythagorean(coeffs, constant)) {
    for (auto it = coeffs.begin(); it != coeffs.end();) {
      it = it->second == 0.0 ? coeffs.erase(it) : std::next(it);
    }
  }

  std::vector<Expr> terms;
  terms.reserve(coeffs.size() + 1);
  if (constant != 0.0) terms.push_back(Expr::constant(constant));
  for (const auto& [key, c] : coeffs) {
    if (c == 1.0) {
      terms.push_back(key);
    } else {
      terms.push_back(from_monomial(c, to_monomial(key).factors));
    }
  }
  if (terms.empty()) return Expr::constant(0.0);
  return Expr::add(std::move(terms));
}

Expr simplify_pow(const Expr& base, int k) {
  if (k == 0) return Expr::constant(1.0);
  if (k == 1) return base;
  switch (base.op()) {
    case Op::kConst:
      if (base.value() == 0.0 && k < 0) return Expr::pow(base, k);
      return Expr::constant(int_power(base.value(), k));
    case Op::kPow:
      return simplify_pow(base.arg(0), base.exponent() * k);
    case Op::kMul: {
      Monomial m = to_monomial(base);
      FactorMap scaled;
      for (const auto& [b, e] : m.factors) scaled[b] = e * k;
      return simplify_mul({from_monomial(int_power(m.coeff, k), scaled)});
    }
    case Op::kAdd:
      if (k > 1 && k <= kMaxExpandPower) return simplify_mul(std::vector<Expr>(k, base));
      return Expr::pow(base, k);
    default:
      return Expr::pow(base, k);
  }
}

bool is_negated_form(const Expr& e) {
  if (e.is_constant()) return std::signbit(e.value());
  return e.op() == Op::kMul && e.arg(0).is_constant() && std::signbit(e.arg(0).value());
}

Expr simplify_once(const Expr& e) {
  switch (e.op()) {
    case Op::kConst:
    case Op::kSymbol:
      return e;
    case Op::kAdd:
    case Op::kMul: {
      std::vector<Expr> args;
      args.reserve(e.args().size());
      for (const Expr& a : e.args()) args.push_back(simplify_once(a));
      return e.op() == Op::kAdd ? simplify_add(args) : simplify_mul(args);
    }
    case Op::kPow:
      return simplify_pow(simplify_once(e.arg(0)), e.exponent());
    case Op::kNeg:
      return simplify_mul({Expr::constant(-1.0), simplify_once(e.arg(0))});
    case Op::kDiv:
      return simplify_mul({simplify_once(e.arg(0)), simplify_pow(simplify_once(e.arg(1)), -1)});
    case Op::kSin: {
      Expr a = simplify_once(e.arg(0));
      if (a.is_constant()) return Expr::constant(std::sin(a.value()));
      if (is_negated_form(a)) {
        Expr flipped = simplify_mul({Expr::constant(-1.0), a});
        return simplify_mul({Expr::constant(-1.0), Expr::sin(flipped)});
      }
      return Expr::sin(a);
    }
    case Op::kCos: {
      Expr a = simplify_once(e.arg(0));
      if (a.is_constant()) return Expr::constant(std::cos(a.value()));
      if (is_negated_form(a)) return Expr::cos(simplify_mul({Expr::constant(-1.0), a}));
      return Expr::cos(a);
    }
  }
  return e;
}

}  // namespace

Expr simplify(const Expr& e) {
  Expr current = simplify_once(e);
  for (int pass = 1; pass < kMaxPasses; ++pass) {
    Expr next = simplify_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

}  // namespace ioext
