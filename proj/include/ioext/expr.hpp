#pragma once

// Symbolic scalar expressions over named symbols.
//
// An Expr is an immutable tree shared by reference counting. Node kinds are
// constants, symbols, n-ary sums and products, integer powers, negation,
// quotients, sin and cos. Construction never simplifies; call simplify() to
// bring an expression into the canonical sum-of-products form used by the rest
// of the toolkit.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ioext {

enum class Op : std::uint8_t { kConst, kSymbol, kSin, kCos, kPow, kMul, kAdd, kNeg, kDiv };

class Expr {
 public:
  Expr();  // the constant 0
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr constant(double value);
  static Expr symbol(std::string name);
  static Expr add(std::vector<Expr> terms);
  static Expr mul(std::vector<Expr> factors);
  static Expr pow(Expr base, int exponent);
  static Expr neg(Expr operand);
  static Expr div(Expr numerator, Expr denominator);
  static Expr sin(Expr argument);
  static Expr cos(Expr argument);

  Op op() const;
  double value() const;
  const std::string& name() const;
  int exponent() const;
  std::span<const Expr> args() const;
  const Expr& arg(std::size_t i) const { return args()[i]; }
  std::size_t hash() const;
  std::size_t size() const;  // node count

  bool is_constant() const { return op() == Op::kConst; }
  bool is_constant(double v) const { return is_constant() && value() == v; }
  bool is_zero() const { return is_constant(0.0); }
  bool is_one() const { return is_constant(1.0); }
  bool is_symbol() const { return op() == Op::kSymbol; }

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

  struct Node;  // defined in expr.cpp

 private:
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// Total structural order; used for canonical sorting.
int compare(const Expr& a, const Expr& b);

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

std::string to_string(const Expr& e);
std::ostream& operator<<(std::ostream& os, const Expr& e);

// Partial derivative, simplified.
Expr differentiate(const Expr& e, const std::string& symbol);

// Terminating rewrite to canonical form: constant folding, 0/1 identities,
// flattening, like-term and like-factor collection, distribution of products
// over sums, and sin(a)^2 + cos(a)^2 -> 1 for matching cofactors.
Expr simplify(const Expr& e);

// Replace symbols by expressions (no simplification).
Expr substitute(const Expr& e, const std::map<std::string, Expr>& replacements);

std::set<std::string> free_symbols(const Expr& e);
bool contains_symbol(const Expr& e, const std::string& symbol);

using Assignment = std::unordered_map<std::string, double>;

// IEEE double evaluation. Throws Error(kDivisionByZero) on a zero divisor and
// Error(kMissingSymbol) for an unassigned symbol.
double eval_expr(const Expr& e, const Assignment& assignment);

using SlotIndex = std::unordered_map<std::string, std::size_t>;

// Flattened postfix program over a slot vector. Produces bit-identical results
// to eval_expr for the same values.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, const SlotIndex& slots);

  double operator()(std::span<const double> slots) const;

 private:
  enum class Code : std::uint8_t { kConst, kLoad, kAdd, kMul, kDivChecked, kPow, kNeg, kSin, kCos };
  struct Instr {
    Code code;
    std::uint32_t count = 0;
    int exponent = 0;
    double value = 0.0;
  };
  void emit(const Expr& e, const SlotIndex& slots);

  std::vector<Instr> program_;
  std::size_t max_stack_ = 0;
};

}  // namespace ioext
