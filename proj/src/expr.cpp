#include "ioext/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <ostream>
#include <utility>

#include "ioext/error.hpp"

namespace ioext {

struct Expr::Node {
  Op op = Op::kConst;
  double value = 0.0;
  int exponent = 0;
  std::string name;
  std::vector<Expr> args;
  std::size_t hash = 0;
  std::size_t size = 1;
};

namespace {

std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

std::shared_ptr<const Expr::Node> finish(std::shared_ptr<Expr::Node> node) {
  std::size_t h = std::hash<int>{}(static_cast<int>(node->op));
  switch (node->op) {
    case Op::kConst:
      h = mix(h, std::hash<double>{}(node->value));
      break;
    case Op::kSymbol:
      h = mix(h, std::hash<std::string>{}(node->name));
      break;
    default:
      break;
  }
  h = mix(h, std::hash<int>{}(node->exponent));
  for (const Expr& a : node->args) {
    h = mix(h, a.hash());
    node->size += a.size();
  }
  node->hash = h;
  return node;
}

std::shared_ptr<Expr::Node> make_node(Op op) {
  auto node = std::make_shared<Expr::Node>();
  node->op = op;
  return node;
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}
Expr::Expr(double value) : Expr(constant(value)) {}
Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
  auto node = make_node(Op::kConst);
  node->value = value;
  return Expr(finish(std::move(node)));
}

Expr Expr::symbol(std::string name) {
  auto node = make_node(Op::kSymbol);
  node->name = std::move(name);
  return Expr(finish(std::move(node)));
}

Expr Expr::add(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  auto node = make_node(Op::kAdd);
  node->args = std::move(terms);
  return Expr(finish(std::move(node)));
}

Expr Expr::mul(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  auto node = make_node(Op::kMul);
  node->args = std::move(factors);
  return Expr(finish(std::move(node)));
}

Expr Expr::pow(Expr base, int exponent) {
  auto node = make_node(Op::kPow);
  node->exponent = exponent;
  node->args = {std::move(base)};
  return Expr(finish(std::move(node)));
}

Expr Expr::neg(Expr operand) {
  auto node = make_node(Op::kNeg);
  node->args = {std::move(operand)};
  return Expr(finish(std::move(node)));
}

Expr Expr::div(Expr numerator, Expr denominator) {
  auto node = make_node(Op::kDiv);
  node->args = {std::move(numerator), std::move(denominator)};
  return Expr(finish(std::move(node)));
}

Expr Expr::sin(Expr argument) {
  auto node = make_node(Op::kSin);
  node->args = {std::move(argument)};
  return Expr(finish(std::move(node)));
}

Expr Expr::cos(Expr argument) {
  auto node = make_node(Op::kCos);
  node->args = {std::move(argument)};
  return Expr(finish(std::move(node)));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
int Expr::exponent() const { return node_->exponent; }
std::span<const Expr> Expr::args() const { return node_->args; }
std::size_t Expr::hash() const { return node_->hash; }
std::size_t Expr::size() const { return node_->size; }

int compare(const Expr& a, const Expr& b) {
  if (&a == &b) return 0;
  if (a.op() != b.op()) return a.op() < b.op() ? -1 : 1;
  switch (a.op()) {
    case Op::kConst:
      if (a.value() == b.value()) return 0;
      return a.value() < b.value() ? -1 : 1;
    case Op::kSymbol: {
      int c = a.name().compare(b.name());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    default:
      break;
  }
  auto aa = a.args();
  auto ba = b.args();
  std::size_t n = std::min(aa.size(), ba.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare(aa[i], ba[i]);
    if (c != 0) return c;
  }
  if (aa.size() != ba.size()) return aa.size() < ba.size() ? -1 : 1;
  if (a.exponent() != b.exponent()) return a.exponent() < b.exponent() ? -1 : 1;
  return 0;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.hash() != b.hash()) return false;
  return compare(a, b) == 0;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::add({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::add({a, Expr::neg(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::mul({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::div(a, b); }
Expr operator-(const Expr& a) { return Expr::neg(a); }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

constexpr int kPrecAdd = 1;
constexpr int kPrecMul = 2;
constexpr int kPrecPow = 3;
constexpr int kPrecAtom = 4;

bool is_negative_pow(const Expr& e) { return e.op() == Op::kPow && e.exponent() < 0; }

bool looks_negative(const Expr& e) {
  switch (e.op()) {
    case Op::kConst:
      return std::signbit(e.value());
    case Op::kNeg:
      return true;
    case Op::kMul:
      return e.arg(0).is_constant() && std::signbit(e.arg(0).value());
    default:
      return false;
  }
}

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::kConst:
      return std::signbit(e.value()) ? kPrecMul : kPrecAtom;
    case Op::kSymbol:
    case Op::kSin:
    case Op::kCos:
      return kPrecAtom;
    case Op::kPow:
      return e.exponent() < 0 ? kPrecMul : kPrecPow;
    case Op::kMul:
    case Op::kNeg:
    case Op::kDiv:
      return kPrecMul;
    case Op::kAdd:
      return kPrecAdd;
  }
  return kPrecAtom;
}

std::string print(const Expr& e, int context);

std::string print_power(const Expr& base, int k) {
  std::string s = print(base, kPrecAtom);
  if (k != 1) s += "^" + std::to_string(k);
  return s;
}

std::string print_mul(std::span<const Expr> args, bool negate_coefficient) {
  std::vector<std::string> num;
  std::vector<std::string> den;
  std::string prefix;
  std::size_t start = 0;
  if (!args.empty() && args[0].is_constant()) {
    double c = args[0].value();
    if (negate_coefficient) c = -c;
    start = 1;
    if (std::signbit(c)) {
      prefix = "-";
      c = -c;
    }
    if (c != 1.0 || args.size() == 1) num.push_back(format_number(c));
  }
  for (std::size_t i = start; i < args.size(); ++i) {
    const Expr& a = args[i];
    if (is_negative_pow(a)) {
      den.push_back(print_power(a.arg(0), -a.exponent()));
    } else {
      num.push_back(print(a, kPrecPow));
    }
  }
  std::string s = prefix;
  if (num.empty()) {
    s += "1";
  } else {
    for (std::size_t i = 0; i < num.size(); ++i) {
      if (i) s += "*";
      s += num[i];
    }
  }
  if (!den.empty()) {
    s += "/";
    if (den.size() > 1) s += "(";
    for (std::size_t i = 0; i < den.size(); ++i) {
      if (i) s += "*";
      s += den[i];
    }
    if (den.size() > 1) s += ")";
  }
  return s;
}

std::string print_negated(const Expr& e) {
  switch (e.op()) {
    case Op::kConst:
      return format_number(-e.value());
    case Op::kNeg:
      return print(e.arg(0), kPrecMul + 1);
    case Op::kMul:
      return print_mul(e.args(), true);
    default:
      return "(" + print(e, 0) + ")";
  }
}

std::string print(const Expr& e, int context) {
  std::string s;
  switch (e.op()) {
    case Op::kConst:
      s = format_number(e.value());
      break;
    case Op::kSymbol:
      s = e.name();
      break;
    case Op::kSin:
      s = "sin(" + print(e.arg(0), 0) + ")";
      break;
    case Op::kCos:
      s = "cos(" + print(e.arg(0), 0) + ")";
      break;
    case Op::kPow:
      if (e.exponent() < 0) {
        s = "1/" + print_power(e.arg(0), -e.exponent());
      } else {
        s = print_power(e.arg(0), e.exponent());
      }
      break;
    case Op::kMul:
      s = print_mul(e.args(), false);
      break;
    case Op::kNeg:
      s = "-" + print(e.arg(0), kPrecPow);
      break;
    case Op::kDiv:
      s = print(e.arg(0), kPrecMul) + "/" + print(e.arg(1), kPrecPow);
      break;
    case Op::kAdd: {
      auto args = e.args();
      s = print(args[0], kPrecAdd);
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (looks_negative(args[i])) {
          s += " - " + print_negated(args[i]);
        } else {
          s += " + " + print(args[i], kPrecAdd + 1);
        }
      }
      break;
    }
  }
  if (precedence(e) < context) return "(" + s + ")";
  return s;
}

}  // namespace

std::string to_string(const Expr& e) { return print(e, 0); }

std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << to_string(e); }

// ---------------------------------------------------------------------------
// Structural utilities

bool contains_symbol(const Expr& e, const std::string& symbol) {
  if (e.op() == Op::kSymbol) return e.name() == symbol;
  for (const Expr& a : e.args()) {
    if (contains_symbol(a, symbol)) return true;
  }
  return false;
}

namespace {

void collect_symbols(const Expr& e, std::set<std::string>& out) {
  if (e.op() == Op::kSymbol) {
    out.insert(e.name());
    return;
  }
  for (const Expr& a : e.args()) collect_symbols(a, out);
}

Expr rebuild(const Expr& e, std::vector<Expr> args) {
  switch (e.op()) {
    case Op::kAdd:
      return Expr::add(std::move(args));
    case Op::kMul:
      return Expr::mul(std::move(args));
    case Op::kPow:
      return Expr::pow(std::move(args[0]), e.exponent());
    case Op::kNeg:
      return Expr::neg(std::move(args[0]));
    case Op::kDiv:
      return Expr::div(std::move(args[0]), std::move(args[1]));
    case Op::kSin:
      return Expr::sin(std::move(args[0]));
    case Op::kCos:
      return Expr::cos(std::move(args[0]));
    default:
      return e;
  }
}

Expr differentiate_raw(const Expr& e, const std::string& s) {
  if (!contains_symbol(e, s)) return Expr::constant(0.0);
  switch (e.op()) {
    case Op::kConst:
      return Expr::constant(0.0);
    case Op::kSymbol:
      return Expr::constant(1.0);
    case Op::kAdd: {
      std::vector<Expr> terms;
      for (const Expr& a : e.args()) {
        if (contains_symbol(a, s)) terms.push_back(differentiate_raw(a, s));
      }
      return Expr::add(std::move(terms));
    }
    case Op::kMul: {
      std::vector<Expr> terms;
      auto args = e.args();
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!contains_symbol(args[i], s)) continue;
        std::vector<Expr> factors(args.begin(), args.end());
        factors[i] = differentiate_raw(args[i], s);
        terms.push_back(Expr::mul(std::move(factors)));
      }
      return Expr::add(std::move(terms));
    }
    case Op::kPow: {
      const Expr& b = e.arg(0);
      int k = e.exponent();
      return Expr::mul({Expr::constant(k), Expr::pow(b, k - 1), differentiate_raw(b, s)});
    }
    case Op::kNeg:
      return Expr::neg(differentiate_raw(e.arg(0), s));
    case Op::kDiv: {
      const Expr& a = e.arg(0);
      const Expr& b = e.arg(1);
      Expr num = differentiate_raw(a, s) * b - a * differentiate_raw(b, s);
      return Expr::div(num, Expr::pow(b, 2));
    }
    case Op::kSin:
      return Expr::cos(e.arg(0)) * differentiate_raw(e.arg(0), s);
    case Op::kCos:
      return Expr::neg(Expr::sin(e.arg(0)) * differentiate_raw(e.arg(0), s));
  }
  return Expr::constant(0.0);
}

}  // namespace

std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& replacements) {
  if (e.op() == Op::kSymbol) {
    auto it = replacements.find(e.name());
    return it == replacements.end() ? e : it->second;
  }
  if (e.args().empty()) return e;
  std::vector<Expr> args;
  args.reserve(e.args().size());
  bool changed = false;
  for (const Expr& a : e.args()) {
    args.push_back(substitute(a, replacements));
    changed = changed || !(args.back() == a);
  }
  return changed ? rebuild(e, std::move(args)) : e;
}

Expr differentiate(const Expr& e, const std::string& symbol) {
  return simplify(differentiate_raw(e, symbol));
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double ipow(double b, int k) {
  if (k == 0) return 1.0;
  double r = b;
  for (int i = 1; i < k; ++i) r *= b;
  return r;
}

[[noreturn]] void throw_div_zero() { throw Error(ErrorCode::kDivisionByZero, "division by zero"); }

double checked_div(double num, double den) {
  if (den == 0.0) throw_div_zero();
  return num / den;
}

double eval_pow(double b, int k) {
  if (k >= 0) return ipow(b, k);
  return checked_div(1.0, ipow(b, -k));
}

double eval_rec(const Expr& e, const Assignment& a) {
  switch (e.op()) {
    case Op::kConst:
      return e.value();
    case Op::kSymbol: {
      auto it = a.find(e.name());
      if (it == a.end()) throw Error(ErrorCode::kMissingSymbol, "no value for symbol '" + e.name() + "'");
      return it->second;
    }
    case Op::kAdd: {
      double s = 0.0;
      for (const Expr& t : e.args()) s += eval_rec(t, a);
      return s;
    }
    case Op::kMul: {
      double num = 1.0;
      double den = 1.0;
      bool has_den = false;
      for (const Expr& f : e.args()) {
        if (is_negative_pow(f)) {
          den *= ipow(eval_rec(f.arg(0), a), -f.exponent());
          has_den = true;
        } else {
          num *= eval_rec(f, a);
        }
      }
      return has_den ? checked_div(num, den) : num;
    }
    case Op::kPow:
      return eval_pow(eval_rec(e.arg(0), a), e.exponent());
    case Op::kNeg:
      return -eval_rec(e.arg(0), a);
    case Op::kDiv: {
      double num = eval_rec(e.arg(0), a);
      return checked_div(num, eval_rec(e.arg(1), a));
    }
    case Op::kSin:
      return std::sin(eval_rec(e.arg(0), a));
    case Op::kCos:
      return std::cos(eval_rec(e.arg(0), a));
  }
  return 0.0;
}

}  // namespace

double eval_expr(const Expr& e, const Assignment& assignment) { return eval_rec(e, assignment); }

CompiledExpr::CompiledExpr(const Expr& e, const SlotIndex& slots) {
  emit(e, slots);
  std::size_t depth = 0;
  for (const Instr& ins : program_) {
    switch (ins.code) {
      case Code::kConst:
      case Code::kLoad:
        ++depth;
        break;
      case Code::kAdd:
      case Code::kMul:
        depth = depth - ins.count + 1;
        break;
      case Code::kDivChecked:
        --depth;
        break;
      default:
        break;
    }
    max_stack_ = std::max(max_stack_, depth);
  }
}

void CompiledExpr::emit(const Expr& e, const SlotIndex& slots) {
  switch (e.op()) {
    case Op::kConst:
      program_.push_back({Code::kConst, 0, 0, e.value()});
      return;
    case Op::kSymbol: {
      auto it = slots.find(e.name());
      if (it == slots.end()) throw Error(ErrorCode::kMissingSymbol, "no slot for symbol '" + e.name() + "'");
      program_.push_back({Code::kLoad, static_cast<std::uint32_t>(it->second), 0, 0.0});
      return;
    }
    case Op::kAdd:
      for (const Expr& t : e.args()) emit(t, slots);
      program_.push_back({Code::kAdd, static_cast<std::uint32_t>(e.args().size()), 0, 0.0});
      return;
    case Op::kMul: {
      std::uint32_t nnum = 0;
      std::uint32_t nden = 0;
      for (const Expr& f : e.args()) {
        if (!is_negative_pow(f)) {
          emit(f, slots);
          ++nnum;
        }
      }
      program_.push_back({Code::kMul, nnum, 0, 0.0});
      for (const Expr& f : e.args()) {
        if (is_negative_pow(f)) {
          emit(f.arg(0), slots);
          program_.push_back({Code::kPow, 0, -f.exponent(), 0.0});
          ++nden;
        }
      }
      if (nden > 0) {
        program_.push_back({Code::kMul, nden, 0, 0.0});
        program_.push_back({Code::kDivChecked, 0, 0, 0.0});
      }
      return;
    }
    case Op::kPow:
      emit(e.arg(0), slots);
      program_.push_back({Code::kPow, 0, e.exponent(), 0.0});
      return;
    case Op::kNeg:
      emit(e.arg(0), slots);
      program_.push_back({Code::kNeg, 0, 0, 0.0});
      return;
    case Op::kDiv:
      emit(e.arg(0), slots);
      emit(e.arg(1), slots);
      program_.push_back({Code::kDivChecked, 0, 0, 0.0});
      return;
    case Op::kSin:
      emit(e.arg(0), slots);
      program_.push_back({Code::kSin, 0, 0, 0.0});
      return;
    case Op::kCos:
      emit(e.arg(0), slots);
      program_.push_back({Code::kCos, 0, 0, 0.0});
      return;
  }
}

double CompiledExpr::operator()(std::span<const double> slots) const {
  // Small fixed buffer covers every expression this toolkit builds; fall back
  // to the heap for anything deeper.
  double local[64];
  std::vector<double> heap;
  double* stack = local;
  if (max_stack_ + 1 > 64) {
    heap.resize(max_stack_ + 1);
    stack = heap.data();
  }
  std::size_t sp = 0;
  for (const Instr& ins : program_) {
    switch (ins.code) {
      case Code::kConst:
        stack[sp++] = ins.value;
        break;
      case Code::kLoad:
        stack[sp++] = slots[ins.count];
        break;
      case Code::kAdd: {
        double s = 0.0;
        std::size_t base = sp - ins.count;
        for (std::size_t i = base; i < sp; ++i) s += stack[i];
        sp = base;
        stack[sp++] = s;
        break;
      }
      case Code::kMul: {
        double p = 1.0;
        std::size_t base = sp - ins.count;
        for (std::size_t i = base; i < sp; ++i) p *= stack[i];
        sp = base;
        stack[sp++] = p;
        break;
      }
      case Code::kDivChecked: {
        double den = stack[--sp];
        stack[sp - 1] = checked_div(stack[sp - 1], den);
        break;
      }
      case Code::kPow:
        stack[sp - 1] = eval_pow(stack[sp - 1], ins.exponent);
        break;
      case Code::kNeg:
        stack[sp - 1] = -stack[sp - 1];
        break;
      case Code::kSin:
        stack[sp - 1] = std::sin(stack[sp - 1]);
        break;
      case Code::kCos:
        stack[sp - 1] = std::cos(stack[sp - 1]);
        break;
    }
  }
  return program_.empty() ? 0.0 : stack[0];
}

}  // namespace ioext
