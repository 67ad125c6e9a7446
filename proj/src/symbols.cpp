#include "ioext/symbols.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "ioext/error.hpp"

namespace ioext {

const char* symbol_kind_name(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::kState:
      return "state";
    case SymbolKind::kInput:
      return "input";
    case SymbolKind::kExtraInput:
      return "extra_input";
    case SymbolKind::kControllerState:
      return "controller_state";
    case SymbolKind::kReference:
      return "reference";
    case SymbolKind::kAuxiliary:
      return "auxiliary";
  }
  return "auxiliary";
}

std::optional<SymbolKind> symbol_kind_from_name(std::string_view name) {
  for (SymbolKind k : {SymbolKind::kState, SymbolKind::kInput, SymbolKind::kExtraInput,
                       SymbolKind::kControllerState, SymbolKind::kReference, SymbolKind::kAuxiliary}) {
    if (name == symbol_kind_name(k)) return k;
  }
  return std::nullopt;
}

bool is_valid_identifier(std::string_view name) {
  if (name.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return name != "sin" && name != "cos";
}

void SymbolTable::add(const std::string& name, SymbolKind kind) {
  if (!is_valid_identifier(name)) {
    throw Error(ErrorCode::kInvalidModel, "invalid symbol name '" + name + "'");
  }
  if (contains(name)) {
    throw Error(ErrorCode::kInvalidModel, "symbol '" + name + "' declared twice");
  }
  entries_.push_back({name, kind});
}

void SymbolTable::add_all(const std::vector<std::string>& names, SymbolKind kind) {
  for (const auto& n : names) add(n, kind);
}

bool SymbolTable::contains(std::string_view name) const { return kind_of(name).has_value(); }

std::optional<SymbolKind> SymbolTable::kind_of(std::string_view name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const SymbolEntry& e) { return e.name == name; });
  if (it == entries_.end()) return std::nullopt;
  return it->kind;
}

std::vector<std::string> SymbolTable::names_of(SymbolKind kind) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.kind == kind) out.push_back(e.name);
  }
  return out;
}

void SymbolTable::retag(const std::string& name, SymbolKind kind) {
  for (auto& e : entries_) {
    if (e.name == name) {
      e.kind = kind;
      return;
    }
  }
  throw Error(ErrorCode::kInvalidModel, "cannot retag unknown symbol '" + name + "'");
}

std::string reference_symbol(int component, int order) {
  std::string s = "r" + std::to_string(component);
  if (order > 0) s += "_d" + std::to_string(order);
  return s;
}

std::string measurement_symbol(int component, int order) {
  return "y" + std::to_string(component) + "_d" + std::to_string(order);
}

std::string dot_symbol(const std::string& name) { return name + "_dot"; }

// ---------------------------------------------------------------------------
// Parser
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' integer)?
//   integer := '-'? digits | '(' '-'? digits ')'
//   primary := number | ident | ('sin' | 'cos') '(' expr ')' | '(' expr ')'

namespace {

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& table) : text_(text), table_(table) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what + " at offset " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' but reached end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expr() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+')) {
        terms.push_back(term());
      } else if (accept('-')) {
        terms.push_back(Expr::neg(term()));
      } else {
        break;
      }
    }
    return Expr::add(std::move(terms));
  }

  Expr term() {
    std::vector<Expr> factors{unary()};
    for (;;) {
      if (accept('*')) {
        factors.push_back(unary());
      } else if (accept('/')) {
        Expr lhs = Expr::mul(std::move(factors));
        factors = {Expr::div(lhs, unary())};
      } else {
        break;
      }
    }
    return Expr::mul(std::move(factors));
  }

  Expr unary() {
    if (accept('-')) return Expr::neg(unary());
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return Expr::pow(base, integer());
    return base;
  }

  int integer() {
    skip_ws();
    bool paren = accept('(');
    skip_ws();
    bool negative = accept('-');
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected integer exponent");
    int value = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc()) fail("exponent out of range");
    if (paren) expect(')');
    return negative ? -value : value;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string ident(text_.substr(start, pos_ - start));
      if (ident == "sin" || ident == "cos") {
        expect('(');
        Expr arg = expr();
        expect(')');
        return ident == "sin" ? Expr::sin(arg) : Expr::cos(arg);
      }
      if (!table_.contains(ident)) throw UndeclaredSymbolError(ident, start);
      return Expr::symbol(ident);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      std::size_t exp_start = pos_;
      digits();
      if (exp_start == pos_) pos_ = mark;
    }
    double value = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::constant(value);
  }

  std::string_view text_;
  const SymbolTable& table_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const SymbolTable& table) { return Parser(text, table).parse(); }

}  // namespace ioext
