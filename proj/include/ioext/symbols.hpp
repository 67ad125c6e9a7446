#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ioext/expr.hpp"

namespace ioext {

enum class SymbolKind {
  kState,
  kInput,
  kExtraInput,
  kControllerState,
  kReference,
  kAuxiliary,
};

const char* symbol_kind_name(SymbolKind kind);
std::optional<SymbolKind> symbol_kind_from_name(std::string_view name);

struct SymbolEntry {
  std::string name;
  SymbolKind kind;
};

// Ordered, category-tagged symbol declarations. Names are unique across
// categories; insertion order is preserved within and across categories.
class SymbolTable {
 public:
  SymbolTable() = default;

  // Throws Error(kInvalidModel) on a duplicate or malformed name.
  void add(const std::string& name, SymbolKind kind);
  void add_all(const std::vector<std::string>& names, SymbolKind kind);

  bool contains(std::string_view name) const;
  std::optional<SymbolKind> kind_of(std::string_view name) const;
  std::vector<std::string> names_of(SymbolKind kind) const;
  const std::vector<SymbolEntry>& entries() const { return entries_; }

  // Re-tags an existing symbol (used when an input becomes a state).
  void retag(const std::string& name, SymbolKind kind);

 private:
  std::vector<SymbolEntry> entries_;
};

bool is_valid_identifier(std::string_view name);

// Reference signal component j (1-based) at derivative order i: r1, r1_d1, ...
std::string reference_symbol(int component, int order);
// Measured y1 component j at derivative order i: y1_d0, y1_d1, ...
std::string measurement_symbol(int component, int order);
// Time derivative of an input or extra input: u1 -> u1_dot.
std::string dot_symbol(const std::string& name);

// Parses the expression grammar; every identifier must be declared.
Expr parse_expr(std::string_view text, const SymbolTable& table);

}  // namespace ioext
