#pragma once

#include <set>
#include <string>
#include <vector>

#include "ioext/matrix.hpp"
#include "ioext/symbols.hpp"

namespace ioext {

// Control-affine system with two output blocks and an extra input channel:
//
//   dx/dt = f(x) + G(x) u + H(x) w
//   y1    = h1(x) + Abar1(x) u + Bbar1(x) w
//   y2    = h2(x) + Abar2(x) u + Bbar2(x) w
struct SystemModel {
  std::string id;
  SymbolTable table;
  std::vector<std::string> states;
  std::vector<std::string> inputs;
  std::vector<std::string> extras;

  ExprVector f;
  ExprMatrix G;
  ExprMatrix H;
  ExprVector h1;
  ExprVector h2;
  ExprMatrix Abar1;
  ExprMatrix Abar2;
  ExprMatrix Bbar1;
  ExprMatrix Bbar2;

  // Values for states (and for inputs that dynamic extension may promote to
  // states). Missing entries default to 0, or 1 for singular coordinates.
  Assignment operating_point;
  // Coordinates whose vanishing makes the construction singular; sampling
  // keeps them away from zero.
  std::set<std::string> singular;
  // Output channel indices (0-based over the stacked (y1, y2)) that are
  // angles and are compared modulo 2*pi.
  std::set<int> angular_outputs;

  int n() const { return static_cast<int>(states.size()); }
  int m1() const { return static_cast<int>(inputs.size()); }
  int m2() const { return static_cast<int>(extras.size()); }

  double operating_value(const std::string& symbol) const;
  // Operating values for states, inputs and extras.
  Assignment operating_assignment() const;

  // Throws Error(kInvalidModel) on shape errors or undeclared symbols. Returns
  // human-readable warnings for violated soft invariants (underactuation
  // count, rank of G at the operating point).
  std::vector<std::string> validate() const;
};

// Builds the symbol table from states/inputs/extras and fills zero matrices of
// the right shape for any member left empty.
void finalize_model(SystemModel& model);

}  // namespace ioext
