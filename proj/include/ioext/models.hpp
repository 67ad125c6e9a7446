#pragma once

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ioext/matrix.hpp"
#include "ioext/model.hpp"
#include "ioext/simulate.hpp"

namespace ioext {

// Direction (h1, h2, h3) of the extra input in the unicycle, written over x1
// (the heading).
struct DirectionTriple {
  std::string h1 = "0";
  std::string h2 = "0";
  std::string h3 = "0";
};

// (-sin x1, cos x1, 0).
DirectionTriple admissible_direction();

// Heading x1, sagittal speed u1, turn rate u2, extra input w1.
//   dx1/dt = u2 + h3 w1,  y1 = (u1 cos x1 + h1 w1, u1 sin x1 + h2 w1),  y2 = x1
SystemModel unicycle(const DirectionTriple& h);

// [-sin x1/u1, cos x1/u1] . (h1, h2), simplified.
Expr lambda_of(const DirectionTriple& h);

// h(x1)^T (v_x, v_y, dx1/dt) at every sample of a unicycle trace.
std::vector<double> rolling_constraint_residual(const SimulationTrace& trace, const DirectionTriple& h);

// Hand-derived unicycle matrices with the direction substituted.
struct GoldenMatrices {
  ExprMatrix A1;
  ExprMatrix N1;
  ExprMatrix N2;
  ExprVector n;
  ExprMatrix Gamma1;
  ExprMatrix Gamma;
  ExprMatrix Q;
  Expr lambda;
};

// The fixture uses placeholders h1 h2 h3 and dh1 dh2 (derivatives of h1, h2
// with respect to x1).
GoldenMatrices parse_unicycle_golden(std::string_view text, const DirectionTriple& h);
GoldenMatrices load_unicycle_golden(const std::string& path, const DirectionTriple& h);
std::string default_golden_path();

struct OracleSystem {
  SystemModel model;
  std::vector<int> r1;  // relative degrees of y1 w.r.t. u
  std::vector<int> r2;  // relative degrees of y2 w.r.t. u (empty when m2 = 0)
  ExprMatrix A1;        // hand-derived decoupling blocks
  ExprMatrix B1;
  ExprMatrix A2;
  ExprMatrix B2;
  ExprMatrix Gamma;     // case-1 Gamma (empty when m2 = 0)
};

// Small linear systems with hand-computed relative degrees and Gamma.
std::vector<OracleSystem> linear_oracle_suite();

// n = 3, m1 = m2 = 1, r1 = r2 = 1 with integer coefficients. When `degenerate`
// the y2 row is projected so that B2 - A2 A1^-1 B1 vanishes.
SystemModel random_linear_case1(std::mt19937_64& rng, bool degenerate);

}  // namespace ioext
