#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ioext/lie.hpp"
#include "ioext/matrix.hpp"
#include "ioext/model.hpp"

namespace ioext {

struct FeasibilityCertificate {
  Expr condition;
  double value_at_x0 = 0.0;
  bool feasible = false;
  bool constant_rank = false;
  std::string singular_set_note;
  // Case 2 only: the same determinant built with the y2 decoupling matrix of
  // the unextended system.
  std::optional<Expr> condition_unextended;
  std::optional<double> value_unextended_at_x0;
  std::optional<bool> variants_agree;
};

struct InternalController {
  enum class Kind { kStatic, kDynamic };
  Kind kind = Kind::kStatic;
  int k1 = 0;
  std::vector<Eigen::MatrixXd> gains;
  // Names of the signals the law drives (case 1: the plant inputs; case 2:
  // the integrator inputs followed by the undelayed plant inputs).
  std::vector<std::string> input_names;
  ExprVector u_expr;
  std::vector<std::string> xi_names;
  ExprVector xi_dynamics;
};

// Everything needed to integrate the interconnection, independent of the
// synthesis pipeline that produced it. Expressions range over the symbols of
// `table`; evaluation order is measurements, then internal_law, then the rest.
struct ClosedLoop {
  SymbolTable table;
  int m1 = 0;
  int m2 = 0;
  std::vector<std::string> base_states;   // original plant state x
  std::vector<std::string> xi_states;     // integrator states
  std::vector<std::string> extra_states;  // integrated extra inputs
  std::vector<std::string> plant_states;  // base, xi, extra
  std::vector<std::string> reference_states;
  std::vector<std::string> reference_rhs;  // d/dt of each reference state (symbol name)
  std::vector<std::string> inputs;         // u_ext
  std::vector<std::pair<std::string, Expr>> measurements;
  std::vector<std::pair<std::string, Expr>> internal_law;
  ExprVector plant_rhs;
  std::vector<std::pair<std::string, Expr>> original_inputs;
  std::vector<std::pair<std::string, Expr>> extra_values;  // w
  ExprVector outputs;
  std::vector<int> rho;
  std::vector<ExprVector> output_derivatives;  // orders 0..rho-1, state functions
  ExprMatrix gamma;
  ExprVector phi;
  std::set<std::string> singular;
  std::set<int> angular_outputs;
  Assignment operating_point;
};

struct SynthesisResult {
  int case_id = 1;
  std::string model_id;
  InternalController controller;
  ExprMatrix Gamma;
  ExprVector phi;
  std::vector<std::string> extended_state_layout;
  std::vector<std::string> u_ext_layout;
  FeasibilityCertificate feasibility;
  std::vector<int> input_permutation;  // original input index at each position
  std::vector<int> r1;
  std::vector<int> r2;
  std::map<std::string, ExprMatrix> intermediates;
  ClosedLoop loop;
};

struct SynthesisOptions {
  std::vector<Eigen::MatrixXd> gains;  // empty: default_gain * I
  double default_gain = 5.0;
  SamplingOptions sampling;
};

std::vector<Eigen::MatrixXd> default_gains(std::size_t count, int m1, double k = 5.0);
// Throws Error(kGainNotPositiveDefinite) or Error(kInvalidModel) on count or
// shape mismatch.
void check_gains(const std::vector<Eigen::MatrixXd>& gains, std::size_t count, int m1);

struct InputTransformation {
  std::vector<int> permutation;  // original column index at each position
  int k1 = 0;
  ExprMatrix M;  // permutation matrix with v = M u
};

// Column permutation moving the identically-zero columns of A1 last. Throws
// Error(kNotApplicable) when A1 is regular and Error(kNotColumnDegenerate)
// when rank deficiency does not show up as zero columns.
InputTransformation input_transformation(const ExprMatrix& A1, const SystemModel& m, const SamplingOptions& opt = {});

SystemModel permute_inputs(const SystemModel& m, const std::vector<int>& permutation);
// The first k1 inputs become integrator states driven by new inputs named
// <input>_dot; the state becomes (x, xi).
SystemModel dynamic_extension(const SystemModel& m, int k1);
// The extra inputs become states driven by new extra inputs <w>_dot; their
// feedthrough moves into the output state parts.
SystemModel extend_extra_inputs(const SystemModel& m);

// Raises Error(kCaseMismatch) when A1 is singular at the operating point.
SynthesisResult synth_case1(const SystemModel& m, const SynthesisOptions& opt = {});
// Raises Error(kN1Singular) when N1 is singular at the operating point.
SynthesisResult synth_case2(const SystemModel& m, const SynthesisOptions& opt = {});

enum class CaseHint { kAuto, kCase1, kCase2 };
SynthesisResult synthesize(const SystemModel& m, CaseHint hint = CaseHint::kAuto, const SynthesisOptions& opt = {});

FeasibilityCertificate feasibility_case1(const SystemModel& m, const SynthesisResult& s,
                                         const SamplingOptions& opt = {});
FeasibilityCertificate feasibility_case2(const SystemModel& m, const SynthesisResult& s,
                                         const SamplingOptions& opt = {});

struct RoleSwapColumn {
  std::string input;
  std::vector<std::string> rows;  // output channel labels with nonzero entries
  bool reaches_y1 = false;
  bool reaches_y2 = false;
};

struct RoleSwapReport {
  std::vector<RoleSwapColumn> columns;
  bool extra_inputs_confined_to_y1 = false;
  bool virtual_inputs_reach_y2 = false;
};

RoleSwapReport role_swap_report(const SynthesisResult& s, const SamplingOptions& opt = {});

// Term-by-term split of the case-2 derivative of y1 (n1, n2, phi_a,
// Dbar1, the two parts of dA1/dt and dB1/dt), built directly on the
// permuted, unextended model. Keys: n1, n2, phi_a, Dbar1, Adot1_1, Adot1_2,
// Bdot1_2, N1, N2, phi.
std::map<std::string, ExprMatrix> case2_decomposition(const SystemModel& permuted, int k1, int r1);

// Output channel label: y1[1], ..., y2[1], ...
std::string output_label(int channel, int m1);

}  // namespace ioext
