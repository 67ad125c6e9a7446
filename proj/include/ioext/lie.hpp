#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ioext/matrix.hpp"
#include "ioext/model.hpp"

namespace ioext {

enum class OutputBlock { kY1 = 1, kY2 = 2 };
enum class InputChannel { kU, kW };

const char* input_channel_name(InputChannel c);

// Sampling policy for "identically zero" and "constant rank" decisions.
struct SamplingOptions {
  std::uint64_t seed = 0x5eed1e5u;
  int zero_samples = 50;
  double box = 2.0;
  double singular_margin = 0.1;
  double zero_tolerance = 1e-10;
  int perturbations = 20;
  double sigma = 0.1;
  double det_tolerance = 1e-9;
};

// L_field h = sum_i dh/dx_i * field_i, simplified.
Expr lie_derivative(const Expr& h, const ExprVector& field, const std::vector<std::string>& states);
Expr lie_derivative(const Expr& h, const ExprVector& field, const SymbolTable& table);
Expr iterated_lie(const Expr& h, const ExprVector& f, const std::vector<std::string>& states, int k);
// Row vector [L_{g_1} h, ..., L_{g_m} h] for the columns g_j of `fields`.
ExprVector lie_row(const Expr& h, const ExprMatrix& fields, const std::vector<std::string>& states);

const ExprVector& output_state_part(const SystemModel& m, OutputBlock block);
const ExprMatrix& output_feedthrough(const SystemModel& m, OutputBlock block, InputChannel c);
const ExprMatrix& channel_matrix(const SystemModel& m, InputChannel c);

// Row i is the feedthrough row when r_i = 0 and L_C L_f^{r_i - 1} eta_i
// otherwise, with C = G (u) or H (w) and eta the state part of the output.
ExprMatrix extended_decoupling(const SystemModel& m, OutputBlock block, const std::vector<int>& r, InputChannel c);
// p_i = L_f^{r_i} eta_i.
ExprVector output_drift(const SystemModel& m, OutputBlock block, const std::vector<int>& r);

// Uniform draws in [-box, box] with singular coordinates kept at least
// singular_margin away from zero.
Assignment sample_point(std::mt19937_64& rng, const std::set<std::string>& symbols,
                        const std::set<std::string>& singular, const SamplingOptions& opt);
// Operating assignment with Gaussian perturbations of every coordinate.
Assignment perturb(std::mt19937_64& rng, const Assignment& base, const SamplingOptions& opt);

// simplify(e) == 0, or |e| < zero_tolerance at zero_samples random points
// (points where e is undefined are redrawn).
bool is_identically_zero(const Expr& e, const std::set<std::string>& singular, const SamplingOptions& opt,
                         std::uint64_t salt = 0);

struct RelativeDegreeReport {
  OutputBlock block = OutputBlock::kY1;
  InputChannel wrt = InputChannel::kU;
  // Per-output degree along u and along w; nullopt when the channel never
  // appears up to the order bound. The `wrt` entries are always present.
  std::vector<std::optional<int>> r;
  std::vector<std::optional<int>> r_w;
  // Coefficients of the degree-level output derivative along `wrt`:
  // y_i^(k_i) = p_i + A_i u + B_i w.
  ExprMatrix A;
  ExprMatrix B;
  ExprVector p;
  bool regular = false;
  int rank_at_x0 = 0;
  bool constant_rank = false;
  std::vector<int> zero_columns;  // of A (wrt u) or B (wrt w)

  std::vector<int> degrees() const;  // the `wrt` degrees
};

// max_order <= 0 selects n + 1. Throws Error(kMaxOrderExceeded) when an output
// never exposes the `wrt` channel.
RelativeDegreeReport vector_relative_degree(const SystemModel& m, OutputBlock block, InputChannel wrt,
                                            int max_order = 0, const SamplingOptions& opt = {});

struct CrosscheckResult {
  double max_deviation = 0.0;
  std::vector<double> per_output;
  int trials = 0;
};

// Open-loop RK4 runs (dt = 1e-4) with smooth sinusoidal inputs; each output is
// differentiated numerically to its reported order and compared with
// p + A u + B w at the stencil centre.
CrosscheckResult numeric_crosscheck(const RelativeDegreeReport& report, const SystemModel& m, int trials,
                                    std::uint64_t seed = 1);

}  // namespace ioext
