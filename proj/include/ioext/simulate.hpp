#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ioext/integrate.hpp"
#include "ioext/synthesis.hpp"

namespace ioext {

// One desired-output channel with analytic derivatives of any order.
class TrajectoryChannel {
 public:
  enum class Kind { kConstant, kSinusoid, kPolynomial, kSpline };

  static TrajectoryChannel constant(double value);
  // offset + amplitude * sin(frequency * t + phase), frequency in rad/s.
  static TrajectoryChannel sinusoid(double offset, double amplitude, double frequency, double phase);
  // c0 + c1 t + c2 t^2 + ...
  static TrajectoryChannel polynomial(std::vector<double> coeffs);
  // Natural cubic spline through (knots, values); knots strictly increasing.
  static TrajectoryChannel spline(std::vector<double> knots, std::vector<double> values);

  Kind kind() const { return kind_; }
  double operator()(double t, int order = 0) const;

  const std::vector<double>& params() const { return params_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }

 private:
  Kind kind_ = Kind::kConstant;
  std::vector<double> params_;
  std::vector<double> knots_, values_, second_;
};

struct Trajectory {
  std::vector<TrajectoryChannel> channels;
  // samples[c][k] = k-th derivative of channel c at t, k = 0..max_order.
  std::vector<std::vector<double>> sample(double t, int max_order) const;
};

struct OuterLaw {
  Eigen::MatrixXd L;
};

// Throws Error(kGainNotPositiveDefinite) unless L is symmetric positive definite.
void check_outer_law(const OuterLaw& law, int size);

// Numeric view of a ClosedLoop over a flat slot vector.
class LoopEvaluator {
 public:
  explicit LoopEvaluator(const ClosedLoop& loop);

  const ClosedLoop& loop() const { return *loop_; }
  std::size_t plant_size() const { return loop_->plant_states.size(); }
  std::size_t reference_size() const { return loop_->reference_states.size(); }
  std::size_t input_size() const { return loop_->inputs.size(); }

  // Loads states and u_ext, then evaluates measurements and the internal law.
  void load(std::span<const double> plant, std::span<const double> reference, std::span<const double> u_ext);
  // Like load() without u_ext; only state functions may be evaluated after.
  void load_states(std::span<const double> plant, std::span<const double> reference);

  void derivative(std::span<double> dplant, std::span<double> dreference) const;
  Eigen::MatrixXd gamma() const;
  Eigen::VectorXd phi() const;
  // Output derivatives of orders 0..rho-1 per channel.
  std::vector<std::vector<double>> output_derivatives() const;
  std::vector<double> outputs() const;
  std::vector<double> original_inputs() const;
  std::vector<double> extra_values() const;
  std::vector<double> internal_law() const;
  std::vector<double> measurement_values(std::span<const double> plant) const;
  double value_of(const std::string& symbol) const;

 private:
  const ClosedLoop* loop_;
  SlotIndex index_;
  std::vector<double> slots_;
  std::size_t meas_offset_ = 0, law_offset_ = 0, input_offset_ = 0, ref_offset_ = 0;
  std::vector<CompiledExpr> measurements_, law_, rhs_, outputs_, gamma_, phi_, originals_, extras_;
  std::vector<std::vector<CompiledExpr>> derivs_;
  std::vector<std::size_t> reference_rhs_slot_;
};

struct OuterControlOptions {
  double condition_limit = 1e8;
  double singular_guard = 1e-3;
  bool lock_extra = false;  // extra channels held at zero, only y1 is steered
};

struct OuterControlResult {
  Eigen::VectorXd u_ext;
  Eigen::VectorXd v;
  std::vector<double> error;  // y_des - y, angles wrapped
  double condition = 1.0;
};

// Unwrapped shortest signed angle difference in (-pi, pi].
double wrap_angle(double a);

// u_ext = Gamma^{-1}(-phi + v) with v = y_des^(rho) + error feedback built
// from L (full L when every rho is 1; per-channel repeated poles at L_jj
// otherwise). The evaluator must have been loaded with the current states.
OuterControlResult outer_control(LoopEvaluator& eval, const OuterLaw& law,
                                 const std::vector<std::vector<double>>& ydes, const OuterControlOptions& opt = {});

struct SimulationOptions {
  double T = 10.0;
  double dt = 1e-3;
  Assignment x0;  // plant states; missing entries take the operating point
  OuterLaw law;
  OuterControlOptions control;
  std::uint64_t seed = 0;
  double initial_jitter = 0.0;  // Gaussian sigma applied to x0 using seed
};

struct SimulationTrace {
  std::string model_id;
  int case_id = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double T = 0.0;
  bool lock_extra = false;
  std::vector<Eigen::MatrixXd> gains;
  Eigen::MatrixXd L;
  std::vector<std::string> x_names, xi_names, w_names, r_names, u_names, uext_names, y_names;
  std::vector<int> rho;
  std::set<int> angular;
  std::vector<double> t;
  std::vector<std::vector<double>> x, xi, w, r, u, uext, v, y, ydes, e;
  std::vector<double> err_norm;

  std::size_t size() const { return t.size(); }
};

// Integrates plant + integrator states + integrated extra inputs + reference
// chain. The reference chain starts at the measured y1 derivatives.
SimulationTrace run_closed_loop(const SynthesisResult& synth, const Trajectory& trajectory,
                                const SimulationOptions& opt);
SimulationTrace run_closed_loop(const ClosedLoop& loop, const std::vector<Eigen::MatrixXd>& gains,
                                const std::string& model_id, int case_id, const Trajectory& trajectory,
                                const SimulationOptions& opt);

struct TraceMetrics {
  double final_error = 0.0;
  double max_error = 0.0;
  std::vector<double> channel_max_error;
  std::vector<double> channel_final_error;
  std::vector<double> channel_settling_time;
  double settling_time = 0.0;  // 2% band of the peak error norm; T if never settled
  double linearization_residual = 0.0;
  double reference_bound = 0.0;  // max |r| over the trace
};

TraceMetrics trace_metrics(const SimulationTrace& trace);

inline constexpr const char* kTraceCsvSchema = "ioext.trace.csv/1";
inline constexpr const char* kTraceJsonSchema = "ioext.trace/1";

void write_trace_csv(std::ostream& os, const SimulationTrace& trace);
void write_trace_json(std::ostream& os, const SimulationTrace& trace);

}  // namespace ioext
