#include "ioext/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include <json.hpp>

#include "ioext/error.hpp"

namespace ioext {

// ---------------------------------------------------------------------------
// Trajectories

TrajectoryChannel TrajectoryChannel::constant(double value) {
  TrajectoryChannel c;
  c.kind_ = Kind::kConstant;
  c.params_ = {value};
  return c;
}

TrajectoryChannel TrajectoryChannel::sinusoid(double offset, double amplitude, double frequency, double phase) {
  TrajectoryChannel c;
  c.kind_ = Kind::kSinusoid;
  c.params_ = {offset, amplitude, frequency, phase};
  return c;
}

TrajectoryChannel TrajectoryChannel::polynomial(std::vector<double> coeffs) {
  TrajectoryChannel c;
  c.kind_ = Kind::kPolynomial;
  c.params_ = std::move(coeffs);
  if (c.params_.empty()) c.params_ = {0.0};
  return c;
}

TrajectoryChannel TrajectoryChannel::spline(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() != values.size() || knots.size() < 2) {
    throw Error(ErrorCode::kInvalidModel, "spline needs at least two knots and one value per knot");
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) throw Error(ErrorCode::kInvalidModel, "spline knots must increase strictly");
  }
  TrajectoryChannel c;
  c.kind_ = Kind::kSpline;
  std::size_t n = knots.size();
  c.second_.assign(n, 0.0);
  if (n > 2) {
    // Natural end conditions; tridiagonal system for the interior second derivatives.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 2, n - 2);
    Eigen::VectorXd b(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double h0 = knots[i] - knots[i - 1], h1 = knots[i + 1] - knots[i];
      std::size_t r = i - 1;
      A(r, r) = (h0 + h1) / 3.0;
      if (r > 0) A(r, r - 1) = h0 / 6.0;
      if (r + 1 < n - 2) A(r, r + 1) = h1 / 6.0;
      b(r) = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
    }
    Eigen::VectorXd m = A.partialPivLu().solve(b);
    for (std::size_t i = 1; i + 1 < n; ++i) c.second_[i] = m(i - 1);
  }
  c.knots_ = std::move(knots);
  c.values_ = std::move(values);
  return c;
}

double TrajectoryChannel::operator()(double t, int order) const {
  switch (kind_) {
    case Kind::kConstant:
      return order == 0 ? params_[0] : 0.0;
    case Kind::kSinusoid: {
      double amp = params_[1] * std::pow(params_[2], order);
      double s = amp * std::sin(params_[2] * t + params_[3] + order * std::numbers::pi / 2);
      return order == 0 ? params_[0] + s : s;
    }
    case Kind::kPolynomial: {
      double acc = 0.0;
      for (std::size_t k = params_.size(); k-- > static_cast<std::size_t>(order);) {
        double falling = 1.0;
        for (int q = 0; q < order; ++q) falling *= static_cast<double>(k - q);
        acc = acc * t + params_[k] * falling;
      }
      return acc;
    }
    case Kind::kSpline: {
      std::size_t i = 0;
      std::size_t segs = knots_.size() - 1;
      while (i + 1 < segs && t > knots_[i + 1]) ++i;
      double h = knots_[i + 1] - knots_[i];
      double a = (knots_[i + 1] - t) / h, b = (t - knots_[i]) / h;
      double m0 = second_[i], m1 = second_[i + 1];
      switch (order) {
        case 0:
          return a * values_[i] + b * values_[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        case 1:
          return (values_[i + 1] - values_[i]) / h - (3 * a * a - 1) / 6.0 * h * m0 + (3 * b * b - 1) / 6.0 * h * m1;
        case 2:
          return a * m0 + b * m1;
        case 3:
          return (m1 - m0) / h;
        default:
          return 0.0;
      }
    }
  }
  return 0.0;
}

std::vector<std::vector<double>> Trajectory::sample(double t, int max_order) const {
  std::vector<std::vector<double>> out(channels.size(), std::vector<double>(max_order + 1));
  for (std::size_t c = 0; c < channels.size(); ++c)
    for (int k = 0; k <= max_order; ++k) out[c][k] = channels[c](t, k);
  return out;
}

void check_outer_law(const OuterLaw& law, int size) {
  const auto& L = law.L;
  if (L.rows() != size || L.cols() != size) {
    throw Error(ErrorCode::kInvalidModel, "outer gain L must be " + std::to_string(size) + "x" + std::to_string(size));
  }
  double scale = std::max(1.0, L.cwiseAbs().maxCoeff());
  if ((L - L.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::kGainNotPositiveDefinite, "gain not PD: L is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
  if (eig.eigenvalues().minCoeff() <= 1e-12) throw Error(ErrorCode::kGainNotPositiveDefinite, "gain not PD: L");
}

// ---------------------------------------------------------------------------
// Evaluator

LoopEvaluator::LoopEvaluator(const ClosedLoop& loop) : loop_(&loop) {
  std::size_t k = 0;
  auto place = [&](const std::string& name) {
    if (!index_.emplace(name, k).second) {
      throw Error(ErrorCode::kInvalidModel, "closed loop declares '" + name + "' twice");
    }
    ++k;
  };
  for (const auto& s : loop.plant_states) place(s);
  ref_offset_ = k;
  for (const auto& s : loop.reference_states) place(s);
  input_offset_ = k;
  for (const auto& s : loop.inputs) place(s);
  meas_offset_ = k;
  for (const auto& [name, e] : loop.measurements) place(name);
  law_offset_ = k;
  for (const auto& [name, e] : loop.internal_law) place(name);
  slots_.assign(k, 0.0);

  for (const auto& [name, e] : loop.measurements) measurements_.emplace_back(e, index_);
  for (const auto& [name, e] : loop.internal_law) law_.emplace_back(e, index_);
  for (const auto& e : loop.plant_rhs) rhs_.emplace_back(e, index_);
  for (const auto& e : loop.outputs) outputs_.emplace_back(e, index_);
  for (std::size_t i = 0; i < loop.gamma.rows(); ++i)
    for (std::size_t j = 0; j < loop.gamma.cols(); ++j) gamma_.emplace_back(loop.gamma(i, j), index_);
  for (const auto& e : loop.phi) phi_.emplace_back(e, index_);
  for (const auto& [name, e] : loop.original_inputs) originals_.emplace_back(e, index_);
  for (const auto& [name, e] : loop.extra_values) extras_.emplace_back(e, index_);
  for (const auto& ders : loop.output_derivatives) {
    std::vector<CompiledExpr> c;
    for (const auto& e : ders) c.emplace_back(e, index_);
    derivs_.push_back(std::move(c));
  }
  for (const auto& name : loop.reference_rhs) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::kInvalidModel, "reference derivative '" + name + "' undeclared");
    reference_rhs_slot_.push_back(it->second);
  }
}

void LoopEvaluator::load_states(std::span<const double> plant, std::span<const double> reference) {
  std::copy(plant.begin(), plant.end(), slots_.begin());
  std::copy(reference.begin(), reference.end(), slots_.begin() + ref_offset_);
  for (std::size_t i = 0; i < measurements_.size(); ++i) slots_[meas_offset_ + i] = measurements_[i](slots_);
}

void LoopEvaluator::load(std::span<const double> plant, std::span<const double> reference,
                         std::span<const double> u_ext) {
  load_states(plant, reference);
  std::copy(u_ext.begin(), u_ext.end(), slots_.begin() + input_offset_);
  for (std::size_t i = 0; i < law_.size(); ++i) slots_[law_offset_ + i] = law_[i](slots_);
}

void LoopEvaluator::derivative(std::span<double> dplant, std::span<double> dreference) const {
  for (std::size_t i = 0; i < rhs_.size(); ++i) dplant[i] = rhs_[i](slots_);
  for (std::size_t i = 0; i < reference_rhs_slot_.size(); ++i) dreference[i] = slots_[reference_rhs_slot_[i]];
}

Eigen::MatrixXd LoopEvaluator::gamma() const {
  Eigen::MatrixXd g(loop_->gamma.rows(), loop_->gamma.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = gamma_[i * g.cols() + j](slots_);
  return g;
}

Eigen::VectorXd LoopEvaluator::phi() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(phi_.size()));
  for (std::size_t i = 0; i < phi_.size(); ++i) p(static_cast<Eigen::Index>(i)) = phi_[i](slots_);
  return p;
}

std::vector<std::vector<double>> LoopEvaluator::output_derivatives() const {
  std::vector<std::vector<double>> out;
  for (const auto& c : derivs_) {
    std::vector<double> row;
    for (const auto& e : c) row.push_back(e(slots_));
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

std::vector<double> eval_all(const std::vector<CompiledExpr>& exprs, const std::vector<double>& slots) {
  std::vector<double> out;
  out.reserve(exprs.size());
  for (const auto& e : exprs) out.push_back(e(slots));
  return out;
}

}  // namespace

std::vector<double> LoopEvaluator::outputs() const { return eval_all(outputs_, slots_); }
std::vector<double> LoopEvaluator::original_inputs() const { return eval_all(originals_, slots_); }
std::vector<double> LoopEvaluator::extra_values() const { return eval_all(extras_, slots_); }
std::vector<double> LoopEvaluator::internal_law() const {
  return {slots_.begin() + law_offset_, slots_.begin() + law_offset_ + law_.size()};
}

std::vector<double> LoopEvaluator::measurement_values(std::span<const double> plant) const {
  std::vector<double> tmp = slots_;
  std::copy(plant.begin(), plant.end(), tmp.begin());
  return eval_all(measurements_, tmp);
}

double LoopEvaluator::value_of(const std::string& symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) throw Error(ErrorCode::kMissingSymbol, "missing symbol '" + symbol + "'");
  return slots_[it->second];
}

// ---------------------------------------------------------------------------
// Outer law

double wrap_angle(double a) {
  double r = std::remainder(a, 2 * std::numbers::pi);
  return r <= -std::numbers::pi ? r + 2 * std::numbers::pi : r;
}

OuterControlResult outer_control(LoopEvaluator& eval, const OuterLaw& law,
                                 const std::vector<std::vector<double>>& ydes, const OuterControlOptions& opt) {
  const ClosedLoop& loop = eval.loop();
  for (const auto& s : loop.singular) {
    if (std::find(loop.plant_states.begin(), loop.plant_states.end(), s) == loop.plant_states.end()) continue;
    double v = eval.value_of(s);
    if (std::abs(v) < opt.singular_guard) {
      throw Error(ErrorCode::kSingularState, "singular state: |" + s + "| = " + std::to_string(std::abs(v)) +
                                                 " below guard " + std::to_string(opt.singular_guard));
    }
  }
  std::size_t channels = loop.rho.size();
  auto ders = eval.output_derivatives();
  bool all_first = std::all_of(loop.rho.begin(), loop.rho.end(), [](int r) { return r == 1; });
  Eigen::VectorXd v(static_cast<Eigen::Index>(channels));
  if (all_first) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(channels));
    for (std::size_t c = 0; c < channels; ++c) {
      double err = ydes[c][0] - ders[c][0];
      if (loop.angular_outputs.count(static_cast<int>(c))) err = wrap_angle(err);
      e(c) = err;
      v(c) = ydes[c][1];
    }
    v += law.L * e;
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      int rho = loop.rho[c];
      double lambda = law.L(c, c);
      double acc = ydes[c][rho];
      double binom = 1.0;  // C(rho, i)
      for (int i = 0; i < rho; ++i) {
        if (i > 0) binom = binom * (rho - i + 1) / i;
        double err = ydes[c][i] - ders[c][i];
        if (i == 0 && loop.angular_outputs.count(static_cast<int>(c))) err = wrap_angle(err);
        acc += binom * std::pow(lambda, rho - i) * err;
      }
      v(c) = acc;
    }
  }

  Eigen::MatrixXd G = eval.gamma();
  Eigen::VectorXd phi = eval.phi();
  Eigen::Index m1 = loop.m1;
  OuterControlResult out;
  out.v = v;
  out.u_ext = Eigen::VectorXd::Zero(G.cols());
  if (opt.lock_extra) {
    G = G.topLeftCorner(m1, m1).eval();
    phi = phi.head(m1).eval();
    v = v.head(m1).eval();
  }
  out.condition = condition_number(G);
  if (!(out.condition <= opt.condition_limit)) {
    std::vector<double> state;
    for (const auto& s : loop.plant_states) state.push_back(eval.value_of(s));
    throw NearSingularError(out.condition, state);
  }
  Eigen::VectorXd sol = G.fullPivLu().solve(v - phi);
  out.u_ext.head(sol.size()) = sol;
  return out;
}

// ---------------------------------------------------------------------------
// Closed loop

namespace {

std::vector<double> wrapped_error(const ClosedLoop& loop, const std::vector<double>& y,
                                  const std::vector<std::vector<double>>& ydes) {
  std::vector<double> e(y.size());
  for (std::size_t c = 0; c < y.size(); ++c) {
    e[c] = ydes[c][0] - y[c];
    if (loop.angular_outputs.count(static_cast<int>(c))) e[c] = wrap_angle(e[c]);
  }
  return e;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<std::string> output_names(int m1, int m2) {
  std::vector<std::string> out;
  for (int j = 0; j < m1; ++j) out.push_back("y1_" + std::to_string(j + 1));
  for (int j = 0; j < m2; ++j) out.push_back("y2_" + std::to_string(j + 1));
  return out;
}

}  // namespace

SimulationTrace run_closed_loop(const SynthesisResult& synth, const Trajectory& trajectory,
                                const SimulationOptions& opt) {
  return run_closed_loop(synth.loop, synth.controller.gains, synth.model_id, synth.case_id, trajectory, opt);
}

SimulationTrace run_closed_loop(const ClosedLoop& loop, const std::vector<Eigen::MatrixXd>& gains,
                                const std::string& model_id, int case_id, const Trajectory& trajectory,
                                const SimulationOptions& opt) {
  if (!(opt.dt > 0.0) || !(opt.T >= 0.0)) throw Error(ErrorCode::kInvalidModel, "need dt > 0 and T >= 0");
  std::size_t channels = loop.rho.size();
  if (trajectory.channels.size() != channels) {
    throw Error(ErrorCode::kInvalidModel, "trajectory has " + std::to_string(trajectory.channels.size()) +
                                              " channels, outputs need " + std::to_string(channels));
  }
  check_outer_law(opt.law, static_cast<int>(channels));
  int max_order = 0;
  for (int r : loop.rho) max_order = std::max(max_order, r);

  LoopEvaluator eval(loop);
  std::vector<double> plant(eval.plant_size());
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> jitter(0.0, opt.initial_jitter > 0 ? opt.initial_jitter : 1.0);
  for (std::size_t i = 0; i < plant.size(); ++i) {
    const auto& name = loop.plant_states[i];
    auto it = opt.x0.find(name);
    plant[i] = it != opt.x0.end() ? it->second : loop.operating_point.at(name);
    if (opt.initial_jitter > 0) plant[i] += jitter(rng);
  }
  std::vector<double> reference(eval.reference_size());
  {
    std::vector<double> meas = eval.measurement_values(plant);
    for (std::size_t i = 0; i < reference.size(); ++i) {
      const std::string& name = loop.reference_states[i];
      // r<j>_d<i> pairs with y<j>_d<i>.
      std::size_t us = name.find("_d");
      std::string j = name.substr(1, us == std::string::npos ? std::string::npos : us - 1);
      std::string order = us == std::string::npos ? "0" : name.substr(us + 2);
      std::string target = "y" + j + "_d" + order;
      for (std::size_t k = 0; k < loop.measurements.size(); ++k) {
        if (loop.measurements[k].first == target) reference[i] = meas[k];
      }
    }
  }

  SimulationTrace tr;
  tr.model_id = model_id;
  tr.case_id = case_id;
  tr.seed = opt.seed;
  tr.dt = opt.dt;
  tr.T = opt.T;
  tr.lock_extra = opt.control.lock_extra;
  tr.gains = gains;
  tr.L = opt.law.L;
  tr.x_names = loop.base_states;
  tr.xi_names = loop.xi_states;
  for (const auto& [n, e] : loop.extra_values) tr.w_names.push_back(n);
  tr.r_names = loop.reference_states;
  for (const auto& [n, e] : loop.original_inputs) tr.u_names.push_back(n);
  tr.uext_names = loop.inputs;
  tr.y_names = output_names(loop.m1, loop.m2);
  tr.rho = loop.rho;
  tr.angular = loop.angular_outputs;

  auto index_of = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(loop.plant_states.begin(), loop.plant_states.end(), name) -
                                    loop.plant_states.begin());
  };
  std::vector<std::size_t> x_idx, xi_idx;
  for (const auto& n : tr.x_names) x_idx.push_back(index_of(n));
  for (const auto& n : tr.xi_names) xi_idx.push_back(index_of(n));

  long steps = std::lround(opt.T / opt.dt);
  std::vector<double> state(plant.size() + reference.size());
  std::copy(plant.begin(), plant.end(), state.begin());
  std::copy(reference.begin(), reference.end(), state.begin() + plant.size());
  std::size_t np = plant.size();

  for (long k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) * opt.dt;
    std::span<const double> ps(state.data(), np), rs(state.data() + np, state.size() - np);
    auto ydes = trajectory.sample(t, max_order);
    eval.load_states(ps, rs);
    OuterControlResult oc = outer_control(eval, opt.law, ydes, opt.control);
    std::vector<double> uext(oc.u_ext.data(), oc.u_ext.data() + oc.u_ext.size());
    eval.load(ps, rs, uext);

    std::vector<double> y = eval.outputs();
    std::vector<double> e = wrapped_error(loop, y, ydes);
    tr.t.push_back(t);
    std::vector<double> xs, xis;
    for (auto i : x_idx) xs.push_back(state[i]);
    for (auto i : xi_idx) xis.push_back(state[i]);
    tr.x.push_back(xs);
    tr.xi.push_back(xis);
    tr.w.push_back(eval.extra_values());
    tr.r.emplace_back(rs.begin(), rs.end());
    tr.u.push_back(eval.original_inputs());
    tr.uext.push_back(uext);
    tr.v.emplace_back(oc.v.data(), oc.v.data() + oc.v.size());
    tr.y.push_back(y);
    std::vector<double> yd;
    for (const auto& c : ydes) yd.push_back(c[0]);
    tr.ydes.push_back(yd);
    tr.err_norm.push_back(norm(e));
    tr.e.push_back(std::move(e));
    if (k == steps) break;

    VectorField field = [&](double, std::span<const double> x, std::span<double> dx) {
      eval.load(x.subspan(0, np), x.subspan(np), uext);
      eval.derivative(dx.subspan(0, np), dx.subspan(np));
    };
    state = step_rk4(field, t, state, opt.dt, k);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Metrics

TraceMetrics trace_metrics(const SimulationTrace& tr) {
  TraceMetrics m;
  std::size_t n = tr.size();
  if (n == 0) throw Error(ErrorCode::kInvalidModel, "empty trace");
  std::size_t channels = tr.y.front().size();
  m.final_error = tr.err_norm.back();
  m.max_error = *std::max_element(tr.err_norm.begin(), tr.err_norm.end());
  m.channel_max_error.assign(channels, 0.0);
  m.channel_final_error.assign(channels, 0.0);
  m.channel_settling_time.assign(channels, 0.0);
  auto settle = [&](auto value) {
    double peak = 0.0;
    for (std::size_t k = 0; k < n; ++k) peak = std::max(peak, value(k));
    if (peak == 0.0) return 0.0;
    double band = 0.02 * peak;
    std::optional<std::size_t> last_out;
    for (std::size_t k = 0; k < n; ++k)
      if (value(k) > band) last_out = k;
    if (!last_out) return 0.0;
    if (*last_out + 1 >= n) return tr.T;
    return tr.t[*last_out + 1];
  };
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < n; ++k) m.channel_max_error[c] = std::max(m.channel_max_error[c], std::abs(tr.e[k][c]));
    m.channel_final_error[c] = std::abs(tr.e.back()[c]);
    m.channel_settling_time[c] = settle([&](std::size_t k) { return std::abs(tr.e[k][c]); });
  }
  m.settling_time = settle([&](std::size_t k) { return tr.err_norm[k]; });

  // Forward differences over each zero-order-hold interval against the v
  // commanded at its start.
  for (std::size_t c = 0; c < channels; ++c) {
    int rho = c < tr.rho.size() ? tr.rho[c] : 1;
    // With the extra channel locked only y1 is steered.
    if (tr.lock_extra && tr.y_names[c].rfind("y2", 0) == 0) continue;
    double scale = 1.0;
    for (std::size_t k = 0; k < n; ++k) scale = std::max(scale, std::abs(tr.v[k][c]));
    double worst = 0.0;
    for (std::size_t k = 1; k + rho < n; ++k) {
      double d = 0.0, binom = 1.0;
      for (int q = 0; q <= rho; ++q) {
        if (q > 0) binom = binom * (rho - q + 1) / q;
        d += ((rho - q) % 2 ? -1.0 : 1.0) * binom * tr.y[k + q][c];
      }
      d /= std::pow(tr.dt, rho);
      worst = std::max(worst, std::abs(d - tr.v[k][c]));
    }
    m.linearization_residual = std::max(m.linearization_residual, worst / scale);
  }
  for (const auto& row : tr.r)
    for (double v : row) m.reference_bound = std::max(m.reference_bound, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

struct Column {
  std::string name;
  const std::vector<std::vector<double>>* rows;
  std::size_t index;
};

std::vector<Column> columns_of(const SimulationTrace& tr) {
  std::vector<Column> cols;
  auto add = [&](const std::string& prefix, const std::vector<std::string>& names,
                 const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < names.size(); ++i) cols.push_back({prefix + names[i], &rows, i});
  };
  add("x_", tr.x_names, tr.x);
  add("xi_", tr.xi_names, tr.xi);
  add("w_", tr.w_names, tr.w);
  add("r_", tr.r_names, tr.r);
  add("u_", tr.u_names, tr.u);
  add("uext_", tr.uext_names, tr.uext);
  add("", tr.y_names, tr.y);
  std::vector<std::string> ydes;
  for (const auto& n : tr.y_names) ydes.push_back(n);
  add("ydes_", ydes, tr.ydes);
  return cols;
}

}  // namespace

void write_trace_csv(std::ostream& os, const SimulationTrace& tr) {
  auto cols = columns_of(tr);
  os << "# schema: " << kTraceCsvSchema << " model: " << tr.model_id << " case: " << tr.case_id
     << " seed: " << tr.seed << " dt: " << fmt(tr.dt) << " T: " << fmt(tr.T) << "\n";
  os << "t";
  for (const auto& c : cols) os << ',' << c.name;
  os << ",err_norm\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << fmt(tr.t[k]);
    for (const auto& c : cols) os << ',' << fmt((*c.rows)[k][c.index]);
    os << ',' << fmt(tr.err_norm[k]) << '\n';
  }
}

void write_trace_json(std::ostream& os, const SimulationTrace& tr) {
  nlohmann::ordered_json j;
  j["schema"] = kTraceJsonSchema;
  nlohmann::ordered_json meta;
  meta["model"] = tr.model_id;
  meta["case"] = tr.case_id;
  meta["seed"] = tr.seed;
  meta["dt"] = tr.dt;
  meta["T"] = tr.T;
  meta["lock_extra"] = tr.lock_extra;
  meta["rho"] = tr.rho;
  meta["angular_outputs"] = std::vector<int>(tr.angular.begin(), tr.angular.end());
  nlohmann::ordered_json gains = nlohmann::ordered_json::array();
  for (const auto& K : tr.gains) gains.push_back(matrix_json(K));
  meta["gains"] = gains;
  meta["L"] = matrix_json(tr.L);
  j["metadata"] = meta;
  nlohmann::ordered_json cols;
  cols["t"] = tr.t;
  for (const auto& c : columns_of(tr)) {
    std::vector<double> v;
    v.reserve(tr.size());
    for (std::size_t k = 0; k < tr.size(); ++k) v.push_back((*c.rows)[k][c.index]);
    cols[c.name] = v;
  }
  cols["err_norm"] = tr.err_norm;
  j["columns"] = cols;
  os << j.dump(1) << '\n';
}

}  // namespace ioext
