#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ioext/error.hpp"
#include "ioext/integrate.hpp"
#include "ioext/models.hpp"
#include "ioext/simulate.hpp"
#include "ioext/synthesis.hpp"
#include "support.hpp"

using namespace ioext;
using namespace ioext::testing;

namespace {

const SynthesisResult& unicycle_synth() {
  static const SynthesisResult s = synth_case2(unicycle(admissible_direction()));
  return s;
}

Trajectory sinusoid_reference() {
  Trajectory tr;
  tr.channels = {TrajectoryChannel::sinusoid(1.0, 0.3, 0.8, 0.0), TrajectoryChannel::sinusoid(0.0, 0.3, 0.6, 0.0),
                 TrajectoryChannel::polynomial({0.0, 0.05})};
  return tr;
}

Trajectory constant_reference(double vx, double vy, double th) {
  Trajectory tr;
  tr.channels = {TrajectoryChannel::constant(vx), TrajectoryChannel::constant(vy), TrajectoryChannel::constant(th)};
  return tr;
}

SimulationOptions unicycle_options(double T = 10.0, double dt = 1e-3) {
  SimulationOptions o;
  o.T = T;
  o.dt = dt;
  o.x0 = {{"x1", 0.0}, {"u1", 1.0}, {"w1", 0.0}};
  o.law.L = 5.0 * Eigen::MatrixXd::Identity(3, 3);
  return o;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(Integrate, ExponentialStep) {
  VectorField f = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0]; };
  std::vector<double> x{1.0};
  x = step_rk4(f, 0.0, x, 0.1, 0);
  EXPECT_LT(std::abs(x[0] - std::exp(0.1)), 1e-7);
}

TEST(Integrate, FourthOrderOnExponential) {
  VectorField f = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0]; };
  auto run = [&](double dt) {
    std::vector<double> x{1.0};
    for (int k = 0; k < std::lround(1.0 / dt); ++k) x = step_rk4(f, k * dt, x, dt, k);
    return std::abs(x[0] - std::exp(1.0));
  };
  double ratio = run(0.1) / run(0.05);
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Integrate, DivergenceReported) {
  VectorField f = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0] * x[0]; };
  std::vector<double> x{1e200};
  try {
    step_rk4(f, 0.0, x, 1.0, 7);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 7);
  }
}

TEST(Trajectory, AnalyticDerivatives) {
  std::vector<TrajectoryChannel> channels{TrajectoryChannel::sinusoid(0.5, 2.0, 1.3, 0.2),
                                          TrajectoryChannel::polynomial({1.0, -2.0, 0.5, 0.25}),
                                          TrajectoryChannel::spline({0, 1, 2.5, 4}, {0, 1, -1, 2})};
  const double h = 1e-5;
  for (const auto& c : channels) {
    for (double t : {0.3, 1.7, 3.1}) {
      for (int order = 1; order <= 2; ++order) {
        double fd = (c(t + h, order - 1) - c(t - h, order - 1)) / (2 * h);
        EXPECT_NEAR(c(t, order), fd, 1e-5) << static_cast<int>(c.kind()) << " t=" << t << " order=" << order;
      }
    }
  }
}

TEST(Trajectory, SplineInterpolatesAndIsNatural) {
  auto s = TrajectoryChannel::spline({0, 1, 2, 3}, {1, 3, 2, 0});
  EXPECT_NEAR(s(1.0), 3.0, 1e-14);
  EXPECT_NEAR(s(2.0), 2.0, 1e-14);
  EXPECT_NEAR(s(0.0, 2), 0.0, 1e-12);
  EXPECT_NEAR(s(3.0, 2), 0.0, 1e-12);
  EXPECT_EQ(s(1.5, 4), 0.0);
}

TEST(OuterControl, WrapAngle) {
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.3), 0.3, 1e-15);
}

TEST(OuterControl, MatchesHandInverse) {
  // At heading 0, u1 = 1, w1 = 0 with h* the composite matrix is
  // [1 0 0; 0 1 1; 0 1 0], whose inverse is [1 0 0; 0 0 1; 0 1 -1].
  const SynthesisResult& s = unicycle_synth();
  LoopEvaluator ev(s.loop);
  std::vector<double> plant(ev.plant_size(), 0.0), ref(ev.reference_size(), 0.0);
  for (std::size_t i = 0; i < plant.size(); ++i)
    if (s.loop.plant_states[i] == "u1") plant[i] = 1.0;
  ref[0] = 1.0;  // reference velocity matches the measured one
  ev.load_states(plant, ref);
  Eigen::Matrix3d inv;
  inv << 1, 0, 0, 0, 0, 1, 0, 1, -1;
  EXPECT_LT((ev.gamma().inverse() - inv).norm(), 1e-14);

  OuterLaw law{2.0 * Eigen::MatrixXd::Identity(3, 3)};
  std::vector<std::vector<double>> ydes{{1.5, 0.1}, {0.2, -0.3}, {0.4, 0.05}};
  OuterControlResult oc = outer_control(ev, law, ydes);
  // y = (1, 0, 0), so v = ydes' + 2 (ydes - y).
  Eigen::Vector3d v(0.1 + 2 * 0.5, -0.3 + 2 * 0.2, 0.05 + 2 * 0.4);
  EXPECT_LT((oc.v - v).norm(), 1e-14);
  Eigen::Vector3d expect = inv * (v - ev.phi());
  EXPECT_LT((oc.u_ext - expect).norm(), 1e-12);
}

TEST(OuterControl, RejectsNonPositiveL) {
  EXPECT_THROW(check_outer_law({-Eigen::MatrixXd::Identity(3, 3)}, 3), Error);
  EXPECT_THROW(check_outer_law({Eigen::MatrixXd::Identity(2, 2)}, 3), Error);
}

TEST(Simulate, ConstantReferenceConverges) {
  SimulationTrace tr = run_closed_loop(unicycle_synth(), constant_reference(0.8, 0.4, 0.3), unicycle_options());
  TraceMetrics m = trace_metrics(tr);
  EXPECT_LT(m.final_error, 1e-4);
  EXPECT_GT(m.max_error, 0.1);
  EXPECT_LT(m.settling_time, 10.0);
}

TEST(Simulate, SinusoidTracking) {
  SimulationTrace tr = run_closed_loop(unicycle_synth(), sinusoid_reference(), unicycle_options());
  TraceMetrics m = trace_metrics(tr);
  EXPECT_LT(m.final_error, 1e-3);
  EXPECT_LT(m.linearization_residual, 1e-2);
  EXPECT_EQ(tr.size(), 10001u);
}

TEST(Simulate, RungeKuttaConvergenceOnLoop) {
  // Inputs are held over each step, so the sampled outer loop is only first
  // order in dt; the integrator order shows with u_ext held over the horizon.
  const SynthesisResult& s = unicycle_synth();
  LoopEvaluator ev(s.loop);
  std::size_t np = ev.plant_size();
  std::vector<double> u_ext{0.3, -0.2, 0.4};
  auto endpoint = [&](double dt) {
    std::vector<double> x(np + ev.reference_size(), 0.0);
    for (std::size_t i = 0; i < np; ++i)
      if (s.loop.plant_states[i] == "u1") x[i] = 1.0;
    x[np] = 1.0;
    VectorField f = [&](double, std::span<const double> z, std::span<double> dz) {
      ev.load(z.subspan(0, np), z.subspan(np), u_ext);
      ev.derivative(dz.subspan(0, np), dz.subspan(np));
    };
    long steps = std::lround(2.0 / dt);
    for (long k = 0; k < steps; ++k) x = step_rk4(f, k * dt, x, dt, k);
    return x;
  };
  auto fine = endpoint(0.0025);
  double coarse = distance(endpoint(0.1), fine);
  double half = distance(endpoint(0.05), fine);
  double ratio = coarse / half;
  EXPECT_GE(ratio, 12.0) << coarse << " " << half;
  EXPECT_LE(ratio, 20.0) << coarse << " " << half;
}

TEST(Simulate, ErrorDecaysFromRandomStarts) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> heading(-1.0, 1.0), speed(0.6, 1.5), lateral(-0.3, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    SimulationOptions o = unicycle_options(10.0, 2e-3);
    o.x0 = {{"x1", heading(rng)}, {"u1", speed(rng)}, {"w1", lateral(rng)}};
    SimulationTrace tr = run_closed_loop(unicycle_synth(), constant_reference(1.0, 0.2, 0.1), o);
    EXPECT_LT(tr.err_norm.back(), 0.01 * tr.err_norm.front()) << trial;
    // Eventually monotone: non-increasing over the second half.
    for (std::size_t k = tr.size() / 2 + 1; k < tr.size(); ++k)
      ASSERT_LE(tr.err_norm[k], tr.err_norm[k - 1] * (1 + 1e-9) + 1e-14) << trial << " step " << k;
  }
}

TEST(Simulate, NearSingularGammaRaises) {
  // Asking the vehicle to stop drives u1 towards zero.
  SimulationOptions o = unicycle_options(10.0, 1e-3);
  try {
    run_closed_loop(unicycle_synth(), constant_reference(0.0, 0.0, 0.0), o);
    FAIL() << "expected a singularity error";
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kNearSingularGamma || e.code() == ErrorCode::kSingularState)
        << e.what();
  }
}

TEST(Simulate, Deterministic) {
  SimulationOptions o = unicycle_options(1.0, 1e-3);
  o.seed = 17;
  o.initial_jitter = 0.05;
  std::ostringstream a, b;
  write_trace_csv(a, run_closed_loop(unicycle_synth(), sinusoid_reference(), o));
  write_trace_csv(b, run_closed_loop(unicycle_synth(), sinusoid_reference(), o));
  EXPECT_EQ(a.str(), b.str());
  o.seed = 18;
  std::ostringstream c;
  write_trace_csv(c, run_closed_loop(unicycle_synth(), sinusoid_reference(), o));
  EXPECT_NE(a.str(), c.str());
}

TEST(Simulate, LockExtraSteersOnlyVelocities) {
  SimulationOptions o = unicycle_options(10.0, 1e-3);
  o.control.lock_extra = true;
  SimulationTrace tr = run_closed_loop(unicycle_synth(), sinusoid_reference(), o);
  for (const auto& w : tr.w) ASSERT_EQ(w[0], 0.0);
  EXPECT_LT(std::abs(tr.e.back()[0]) + std::abs(tr.e.back()[1]), 1e-3);
  EXPECT_LT(trace_metrics(tr).linearization_residual, 1e-2);
}

TEST(Simulate, CaseOneLinearChain) {
  for (const auto& o : linear_oracle_suite()) {
    if (o.model.m2() == 0) continue;
    SynthesisResult s = synth_case1(o.model);
    Trajectory tr;
    tr.channels = {TrajectoryChannel::sinusoid(0.0, 0.5, 1.0, 0.0), TrajectoryChannel::constant(0.2)};
    SimulationOptions opt;
    opt.T = 10.0;
    opt.dt = 1e-3;
    opt.law.L = 3.0 * Eigen::MatrixXd::Identity(2, 2);
    TraceMetrics m = trace_metrics(run_closed_loop(s, tr, opt));
    EXPECT_LT(m.final_error, 1e-3) << o.model.id;
  }
}

TEST(Rolling, ConstraintHoldsWithoutExtraInput) {
  SimulationOptions o = unicycle_options(5.0, 1e-3);
  o.control.lock_extra = true;
  SimulationTrace tr = run_closed_loop(unicycle_synth(), sinusoid_reference(), o);
  for (double r : rolling_constraint_residual(tr, admissible_direction())) ASSERT_LT(std::abs(r), 1e-6);
}

TEST(Rolling, LateralVelocityShowsUp) {
  SimulationOptions o = unicycle_options(2.0, 1e-3);
  o.control.lock_extra = true;
  o.x0["w1"] = 0.5;
  SimulationTrace tr = run_closed_loop(unicycle_synth(), sinusoid_reference(), o);
  // With h* of unit norm the residual is the lateral velocity itself.
  for (double r : rolling_constraint_residual(tr, admissible_direction())) ASSERT_NEAR(r, 0.5, 1e-12);
}

TEST(Rolling, StationaryIsZero) {
  SimulationTrace tr;
  tr.x_names = {"x1"};
  tr.u_names = {"u1", "u2"};
  tr.w_names = {"w1"};
  for (int k = 0; k < 5; ++k) {
    tr.t.push_back(k);
    tr.x.push_back({0.1 * k});
    tr.u.push_back({0.0, 0.0});
    tr.w.push_back({0.0});
  }
  for (double r : rolling_constraint_residual(tr, admissible_direction())) EXPECT_EQ(r, 0.0);
}

TEST(Metrics, SettlingConventions) {
  SimulationTrace tr;
  tr.T = 3.0;
  tr.dt = 1.0;
  tr.y_names = {"y1_1"};
  tr.rho = {1};
  for (int k = 0; k < 4; ++k) {
    tr.t.push_back(k);
    tr.y.push_back({0.0});
    tr.v.push_back({0.0});
    tr.e.push_back({0.0});
    tr.err_norm.push_back(0.0);
  }
  EXPECT_EQ(trace_metrics(tr).settling_time, 0.0);
  tr.e.back() = {1.0};
  tr.err_norm.back() = 1.0;
  EXPECT_EQ(trace_metrics(tr).settling_time, 3.0);
}

TEST(Export, CsvHeader) {
  SimulationTrace tr = run_closed_loop(unicycle_synth(), sinusoid_reference(), unicycle_options(0.01, 1e-3));
  std::ostringstream os;
  write_trace_csv(os, tr);
  std::istringstream in(os.str());
  std::string first, header;
  std::getline(in, first);
  std::getline(in, header);
  EXPECT_EQ(first.rfind("# schema: ioext.trace.csv/1", 0), 0u);
  EXPECT_EQ(header.rfind("t,x_x1,xi_u1,w_w1,", 0), 0u) << header;
  EXPECT_NE(header.find("err_norm"), std::string::npos);
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 11);
}

TEST(OuterControl, ZeroErrorZeroDriftGivesZero) {
  SynthesisResult s = synth_case1(linear_oracle_suite()[1].model);
  LoopEvaluator ev(s.loop);
  std::vector<double> plant(ev.plant_size(), 0.0), ref(ev.reference_size(), 0.0);
  ev.load_states(plant, ref);
  ASSERT_LT(ev.phi().norm(), 1e-15);
  OuterControlResult oc = outer_control(ev, {Eigen::MatrixXd::Identity(2, 2)}, {{0.0, 0.0}, {0.0, 0.0}});
  EXPECT_EQ(oc.u_ext.norm(), 0.0);
}

TEST(OuterControl, TinySpeedIsSingular) {
  const SynthesisResult& s = unicycle_synth();
  LoopEvaluator ev(s.loop);
  std::vector<double> plant(ev.plant_size(), 0.0), ref(ev.reference_size(), 0.0);
  for (std::size_t i = 0; i < plant.size(); ++i)
    if (s.loop.plant_states[i] == "u1") plant[i] = 1e-9;
  ev.load_states(plant, ref);
  OuterControlOptions opt;
  opt.singular_guard = 0.0;  // leave it to the condition number
  EXPECT_THROW(outer_control(ev, {Eigen::MatrixXd::Identity(3, 3)}, {{0, 0}, {0, 0}, {0, 0}}, opt),
               NearSingularError);
  EXPECT_THROW(outer_control(ev, {Eigen::MatrixXd::Identity(3, 3)}, {{0, 0}, {0, 0}, {0, 0}}), Error);
}

TEST(Simulate, EquilibriumStaysPut) {
  SimulationTrace tr = run_closed_loop(unicycle_synth(), constant_reference(1.0, 0.0, 0.0), unicycle_options(5.0));
  for (double e : tr.err_norm) ASSERT_LT(e, 1e-8);
}

TEST(Simulate, InfeasibleDirectionFailsImmediately) {
  SynthesisResult s = synth_case2(unicycle({"cos(x1)", "sin(x1)", "0"}));
  try {
    run_closed_loop(s, sinusoid_reference(), unicycle_options());
    FAIL();
  } catch (const NearSingularError& e) {
    EXPECT_GT(e.condition_number(), 1e8);
  }
}

TEST(Simulate, DoublingLHalvesTimeConstant) {
  auto rate = [](double l) {
    SimulationOptions o = unicycle_options(3.0, 1e-3);
    o.law.L = l * Eigen::MatrixXd::Identity(3, 3);
    SimulationTrace tr = run_closed_loop(unicycle_synth(), constant_reference(1.2, 0.3, 0.2), o);
    std::size_t a = 200, b = 800;
    return std::log(tr.err_norm[a] / tr.err_norm[b]) / (tr.t[b] - tr.t[a]);
  };
  double ratio = rate(4.0) / rate(2.0);
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(Simulate, UnderactuationWitness) {
  SimulationOptions o = unicycle_options();
  o.control.lock_extra = true;
  SimulationTrace tr = run_closed_loop(unicycle_synth(), sinusoid_reference(), o);
  double y1 = std::hypot(tr.e.back()[0], tr.e.back()[1]);
  EXPECT_LT(y1, 1e-3);
  EXPECT_GT(std::abs(tr.e.back()[2]), 0.1);
}

TEST(Metrics, SingleSampleTrace) {
  SimulationTrace tr;
  tr.T = 0.5;
  tr.dt = 0.5;
  tr.y_names = {"y1_1"};
  tr.rho = {1};
  tr.t = {0.0};
  tr.y = {{0.0}};
  tr.v = {{0.0}};
  tr.e = {{0.4}};
  tr.err_norm = {0.4};
  TraceMetrics m = trace_metrics(tr);
  EXPECT_EQ(m.max_error, 0.4);
  EXPECT_EQ(m.settling_time, 0.5);
}
