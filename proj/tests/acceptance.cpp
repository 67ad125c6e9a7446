// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "ioext/cli.hpp"
#include "ioext/integrate.hpp"
#include "ioext/lie.hpp"
#include "ioext/models.hpp"
#include "ioext/simulate.hpp"
#include "ioext/synthesis.hpp"
#include "ioext/sysfile.hpp"
#include "support.hpp"

using namespace ioext;
using namespace ioext::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string model_path(const std::string& name) { return std::string(IOEXT_SOURCE_DIR) + "/models/" + name; }

// Worst entrywise relative error at `samples` states with |u1| > 0.1.
double max_rel(const ExprMatrix& got, const ExprMatrix& want, int samples, std::uint64_t seed) {
  if (got.rows() != want.rows() || got.cols() != want.cols()) return INFINITY;
  std::mt19937_64 rng(seed);
  SamplingOptions opt;
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    Assignment a = sample_point(rng, {"x1", "u1", "w1", "u2"}, {"u1"}, opt);
    Eigen::MatrixXd g = got.evaluate(a), w = want.evaluate(a);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) worst = std::max(worst, relative_error(g(i, j), w(i, j)));
  }
  return worst;
}

ExprMatrix scalar(const Expr& e) {
  ExprMatrix m(1, 1);
  m(0, 0) = e;
  return m;
}

Outcome golden_matrices() {
  DirectionTriple h = admissible_direction();
  GoldenMatrices g = load_unicycle_golden(default_golden_path(), h);
  SystemModel m = unicycle(h);
  SynthesisResult s = synth_case2(m);
  auto rep = vector_relative_degree(m, OutputBlock::kY1, InputChannel::kU);
  double worst = std::max({max_rel(rep.A, g.A1, 100, 1), max_rel(s.intermediates.at("N1"), g.N1, 100, 2),
                           max_rel(s.intermediates.at("N2"), g.N2, 100, 3), max_rel(s.Gamma, g.Gamma, 100, 4),
                           max_rel(scalar(s.feasibility.condition), scalar(g.lambda), 100, 5),
                           max_rel(scalar(lambda_of(h)), scalar(g.lambda), 100, 6)});
  return {worst < 1e-10, "max relative error " + fmt(worst)};
}

Outcome admissible_directions() {
  SystemModel good = unicycle(admissible_direction());
  FeasibilityCertificate a = feasibility_case2(good, synth_case2(good));
  SystemModel bad = unicycle({"cos(x1)", "sin(x1)", "0"});
  FeasibilityCertificate b = feasibility_case2(bad, synth_case2(bad));
  bool ok = to_string(a.condition) == "1/u1" && a.feasible && b.condition.is_zero() && !b.feasible;
  return {ok, "h*: " + to_string(a.condition) + (a.feasible ? " feasible" : " infeasible") +
                  "; (cos, sin, 0): " + to_string(b.condition) + (b.feasible ? " feasible" : " infeasible")};
}

Outcome schur_equivalence() {
  std::mt19937_64 rng(2718);
  int disagreements = 0, singular = 0;
  for (int k = 0; k < 50; ++k) {
    SystemModel m = random_linear_case1(rng, k % 4 == 0);
    Assignment x0 = m.operating_assignment();
    auto r1 = vector_relative_degree(m, OutputBlock::kY1, InputChannel::kU);
    auto r2 = vector_relative_degree(m, OutputBlock::kY2, InputChannel::kU);
    Eigen::MatrixXd A1 = r1.A.evaluate(x0), B1 = r1.B.evaluate(x0);
    Eigen::MatrixXd A2 = r2.A.evaluate(x0), B2 = r2.B.evaluate(x0);
    Eigen::MatrixXd schur = B2 - A2 * A1.inverse() * B1;
    bool schur_nonzero = std::abs(leibniz_det(schur)) > 1e-9;

    Eigen::MatrixXd G = synth_case1(m).Gamma.evaluate(x0);
    double rows = 1.0;
    for (Eigen::Index i = 0; i < G.rows(); ++i) rows *= G.row(i).norm();
    bool invertible = std::abs(leibniz_det(G)) > 1e-9 * std::max(1.0, rows);
    if (invertible != schur_nonzero) ++disagreements;
    if (!invertible) ++singular;
  }
  return {disagreements == 0,
          std::to_string(disagreements) + " disagreements over 50 systems (" + std::to_string(singular) + " singular)"};
}

Outcome exact_linearization() {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (const auto& o : linear_oracle_suite())
    if (o.model.m2() > 0) worst = std::max(worst, substitution_error(synth_case1(o.model).loop, 50, 1));
  worst = std::max(worst, substitution_error(synth_case1(symbolic_h_system(rng)).loop, 50, 2));
  worst = std::max(worst, substitution_error(synth_case2(unicycle(admissible_direction())).loop, 50, 3));
  worst = std::max(worst, substitution_error(synth_case2(unicycle({"x1", "cos(x1)^2", "sin(x1)"})).loop, 50, 4));
  return {worst < 1e-8, "max relative error " + fmt(worst) + " (cases 1 and 2)"};
}

struct UnicycleRun {
  SystemFile file;
  SynthesisResult synth;
  SimulationOptions opt;
};

UnicycleRun unicycle_run() {
  UnicycleRun r{load_system_file(model_path("unicycle.sys")), {}, {}};
  r.synth = synthesize(r.file.model, r.file.case_hint, r.file.synthesis);
  r.opt = simulation_options(r.file, static_cast<int>(r.synth.loop.rho.size()));
  return r;
}

Outcome closed_loop_tracking() {
  UnicycleRun r = unicycle_run();
  bool config = r.opt.dt == 1e-3 && r.opt.T == 10.0 && r.opt.law.L.isApprox(5.0 * Eigen::MatrixXd::Identity(3, 3)) &&
                r.synth.controller.gains.size() == 1 &&
                r.synth.controller.gains[0].isApprox(5.0 * Eigen::MatrixXd::Identity(2, 2));
  auto start = std::chrono::steady_clock::now();
  TraceMetrics m = trace_metrics(run_closed_loop(r.synth, *r.file.trajectory, r.opt));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = config && m.final_error < 1e-3 && m.linearization_residual < 1e-2 && secs < 10.0;
  return {ok, "final error " + fmt(m.final_error) + ", residual " + fmt(m.linearization_residual) + ", run " +
                  fmt(secs) + " s" + (config ? "" : ", unexpected configuration")};
}

Outcome underactuation_witness() {
  UnicycleRun r = unicycle_run();
  r.opt.control.lock_extra = true;
  SimulationTrace tr = run_closed_loop(r.synth, *r.file.trajectory, r.opt);
  double y1 = std::hypot(tr.e.back()[0], tr.e.back()[1]);
  double theta = std::abs(tr.e.back()[2]);
  return {y1 < 1e-3 && theta > 0.1, "y1 error " + fmt(y1) + ", heading error " + fmt(theta) + " rad"};
}

Outcome rolling_constraint() {
  UnicycleRun r = unicycle_run();
  r.opt.control.lock_extra = true;
  r.opt.x0["w1"] = 0.0;
  SimulationTrace tr = run_closed_loop(r.synth, *r.file.trajectory, r.opt);
  double worst = 0.0;
  for (double v : rolling_constraint_residual(tr, admissible_direction())) worst = std::max(worst, std::abs(v));
  return {worst < 1e-6, "max residual " + fmt(worst) + " over " + std::to_string(tr.size()) + " samples"};
}

Outcome lie_oracle() {
  const std::vector<std::string> states{"x1", "x2", "x3"};
  auto corpus = expression_corpus(99, 120, states);
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (const auto& h : corpus) {
    ExprVector f;
    for (std::size_t i = 0; i < states.size(); ++i) f.push_back(random_expr(rng, states, 2));
    Expr lf = lie_derivative(h, f, states);
    for (int k = 0; k < 50; ++k) {
      Assignment a = random_point(rng, states);
      std::vector<double> fv;
      for (const auto& fi : f) fv.push_back(eval_expr(fi, a));
      worst = std::max(worst, relative_error(eval_expr(lf, a), directional_fd(h, states, fv, a)));
    }
  }
  return {worst < 1e-5, "max relative error " + fmt(worst) + " over 120 expressions x 50 points"};
}

Outcome rk4_order() {
  VectorField f = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0]; };
  auto error = [&](double dt) {
    std::vector<double> x{1.0};
    long steps = std::lround(1.0 / dt);
    for (long k = 0; k < steps; ++k) x = step_rk4(f, static_cast<double>(k) * dt, x, dt, k);
    return std::abs(x[0] - std::exp(1.0));
  };
  double ratio = error(0.1) / error(0.05);
  return {ratio >= 12.0 && ratio <= 20.0, "error ratio " + fmt(ratio)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  fs::path dir = fs::temp_directory_path() / "ioext_acceptance";
  fs::create_directories(dir);
  bool ok = true;
  std::size_t bytes = 0;
  for (const char* format : {"csv", "json"}) {
    std::string text[2];
    for (int k = 0; k < 2; ++k) {
      SimulateArgs a;
      a.file = model_path("unicycle.sys");
      a.format = format;
      a.seed = 7;
      a.out = (dir / ("run" + std::to_string(k) + "." + format)).string();
      std::ostringstream out, err;
      if (cmd_simulate(a, out, err) != 0) return {false, "simulate failed: " + err.str()};
      text[k] = slurp(*a.out);
    }
    ok = ok && !text[0].empty() && text[0] == text[1];
    bytes += text[0].size();
  }
  fs::remove_all(dir);
  return {ok, std::string(ok ? "identical" : "different") + " csv and json traces (" + std::to_string(bytes) +
                  " bytes)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
    double time_limit;
  };
  const Criterion criteria[] = {
      {"unicycle golden matrices", golden_matrices, 5.0},
      {"admissible direction feasibility", admissible_directions, 1.0},
      {"Schur complement equivalence", schur_equivalence, INFINITY},
      {"exact linearization", exact_linearization, INFINITY},
      {"closed-loop tracking", closed_loop_tracking, INFINITY},
      {"underactuation witness", underactuation_witness, INFINITY},
      {"rolling constraint", rolling_constraint, INFINITY},
      {"Lie derivative oracle", lie_oracle, INFINITY},
      {"RK4 order", rk4_order, INFINITY},
      {"seeded determinism", determinism, INFINITY},
  };
  int failures = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.time_limit) {
      o.pass = false;
      o.detail += ", over the " + fmt(c.time_limit) + " s limit";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << index << "] " << c.name << ": " << o.detail << " ("
              << fmt(secs) << " s)\n";
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << index - failures << "/" << index << "\n";
  return failures ? 1 : 0;
}
