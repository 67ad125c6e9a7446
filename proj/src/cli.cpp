#include "ioext/cli.hpp"

#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#include "ioext/lie.hpp"
#include "ioext/serialize.hpp"
#include "ioext/simulate.hpp"
#include "ioext/synthesis.hpp"
#include "ioext/sysfile.hpp"

namespace ioext {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax:
    case ErrorCode::kUndeclaredSymbol:
    case ErrorCode::kInvalidModel:
    case ErrorCode::kIo:
      return kExitParse;
    case ErrorCode::kMaxOrderExceeded:
    case ErrorCode::kAssumptionViolated:
    case ErrorCode::kCaseMismatch:
    case ErrorCode::kGainNotPositiveDefinite:
    case ErrorCode::kNotColumnDegenerate:
    case ErrorCode::kNotApplicable:
    case ErrorCode::kN1Singular:
    case ErrorCode::kNonUniformRelativeDegree:
      return kExitAnalysis;
    case ErrorCode::kDivisionByZero:
    case ErrorCode::kMissingSymbol:
    case ErrorCode::kNearSingularGamma:
    case ErrorCode::kSingularState:
    case ErrorCode::kDivergence:
      return kExitRuntime;
  }
  return kExitRuntime;
}

namespace {

// Runs `body`, mapping library errors to exit codes with a one-line
// diagnostic on `err`.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error [i/o error]: " << e.what() << "\n";
    return kExitParse;
  }
}

void print(std::ostream& out, const Json& j) { out << j.dump(2) << "\n"; }

SynthesisResult synthesize_file(const SystemFile& f) {
  return synthesize(f.model, f.case_hint, f.synthesis);
}

Json warnings_json(const std::vector<std::string>& w) {
  Json a = Json::array();
  for (const auto& s : w) a.push_back(s);
  return a;
}

}  // namespace

int cmd_analyze(const std::string& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SystemFile f = load_system_file(path);
    const SystemModel& m = f.model;
    Json j;
    j["schema"] = kAnalysisSchema;
    j["model"] = m.id;
    j["n"] = m.n();
    j["m1"] = m.m1();
    j["m2"] = m.m2();
    auto y1 = vector_relative_degree(m, OutputBlock::kY1, InputChannel::kU);
    j["y1"] = report_json(y1, m.m1());
    if (m.m2() > 0) j["y2"] = report_json(vector_relative_degree(m, OutputBlock::kY2, InputChannel::kU), m.m1());
    j["recommended_case"] = y1.regular ? 1 : 2;
    j["warnings"] = warnings_json(f.warnings);
    print(out, j);
    return static_cast<int>(kExitOk);
  });
}

int cmd_check(const std::string& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SystemFile f = load_system_file(path);
    SynthesisResult s = synthesize_file(f);
    Json j;
    j["schema"] = kCertificateSchema;
    j["model"] = s.model_id;
    j["case"] = s.case_id;
    Json cert = certificate_json(s.feasibility);
    for (auto& [k, v] : cert.items()) j[k] = v;
    if (s.case_id == 2) j["role_swap"] = role_swap_json(role_swap_report(s));
    print(out, j);
    return static_cast<int>(s.feasibility.feasible ? kExitOk : kExitInfeasible);
  });
}

int cmd_synthesize(const std::string& path, const std::optional<std::string>& emit, std::ostream& out,
                   std::ostream& err) {
  return guarded(err, [&] {
    SystemFile f = load_system_file(path);
    Json j = synthesis_json(synthesize_file(f));
    if (emit) {
      std::ofstream os(*emit, std::ios::binary);
      if (!os) throw Error(ErrorCode::kIo, "cannot write " + *emit);
      os << j.dump(2) << "\n";
      out << "wrote " << *emit << "\n";
    } else {
      print(out, j);
    }
    return static_cast<int>(kExitOk);
  });
}

namespace {

// Default reference: hold the outputs at their operating-point values.
Trajectory hold_reference(const ClosedLoop& loop, const Assignment& x0) {
  LoopEvaluator ev(loop);
  std::vector<double> plant;
  for (const auto& s : loop.plant_states) {
    auto it = x0.find(s);
    plant.push_back(it != x0.end() ? it->second : loop.operating_point.at(s));
  }
  std::vector<double> ref(ev.reference_size(), 0.0);
  std::vector<double> u(ev.input_size(), 0.0);
  ev.load(plant, ref, u);
  Trajectory t;
  for (double y : ev.outputs()) t.channels.push_back(TrajectoryChannel::constant(y));
  return t;
}

struct RunOutcome {
  int code = kExitOk;
  std::string diagnostic;
  std::optional<SimulationTrace> trace;
  std::optional<TraceMetrics> metrics;
};

RunOutcome run_one(const SynthesisResult& s, const Trajectory& traj, const SimulationOptions& opt, double tol) {
  RunOutcome r;
  try {
    r.trace = run_closed_loop(s, traj, opt);
    r.metrics = trace_metrics(*r.trace);
    // In lock-extra mode only y1 is steered.
    double e = 0.0;
    const auto& last = r.trace->e.back();
    std::size_t steered = opt.control.lock_extra ? static_cast<std::size_t>(s.loop.m1) : last.size();
    for (std::size_t c = 0; c < steered; ++c) e += last[c] * last[c];
    if (!(std::sqrt(e) < tol)) {
      r.code = kExitRuntime;
      r.diagnostic = "did not converge: final error " + std::to_string(std::sqrt(e)) + " above tolerance " +
                     std::to_string(tol);
    }
  } catch (const Error& e) {
    r.code = exit_code_for(e.code());
    r.diagnostic = std::string("error [") + error_code_name(e.code()) + "]: " + e.what();
  }
  return r;
}

void write_trace(const SimulationTrace& tr, const std::string& path, const std::string& format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  if (format == "json") write_trace_json(os, tr);
  else write_trace_csv(os, tr);
}

std::string sweep_path(const std::string& base, std::size_t index) {
  auto dot = base.find_last_of('.');
  auto slash = base.find_last_of('/');
  std::string tag = "_" + std::to_string(index);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return base + tag;
  return base.substr(0, dot) + tag + base.substr(dot);
}

}  // namespace

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.format != "csv" && args.format != "json")
      throw Error(ErrorCode::kIo, "unknown trace format '" + args.format + "'");
    SystemFile f = load_system_file(args.file);
    SynthesisResult s;
    if (args.controller) {
      std::ifstream in(*args.controller, std::ios::binary);
      if (!in) throw Error(ErrorCode::kIo, "cannot open " + *args.controller);
      s = synthesis_from_json(Json::parse(in));
    } else {
      s = synthesize_file(f);
    }
    int channels = static_cast<int>(s.loop.rho.size());
    SimulationOptions opt = simulation_options(f, channels);
    if (args.seed) opt.seed = *args.seed;
    if (args.lock_extra) opt.control.lock_extra = true;
    Trajectory traj = f.trajectory ? *f.trajectory : hold_reference(s.loop, opt.x0);

    std::vector<SimulationOptions> runs;
    if (args.sweep.empty()) {
      runs.push_back(opt);
    } else {
      for (double l : args.sweep) {
        SimulationOptions o = opt;
        o.law.L = l * Eigen::MatrixXd::Identity(channels, channels);
        runs.push_back(o);
      }
    }
    std::vector<std::future<RunOutcome>> jobs;
    for (const auto& o : runs)
      jobs.push_back(std::async(std::launch::async, run_one, std::cref(s), std::cref(traj), o,
                                f.simulation.tolerance));
    int code = kExitOk;
    Json summary = Json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      RunOutcome r = jobs[i].get();
      Json j;
      if (r.metrics) {
        j = metrics_json(*r.metrics, *r.trace);
        if (args.out) {
          std::string path = args.sweep.empty() ? *args.out : sweep_path(*args.out, i);
          write_trace(*r.trace, path, args.format);
          j["trace"] = path;
        }
      } else {
        j["schema"] = kMetricsSchema;
        j["model"] = s.model_id;
      }
      if (!args.sweep.empty()) j["L"] = args.sweep[i];
      j["exit_code"] = r.code;
      if (!r.diagnostic.empty()) {
        j["diagnostic"] = r.diagnostic;
        err << r.diagnostic << "\n";
      }
      code = std::max(code, r.code);
      summary.push_back(std::move(j));
    }
    if (args.sweep.empty()) {
      print(out, summary.front());
    } else {
      Json j;
      j["schema"] = kSweepSchema;
      j["model"] = s.model_id;
      j["exit_code"] = code;
      j["sweep"] = std::move(summary);
      print(out, j);
    }
    return code;
  });
}

}  // namespace ioext
