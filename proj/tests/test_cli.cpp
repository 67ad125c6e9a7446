#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ioext/cli.hpp"
#include "ioext/serialize.hpp"
#include "ioext/sysfile.hpp"

using namespace ioext;
namespace fs = std::filesystem;

namespace {

std::string model_path(const std::string& name) { return std::string(IOEXT_SOURCE_DIR) + "/models/" + name; }

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("ioext_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  fs::path p = scratch() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out, err;
  Json json() const { return Json::parse(out); }
};

template <class F>
CliRun run(F&& f) {
  std::ostringstream out, err;
  int code = f(out, err);
  return {code, out.str(), err.str()};
}

const char* kMinimal = R"([symbols]
states = x1, x2
inputs = u1

[dynamics]
f = [x2; 0]
G = [0; 1]

[outputs]
h1 = [x1]
)";

FileSyntaxError parse_error(const std::string& text) {
  try {
    parse_system_file(text, "t.sys");
  } catch (const FileSyntaxError& e) {
    return e;
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return FileSyntaxError("t.sys", 0, 0, "", 0);
}

}  // namespace

TEST(SystemFile, ParsesUnicycle) {
  SystemFile f = load_system_file(model_path("unicycle.sys"));
  EXPECT_EQ(f.model.id, "unicycle");
  EXPECT_EQ(f.model.n(), 1);
  EXPECT_EQ(f.model.m1(), 2);
  EXPECT_EQ(f.model.m2(), 1);
  EXPECT_EQ(f.model.singular, (std::set<std::string>{"u1"}));
  EXPECT_EQ(f.model.angular_outputs, (std::set<int>{2}));
  EXPECT_EQ(to_string(f.model.Abar1(1, 0)), "sin(x1)");
  ASSERT_TRUE(f.trajectory.has_value());
  EXPECT_EQ(f.trajectory->channels.size(), 3u);
  EXPECT_DOUBLE_EQ(f.trajectory->channels[2](2.0), 0.1);
  EXPECT_EQ(f.simulation.x0.at("u1"), 1.0);
  EXPECT_EQ(outer_gain(f, 3), 5.0 * Eigen::MatrixXd::Identity(3, 3));
}

TEST(SystemFile, DefaultsForOptionalSections) {
  SystemFile f = parse_system_file(kMinimal, "dir/minimal.sys");
  EXPECT_EQ(f.model.id, "minimal");
  EXPECT_EQ(f.case_hint, CaseHint::kAuto);
  EXPECT_FALSE(f.trajectory.has_value());
  EXPECT_EQ(f.simulation.T, 10.0);
  EXPECT_EQ(f.simulation.dt, 1e-3);
  EXPECT_EQ(f.model.G(1, 0), Expr::constant(1));
  EXPECT_TRUE(f.model.Abar1(0, 0).is_zero());
}

TEST(SystemFile, ErrorsCarryLocations) {
  std::string base = kMinimal;
  {
    auto e = parse_error(base + "h2 = [x1 +* 2]\n");
    EXPECT_EQ(e.line(), 11);
  }
  {
    std::string t = base;
    t.replace(t.find("[x2; 0]"), 7, "[x2; q]");
    auto e = parse_error(t);
    EXPECT_EQ(e.line(), 6);
    EXPECT_EQ(e.column(), 10);
    EXPECT_NE(std::string(e.what()).find("undeclared symbol 'q'"), std::string::npos) << e.what();
  }
  {
    std::string t = base;
    t.replace(t.find("G = [0; 1]"), 10, "G = [0, 1]");
    auto e = parse_error(t);
    EXPECT_EQ(e.line(), 7);
    EXPECT_NE(std::string(e.what()).find("G must be 2x1"), std::string::npos) << e.what();
  }
  EXPECT_EQ(parse_error(base + "\n[bogus]\n").line(), 12);
  EXPECT_EQ(parse_error(base + "colour = red\n").line(), 11);
  EXPECT_EQ(parse_error("x1 = 0\n").line(), 1);
  EXPECT_EQ(parse_error(base + "Abar1 = [1\n").line(), 11);
  EXPECT_NE(std::string(parse_error(base + "[dims]\nn = 3\n").what()).find("disagrees"), std::string::npos);
}

TEST(SystemFile, MultiLineMatrixErrorPointsIntoContinuation) {
  std::string t = kMinimal;
  t.replace(t.find("G = [0; 1]"), 10, "G = [0;\n     bad]");
  auto e = parse_error(t);
  EXPECT_EQ(e.line(), 8);
  EXPECT_EQ(e.column(), 6);
}

TEST(SystemFile, TrajectoryChannels) {
  EXPECT_DOUBLE_EQ(parse_channel("constant(2.5)")(3.0), 2.5);
  EXPECT_DOUBLE_EQ(parse_channel("sinusoid(1, 2, 3, 0)")(0.0, 1), 6.0);
  EXPECT_DOUBLE_EQ(parse_channel("polynomial(1, 0, 3)")(2.0), 13.0);
  EXPECT_DOUBLE_EQ(parse_channel("spline(0:0, 1:2, 2:0)")(1.0), 2.0);
  EXPECT_THROW(parse_channel("square(1)"), SyntaxError);
  EXPECT_THROW(parse_channel("spline(0, 1)"), SyntaxError);
}

TEST(ExitCodes, DisjointContract) {
  EXPECT_EQ(exit_code_for(ErrorCode::kSyntax), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::kMaxOrderExceeded), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kN1Singular), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kNearSingularGamma), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::kDivergence), 4);
}

TEST(Analyze, Unicycle) {
  CliRun r = run([](auto& o, auto& e) { return cmd_analyze(model_path("unicycle.sys"), o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = r.json();
  EXPECT_EQ(j["y1"]["r"], (Json::array({0, 0})));
  EXPECT_FALSE(j["y1"]["regular"].get<bool>());
  EXPECT_EQ(j["y1"]["zero_columns"], (Json::array({1})));
  EXPECT_EQ(j["recommended_case"], 2);
}

TEST(Analyze, DoubleIntegrator) {
  CliRun r = run([](auto& o, auto& e) { return cmd_analyze(model_path("double_integrator.sys"), o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = r.json();
  EXPECT_EQ(j["y1"]["r"], (Json::array({2})));
  EXPECT_TRUE(j["y1"]["regular"].get<bool>());
}

TEST(Analyze, MalformedAndBlind) {
  std::string bad = write_file("bad.sys", std::string(kMinimal) + "h2 = [(x1]\n");
  CliRun r = run([&](auto& o, auto& e) { return cmd_analyze(bad, o, e); });
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.sys:11:"), std::string::npos) << r.err;

  std::string blind = std::string(kMinimal);
  blind.replace(blind.find("f = [x2; 0]"), 11, "f = [0; 0]");
  std::string p = write_file("blind.sys", blind);
  EXPECT_EQ(run([&](auto& o, auto& e) { return cmd_analyze(p, o, e); }).code, 2);

  EXPECT_EQ(run([](auto& o, auto& e) { return cmd_analyze("/nonexistent.sys", o, e); }).code, 1);
}

TEST(Check, Examples) {
  CliRun ok = run([](auto& o, auto& e) { return cmd_check(model_path("unicycle.sys"), o, e); });
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(ok.json()["condition"], "1/u1");
  EXPECT_TRUE(ok.json()["feasible"].get<bool>());
  EXPECT_TRUE(ok.json()["role_swap"]["extra_inputs_confined_to_y1"].get<bool>());

  CliRun bad = run([](auto& o, auto& e) { return cmd_check(model_path("unicycle_infeasible.sys"), o, e); });
  EXPECT_EQ(bad.code, 3);
  EXPECT_EQ(bad.json()["condition"], "0");

  CliRun lin = run([](auto& o, auto& e) { return cmd_check(model_path("case1_identity.sys"), o, e); });
  EXPECT_EQ(lin.code, 0) << lin.err;
  EXPECT_EQ(lin.json()["case"], 1);
  EXPECT_EQ(lin.json()["condition"], "1");
}

TEST(Synthesize, EmitsFixtureStrings) {
  CliRun r = run([](auto& o, auto& e) { return cmd_synthesize(model_path("unicycle.sys"), std::nullopt, o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = r.json();
  EXPECT_EQ(j["schema"], kSynthesisSchema);
  const Json n1 = Json::parse(R"j([["cos(x1)", "-u1*sin(x1)"], ["sin(x1)", "u1*cos(x1)"]])j");
  EXPECT_EQ(j["intermediates"]["N1"], n1);
  EXPECT_EQ(j["Gamma"][2][2], "0");

  CliRun c1 = run([](auto& o, auto& e) { return cmd_synthesize(model_path("linear_chain.sys"), std::nullopt, o, e); });
  ASSERT_EQ(c1.code, 0) << c1.err;
  EXPECT_EQ(c1.json()["Gamma"][0][0], "1");
  CliRun c3 = run([](auto& o, auto& e) { return cmd_synthesize(model_path("case1_identity.sys"), std::nullopt, o, e); });
  EXPECT_EQ(c3.json()["Gamma"][0][0], "1");
}

TEST(Synthesize, ReloadRoundTrip) {
  for (const char* name : {"unicycle.sys", "planar_quadrotor.sys"}) {
    std::string emitted = (scratch() / (std::string(name) + ".json")).string();
    ASSERT_EQ(run([&](auto& o, auto& e) { return cmd_synthesize(model_path(name), emitted, o, e); }).code, 0);
    SystemFile file = load_system_file(model_path(name));
    SynthesisResult direct = synthesize(file.model, file.case_hint, file.synthesis);
    SynthesisResult loaded = synthesis_from_json(Json::parse(read_file(emitted)));
    EXPECT_EQ(loaded.Gamma, direct.Gamma) << name;
    EXPECT_EQ(loaded.phi, direct.phi) << name;
    EXPECT_EQ(synthesis_json(loaded).dump(), synthesis_json(direct).dump()) << name;

    SimulateArgs a, b;
    a.file = b.file = model_path(name);
    a.out = (scratch() / (std::string(name) + ".direct.csv")).string();
    b.out = (scratch() / (std::string(name) + ".loaded.csv")).string();
    b.controller = emitted;
    CliRun ra = run([&](auto& o, auto& e) { return cmd_simulate(a, o, e); });
    CliRun rb = run([&](auto& o, auto& e) { return cmd_simulate(b, o, e); });
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0) << rb.err;
    Json ma = ra.json(), mb = rb.json();
    ma.erase("trace");
    mb.erase("trace");
    EXPECT_EQ(ma, mb) << name;
    EXPECT_EQ(read_file(*a.out), read_file(*b.out)) << name;
  }
}

TEST(Simulate, UnicycleDefault) {
  SimulateArgs a;
  a.file = model_path("unicycle.sys");
  CliRun r = run([&](auto& o, auto& e) { return cmd_simulate(a, o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(r.json()["final_error"].get<double>(), 1e-3);
  EXPECT_LT(r.json()["linearization_residual"].get<double>(), 1e-2);
}

TEST(Simulate, InfeasibleIsRuntimeError) {
  SimulateArgs a;
  a.file = model_path("unicycle_infeasible.sys");
  CliRun r = run([&](auto& o, auto& e) { return cmd_simulate(a, o, e); });
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("near-singular"), std::string::npos) << r.err;
}

TEST(Simulate, SeededRunsAreByteIdentical) {
  std::string sys = read_file(model_path("unicycle.sys"));
  sys.replace(sys.find("seed = 0"), 8, "seed = 0\njitter = 0.02\nT = 1");
  sys.erase(sys.find("T = 10\n"), 7);
  std::string p = write_file("jitter.sys", sys);
  for (const char* fmt : {"csv", "json"}) {
    SimulateArgs a;
    a.file = p;
    a.format = fmt;
    a.seed = 42;
    a.out = (scratch() / (std::string("s1.") + fmt)).string();
    SimulateArgs b = a;
    b.out = (scratch() / (std::string("s2.") + fmt)).string();
    SimulateArgs c = a;
    c.seed = 43;
    c.out = (scratch() / (std::string("s3.") + fmt)).string();
    for (auto* args : {&a, &b, &c}) ASSERT_EQ(run([&](auto& o, auto& e) { return cmd_simulate(*args, o, e); }).code, 0);
    EXPECT_EQ(read_file(*a.out), read_file(*b.out)) << fmt;
    EXPECT_NE(read_file(*a.out), read_file(*c.out)) << fmt;
  }
}

TEST(Simulate, SweepRunsEveryGain) {
  SimulateArgs a;
  a.file = model_path("linear_chain.sys");
  a.sweep = {1.0, 2.0, 4.0};
  a.out = (scratch() / "sweep.csv").string();
  CliRun r = run([&](auto& o, auto& e) { return cmd_simulate(a, o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  Json s = r.json()["sweep"];
  ASSERT_EQ(s.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(s[i]["L"], a.sweep[i]);
    EXPECT_TRUE(fs::exists(s[i]["trace"].get<std::string>()));
  }
  // Larger gains settle faster.
  EXPECT_GT(s[0]["settling_time"].get<double>(), s[2]["settling_time"].get<double>());
}

TEST(Simulate, LockExtraWitness) {
  SimulateArgs a;
  a.file = model_path("unicycle.sys");
  a.lock_extra = true;
  CliRun r = run([&](auto& o, auto& e) { return cmd_simulate(a, o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  Json ch = r.json()["channels"];
  EXPECT_LT(ch[0]["final_error"].get<double>(), 1e-3);
  EXPECT_GT(ch[2]["final_error"].get<double>(), 0.1);
}

TEST(Simulate, HoldsOutputsWithoutTrajectory) {
  std::string p = write_file("hold.sys", std::string(kMinimal) + "\n[operating_point]\nx1 = 0.5\n");
  SimulateArgs a;
  a.file = p;
  CliRun r = run([&](auto& o, auto& e) { return cmd_simulate(a, o, e); });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(r.json()["max_error"].get<double>(), 1e-12);
}
