#include "ioext/models.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ioext/error.hpp"

namespace ioext {

namespace {

Expr c(double v) { return Expr::constant(v); }
Expr sym(const std::string& s) { return Expr::symbol(s); }

SymbolTable unicycle_table() {
  SymbolTable t;
  t.add("x1", SymbolKind::kState);
  t.add("u1", SymbolKind::kInput);
  t.add("u2", SymbolKind::kInput);
  t.add("w1", SymbolKind::kExtraInput);
  return t;
}

struct ParsedDirection {
  Expr h1, h2, h3;
};

ParsedDirection parse_direction(const DirectionTriple& h) {
  SymbolTable t;
  t.add("x1", SymbolKind::kState);
  return {simplify(parse_expr(h.h1, t)), simplify(parse_expr(h.h2, t)), simplify(parse_expr(h.h3, t))};
}

ExprMatrix scalar(Expr e) {
  ExprMatrix m(1, 1);
  m(0, 0) = std::move(e);
  return m;
}

}  // namespace

DirectionTriple admissible_direction() { return {"-sin(x1)", "cos(x1)", "0"}; }

SystemModel unicycle(const DirectionTriple& h) {
  ParsedDirection d = parse_direction(h);
  SystemModel m;
  m.id = "unicycle";
  m.states = {"x1"};
  m.inputs = {"u1", "u2"};
  m.extras = {"w1"};
  m.table = unicycle_table();
  Expr x = sym("x1");
  m.f = {c(0)};
  m.G = ExprMatrix(1, 2);
  m.G(0, 1) = c(1);
  m.H = scalar(d.h3);
  m.h1 = {c(0), c(0)};
  m.Abar1 = ExprMatrix(2, 2);
  m.Abar1(0, 0) = Expr::cos(x);
  m.Abar1(1, 0) = Expr::sin(x);
  m.Bbar1 = ExprMatrix(2, 1);
  m.Bbar1(0, 0) = d.h1;
  m.Bbar1(1, 0) = d.h2;
  m.h2 = {x};
  m.singular = {"u1"};
  m.angular_outputs = {2};
  m.operating_point = {{"x1", 0.0}, {"u1", 1.0}};
  finalize_model(m);
  return m;
}

Expr lambda_of(const DirectionTriple& h) {
  ParsedDirection d = parse_direction(h);
  Expr x = sym("x1"), u1 = sym("u1");
  return simplify(-Expr::sin(x) / u1 * d.h1 + Expr::cos(x) / u1 * d.h2);
}

std::vector<double> rolling_constraint_residual(const SimulationTrace& trace, const DirectionTriple& h) {
  ParsedDirection d = parse_direction(h);
  auto col = [](const std::vector<std::string>& names, const std::string& n) -> long {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return static_cast<long>(i);
    return -1;
  };
  long ix = col(trace.x_names, "x1"), iu1 = col(trace.u_names, "u1"), iu2 = col(trace.u_names, "u2");
  long iw = col(trace.w_names, "w1");
  if (ix < 0 || iu1 < 0 || iu2 < 0) throw Error(ErrorCode::kInvalidModel, "trace is not a unicycle trace");
  std::vector<double> out;
  out.reserve(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    double th = trace.x[k][ix], u1 = trace.u[k][iu1], u2 = trace.u[k][iu2];
    double w = iw >= 0 ? trace.w[k][iw] : 0.0;
    Assignment a{{"x1", th}};
    double h1 = eval_expr(d.h1, a), h2 = eval_expr(d.h2, a), h3 = eval_expr(d.h3, a);
    double vx = u1 * std::cos(th) + h1 * w;
    double vy = u1 * std::sin(th) + h2 * w;
    double thdot = u2 + h3 * w;
    out.push_back(h1 * vx + h2 * vy + h3 * thdot);
  }
  return out;
}

GoldenMatrices parse_unicycle_golden(std::string_view text, const DirectionTriple& h) {
  SymbolTable t = unicycle_table();
  for (const char* p : {"h1", "h2", "h3", "dh1", "dh2"}) t.add(p, SymbolKind::kAuxiliary);
  ParsedDirection d = parse_direction(h);
  std::map<std::string, Expr> sub{{"h1", d.h1},
                                  {"h2", d.h2},
                                  {"h3", d.h3},
                                  {"dh1", simplify(differentiate(d.h1, "x1"))},
                                  {"dh2", simplify(differentiate(d.h2, "x1"))}};

  std::map<std::string, ExprMatrix> found;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw SyntaxError("line " + std::to_string(lineno) + ": expected 'name = value'", 0);
    std::string name = line.substr(0, eq);
    name.erase(name.find_last_not_of(" \t") + 1);
    name.erase(0, name.find_first_not_of(" \t"));
    try {
      found[name] = parse_matrix(std::string_view(line).substr(eq + 1), t).substituted(sub);
    } catch (const SyntaxError& e) {
      throw SyntaxError("line " + std::to_string(lineno) + ": " + std::string(e.what()).substr(14),
                        eq + 1 + e.offset());
    }
  }
  auto need = [&](const char* k) -> const ExprMatrix& {
    auto it = found.find(k);
    if (it == found.end()) throw Error(ErrorCode::kIo, std::string("golden fixture lacks '") + k + "'");
    return it->second;
  };
  GoldenMatrices g;
  g.A1 = need("A1");
  g.N1 = need("N1");
  g.N2 = need("N2");
  g.n = need("n").column_vector(0);
  g.Gamma1 = need("Gamma1");
  g.Gamma = need("Gamma");
  g.Q = need("Q");
  g.lambda = need("lambda")(0, 0);
  return g;
}

GoldenMatrices load_unicycle_golden(const std::string& path, const DirectionTriple& h) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_unicycle_golden(ss.str(), h);
}

std::string default_golden_path() {
#ifdef IOEXT_SOURCE_DIR
  return std::string(IOEXT_SOURCE_DIR) + "/models/unicycle.golden";
#else
  return "models/unicycle.golden";
#endif
}

namespace {

ExprMatrix one_by_one(double v) { return scalar(c(v)); }

OracleSystem double_integrator() {
  OracleSystem o;
  SystemModel& m = o.model;
  m.id = "double_integrator";
  m.states = {"x1", "x2"};
  m.inputs = {"u1"};
  m.f = {sym("x2"), c(0)};
  m.G = ExprMatrix(2, 1);
  m.G(1, 0) = c(1);
  m.h1 = {sym("x1")};
  finalize_model(m);
  o.r1 = {2};
  o.A1 = one_by_one(1);
  o.B1 = ExprMatrix(1, 0);
  return o;
}

// dx1 = x2 + w1, dx2 = u1; y1 = x2, y2 = x1 + x2.
OracleSystem linear_chain() {
  OracleSystem o;
  SystemModel& m = o.model;
  m.id = "linear_chain";
  m.states = {"x1", "x2"};
  m.inputs = {"u1"};
  m.extras = {"w1"};
  m.f = {sym("x2"), c(0)};
  m.G = ExprMatrix(2, 1);
  m.G(1, 0) = c(1);
  m.H = ExprMatrix(2, 1);
  m.H(0, 0) = c(1);
  m.h1 = {sym("x2")};
  m.h2 = {sym("x1") + sym("x2")};
  finalize_model(m);
  o.r1 = {1};
  o.r2 = {1};
  o.A1 = one_by_one(1);
  o.B1 = one_by_one(0);
  o.A2 = one_by_one(1);
  o.B2 = one_by_one(1);
  o.Gamma = ExprMatrix::identity(2);
  o.Gamma(1, 0) = c(1);
  return o;
}

// dx1 = x2, dx2 = u1 + w1; y1 = x1 + u1, y2 = x2.
OracleSystem feedthrough() {
  OracleSystem o;
  SystemModel& m = o.model;
  m.id = "feedthrough";
  m.states = {"x1", "x2"};
  m.inputs = {"u1"};
  m.extras = {"w1"};
  m.f = {sym("x2"), c(0)};
  m.G = ExprMatrix(2, 1);
  m.G(1, 0) = c(1);
  m.H = ExprMatrix(2, 1);
  m.H(1, 0) = c(1);
  m.h1 = {sym("x1")};
  m.Abar1 = one_by_one(1);
  m.h2 = {sym("x2")};
  finalize_model(m);
  o.r1 = {0};
  o.r2 = {1};
  o.A1 = one_by_one(1);
  o.B1 = one_by_one(0);
  o.A2 = one_by_one(1);
  o.B2 = one_by_one(1);
  o.Gamma = ExprMatrix::identity(2);
  o.Gamma(1, 0) = c(1);
  return o;
}

// Two double integrators sharing u1; w1 reaches only the second one.
OracleSystem twin_integrators() {
  OracleSystem o;
  SystemModel& m = o.model;
  m.id = "twin_integrators";
  m.states = {"x1", "x2", "x3", "x4"};
  m.inputs = {"u1"};
  m.extras = {"w1"};
  m.f = {sym("x2"), c(0), sym("x4"), c(0)};
  m.G = ExprMatrix(4, 1);
  m.G(1, 0) = c(1);
  m.G(3, 0) = c(2);
  m.H = ExprMatrix(4, 1);
  m.H(3, 0) = c(1);
  m.h1 = {sym("x1")};
  m.h2 = {sym("x3")};
  finalize_model(m);
  o.r1 = {2};
  o.r2 = {2};
  o.A1 = one_by_one(1);
  o.B1 = one_by_one(0);
  o.A2 = one_by_one(2);
  o.B2 = one_by_one(1);
  o.Gamma = ExprMatrix::identity(2);
  o.Gamma(1, 0) = c(2);
  return o;
}

}  // namespace

std::vector<OracleSystem> linear_oracle_suite() {
  return {double_integrator(), linear_chain(), feedthrough(), twin_integrators()};
}

SystemModel random_linear_case1(std::mt19937_64& rng, bool degenerate) {
  std::uniform_int_distribution<int> coef(-3, 3);
  using V = Eigen::Vector3d;
  auto draw = [&] { return V(coef(rng), coef(rng), coef(rng)); };
  Eigen::Matrix3d A;
  V b, d, cr, h;
  while (true) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) A(i, j) = coef(rng);
    b = draw();
    d = draw();
    cr = draw();
    h = draw();
    double cb = cr.dot(b);
    if (std::abs(cb) < 0.5) continue;
    V q = d - (cr.dot(d) / cb) * b;
    if (degenerate) {
      if (q.squaredNorm() > 1e-12) h -= (h.dot(q) / q.squaredNorm()) * q;
    } else if (std::abs(h.dot(q)) < 0.5) {
      continue;
    }
    if (std::abs(h.dot(b)) < 0.5) continue;
    break;
  }
  SystemModel m;
  m.id = degenerate ? "random_linear_degenerate" : "random_linear";
  m.states = {"x1", "x2", "x3"};
  m.inputs = {"u1"};
  m.extras = {"w1"};
  auto row = [&](const V& v) {
    std::vector<Expr> terms;
    for (int j = 0; j < 3; ++j)
      if (v(j) != 0.0) terms.push_back(c(v(j)) * sym(m.states[j]));
    return simplify(Expr::add(std::move(terms)));
  };
  m.G = ExprMatrix(3, 1);
  m.H = ExprMatrix(3, 1);
  for (int i = 0; i < 3; ++i) {
    m.f.push_back(row(A.row(i).transpose()));
    m.G(i, 0) = c(b(i));
    m.H(i, 0) = c(d(i));
  }
  m.h1 = {row(cr)};
  m.h2 = {row(h)};
  finalize_model(m);
  return m;
}

}  // namespace ioext
