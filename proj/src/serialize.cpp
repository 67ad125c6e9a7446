#include "ioext/serialize.hpp"

#include <algorithm>
#include <map>

#include "ioext/error.hpp"

namespace ioext {

Json expr_json(const ExprVector& v) {
  Json out = Json::array();
  for (const auto& e : v) out.push_back(to_string(e));
  return out;
}

Json expr_json(const ExprMatrix& m) {
  Json out = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(expr_json(m.row_vector(i)));
  return out;
}

Json numeric_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

Json optional_ints(const std::vector<std::optional<int>>& v) {
  Json out = Json::array();
  for (const auto& x : v) out.push_back(x ? Json(*x) : Json(nullptr));
  return out;
}

// Stored strings are simplified; re-simplifying restores the canonical tree.
Expr read_expr(const Json& j, const SymbolTable& t) { return simplify(parse_expr(j.get<std::string>(), t)); }

ExprVector read_vector(const Json& j, const SymbolTable& t) {
  ExprVector out;
  for (const auto& s : j) out.push_back(read_expr(s, t));
  return out;
}

ExprMatrix read_matrix(const Json& j, const SymbolTable& t) {
  if (j.empty()) return {};
  ExprMatrix m(j.size(), j.front().size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != m.cols()) throw Error(ErrorCode::kIo, "ragged matrix in JSON");
    for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) = read_expr(j[i][k], t);
  }
  return m;
}

Eigen::MatrixXd read_numeric(const Json& j) {
  if (j.empty()) return {};
  Eigen::MatrixXd m(j.size(), j.front().size());
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  return m;
}

Json named(const std::vector<std::pair<std::string, Expr>>& v) {
  Json out = Json::array();
  for (const auto& [n, e] : v) out.push_back(Json{{"name", n}, {"expr", to_string(e)}});
  return out;
}

std::vector<std::pair<std::string, Expr>> read_named(const Json& j, const SymbolTable& t) {
  std::vector<std::pair<std::string, Expr>> out;
  for (const auto& x : j) out.emplace_back(x.at("name").get<std::string>(), read_expr(x.at("expr"), t));
  return out;
}

Json sorted_assignment(const Assignment& a) {
  std::map<std::string, double> sorted(a.begin(), a.end());
  Json out = Json::object();
  for (const auto& [k, v] : sorted) out[k] = v;
  return out;
}

}  // namespace

Json report_json(const RelativeDegreeReport& r, int m1) {
  Json j;
  j["block"] = r.block == OutputBlock::kY1 ? "y1" : "y2";
  j["wrt"] = input_channel_name(r.wrt);
  j["r"] = optional_ints(r.r);
  j["r_w"] = optional_ints(r.r_w);
  j["A"] = expr_json(r.A);
  j["B"] = expr_json(r.B);
  j["p"] = expr_json(r.p);
  j["regular"] = r.regular;
  j["rank_at_x0"] = r.rank_at_x0;
  j["constant_rank"] = r.constant_rank;
  j["zero_columns"] = r.zero_columns;
  Json labels = Json::array();
  int offset = r.block == OutputBlock::kY1 ? 0 : m1;
  for (std::size_t i = 0; i < r.r.size(); ++i) labels.push_back(output_label(offset + static_cast<int>(i), m1));
  j["outputs"] = labels;
  return j;
}

Json certificate_json(const FeasibilityCertificate& c) {
  Json j;
  j["condition"] = to_string(c.condition);
  j["value_at_x0"] = c.value_at_x0;
  j["feasible"] = c.feasible;
  j["constant_rank"] = c.constant_rank;
  j["note"] = c.singular_set_note;
  if (c.condition_unextended) {
    j["condition_unextended"] = to_string(*c.condition_unextended);
    j["value_unextended_at_x0"] = *c.value_unextended_at_x0;
    j["variants_agree"] = *c.variants_agree;
  }
  return j;
}

Json role_swap_json(const RoleSwapReport& r) {
  Json cols = Json::array();
  for (const auto& c : r.columns) {
    cols.push_back(
        Json{{"input", c.input}, {"rows", c.rows}, {"reaches_y1", c.reaches_y1}, {"reaches_y2", c.reaches_y2}});
  }
  return Json{{"columns", cols},
              {"extra_inputs_confined_to_y1", r.extra_inputs_confined_to_y1},
              {"virtual_inputs_reach_y2", r.virtual_inputs_reach_y2}};
}

Json metrics_json(const TraceMetrics& m, const SimulationTrace& tr) {
  Json j;
  j["schema"] = kMetricsSchema;
  j["model"] = tr.model_id;
  j["case"] = tr.case_id;
  j["seed"] = tr.seed;
  j["dt"] = tr.dt;
  j["T"] = tr.T;
  j["lock_extra"] = tr.lock_extra;
  j["final_error"] = m.final_error;
  j["max_error"] = m.max_error;
  j["settling_time"] = m.settling_time;
  j["linearization_residual"] = m.linearization_residual;
  j["reference_bound"] = m.reference_bound;
  Json ch = Json::array();
  for (std::size_t c = 0; c < m.channel_max_error.size(); ++c) {
    ch.push_back(Json{{"name", tr.y_names[c]},
                      {"max_error", m.channel_max_error[c]},
                      {"final_error", m.channel_final_error[c]},
                      {"settling_time", m.channel_settling_time[c]}});
  }
  j["channels"] = ch;
  return j;
}

Json closed_loop_json(const ClosedLoop& loop) {
  Json j;
  Json table = Json::array();
  for (const auto& e : loop.table.entries()) table.push_back(Json{{"name", e.name}, {"kind", symbol_kind_name(e.kind)}});
  j["table"] = table;
  j["m1"] = loop.m1;
  j["m2"] = loop.m2;
  j["base_states"] = loop.base_states;
  j["xi_states"] = loop.xi_states;
  j["extra_states"] = loop.extra_states;
  j["plant_states"] = loop.plant_states;
  j["reference_states"] = loop.reference_states;
  j["reference_rhs"] = loop.reference_rhs;
  j["inputs"] = loop.inputs;
  j["measurements"] = named(loop.measurements);
  j["internal_law"] = named(loop.internal_law);
  j["plant_rhs"] = expr_json(loop.plant_rhs);
  j["original_inputs"] = named(loop.original_inputs);
  j["extra_values"] = named(loop.extra_values);
  j["outputs"] = expr_json(loop.outputs);
  j["rho"] = loop.rho;
  Json ders = Json::array();
  for (const auto& d : loop.output_derivatives) ders.push_back(expr_json(d));
  j["output_derivatives"] = ders;
  j["gamma"] = expr_json(loop.gamma);
  j["phi"] = expr_json(loop.phi);
  j["singular"] = loop.singular;
  j["angular_outputs"] = loop.angular_outputs;
  j["operating_point"] = sorted_assignment(loop.operating_point);
  return j;
}

ClosedLoop closed_loop_from_json(const Json& j) {
  ClosedLoop loop;
  for (const auto& e : j.at("table")) {
    auto kind = symbol_kind_from_name(e.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::kIo, "unknown symbol kind " + e.at("kind").dump());
    loop.table.add(e.at("name").get<std::string>(), *kind);
  }
  const SymbolTable& t = loop.table;
  loop.m1 = j.at("m1").get<int>();
  loop.m2 = j.at("m2").get<int>();
  loop.base_states = j.at("base_states").get<std::vector<std::string>>();
  loop.xi_states = j.at("xi_states").get<std::vector<std::string>>();
  loop.extra_states = j.at("extra_states").get<std::vector<std::string>>();
  loop.plant_states = j.at("plant_states").get<std::vector<std::string>>();
  loop.reference_states = j.at("reference_states").get<std::vector<std::string>>();
  loop.reference_rhs = j.at("reference_rhs").get<std::vector<std::string>>();
  loop.inputs = j.at("inputs").get<std::vector<std::string>>();
  loop.measurements = read_named(j.at("measurements"), t);
  loop.internal_law = read_named(j.at("internal_law"), t);
  loop.plant_rhs = read_vector(j.at("plant_rhs"), t);
  loop.original_inputs = read_named(j.at("original_inputs"), t);
  loop.extra_values = read_named(j.at("extra_values"), t);
  loop.outputs = read_vector(j.at("outputs"), t);
  loop.rho = j.at("rho").get<std::vector<int>>();
  for (const auto& d : j.at("output_derivatives")) loop.output_derivatives.push_back(read_vector(d, t));
  loop.gamma = read_matrix(j.at("gamma"), t);
  loop.phi = read_vector(j.at("phi"), t);
  loop.singular = j.at("singular").get<std::set<std::string>>();
  loop.angular_outputs = j.at("angular_outputs").get<std::set<int>>();
  for (const auto& [k, v] : j.at("operating_point").items()) loop.operating_point[k] = v.get<double>();
  return loop;
}

Json synthesis_json(const SynthesisResult& s) {
  Json j;
  j["schema"] = kSynthesisSchema;
  j["model"] = s.model_id;
  j["case"] = s.case_id;
  j["r1"] = s.r1;
  j["r2"] = s.r2;
  j["input_permutation"] = s.input_permutation;
  j["extended_state_layout"] = s.extended_state_layout;
  j["u_ext_layout"] = s.u_ext_layout;
  Json c;
  c["kind"] = s.controller.kind == InternalController::Kind::kStatic ? "static" : "dynamic";
  c["k1"] = s.controller.k1;
  Json gains = Json::array();
  for (const auto& g : s.controller.gains) gains.push_back(numeric_json(g));
  c["gains"] = gains;
  c["inputs"] = s.controller.input_names;
  c["u"] = expr_json(s.controller.u_expr);
  c["xi"] = s.controller.xi_names;
  c["xi_dynamics"] = expr_json(s.controller.xi_dynamics);
  j["controller"] = c;
  j["Gamma"] = expr_json(s.Gamma);
  j["phi"] = expr_json(s.phi);
  j["feasibility"] = certificate_json(s.feasibility);
  Json inter = Json::object();
  for (const auto& [k, m] : s.intermediates) inter[k] = expr_json(m);
  j["intermediates"] = inter;
  j["loop"] = closed_loop_json(s.loop);
  return j;
}

SynthesisResult synthesis_from_json(const Json& j) {
  if (!j.contains("schema") || j.at("schema") != kSynthesisSchema)
    throw Error(ErrorCode::kIo, std::string("expected a document with schema ") + kSynthesisSchema);
  SynthesisResult s;
  s.loop = closed_loop_from_json(j.at("loop"));
  const SymbolTable& t = s.loop.table;
  s.model_id = j.at("model").get<std::string>();
  s.case_id = j.at("case").get<int>();
  s.r1 = j.at("r1").get<std::vector<int>>();
  s.r2 = j.at("r2").get<std::vector<int>>();
  s.input_permutation = j.at("input_permutation").get<std::vector<int>>();
  s.extended_state_layout = j.at("extended_state_layout").get<std::vector<std::string>>();
  s.u_ext_layout = j.at("u_ext_layout").get<std::vector<std::string>>();
  const Json& c = j.at("controller");
  s.controller.kind =
      c.at("kind") == "static" ? InternalController::Kind::kStatic : InternalController::Kind::kDynamic;
  s.controller.k1 = c.at("k1").get<int>();
  for (const auto& g : c.at("gains")) s.controller.gains.push_back(read_numeric(g));
  s.controller.input_names = c.at("inputs").get<std::vector<std::string>>();
  s.controller.u_expr = read_vector(c.at("u"), t);
  s.controller.xi_names = c.at("xi").get<std::vector<std::string>>();
  s.controller.xi_dynamics = read_vector(c.at("xi_dynamics"), t);
  s.Gamma = read_matrix(j.at("Gamma"), t);
  s.phi = read_vector(j.at("phi"), t);
  const Json& f = j.at("feasibility");
  s.feasibility.condition = read_expr(f.at("condition"), t);
  s.feasibility.value_at_x0 = f.at("value_at_x0").get<double>();
  s.feasibility.feasible = f.at("feasible").get<bool>();
  s.feasibility.constant_rank = f.at("constant_rank").get<bool>();
  s.feasibility.singular_set_note = f.at("note").get<std::string>();
  if (f.contains("condition_unextended")) {
    s.feasibility.condition_unextended = read_expr(f.at("condition_unextended"), t);
    s.feasibility.value_unextended_at_x0 = f.at("value_unextended_at_x0").get<double>();
    s.feasibility.variants_agree = f.at("variants_agree").get<bool>();
  }
  for (const auto& [k, m] : j.at("intermediates").items()) s.intermediates[k] = read_matrix(m, t);
  return s;
}

}  // namespace ioext
