#include "ioext/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ioext/error.hpp"

namespace ioext {

std::string output_label(int channel, int m1) {
  if (channel < m1) return "y1[" + std::to_string(channel + 1) + "]";
  return "y2[" + std::to_string(channel - m1 + 1) + "]";
}

std::vector<Eigen::MatrixXd> default_gains(std::size_t count, int m1, double k) {
  return std::vector<Eigen::MatrixXd>(count, k * Eigen::MatrixXd::Identity(m1, m1));
}

void check_gains(const std::vector<Eigen::MatrixXd>& gains, std::size_t count, int m1) {
  if (gains.size() != count) {
    throw Error(ErrorCode::kInvalidModel, "expected " + std::to_string(count) + " gain matrices, got " +
                                              std::to_string(gains.size()));
  }
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto& K = gains[i];
    if (K.rows() != m1 || K.cols() != m1) {
      throw Error(ErrorCode::kInvalidModel, "gain K" + std::to_string(i) + " must be " + std::to_string(m1) + "x" +
                                                std::to_string(m1));
    }
    double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw Error(ErrorCode::kGainNotPositiveDefinite, "gain not PD: K" + std::to_string(i) + " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
    if (eig.eigenvalues().minCoeff() <= 1e-12) {
      throw Error(ErrorCode::kGainNotPositiveDefinite,
                  "gain not PD: K" + std::to_string(i) + " has eigenvalue " + std::to_string(eig.eigenvalues().minCoeff()));
    }
  }
}

namespace {

ExprVector symbols_of(const std::vector<std::string>& names) {
  ExprVector out;
  for (const auto& n : names) out.push_back(Expr::symbol(n));
  return out;
}

ExprVector zeros(std::size_t n) { return ExprVector(n, Expr::constant(0.0)); }

std::map<std::string, Expr> zero_map(const std::vector<std::string>& names) {
  std::map<std::string, Expr> out;
  for (const auto& n : names) out[n] = Expr::constant(0.0);
  return out;
}

// Rebuilds the symbol table in layout order, keeping kinds for names that are
// not part of the layout lists (auxiliaries declared by the model file).
SymbolTable layout_table(const SystemModel& m, const std::vector<std::string>& controller_states) {
  SymbolTable t;
  for (const auto& s : m.states) {
    bool ctrl = std::find(controller_states.begin(), controller_states.end(), s) != controller_states.end();
    t.add(s, ctrl ? SymbolKind::kControllerState : SymbolKind::kState);
  }
  t.add_all(m.inputs, SymbolKind::kInput);
  t.add_all(m.extras, SymbolKind::kExtraInput);
  for (const auto& e : m.table.entries()) {
    if (!t.contains(e.name)) t.add(e.name, e.kind);
  }
  return t;
}

std::vector<std::string> names_with_kind(const SystemModel& m, SymbolKind kind) {
  std::vector<std::string> out;
  for (const auto& s : m.states) {
    if (m.table.kind_of(s) == kind) out.push_back(s);
  }
  return out;
}

int uniform_degree(const RelativeDegreeReport& rep) {
  std::vector<int> r = rep.degrees();
  if (r.empty()) return 0;
  for (int v : r) {
    if (v != r.front()) {
      throw Error(ErrorCode::kNonUniformRelativeDegree,
                  "non-uniform relative degree for y1; the internal controller needs equal degrees");
    }
  }
  return r.front();
}

// The extra input must not show up below the level at which u appears.
void require_same_level(const RelativeDegreeReport& rep, const char* block) {
  for (std::size_t i = 0; i < rep.r.size(); ++i) {
    if (rep.r_w[i] && rep.r[i] && *rep.r_w[i] < *rep.r[i]) {
      throw Error(ErrorCode::kAssumptionViolated,
                  std::string("assumption violated: w reaches ") + block + "[" + std::to_string(i + 1) +
                      "] at order " + std::to_string(*rep.r_w[i]) + " before u (order " +
                      std::to_string(*rep.r[i]) + ")");
    }
  }
}

// Sum_i K_i (r^(i) - y^(i)) over orders [0, count).
ExprVector error_feedback(const std::vector<Eigen::MatrixXd>& gains, int m1, std::size_t count) {
  ExprVector out(m1);
  for (int j = 0; j < m1; ++j) {
    std::vector<Expr> terms;
    for (std::size_t i = 0; i < count; ++i) {
      for (int l = 0; l < m1; ++l) {
        double k = gains[i](j, l);
        if (k == 0.0) continue;
        Expr e = Expr::symbol(reference_symbol(l + 1, static_cast<int>(i))) -
                 Expr::symbol(measurement_symbol(l + 1, static_cast<int>(i)));
        terms.push_back(Expr::constant(k) * e);
      }
    }
    out[j] = simplify(Expr::add(std::move(terms)));
  }
  return out;
}

std::vector<std::pair<std::string, Expr>> measurement_exprs(const SystemModel& P, int m1, int count) {
  std::vector<std::pair<std::string, Expr>> out;
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < m1; ++j) {
      out.emplace_back(measurement_symbol(j + 1, i), iterated_lie(P.h1[j], P.f, P.states, i));
    }
  }
  return out;
}

std::map<std::string, Expr> as_map(const std::vector<std::pair<std::string, Expr>>& pairs) {
  return {pairs.begin(), pairs.end()};
}

void require_no_extra(const ExprVector& u_expr, const std::vector<std::string>& forbidden) {
  for (const auto& e : u_expr) {
    for (const auto& w : forbidden) {
      if (contains_symbol(e, w)) {
        throw Error(ErrorCode::kAssumptionViolated,
                    "assumption violated: internal controller depends on extra input '" + w + "'");
      }
    }
  }
}

std::string singular_note(const Expr& condition, bool identically_zero) {
  if (identically_zero) return "condition vanishes identically; no feasible direction";
  std::set<std::string> denominators;
  auto scan = [&](auto&& self, const Expr& e) -> void {
    if (e.op() == Op::kPow && e.exponent() < 0) {
      for (const auto& s : free_symbols(e.arg(0))) denominators.insert(s);
    }
    for (const Expr& a : e.args()) self(self, a);
  };
  scan(scan, condition);
  std::string note;
  if (condition.is_constant()) {
    note = "condition is a nonzero constant";
  } else {
    note = "infeasible where " + to_string(condition) + " = 0";
  }
  if (!denominators.empty()) {
    note += "; undefined where a denominator in {";
    bool first = true;
    for (const auto& s : denominators) {
      note += (first ? "" : ", ") + s;
      first = false;
    }
    note += "} vanishes";
  }
  return note;
}

FeasibilityCertificate certify(const ExprMatrix& condition_matrix, const ExprMatrix& gamma, const Assignment& x0,
                               const std::set<std::string>& singular, const SamplingOptions& opt) {
  FeasibilityCertificate cert;
  cert.condition = determinant(condition_matrix);
  bool zero = is_identically_zero(cert.condition, singular, opt, 4242);
  cert.singular_set_note = singular_note(cert.condition, zero);
  bool det_ok = false;
  try {
    cert.value_at_x0 = eval_expr(cert.condition, x0);
    Eigen::MatrixXd c = condition_matrix.evaluate(x0);
    double scale = 1.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i) scale *= c.row(i).norm();
    det_ok = std::isfinite(cert.value_at_x0) && std::abs(cert.value_at_x0) > opt.det_tolerance * std::max(1.0, scale);
  } catch (const Error&) {
    cert.value_at_x0 = std::numeric_limits<double>::quiet_NaN();
  }
  int full = static_cast<int>(gamma.rows());
  auto rank_at = [&](const Assignment& a) {
    try {
      return numeric_rank(gamma.evaluate(a), opt.det_tolerance);
    } catch (const Error&) {
      return -1;
    }
  };
  int r0 = rank_at(x0);
  bool all_full = r0 == full;
  cert.constant_rank = r0 >= 0;
  std::mt19937_64 rng(opt.seed + 99);
  for (int k = 0; k < opt.perturbations; ++k) {
    int rk = rank_at(perturb(rng, x0, opt));
    if (rk != r0) cert.constant_rank = false;
    if (rk != full) all_full = false;
  }
  cert.feasible = det_ok && all_full && cert.constant_rank && !zero;
  return cert;
}

ExprMatrix column(const ExprVector& v) { return ExprMatrix::column(v); }

struct LoopParts {
  const SystemModel* plant = nullptr;
  int m1 = 0;
  int m2 = 0;
  int ref_order = 0;  // reference chain length; u_ext carries this derivative
  std::vector<int> r2;
  std::vector<std::string> base_states, xi_states, extra_states;
  std::vector<std::pair<std::string, Expr>> measurements;
  ExprVector u_expr;
  std::vector<std::string> original_inputs;
  std::vector<std::string> original_extras;
};

ClosedLoop build_loop(const LoopParts& parts, const ExprMatrix& gamma, const ExprVector& phi,
                      const std::set<std::string>& singular, const std::set<int>& angular) {
  const SystemModel& P = *parts.plant;
  ClosedLoop loop;
  loop.m1 = parts.m1;
  loop.m2 = parts.m2;
  loop.table = P.table;
  loop.base_states = parts.base_states;
  loop.xi_states = parts.xi_states;
  loop.extra_states = parts.extra_states;
  loop.plant_states = P.states;
  for (int j = 0; j < parts.m1; ++j) {
    for (int i = 0; i < parts.ref_order; ++i) {
      loop.reference_states.push_back(reference_symbol(j + 1, i));
      loop.reference_rhs.push_back(reference_symbol(j + 1, i + 1));
    }
  }
  for (int j = 0; j < parts.m1; ++j) loop.inputs.push_back(reference_symbol(j + 1, parts.ref_order));
  for (const auto& e : P.extras) loop.inputs.push_back(e);
  for (int j = 0; j < parts.m1; ++j) {
    for (int i = 0; i <= parts.ref_order; ++i) loop.table.add(reference_symbol(j + 1, i), SymbolKind::kReference);
  }
  loop.measurements = parts.measurements;
  for (const auto& [name, e] : parts.measurements) loop.table.add(name, SymbolKind::kAuxiliary);
  for (std::size_t i = 0; i < P.inputs.size(); ++i) loop.internal_law.emplace_back(P.inputs[i], parts.u_expr[i]);

  ExprVector ubar = symbols_of(P.inputs);
  ExprVector wext = symbols_of(P.extras);
  loop.plant_rhs = add(add(P.f, P.G * ubar), P.m2() ? P.H * wext : zeros(P.n()));
  for (const auto& u : parts.original_inputs) loop.original_inputs.emplace_back(u, Expr::symbol(u));
  for (const auto& w : parts.original_extras) loop.extra_values.emplace_back(w, Expr::symbol(w));

  auto output_block = [&](const ExprVector& eta, const ExprMatrix& A, const ExprMatrix& B) {
    ExprVector y = add(eta, A * ubar);
    if (P.m2()) y = add(y, B * wext);
    return y;
  };
  loop.outputs = output_block(P.h1, P.Abar1, P.Bbar1);
  if (parts.m2 > 0) {
    ExprVector y2 = output_block(P.h2, P.Abar2, P.Bbar2);
    loop.outputs.insert(loop.outputs.end(), y2.begin(), y2.end());
  }
  for (int j = 0; j < parts.m1; ++j) loop.rho.push_back(parts.ref_order);
  for (int v : parts.r2) loop.rho.push_back(v);
  for (std::size_t c = 0; c < loop.rho.size(); ++c) {
    const Expr& eta = c < static_cast<std::size_t>(parts.m1) ? P.h1[c] : P.h2[c - parts.m1];
    ExprVector ders;
    for (int k = 0; k < loop.rho[c]; ++k) ders.push_back(iterated_lie(eta, P.f, P.states, k));
    loop.output_derivatives.push_back(ders);
  }
  loop.gamma = gamma;
  loop.phi = phi;
  loop.singular = singular;
  loop.angular_outputs = angular;
  loop.operating_point = P.operating_assignment();
  return loop;
}

// Below-level rows of the plant must not expose any input.
void require_no_early_inputs(const SystemModel& P, OutputBlock block, const std::vector<int>& level,
                             const SamplingOptions& opt) {
  const ExprVector& eta = output_state_part(P, block);
  for (std::size_t i = 0; i < eta.size(); ++i) {
    for (int k = 0; k < level[i]; ++k) {
      for (InputChannel c : {InputChannel::kU, InputChannel::kW}) {
        std::vector<int> r(eta.size(), 0);
        r[i] = k;
        ExprMatrix row = extended_decoupling(P, block, r, c);
        for (std::size_t j = 0; j < row.cols(); ++j) {
          if (!is_identically_zero(row(i, j), P.singular, opt, 313 + 7 * k + j)) {
            throw Error(ErrorCode::kAssumptionViolated,
                        std::string("assumption violated: ") + (block == OutputBlock::kY1 ? "y1" : "y2") + "[" +
                            std::to_string(i + 1) + "] depends on " + input_channel_name(c) +
                            " below its differential level");
          }
        }
      }
    }
  }
}

}  // namespace

InputTransformation input_transformation(const ExprMatrix& A1, const SystemModel& m, const SamplingOptions& opt) {
  std::size_t m1 = A1.cols();
  Assignment x0 = m.operating_assignment();
  int rank = -1;
  bool regular = false;
  try {
    Eigen::MatrixXd a = A1.evaluate(x0);
    rank = numeric_rank(a, opt.det_tolerance);
    regular = A1.rows() == m1 && numerically_nonsingular(a, opt.det_tolerance);
  } catch (const Error&) {
  }
  if (regular) throw Error(ErrorCode::kNotApplicable, "not applicable; use case 1: A1 is nonsingular at x0");
  std::vector<int> nonzero, zero;
  for (std::size_t j = 0; j < m1; ++j) {
    bool z = true;
    for (std::size_t i = 0; i < A1.rows() && z; ++i) z = is_identically_zero(A1(i, j), m.singular, opt, 900 + 13 * j + i);
    (z ? zero : nonzero).push_back(static_cast<int>(j));
  }
  if (zero.empty() || static_cast<int>(nonzero.size()) != rank) {
    throw Error(ErrorCode::kNotColumnDegenerate,
                "not column-degenerate: A1 has rank " + std::to_string(rank) + " but " + std::to_string(zero.size()) +
                    " identically zero columns; a general input transformation is required");
  }
  InputTransformation t;
  t.k1 = rank;
  t.permutation = nonzero;
  t.permutation.insert(t.permutation.end(), zero.begin(), zero.end());
  t.M = ExprMatrix(m1, m1);
  for (std::size_t i = 0; i < m1; ++i) t.M(i, t.permutation[i]) = Expr::constant(1.0);
  return t;
}

SystemModel permute_inputs(const SystemModel& m, const std::vector<int>& permutation) {
  if (permutation.size() != m.inputs.size()) throw Error(ErrorCode::kInvalidModel, "permutation length mismatch");
  SystemModel out = m;
  auto permute_cols = [&](const ExprMatrix& src) {
    ExprMatrix dst(src.rows(), src.cols());
    for (std::size_t i = 0; i < src.rows(); ++i)
      for (std::size_t k = 0; k < src.cols(); ++k) dst(i, k) = src(i, permutation[k]);
    return dst;
  };
  for (std::size_t k = 0; k < permutation.size(); ++k) out.inputs[k] = m.inputs[permutation[k]];
  out.G = permute_cols(m.G);
  out.Abar1 = permute_cols(m.Abar1);
  out.Abar2 = permute_cols(m.Abar2);
  out.table = layout_table(out, names_with_kind(m, SymbolKind::kControllerState));
  return out;
}

SystemModel dynamic_extension(const SystemModel& m, int k1) {
  if (k1 < 1 || k1 > m.m1()) throw Error(ErrorCode::kInvalidModel, "dynamic extension needs 1 <= k1 <= m1");
  std::size_t n = m.states.size(), m1 = m.inputs.size(), m2 = m.extras.size();
  SystemModel out = m;
  std::vector<std::string> xi(m.inputs.begin(), m.inputs.begin() + k1);
  std::vector<std::string> controller = names_with_kind(m, SymbolKind::kControllerState);
  controller.insert(controller.end(), xi.begin(), xi.end());
  out.states.insert(out.states.end(), xi.begin(), xi.end());
  for (int i = 0; i < k1; ++i) out.inputs[i] = dot_symbol(m.inputs[i]);

  ExprVector xiv = symbols_of(xi);
  out.f = m.f;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<Expr> terms{m.f[s]};
    for (int i = 0; i < k1; ++i) terms.push_back(m.G(s, i) * xiv[i]);
    out.f[s] = simplify(Expr::add(terms));
  }
  out.f.resize(n + k1, Expr::constant(0.0));
  out.G = ExprMatrix(n + k1, m1);
  for (std::size_t c = 0; c < m1; ++c) {
    if (static_cast<int>(c) < k1) {
      out.G(n + c, c) = Expr::constant(1.0);
    } else {
      for (std::size_t s = 0; s < n; ++s) out.G(s, c) = m.G(s, c);
    }
  }
  out.H = ExprMatrix(n + k1, m2);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < m2; ++c) out.H(s, c) = m.H(s, c);

  auto move_feedthrough = [&](const ExprVector& eta, const ExprMatrix& A, ExprVector& eta_out, ExprMatrix& A_out) {
    eta_out = eta;
    A_out = A;
    for (std::size_t i = 0; i < eta.size(); ++i) {
      std::vector<Expr> terms{eta[i]};
      for (int c = 0; c < k1; ++c) {
        terms.push_back(A(i, c) * xiv[c]);
        A_out(i, c) = Expr::constant(0.0);
      }
      eta_out[i] = simplify(Expr::add(terms));
    }
  };
  move_feedthrough(m.h1, m.Abar1, out.h1, out.Abar1);
  move_feedthrough(m.h2, m.Abar2, out.h2, out.Abar2);
  out.table = layout_table(out, controller);
  return out;
}

SystemModel extend_extra_inputs(const SystemModel& m) {
  std::size_t n = m.states.size(), m1 = m.inputs.size(), m2 = m.extras.size();
  SystemModel out = m;
  std::vector<std::string> w = m.extras;
  ExprVector wv = symbols_of(w);
  out.states.insert(out.states.end(), w.begin(), w.end());
  for (std::size_t j = 0; j < m2; ++j) out.extras[j] = dot_symbol(w[j]);
  out.f = add(m.f, m2 ? m.H * wv : zeros(n));
  out.f.resize(n + m2, Expr::constant(0.0));
  out.G = ExprMatrix(n + m2, m1);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < m1; ++c) out.G(s, c) = m.G(s, c);
  out.H = ExprMatrix(n + m2, m2);
  for (std::size_t j = 0; j < m2; ++j) out.H(n + j, j) = Expr::constant(1.0);
  if (m2) {
    out.h1 = add(m.h1, m.Bbar1 * wv);
    out.h2 = add(m.h2, m.Bbar2 * wv);
  }
  out.Bbar1 = ExprMatrix(m1, m2);
  out.Bbar2 = ExprMatrix(m2, m2);
  out.table = layout_table(out, names_with_kind(m, SymbolKind::kControllerState));
  return out;
}

SynthesisResult synth_case1(const SystemModel& m, const SynthesisOptions& opt) {
  const SamplingOptions& so = opt.sampling;
  RelativeDegreeReport rep1 = vector_relative_degree(m, OutputBlock::kY1, InputChannel::kU, 0, so);
  int r1 = uniform_degree(rep1);
  if (!rep1.regular) {
    throw Error(ErrorCode::kCaseMismatch, "case mismatch: A1 is singular at x0; the singular-case path applies");
  }
  require_same_level(rep1, "y1");
  std::vector<int> r2;
  ExprMatrix A2(0, m.m1()), B2(0, m.m2());
  ExprVector p2;
  if (m.m2() > 0) {
    RelativeDegreeReport rep2 = vector_relative_degree(m, OutputBlock::kY2, InputChannel::kU, 0, so);
    require_same_level(rep2, "y2");
    r2 = rep2.degrees();
    A2 = rep2.A;
    B2 = rep2.B;
    p2 = rep2.p;
  }
  std::vector<Eigen::MatrixXd> gains = opt.gains.empty() ? default_gains(r1, m.m1(), opt.default_gain) : opt.gains;
  check_gains(gains, r1, m.m1());

  const ExprMatrix& A1 = rep1.A;
  const ExprMatrix& B1 = rep1.B;
  ExprMatrix A1inv = inverse(A1);
  auto meas = measurement_exprs(m, m.m1(), r1);
  ExprVector S = error_feedback(gains, m.m1(), r1);
  ExprVector S_sub = substituted(S, as_map(meas));
  ExprVector top;
  for (int j = 0; j < m.m1(); ++j) top.push_back(Expr::symbol(reference_symbol(j + 1, r1)));
  ExprVector inner = add(subtract(S, rep1.p), top);
  ExprVector u_expr = A1inv * inner;
  require_no_extra(u_expr, m.extras);

  ExprMatrix A2A1inv = A2 * A1inv;
  ExprMatrix gamma = vstack(hstack(ExprMatrix::identity(m.m1()), B1), hstack(A2A1inv, B2));
  ExprVector phi = S_sub;
  if (m.m2() > 0) {
    ExprVector phi2 = add(p2, A2A1inv * subtract(S_sub, rep1.p));
    phi.insert(phi.end(), phi2.begin(), phi2.end());
  }
  ExprMatrix schur = B2 - A2A1inv * B1;

  SynthesisResult s;
  s.case_id = 1;
  s.model_id = m.id;
  s.r1.assign(m.m1(), r1);
  s.r2 = r2;
  s.input_permutation.resize(m.m1());
  std::iota(s.input_permutation.begin(), s.input_permutation.end(), 0);
  s.controller.kind = InternalController::Kind::kStatic;
  s.controller.k1 = 0;
  s.controller.gains = gains;
  s.controller.input_names = m.inputs;
  s.controller.u_expr = u_expr;
  s.Gamma = gamma;
  s.phi = phi;
  s.extended_state_layout = m.states;
  s.intermediates = {{"A1", A1}, {"B1", B1}, {"p1", column(rep1.p)}, {"A1inv", A1inv}, {"A2", A2}, {"B2", B2},
                     {"p2", column(p2)}, {"A2A1inv", A2A1inv}, {"condition_matrix", schur}};

  LoopParts parts;
  parts.plant = &m;
  parts.m1 = m.m1();
  parts.m2 = m.m2();
  parts.ref_order = r1;
  parts.r2 = r2;
  parts.base_states = m.states;
  parts.measurements = meas;
  parts.u_expr = u_expr;
  parts.original_inputs = m.inputs;
  parts.original_extras = m.extras;
  s.loop = build_loop(parts, gamma, phi, m.singular, m.angular_outputs);
  s.u_ext_layout = s.loop.inputs;
  s.feasibility = certify(schur, gamma, s.loop.operating_point, m.singular, so);
  return s;
}

std::map<std::string, ExprMatrix> case2_decomposition(const SystemModel& pm, int k1, int r1) {
  const auto& x = pm.states;
  std::size_t m1 = pm.inputs.size();
  std::vector<int> r(m1, r1);
  ExprMatrix A1 = extended_decoupling(pm, OutputBlock::kY1, r, InputChannel::kU);
  ExprMatrix B1 = extended_decoupling(pm, OutputBlock::kY1, r, InputChannel::kW);
  ExprVector p1 = output_drift(pm, OutputBlock::kY1, r);
  ExprVector u = symbols_of(pm.inputs);
  ExprVector w = symbols_of(pm.extras);
  std::vector<std::string> rest(pm.inputs.begin() + k1, pm.inputs.end());
  std::map<std::string, Expr> rest_zero;
  for (const auto& s : rest) rest_zero[s] = Expr::constant(0.0);
  auto w_zero = zero_map(pm.extras);

  ExprVector fHw = pm.m2() ? add(pm.f, pm.H * w) : pm.f;
  ExprVector xdot = add(fHw, pm.G * u);

  ExprMatrix Adot(m1, m1), Adot1(m1, m1), Bdot(m1, m1), D(m1, m1);
  ExprVector n1(m1), n2(m1), phi_a(m1), lf(m1);
  for (std::size_t i = 0; i < m1; ++i) {
    std::vector<Expr> psi_terms, bw_terms, phia_terms;
    for (int c = 0; c < k1; ++c) psi_terms.push_back(A1(i, c) * u[c]);
    for (std::size_t j = 0; j < w.size(); ++j) bw_terms.push_back(B1(i, j) * w[j]);
    Expr TA = lie_derivative(simplify(Expr::add(psi_terms)), xdot, x);
    Expr TB = lie_derivative(simplify(Expr::add(bw_terms)), xdot, x);
    for (std::size_t c = k1; c < m1; ++c) {
      Adot(i, c) = differentiate(TA, rest[c - k1]);
      Bdot(i, c) = differentiate(TB, rest[c - k1]);
      D(i, c) = lie_derivative(p1[i], pm.G.column_vector(c), x);
    }
    n1[i] = simplify(substitute(TA, rest_zero));
    n2[i] = simplify(substitute(TB, rest_zero));
    for (int c = 0; c < k1; ++c) phia_terms.push_back(lie_derivative(p1[i], pm.G.column_vector(c), x) * u[c]);
    phi_a[i] = simplify(Expr::add(phia_terms));
    lf[i] = lie_derivative(p1[i], fHw, x);
  }
  Adot1 = Adot.substituted(w_zero);
  ExprMatrix Adot2 = Adot - Adot1;
  ExprMatrix A1cols(m1, m1);
  for (std::size_t i = 0; i < m1; ++i)
    for (int c = 0; c < k1; ++c) A1cols(i, c) = A1(i, c);
  ExprMatrix N1 = A1cols + D + Adot1;
  ExprMatrix N2 = Adot2 + Bdot;
  ExprVector phi = add(add(lf, phi_a), add(n1, n2));
  return {{"n1", column(n1)},       {"n2", column(n2)},        {"phi_a", column(phi_a)}, {"Dbar1", D},
          {"Adot1_1", Adot1},       {"Adot1_2", Adot2},        {"Bdot1_2", Bdot},        {"N1", N1},
          {"N2", N2},               {"phi", column(phi)}};
}

SynthesisResult synth_case2(const SystemModel& m, const SynthesisOptions& opt) {
  const SamplingOptions& so = opt.sampling;
  RelativeDegreeReport rep1 = vector_relative_degree(m, OutputBlock::kY1, InputChannel::kU, 0, so);
  int r1 = uniform_degree(rep1);
  require_same_level(rep1, "y1");
  InputTransformation tr = input_transformation(rep1.A, m, so);
  std::vector<int> r2;
  ExprMatrix A2_orig(0, m.m1());
  if (m.m2() > 0) {
    RelativeDegreeReport rep2 = vector_relative_degree(m, OutputBlock::kY2, InputChannel::kU, 0, so);
    require_same_level(rep2, "y2");
    r2 = rep2.degrees();
    A2_orig = rep2.A;
  }
  SystemModel pm = permute_inputs(m, tr.permutation);
  SystemModel pa = dynamic_extension(pm, tr.k1);
  SystemModel P = extend_extra_inputs(pa);
  std::vector<std::string> xi(pm.inputs.begin(), pm.inputs.begin() + tr.k1);
  std::vector<int> level1(m.m1(), r1 + 1);
  require_no_early_inputs(P, OutputBlock::kY1, level1, so);
  if (m.m2() > 0) require_no_early_inputs(P, OutputBlock::kY2, r2, so);

  ExprMatrix N = extended_decoupling(P, OutputBlock::kY1, level1, InputChannel::kU);
  ExprMatrix B1 = extended_decoupling(P, OutputBlock::kY1, level1, InputChannel::kW);
  ExprVector phi_full = output_drift(P, OutputBlock::kY1, level1);
  auto w_zero = zero_map(m.extras);
  ExprMatrix N1 = N.substituted(w_zero);
  ExprMatrix N2 = N - N1;
  if (!(N2.substituted(w_zero) == ExprMatrix(N2.rows(), N2.cols()))) {
    throw Error(ErrorCode::kAssumptionViolated, "N2 does not vanish at w = 0");
  }
  ExprVector phi0 = substituted(phi_full, w_zero);
  Assignment x0 = P.operating_assignment();
  bool n1_ok = false;
  try {
    n1_ok = numerically_nonsingular(N1.evaluate(x0), so.det_tolerance);
  } catch (const Error&) {
  }
  if (!n1_ok || determinant(N1).is_zero()) {
    throw Error(ErrorCode::kN1Singular, "N1 singular at x0 after one extra differentiation");
  }

  ExprMatrix A2bar(0, m.m1()), B2ext(0, m.m2());
  ExprVector p2ext;
  if (m.m2() > 0) {
    A2bar = extended_decoupling(P, OutputBlock::kY2, r2, InputChannel::kU);
    B2ext = extended_decoupling(P, OutputBlock::kY2, r2, InputChannel::kW);
    p2ext = output_drift(P, OutputBlock::kY2, r2);
    for (std::size_t i = 0; i < B2ext.rows(); ++i)
      for (std::size_t j = 0; j < B2ext.cols(); ++j)
        if (!is_identically_zero(B2ext(i, j), P.singular, so, 555 + i * 7 + j)) {
          throw Error(ErrorCode::kAssumptionViolated,
                      "assumption violated: the extra-input derivative reaches y2 at its differential level");
        }
  }

  std::vector<Eigen::MatrixXd> gains =
      opt.gains.empty() ? default_gains(r1 + 1, m.m1(), opt.default_gain) : opt.gains;
  check_gains(gains, r1 + 1, m.m1());

  ExprMatrix N1inv = inverse(N1);
  auto meas = measurement_exprs(P, m.m1(), r1 + 1);
  ExprVector S = error_feedback(gains, m.m1(), r1 + 1);
  ExprVector S_sub = substituted(S, as_map(meas));
  ExprVector top;
  for (int j = 0; j < m.m1(); ++j) top.push_back(Expr::symbol(reference_symbol(j + 1, r1 + 1)));
  ExprVector u_expr = N1inv * add(subtract(S, phi0), top);
  std::vector<std::string> forbidden = m.extras;
  for (const auto& e : P.extras) forbidden.push_back(e);
  require_no_extra(u_expr, forbidden);

  ExprMatrix N2N1inv = N2 * N1inv;
  ExprMatrix I = ExprMatrix::identity(m.m1());
  ExprMatrix gamma1 = hstack(I + N2N1inv, B1);
  ExprMatrix A2N1inv = A2bar * N1inv;
  ExprMatrix gamma = vstack(gamma1, hstack(A2N1inv, ExprMatrix(m.m2(), m.m2())));
  ExprVector drive = subtract(S_sub, phi0);
  ExprVector phi = add(phi_full, (I + N2N1inv) * drive);
  if (m.m2() > 0) {
    ExprVector phi2 = add(p2ext, A2N1inv * drive);
    phi.insert(phi.end(), phi2.begin(), phi2.end());
  }
  ExprMatrix condition_matrix = A2N1inv * B1;

  SynthesisResult s;
  s.case_id = 2;
  s.model_id = m.id;
  s.r1.assign(m.m1(), r1);
  s.r2 = r2;
  s.input_permutation = tr.permutation;
  s.controller.kind = InternalController::Kind::kDynamic;
  s.controller.k1 = tr.k1;
  s.controller.gains = gains;
  s.controller.input_names = P.inputs;
  s.controller.u_expr = u_expr;
  s.controller.xi_names = xi;
  for (const auto& name : xi) s.controller.xi_dynamics.push_back(Expr::symbol(dot_symbol(name)));
  s.Gamma = gamma;
  s.phi = phi;
  s.extended_state_layout = P.states;

  // The y2 decoupling of the unextended model, permuted to the same input
  // order, is what the printed feasibility condition refers to.
  ExprMatrix A2perm(A2_orig.rows(), A2_orig.cols());
  for (std::size_t i = 0; i < A2_orig.rows(); ++i)
    for (std::size_t k = 0; k < A2_orig.cols(); ++k) A2perm(i, k) = A2_orig(i, tr.permutation[k]);
  ExprMatrix alt_condition = A2perm * N1inv * B1;

  ExprVector n_total = subtract(phi_full, substituted(phi_full, w_zero));
  s.intermediates = {{"A1", rep1.A},
                     {"M", tr.M},
                     {"N", N},
                     {"N1", N1},
                     {"N2", N2},
                     {"N1inv", N1inv},
                     {"B1", B1},
                     {"phi_y1", column(phi_full)},
                     {"phi0", column(phi0)},
                     {"n_w", column(n_total)},
                     {"Gamma1", gamma1},
                     {"Abar2", A2bar},
                     {"A2", A2perm},
                     {"p2bar", column(p2ext)},
                     {"condition_matrix", condition_matrix},
                     {"condition_matrix_unextended", alt_condition}};
  for (auto& [k, v] : case2_decomposition(pm, tr.k1, r1)) s.intermediates["split_" + k] = v;

  LoopParts parts;
  parts.plant = &P;
  parts.m1 = m.m1();
  parts.m2 = m.m2();
  parts.ref_order = r1 + 1;
  parts.r2 = r2;
  parts.base_states = m.states;
  parts.xi_states = xi;
  parts.extra_states = m.extras;
  parts.measurements = meas;
  parts.u_expr = u_expr;
  parts.original_inputs = m.inputs;
  parts.original_extras = m.extras;
  std::set<std::string> singular = m.singular;
  s.loop = build_loop(parts, gamma, phi, singular, m.angular_outputs);
  s.u_ext_layout = s.loop.inputs;
  s.feasibility = feasibility_case2(m, s, so);
  return s;
}

SynthesisResult synthesize(const SystemModel& m, CaseHint hint, const SynthesisOptions& opt) {
  if (hint == CaseHint::kCase1) return synth_case1(m, opt);
  if (hint == CaseHint::kCase2) return synth_case2(m, opt);
  RelativeDegreeReport rep1 = vector_relative_degree(m, OutputBlock::kY1, InputChannel::kU, 0, opt.sampling);
  return rep1.regular ? synth_case1(m, opt) : synth_case2(m, opt);
}

FeasibilityCertificate feasibility_case1(const SystemModel& m, const SynthesisResult& s, const SamplingOptions& opt) {
  if (s.case_id != 1) throw Error(ErrorCode::kCaseMismatch, "case mismatch: expected a case-1 synthesis");
  return certify(s.intermediates.at("condition_matrix"), s.Gamma, s.loop.operating_point, m.singular, opt);
}

FeasibilityCertificate feasibility_case2(const SystemModel& m, const SynthesisResult& s, const SamplingOptions& opt) {
  if (s.case_id != 2) throw Error(ErrorCode::kCaseMismatch, "case mismatch: expected a case-2 synthesis");
  FeasibilityCertificate cert =
      certify(s.intermediates.at("condition_matrix"), s.Gamma, s.loop.operating_point, m.singular, opt);
  const ExprMatrix& alt = s.intermediates.at("condition_matrix_unextended");
  cert.condition_unextended = determinant(alt);
  try {
    cert.value_unextended_at_x0 = eval_expr(*cert.condition_unextended, s.loop.operating_point);
  } catch (const Error&) {
    cert.value_unextended_at_x0 = std::numeric_limits<double>::quiet_NaN();
  }
  cert.variants_agree = is_identically_zero(simplify(cert.condition - *cert.condition_unextended), m.singular, opt, 808);
  return cert;
}

RoleSwapReport role_swap_report(const SynthesisResult& s, const SamplingOptions& opt) {
  if (s.case_id != 2) throw Error(ErrorCode::kCaseMismatch, "case mismatch: role swap applies to case 2 only");
  RoleSwapReport rep;
  int m1 = s.loop.m1;
  bool confined = true, reach = false;
  for (std::size_t c = 0; c < s.Gamma.cols(); ++c) {
    RoleSwapColumn col;
    col.input = s.u_ext_layout[c];
    for (std::size_t r = 0; r < s.Gamma.rows(); ++r) {
      if (is_identically_zero(s.Gamma(r, c), s.loop.singular, opt, 1200 + 31 * c + r)) continue;
      col.rows.push_back(output_label(static_cast<int>(r), m1));
      (static_cast<int>(r) < m1 ? col.reaches_y1 : col.reaches_y2) = true;
    }
    if (static_cast<int>(c) >= m1 && col.reaches_y2) confined = false;
    if (static_cast<int>(c) < m1 && col.reaches_y2) reach = true;
    rep.columns.push_back(col);
  }
  rep.extra_inputs_confined_to_y1 = confined;
  rep.virtual_inputs_reach_y2 = reach;
  return rep;
}

}  // namespace ioext
