#include "ioext/lie.hpp"

#include <algorithm>
#include <cmath>

#include "ioext/error.hpp"
#include "ioext/integrate.hpp"

namespace ioext {

const char* input_channel_name(InputChannel c) { return c == InputChannel::kU ? "u" : "w"; }

Expr lie_derivative(const Expr& h, const ExprVector& field, const std::vector<std::string>& states) {
  if (field.size() != states.size()) {
    throw Error(ErrorCode::kInvalidModel, "vector field length differs from the state dimension");
  }
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (field[i].is_zero() || !contains_symbol(h, states[i])) continue;
    terms.push_back(differentiate(h, states[i]) * field[i]);
  }
  return simplify(Expr::add(std::move(terms)));
}

Expr lie_derivative(const Expr& h, const ExprVector& field, const SymbolTable& table) {
  return lie_derivative(h, field, table.names_of(SymbolKind::kState));
}

Expr iterated_lie(const Expr& h, const ExprVector& f, const std::vector<std::string>& states, int k) {
  Expr out = h;
  for (int i = 0; i < k; ++i) out = lie_derivative(out, f, states);
  return out;
}

ExprVector lie_row(const Expr& h, const ExprMatrix& fields, const std::vector<std::string>& states) {
  ExprVector row(fields.cols());
  for (std::size_t j = 0; j < fields.cols(); ++j) row[j] = lie_derivative(h, fields.column_vector(j), states);
  return row;
}

const ExprVector& output_state_part(const SystemModel& m, OutputBlock block) {
  return block == OutputBlock::kY1 ? m.h1 : m.h2;
}

const ExprMatrix& output_feedthrough(const SystemModel& m, OutputBlock block, InputChannel c) {
  if (block == OutputBlock::kY1) return c == InputChannel::kU ? m.Abar1 : m.Bbar1;
  return c == InputChannel::kU ? m.Abar2 : m.Bbar2;
}

const ExprMatrix& channel_matrix(const SystemModel& m, InputChannel c) { return c == InputChannel::kU ? m.G : m.H; }

namespace {

ExprVector decoupling_row(const SystemModel& m, OutputBlock block, std::size_t i, int k, InputChannel c) {
  if (k == 0) return output_feedthrough(m, block, c).row_vector(i);
  Expr eta = iterated_lie(output_state_part(m, block)[i], m.f, m.states, k - 1);
  return lie_row(eta, channel_matrix(m, c), m.states);
}

}  // namespace

ExprMatrix extended_decoupling(const SystemModel& m, OutputBlock block, const std::vector<int>& r, InputChannel c) {
  const ExprVector& eta = output_state_part(m, block);
  if (r.size() != eta.size()) throw Error(ErrorCode::kInvalidModel, "degree vector length differs from output count");
  std::size_t cols = channel_matrix(m, c).cols();
  ExprMatrix out(eta.size(), cols);
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (r[i] < 0) throw Error(ErrorCode::kInvalidModel, "negative relative degree");
    ExprVector row = decoupling_row(m, block, i, r[i], c);
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = row[j];
  }
  return out;
}

ExprVector output_drift(const SystemModel& m, OutputBlock block, const std::vector<int>& r) {
  const ExprVector& eta = output_state_part(m, block);
  ExprVector p(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) p[i] = iterated_lie(eta[i], m.f, m.states, r[i]);
  return p;
}

Assignment sample_point(std::mt19937_64& rng, const std::set<std::string>& symbols,
                        const std::set<std::string>& singular, const SamplingOptions& opt) {
  std::uniform_real_distribution<double> d(-opt.box, opt.box);
  Assignment a;
  for (const auto& s : symbols) {
    double v = d(rng);
    if (singular.count(s)) {
      while (std::abs(v) < opt.singular_margin) v = d(rng);
    }
    a[s] = v;
  }
  return a;
}

Assignment perturb(std::mt19937_64& rng, const Assignment& base, const SamplingOptions& opt) {
  std::normal_distribution<double> d(0.0, opt.sigma);
  // Sorted traversal keeps the draw order independent of hash-map layout.
  std::vector<std::string> keys;
  for (const auto& [k, v] : base) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  Assignment out = base;
  for (const auto& k : keys) out[k] += d(rng);
  return out;
}

bool is_identically_zero(const Expr& e, const std::set<std::string>& singular, const SamplingOptions& opt,
                         std::uint64_t salt) {
  Expr s = simplify(e);
  if (s.is_zero()) return true;
  if (s.is_constant()) return std::abs(s.value()) < opt.zero_tolerance;
  std::mt19937_64 rng(opt.seed ^ (salt * 0x9e3779b97f4a7c15ull));
  std::set<std::string> symbols = free_symbols(s);
  int evaluated = 0;
  for (int k = 0; k < opt.zero_samples; ++k) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      Assignment a = sample_point(rng, symbols, singular, opt);
      double v;
      try {
        v = eval_expr(s, a);
      } catch (const Error&) {
        continue;
      }
      if (!(std::abs(v) < opt.zero_tolerance)) return false;
      ++evaluated;
      break;
    }
  }
  return evaluated > 0;
}

std::vector<int> RelativeDegreeReport::degrees() const {
  const auto& src = wrt == InputChannel::kU ? r : r_w;
  std::vector<int> out;
  for (const auto& v : src) out.push_back(v.value_or(-1));
  return out;
}

namespace {

std::optional<int> first_exposing_order(const SystemModel& m, OutputBlock block, std::size_t i, InputChannel c,
                                        int max_order, const SamplingOptions& opt) {
  if (channel_matrix(m, c).cols() == 0) return std::nullopt;
  for (int k = 0; k <= max_order; ++k) {
    ExprVector row = decoupling_row(m, block, i, k, c);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!is_identically_zero(row[j], m.singular, opt, 1000 * i + 10 * k + j)) return k;
    }
  }
  return std::nullopt;
}

bool full_rank_everywhere(const ExprMatrix& mat, const SystemModel& m, InputChannel wrt, const SamplingOptions& opt,
                          int& rank_at_x0, bool& constant_rank) {
  std::mt19937_64 rng(opt.seed + 17);
  Assignment x0 = m.operating_assignment();
  bool square = mat.rows() == mat.cols();
  auto check = [&](const Assignment& a, int& rank) {
    Eigen::MatrixXd v;
    try {
      v = mat.evaluate(a);
    } catch (const Error&) {
      rank = -1;
      return false;
    }
    rank = numeric_rank(v, opt.det_tolerance);
    if (wrt == InputChannel::kU) return square && numerically_nonsingular(v, opt.det_tolerance);
    return rank == static_cast<int>(mat.cols());
  };
  bool ok = check(x0, rank_at_x0);
  constant_rank = rank_at_x0 >= 0;
  for (int k = 0; k < opt.perturbations; ++k) {
    int rank = 0;
    ok = check(perturb(rng, x0, opt), rank) && ok;
    if (rank != rank_at_x0) constant_rank = false;
  }
  return ok;
}

}  // namespace

RelativeDegreeReport vector_relative_degree(const SystemModel& m, OutputBlock block, InputChannel wrt, int max_order,
                                            const SamplingOptions& opt) {
  if (max_order <= 0) max_order = m.n() + 1;
  RelativeDegreeReport rep;
  rep.block = block;
  rep.wrt = wrt;
  std::size_t count = output_state_part(m, block).size();
  for (std::size_t i = 0; i < count; ++i) {
    rep.r.push_back(first_exposing_order(m, block, i, InputChannel::kU, max_order, opt));
    rep.r_w.push_back(first_exposing_order(m, block, i, InputChannel::kW, max_order, opt));
    const auto& main = wrt == InputChannel::kU ? rep.r.back() : rep.r_w.back();
    if (!main) {
      throw Error(ErrorCode::kMaxOrderExceeded,
                  std::string("max order exceeded: output y") + (block == OutputBlock::kY1 ? "1" : "2") + "[" +
                      std::to_string(i + 1) + "] does not expose " + input_channel_name(wrt) + " within order " +
                      std::to_string(max_order));
    }
  }
  std::vector<int> k = rep.degrees();
  rep.A = extended_decoupling(m, block, k, InputChannel::kU);
  rep.B = extended_decoupling(m, block, k, InputChannel::kW);
  rep.p = output_drift(m, block, k);
  const ExprMatrix& main = wrt == InputChannel::kU ? rep.A : rep.B;
  for (std::size_t j = 0; j < main.cols(); ++j) {
    bool zero = true;
    for (std::size_t i = 0; i < main.rows() && zero; ++i) {
      zero = is_identically_zero(main(i, j), m.singular, opt, 77 + 31 * j + i);
    }
    if (zero) rep.zero_columns.push_back(static_cast<int>(j));
  }
  rep.regular = full_rank_everywhere(main, m, wrt, opt, rep.rank_at_x0, rep.constant_rank);
  return rep;
}

CrosscheckResult numeric_crosscheck(const RelativeDegreeReport& report, const SystemModel& m, int trials,
                                    std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::kInvalidModel, "trials must be positive");
  constexpr double kDt = 1e-4;
  constexpr double kStencil = 1e-2;
  constexpr int kHalf = 50;  // integration steps per half stencil step
  std::vector<int> k = report.degrees();
  const ExprVector& eta = output_state_part(m, report.block);
  const ExprMatrix& Au = output_feedthrough(m, report.block, InputChannel::kU);
  const ExprMatrix& Bw = output_feedthrough(m, report.block, InputChannel::kW);
  int top = 0;
  for (int v : k) top = std::max(top, v);

  std::vector<std::string> drivers = m.inputs;
  drivers.insert(drivers.end(), m.extras.begin(), m.extras.end());
  ExprVector field = m.f;
  for (std::size_t i = 0; i < m.states.size(); ++i) {
    std::vector<Expr> terms{field[i]};
    for (std::size_t j = 0; j < m.inputs.size(); ++j) terms.push_back(m.G(i, j) * Expr::symbol(m.inputs[j]));
    for (std::size_t j = 0; j < m.extras.size(); ++j) terms.push_back(m.H(i, j) * Expr::symbol(m.extras[j]));
    field[i] = simplify(Expr::add(terms));
  }
  SlotIndex slots;
  for (std::size_t i = 0; i < m.states.size(); ++i) slots[m.states[i]] = i;
  for (std::size_t j = 0; j < drivers.size(); ++j) slots[drivers[j]] = m.states.size() + j;
  std::vector<CompiledExpr> compiled;
  for (const auto& e : field) compiled.emplace_back(e, slots);

  CrosscheckResult out;
  out.trials = trials;
  out.per_output.assign(eta.size(), 0.0);
  std::mt19937_64 rng(seed);
  SamplingOptions popt;
  std::uniform_real_distribution<double> offset(-0.3, 0.3), amp(0.2, 0.5), freq(1.0, 3.0), phase(0.0, 6.28);
  for (int trial = 0; trial < trials; ++trial) {
    Assignment x0 = perturb(rng, m.operating_assignment(), popt);
    struct Wave {
      double a, b, w, ph;
    };
    std::vector<Wave> waves;
    for (const auto& d : drivers) waves.push_back({m.operating_value(d) + offset(rng), amp(rng), freq(rng), phase(rng)});
    auto drive = [&](double t, std::vector<double>& slot) {
      for (std::size_t j = 0; j < drivers.size(); ++j) {
        slot[m.states.size() + j] = waves[j].a + waves[j].b * std::sin(waves[j].w * t + waves[j].ph);
      }
    };
    std::vector<double> slot(m.states.size() + drivers.size());
    VectorField vf = [&](double t, std::span<const double> x, std::span<double> dx) {
      std::copy(x.begin(), x.end(), slot.begin());
      drive(t, slot);
      for (std::size_t i = 0; i < compiled.size(); ++i) dx[i] = compiled[i](slot);
    };
    // Snapshots at every half stencil step over [0, top * kStencil].
    std::vector<std::vector<double>> snaps;
    std::vector<double> x(m.states.size());
    for (std::size_t i = 0; i < m.states.size(); ++i) x[i] = x0[m.states[i]];
    double t = 0.0;
    for (int s = 0; s <= 2 * top; ++s) {
      std::vector<double> full(slot.size());
      std::copy(x.begin(), x.end(), full.begin());
      drive(t, full);
      snaps.push_back(full);
      if (s == 2 * top) break;
      for (int q = 0; q < kHalf; ++q) {
        x = step_rk4(vf, t, x, kDt);
        t += kDt;
      }
    }
    auto assignment_at = [&](int s) {
      Assignment a;
      for (const auto& [name, idx] : slots) a[name] = snaps[s][idx];
      return a;
    };
    auto output_at = [&](std::size_t i, int s) {
      Assignment a = assignment_at(s);
      double y = eval_expr(eta[i], a);
      for (std::size_t j = 0; j < Au.cols(); ++j) y += eval_expr(Au(i, j), a) * a[m.inputs[j]];
      for (std::size_t j = 0; j < Bw.cols(); ++j) y += eval_expr(Bw(i, j), a) * a[m.extras[j]];
      return y;
    };
    Assignment centre = assignment_at(top);
    for (std::size_t i = 0; i < eta.size(); ++i) {
      int r = k[i];
      if (r < 0) continue;
      double numeric = 0.0;
      double coeff = 1.0;  // binomial coefficient C(r, q)
      for (int q = 0; q <= r; ++q) {
        if (q > 0) coeff = coeff * (r - q + 1) / q;
        double sign = (r - q) % 2 ? -1.0 : 1.0;
        numeric += sign * coeff * output_at(i, top + 2 * q - r);
      }
      numeric /= std::pow(kStencil, r);
      double predicted = eval_expr(report.p[i], centre);
      for (std::size_t j = 0; j < report.A.cols(); ++j) predicted += eval_expr(report.A(i, j), centre) * centre[m.inputs[j]];
      for (std::size_t j = 0; j < report.B.cols(); ++j) predicted += eval_expr(report.B(i, j), centre) * centre[m.extras[j]];
      double dev = std::abs(numeric - predicted) / std::max(1.0, std::abs(predicted));
      out.per_output[i] = std::max(out.per_output[i], dev);
      out.max_deviation = std::max(out.max_deviation, dev);
    }
  }
  return out;
}

}  // namespace ioext
