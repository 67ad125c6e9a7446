#include "ioext/model.hpp"

#include "ioext/error.hpp"

namespace ioext {

double SystemModel::operating_value(const std::string& symbol) const {
  auto it = operating_point.find(symbol);
  if (it != operating_point.end()) return it->second;
  return singular.count(symbol) ? 1.0 : 0.0;
}

Assignment SystemModel::operating_assignment() const {
  Assignment a;
  for (const auto& group : {states, inputs, extras}) {
    for (const auto& s : group) a[s] = operating_value(s);
  }
  return a;
}

namespace {

void fill(ExprMatrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() == 0 && m.cols() == 0) m = ExprMatrix(rows, cols);
}

void check_shape(const ExprMatrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::kInvalidModel, std::string(name) + " must be " + std::to_string(rows) + "x" +
                                              std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                              "x" + std::to_string(m.cols()));
  }
}

void check_symbols(const Expr& e, const SymbolTable& table, const char* where) {
  for (const auto& s : free_symbols(e)) {
    if (!table.contains(s)) {
      throw Error(ErrorCode::kInvalidModel, std::string(where) + " references undeclared symbol '" + s + "'");
    }
  }
}

}  // namespace

void finalize_model(SystemModel& model) {
  if (model.table.entries().empty()) {
    model.table.add_all(model.states, SymbolKind::kState);
    model.table.add_all(model.inputs, SymbolKind::kInput);
    model.table.add_all(model.extras, SymbolKind::kExtraInput);
  }
  std::size_t n = model.states.size(), m1 = model.inputs.size(), m2 = model.extras.size();
  if (model.f.empty()) model.f.assign(n, Expr::constant(0.0));
  fill(model.G, n, m1);
  fill(model.H, n, m2);
  if (model.h2.empty() && m2 > 0) model.h2.assign(m2, Expr::constant(0.0));
  if (model.h1.empty()) model.h1.assign(m1, Expr::constant(0.0));
  fill(model.Abar1, m1, m1);
  fill(model.Abar2, m2, m1);
  fill(model.Bbar1, m1, m2);
  fill(model.Bbar2, m2, m2);
}

std::vector<std::string> SystemModel::validate() const {
  std::size_t n = states.size(), m1 = inputs.size(), m2 = extras.size();
  if (n == 0) throw Error(ErrorCode::kInvalidModel, "model has no states");
  if (m1 == 0) throw Error(ErrorCode::kInvalidModel, "model has no inputs");
  if (f.size() != n) throw Error(ErrorCode::kInvalidModel, "f must have n entries");
  check_shape(G, n, m1, "G");
  check_shape(H, n, m2, "H");
  if (h1.size() != m1) throw Error(ErrorCode::kInvalidModel, "h1 must have m1 entries");
  if (h2.size() != m2) throw Error(ErrorCode::kInvalidModel, "h2 must have m2 entries");
  check_shape(Abar1, m1, m1, "Abar1");
  check_shape(Abar2, m2, m1, "Abar2");
  check_shape(Bbar1, m1, m2, "Bbar1");
  check_shape(Bbar2, m2, m2, "Bbar2");
  for (const auto& group : {states, inputs, extras}) {
    for (const auto& s : group) {
      if (!table.contains(s)) throw Error(ErrorCode::kInvalidModel, "symbol '" + s + "' missing from table");
    }
  }
  for (const auto& e : f) check_symbols(e, table, "f");
  for (const auto& e : h1) check_symbols(e, table, "h1");
  for (const auto& e : h2) check_symbols(e, table, "h2");
  for (const auto* m : {&G, &H, &Abar1, &Abar2, &Bbar1, &Bbar2}) {
    for (std::size_t i = 0; i < m->rows(); ++i)
      for (std::size_t j = 0; j < m->cols(); ++j) check_symbols((*m)(i, j), table, "matrix entry");
  }
  for (int c : angular_outputs) {
    if (c < 0 || static_cast<std::size_t>(c) >= m1 + m2) {
      throw Error(ErrorCode::kInvalidModel, "angular output index out of range");
    }
  }

  std::vector<std::string> warnings;
  if (m2 > n - std::min(n, m1)) {
    warnings.push_back("m2 exceeds n - m1; the extra inputs outnumber the unactuated directions");
  }
  try {
    Eigen::MatrixXd g = G.evaluate(operating_assignment());
    int rank = numeric_rank(g);
    if (rank != static_cast<int>(m1)) {
      warnings.push_back("G has rank " + std::to_string(rank) + " < m1 at the operating point");
    }
  } catch (const Error& e) {
    warnings.push_back(std::string("G not evaluable at the operating point: ") + e.what());
  }
  return warnings;
}

}  // namespace ioext
