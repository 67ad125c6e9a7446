#include "ioext/matrix.hpp"

#include <cmath>
#include <limits>
#include <string_view>
#include <utility>

#include "ioext/error.hpp"

namespace ioext {

ExprMatrix::ExprMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, Expr::constant(0.0)) {}

ExprMatrix ExprMatrix::identity(std::size_t n) {
  ExprMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = Expr::constant(1.0);
  return m;
}

ExprMatrix ExprMatrix::column(const ExprVector& v) {
  ExprMatrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

ExprMatrix ExprMatrix::row(const ExprVector& v) {
  ExprMatrix m(1, v.size());
  for (std::size_t j = 0; j < v.size(); ++j) m(0, j) = v[j];
  return m;
}

ExprMatrix ExprMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  ExprMatrix out(nr, nc);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nc; ++j) out(i, j) = (*this)(r0 + i, c0 + j);
  }
  return out;
}

ExprVector ExprMatrix::row_vector(std::size_t i) const {
  ExprVector v(cols_);
  for (std::size_t j = 0; j < cols_; ++j) v[j] = (*this)(i, j);
  return v;
}

ExprVector ExprMatrix::column_vector(std::size_t j) const {
  ExprVector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

ExprMatrix ExprMatrix::transpose() const {
  ExprMatrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  }
  return out;
}

ExprMatrix ExprMatrix::simplified() const {
  ExprMatrix out = *this;
  for (auto& e : out.data_) e = simplify(e);
  return out;
}

ExprMatrix ExprMatrix::substituted(const std::map<std::string, Expr>& replacements) const {
  ExprMatrix out = *this;
  for (auto& e : out.data_) e = simplify(substitute(e, replacements));
  return out;
}

Eigen::MatrixXd ExprMatrix::evaluate(const Assignment& assignment) const {
  Eigen::MatrixXd m(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) m(i, j) = eval_expr((*this)(i, j), assignment);
  }
  return m;
}

bool operator==(const ExprMatrix& a, const ExprMatrix& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidModel, std::string("dimension mismatch in ") + what);
}

}  // namespace

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b) {
  require(a.cols() == b.rows(), "matrix product");
  ExprMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      std::vector<Expr> terms;
      terms.reserve(a.cols());
      for (std::size_t k = 0; k < a.cols(); ++k) {
        if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
        terms.push_back(a(i, k) * b(k, j));
      }
      out(i, j) = simplify(Expr::add(std::move(terms)));
    }
  }
  return out;
}

ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix sum");
  ExprMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = simplify(a(i, j) + b(i, j));
  }
  return out;
}

ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix difference");
  ExprMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = simplify(a(i, j) - b(i, j));
  }
  return out;
}

ExprVector operator*(const ExprMatrix& a, const ExprVector& v) {
  return (a * ExprMatrix::column(v)).column_vector(0);
}

ExprVector add(const ExprVector& a, const ExprVector& b) {
  require(a.size() == b.size(), "vector sum");
  ExprVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = simplify(a[i] + b[i]);
  return out;
}

ExprVector subtract(const ExprVector& a, const ExprVector& b) {
  require(a.size() == b.size(), "vector difference");
  ExprVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = simplify(a[i] - b[i]);
  return out;
}

ExprVector negate(const ExprVector& a) {
  ExprVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = simplify(-a[i]);
  return out;
}

ExprVector simplified(const ExprVector& v) {
  ExprVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = simplify(v[i]);
  return out;
}

ExprVector substituted(const ExprVector& v, const std::map<std::string, Expr>& replacements) {
  ExprVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = simplify(substitute(v[i], replacements));
  return out;
}

Eigen::VectorXd evaluate(const ExprVector& v, const Assignment& assignment) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = eval_expr(v[i], assignment);
  return out;
}

ExprMatrix hstack(const ExprMatrix& left, const ExprMatrix& right) {
  require(left.rows() == right.rows(), "hstack");
  ExprMatrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t i = 0; i < left.rows(); ++i) {
    for (std::size_t j = 0; j < left.cols(); ++j) out(i, j) = left(i, j);
    for (std::size_t j = 0; j < right.cols(); ++j) out(i, left.cols() + j) = right(i, j);
  }
  return out;
}

ExprMatrix vstack(const ExprMatrix& top, const ExprMatrix& bottom) {
  require(top.cols() == bottom.cols(), "vstack");
  ExprMatrix out(top.rows() + bottom.rows(), top.cols());
  for (std::size_t j = 0; j < top.cols(); ++j) {
    for (std::size_t i = 0; i < top.rows(); ++i) out(i, j) = top(i, j);
    for (std::size_t i = 0; i < bottom.rows(); ++i) out(top.rows() + i, j) = bottom(i, j);
  }
  return out;
}

namespace {

ExprMatrix minor_of(const ExprMatrix& m, std::size_t row, std::size_t col) {
  std::size_t n = m.rows();
  ExprMatrix out(n - 1, n - 1);
  for (std::size_t i = 0, oi = 0; i < n; ++i) {
    if (i == row) continue;
    for (std::size_t j = 0, oj = 0; j < n; ++j) {
      if (j == col) continue;
      out(oi, oj++) = m(i, j);
    }
    ++oi;
  }
  return out;
}

}  // namespace

Expr determinant(const ExprMatrix& m) {
  require(m.rows() == m.cols(), "determinant");
  std::size_t n = m.rows();
  if (n == 0) return Expr::constant(1.0);
  if (n == 1) return simplify(m(0, 0));
  if (n == 2) return simplify(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
  std::vector<Expr> terms;
  for (std::size_t j = 0; j < n; ++j) {
    if (m(0, j).is_zero()) continue;
    Expr cof = determinant(minor_of(m, 0, j));
    if (cof.is_zero()) continue;
    Expr t = m(0, j) * cof;
    terms.push_back(j % 2 == 0 ? t : -t);
  }
  return simplify(Expr::add(std::move(terms)));
}

ExprMatrix inverse(const ExprMatrix& m) {
  require(m.rows() == m.cols(), "inverse");
  std::size_t n = m.rows();
  Expr det = determinant(m);
  if (det.is_zero()) throw Error(ErrorCode::kInvalidModel, "symbolic inverse of an identically singular matrix");
  Expr inv_det = simplify(Expr::pow(det, -1));
  ExprMatrix out(n, n);
  if (n == 1) {
    out(0, 0) = inv_det;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Expr cof = determinant(minor_of(m, j, i));
      if ((i + j) % 2 == 1) cof = -cof;
      out(i, j) = simplify(cof * inv_det);
    }
  }
  return out;
}

std::vector<std::vector<std::string>> to_strings(const ExprMatrix& m) {
  std::vector<std::vector<std::string>> out(m.rows(), std::vector<std::string>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = to_string(m(i, j));
  }
  return out;
}

namespace {

// Splits at `sep` outside parentheses; returns (offset, piece) pairs.
std::vector<std::pair<std::size_t, std::string_view>> split_top(std::string_view text, std::size_t base, char sep) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.emplace_back(base + start, text.substr(start, i - start));
      start = i + 1;
    }
  }
  out.emplace_back(base + start, text.substr(start));
  return out;
}

Expr parse_at(std::string_view piece, std::size_t offset, const SymbolTable& table) {
  try {
    return parse_expr(piece, table);
  } catch (const SyntaxError& e) {
    throw SyntaxError(std::string(e.what()).substr(14), offset + e.offset());
  } catch (const UndeclaredSymbolError& e) {
    throw UndeclaredSymbolError(e.symbol(), offset + e.offset());
  }
}

std::pair<std::size_t, std::string_view> strip_brackets(std::string_view text) {
  std::size_t b = text.find_first_not_of(" \t");
  std::size_t e = text.find_last_not_of(" \t");
  if (b == std::string_view::npos) throw SyntaxError("empty matrix", 0);
  if (text[b] == '[') {
    if (text[e] != ']') throw SyntaxError("missing ']'", e + 1);
    return {b + 1, text.substr(b + 1, e - b - 1)};
  }
  return {0, text};
}

}  // namespace

ExprMatrix parse_matrix(std::string_view text, const SymbolTable& table) {
  auto [base, body] = strip_brackets(text);
  auto rows = split_top(body, base, ';');
  std::vector<std::vector<Expr>> cells;
  for (const auto& [off, row] : rows) {
    std::vector<Expr> r;
    for (const auto& [coff, cell] : split_top(row, off, ',')) r.push_back(parse_at(cell, coff, table));
    if (!cells.empty() && r.size() != cells.front().size()) {
      throw SyntaxError("row has " + std::to_string(r.size()) + " entries, expected " +
                            std::to_string(cells.front().size()),
                        off);
    }
    cells.push_back(std::move(r));
  }
  ExprMatrix m(cells.size(), cells.front().size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = 0; j < cells[i].size(); ++j) m(i, j) = cells[i][j];
  return m;
}

ExprVector parse_vector(std::string_view text, const SymbolTable& table) {
  ExprMatrix m = parse_matrix(text, table);
  if (m.cols() == 1) return m.column_vector(0);
  if (m.rows() == 1) return m.row_vector(0);
  throw SyntaxError("expected a vector", 0);
}

bool numerically_nonsingular(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (m.rows() == 0) return true;
  if (!m.allFinite()) return false;
  double scale = 1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) scale *= m.row(i).norm();
  if (scale == 0.0) return false;
  double det = m.fullPivLu().determinant();
  return std::abs(det) > tol * scale;
}

int numeric_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  if (!m.allFinite()) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++rank;
  }
  return rank;
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  if (!m.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

}  // namespace ioext
