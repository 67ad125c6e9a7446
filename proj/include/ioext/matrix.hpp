#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ioext/expr.hpp"
#include "ioext/symbols.hpp"

namespace ioext {

using ExprVector = std::vector<Expr>;

// Dense row-major matrix of expressions.
class ExprMatrix {
 public:
  ExprMatrix() = default;
  ExprMatrix(std::size_t rows, std::size_t cols);  // zeros

  static ExprMatrix identity(std::size_t n);
  static ExprMatrix column(const ExprVector& v);
  static ExprMatrix row(const ExprVector& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  Expr& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const Expr& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  ExprMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  ExprVector row_vector(std::size_t i) const;
  ExprVector column_vector(std::size_t j) const;
  ExprMatrix transpose() const;

  ExprMatrix simplified() const;
  ExprMatrix substituted(const std::map<std::string, Expr>& replacements) const;
  Eigen::MatrixXd evaluate(const Assignment& assignment) const;

  friend bool operator==(const ExprMatrix& a, const ExprMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Expr> data_;
};

// Products and sums are simplified entrywise.
ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b);
ExprVector operator*(const ExprMatrix& a, const ExprVector& v);

ExprVector add(const ExprVector& a, const ExprVector& b);
ExprVector subtract(const ExprVector& a, const ExprVector& b);
ExprVector negate(const ExprVector& a);
ExprVector simplified(const ExprVector& v);
ExprVector substituted(const ExprVector& v, const std::map<std::string, Expr>& replacements);
Eigen::VectorXd evaluate(const ExprVector& v, const Assignment& assignment);

ExprMatrix hstack(const ExprMatrix& left, const ExprMatrix& right);
ExprMatrix vstack(const ExprMatrix& top, const ExprMatrix& bottom);

// Laplace expansion; simplified. Intended for the small blocks that appear in
// decoupling matrices (dimension <= 6).
Expr determinant(const ExprMatrix& m);
// Adjugate over determinant; simplified.
ExprMatrix inverse(const ExprMatrix& m);

std::vector<std::vector<std::string>> to_strings(const ExprMatrix& m);

// "[a, b; c, d]" (brackets optional). Rows split at top-level ';', entries at
// top-level ','. Syntax error offsets refer to `text`.
ExprMatrix parse_matrix(std::string_view text, const SymbolTable& table);
// "[a; b]" or "[a, b]" or a single expression, as a vector.
ExprVector parse_vector(std::string_view text, const SymbolTable& table);

// |det| > tol * prod(row norms). A matrix with a zero row is never regular.
bool numerically_nonsingular(const Eigen::MatrixXd& m, double tol = 1e-9);
int numeric_rank(const Eigen::MatrixXd& m, double tol = 1e-9);
double condition_number(const Eigen::MatrixXd& m);

}  // namespace ioext
