#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ioext {

enum class ErrorCode {
  kSyntax,
  kUndeclaredSymbol,
  kDivisionByZero,
  kMissingSymbol,
  kInvalidModel,
  kMaxOrderExceeded,
  kAssumptionViolated,
  kCaseMismatch,
  kGainNotPositiveDefinite,
  kNotColumnDegenerate,
  kNotApplicable,
  kN1Singular,
  kNonUniformRelativeDegree,
  kNearSingularGamma,
  kSingularState,
  kDivergence,
  kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Parse failure at a byte offset of the parsed text.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UndeclaredSymbolError : public Error {
 public:
  UndeclaredSymbolError(std::string symbol, std::size_t offset);
  const std::string& symbol() const { return symbol_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string symbol_;
  std::size_t offset_;
};

// Raised by the outer law when Gamma cannot be inverted reliably.
class NearSingularError : public Error {
 public:
  NearSingularError(double condition_number, std::vector<double> state,
                    const std::string& detail = {});
  double condition_number() const { return condition_number_; }
  const std::vector<double>& state() const { return state_; }

 private:
  double condition_number_;
  std::vector<double> state_;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(long step);
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace ioext
