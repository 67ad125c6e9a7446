#include "ioext/error.hpp"

#include <sstream>

namespace ioext {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax:
      return "syntax error";
    case ErrorCode::kUndeclaredSymbol:
      return "undeclared symbol";
    case ErrorCode::kDivisionByZero:
      return "division by zero";
    case ErrorCode::kMissingSymbol:
      return "missing symbol";
    case ErrorCode::kInvalidModel:
      return "invalid model";
    case ErrorCode::kMaxOrderExceeded:
      return "max order exceeded";
    case ErrorCode::kAssumptionViolated:
      return "assumption violated";
    case ErrorCode::kCaseMismatch:
      return "case mismatch";
    case ErrorCode::kGainNotPositiveDefinite:
      return "gain not PD";
    case ErrorCode::kNotColumnDegenerate:
      return "not column-degenerate";
    case ErrorCode::kNotApplicable:
      return "not applicable; use case 1";
    case ErrorCode::kN1Singular:
      return "N1 singular at x0";
    case ErrorCode::kNonUniformRelativeDegree:
      return "non-uniform relative degree";
    case ErrorCode::kNearSingularGamma:
      return "near-singular Gamma";
    case ErrorCode::kSingularState:
      return "singular state";
    case ErrorCode::kDivergence:
      return "divergence";
    case ErrorCode::kIo:
      return "i/o error";
  }
  return "error";
}

SyntaxError::SyntaxError(const std::string& message, std::size_t offset)
    : Error(ErrorCode::kSyntax, "syntax error: " + message), offset_(offset) {}

UndeclaredSymbolError::UndeclaredSymbolError(std::string symbol, std::size_t offset)
    : Error(ErrorCode::kUndeclaredSymbol,
            "undeclared symbol '" + symbol + "' at offset " + std::to_string(offset)),
      symbol_(std::move(symbol)),
      offset_(offset) {}

namespace {

std::string describe_near_singular(double cond, const std::vector<double>& state, const std::string& detail) {
  std::ostringstream os;
  os << "near-singular Gamma: condition number " << cond << " at state [";
  for (std::size_t i = 0; i < state.size(); ++i) os << (i ? ", " : "") << state[i];
  os << "]";
  if (!detail.empty()) os << " (" << detail << ")";
  return os.str();
}

}  // namespace

NearSingularError::NearSingularError(double condition_number, std::vector<double> state, const std::string& detail)
    : Error(ErrorCode::kNearSingularGamma, describe_near_singular(condition_number, state, detail)),
      condition_number_(condition_number),
      state_(std::move(state)) {}

DivergenceError::DivergenceError(long step)
    : Error(ErrorCode::kDivergence, "divergence: non-finite state at step " + std::to_string(step)), step_(step) {}

}  // namespace ioext
