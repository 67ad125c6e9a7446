#pragma once

#include <string>

#include <json.hpp>

#include "ioext/lie.hpp"
#include "ioext/simulate.hpp"
#include "ioext/synthesis.hpp"

namespace ioext {

using Json = nlohmann::ordered_json;

inline constexpr const char* kAnalysisSchema = "ioext.analysis/1";
inline constexpr const char* kCertificateSchema = "ioext.certificate/1";
inline constexpr const char* kSynthesisSchema = "ioext.synthesis/1";
inline constexpr const char* kMetricsSchema = "ioext.metrics/1";
inline constexpr const char* kSweepSchema = "ioext.sweep/1";

// Expressions are written in the parser's grammar.
Json expr_json(const ExprVector& v);
Json expr_json(const ExprMatrix& m);
Json numeric_json(const Eigen::MatrixXd& m);

Json report_json(const RelativeDegreeReport& r, int m1);
Json certificate_json(const FeasibilityCertificate& c);
Json role_swap_json(const RoleSwapReport& r);
Json metrics_json(const TraceMetrics& m, const SimulationTrace& trace);

Json closed_loop_json(const ClosedLoop& loop);
ClosedLoop closed_loop_from_json(const Json& j);

Json synthesis_json(const SynthesisResult& s);
// Throws Error(kIo) on a schema mismatch and SyntaxError on a bad expression.
SynthesisResult synthesis_from_json(const Json& j);

}  // namespace ioext
