#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ioext/error.hpp"

namespace ioext {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 1,
  kExitAnalysis = 2,
  kExitInfeasible = 3,
  kExitRuntime = 4,
};

int exit_code_for(ErrorCode code);

int cmd_analyze(const std::string& file, std::ostream& out, std::ostream& err);
int cmd_check(const std::string& file, std::ostream& out, std::ostream& err);
// Writes the synthesis document to `emit` when given, otherwise to `out`.
int cmd_synthesize(const std::string& file, const std::optional<std::string>& emit, std::ostream& out,
                   std::ostream& err);

struct SimulateArgs {
  std::string file;
  std::optional<std::string> out;         // trace path; no trace is written when empty
  std::string format = "csv";             // csv | json
  std::optional<std::uint64_t> seed;      // overrides the file
  std::optional<std::string> controller;  // synthesis document from cmd_synthesize
  bool lock_extra = false;
  std::vector<double> sweep;  // scalar outer gains run concurrently
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

}  // namespace ioext
