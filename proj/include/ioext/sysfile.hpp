#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ioext/error.hpp"
#include "ioext/model.hpp"
#include "ioext/simulate.hpp"
#include "ioext/synthesis.hpp"

namespace ioext {

// Parse failure inside a system file; line and column are 1-based.
class FileSyntaxError : public SyntaxError {
 public:
  FileSyntaxError(const std::string& origin, int line, int column, const std::string& message,
                  std::size_t offset);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct SimulationSettings {
  double T = 10.0;
  double dt = 1e-3;
  Assignment x0;
  std::optional<Eigen::MatrixXd> L;  // default: 5 I
  std::uint64_t seed = 0;
  double jitter = 0.0;
  bool lock_extra = false;
  double tolerance = 1e-3;  // final error bound for a successful run
};

struct SystemFile {
  SystemModel model;
  CaseHint case_hint = CaseHint::kAuto;
  SynthesisOptions synthesis;
  std::optional<Trajectory> trajectory;
  SimulationSettings simulation;
  std::vector<std::string> warnings;  // soft invariant violations from validate()
};

SystemFile parse_system_file(std::string_view text, const std::string& origin = "<input>");
SystemFile load_system_file(const std::string& path);

// Outer-law gain for `channels` outputs: the file's L, a scalar times I, or 5 I.
Eigen::MatrixXd outer_gain(const SystemFile& file, int channels);
SimulationOptions simulation_options(const SystemFile& file, int channels);

// "constant(1)", "sinusoid(offset, amplitude, frequency, phase)",
// "polynomial(c0, c1, ...)", "spline(t0:v0, t1:v1, ...)".
TrajectoryChannel parse_channel(std::string_view text);

}  // namespace ioext
