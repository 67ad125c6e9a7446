// Command-line front end: analyze, check, synthesize, simulate.

#include <iostream>

#include <CLI11.hpp>

#include "ioext/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Input-output extension of internally controlled underactuated systems"};
  app.require_subcommand(1);

  std::string file;
  auto* analyze = app.add_subcommand("analyze", "relative degrees and decoupling matrices");
  analyze->add_option("file", file, "system file")->required();

  auto* check = app.add_subcommand("check", "feasibility of the extra-input direction (exit 3 if infeasible)");
  check->add_option("file", file, "system file")->required();

  std::string emit;
  auto* synth = app.add_subcommand("synthesize", "internal controller and composite decoupling matrix");
  synth->add_option("file", file, "system file")->required();
  synth->add_option("--emit", emit, "write the synthesis document to this path");

  ioext::SimulateArgs sim;
  std::string out_path, controller;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation");
  simulate->add_option("file", sim.file, "system file")->required();
  simulate->add_option("--out", out_path, "trace output path");
  simulate->add_option("--format", sim.format, "trace format")->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = simulate->add_option("--seed", seed, "seed for the initial-state jitter");
  simulate->add_option("--controller", controller, "synthesis document from 'synthesize --emit'");
  simulate->add_flag("--lock-extra", sim.lock_extra, "hold the extra inputs at zero and steer y1 only");
  simulate->add_option("--sweep", sim.sweep, "scalar outer gains run concurrently")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : ioext::kExitParse;
  }

  if (*analyze) return ioext::cmd_analyze(file, std::cout, std::cerr);
  if (*check) return ioext::cmd_check(file, std::cout, std::cerr);
  if (*synth) {
    std::optional<std::string> target;
    if (!emit.empty()) target = emit;
    return ioext::cmd_synthesize(file, target, std::cout, std::cerr);
  }
  if (!out_path.empty()) sim.out = out_path;
  if (!controller.empty()) sim.controller = controller;
  if (*seed_opt) sim.seed = seed;
  return ioext::cmd_simulate(sim, std::cout, std::cerr);
}
