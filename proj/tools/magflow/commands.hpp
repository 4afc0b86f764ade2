#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace magflow::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  kExitSuccess = 0,
  kExitError = 1,
  kExitNonconvergence = 2,
};

const std::vector<std::string>& command_names();

// Seed loop described by cfg.seed at cfg.solver.loop_nodes nodes, lifted
// canonically. `random` draws from a generator seeded with cfg.rng_seed.
LiftedLoop make_seed(const MagneticSystem& sys, const RunConfig& cfg);

// Runs one command. The JSON summary goes to `out`, diagnostics to `err`,
// CSV and loop artifacts to cfg.output_dir. Returns kExitSuccess,
// kExitNonconvergence (MaxIterations, an unconverged band, a failed
// multiplicity pair, an uncertified orbit-check) or kExitError.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace magflow::cli
