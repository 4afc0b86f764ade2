#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magflow/system.hpp"
#include "magflow/variational.hpp"

namespace magflow::cli {

// Seed loop for waist, minimax, scan and multiplicity.
struct SeedSpec {
  std::string kind = "latitude";  // latitude | meridian | random | file
  double z0 = 0.0;
  double phi = 0.0;
  std::string orientation = "lower";  // lower | upper (cap on the left)
  double bump = 0.05;                 // amplitude of the perturbation toward +z
  std::string file;                   // lifted loop JSON when kind = file
};

struct RunConfig {
  // system
  std::string metric = "round";
  std::string density = "height(1, 0)";
  int quadrature_depth = 6;
  // lagrangian
  std::string lagrangian_kind = "electromagnetic";
  std::string potential = "constant(0)";
  std::string drift = "none";
  double quartic = 0.0;
  std::optional<double> extension_radius;  // unset: default radius
  // solver
  SolverConfig solver;
  // energies
  double e = 0.02;
  std::vector<double> e_grid;
  // seed loop
  SeedSpec seed;
  // flow
  Vec3 q0 = Vec3(1.0, 0.0, 0.0);
  Vec3 v0 = Vec3(0.0, 1.0, 0.0);
  double duration = 10.0;
  // minimax / scan
  Label from{1, 0};
  Label to{2, 0};
  // multiplicity
  std::vector<Label> labels{{1, 0}, {2, 0}, {1, 1}};
  // critical values
  double e_max = 1.0;
  double bisection_tol = 1e-6;
  bool general_search = false;
  double grid_step = 0.01;
  double grid_max = 0.2;
  // orbit-check
  std::string orbit_file;
  // run
  std::uint64_t rng_seed = 0;
  std::string output_dir = ".";
};

// Strict parse of the flat `section.key = value` format; `#` starts a
// comment. Throws ParseError (with line number) for malformed lines and
// ValidationError (naming the key) for unknown keys or invalid values.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

// Every accepted key with its documented default, one `key = value` line each.
std::string documented_defaults();

MagneticSystem build_system(const RunConfig& cfg);

}  // namespace magflow::cli
