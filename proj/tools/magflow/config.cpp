#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "magflow/errors.hpp"
#include "magflow/sphere_geom.hpp"

namespace magflow::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  throw ValidationError(key + ": expected a number, got '" + v + "'");
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ValidationError(key + ": expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 3) throw ValidationError(key + ": expected three comma separated numbers");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

Label to_label(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 2) throw ValidationError(key + ": expected a label 'm, n'");
  const long long m = to_integer(key, parts[0]);
  const long long n = to_integer(key, parts[1]);
  if (m < 1 || m > 16 || std::llabs(n) > 16) throw ValidationError(key + ": label needs 1 <= m <= 16, |n| <= 16");
  return {static_cast<int>(m), static_cast<int>(n)};
}

std::vector<double> to_grid(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw ValidationError(key + ": empty list");
  return out;
}

void check_field(const std::string& key, const std::string& v) {
  try {
    (void)ScalarField::parse(v);
  } catch (const Error& err) {
    throw ValidationError(key + ": " + err.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"system.metric",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "round" && (v.rfind("conformal(", 0) != 0 || v.back() != ')')) {
           throw ValidationError(k + ": expected 'round' or 'conformal(<field>)'");
         }
         if (v != "round") check_field(k, v.substr(10, v.size() - 11));
         c.metric = v;
       }},
      {"system.density",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         check_field(k, v);
         c.density = v;
       }},
      {"system.quadrature_depth",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long d = to_integer(k, v);
         if (d < 2 || d > 10) throw ValidationError(k + ": must lie in [2, 10]");
         c.quadrature_depth = static_cast<int>(d);
       }},
      {"lagrangian.kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "electromagnetic" && v != "custom") throw ValidationError(k + ": expected electromagnetic or custom");
         c.lagrangian_kind = v;
       }},
      {"lagrangian.potential",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         check_field(k, v);
         c.potential = v;
       }},
      {"lagrangian.drift",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           (void)DriftField::parse(v);
         } catch (const Error& err) {
           throw ValidationError(k + ": " + err.what());
         }
         c.drift = v;
       }},
      {"lagrangian.quartic",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.quartic = to_double(k, v);
         if (c.quartic < 0.0) throw ValidationError(k + ": must be >= 0");
       }},
      {"lagrangian.extension_radius",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.extension_radius.reset();
           return;
         }
         c.extension_radius = to_double(k, v);
         if (*c.extension_radius <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"cfg.tol",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.solver.tol = to_double(k, v);
         if (c.solver.tol <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"cfg.max_iter",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long n = to_integer(k, v);
         if (n < 1) throw ValidationError(k + ": must be >= 1");
         c.solver.max_iter = static_cast<int>(n);
       }},
      {"cfg.path_nodes",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long n = to_integer(k, v);
         if (n < 3) throw ValidationError(k + ": must be >= 3");
         c.solver.path_nodes = static_cast<int>(n);
       }},
      {"cfg.loop_nodes",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long n = to_integer(k, v);
         if (n < 16) throw ValidationError(k + ": must be >= 16");
         if (n > kMaxIterateNodes) throw ValidationError(k + ": must be <= 4096");
         c.solver.loop_nodes = static_cast<int>(n);
       }},
      {"cfg.flow_step",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.solver.flow_step = to_double(k, v);
         if (c.solver.flow_step <= 0.0 || c.solver.flow_step > 0.1) throw ValidationError(k + ": must lie in (0, 0.1]");
       }},
      {"energy.e",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.e = to_double(k, v);
         if (c.e <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"energy.grid",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.e_grid = to_grid(k, v);
         for (double e : c.e_grid) {
           if (e <= 0.0) throw ValidationError(k + ": energies must be > 0");
         }
       }},
      {"seed.kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "latitude" && v != "meridian" && v != "random" && v != "file") {
           throw ValidationError(k + ": expected latitude, meridian, random or file");
         }
         c.seed.kind = v;
       }},
      {"seed.z0",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed.z0 = to_double(k, v);
         if (std::abs(c.seed.z0) >= 1.0) throw ValidationError(k + ": must lie in (-1, 1)");
       }},
      {"seed.phi", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed.phi = to_double(k, v); }},
      {"seed.orientation",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "lower" && v != "upper") throw ValidationError(k + ": expected lower or upper");
         c.seed.orientation = v;
       }},
      {"seed.bump",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed.bump = to_double(k, v);
         if (std::abs(c.seed.bump) > 0.5) throw ValidationError(k + ": |bump| must be <= 0.5");
       }},
      {"seed.file", [](RunConfig& c, const std::string&, const std::string& v) { c.seed.file = v; }},
      {"flow.q0", [](RunConfig& c, const std::string& k, const std::string& v) { c.q0 = to_vec3(k, v); }},
      {"flow.v0", [](RunConfig& c, const std::string& k, const std::string& v) { c.v0 = to_vec3(k, v); }},
      {"flow.duration",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.duration = to_double(k, v);
         if (c.duration <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"minimax.from", [](RunConfig& c, const std::string& k, const std::string& v) { c.from = to_label(k, v); }},
      {"minimax.to", [](RunConfig& c, const std::string& k, const std::string& v) { c.to = to_label(k, v); }},
      {"multiplicity.labels",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.labels.clear();
         for (const auto& item : split(v, ';')) c.labels.push_back(to_label(k, item));
         if (c.labels.size() < 2) throw ValidationError(k + ": needs at least two labels");
       }},
      {"critical.e_max",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.e_max = to_double(k, v);
         if (c.e_max <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"critical.tol",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.bisection_tol = to_double(k, v);
         if (c.bisection_tol <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"critical.general", [](RunConfig& c, const std::string& k, const std::string& v) { c.general_search = to_bool(k, v); }},
      {"critical.grid_step",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.grid_step = to_double(k, v);
         if (c.grid_step <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"critical.grid_max",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.grid_max = to_double(k, v);
         if (c.grid_max <= 0.0) throw ValidationError(k + ": must be > 0");
       }},
      {"orbit.file", [](RunConfig& c, const std::string&, const std::string& v) { c.orbit_file = v; }},
      {"run.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long s = to_integer(k, v);
         if (s < 0) throw ValidationError(k + ": must be >= 0");
         c.rng_seed = static_cast<std::uint64_t>(s);
       }},
      {"run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
  };
  return table;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto dot = key.find('.');
    if (key.empty() || dot == std::string::npos || dot == 0 || dot + 1 == key.size() ||
        key.find_first_of(" \t") != std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed key '" + key + "'");
    }
    if (value.empty()) throw ParseError("line " + std::to_string(line_no) + ": missing value for '" + key + "'");
    if (auto [it, inserted] = seen.emplace(key, line_no); !inserted) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "' (first on line " +
                       std::to_string(it->second) + ")");
    }
    const auto setter = setters().find(key);
    if (setter == setters().end()) throw ValidationError(key + ": unknown key");
    setter->second(cfg, key, value);
  }
  if (cfg.seed.kind == "file" && cfg.seed.file.empty()) throw ValidationError("seed.file: required when seed.kind = file");
  if (cfg.labels.size() < 2) throw ValidationError("multiplicity.labels: needs at least two labels");
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string documented_defaults() {
  return R"(system.metric = round                 # round | conformal(<field>)
system.density = height(1, 0)         # sigma = f dA; constant(c) | height(a, c) | zonal_poly(c0, ..) | linear(ax, ay, az, c)
system.quadrature_depth = 6
lagrangian.kind = electromagnetic     # electromagnetic | custom
lagrangian.potential = constant(0)
lagrangian.drift = none               # none | rotation(k) | gradient(a, b, c)
lagrangian.quartic = 0                # custom kind only
lagrangian.extension_radius = auto
cfg.tol = 1e-6
cfg.max_iter = 20000
cfg.path_nodes = 16
cfg.loop_nodes = 128                  # >= 16
cfg.flow_step = 1e-3
energy.e = 0.02
# energy.grid = 0.02, 0.04            # comma separated, no default (scan)
seed.kind = latitude                  # latitude | meridian | random | file
seed.z0 = 0
seed.phi = 0
seed.orientation = lower              # cap on the left of the seed
seed.bump = 0.05
# seed.file = <path>                  # lifted loop JSON, no default
flow.q0 = 1, 0, 0
flow.v0 = 0, 1, 0
flow.duration = 10
minimax.from = 1, 0
minimax.to = 2, 0
multiplicity.labels = 1, 0; 2, 0; 1, 1
critical.e_max = 1
critical.tol = 1e-6
critical.general = false
critical.grid_step = 0.01
critical.grid_max = 0.2
# orbit.file = <path>                 # lifted loop JSON, no default
run.seed = 0
run.out = .
)";
}

MagneticSystem build_system(const RunConfig& cfg) {
  Metric metric = Metric::round();
  if (cfg.metric != "round") metric = Metric::conformal(ScalarField::parse(cfg.metric.substr(10, cfg.metric.size() - 11)));
  const ScalarField potential = ScalarField::parse(cfg.potential);
  Lagrangian l = Lagrangian::electromagnetic(metric, potential, DriftField::parse(cfg.drift));
  if (cfg.lagrangian_kind == "custom") {
    l.kind = Lagrangian::Kind::kCustomFiberPolynomial;
    l.quartic = cfg.quartic;
    if (cfg.extension_radius) {
      l.extension_radius = *cfg.extension_radius;
    } else {
      double max_u = 0.0;
      for (const Vec3& q : make_icosphere(3).vertices) max_u = std::max(max_u, std::abs(potential.value(q)));
      double e_max = cfg.e;
      for (double e : cfg.e_grid) e_max = std::max(e_max, e);
      l.extension_radius = default_extension_radius(e_max, max_u);
    }
  }
  return MagneticSystem(std::move(l), ScalarField::parse(cfg.density), cfg.quadrature_depth);
}

}  // namespace magflow::cli
