#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "magflow/critical_values.hpp"
#include "magflow/errors.hpp"
#include "magflow/flow.hpp"

namespace magflow::cli {

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json report_json(const OrbitReport& r) {
  return json{{"gradient_norm", r.gradient_norm},
              {"mean_energy_residual", r.mean_energy_residual},
              {"closure_residual", r.closure_residual},
              {"raw_closure_residual", r.raw_closure_residual},
              {"shooting_correction", r.shooting_correction},
              {"refined_period", r.refined_period},
              {"self_intersections", r.self_intersections},
              {"certified", is_certified(r)}};
}

json loop_json(const LiftedLoop& ll) { return json::parse(to_json(ll)); }

json label_json(const Label& l) { return json::array({l.m, l.n}); }

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return std::filesystem::path(cfg.output_dir) / name;
}

void write_file(const RunConfig& cfg, const std::string& name, const std::string& content) {
  const auto path = out_path(cfg, name);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write '" + path.string() + "'");
  os << content;
}

json header(const std::string& command, const RunConfig& cfg) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"seed", cfg.rng_seed},
              {"system", {{"metric", cfg.metric},
                          {"density", cfg.density},
                          {"lagrangian", cfg.lagrangian_kind},
                          {"potential", cfg.potential},
                          {"drift", cfg.drift}}}};
}

// Waist re-solved at `nodes` nodes from the base waist.
LiftedLoop waist_at(const MagneticSystem& sys, double e, const LiftedLoop& base, int nodes, const SolverConfig& s) {
  if (nodes == base.loop.size()) return base;
  return find_waist(sys, e, LiftedLoop{resample(base.loop, nodes), base.flux}, s).loop;
}

json run_flow(const MagneticSystem& sys, const RunConfig& cfg) {
  State s0;
  s0.q = project_to_sphere(cfg.q0).vec();
  s0.v = cfg.v0 - cfg.v0.dot(s0.q) * s0.q;
  const Trajectory traj = integrate(sys, s0, cfg.duration, cfg.solver.flow_step);

  std::ostringstream csv;
  csv.precision(17);
  csv << "t,qx,qy,qz,vx,vy,vz,E\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const State& s = traj.states[i];
    csv << traj.times[i] << ',' << s.q.x() << ',' << s.q.y() << ',' << s.q.z() << ',' << s.v.x() << ','
        << s.v.y() << ',' << s.v.z() << ',' << traj.energy_series[i] << '\n';
  }
  write_file(cfg, "flow.csv", csv.str());

  json j = header("flow", cfg);
  j["duration"] = cfg.duration;
  j["step"] = cfg.solver.flow_step;
  j["steps"] = traj.times.size() - 1;
  j["initial_energy"] = traj.energy_series.front();
  j["energy_drift"] = energy_drift(traj);
  j["final_state"] = {{"q", vec_json(traj.states.back().q)}, {"v", vec_json(traj.states.back().v)}};
  j["csv"] = "flow.csv";
  return j;
}

json run_waist(const MagneticSystem& sys, const RunConfig& cfg) {
  const WaistResult w = find_waist(sys, cfg.e, make_seed(sys, cfg), cfg.solver);
  write_file(cfg, "waist.json", to_json(w.loop) + "\n");
  write_file(cfg, "waist.csv", to_csv(w.loop.loop));
  json j = header("waist", cfg);
  j["e"] = cfg.e;
  j["action"] = w.action;
  j["iterations"] = w.iterations;
  j["period"] = w.loop.loop.period();
  j["report"] = report_json(w.report);
  j["loop"] = loop_json(w.loop);
  j["artifacts"] = json::array({"waist.json", "waist.csv"});
  return j;
}

json run_minimax(const MagneticSystem& sys, const RunConfig& cfg, bool* converged) {
  const WaistResult w = find_waist(sys, cfg.e, make_seed(sys, cfg), cfg.solver);
  const int n = w.loop.loop.size();
  const int mult = std::lcm(cfg.from.m, cfg.to.m);
  if (n * mult > kMaxIterateNodes) throw InvalidArgument("band loops would exceed 4096 nodes");
  const LiftedLoop a = labelled(sys, waist_at(sys, cfg.e, w.loop, n * mult / cfg.from.m, cfg.solver), cfg.from);
  const LiftedLoop b = labelled(sys, waist_at(sys, cfg.e, w.loop, n * mult / cfg.to.m, cfg.solver), cfg.to);
  const MinimaxResult mm = minimax_path(sys, cfg.e, a, b, cfg.solver.path_nodes, cfg.solver);
  *converged = mm.converged;

  std::ostringstream hist;
  hist.precision(17);
  hist << "sweep,max_action\n";
  for (std::size_t i = 0; i < mm.history.size(); ++i) hist << i << ',' << mm.history[i] << '\n';
  write_file(cfg, "minimax_history.csv", hist.str());
  std::ostringstream band;
  band.precision(17);
  band << "image,action,flux\n";
  for (std::size_t k = 0; k < mm.path.images.size(); ++k) {
    const LiftedLoop& im = mm.path.images[k];
    const LiftedLoop tuned{im.loop.with_period(optimal_period(sys, cfg.e, im.loop)), im.flux};
    band << k << ',' << lifted_action_A(sys, cfg.e, tuned) << ',' << im.flux << '\n';
  }
  write_file(cfg, "minimax_band.csv", band.str());
  write_file(cfg, "saddle.json", to_json(mm.saddle) + "\n");

  json j = header("minimax", cfg);
  j["e"] = cfg.e;
  j["from"] = label_json(cfg.from);
  j["to"] = label_json(cfg.to);
  j["waist_action"] = w.action;
  j["endpoint_actions"] = json::array({lifted_action_A(sys, cfg.e, a), lifted_action_A(sys, cfg.e, b)});
  j["value"] = mm.value;
  j["argmax_index"] = mm.argmax_index;
  j["saddle_gradient_norm"] = mm.saddle_gradient_norm;
  j["converged"] = mm.converged;
  j["sweeps"] = mm.history.size();
  j["report"] = mm.converged ? report_json(certify_orbit(sys, mm.saddle.loop, cfg.e, cfg.solver.flow_step))
                             : json(nullptr);
  j["saddle"] = loop_json(mm.saddle);
  j["artifacts"] = json::array({"minimax_history.csv", "minimax_band.csv", "saddle.json"});
  return j;
}

json run_scan(const MagneticSystem& sys, const RunConfig& cfg, bool* all_converged) {
  if (cfg.e_grid.empty()) throw ValidationError("energy.grid: required by scan");
  const ScanSpec spec{make_seed(sys, cfg), cfg.from, cfg.to};
  const std::vector<ScanRow> rows = scan_energy(sys, cfg.e_grid, spec, cfg.solver);
  write_file(cfg, "scan.csv", scan_to_csv(rows));
  json j = header("scan", cfg);
  j["from"] = label_json(cfg.from);
  j["to"] = label_json(cfg.to);
  j["rows"] = json::array();
  *all_converged = true;
  for (const ScanRow& r : rows) {
    *all_converged = *all_converged && r.converged && r.error.empty();
    j["rows"].push_back({{"e", r.e},
                         {"waist_action", r.waist_action},
                         {"minimax_value", r.minimax_value},
                         {"converged", r.converged},
                         {"closure_residual", r.closure_residual},
                         {"error", r.error}});
  }
  j["artifacts"] = json::array({"scan.csv"});
  return j;
}

json run_multiplicity(const MagneticSystem& sys, const RunConfig& cfg, bool* complete) {
  const MultiplicityResult res = multiplicity_search(sys, cfg.e, make_seed(sys, cfg), cfg.labels, cfg.solver);
  json j = header("multiplicity", cfg);
  j["e"] = cfg.e;
  j["labels"] = json::array();
  for (const Label& l : cfg.labels) j["labels"].push_back(label_json(l));
  j["orbits"] = json::array();
  for (std::size_t i = 0; i < res.orbits.size(); ++i) {
    const CertifiedOrbit& o = res.orbits[i];
    const std::string name = "orbit_" + std::to_string(i) + ".json";
    write_file(cfg, name, to_json(o.loop) + "\n");
    j["orbits"].push_back({{"origin", o.origin},
                           {"action", o.action},
                           {"period", o.loop.loop.period()},
                           {"report", report_json(o.report)},
                           {"file", name}});
  }
  j["failures"] = json::array();
  for (const PairFailure& f : res.failures) {
    j["failures"].push_back({{"a", label_json(f.a)}, {"b", label_json(f.b)}, {"reason", f.reason}});
  }
  std::size_t certified = 0;
  for (const CertifiedOrbit& o : res.orbits) certified += is_certified(o.report) ? 1 : 0;
  j["distinct_certified_orbits"] = certified;
  *complete = res.failures.empty();
  return j;
}

json run_critical_values(const MagneticSystem& sys, const RunConfig& cfg) {
  json j = header("critical-values", cfg);
  const double e0_value = compute_e0(sys);
  j["e0"] = e0_value;
  double bound = e0_value;
  bool found = false;
  j["symmetric"] = nullptr;
  if (sys.rotationally_symmetric()) {
    const E1SymmetricResult r = e1_lower_bound_symmetric(sys, cfg.e_max, cfg.bisection_tol);
    j["symmetric"] = {{"value", r.value}, {"negative_found", r.negative_found}, {"critical_z0", r.critical_z0}};
    if (r.negative_found) {
      bound = r.value;
      found = true;
    }
  }
  j["certificate"] = nullptr;
  if (cfg.general_search || !sys.rotationally_symmetric()) {
    std::vector<double> grid;
    for (int k = 1; k * cfg.grid_step <= cfg.grid_max + 1e-12; ++k) {
      if (k * cfg.grid_step > e0_value) grid.push_back(k * cfg.grid_step);
    }
    try {
      const E1Certificate c = e1_lower_bound_general(sys, grid, cfg.solver);
      j["certificate"] = {{"energy", c.energy}, {"action_value", c.action_value}, {"witness", loop_json(c.witness)}};
      if (!found || c.energy > bound) bound = c.energy;
      found = true;
    } catch (const NoNegativeConfiguration&) {
    }
  }
  j["negative_found"] = found;
  j["e1_lower_bound"] = bound;
  return j;
}

json run_orbit_check(const MagneticSystem& sys, const RunConfig& cfg, bool* certified) {
  LiftedLoop candidate;
  if (!cfg.orbit_file.empty()) {
    std::ifstream in(cfg.orbit_file);
    if (!in) throw InvalidArgument("cannot open orbit file '" + cfg.orbit_file + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    candidate = lifted_loop_from_json(buffer.str());
  } else {
    candidate = make_seed(sys, cfg);
  }
  const OrbitReport rep = certify_orbit(sys, candidate.loop, cfg.e, cfg.solver.flow_step);
  *certified = is_certified(rep);
  json j = header("orbit-check", cfg);
  j["e"] = cfg.e;
  j["action"] = lifted_action_A(sys, cfg.e, candidate);
  j["period"] = candidate.loop.period();
  j["report"] = report_json(rep);
  return j;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"flow",         "waist",           "minimax",    "scan",
                                                 "multiplicity", "critical-values", "orbit-check"};
  return names;
}

LiftedLoop make_seed(const MagneticSystem& sys, const RunConfig& cfg) {
  const SeedSpec& s = cfg.seed;
  if (s.kind == "file") {
    std::ifstream in(s.file);
    if (!in) throw InvalidArgument("cannot open seed file '" + s.file + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return lifted_loop_from_json(buffer.str());
  }
  const int n = cfg.solver.loop_nodes;
  const Orientation o = s.orientation == "upper" ? Orientation::kUpperCapLeft : Orientation::kLowerCapLeft;
  FreePeriodLoop loop = latitude_circle(0.0, n, 1.0, o);
  if (s.kind == "latitude") {
    loop = bumped(latitude_circle(s.z0, n, 1.0, o), Vec3::UnitZ(), s.bump);
  } else if (s.kind == "meridian") {
    loop = bumped(meridian_circle(s.phi, n, 1.0, o), Vec3::UnitX(), s.bump);
  } else {
    std::mt19937_64 rng(cfg.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double z0 = -0.6 + 1.2 * unit(rng);
    const double amplitude = 0.02 + 0.08 * unit(rng);
    const double center = unit(rng);
    loop = bumped(latitude_circle(z0, n, 1.0, o), Vec3::UnitZ(), amplitude, center);
  }
  loop = loop.with_period(optimal_period(sys, cfg.e, loop));
  return lift(sys, loop);
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const MagneticSystem sys = build_system(cfg);
    json j;
    bool ok = true;
    if (command == "flow") {
      j = run_flow(sys, cfg);
    } else if (command == "waist") {
      j = run_waist(sys, cfg);
    } else if (command == "minimax") {
      j = run_minimax(sys, cfg, &ok);
    } else if (command == "scan") {
      j = run_scan(sys, cfg, &ok);
    } else if (command == "multiplicity") {
      j = run_multiplicity(sys, cfg, &ok);
    } else if (command == "critical-values") {
      j = run_critical_values(sys, cfg);
    } else if (command == "orbit-check") {
      j = run_orbit_check(sys, cfg, &ok);
    } else {
      err << "error: unknown command '" << command << "'\n";
      return kExitError;
    }
    out << j.dump(2) << '\n';
    if (!ok) {
      err << "warning: " << command << " did not converge or certify; see the JSON summary\n";
      return kExitNonconvergence;
    }
    return kExitSuccess;
  } catch (const MaxIterations& ex) {
    err << "MaxIterations: " << ex.what() << '\n';
    return kExitNonconvergence;
  } catch (const Error& ex) {
    err << ex.kind() << ": " << ex.what() << '\n';
    return kExitError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitError;
  }
}

}  // namespace magflow::cli
