// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "magflow/critical_values.hpp"
#include "magflow/errors.hpp"
#include "magflow/flow.hpp"
#include "magflow/loop_space.hpp"
#include "magflow/variational.hpp"
#include "random_loops.hpp"

namespace magflow {
namespace {

constexpr double kPi = std::numbers::pi;

MagneticSystem kinetic(ScalarField f) { return MagneticSystem(Lagrangian::kinetic(), std::move(f)); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LiftedLoop equator_seed(const MagneticSystem& sys, double e, int n) {
  const FreePeriodLoop loop = bumped(latitude_circle(0.0, n, 1.0), Vec3::UnitZ(), 0.05);
  return lift(sys, loop.with_period(optimal_period(sys, e, loop)));
}

SolverConfig solver(int n, int m) {
  SolverConfig cfg;
  cfg.loop_nodes = n;
  cfg.path_nodes = m;
  return cfg;
}

// 1. Gradient against central differences.
Verdict gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const LiftedLoop ll = lift(sys, testing::random_loop(rng, 64));
    const auto [dir, dp] = testing::random_direction(rng, ll.loop);
    worst = std::max(worst, testing::gradient_fd_relative_error(sys, 0.02, ll, dir, dp));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-5 && t <= 30.0, fmt("max relative error %.3e over 100 loops, %.1f s", worst, t)};
}

double relative_drift(const Trajectory& traj) {
  const double e0 = traj.energy_series.front();
  double worst = 0.0;
  for (double e : traj.energy_series) worst = std::max(worst, std::abs(e - e0));
  return worst / std::abs(e0);
}

// 2. Energy conservation and the drift ratio under step halving.
Verdict energy_conservation() {
  const auto sys = kinetic(ScalarField::constant(1.0));
  const State s0{Vec3::UnitX(), Vec3::UnitY()};
  const double coarse = relative_drift(integrate(sys, s0, 50.0, 1e-3));
  const double fine = relative_drift(integrate(sys, s0, 50.0, 5e-4));
  const double ratio = coarse / fine;
  return {coarse <= 1e-7 && ratio >= 12.0 && ratio <= 20.0,
          fmt("relative drift %.3e at h=1e-3, %.3e at h=5e-4, ratio %.2f (required [12, 20])", coarse, fine,
              ratio)};
}

// 3. Closed orbit of the constant field.
Verdict closed_form_orbit() {
  const auto sys = kinetic(ScalarField::constant(1.0));
  const State s0{Vec3::UnitX(), Vec3::UnitY()};
  const double period = kPi * std::sqrt(2.0);
  const State end = integrate(sys, s0, period, 1e-3).states.back();
  const double residual = std::sqrt((end.q - s0.q).squaredNorm() + (end.v - s0.v).squaredNorm());
  return {residual <= 1e-6, fmt("closure residual %.3e at period %.6f", residual, period)};
}

// 4. Waist of f = z.
Verdict waist_value() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sys = kinetic(ScalarField::height(1.0, 0.0));
  const WaistResult w = find_waist(sys, 0.02, equator_seed(sys, 0.02, 128), solver(128, 16));
  const double t = seconds_since(t0);
  const double g = gradient_norm(w.loop.loop, action_gradient(sys, 0.02, w.loop));
  const bool pass = g <= 1e-6 && std::abs(w.action + 0.6 * kPi) <= 1e-3 &&
                    std::abs(w.report.mean_energy_residual) <= 1e-6 && w.report.self_intersections == 0 &&
                    t <= 120.0;
  return {pass, fmt("action %.6f (target %.6f), gradient %.2e, energy residual %.2e, %d self-intersections, "
                    "%.1f s",
                    w.action, -0.6 * kPi, g, w.report.mean_energy_residual, w.report.self_intersections, t)};
}

// 5. Deck shift and the zeta family.
Verdict deck_shift() {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const LiftedLoop u = lift(sys, testing::random_loop(rng, 64));
    const double shift = lifted_action_A(sys, 0.02, deck_transform(sys, u, 1)) - lifted_action_A(sys, 0.02, u);
    worst = std::max(worst, std::abs(shift - 0.8 * kPi));
  }
  const auto family = zeta_family(base_point().vec(), 64, 128, 1.0);
  double flux = 0.0;
  for (std::size_t k = 1; k < family.size(); ++k) flux += sweep_flux(sys.sigma(), family[k - 1], family[k]);
  const double flux_error = std::abs(flux - sys.total_flux());
  return {worst <= 1e-6 && flux_error <= 1e-4,
          fmt("max |shift - 0.8 pi| %.2e over 20 loops, zeta sweep flux error %.2e", worst, flux_error)};
}

// 6. Iterates scale the action.
Verdict iterate_identity() {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(1006);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const LiftedLoop u = lift(sys, testing::random_loop(rng, 64));
    const double a = lifted_action_A(sys, 0.02, u);
    for (int m : {2, 3, 5}) {
      worst = std::max(worst, std::abs(lifted_action_A(sys, 0.02, iterate(u, m)) - m * a) / std::abs(m * a));
    }
  }
  return {worst <= 1e-6, fmt("max relative deviation %.2e over 20 loops, m in {2, 3, 5}", worst)};
}

std::vector<double> grid(double step, double max) {
  std::vector<double> g;
  for (int k = 1; k * step <= max + 1e-12; ++k) g.push_back(k * step);
  return g;
}

// 7. Critical value e1.
Verdict e1_oracle() {
  const auto height = kinetic(ScalarField::height(1.0, 0.0));
  const E1SymmetricResult sym = e1_lower_bound_symmetric(height, 1.0);
  const E1Certificate cert = e1_lower_bound_general(height, grid(0.01, 0.15), solver(64, 16));
  bool constant_none = false;
  std::string constant_detail;
  try {
    e1_lower_bound_general(kinetic(ScalarField::constant(1.0)), grid(0.01, 0.15), solver(64, 16));
    constant_detail = "returned a certificate";
  } catch (const NoNegativeConfiguration&) {
    constant_none = true;
    constant_detail = "NoNegativeConfiguration";
  }
  const E1SymmetricResult constant_sym = e1_lower_bound_symmetric(kinetic(ScalarField::constant(1.0)), 1.0);
  const bool pass = sym.negative_found && std::abs(sym.value - 0.125) <= 1e-3 && cert.energy >= 0.12 &&
                    constant_none && !constant_sym.negative_found;
  return {pass, fmt("symmetric %.7f, general %.2f (witness action %.4f), f=1: %s, symmetric flag %s", sym.value,
                    cert.energy, cert.action_value, constant_detail.c_str(),
                    constant_sym.negative_found ? "negative" : "none")};
}

// 8. Minimax values across energies.
Verdict minimax_monotonicity() {
  const auto sys = kinetic(ScalarField::height(1.0, 0.0));
  const std::vector<double> energies{0.02, 0.04, 0.06, 0.08, 0.10};
  const auto rows = scan_energy(sys, energies, ScanSpec{equator_seed(sys, 0.02, 64), {1, 0}, {2, 0}}, solver(64, 12));
  bool pass = true;
  std::ostringstream values;
  int converged = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ScanRow& r = rows[i];
    if (!r.error.empty()) {
      pass = false;
      values << " [e=" << r.e << " error]";
      continue;
    }
    values << ' ' << fmt("%.5f", r.minimax_value);
    if (r.converged) {
      ++converged;
      if (r.closure_residual > 1e-4) pass = false;
    }
    if (i > 0 && r.minimax_value < rows[i - 1].minimax_value - 1e-3) pass = false;
  }
  return {pass && converged > 0, fmt("values%s; %d/%zu converged saddles certified", values.str().c_str(),
                                     converged, rows.size())};
}

// 9. Distinct orbits from three labels.
Verdict multiplicity() {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  const MultiplicityResult r =
      multiplicity_search(sys, 0.02, equator_seed(sys, 0.02, 64), {{1, 0}, {2, 0}, {1, 1}}, solver(64, 12));
  std::vector<const CertifiedOrbit*> certified;
  for (const CertifiedOrbit& o : r.orbits) {
    if (is_certified(o.report)) certified.push_back(&o);
  }
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < certified.size(); ++i) {
    for (std::size_t j = i + 1; j < certified.size(); ++j) {
      closest = std::min(closest, trace_distance(primitive_loop(certified[i]->loop.loop),
                                                 primitive_loop(certified[j]->loop.loop)));
    }
  }
  bool has_waist = false;
  bool has_saddle = false;
  for (const auto* o : certified) (o->origin == "waist" ? has_waist : has_saddle) = true;
  std::ostringstream origins;
  for (const auto* o : certified) origins << " '" << o->origin << "'";
  const bool pass = certified.size() >= 2 && has_waist && has_saddle && closest > 1e-2;
  return {pass, fmt("%zu certified orbits (%s ), min primitive trace distance %.3e, %zu failed pairs reported",
                    certified.size(), origins.str().c_str(), closest, r.failures.size())};
}

// Random short loop in the valley U_tau: a small Fourier curve around a
// random centre, scaled so ||gamma'||^2 = u tau p, lifted by the cone from
// its centre (small-cap spanning).
template <class Rng>
LiftedLoop valley_sample(const MagneticSystem& sys, Rng& rng, double tau, int n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vec3 c = random_sphere_point(rng);
  const Vec3 u = tangent_part(c, Vec3(normal(rng), normal(rng), normal(rng))).normalized();
  const Vec3 w = c.cross(u);
  double coeff[3][4];
  for (auto& row : coeff) {
    for (double& x : row) x = normal(rng);
  }
  const double p = tau * (0.01 + 0.99 * unit(rng));
  const double target = tau * p * (0.01 + 0.98 * unit(rng));
  const auto build = [&](double s) {
    std::vector<SpherePoint> nodes;
    for (int i = 0; i < n; ++i) {
      const double t = 2 * kPi * i / n;
      double a = 0.0, b = 0.0;
      for (int k = 0; k < 3; ++k) {
        a += (coeff[k][0] * std::cos((k + 1) * t) + coeff[k][1] * std::sin((k + 1) * t)) / (k + 1);
        b += (coeff[k][2] * std::cos((k + 1) * t) + coeff[k][3] * std::sin((k + 1) * t)) / (k + 1);
      }
      nodes.push_back(SpherePoint::unchecked(sphere_exp(c, s * (a * u + b * w))));
    }
    return FreePeriodLoop(std::move(nodes), p);
  };
  double s = std::sqrt(target / kinetic_norm_squared(sys, build(1.0)));
  FreePeriodLoop loop = build(s);
  while (!in_valley(sys, loop, tau)) loop = build(s *= 0.99);
  return lift_from_apex(sys, loop, c, 3);
}

// 10. Positivity in the valley and the shrinking supremum.
Verdict valley_properties() {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  const double e = 0.02;
  const double tau0 = valley_tau(sys);
  std::mt19937_64 rng(1010);
  double min_action = std::numeric_limits<double>::infinity();
  int samples = 0;
  for (; samples < 10000; ++samples) {
    min_action = std::min(min_action, lifted_action_A(sys, e, valley_sample(sys, rng, tau0, 32)));
  }
  std::vector<double> sups;
  for (double tau : {0.1, 0.05, 0.025}) {
    double sup = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10000; ++k) sup = std::max(sup, lifted_action_A(sys, e, valley_sample(sys, rng, tau, 32)));
    sups.push_back(sup);
  }
  const bool pass = min_action > 0.0 && sups[1] < sups[0] && sups[2] < sups[1];
  return {pass, fmt("tau = %.3f: min A over %d samples %.3e; sup A at tau 0.1/0.05/0.025: %.4e %.4e %.4e", tau0,
                    samples, min_action, sups[0], sups[1], sups[2])};
}

// 11. Byte-identical JSON on repeated runs.
Verdict determinism() {
  const auto once = [](const std::string& command, const cli::RunConfig& cfg) {
    std::ostringstream out, err;
    const int code = cli::run_command(command, cfg, out, err);
    return std::to_string(code) + "\n" + out.str();
  };
  cli::RunConfig random_waist = cli::parse_config_text(
      "system.density = height(1, 0.2)\ncfg.loop_nodes = 64\nseed.kind = random\nrun.seed = 20261017\n");
  random_waist.output_dir = "acceptance_determinism/waist";
  cli::RunConfig multi = cli::parse_config_text(
      "system.density = height(1, 0.2)\ncfg.loop_nodes = 64\ncfg.path_nodes = 12\nrun.seed = 11\n");
  multi.output_dir = "acceptance_determinism/multiplicity";
  cli::RunConfig critical = cli::parse_config_text("system.density = height(1, 0)\n");
  critical.output_dir = "acceptance_determinism/critical";
  int identical = 0;
  int total = 0;
  for (const auto& [command, cfg] : std::vector<std::pair<std::string, cli::RunConfig>>{
           {"waist", random_waist}, {"multiplicity", multi}, {"critical-values", critical}}) {
    ++total;
    if (once(command, cfg) == once(command, cfg)) ++identical;
  }
  return {identical == total, fmt("%d/%d commands byte-identical on repeat", identical, total)};
}

}  // namespace
}  // namespace magflow

int main() {
  using magflow::Verdict;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient correctness", magflow::gradient_correctness},
      {"energy conservation", magflow::energy_conservation},
      {"closed-form orbit", magflow::closed_form_orbit},
      {"waist value", magflow::waist_value},
      {"deck-shift identity", magflow::deck_shift},
      {"iterate identity", magflow::iterate_identity},
      {"e1 oracle", magflow::e1_oracle},
      {"minimax monotonicity", magflow::minimax_monotonicity},
      {"multiplicity", magflow::multiplicity},
      {"valley properties", magflow::valley_properties},
      {"determinism", magflow::determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
