#include "magflow/critical_values.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "magflow/errors.hpp"
#include "magflow/flow.hpp"

namespace magflow {

namespace {

constexpr int kLatitudeGrid = 401;
constexpr int kFluxQuadratureOrder = 24;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 meridian_point(double z) { return Vec3(std::sqrt(std::max(0.0, 1.0 - z * z)), 0.0, z); }

// 2 pi int_{-1}^{z0} (f + d lambda) dz.
double lower_cap_flux(const MagneticSystem& sys, double z0) {
  static const detail::LineRule rule = detail::gauss_legendre(kFluxQuadratureOrder);
  const double half = 0.5 * (z0 + 1.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.x.size(); ++k) {
    const double z = -1.0 + half * (rule.x[k] + 1.0);
    acc += rule.w[k] * sys.force_density(meridian_point(z));
  }
  return kTwoPi * half * acc;
}

double golden_section(const std::function<double(double)>& f, double a, double b, double* fmin) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80 && b - a > 1e-13; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  *fmin = f(x);
  return x;
}

const MagneticSystem& area_system() {
  static const MagneticSystem sys(Lagrangian::kinetic(), ScalarField::constant(1.0));
  return sys;
}

}  // namespace

double compute_e0(const MagneticSystem& sys) { return e0(sys.lagrangian()); }

double latitude_circle_action(const MagneticSystem& sys, double e, double z0) {
  if (!sys.rotationally_symmetric()) throw NotSymmetric("latitude oracle needs a rotationally symmetric system");
  if (!(z0 > -1.0 && z0 < 1.0)) throw InvalidArgument("latitude z0 must lie in (-1, 1)");
  const Vec3 q = meridian_point(z0);
  const double length = kTwoPi * std::sqrt(1.0 - z0 * z0);
  const double slack = std::max(0.0, e - sys.lagrangian().potential.value(q));
  return length * std::sqrt(2.0 * slack) + lower_cap_flux(sys, z0);
}

LatitudeMinimum min_latitude_action(const MagneticSystem& sys, double e) {
  const auto z_at = [](int i) { return -1.0 + 2.0 * (i + 1) / (kLatitudeGrid + 1); };
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kLatitudeGrid; ++i) {
    const double a = latitude_circle_action(sys, e, z_at(i));
    if (a < best_value) {
      best_value = a;
      best = i;
    }
  }
  const double lo = best == 0 ? 0.5 * (-1.0 + z_at(0)) : z_at(best - 1);
  const double hi = best == kLatitudeGrid - 1 ? 0.5 * (1.0 + z_at(best)) : z_at(best + 1);
  double polished = 0.0;
  const double z = golden_section([&](double x) { return latitude_circle_action(sys, e, x); }, lo, hi, &polished);
  if (polished < best_value) return {z, polished};
  return {z_at(best), best_value};
}

E1SymmetricResult e1_lower_bound_symmetric(const MagneticSystem& sys, double e_max, double tol) {
  if (!sys.rotationally_symmetric()) throw NotSymmetric("latitude oracle needs a rotationally symmetric system");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  const double e0_value = compute_e0(sys);
  if (!(e_max > e0_value)) throw InvalidArgument("e_max must exceed e0");

  const auto admissible = [&](double e) { return min_latitude_action(sys, e).action < 0.0; };
  double lo = e0_value + std::min(tol, 0.5 * (e_max - e0_value));
  if (!admissible(lo)) return {e0_value, false, 0.0};
  double hi = e_max;
  if (admissible(hi)) return {hi, true, min_latitude_action(sys, hi).z0};
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (admissible(mid) ? lo : hi) = mid;
  }
  return {lo, true, min_latitude_action(sys, lo).z0};
}

LiftedLoop left_region_lift(const MagneticSystem& sys, const FreePeriodLoop& loop) {
  const Icosphere ico = make_icosphere(1);
  Vec3 apex = ico.vertices.front();
  double best = -1.0;
  for (const Vec3& c : ico.vertices) {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < loop.size(); ++i) d = std::min(d, angular_distance(-c, loop[i]));
    if (d > best) {
      best = d;
      apex = c;
    }
  }
  LiftedLoop lifted = lift_from_apex(sys, loop, apex);
  const double area = lift_from_apex(area_system(), loop, apex).flux;
  const double k = -std::floor(area / (4.0 * std::numbers::pi));
  lifted.flux += k * sys.total_flux();
  return lifted;
}

std::vector<FreePeriodLoop> e1_seed_bank(int n) {
  std::vector<FreePeriodLoop> seeds;
  for (const Orientation o : {Orientation::kLowerCapLeft, Orientation::kUpperCapLeft}) {
    for (const double z0 : {-0.5, 0.0, 0.5}) seeds.push_back(latitude_circle(z0, n, 1.0, o));
    for (const double phi : {0.0, std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0}) {
      seeds.push_back(meridian_circle(phi, n, 1.0, o));
    }
  }
  return seeds;
}

E1Certificate e1_lower_bound_general(const MagneticSystem& sys, const std::vector<double>& e_grid,
                                     const SolverConfig& cfg) {
  std::vector<double> energies = e_grid;
  std::sort(energies.begin(), energies.end(), std::greater<>());
  const std::vector<FreePeriodLoop> seeds = e1_seed_bank(cfg.loop_nodes);
  for (const double e : energies) {
    for (const FreePeriodLoop& seed : seeds) {
      try {
        const FreePeriodLoop shaped = seed.with_period(optimal_period(sys, e, seed));
        const WaistResult w = find_waist(sys, e, left_region_lift(sys, shaped), cfg);
        if (count_self_intersections(w.loop.loop) != 0) continue;
        LiftedLoop witness = left_region_lift(sys, w.loop.loop);
        const double a = lifted_action_A(sys, e, witness);
        if (a < 0.0) return {e, std::move(witness), a};
      } catch (const Error&) {
        // Collapsing or nonconvergent seeds do not witness anything.
      }
    }
  }
  throw NoNegativeConfiguration("no grid energy admits a negative embedded loop");
}

}  // namespace magflow
