#pragma once

#include <utility>
#include <vector>

#include "magflow/loop_space.hpp"
#include "magflow/system.hpp"

namespace magflow {

// Point of T S^2 in the embedded model: |q| = 1, <q, v> = 0.
struct State {
  Vec3 q = Vec3::UnitZ();
  Vec3 v = Vec3::Zero();
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<double> energy_series;
};

struct OrbitReport {
  double gradient_norm = 0.0;
  double mean_energy_residual = 0.0;
  // Closure of the shooting-refined orbit (equal to raw_closure_residual when
  // refinement is off or does not improve on it).
  double closure_residual = 0.0;
  int self_intersections = 0;
  // Closure when integrating the candidate's own initial state for time p.
  double raw_closure_residual = 0.0;
  // Distance from the candidate's initial state (q, v) to the refined one and
  // the refined period.
  double shooting_correction = 0.0;
  double refined_period = 0.0;
};

struct ShootingResult {
  State initial;
  double period = 0.0;
  double closure = 0.0;     // sqrt(|dq|^2 + |dv|^2) after one period
  double correction = 0.0;  // distance from the starting guess (q, v)
  int iterations = 0;
};

// Right-hand side of the Euler-Lagrange equation of (L, sigma) for the
// electromagnetic kind:
//
//   q' = v
//   v' = P_q(e^{-2u} F) - |v|^2 q
//   F  = |v|^2 e^{2u} grad u - 2 e^{2u} <grad u, v> v - grad U
//        + (J^T - J) v + f e^{2u} v x q
//
// (J = d Lambda / dq). The Lorentz term Y satisfies g(Y, w) = sigma(w, v),
// the sign for which critical points of the lifted action are orbits.
// Throws UnsupportedLagrangian for the custom kind.
std::pair<Vec3, Vec3> magnetic_el_field(const MagneticSystem& sys, const State& s);

// Classical RK4 with uniform step T / ceil(T / h); after each step q is
// projected to the sphere and v to T_q S^2. Throws StepExplosion when a state
// norm exceeds 1e6, InvalidArgument unless 0 < h <= min(T, 0.1).
Trajectory integrate(const MagneticSystem& sys, const State& s0, double T, double h);

// max |E_t - E_0| / max(1, |E_0|).
double energy_drift(const Trajectory& traj);

// State of a loop at node i: the node and the spectral (trigonometric
// interpolant) derivative there, divided by p.
State loop_state(const FreePeriodLoop& loop, int i);
inline State initial_state(const FreePeriodLoop& loop) { return loop_state(loop, 0); }

// Multiple-shooting Gauss-Newton for a periodic orbit of energy e near the
// candidate loop: `segments` arcs of duration T / segments start at equally
// spaced nodes (loop_state); unknowns are tangent corrections of every arc's
// (q, v) and the period, equations the arc-to-arc matching and E = e at node 0.
// Minimum-norm steps absorb the time-shift (and symmetry) directions. The
// returned closure is that of a single integration of the refined node-0
// state over the refined period; correction is the largest arc-start change.
ShootingResult refine_periodic_orbit(const MagneticSystem& sys, const FreePeriodLoop& candidate, double e,
                                     double h = 1e-3, int segments = 16, int max_iter = 20);

// Largest shooting correction still accepted as "the candidate's orbit".
inline constexpr double kMaxShootingCorrection = 1e-2;

// Integrates the candidate's initial state for time p (raw closure). With
// `refine`, the initial state and period are then corrected by Newton
// shooting; if the correction stays within kMaxShootingCorrection (and
// relative period change within the same bound) closure_residual is the
// refined closure, otherwise the raw one. Hyperbolic orbits amplify the
// O(1/N^2) discretization error of the candidate by their Floquet multiplier,
// which makes the raw closure meaningless for them. Also reports the mean
// discrete energy minus e, the H^1 norm of the action differential and the
// number of self-intersections.
OrbitReport certify_orbit(const MagneticSystem& sys, const FreePeriodLoop& candidate, double e, double h = 1e-3,
                          bool refine = true);

// Transverse crossings between non-adjacent geodesic segments of the node
// polygon, plus near-misses closer than 1e-6 rad.
int count_self_intersections(const FreePeriodLoop& loop);

}  // namespace magflow
