#pragma once

#include <vector>

#include "magflow/loop_space.hpp"
#include "magflow/system.hpp"
#include "magflow/variational.hpp"

namespace magflow {

// max E(q, 0) over the sphere.
double compute_e0(const MagneticSystem& sys);

// min over p of S_e + flux of the lower cap for the latitude circle at z0,
// traversed with the lower cap on its left:
//   2 pi sqrt(1 - z0^2) sqrt(2 (e - U(z0))) + 2 pi int_{-1}^{z0} (f + d lambda) dz.
// Throws NotSymmetric unless the system is rotationally symmetric and
// InvalidArgument unless -1 < z0 < 1.
double latitude_circle_action(const MagneticSystem& sys, double e, double z0);

// Minimum of latitude_circle_action over z0: 401-point grid, then golden
// section on the bracket around the best grid point. The action tends to 0
// at the poles (shrinking circles), so once the interior minimum is positive
// the result sits next to a pole.
struct LatitudeMinimum {
  double z0 = 0.0;
  double action = 0.0;
};
LatitudeMinimum min_latitude_action(const MagneticSystem& sys, double e);

struct E1SymmetricResult {
  double value = 0.0;          // largest admissible energy, or e0
  bool negative_found = false; // false: no negative latitude configuration
  double critical_z0 = 0.0;    // minimizing latitude at `value`
};

// Bisection on e in (e0, e_max] for the largest energy whose minimal latitude
// action is negative. When no energy above e0 admits one, returns e0 with
// negative_found = false.
E1SymmetricResult e1_lower_bound_symmetric(const MagneticSystem& sys, double e_max, double tol = 1e-6);

struct E1Certificate {
  double energy = 0.0;
  LiftedLoop witness;
  double action_value = 0.0;  // lifted_action_A(witness) < 0
};

// Lift of an embedded loop whose flux is that of the region on its left:
// the cone lift shifted by the deck class that puts the enclosed round area
// in (0, 4 pi).
LiftedLoop left_region_lift(const MagneticSystem& sys, const FreePeriodLoop& loop);

// The twelve seed loops of the general search: latitude circles at
// z0 in {-0.5, 0, 0.5} and meridian circles at phi in {0, pi/3, 2pi/3}, each
// in both orientations.
std::vector<FreePeriodLoop> e1_seed_bank(int n);

// For each grid energy (largest first) runs find_waist from every seed; the
// energy is admissible when a converged, embedded waist has negative action in
// its left-region lift. Returns the certificate of the largest admissible
// energy. Per-seed failures are skipped. Throws NoNegativeConfiguration when
// no grid energy is admissible.
E1Certificate e1_lower_bound_general(const MagneticSystem& sys, const std::vector<double>& e_grid,
                                     const SolverConfig& cfg = {});

}  // namespace magflow
