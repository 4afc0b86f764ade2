#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magflow/flow.hpp"
#include "magflow/loop_space.hpp"

namespace magflow {

struct SolverConfig {
  double tol = 1e-6;      // H^1 gradient norm at termination
  int max_iter = 20000;   // descent iterations (find_waist) or band sweeps (minimax_path)
  int path_nodes = 16;    // M, images of the elastic band
  int loop_nodes = 128;   // N
  double flow_step = 1e-3;
};

// Certification thresholds for a periodic orbit candidate.
inline constexpr double kClosureThreshold = 1e-4;
inline constexpr double kEnergyThreshold = 1e-5;

bool is_certified(const OrbitReport& r);

struct WaistResult {
  LiftedLoop loop;
  OrbitReport report;
  double action = 0.0;
  int iterations = 0;
  std::vector<double> history;  // A_e after every accepted step
};

// H^1-preconditioned gradient descent on A_e with Armijo backtracking
// (Barzilai-Borwein trial steps), the period re-optimized after every step
// and the flux carried along by deform. Throws ValleyCollapse when an
// iterate enters the valley U_tau (tau = valley_tau), MaxIterations when the
// budget runs out.
WaistResult find_waist(const MagneticSystem& sys, double e, const LiftedLoop& seed, const SolverConfig& cfg = {});

// Newton iteration on the differential of the period-reduced action
// (finite-difference Hessian, pseudo-inverse on the near-kernel). Used to
// finish saddle searches. Returns the polished loop and its gradient norm.
std::pair<LiftedLoop, double> newton_polish(const MagneticSystem& sys, double e, const LiftedLoop& start,
                                            double tol, int max_iter = 30);

struct PathOfLoops {
  std::vector<LiftedLoop> images;
  bool pin_start = true;
  bool pin_end = true;
};

struct MinimaxResult {
  double value = 0.0;
  int argmax_index = 0;
  double saddle_gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> history;  // max action along the band after every sweep
  LiftedLoop saddle;            // the climbing image
  PathOfLoops path;
};

// Initial band from end_a to end_b (same node count) with M images:
//  * end_b an m-fold iterate of end_a (same flux class): end_a is slid so it
//    is traversed in the first 1/m of the parameter, then the remaining
//    parameter grows a circle tangent at node 0 into the next copies;
//  * otherwise end_a is coned to a point c, |k| sphere sweeps (circles around
//    c) fix the deck class, and end_b is grown back from c.
// The flux of every image is carried by deform along the construction.
PathOfLoops initial_path(const MagneticSystem& sys, const LiftedLoop& end_a, const LiftedLoop& end_b, int M);

// Climbing-image elastic band: interior images descend along the component
// of the H^1 gradient orthogonal to the band, the current argmax image
// (lowest index on ties) ascends along the band and descends across it; the
// band is reparametrized by arc length after every sweep. Once the climbing
// image is close to critical it is finished with newton_polish. Throws
// EndpointNotMinimal when an endpoint has gradient norm above 1e-4.
MinimaxResult minimax_path(const MagneticSystem& sys, double e, const LiftedLoop& end_a, const LiftedLoop& end_b,
                           int M, const SolverConfig& cfg = {});

// Loops of the family Z^n(M^m): m-fold iterate, n deck shifts.
struct Label {
  int m = 1;
  int n = 0;
};
LiftedLoop labelled(const MagneticSystem& sys, const LiftedLoop& waist, const Label& label);

struct ScanRow {
  double e = 0.0;
  double waist_action = 0.0;
  double minimax_value = 0.0;
  bool converged = false;
  double closure_residual = 0.0;
  std::string error;  // empty on success
};

struct ScanSpec {
  LiftedLoop seed;
  Label from{1, 0};
  Label to{2, 0};
};

// Per energy: waist from the seed, then minimax between the two labelled
// endpoints. Errors are recorded per row and the scan continues.
std::vector<ScanRow> scan_energy(const MagneticSystem& sys, const std::vector<double>& e_grid, const ScanSpec& spec,
                                 const SolverConfig& cfg = {});
std::string scan_to_csv(const std::vector<ScanRow>& rows);

struct CertifiedOrbit {
  LiftedLoop loop;
  double action = 0.0;
  OrbitReport report;
  std::string origin;  // "waist" or "saddle m0,n0-m1,n1"
};

struct PairFailure {
  Label a, b;
  std::string reason;
};

struct MultiplicityResult {
  std::vector<CertifiedOrbit> orbits;
  std::vector<PairFailure> failures;
};

// Primitive orbit of a loop: the smallest k such that the loop is a
// k-fold iterate (node sets repeat within 1e-6), returned with its period.
FreePeriodLoop primitive_loop(const FreePeriodLoop& loop);

// Same orbit: primitive loops with trace distance <= tol and periods within
// relative tol. Orbits further apart than 1e-2 count as distinct.
inline constexpr double kDistinctOrbitDistance = 1e-2;
bool same_orbit(const FreePeriodLoop& a, const FreePeriodLoop& b, double tol = kDistinctOrbitDistance);

MultiplicityResult multiplicity_search(const MagneticSystem& sys, double e, const LiftedLoop& seed,
                                       const std::vector<Label>& labels, const SolverConfig& cfg = {});

}  // namespace magflow
