#pragma once

#include <string>
#include <vector>

#include "magflow/system.hpp"

namespace magflow {

// Discrete point of the free-period loop space: N >= 16 nodes of a closed
// curve on S^2 (node N is node 0) sampled at t = i / N, plus a period p > 0.
class FreePeriodLoop {
 public:
  static constexpr int kMinNodes = 16;

  // Constant loop at the north pole with 16 nodes and period 1.
  FreePeriodLoop() : nodes_(kMinNodes), period_(1.0) {}

  // Validates N >= 16, p > 0 and non-antipodal consecutive nodes.
  FreePeriodLoop(std::vector<SpherePoint> nodes, double period);

  int size() const { return static_cast<int>(nodes_.size()); }
  double period() const { return period_; }
  const std::vector<SpherePoint>& nodes() const { return nodes_; }

  // Cyclic access.
  const Vec3& operator[](int i) const {
    const int n = size();
    return nodes_[static_cast<std::size_t>(((i % n) + n) % n)].vec();
  }

  FreePeriodLoop with_period(double p) const { return FreePeriodLoop(nodes_, p); }

 private:
  std::vector<SpherePoint> nodes_;
  double period_;
};

// Point of the universal cover: a loop plus the flux of sigma accumulated
// along its deformation history from the base point.
struct LiftedLoop {
  FreePeriodLoop loop;
  double flux = 0.0;
};

// Differential of the lifted action: node components are d A / d gamma_i
// (tangent at gamma_i), p_grad is d A / d p.
struct LoopGradient {
  std::vector<Vec3> node_grads;
  double p_grad = 0.0;
};

// --- constructors -----------------------------------------------------------

enum class Orientation {
  kLowerCapLeft,  // longitude decreasing: the cap z <= z0 lies to the left
  kUpperCapLeft,
};

// Latitude circle at height z0 in (-1, 1); node 0 at longitude 0.
FreePeriodLoop latitude_circle(double z0, int n, double period,
                               Orientation orientation = Orientation::kLowerCapLeft);

// Great circle through the poles starting at azimuth phi on the equator;
// kLowerCapLeft heads north first, kUpperCapLeft south.
FreePeriodLoop meridian_circle(double phi, int n, double period,
                               Orientation orientation = Orientation::kLowerCapLeft);

FreePeriodLoop constant_loop(const SpherePoint& q, int n, double period);

// One-parameter family of circles through x0 sweeping the sphere once:
// member k (0 <= k <= steps) is the circle of radius s = pi k / steps around
// cos(s) x0 + sin(s) d (d a fixed unit vector orthogonal to x0), with node 0 at
// x0. Members 0 and `steps` are the constant loop at x0.
std::vector<FreePeriodLoop> zeta_family(const Vec3& x0, int n, int steps, double period);

// Adds amplitude * exp(-(dt / width)^2) in the direction `normal` (projected
// to each tangent plane) around parameter t_center, then reprojects.
FreePeriodLoop bumped(const FreePeriodLoop& loop, const Vec3& normal, double amplitude, double t_center = 0.25,
                      double width = 0.08);

// Geodesically resampled copy with n nodes (uniform in the parameter).
FreePeriodLoop resample(const FreePeriodLoop& loop, int n);

// --- action ----------------------------------------------------------------

// gamma'(t_i) = P_i (gamma_{i+1} - gamma_{i-1}) N / 2 (derivative in t in [0, 1]).
std::vector<Vec3> discrete_velocities(const FreePeriodLoop& loop);

// S_e = p * mean_i L(gamma_i, gamma'_i / p) + p e.
double discrete_action_S(const MagneticSystem& sys, double e, const FreePeriodLoop& loop);

// mean_i E(gamma_i, gamma'_i / p).
double mean_energy(const MagneticSystem& sys, const FreePeriodLoop& loop);

// Discrete ||gamma'||^2_{L^2} measured with g.
double kinetic_norm_squared(const MagneticSystem& sys, const FreePeriodLoop& loop);

double lifted_action_A(const MagneticSystem& sys, double e, const LiftedLoop& ll);

// Optimal period for the loop shape (closed form for the electromagnetic
// kind, safeguarded Newton otherwise). Returns p with mean energy == e.
double optimal_period(const MagneticSystem& sys, double e, const FreePeriodLoop& loop);

// --- universal cover ledger ---------------------------------------------------

// Signed flux swept by the straight-line (node-wise geodesic) homotopy from
// `from` to `to`: 2N triangles (from_i, to_i, from_{i+1}), (to_i, to_{i+1},
// from_{i+1}). Throws StepTooLarge if a node moves more than 0.5 rad.
double sweep_flux(const TwoForm& sigma, const FreePeriodLoop& from, const FreePeriodLoop& to, int depth = 0);

LiftedLoop deform(const MagneticSystem& sys, const LiftedLoop& ll, const FreePeriodLoop& to, int depth = 0);

// Lift by the cone from `apex` (cone flux: constant loop at apex swept onto the loop).
LiftedLoop lift_from_apex(const MagneticSystem& sys, const FreePeriodLoop& loop, const Vec3& apex, int depth = 4);

// Canonical initial lift: the cone from the base point (-1, 0, 0) when the
// loop stays at least 0.3 rad away from its antipode; otherwise the cone
// from the icosahedron vertex (same clearance) giving the smallest |flux|.
LiftedLoop lift(const MagneticSystem& sys, const FreePeriodLoop& loop);

// m-fold iterate: nodes gamma(m t), period m p, flux m * flux. More than
// 4096 nodes are resampled uniformly to 4096.
LiftedLoop iterate(const LiftedLoop& ll, int m);
inline constexpr int kMaxIterateNodes = 4096;

// Deck transformation Z^k: flux += k * total flux.
LiftedLoop deck_transform(const MagneticSystem& sys, const LiftedLoop& ll, int k);

// --- gradient ------------------------------------------------------------------

LoopGradient action_gradient(const MagneticSystem& sys, double e, const LiftedLoop& ll);
LoopGradient action_gradient(const MagneticSystem& sys, double e, const FreePeriodLoop& loop);

// Riesz representative of the differential for the discrete H^1 metric
//   <xi, eta> = (1/N) sum (xi_i . eta_i + N^2 (xi_{i+1} - xi_i) . (eta_{i+1} - eta_i)) + r s
// (node components projected back to the tangent planes).
LoopGradient h1_gradient(const FreePeriodLoop& loop, const LoopGradient& differential);

// Dual H^1 norm of the differential.
double gradient_norm(const FreePeriodLoop& loop, const LoopGradient& differential);

// --- valley ----------------------------------------------------------------------

// ||gamma'||^2 < tau p and p < tau.
bool in_valley(const MagneticSystem& sys, const FreePeriodLoop& loop, double tau);

// tau = 2 h1 / ||d lambda + sigma||_inf, capped at 0.1 (cap when the form vanishes).
double valley_tau(const MagneticSystem& sys);
inline constexpr double kValleyTauCap = 0.1;

// --- helpers --------------------------------------------------------------------

// Hausdorff distance between node sets.
double hausdorff_distance(const FreePeriodLoop& a, const FreePeriodLoop& b);

// Hausdorff distance between the traces (node polygons with geodesic edges),
// chordal. Independent of the sampling of either loop.
double trace_distance(const FreePeriodLoop& a, const FreePeriodLoop& b);

// Serialization: {"nodes": [[x,y,z],...], "p": p, "flux": flux}.
std::string to_json(const LiftedLoop& ll);
LiftedLoop lifted_loop_from_json(const std::string& text);
// Columns i,t,x,y,z.
std::string to_csv(const FreePeriodLoop& loop);

}  // namespace magflow
