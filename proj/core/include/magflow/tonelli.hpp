#pragma once

#include <cstdint>
#include <limits>

#include "magflow/sphere_geom.hpp"

namespace magflow {

// Tonelli Lagrangian on T S^2 of the form
//
//   L(q, v) = psi(g_q(v, v)) + lambda_q(v) - U(q)
//
// electromagnetic:          psi(s) = s / 2
// custom-fiber-polynomial:  psi(s) = s / 2 + c4 * phi(s), phi(s) = s^2 for
//                           s <= R^2, continued by its tangent line
//                           2 R^2 s - R^4 beyond (C^1, fiberwise quadratic).
//
// The electromagnetic kind is already a fiberwise polynomial of degree 2, so
// the extension radius only matters for the custom kind.
struct Lagrangian {
  enum class Kind { kElectromagnetic, kCustomFiberPolynomial };

  Kind kind = Kind::kElectromagnetic;
  Metric metric;
  ScalarField potential = ScalarField::constant(0.0);
  DriftField drift;
  double quartic = 0.0;
  double extension_radius = std::numeric_limits<double>::infinity();

  static Lagrangian kinetic(Metric metric = Metric::round()) {
    Lagrangian l;
    l.metric = std::move(metric);
    return l;
  }
  static Lagrangian electromagnetic(Metric metric, ScalarField potential, DriftField drift = {}) {
    Lagrangian l;
    l.metric = std::move(metric);
    l.potential = std::move(potential);
    l.drift = drift;
    return l;
  }

  bool is_electromagnetic() const { return kind == Kind::kElectromagnetic; }
};

// R = 3 sqrt(2 e_max + 2 max|U|).
double default_extension_radius(double e_max, double max_abs_potential);

// Value and ambient partial derivatives of L at (q, v), v tangent at q. dq is
// taken with v held fixed as an ambient vector.
struct LagrangianJet {
  double value = 0.0;
  double energy = 0.0;
  Vec3 dv = Vec3::Zero();
  Vec3 dq = Vec3::Zero();
};
LagrangianJet lagrangian_jet(const Lagrangian& l, const Vec3& q, const Vec3& v);

double lagrangian_eval(const Lagrangian& l, const Vec3& q, const Vec3& v);
inline double lagrangian_eval(const Lagrangian& l, const TangentVector& v) {
  return lagrangian_eval(l, v.base.vec(), v.v);
}

// E = d_vL(q, v) v - L(q, v).
double energy(const Lagrangian& l, const Vec3& q, const Vec3& v);
inline double energy(const Lagrangian& l, const TangentVector& v) { return energy(l, v.base.vec(), v.v); }

// Fiber derivative d_vL(q, v) turned into a tangent vector through g.
// Analytic for the electromagnetic kind, central differences otherwise.
Vec3 legendre(const Lagrangian& l, const Vec3& q, const Vec3& v);

// Smallest eigenvalue of g^{-1} d_vv L at (q, v), by central second differences.
double min_fiber_hessian_eigenvalue(const Lagrangian& l, const Vec3& q, const Vec3& v);

// max over S^2 of E(q, 0): icosahedral grid, then local ascent.
double e0(const Lagrangian& l, int grid_depth = 4);

struct FiberBounds {
  double h1 = 0.0;
  double h2 = 0.0;
  double sup_norm_dlambda_plus_sigma = 0.0;
};

FiberBounds fiber_bounds(const Lagrangian& l, const TwoForm& sigma, int sample_count = 2000,
                         std::uint64_t seed = 0x5eed);

// Uniform random point of S^2.
template <class Rng>
Vec3 random_sphere_point(Rng& rng);

}  // namespace magflow

#include <random>

namespace magflow {

template <class Rng>
Vec3 random_sphere_point(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 x(n(rng), n(rng), n(rng));
    const double r = x.norm();
    if (r > 1e-6) return x / r;
  }
}

}  // namespace magflow
