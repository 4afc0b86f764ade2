#pragma once

#include "magflow/sphere_geom.hpp"
#include "magflow/tonelli.hpp"

namespace magflow {

// A magnetic Tonelli system (L, sigma) on S^2. sigma = f dA_g shares the
// metric of L. The total flux of sigma is computed once on construction.
class MagneticSystem {
 public:
  MagneticSystem(Lagrangian lagrangian, ScalarField density, int quadrature_depth = 6);

  const Lagrangian& lagrangian() const { return lagrangian_; }
  const TwoForm& sigma() const { return sigma_; }
  const Metric& metric() const { return lagrangian_.metric; }
  double total_flux() const { return total_flux_; }
  int quadrature_depth() const { return quadrature_depth_; }

  // Round density of the magnetic force acting in the Euler-Lagrange
  // equation: sigma plus d(lambda) of the drift.
  double force_density(const Vec3& q) const {
    return sigma_.round_density(q) + lagrangian_.drift.curl_density(q);
  }

  // Round metric, zonal density and potential, zonal (or absent) drift,
  // electromagnetic kind.
  bool rotationally_symmetric() const;

 private:
  Lagrangian lagrangian_;
  TwoForm sigma_;
  int quadrature_depth_;
  double total_flux_;
};

}  // namespace magflow
