#include "magflow/system.hpp"

namespace magflow {

MagneticSystem::MagneticSystem(Lagrangian lagrangian, ScalarField density, int quadrature_depth)
    : lagrangian_(std::move(lagrangian)),
      sigma_{std::move(density), lagrangian_.metric},
      quadrature_depth_(quadrature_depth),
      total_flux_(magflow::total_flux(sigma_, quadrature_depth)) {}

bool MagneticSystem::rotationally_symmetric() const {
  return lagrangian_.is_electromagnetic() && metric().is_round() && sigma_.density.zonal() &&
         lagrangian_.potential.zonal() && lagrangian_.drift.zonal();
}

}  // namespace magflow
