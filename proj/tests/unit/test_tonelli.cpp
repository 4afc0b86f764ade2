#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "magflow/errors.hpp"
#include "magflow/system.hpp"
#include "magflow/tonelli.hpp"

namespace magflow {
namespace {

Vec3 random_tangent(std::mt19937_64& rng, const Vec3& q, double scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  return scale * tangent_part(q, Vec3(n(rng), n(rng), n(rng)));
}

Lagrangian custom(double quartic, double radius) {
  Lagrangian l = Lagrangian::kinetic();
  l.kind = Lagrangian::Kind::kCustomFiberPolynomial;
  l.quartic = quartic;
  l.extension_radius = radius;
  return l;
}

TEST(LagrangianEval, KineticAndPotential) {
  const Lagrangian kin = Lagrangian::kinetic();
  EXPECT_DOUBLE_EQ(lagrangian_eval(kin, Vec3::UnitX(), Vec3::UnitY()), 0.5);
  EXPECT_DOUBLE_EQ(lagrangian_eval(kin, Vec3::UnitX(), 2.0 * Vec3::UnitY()), 2.0);
  const Lagrangian pot = Lagrangian::electromagnetic(Metric::round(), ScalarField::height(0.3, 0.0));
  EXPECT_DOUBLE_EQ(lagrangian_eval(pot, Vec3::UnitZ(), Vec3::Zero()), -0.3);
}

TEST(Energy, DefinitionValues) {
  const Lagrangian kin = Lagrangian::kinetic();
  for (double e : {0.02, 0.5}) {
    EXPECT_NEAR(energy(kin, Vec3::UnitX(), std::sqrt(2 * e) * Vec3::UnitY()), e, 1e-15);
  }
  const Lagrangian pot = Lagrangian::electromagnetic(Metric::round(), ScalarField::height(0.3, 0.0));
  EXPECT_DOUBLE_EQ(energy(pot, Vec3::UnitZ(), Vec3::Zero()), 0.3);
}

TEST(Energy, ElectromagneticCancellation) {
  // E = g(v, v) / 2 + U: drift terms cancel.
  std::mt19937_64 rng(11);
  const Lagrangian l = Lagrangian::electromagnetic(Metric::conformal(ScalarField::height(0.4, 0.1)),
                                                   ScalarField::zonal_poly({0.1, 0.2, -0.3}),
                                                   DriftField::rotation(0.7));
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q = random_sphere_point(rng);
    const Vec3 v = random_tangent(rng, q, 2.0);
    const double expected = 0.5 * l.metric.inner(q, v, v) + l.potential.value(q);
    EXPECT_NEAR(energy(l, q, v), expected, 1e-12);
  }
}

TEST(Legendre, MatchesFiberDirectionalDerivative) {
  std::mt19937_64 rng(12);
  const Lagrangian em = Lagrangian::electromagnetic(Metric::conformal(ScalarField::height(0.3, 0.0)),
                                                    ScalarField::height(0.2, 0.0), DriftField::rotation(0.5));
  for (const Lagrangian& l : {em, custom(0.1, 3.0)}) {
    for (int i = 0; i < 200; ++i) {
      const Vec3 q = random_sphere_point(rng);
      const Vec3 v = random_tangent(rng, q, 1.5);
      const Vec3 w = random_tangent(rng, q, 1.0);
      const double h = 1e-6;
      const double fd = (lagrangian_eval(l, q, v + h * w) - lagrangian_eval(l, q, v - h * w)) / (2 * h);
      const double analytic = l.metric.inner(q, legendre(l, q, v), w);
      EXPECT_NEAR(analytic, fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_EQ(legendre(Lagrangian::kinetic(), Vec3::UnitX(), Vec3::Zero()).norm(), 0.0);
}

TEST(E0, MaximumOfPotential) {
  EXPECT_EQ(e0(Lagrangian::kinetic()), 0.0);
  EXPECT_NEAR(e0(Lagrangian::electromagnetic(Metric::round(), ScalarField::height(0.3, 0.0))), 0.3, 1e-9);
  EXPECT_NEAR(e0(Lagrangian::electromagnetic(Metric::round(), ScalarField::zonal_poly({0.0, 0.0, 0.3}),
                                             DriftField::rotation(2.0))),
              0.3, 1e-9);
}

TEST(E0, BoundsEnergyAtRest) {
  std::mt19937_64 rng(13);
  const Lagrangian l =
      Lagrangian::electromagnetic(Metric::round(), ScalarField::linear(Vec3(0.2, -0.1, 0.4), 0.05));
  const double top = e0(l);
  for (int i = 0; i < 10000; ++i) EXPECT_LE(energy(l, random_sphere_point(rng), Vec3::Zero()), top + 1e-9);
}

TEST(QuadraticExtension, ContinuousAcrossRadius) {
  const double r = 2.0;
  const Lagrangian l = custom(0.2, r);
  const Vec3 q = Vec3::UnitZ();
  const Vec3 dir = Vec3::UnitX();
  const double eps = 1e-9;
  const double inside = lagrangian_eval(l, q, (r - eps) * dir);
  const double outside = lagrangian_eval(l, q, (r + eps) * dir);
  EXPECT_NEAR(inside, outside, 1e-7);
  EXPECT_LT((legendre(l, q, (r - eps) * dir) - legendre(l, q, (r + eps) * dir)).norm(), 1e-6);
}

TEST(FiberBounds, KineticAndDensityNorm) {
  const FiberBounds b = fiber_bounds(Lagrangian::kinetic(), TwoForm{ScalarField::height(1.0, 0.2), Metric::round()});
  EXPECT_NEAR(b.h1, 0.5, 1e-6);
  EXPECT_NEAR(b.sup_norm_dlambda_plus_sigma, 1.2, 1e-3);
}

TEST(FiberBounds, PotentialUpperBoundIsAdmissible) {
  const Lagrangian l = Lagrangian::electromagnetic(Metric::round(), ScalarField::height(0.3, 0.0));
  const FiberBounds b = fiber_bounds(l, TwoForm{ScalarField::constant(0.0), Metric::round()});
  EXPECT_LE(b.h2, 0.9);
  std::mt19937_64 rng(14);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q = random_sphere_point(rng);
    const Vec3 v = random_tangent(rng, q, 3.0);
    EXPECT_LE(lagrangian_eval(l, q, v), b.h2 * (v.squaredNorm() + 1.0) + 1e-12);
  }
}

TEST(FiberBounds, RejectsTooFewSamples) {
  EXPECT_THROW(fiber_bounds(Lagrangian::kinetic(), TwoForm{}, 10), InvalidArgument);
}

TEST(MagneticSystem, SymmetryClassification) {
  EXPECT_TRUE(MagneticSystem(Lagrangian::kinetic(), ScalarField::height(1.0, 0.2)).rotationally_symmetric());
  EXPECT_FALSE(
      MagneticSystem(Lagrangian::kinetic(), ScalarField::linear(Vec3(0.3, 0.0, 1.0), 0.0)).rotationally_symmetric());
  EXPECT_FALSE(MagneticSystem(Lagrangian::kinetic(Metric::conformal(ScalarField::height(0.1, 0.0))),
                              ScalarField::height(1.0, 0.0))
                   .rotationally_symmetric());
}

}  // namespace
}  // namespace magflow
