#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "magflow/errors.hpp"
#include "magflow/loop_space.hpp"
#include "random_loops.hpp"

namespace magflow {
namespace {

constexpr double kPi = std::numbers::pi;

MagneticSystem kinetic(ScalarField f) { return MagneticSystem(Lagrangian::kinetic(), std::move(f)); }

TEST(FreePeriodLoop, Invariants) {
  EXPECT_THROW(latitude_circle(0.0, 8, 1.0), InvalidLoop);
  EXPECT_THROW(latitude_circle(0.0, 32, 0.0), InvalidLoop);
  std::vector<SpherePoint> nodes(16, project_to_sphere(Vec3::UnitX()));
  nodes[3] = project_to_sphere(-Vec3::UnitX());
  EXPECT_THROW(FreePeriodLoop(nodes, 1.0), InvalidLoop);
}

TEST(DiscreteAction, ConstantLoopWithPotential) {
  const MagneticSystem sys(Lagrangian::electromagnetic(Metric::round(), ScalarField::height(0.3, 0.0)),
                           ScalarField::constant(0.0));
  const FreePeriodLoop c = constant_loop(project_to_sphere(Vec3::UnitZ()), 32, 2.0);
  EXPECT_NEAR(discrete_action_S(sys, 0.5, c), 0.4, 1e-14);
}

TEST(DiscreteAction, EquatorAtOptimalPeriod) {
  const auto sys = kinetic(ScalarField::constant(0.0));
  const FreePeriodLoop eq = latitude_circle(0.0, 128, 10 * kPi);
  EXPECT_NEAR(discrete_action_S(sys, 0.02, eq), 0.4 * kPi, 2e-3);
  EXPECT_NEAR(lifted_action_A(sys, 0.02, LiftedLoop{eq, 0.0}), discrete_action_S(sys, 0.02, eq), 0.0);
}

TEST(LiftedAction, EquatorWithLowerCapFlux) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.0));
  const LiftedLoop ll = lift(sys, latitude_circle(0.0, 128, 10 * kPi));
  EXPECT_NEAR(ll.flux, -kPi, 1e-9);
  EXPECT_NEAR(lifted_action_A(sys, 0.02, ll), -0.6 * kPi, 5e-3);
}

TEST(OptimalPeriod, MeanEnergyMatches) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const FreePeriodLoop loop = testing::random_loop(rng, 64);
    const FreePeriodLoop tuned = loop.with_period(optimal_period(sys, 0.02, loop));
    EXPECT_NEAR(mean_energy(sys, tuned), 0.02, 1e-12);
    EXPECT_NEAR(action_gradient(sys, 0.02, lift(sys, tuned)).p_grad, 0.0, 1e-10);
  }
}

TEST(SweepFlux, IdentityAndAntisymmetry) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(32);
  const FreePeriodLoop a = testing::random_loop(rng, 64);
  const auto [dir, dp] = testing::random_direction(rng, a);
  const FreePeriodLoop b = testing::displaced(a, dir, dp, 0.05);
  EXPECT_NEAR(sweep_flux(sys.sigma(), a, a), 0.0, 1e-14);
  EXPECT_NEAR(sweep_flux(sys.sigma(), a, b) + sweep_flux(sys.sigma(), b, a), 0.0, 1e-10);
}

TEST(SweepFlux, StepLimit) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  EXPECT_THROW(sweep_flux(sys.sigma(), latitude_circle(0.0, 32, 1.0), latitude_circle(0.6, 32, 1.0)), StepTooLarge);
}

TEST(SweepFlux, ZetaFamilyCoversTheSphereOnce) {
  for (const ScalarField& f : {ScalarField::height(1.0, 0.2), ScalarField::constant(1.0)}) {
    const auto sys = kinetic(f);
    const auto family = zeta_family(base_point().vec(), 64, 64, 1.0);
    double flux = 0.0;
    for (std::size_t k = 1; k < family.size(); ++k) flux += sweep_flux(sys.sigma(), family[k - 1], family[k]);
    EXPECT_NEAR(flux, sys.total_flux(), 1e-4);
  }
}

TEST(Deform, IdentityAndAdditivity) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(33);
  const LiftedLoop start = lift(sys, testing::random_loop(rng, 64));
  const LiftedLoop same = deform(sys, start, start.loop);
  EXPECT_EQ(same.flux, start.flux);

  const auto [dir, dp] = testing::random_direction(rng, start.loop);
  LiftedLoop stepped = start;
  for (int k = 1; k <= 5; ++k) stepped = deform(sys, stepped, testing::displaced(start.loop, dir, dp, 0.02 * k));
  const LiftedLoop direct = deform(sys, start, testing::displaced(start.loop, dir, dp, 0.1));
  EXPECT_NEAR(stepped.flux, direct.flux, 1e-10);
}

TEST(Deform, ClosedPathAroundTheSphereChangesFluxByTotal) {
  // Cone a loop down to the base point, sweep the zeta family, grow it back.
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  const Vec3 x0 = base_point().vec();
  const int n = 64;
  const auto family = zeta_family(x0, n, 64, 1.0);
  LiftedLoop ll = lift(sys, constant_loop(base_point(), n, 1.0));
  const double before = ll.flux;
  for (std::size_t k = 1; k < family.size(); ++k) ll = deform(sys, ll, family[k]);
  const double winding = (ll.flux - before) / sys.total_flux();
  EXPECT_NEAR(winding, std::round(winding), 1e-4 / sys.total_flux());
  EXPECT_NEAR(std::abs(std::round(winding)), 1.0, 0.0);
}

TEST(Lift, DifferentConesDifferByIntegerMultiples) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    const FreePeriodLoop loop = testing::random_loop(rng, 64);
    const double a = lift_from_apex(sys, loop, Vec3::UnitX(), 6).flux;
    const double b = lift_from_apex(sys, loop, -Vec3::UnitX(), 6).flux;
    const double k = (a - b) / sys.total_flux();
    EXPECT_NEAR(k, std::round(k), 1e-6);
  }
}

TEST(Iterate, ActionScalesLinearly) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const LiftedLoop u = lift(sys, testing::random_loop(rng, 64));
    EXPECT_EQ(iterate(u, 1).loop.nodes(), u.loop.nodes());
    const double a = lifted_action_A(sys, 0.02, u);
    for (int m : {2, 3, 5}) {
      const LiftedLoop um = iterate(u, m);
      EXPECT_EQ(um.loop.size(), 64 * m);
      EXPECT_NEAR(um.loop.period(), m * u.loop.period(), 1e-12);
      EXPECT_NEAR(lifted_action_A(sys, 0.02, um), m * a, 1e-9 * std::abs(m * a));
    }
  }
}

TEST(Iterate, AssociativityAndResamplingCap) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(36);
  const LiftedLoop u = lift(sys, testing::random_loop(rng, 64));
  const double a6 = lifted_action_A(sys, 0.02, iterate(u, 6));
  EXPECT_NEAR(lifted_action_A(sys, 0.02, iterate(iterate(u, 2), 3)), a6, 1e-6 * std::abs(a6));
  const LiftedLoop big = iterate(lift(sys, latitude_circle(0.1, 1024, 8.0)), 8);
  EXPECT_EQ(big.loop.size(), kMaxIterateNodes);
}

TEST(DeckTransform, ShiftsActionByTotalFlux) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const LiftedLoop u = lift(sys, testing::random_loop(rng, 64));
    const double a = lifted_action_A(sys, 0.02, u);
    EXPECT_NEAR(lifted_action_A(sys, 0.02, deck_transform(sys, u, 1)) - a, 0.8 * kPi, 1e-6);
    EXPECT_EQ(deck_transform(sys, u, 0).flux, u.flux);
    EXPECT_NEAR(deck_transform(sys, deck_transform(sys, u, 3), -3).flux, u.flux, 1e-12);
  }
}

TEST(ActionGradient, MatchesFiniteDifferences) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(38);
  for (int n : {32, 64, 128}) {
    for (int trial = 0; trial < 10; ++trial) {
      const LiftedLoop ll = lift(sys, testing::random_loop(rng, n));
      const auto [dir, dp] = testing::random_direction(rng, ll.loop);
      EXPECT_LE(testing::gradient_fd_relative_error(sys, 0.02, ll, dir, dp), 1e-5) << "n=" << n;
    }
  }
}

TEST(ActionGradient, DriftAndConformalMetric) {
  const MagneticSystem sys(Lagrangian::electromagnetic(Metric::conformal(ScalarField::height(0.2, 0.0)),
                                                       ScalarField::height(0.1, 0.0), DriftField::rotation(0.3)),
                           ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(39);
  for (int trial = 0; trial < 5; ++trial) {
    const LiftedLoop ll = lift(sys, testing::random_loop(rng, 64));
    const auto [dir, dp] = testing::random_direction(rng, ll.loop);
    EXPECT_LE(testing::gradient_fd_relative_error(sys, 0.3, ll, dir, dp), 1e-5);
  }
}

TEST(ActionGradient, TangentNodeComponents) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(40);
  const LiftedLoop ll = lift(sys, testing::random_loop(rng, 64));
  const LoopGradient g = action_gradient(sys, 0.02, ll);
  for (int i = 0; i < ll.loop.size(); ++i) EXPECT_NEAR(g.node_grads[static_cast<std::size_t>(i)].dot(ll.loop[i]), 0.0, 1e-12);
}

TEST(ActionGradient, EquatorIsCriticalForHeightField) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.0));
  const FreePeriodLoop eq = latitude_circle(0.0, 128, 1.0);
  const LiftedLoop ll = lift(sys, eq.with_period(optimal_period(sys, 0.02, eq)));
  EXPECT_LE(gradient_norm(ll.loop, action_gradient(sys, 0.02, ll)), 1e-10);
}

TEST(Valley, Membership) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  EXPECT_TRUE(in_valley(sys, constant_loop(base_point(), 32, 0.05), 0.1));
  EXPECT_FALSE(in_valley(sys, latitude_circle(0.0, 64, 10 * kPi), 0.1));
  const FreePeriodLoop eq = latitude_circle(0.0, 64, 0.5);
  const double tau = kinetic_norm_squared(sys, eq) / 0.5;
  EXPECT_FALSE(in_valley(sys, eq, tau));
  EXPECT_TRUE(in_valley(sys, eq, tau * (1.0 + 1e-12)));
}

TEST(Valley, TauFormula) {
  EXPECT_EQ(valley_tau(kinetic(ScalarField::height(1.0, 0.2))), kValleyTauCap);
  EXPECT_EQ(valley_tau(kinetic(ScalarField::constant(0.0))), kValleyTauCap);
  const double t10 = valley_tau(kinetic(ScalarField::height(10.0, 2.0)));
  const double t100 = valley_tau(kinetic(ScalarField::height(100.0, 20.0)));
  EXPECT_NEAR(t10, 2.0 * 0.5 / 12.0, 1e-3 * t10);
  EXPECT_NEAR(t10 / t100, 10.0, 1e-6);
}

TEST(Serialization, JsonRoundTrip) {
  const auto sys = kinetic(ScalarField::height(1.0, 0.2));
  std::mt19937_64 rng(41);
  const LiftedLoop ll = lift(sys, testing::random_loop(rng, 32));
  const LiftedLoop back = lifted_loop_from_json(to_json(ll));
  EXPECT_EQ(back.flux, ll.flux);
  EXPECT_EQ(back.loop.period(), ll.loop.period());
  EXPECT_EQ(back.loop.nodes(), ll.loop.nodes());
  EXPECT_THROW(lifted_loop_from_json("{\"nodes\": [], \"p\": 1, \"flux\": 0}"), InvalidLoop);
}

TEST(TraceDistance, IndependentOfSampling) {
  const FreePeriodLoop a = latitude_circle(0.3, 64, 1.0);
  const FreePeriodLoop b = resample(latitude_circle(0.3, 101, 1.0), 128);
  EXPECT_LT(trace_distance(a, b), 2e-3);
  EXPECT_GT(hausdorff_distance(a, latitude_circle(0.3, 37, 1.0)), 1e-2);
  EXPECT_NEAR(trace_distance(a, latitude_circle(0.5, 64, 1.0)), 0.218, 0.01);
}

}  // namespace
}  // namespace magflow
