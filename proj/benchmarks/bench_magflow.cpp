#include <random>

#include <benchmark/benchmark.h>

#include "magflow/flow.hpp"
#include "magflow/loop_space.hpp"
#include "magflow/sphere_geom.hpp"
#include "magflow/variational.hpp"

namespace magflow {
namespace {

MagneticSystem shifted() { return MagneticSystem(Lagrangian::kinetic(), ScalarField::height(1.0, 0.2)); }

LiftedLoop bumped_equator(const MagneticSystem& sys, int n) {
  const FreePeriodLoop loop = bumped(latitude_circle(0.0, n, 1.0), Vec3::UnitZ(), 0.05);
  return lift(sys, loop.with_period(optimal_period(sys, 0.02, loop)));
}

void BM_TriangleQuadrature(benchmark::State& state) {
  const TwoForm sigma{ScalarField::zonal_poly({0.3, -1.0, 0.5}), Metric::round()};
  const SphericalTriangle t{project_to_sphere(Vec3::UnitX()), project_to_sphere(Vec3::UnitY()),
                            project_to_sphere(Vec3::UnitZ())};
  const int depth = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(integrate_two_form_triangle(sigma, t, depth));
}
BENCHMARK(BM_TriangleQuadrature)->DenseRange(0, 6, 2);

void BM_Integrate(benchmark::State& state) {
  const auto sys = shifted();
  const State s0{Vec3::UnitX(), Vec3(0.0, 0.2, 0.1)};
  for (auto _ : state) benchmark::DoNotOptimize(integrate(sys, s0, 10.0, 1e-3).states.back().q);
}
BENCHMARK(BM_Integrate)->Unit(benchmark::kMillisecond);

void BM_ActionGradient(benchmark::State& state) {
  const auto sys = shifted();
  const LiftedLoop ll = bumped_equator(sys, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(action_gradient(sys, 0.02, ll).p_grad);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ActionGradient)->RangeMultiplier(2)->Range(32, 512)->Complexity();

void BM_Deform(benchmark::State& state) {
  const auto sys = shifted();
  const LiftedLoop ll = bumped_equator(sys, static_cast<int>(state.range(0)));
  const FreePeriodLoop moved = bumped(ll.loop, Vec3::UnitX(), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(deform(sys, ll, moved).flux);
}
BENCHMARK(BM_Deform)->RangeMultiplier(2)->Range(32, 512);

void BM_FindWaist(benchmark::State& state) {
  const auto sys = shifted();
  const int n = static_cast<int>(state.range(0));
  const LiftedLoop seed = bumped_equator(sys, n);
  SolverConfig cfg;
  cfg.loop_nodes = n;
  for (auto _ : state) benchmark::DoNotOptimize(find_waist(sys, 0.02, seed, cfg).action);
}
BENCHMARK(BM_FindWaist)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace magflow

BENCHMARK_MAIN();
