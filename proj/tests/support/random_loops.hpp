#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "magflow/loop_space.hpp"
#include "magflow/sphere_geom.hpp"

namespace magflow::testing {

// Smooth random loop: a latitude circle at random height with two random
// Gaussian bumps, random period in [2, 12].
template <class Rng>
FreePeriodLoop random_loop(Rng& rng, int n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto random_vec = [&] { return Vec3(normal(rng), normal(rng), normal(rng)); };
  const double z0 = -0.6 + 1.2 * unit(rng);
  const double period = 2.0 + 10.0 * unit(rng);
  FreePeriodLoop loop = latitude_circle(z0, n, period, unit(rng) < 0.5 ? Orientation::kLowerCapLeft
                                                                          : Orientation::kUpperCapLeft);
  loop = bumped(loop, random_vec(), 0.1 + 0.2 * unit(rng), unit(rng), 0.1 + 0.1 * unit(rng));
  loop = bumped(loop, random_vec(), 0.1 + 0.2 * unit(rng), unit(rng), 0.1 + 0.1 * unit(rng));
  return loop;
}

// Random tangent field along a loop plus a random period direction.
template <class Rng>
std::pair<std::vector<Vec3>, double> random_direction(Rng& rng, const FreePeriodLoop& loop) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> dir(static_cast<std::size_t>(loop.size()));
  for (int i = 0; i < loop.size(); ++i) {
    dir[static_cast<std::size_t>(i)] = tangent_part(loop[i], Vec3(normal(rng), normal(rng), normal(rng)));
  }
  return {dir, normal(rng)};
}

inline FreePeriodLoop displaced(const FreePeriodLoop& loop, const std::vector<Vec3>& dir, double dp, double t) {
  std::vector<SpherePoint> nodes;
  nodes.reserve(dir.size());
  for (int i = 0; i < loop.size(); ++i) {
    nodes.push_back(project_to_sphere(loop[i] + t * dir[static_cast<std::size_t>(i)]));
  }
  return FreePeriodLoop(std::move(nodes), loop.period() + t * dp);
}

// Directional derivative of the lifted action, analytic vs central
// difference through the deform ledger. Returns max(|a - fd| / max(|a|, |fd|)).
inline double gradient_fd_relative_error(const MagneticSystem& sys, double e, const LiftedLoop& ll,
                                         const std::vector<Vec3>& dir, double dp, double eps = 1e-5) {
  const LoopGradient g = action_gradient(sys, e, ll);
  double analytic = g.p_grad * dp;
  for (int i = 0; i < ll.loop.size(); ++i) analytic += g.node_grads[static_cast<std::size_t>(i)].dot(dir[static_cast<std::size_t>(i)]);
  const double plus = lifted_action_A(sys, e, deform(sys, ll, displaced(ll.loop, dir, dp, eps)));
  const double minus = lifted_action_A(sys, e, deform(sys, ll, displaced(ll.loop, dir, dp, -eps)));
  const double fd = (plus - minus) / (2.0 * eps);
  return std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
}

}  // namespace magflow::testing
