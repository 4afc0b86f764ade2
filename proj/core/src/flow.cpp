#include "magflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "magflow/errors.hpp"

namespace magflow {
namespace {

constexpr double kExplosionNorm = 1e6;
constexpr double kNearMiss = 1e-6;

struct Deriv {
  Vec3 dq, dv;
};

Deriv field(const MagneticSystem& sys, const Vec3& q, const Vec3& v) {
  const auto [dq, dv] = magnetic_el_field(sys, State{q, v});
  return {dq, dv};
}

void project_state(State& s) {
  const double r = s.q.norm();
  if (!(r > 1e-9) || !std::isfinite(r)) throw StepExplosion("position left every neighbourhood of the sphere");
  s.q /= r;
  s.v = tangent_part(s.q, s.v);
}

// Distance from p to the short geodesic arc [a, b].
double point_arc_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 n = a.cross(b);
  const double nn = n.norm();
  double best = std::min(angular_distance(p, a), angular_distance(p, b));
  if (nn < 1e-15) return best;
  const Vec3 nh = n / nn;
  const Vec3 foot = p - nh * nh.dot(p);
  if (foot.norm() < 1e-15) return best;
  const Vec3 f = foot.normalized();
  if (a.cross(f).dot(n) >= 0.0 && f.cross(b).dot(n) >= 0.0) {
    best = std::min(best, std::abs(std::asin(std::clamp(nh.dot(p), -1.0, 1.0))));
  }
  return best;
}

bool arcs_cross(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 n1 = a.cross(b);
  const Vec3 n2 = c.cross(d);
  const Vec3 x = n1.cross(n2);
  const double xn = x.norm();
  if (xn < 1e-15) return false;
  for (const Vec3& s : {Vec3(x / xn), Vec3(-x / xn)}) {
    const bool on1 = a.cross(s).dot(n1) >= 0.0 && s.cross(b).dot(n1) >= 0.0;
    const bool on2 = c.cross(s).dot(n2) >= 0.0 && s.cross(d).dot(n2) >= 0.0;
    if (on1 && on2) return true;
  }
  return false;
}

}  // namespace

std::pair<Vec3, Vec3> magnetic_el_field(const MagneticSystem& sys, const State& s) {
  const Lagrangian& l = sys.lagrangian();
  if (!l.is_electromagnetic()) {
    throw UnsupportedLagrangian("the flow integrator supports electromagnetic Lagrangians only");
  }
  const Vec3& q = s.q;
  const Vec3& v = s.v;
  const double v2 = v.squaredNorm();
  Vec3 force = -l.potential.gradient(q) + sys.sigma().round_density(q) * v.cross(q);
  if (!sys.metric().is_round()) {
    const double conf = sys.metric().factor(q);
    const Vec3 gu = sys.metric().exponent_gradient(q);
    force += conf * (v2 * gu - 2.0 * gu.dot(v) * v);
    force /= conf;
    if (!l.drift.is_none()) {
      const Mat3 j = l.drift.jacobian(q);
      force += (j.transpose() - j) * v / conf;
    }
  } else if (!l.drift.is_none()) {
    const Mat3 j = l.drift.jacobian(q);
    force += (j.transpose() - j) * v;
  }
  return {v, tangent_part(q, force) - v2 * q};
}

Trajectory integrate(const MagneticSystem& sys, const State& s0, double T, double h) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("integration time must be positive");
  if (!(h > 0.0) || h > T || h > 0.1) throw InvalidArgument("step must satisfy 0 < h <= min(T, 0.1)");
  const long steps = static_cast<long>(std::ceil(T / h - 1e-12));
  const double dt = T / static_cast<double>(steps);

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.energy_series.reserve(steps + 1);

  State s = s0;
  project_state(s);
  const Lagrangian& l = sys.lagrangian();
  traj.times.push_back(0.0);
  traj.states.push_back(s);
  traj.energy_series.push_back(energy(l, s.q, s.v));

  for (long k = 1; k <= steps; ++k) {
    const Deriv k1 = field(sys, s.q, s.v);
    const Deriv k2 = field(sys, s.q + 0.5 * dt * k1.dq, s.v + 0.5 * dt * k1.dv);
    const Deriv k3 = field(sys, s.q + 0.5 * dt * k2.dq, s.v + 0.5 * dt * k2.dv);
    const Deriv k4 = field(sys, s.q + dt * k3.dq, s.v + dt * k3.dv);
    s.q += dt / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
    s.v += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    if (!std::isfinite(s.q.norm()) || !std::isfinite(s.v.norm()) || s.q.norm() > kExplosionNorm ||
        s.v.norm() > kExplosionNorm) {
      throw StepExplosion("state norm exceeded 1e6 at t = " + std::to_string(k * dt));
    }
    project_state(s);
    traj.times.push_back(k == steps ? T : k * dt);
    traj.states.push_back(s);
    traj.energy_series.push_back(energy(l, s.q, s.v));
  }
  return traj;
}

double energy_drift(const Trajectory& traj) {
  if (traj.energy_series.empty()) throw InvalidArgument("energy_drift needs a nonempty trajectory");
  const double e0 = traj.energy_series.front();
  double worst = 0.0;
  for (double e : traj.energy_series) worst = std::max(worst, std::abs(e - e0));
  return worst / std::max(1.0, std::abs(e0));
}

State loop_state(const FreePeriodLoop& loop, int i) {
  const int n = loop.size();
  const double h = 2.0 * std::numbers::pi / n;
  Vec3 d = Vec3::Zero();
  for (int j = 1; j < n; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    const double w = (n % 2 == 0) ? 1.0 / std::tan(0.5 * j * h) : 1.0 / std::sin(0.5 * j * h);
    d -= 0.5 * sign * w * loop[i + j];
  }
  // d/dt on [0, 1] is 2 pi times d/dx on [0, 2 pi].
  d *= 2.0 * std::numbers::pi;
  return State{loop[i], tangent_part(loop[i], d) / loop.period()};
}

namespace {

double closure_of(const MagneticSystem& sys, const State& s0, double T, double h, State* end = nullptr) {
  const Trajectory traj = integrate(sys, s0, T, std::min(h, T));
  const State& s1 = traj.states.back();
  if (end) *end = s1;
  return std::sqrt((s1.q - s0.q).squaredNorm() + (s1.v - s0.v).squaredNorm());
}

}  // namespace

ShootingResult refine_periodic_orbit(const MagneticSystem& sys, const FreePeriodLoop& candidate, double e,
                                     double h, int segments, int max_iter) {
  const int n = candidate.size();
  const int k_seg = std::clamp(segments, 1, n);
  const double T0 = candidate.period();
  const Lagrangian& l = sys.lagrangian();

  std::vector<State> guess(k_seg);
  std::vector<Vec3> f1(k_seg), f2(k_seg);
  for (int k = 0; k < k_seg; ++k) {
    guess[k] = loop_state(candidate, static_cast<int>(static_cast<long>(k) * n / k_seg));
    const Vec3 helper = std::abs(guess[k].q.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    f1[k] = tangent_part(guess[k].q, helper).normalized();
    f2[k] = guess[k].q.cross(f1[k]);
  }
  // Arc starts are at node indices k n / k_seg; their times in units of T.
  std::vector<double> t_start(k_seg + 1);
  for (int k = 0; k < k_seg; ++k) t_start[k] = static_cast<double>(static_cast<long>(k) * n / k_seg) / n;
  t_start[k_seg] = 1.0;

  const int unknowns = 4 * k_seg + 1;
  const int equations = 6 * k_seg + 1;
  using VecX = Eigen::VectorXd;
  const auto state_of = [&](const VecX& x, int k) {
    State s;
    s.q = (guess[k].q + x[4 * k] * f1[k] + x[4 * k + 1] * f2[k]).normalized();
    s.v = tangent_part(s.q, guess[k].v + x[4 * k + 2] * f1[k] + x[4 * k + 3] * f2[k]);
    return s;
  };
  const auto arc_end = [&](const State& s, double duration) {
    return integrate(sys, s, duration, std::min(h, duration)).states.back();
  };
  const auto arc_defect = [&](const VecX& x, int k, double T) {
    const State s = state_of(x, k);
    const State end = arc_end(s, T * (t_start[k + 1] - t_start[k]));
    const State next = state_of(x, (k + 1) % k_seg);
    Eigen::Matrix<double, 6, 1> r;
    r.head<3>() = end.q - next.q;
    r.tail<3>() = end.v - next.v;
    return r;
  };
  const auto residual = [&](const VecX& x) {
    const double T = T0 + x[unknowns - 1];
    VecX r(equations);
    for (int k = 0; k < k_seg; ++k) r.segment<6>(6 * k) = arc_defect(x, k, T);
    const State s0 = state_of(x, 0);
    r[equations - 1] = energy(l, s0.q, s0.v) - e;
    return r;
  };

  VecX x = VecX::Zero(unknowns);
  VecX r = residual(x);
  int it = 0;
  for (; it < max_iter && r.norm() > 1e-12; ++it) {
    const double T = T0 + x[unknowns - 1];
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(equations, unknowns);
    for (int k = 0; k < k_seg; ++k) {
      for (int c = 0; c < 4; ++c) {
        const int col = 4 * k + c;
        const double eps = 1e-7;
        VecX xp = x, xm = x;
        xp[col] += eps;
        xm[col] -= eps;
        // Arc k depends on its own start; arc k - 1 on its end point.
        const int prev = (k - 1 + k_seg) % k_seg;
        jac.block<6, 1>(6 * k, col) = (arc_defect(xp, k, T) - arc_defect(xm, k, T)) / (2.0 * eps);
        if (prev != k) {
          jac.block<6, 1>(6 * prev, col) += (arc_defect(xp, prev, T) - arc_defect(xm, prev, T)) / (2.0 * eps);
        }
        if (k == 0) {
          const State sp = state_of(xp, 0), sm = state_of(xm, 0);
          jac(equations - 1, col) = (energy(l, sp.q, sp.v) - energy(l, sm.q, sm.v)) / (2.0 * eps);
        }
      }
    }
    {
      const double eps = 1e-7 * std::max(1.0, T);
      VecX xp = x, xm = x;
      xp[unknowns - 1] += eps;
      xm[unknowns - 1] -= eps;
      jac.col(unknowns - 1) = (residual(xp) - residual(xm)) / (2.0 * eps);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VecX& sv = svd.singularValues();
    VecX step = VecX::Zero(unknowns);
    for (int c = 0; c < sv.size(); ++c) {
      if (sv[c] > 1e-8 * sv[0]) step -= (svd.matrixU().col(c).dot(r) / sv[c]) * svd.matrixV().col(c);
    }
    double scale = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const VecX trial = x + scale * step;
      if (T0 + trial[unknowns - 1] > 0.0) {
        const VecX rt = residual(trial);
        if (rt.norm() < r.norm()) {
          x = trial;
          r = rt;
          improved = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }

  ShootingResult res;
  res.initial = state_of(x, 0);
  res.period = T0 + x[unknowns - 1];
  res.closure = closure_of(sys, res.initial, res.period, h);
  for (int k = 0; k < k_seg; ++k) {
    const State s = state_of(x, k);
    res.correction = std::max(
        res.correction, std::sqrt((s.q - guess[k].q).squaredNorm() + (s.v - guess[k].v).squaredNorm()));
  }
  res.iterations = it;
  return res;
}

OrbitReport certify_orbit(const MagneticSystem& sys, const FreePeriodLoop& candidate, double e, double h,
                          bool refine) {
  const double p = candidate.period();
  const State s0 = initial_state(candidate);

  OrbitReport r;
  r.raw_closure_residual = closure_of(sys, s0, p, h);
  r.closure_residual = r.raw_closure_residual;
  r.refined_period = p;
  if (refine && r.raw_closure_residual > 1e-11) {
    const ShootingResult sh = refine_periodic_orbit(sys, candidate, e, h);
    if (sh.correction <= kMaxShootingCorrection && std::abs(sh.period / p - 1.0) <= kMaxShootingCorrection &&
        sh.closure < r.raw_closure_residual) {
      r.closure_residual = sh.closure;
      r.shooting_correction = sh.correction;
      r.refined_period = sh.period;
    }
  }
  r.mean_energy_residual = mean_energy(sys, candidate) - e;
  r.gradient_norm = gradient_norm(candidate, action_gradient(sys, e, candidate));
  r.self_intersections = count_self_intersections(candidate);
  return r;
}

int count_self_intersections(const FreePeriodLoop& loop) {
  const int n = loop.size();
  std::vector<Vec3> mid(n);
  std::vector<double> radius(n);
  for (int i = 0; i < n; ++i) {
    mid[i] = 0.5 * (loop[i] + loop[i + 1]);
    radius[i] = 0.5 * (loop[i + 1] - loop[i]).norm();
  }
  int count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the seam
      if ((mid[i] - mid[j]).norm() > radius[i] + radius[j] + 2.0 * kNearMiss) continue;
      const Vec3& a = loop[i];
      const Vec3& b = loop[i + 1];
      const Vec3& c = loop[j];
      const Vec3& d = loop[j + 1];
      if (arcs_cross(a, b, c, d)) {
        ++count;
        continue;
      }
      const double dist = std::min({point_arc_distance(a, c, d), point_arc_distance(b, c, d),
                                    point_arc_distance(c, a, b), point_arc_distance(d, a, b)});
      if (dist < kNearMiss) ++count;
    }
  }
  return count;
}

}  // namespace magflow
