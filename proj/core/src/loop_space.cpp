#include "magflow/loop_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "magflow/errors.hpp"

namespace magflow {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxSweepStep = 0.5;
constexpr double kApexClearance = 0.3;

std::vector<SpherePoint> to_points(const std::vector<Vec3>& xs) {
  std::vector<SpherePoint> out;
  out.reserve(xs.size());
  for (const Vec3& x : xs) out.push_back(project_to_sphere(x));
  return out;
}

// Solves the cyclic tridiagonal system (I + N^2 Lap) x = rhs for three
// right-hand sides (Lap = discrete periodic Laplacian, positive definite).
std::vector<Vec3> solve_h1(const std::vector<Vec3>& rhs) {
  const int n = static_cast<int>(rhs.size());
  const double off = -static_cast<double>(n) * n;
  const double diag = 1.0 - 2.0 * off;
  // Sherman-Morrison: A = T + u v^T with T tridiagonal (corners removed).
  const double gamma = -diag;
  std::vector<double> b(n, diag);
  b[0] -= gamma;
  b[n - 1] -= off * off / gamma;

  auto thomas = [&](std::vector<Vec3> d) {
    std::vector<double> c(n);
    c[0] = off / b[0];
    d[0] /= b[0];
    for (int i = 1; i < n; ++i) {
      const double m = b[i] - off * c[i - 1];
      c[i] = off / m;
      d[i] = (d[i] - off * d[i - 1]) / m;
    }
    for (int i = n - 2; i >= 0; --i) d[i] -= c[i] * d[i + 1];
    return d;
  };

  std::vector<Vec3> y = thomas(rhs);
  std::vector<Vec3> u(n, Vec3::Zero());
  u[0] = Vec3::Constant(gamma);
  u[n - 1] = Vec3::Constant(off);
  const std::vector<Vec3> z = thomas(u);
  // v = (1, 0, ..., 0, off / gamma)
  const double vz = z[0].x() + off / gamma * z[n - 1].x();
  std::vector<Vec3> x(n);
  const Vec3 vy = y[0] + (off / gamma) * y[n - 1];
  const Vec3 factor = vy / (1.0 + vz);
  for (int i = 0; i < n; ++i) x[i] = y[i] - factor * z[i].x();
  return x;
}

double max_node_displacement(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  double d = 0.0;
  for (int i = 0; i < a.size(); ++i) d = std::max(d, angular_distance(a[i], b[i]));
  return d;
}

double sweep_unchecked(const TwoForm& sigma, const FreePeriodLoop& from, const FreePeriodLoop& to, int depth) {
  if (sigma.density.identically_zero()) return 0.0;
  const auto density = [&sigma](const Vec3& q) { return sigma.round_density(q); };
  const int n = from.size();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3& a0 = from[i];
    const Vec3& a1 = from[i + 1];
    const Vec3& b0 = to[i];
    const Vec3& b1 = to[i + 1];
    sum += integrate_density_triangle(density, a0, b0, a1, depth);
    sum += integrate_density_triangle(density, b0, b1, a1, depth);
  }
  return sum;
}

}  // namespace

FreePeriodLoop::FreePeriodLoop(std::vector<SpherePoint> nodes, double period)
    : nodes_(std::move(nodes)), period_(period) {
  if (static_cast<int>(nodes_.size()) < kMinNodes) {
    throw InvalidLoop("a loop needs at least " + std::to_string(kMinNodes) + " nodes, got " +
                      std::to_string(nodes_.size()));
  }
  if (!(period_ > 0.0) || !std::isfinite(period_)) throw InvalidLoop("loop period must be positive and finite");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Vec3& a = nodes_[i].vec();
    const Vec3& b = nodes_[(i + 1) % nodes_.size()].vec();
    if (a.dot(b) < -1.0 + 1e-12) throw InvalidLoop("consecutive loop nodes are antipodal");
  }
}

FreePeriodLoop latitude_circle(double z0, int n, double period, Orientation orientation) {
  if (!(z0 > -1.0 && z0 < 1.0)) throw InvalidArgument("latitude must lie in (-1, 1)");
  const double r = std::sqrt(1.0 - z0 * z0);
  const double sign = orientation == Orientation::kLowerCapLeft ? -1.0 : 1.0;
  std::vector<SpherePoint> nodes;
  nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double phi = sign * 2.0 * kPi * i / n;
    nodes.push_back(project_to_sphere(Vec3(r * std::cos(phi), r * std::sin(phi), z0)));
  }
  return FreePeriodLoop(std::move(nodes), period);
}

FreePeriodLoop meridian_circle(double phi, int n, double period, Orientation orientation) {
  const Vec3 a(std::cos(phi), std::sin(phi), 0.0);
  const double sign = orientation == Orientation::kLowerCapLeft ? 1.0 : -1.0;
  std::vector<Vec3> xs;
  xs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t = sign * 2.0 * kPi * i / n;
    xs.push_back(std::cos(t) * a + std::sin(t) * Vec3::UnitZ());
  }
  return FreePeriodLoop(to_points(xs), period);
}

FreePeriodLoop constant_loop(const SpherePoint& q, int n, double period) {
  return FreePeriodLoop(std::vector<SpherePoint>(static_cast<std::size_t>(n), q), period);
}

std::vector<FreePeriodLoop> zeta_family(const Vec3& x0, int n, int steps, double period) {
  if (steps < 1) throw InvalidArgument("zeta_family needs steps >= 1");
  const Vec3 a = x0.normalized();
  const Vec3 d = (std::abs(a.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).cross(a).normalized();
  std::vector<FreePeriodLoop> family;
  family.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const double s = std::numbers::pi * k / steps;
    const Vec3 c = std::cos(s) * a + std::sin(s) * d;
    const Vec3 u = std::sin(s) * a - std::cos(s) * d;  // toward x0 at c
    const Vec3 w = c.cross(u);
    std::vector<SpherePoint> nodes;
    nodes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double t = 2.0 * std::numbers::pi * i / n;
      const Vec3 x = std::cos(s) * c + std::sin(s) * (std::cos(t) * u + std::sin(t) * w);
      nodes.push_back(SpherePoint::unchecked(k == 0 || k == steps ? a : x.normalized()));
    }
    family.emplace_back(std::move(nodes), period);
  }
  return family;
}

FreePeriodLoop bumped(const FreePeriodLoop& loop, const Vec3& normal, double amplitude, double t_center,
                      double width) {
  const int n = loop.size();
  std::vector<Vec3> xs;
  xs.reserve(n);
  for (int i = 0; i < n; ++i) {
    double dt = static_cast<double>(i) / n - t_center;
    dt -= std::round(dt);
    const double s = amplitude * std::exp(-(dt / width) * (dt / width));
    xs.push_back(loop[i] + s * tangent_part(loop[i], normal));
  }
  return FreePeriodLoop(to_points(xs), loop.period());
}

FreePeriodLoop resample(const FreePeriodLoop& loop, int n) {
  const int m = loop.size();
  if (n == m) return loop;
  std::vector<SpherePoint> nodes;
  nodes.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) * m / n;
    const int i = static_cast<int>(std::floor(x));
    const double frac = x - i;
    nodes.push_back(SpherePoint::unchecked(frac == 0.0 ? loop[i] : slerp(loop[i], loop[i + 1], frac)));
  }
  return FreePeriodLoop(std::move(nodes), loop.period());
}

std::vector<Vec3> discrete_velocities(const FreePeriodLoop& loop) {
  const int n = loop.size();
  std::vector<Vec3> v(n);
  const double half_n = 0.5 * n;
  for (int i = 0; i < n; ++i) v[i] = half_n * tangent_part(loop[i], loop[i + 1] - loop[i - 1]);
  return v;
}

double discrete_action_S(const MagneticSystem& sys, double e, const FreePeriodLoop& loop) {
  const auto vel = discrete_velocities(loop);
  const double p = loop.period();
  double sum = 0.0;
  for (int i = 0; i < loop.size(); ++i) sum += lagrangian_eval(sys.lagrangian(), loop[i], vel[i] / p);
  return p * sum / loop.size() + p * e;
}

double mean_energy(const MagneticSystem& sys, const FreePeriodLoop& loop) {
  const auto vel = discrete_velocities(loop);
  const double p = loop.period();
  double sum = 0.0;
  for (int i = 0; i < loop.size(); ++i) sum += energy(sys.lagrangian(), loop[i], vel[i] / p);
  return sum / loop.size();
}

double kinetic_norm_squared(const MagneticSystem& sys, const FreePeriodLoop& loop) {
  const auto vel = discrete_velocities(loop);
  double sum = 0.0;
  for (int i = 0; i < loop.size(); ++i) sum += sys.metric().inner(loop[i], vel[i], vel[i]);
  return sum / loop.size();
}

double lifted_action_A(const MagneticSystem& sys, double e, const LiftedLoop& ll) {
  return discrete_action_S(sys, e, ll.loop) + ll.flux;
}

double optimal_period(const MagneticSystem& sys, double e, const FreePeriodLoop& loop) {
  const Lagrangian& l = sys.lagrangian();
  const auto vel = discrete_velocities(loop);
  const int n = loop.size();
  if (l.is_electromagnetic()) {
    // S(p) = K / p + B + p (e - mean U); dS/dp = 0 at p = sqrt(K / (e - mean U)).
    double kin = 0.0, pot = 0.0;
    for (int i = 0; i < n; ++i) {
      kin += 0.5 * sys.metric().inner(loop[i], vel[i], vel[i]);
      pot += l.potential.value(loop[i]);
    }
    kin /= n;
    pot /= n;
    const double slope = e - pot;
    if (!(slope > 0.0)) throw InvalidArgument("energy below the mean potential along the loop");
    if (kin <= 0.0) return std::numeric_limits<double>::min();
    return std::sqrt(kin / slope);
  }
  // dS/dp = e - mean E(p) is increasing in p; bracket then bisect/Newton.
  const auto dS = [&](double p) { return e - mean_energy(sys, loop.with_period(p)); };
  double lo = loop.period(), hi = loop.period();
  while (dS(lo) > 0.0 && lo > 1e-12) lo *= 0.5;
  while (dS(hi) < 0.0 && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dS(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sweep_flux(const TwoForm& sigma, const FreePeriodLoop& from, const FreePeriodLoop& to, int depth) {
  if (from.size() != to.size()) throw InvalidArgument("sweep_flux needs loops with the same node count");
  const double step = max_node_displacement(from, to);
  if (step > kMaxSweepStep) {
    throw StepTooLarge("deformation step moves a node by " + std::to_string(step) + " rad (limit 0.5)");
  }
  return sweep_unchecked(sigma, from, to, depth);
}

LiftedLoop deform(const MagneticSystem& sys, const LiftedLoop& ll, const FreePeriodLoop& to, int depth) {
  return LiftedLoop{to, ll.flux + sweep_flux(sys.sigma(), ll.loop, to, depth)};
}

LiftedLoop lift_from_apex(const MagneticSystem& sys, const FreePeriodLoop& loop, const Vec3& apex, int depth) {
  const FreePeriodLoop cone_tip = constant_loop(SpherePoint::unchecked(apex), loop.size(), loop.period());
  for (int i = 0; i < loop.size(); ++i) detail::check_triangle(apex, loop[i], loop[i + 1]);
  return LiftedLoop{loop, sweep_unchecked(sys.sigma(), cone_tip, loop, depth)};
}

LiftedLoop lift(const MagneticSystem& sys, const FreePeriodLoop& loop) {
  const auto clearance = [&loop](const Vec3& apex) {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < loop.size(); ++i) d = std::min(d, angular_distance(-apex, loop[i]));
    return d;
  };
  const Vec3 x0 = base_point().vec();
  if (clearance(x0) >= kApexClearance) return lift_from_apex(sys, loop, x0);

  const Icosphere ico = make_icosphere(0);
  bool found = false;
  LiftedLoop best{loop, 0.0};
  for (const Vec3& apex : ico.vertices) {
    if (clearance(apex) < kApexClearance) continue;
    LiftedLoop candidate = lift_from_apex(sys, loop, apex);
    if (!found || std::abs(candidate.flux) < std::abs(best.flux) - 1e-12) {
      best = std::move(candidate);
      found = true;
    }
  }
  if (!found) throw InvalidLoop("no cone apex keeps 0.3 rad clearance from the loop");
  return best;
}

LiftedLoop iterate(const LiftedLoop& ll, int m) {
  if (m < 1) throw InvalidArgument("iterate needs m >= 1");
  if (m == 1) return ll;
  const int n = ll.loop.size();
  std::vector<SpherePoint> nodes;
  if (static_cast<long>(m) * n <= kMaxIterateNodes) {
    nodes.reserve(static_cast<std::size_t>(m) * n);
    for (int k = 0; k < m; ++k) nodes.insert(nodes.end(), ll.loop.nodes().begin(), ll.loop.nodes().end());
  } else {
    nodes.reserve(kMaxIterateNodes);
    for (int k = 0; k < kMaxIterateNodes; ++k) {
      const double x = std::fmod(static_cast<double>(k) * m * n / kMaxIterateNodes, static_cast<double>(n));
      const int i = static_cast<int>(std::floor(x));
      const double frac = x - i;
      nodes.push_back(
          SpherePoint::unchecked(frac == 0.0 ? ll.loop[i] : slerp(ll.loop[i], ll.loop[i + 1], frac)));
    }
  }
  return LiftedLoop{FreePeriodLoop(std::move(nodes), m * ll.loop.period()), m * ll.flux};
}

LiftedLoop deck_transform(const MagneticSystem& sys, const LiftedLoop& ll, int k) {
  return LiftedLoop{ll.loop, ll.flux + k * sys.total_flux()};
}

LoopGradient action_gradient(const MagneticSystem& sys, double e, const FreePeriodLoop& loop) {
  const Lagrangian& l = sys.lagrangian();
  const int n = loop.size();
  const double p = loop.period();
  const double c = 0.5 * n / p;

  std::vector<Vec3> d(n), dv(n);
  std::vector<LagrangianJet> jets(n);
  double energy_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    d[i] = loop[i + 1] - loop[i - 1];
    const Vec3 w = c * tangent_part(loop[i], d[i]);
    jets[i] = lagrangian_jet(l, loop[i], w);
    dv[i] = jets[i].dv;
    energy_sum += jets[i].energy;
  }

  LoopGradient g;
  g.node_grads.resize(n);
  g.p_grad = e - energy_sum / n;

  const bool has_flux = !sys.sigma().density.identically_zero();
  const auto density = [&sys](const Vec3& q) { return sys.sigma().round_density(q); };
  const double scale = p / n;
  for (int j = 0; j < n; ++j) {
    const Vec3& q = loop[j];
    // w_j = c P_j d_j depends on gamma_j through P_j.
    const Vec3 self = -c * (dv[j] * q.dot(d[j]) + d[j] * q.dot(dv[j]));
    const int jm = (j - 1 + n) % n;
    const int jp = (j + 1) % n;
    const Vec3 neighbours = c * (tangent_part(loop[jm], dv[jm]) - tangent_part(loop[jp], dv[jp]));
    Vec3 grad = scale * (jets[j].dq + self + neighbours);
    if (has_flux) {
      // Exact derivative of the swept (degenerate) triangles touching node j.
      const Vec3& next = loop[j + 1];
      const Vec3& prev = loop[j - 1];
      grad += next.cross(q) * projected_density_integral(density, q, q, next);
      grad += q.cross(prev) * projected_density_integral(density, prev, q, q);
    }
    g.node_grads[j] = tangent_part(q, grad);
  }
  return g;
}

LoopGradient action_gradient(const MagneticSystem& sys, double e, const LiftedLoop& ll) {
  return action_gradient(sys, e, ll.loop);
}

LoopGradient h1_gradient(const FreePeriodLoop& loop, const LoopGradient& differential) {
  const int n = loop.size();
  std::vector<Vec3> rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = static_cast<double>(n) * differential.node_grads[i];
  std::vector<Vec3> x = solve_h1(rhs);
  for (int i = 0; i < n; ++i) x[i] = tangent_part(loop[i], x[i]);
  return LoopGradient{std::move(x), differential.p_grad};
}

double gradient_norm(const FreePeriodLoop& loop, const LoopGradient& differential) {
  const int n = loop.size();
  std::vector<Vec3> rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = static_cast<double>(n) * differential.node_grads[i];
  const std::vector<Vec3> x = solve_h1(rhs);
  double s = differential.p_grad * differential.p_grad;
  for (int i = 0; i < n; ++i) s += differential.node_grads[i].dot(x[i]);
  return std::sqrt(std::max(s, 0.0));
}

bool in_valley(const MagneticSystem& sys, const FreePeriodLoop& loop, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("valley parameter tau must be positive");
  const double p = loop.period();
  return kinetic_norm_squared(sys, loop) < tau * p && p < tau;
}

double valley_tau(const MagneticSystem& sys) {
  const FiberBounds b = fiber_bounds(sys.lagrangian(), sys.sigma());
  if (b.sup_norm_dlambda_plus_sigma <= 0.0) return kValleyTauCap;
  return std::min(kValleyTauCap, 2.0 * b.h1 / b.sup_norm_dlambda_plus_sigma);
}

double hausdorff_distance(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  const auto one_sided = [](const FreePeriodLoop& x, const FreePeriodLoop& y) {
    double worst = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < y.size(); ++j) best = std::min(best, (x[i] - y[j]).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

double trace_distance(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  // Chordal distance from x to the geodesic arc [p, q].
  const auto to_arc = [](const Vec3& x, const Vec3& p, const Vec3& q) {
    const double endpoints = std::min((x - p).norm(), (x - q).norm());
    const Vec3 n = p.cross(q);
    if (n.norm() < 1e-14) return endpoints;
    const Vec3 nn = n.normalized();
    const Vec3 foot = x - x.dot(nn) * nn;
    if (foot.norm() < 1e-14) return endpoints;
    const Vec3 f = foot.normalized();
    if (p.cross(f).dot(nn) < 0.0 || f.cross(q).dot(nn) < 0.0) return endpoints;
    return std::min(endpoints, (x - f).norm());
  };
  const auto one_sided = [&to_arc](const FreePeriodLoop& x, const FreePeriodLoop& y) {
    double worst = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < y.size(); ++j) best = std::min(best, to_arc(x[i], y[j], y[j + 1]));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

std::string to_json(const LiftedLoop& ll) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& q : ll.loop.nodes()) j["nodes"].push_back({q.x(), q.y(), q.z()});
  j["p"] = ll.loop.period();
  j["flux"] = ll.flux;
  return j.dump();
}

LiftedLoop lifted_loop_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("loop JSON: ") + ex.what());
  }
  if (!j.contains("nodes") || !j.contains("p") || !j.contains("flux")) {
    throw InvalidArgument("loop JSON needs keys nodes, p and flux");
  }
  std::vector<SpherePoint> nodes;
  for (const auto& row : j.at("nodes")) {
    if (!row.is_array() || row.size() != 3) throw InvalidArgument("loop JSON node must be [x, y, z]");
    const Vec3 q(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
    // Keep stored unit vectors bit for bit; renormalize anything else.
    nodes.push_back(std::abs(q.norm() - 1.0) <= 1e-12 ? SpherePoint::unchecked(q) : project_to_sphere(q));
  }
  return LiftedLoop{FreePeriodLoop(std::move(nodes), j.at("p").get<double>()), j.at("flux").get<double>()};
}

std::string to_csv(const FreePeriodLoop& loop) {
  std::ostringstream os;
  os.precision(17);
  os << "i,t,x,y,z\n";
  for (int i = 0; i < loop.size(); ++i) {
    os << i << ',' << static_cast<double>(i) / loop.size() << ',' << loop[i].x() << ',' << loop[i].y() << ','
       << loop[i].z() << '\n';
  }
  return os.str();
}

}  // namespace magflow
