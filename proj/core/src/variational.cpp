#include "magflow/variational.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "magflow/errors.hpp"

namespace magflow {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kArmijo = 1e-4;
constexpr double kMaxNodeStep = 0.3;
constexpr double kEndpointTol = 1e-4;
constexpr double kChainStep = 0.02;
constexpr double kSubStep = 0.25;
constexpr double kPolishStart = 1e-2;

using Field = std::vector<Vec3>;

// Discrete H^1 inner product of node fields.
double h1_inner(const Field& a, const Field& b) {
  const int n = static_cast<int>(a.size());
  double s0 = 0.0, s1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    s0 += a[i].dot(b[i]);
    s1 += (a[j] - a[i]).dot(b[j] - b[i]);
  }
  return (s0 + static_cast<double>(n) * n * s1) / n;
}

double dot(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

double max_norm(const Field& a) {
  double m = 0.0;
  for (const Vec3& x : a) m = std::max(m, x.norm());
  return m;
}

FreePeriodLoop moved(const FreePeriodLoop& loop, const Field& dir, double t) {
  std::vector<SpherePoint> nodes;
  nodes.reserve(loop.size());
  for (int i = 0; i < loop.size(); ++i) nodes.push_back(project_to_sphere(sphere_exp(loop[i], t * dir[i])));
  return FreePeriodLoop(std::move(nodes), loop.period());
}

FreePeriodLoop with_optimal_period(const MagneticSystem& sys, double e, const FreePeriodLoop& loop) {
  return loop.with_period(optimal_period(sys, e, loop));
}

double max_displacement(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  double d = 0.0;
  for (int i = 0; i < a.size(); ++i) d = std::max(d, angular_distance(a[i], b[i]));
  return d;
}

FreePeriodLoop slerp_loop(const FreePeriodLoop& a, const FreePeriodLoop& b, double s) {
  std::vector<SpherePoint> nodes;
  nodes.reserve(a.size());
  for (int i = 0; i < a.size(); ++i) nodes.push_back(SpherePoint::unchecked(slerp(a[i], b[i], s)));
  return FreePeriodLoop(std::move(nodes), a.period() + s * (b.period() - a.period()));
}

// deform along the node-wise geodesic homotopy, in sub-steps small enough for
// the sweep quadrature.
LiftedLoop deform_geodesic(const MagneticSystem& sys, const LiftedLoop& from, const FreePeriodLoop& to) {
  const double d = max_displacement(from.loop, to);
  const int k = std::max(1, static_cast<int>(std::ceil(d / kSubStep)));
  LiftedLoop cur = from;
  for (int j = 1; j <= k; ++j) {
    const FreePeriodLoop next = j == k ? to : slerp_loop(from.loop, to, static_cast<double>(j) / k);
    cur = deform(sys, cur, next);
  }
  return cur;
}

// Signed geodesic curvature at node i (positive when turning left).
double node_curvature(const FreePeriodLoop& loop, int i) {
  const Vec3& q = loop[i];
  const Vec3 a = sphere_log(q, loop[i - 1]);
  const Vec3 b = sphere_log(q, loop[i + 1]);
  const double la = a.norm(), lb = b.norm();
  if (la < 1e-14 || lb < 1e-14) return 0.0;
  const Vec3 t_in = -a / la;
  const Vec3 t_out = b / lb;
  const double turn = std::atan2(q.dot(t_in.cross(t_out)), t_in.dot(t_out));
  return turn / (0.5 * (la + lb));
}

// Point of the circle of geodesic radius r tangent to `tangent` at x, on the
// side given by `left`, reached after angle theta.
Vec3 tangent_circle_point(const Vec3& x, const Vec3& tangent, bool left, double r, double theta) {
  const Vec3 side = left ? x.cross(tangent) : tangent.cross(x);
  const Vec3 center = std::cos(r) * x + std::sin(r) * side;
  const double ang = left ? theta : -theta;
  return Eigen::AngleAxisd(ang, center) * x;
}

// Point of the polygon of `loop` at parameter t in [0, 1) (node-uniform).
Vec3 polygon_point(const FreePeriodLoop& loop, double t) {
  const int n = loop.size();
  double x = t * n;
  x -= n * std::floor(x / n);
  const int i = static_cast<int>(std::floor(x));
  const double frac = x - i;
  return frac == 0.0 ? loop[i] : slerp(loop[i], loop[i + 1], frac);
}

struct Chain {
  std::vector<FreePeriodLoop> loops;

  void append_piece(const std::function<FreePeriodLoop(double)>& piece) {
    const FreePeriodLoop start = piece(0.0);
    const FreePeriodLoop end = piece(1.0);
    // Resolve the piece finely enough for both the ledger and the band.
    double span = 0.0;
    const int probes = 16;
    FreePeriodLoop prev = start;
    for (int j = 1; j <= probes; ++j) {
      const FreePeriodLoop cur = piece(static_cast<double>(j) / probes);
      span += max_displacement(prev, cur);
      prev = cur;
    }
    const int k = std::max(1, static_cast<int>(std::ceil(span / kChainStep)));
    if (loops.empty()) loops.push_back(start);
    for (int j = 1; j <= k; ++j) loops.push_back(j == k ? end : piece(static_cast<double>(j) / k));
  }
};

FreePeriodLoop uniform_circle(const Vec3& c, double r, int n, bool counterclockwise, double period) {
  const Vec3 helper = std::abs(c.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = tangent_part(c, helper).normalized();
  const Vec3 w = c.cross(u);
  std::vector<SpherePoint> nodes;
  nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double th = (counterclockwise ? 1.0 : -1.0) * 2.0 * kPi * i / n;
    const Vec3 x = std::cos(r) * c + std::sin(r) * (std::cos(th) * u + std::sin(th) * w);
    nodes.push_back(SpherePoint::unchecked(x.normalized()));
  }
  return FreePeriodLoop(std::move(nodes), period);
}

FreePeriodLoop constant_at(const Vec3& c, int n, double period) {
  return constant_loop(SpherePoint::unchecked(c), n, period);
}

// Apex whose antipode keeps the largest clearance from both loops.
Vec3 choose_apex(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  const Icosphere ico = make_icosphere(1);
  Vec3 best = ico.vertices.front();
  double best_clear = -1.0;
  for (const Vec3& c : ico.vertices) {
    double clear = std::numeric_limits<double>::infinity();
    for (const FreePeriodLoop* l : {&a, &b}) {
      for (int i = 0; i < l->size(); ++i) clear = std::min(clear, angular_distance(-c, (*l)[i]));
    }
    if (clear > best_clear + 1e-12) {
      best_clear = clear;
      best = c;
    }
  }
  return best;
}

Chain cone_sweep_chain(const FreePeriodLoop& a, const FreePeriodLoop& b, int sweeps) {
  const int n = a.size();
  const double p = a.period();
  const Vec3 c = choose_apex(a, b);
  Chain chain;
  chain.append_piece([&](double s) {
    std::vector<SpherePoint> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back(SpherePoint::unchecked(s == 1.0 ? c : slerp(a[i], c, s)));
    return FreePeriodLoop(std::move(nodes), p);
  });
  const Vec3 helper = std::abs(c.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 mid = tangent_part(c, helper).normalized();
  for (int k = 0; k < std::abs(sweeps); ++k) {
    const bool ccw = sweeps > 0;
    chain.append_piece([&](double s) {
      if (s == 0.0) return constant_at(c, n, p);
      if (s == 1.0) return constant_at(-c, n, p);
      return uniform_circle(c, s * kPi, n, ccw, p);
    });
    // Slide the constant loop back from -c to c (no flux).
    chain.append_piece([&](double s) {
      const Vec3 x = s < 0.5 ? slerp(-c, mid, 2.0 * s) : slerp(mid, c, 2.0 * s - 1.0);
      return constant_at(s == 1.0 ? c : x, n, p);
    });
  }
  chain.append_piece([&](double s) {
    std::vector<SpherePoint> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back(SpherePoint::unchecked(s == 0.0 ? c : slerp(c, b[i], s)));
    return FreePeriodLoop(std::move(nodes), b.period());
  });
  return chain;
}

// Traverse `a` in the first 1/m of the parameter, then grow m - 1 circles
// tangent at node 0 and morph onto b.
Chain grow_iterate_chain(const FreePeriodLoop& a, const FreePeriodLoop& b, int m) {
  const int n = a.size();
  const double p = a.period();
  Chain chain;
  chain.append_piece([&](double s) {
    std::vector<SpherePoint> nodes;
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / n;
      const double phi = (1.0 - s) * t + s * std::min(m * t, 1.0);
      nodes.push_back(SpherePoint::unchecked(phi >= 1.0 ? a[0] : polygon_point(a, phi)));
    }
    return FreePeriodLoop(std::move(nodes), p);
  });
  const FreePeriodLoop slid = chain.loops.back();
  const Vec3 x = a[0];
  const Vec3 tangent = sphere_log(x, a[1]).normalized();
  const double kappa = node_curvature(a, 0);
  const bool left = kappa >= 0.0;
  const double radius = std::atan2(1.0, std::abs(kappa));
  const int per_copy = n / m;
  FreePeriodLoop base = slid;
  for (int copy = 1; copy < m; ++copy) {
    chain.append_piece([&, copy](double s) {
      std::vector<SpherePoint> nodes(base.nodes());
      if (s > 0.0) {
        for (int k = 0; k < per_copy; ++k) {
          const double theta = 2.0 * kPi * k / per_copy;
          nodes[copy * per_copy + k] = SpherePoint::unchecked(
              tangent_circle_point(x, tangent, left, s * radius, theta).normalized());
        }
      }
      return FreePeriodLoop(std::move(nodes), p);
    });
    base = chain.loops.back();
  }
  const FreePeriodLoop grown = chain.loops.back();
  if (max_displacement(grown, b) > 0.0) {
    chain.append_piece([&](double s) { return s == 1.0 ? b : slerp_loop(grown, b, s); });
  }
  return chain;
}

std::vector<LiftedLoop> lift_chain(const MagneticSystem& sys, const LiftedLoop& a, const Chain& chain) {
  std::vector<LiftedLoop> out;
  out.reserve(chain.loops.size());
  LiftedLoop cur{chain.loops.front(), a.flux};
  out.push_back(cur);
  for (std::size_t j = 1; j < chain.loops.size(); ++j) {
    cur = deform_geodesic(sys, cur, chain.loops[j]);
    out.push_back(cur);
  }
  return out;
}

// Node-wise logarithms from loop a to loop b (tangent at a).
Field log_field(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  Field f(a.size());
  for (int i = 0; i < a.size(); ++i) f[i] = sphere_log(a[i], b[i]);
  return f;
}

double rms_distance(const FreePeriodLoop& a, const FreePeriodLoop& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += std::pow(angular_distance(a[i], b[i]), 2);
  return std::sqrt(s / a.size());
}

struct Image {
  LiftedLoop ll;
  double action = 0.0;
  LoopGradient diff;
  Field grad;
};

Image make_image(const MagneticSystem& sys, double e, LiftedLoop ll) {
  ll.loop = with_optimal_period(sys, e, ll.loop);
  Image im{std::move(ll), 0.0, {}, {}};
  im.action = lifted_action_A(sys, e, im.ll);
  im.diff = action_gradient(sys, e, im.ll.loop);
  im.grad = h1_gradient(im.ll.loop, im.diff).node_grads;
  return im;
}

// One Armijo step of `im` along direction d (descent for A when ascend is
// false); returns false if no step was accepted.
bool armijo_step(const MagneticSystem& sys, double e, Image& im, const Field& d, double slope, double& t,
                 bool ascend) {
  if (!(slope > 0.0)) return false;
  const double dmax = max_norm(d);
  if (dmax == 0.0) return false;
  t = std::min(t, kMaxNodeStep / dmax);
  for (int ls = 0; ls < 40; ++ls) {
    std::optional<FreePeriodLoop> cand;
    try {
      cand = with_optimal_period(sys, e, moved(im.ll.loop, d, t));
    } catch (const Error&) {
      t *= 0.5;
      continue;
    }
    LiftedLoop next = deform(sys, im.ll, *cand);
    const double a = lifted_action_A(sys, e, next);
    const bool ok = ascend ? a >= im.action + kArmijo * t * slope : a <= im.action - kArmijo * t * slope;
    if (ok) {
      im = make_image(sys, e, std::move(next));
      t *= 2.0;
      return true;
    }
    t *= 0.5;
  }
  return false;
}

}  // namespace

bool is_certified(const OrbitReport& r) {
  return r.closure_residual <= kClosureThreshold && std::abs(r.mean_energy_residual) <= kEnergyThreshold;
}

WaistResult find_waist(const MagneticSystem& sys, double e, const LiftedLoop& seed, const SolverConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  const double tau = valley_tau(sys);
  LiftedLoop ll{with_optimal_period(sys, e, seed.loop), seed.flux};
  if (in_valley(sys, ll.loop, tau)) throw ValleyCollapse("seed lies in the valley of constant loops");
  double action = lifted_action_A(sys, e, ll);

  WaistResult res;
  res.history.push_back(action);
  Field prev_nodes_step, prev_diff;
  double t = 1.0;
  for (int it = 0; it <= cfg.max_iter; ++it) {
    const LoopGradient diff = action_gradient(sys, e, ll.loop);
    const LoopGradient g = h1_gradient(ll.loop, diff);
    const double gn = gradient_norm(ll.loop, diff);
    if (gn <= cfg.tol) {
      res.loop = ll;
      res.action = action;
      res.iterations = it;
      res.report = certify_orbit(sys, ll.loop, e, cfg.flow_step);
      res.report.gradient_norm = gn;
      return res;
    }
    if (it == cfg.max_iter) break;

    // Barzilai-Borwein trial step in the H^1 metric.
    if (!prev_nodes_step.empty()) {
      Field y(ll.loop.size());
      for (int i = 0; i < ll.loop.size(); ++i) y[i] = diff.node_grads[i] - tangent_part(ll.loop[i], prev_diff[i]);
      Field s(ll.loop.size());
      for (int i = 0; i < ll.loop.size(); ++i) s[i] = tangent_part(ll.loop[i], prev_nodes_step[i]);
      const double sy = dot(s, y);
      if (sy > 0.0) t = h1_inner(s, s) / sy;
    }
    const double slope = dot(diff.node_grads, g.node_grads);
    Field d(g.node_grads.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g.node_grads[i];
    t = std::min(t, kMaxNodeStep / std::max(max_norm(d), 1e-300));

    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const FreePeriodLoop cand = with_optimal_period(sys, e, moved(ll.loop, d, t));
      LiftedLoop next = deform(sys, ll, cand);
      const double a = lifted_action_A(sys, e, next);
      if (a <= action - kArmijo * t * slope) {
        prev_nodes_step = log_field(cand, ll.loop);
        for (auto& v : prev_nodes_step) v = -v;
        prev_diff = diff.node_grads;
        ll = std::move(next);
        action = a;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      throw MaxIterations("line search stalled at gradient norm " + std::to_string(gn));
    }
    res.history.push_back(action);
    if (in_valley(sys, ll.loop, tau)) {
      throw ValleyCollapse("descent entered the valley U_tau (tau = " + std::to_string(tau) +
                           "): the seed lies in the basin of constant loops");
    }
  }
  throw MaxIterations("find_waist did not reach tol = " + std::to_string(cfg.tol) + " within " +
                      std::to_string(cfg.max_iter) + " iterations");
}

std::pair<LiftedLoop, double> newton_polish(const MagneticSystem& sys, double e, const LiftedLoop& start,
                                            double tol, int max_iter) {
  LiftedLoop ll{with_optimal_period(sys, e, start.loop), start.flux};
  const int n = ll.loop.size();
  const int dim = 2 * n;

  const auto frame = [](const Vec3& q, Vec3& e1, Vec3& e2) {
    const Vec3 helper = std::abs(q.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    e1 = tangent_part(q, helper).normalized();
    e2 = q.cross(e1);
  };
  const auto reduced_gradient = [&](const FreePeriodLoop& base, const Eigen::VectorXd& x,
                                    const std::vector<Vec3>& e1, const std::vector<Vec3>& e2) {
    Field dir(n);
    for (int i = 0; i < n; ++i) dir[i] = x[2 * i] * e1[i] + x[2 * i + 1] * e2[i];
    const FreePeriodLoop moved_loop = with_optimal_period(sys, e, moved(base, dir, 1.0));
    const LoopGradient d = action_gradient(sys, e, moved_loop);
    Eigen::VectorXd g(dim);
    for (int i = 0; i < n; ++i) {
      g[2 * i] = d.node_grads[i].dot(e1[i]);
      g[2 * i + 1] = d.node_grads[i].dot(e2[i]);
    }
    return g;
  };

  double gn = gradient_norm(ll.loop, action_gradient(sys, e, ll.loop));
  for (int it = 0; it < max_iter && gn > tol; ++it) {
    std::vector<Vec3> e1(n), e2(n);
    for (int i = 0; i < n; ++i) frame(ll.loop[i], e1[i], e2[i]);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
    const Eigen::VectorXd g0 = reduced_gradient(ll.loop, zero, e1, e2);
    Eigen::MatrixXd hess(dim, dim);
    const double h = 1e-6;
    for (int k = 0; k < dim; ++k) {
      Eigen::VectorXd x = zero;
      x[k] = h;
      const Eigen::VectorXd gp = reduced_gradient(ll.loop, x, e1, e2);
      x[k] = -h;
      const Eigen::VectorXd gm = reduced_gradient(ll.loop, x, e1, e2);
      hess.col(k) = (gp - gm) / (2.0 * h);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double cutoff = 1e-7 * lam.cwiseAbs().maxCoeff();
    const Eigen::VectorXd coeff = eig.eigenvectors().transpose() * g0;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < dim; ++k) {
      if (std::abs(lam[k]) > cutoff) step -= (coeff[k] / lam[k]) * eig.eigenvectors().col(k);
    }
    // Backtrack on the gradient norm.
    double scale = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 20; ++ls) {
      Field dir(n);
      for (int i = 0; i < n; ++i) dir[i] = scale * (step[2 * i] * e1[i] + step[2 * i + 1] * e2[i]);
      if (max_norm(dir) > kMaxNodeStep) {
        scale *= 0.5;
        continue;
      }
      const FreePeriodLoop cand = with_optimal_period(sys, e, moved(ll.loop, dir, 1.0));
      const double cand_gn = gradient_norm(cand, action_gradient(sys, e, cand));
      if (cand_gn < gn) {
        ll = deform(sys, ll, cand);
        gn = cand_gn;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  return {ll, gn};
}

PathOfLoops initial_path(const MagneticSystem& sys, const LiftedLoop& end_a, const LiftedLoop& end_b, int M) {
  if (M < 8) throw InvalidArgument("an elastic band needs M >= 8 images");
  const FreePeriodLoop& a = end_a.loop;
  const FreePeriodLoop& b = end_b.loop;
  if (a.size() != b.size()) throw InvalidArgument("band endpoints must have the same node count");
  const double total = sys.total_flux();
  const double tol = 1e-3 * std::max(1.0, std::abs(total));

  std::vector<LiftedLoop> lifted;
  // Multiplicity of b relative to a (b an m-fold iterate of a's curve).
  const FreePeriodLoop pb = primitive_loop(b);
  const int m = b.size() / pb.size();
  if (m > 1 && primitive_loop(a).size() == a.size() && hausdorff_distance(resample(pb, a.size()), a) < 0.05) {
    const Chain chain = grow_iterate_chain(a, b, m);
    lifted = lift_chain(sys, end_a, chain);
    if (std::abs(lifted.back().flux - end_b.flux) > tol) lifted.clear();
  }
  if (lifted.empty()) {
    int sweeps = 0;
    for (int attempt = 0; attempt < 3; ++attempt) {
      lifted = lift_chain(sys, end_a, cone_sweep_chain(a, b, sweeps));
      const double gap = end_b.flux - lifted.back().flux;
      if (std::abs(gap) <= tol) break;
      if (std::abs(total) < 1e-9) throw InvalidArgument("band endpoints lie in different lifts of a zero-flux form");
      sweeps += static_cast<int>(std::lround(gap / total));
    }
    if (std::abs(end_b.flux - lifted.back().flux) > tol) {
      throw InvalidArgument("could not connect the band endpoints in the universal cover");
    }
  }
  lifted.back() = end_b;
  lifted.front() = end_a;

  // Pick M images uniformly in RMS arc length.
  std::vector<double> arc(lifted.size(), 0.0);
  for (std::size_t j = 1; j < lifted.size(); ++j) arc[j] = arc[j - 1] + rms_distance(lifted[j - 1].loop, lifted[j].loop);
  PathOfLoops path;
  path.images.reserve(M);
  std::size_t j = 0;
  for (int k = 0; k < M; ++k) {
    const double target = arc.back() * k / (M - 1);
    while (j + 1 < lifted.size() && arc[j + 1] <= target) ++j;
    std::size_t pick = j;
    if (j + 1 < lifted.size() && target - arc[j] > arc[j + 1] - target) pick = j + 1;
    if (k == 0) pick = 0;
    if (k == M - 1) pick = lifted.size() - 1;
    path.images.push_back(lifted[pick]);
  }
  return path;
}

MinimaxResult minimax_path(const MagneticSystem& sys, double e, const LiftedLoop& end_a, const LiftedLoop& end_b,
                           int M, const SolverConfig& cfg) {
  for (const LiftedLoop* end : {&end_a, &end_b}) {
    const FreePeriodLoop l = with_optimal_period(sys, e, end->loop);
    const double gn = gradient_norm(l, action_gradient(sys, e, l));
    if (gn > kEndpointTol) {
      throw EndpointNotMinimal("band endpoint has gradient norm " + std::to_string(gn) + " > 1e-4");
    }
  }
  MinimaxResult res;
  const bool degenerate = end_a.loop.nodes() == end_b.loop.nodes() && end_a.flux == end_b.flux;
  if (degenerate) {
    Image im = make_image(sys, e, end_a);
    res.value = im.action;
    res.argmax_index = 0;
    res.saddle = im.ll;
    res.saddle_gradient_norm = gradient_norm(im.ll.loop, im.diff);
    res.converged = res.saddle_gradient_norm <= cfg.tol;
    res.path.images.assign(static_cast<std::size_t>(M), im.ll);
    res.history.push_back(res.value);
    return res;
  }

  const PathOfLoops start = initial_path(sys, end_a, end_b, M);
  std::vector<Image> images;
  images.reserve(M);
  for (const LiftedLoop& ll : start.images) images.push_back(make_image(sys, e, ll));
  std::vector<double> steps(M, 1.0), climb_steps(M, 1.0);

  const auto argmax = [&images]() {
    int c = 0;
    for (int k = 1; k < static_cast<int>(images.size()); ++k) {
      if (images[k].action > images[c].action) c = k;
    }
    return c;
  };
  const auto band_tangent = [&images](int k) {
    const Image& prev = images[k - 1];
    const Image& cur = images[k];
    const Image& next = images[k + 1];
    const Field fwd = log_field(cur.ll.loop, next.ll.loop);
    Field bwd = log_field(cur.ll.loop, prev.ll.loop);
    for (auto& v : bwd) v = -v;
    Field tan(fwd.size());
    const double ap = prev.action, ac = cur.action, an = next.action;
    if (an > ac && ac > ap) {
      tan = fwd;
    } else if (an < ac && ac < ap) {
      tan = bwd;
    } else {
      const double dmax = std::max(std::abs(an - ac), std::abs(ap - ac));
      const double dmin = std::min(std::abs(an - ac), std::abs(ap - ac));
      const double wf = an > ap ? dmax : dmin;
      const double wb = an > ap ? dmin : dmax;
      for (std::size_t i = 0; i < tan.size(); ++i) tan[i] = wf * fwd[i] + wb * bwd[i];
      if (wf == 0.0 && wb == 0.0) {
        for (std::size_t i = 0; i < tan.size(); ++i) tan[i] = fwd[i] + bwd[i];
      }
    }
    const double nrm = std::sqrt(std::max(h1_inner(tan, tan), 0.0));
    if (nrm > 0.0) {
      for (auto& v : tan) v /= nrm;
    }
    return tan;
  };

  // Arc-length reparametrization of the images strictly between fixed
  // indices lo and hi.
  const auto reparametrize = [&](int lo, int hi) {
    if (hi - lo < 2) return;
    std::vector<double> arc(hi - lo + 1, 0.0);
    for (int k = lo + 1; k <= hi; ++k) {
      arc[k - lo] = arc[k - 1 - lo] + rms_distance(images[k - 1].ll.loop, images[k].ll.loop);
    }
    if (arc.back() <= 0.0) return;
    std::vector<LiftedLoop> fresh;
    for (int k = lo + 1; k < hi; ++k) {
      const double target = arc.back() * (k - lo) / (hi - lo);
      int j = lo;
      while (j + 1 < hi && arc[j + 1 - lo] <= target) ++j;
      const double seg = arc[j + 1 - lo] - arc[j - lo];
      const double s = seg > 0.0 ? (target - arc[j - lo]) / seg : 0.0;
      const FreePeriodLoop interp = slerp_loop(images[j].ll.loop, images[j + 1].ll.loop, s);
      fresh.push_back(deform_geodesic(sys, images[j].ll, interp));
    }
    for (int k = lo + 1; k < hi; ++k) images[k] = make_image(sys, e, std::move(fresh[k - lo - 1]));
  };

  int c = argmax();
  double last_polish_gn = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < cfg.max_iter; ++sweep) {
    c = argmax();
    res.history.push_back(images[c].action);
    if (c == 0 || c == M - 1) break;  // band below its endpoints: nothing to climb

    const double cgn = gradient_norm(images[c].ll.loop, images[c].diff);
    if (cgn <= cfg.tol) {
      res.converged = true;
      break;
    }
    if (cgn < kPolishStart && cgn < 0.5 * last_polish_gn) {
      last_polish_gn = cgn;
      auto [polished, pgn] = newton_polish(sys, e, images[c].ll, cfg.tol);
      if (pgn <= cfg.tol && rms_distance(polished.loop, images[c].ll.loop) < 0.05) {
        images[c] = make_image(sys, e, std::move(polished));
        res.converged = true;
        break;
      }
    }

    for (int k = 1; k < M - 1; ++k) {
      const Field tan = band_tangent(k);
      Image& im = images[k];
      const double along = h1_inner(im.grad, tan);
      Field perp(im.grad.size());
      for (std::size_t i = 0; i < perp.size(); ++i) perp[i] = -(im.grad[i] - along * tan[i]);
      const double perp_slope = -dot(im.diff.node_grads, perp);
      armijo_step(sys, e, im, perp, perp_slope, steps[k], false);
      if (k == c) {
        const Field tan2 = band_tangent(k);
        const double along2 = h1_inner(im.grad, tan2);
        Field up(tan2.size());
        for (std::size_t i = 0; i < up.size(); ++i) up[i] = along2 * tan2[i];
        const double up_slope = dot(im.diff.node_grads, up);
        armijo_step(sys, e, im, up, up_slope, climb_steps[k], true);
      }
    }
    reparametrize(0, c);
    reparametrize(c, M - 1);
  }

  c = argmax();
  res.argmax_index = c;
  res.value = images[c].action;
  res.saddle = images[c].ll;
  res.saddle_gradient_norm = gradient_norm(images[c].ll.loop, images[c].diff);
  res.converged = res.converged && res.saddle_gradient_norm <= cfg.tol && c != 0 && c != M - 1;
  if (c == 0 || c == M - 1) res.converged = res.saddle_gradient_norm <= cfg.tol;
  res.path.images.clear();
  for (const Image& im : images) res.path.images.push_back(im.ll);
  return res;
}

LiftedLoop labelled(const MagneticSystem& sys, const LiftedLoop& waist, const Label& label) {
  return deck_transform(sys, iterate(waist, label.m), label.n);
}

std::vector<ScanRow> scan_energy(const MagneticSystem& sys, const std::vector<double>& e_grid, const ScanSpec& spec,
                                 const SolverConfig& cfg) {
  for (std::size_t i = 1; i < e_grid.size(); ++i) {
    if (!(e_grid[i] > e_grid[i - 1])) throw InvalidArgument("energy grid must be increasing");
  }
  std::vector<ScanRow> rows;
  for (double e : e_grid) {
    ScanRow row;
    row.e = e;
    try {
      const int mult = std::lcm(spec.from.m, spec.to.m);
      const int base_nodes = spec.seed.loop.size();
      const WaistResult w = find_waist(sys, e, spec.seed, cfg);
      row.waist_action = w.action;
      const auto endpoint = [&](const Label& lab) {
        LiftedLoop base = w.loop;
        const int nodes = base_nodes * mult / lab.m;
        if (nodes != base_nodes) {
          base = find_waist(sys, e, LiftedLoop{resample(w.loop.loop, nodes), w.loop.flux}, cfg).loop;
        }
        return labelled(sys, base, lab);
      };
      const MinimaxResult mm = minimax_path(sys, e, endpoint(spec.from), endpoint(spec.to), cfg.path_nodes, cfg);
      row.minimax_value = mm.value;
      row.converged = mm.converged;
      if (mm.converged) row.closure_residual = certify_orbit(sys, mm.saddle.loop, e, cfg.flow_step).closure_residual;
    } catch (const Error& ex) {
      row.error = ex.kind() + ": " + ex.what();
    }
    rows.push_back(row);
  }
  return rows;
}

std::string scan_to_csv(const std::vector<ScanRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "e,waist_action,minimax_value,converged,closure_residual,error\n";
  for (const ScanRow& r : rows) {
    os << r.e << ',' << r.waist_action << ',' << r.minimax_value << ',' << (r.converged ? 1 : 0) << ','
       << r.closure_residual << ',' << '"' << r.error << '"' << '\n';
  }
  return os.str();
}

FreePeriodLoop primitive_loop(const FreePeriodLoop& loop) {
  const int n = loop.size();
  for (int k = n; k >= 2; --k) {
    if (n % k != 0 || n / k < FreePeriodLoop::kMinNodes) continue;
    const int step = n / k;
    bool repeats = true;
    for (int i = 0; i < n && repeats; ++i) repeats = (loop[i] - loop[i + step]).norm() < 1e-6;
    if (repeats) {
      std::vector<SpherePoint> nodes(loop.nodes().begin(), loop.nodes().begin() + step);
      return FreePeriodLoop(std::move(nodes), loop.period() / k);
    }
  }
  return loop;
}

bool same_orbit(const FreePeriodLoop& a, const FreePeriodLoop& b, double tol) {
  const FreePeriodLoop pa = primitive_loop(a);
  const FreePeriodLoop pb = primitive_loop(b);
  if (std::abs(pa.period() / pb.period() - 1.0) > tol) return false;
  return trace_distance(pa, pb) <= tol;
}

MultiplicityResult multiplicity_search(const MagneticSystem& sys, double e, const LiftedLoop& seed,
                                       const std::vector<Label>& labels, const SolverConfig& cfg) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].m < 1) throw InvalidArgument("label iterate count must be >= 1");
    for (std::size_t j = 0; j < i; ++j) {
      if (labels[i].m == labels[j].m && labels[i].n == labels[j].n) throw InvalidArgument("labels must be distinct");
    }
  }
  MultiplicityResult out;
  const WaistResult w = find_waist(sys, e, seed, cfg);
  const int base_nodes = w.loop.loop.size();
  out.orbits.push_back(CertifiedOrbit{w.loop, w.action, w.report, "waist"});
  if (!is_certified(w.report)) {
    out.failures.push_back(PairFailure{{1, 0}, {1, 0}, "waist failed certification"});
  }

  std::vector<std::pair<int, LiftedLoop>> waists{{base_nodes, w.loop}};
  const auto waist_at = [&](int nodes) {
    for (const auto& [n, ll] : waists) {
      if (n == nodes) return ll;
    }
    const LiftedLoop ll = find_waist(sys, e, LiftedLoop{resample(w.loop.loop, nodes), w.loop.flux}, cfg).loop;
    waists.emplace_back(nodes, ll);
    return ll;
  };
  const auto label_name = [](const Label& l) { return std::to_string(l.m) + "," + std::to_string(l.n); };

  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const Label& la = labels[i];
      const Label& lb = labels[j];
      try {
        const int mult = std::lcm(la.m, lb.m);
        if (base_nodes * mult > kMaxIterateNodes) throw InvalidArgument("band loops would exceed 4096 nodes");
        const LiftedLoop a = labelled(sys, waist_at(base_nodes * mult / la.m), la);
        const LiftedLoop b = labelled(sys, waist_at(base_nodes * mult / lb.m), lb);
        const MinimaxResult mm = minimax_path(sys, e, a, b, cfg.path_nodes, cfg);
        const std::string origin = "saddle " + label_name(la) + "-" + label_name(lb);
        if (!mm.converged) {
          out.failures.push_back(PairFailure{la, lb,
                                             "nonconvergent: saddle gradient norm " +
                                                 std::to_string(mm.saddle_gradient_norm) + ", upper bound " +
                                                 std::to_string(mm.value)});
          continue;
        }
        OrbitReport rep = certify_orbit(sys, mm.saddle.loop, e, cfg.flow_step);
        if (!is_certified(rep)) {
          out.failures.push_back(PairFailure{la, lb,
                                             "saddle failed certification: closure " +
                                                 std::to_string(rep.closure_residual)});
          continue;
        }
        const bool duplicate = std::any_of(out.orbits.begin(), out.orbits.end(), [&](const CertifiedOrbit& o) {
          return same_orbit(o.loop.loop, mm.saddle.loop);
        });
        if (!duplicate) out.orbits.push_back(CertifiedOrbit{mm.saddle, mm.value, rep, origin});
      } catch (const Error& ex) {
        out.failures.push_back(PairFailure{la, lb, ex.kind() + ": " + ex.what()});
      }
    }
  }
  return out;
}

}  // namespace magflow
