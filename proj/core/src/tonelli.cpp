#include "magflow/tonelli.hpp"

#include <algorithm>
#include <numbers>

#include "magflow/errors.hpp"

namespace magflow {
namespace {

struct Psi {
  double value, slope;
};

Psi fiber_profile(const Lagrangian& l, double s) {
  Psi p{0.5 * s, 0.5};
  if (l.kind == Lagrangian::Kind::kCustomFiberPolynomial && l.quartic != 0.0) {
    const double r2 = l.extension_radius * l.extension_radius;
    if (s <= r2) {
      p.value += l.quartic * s * s;
      p.slope += 2.0 * l.quartic * s;
    } else {
      p.value += l.quartic * (2.0 * r2 * s - r2 * r2);
      p.slope += 2.0 * l.quartic * r2;
    }
  }
  return p;
}

// Orthonormal (Euclidean) basis of T_q S^2.
void tangent_frame(const Vec3& q, Vec3& e1, Vec3& e2) {
  const Vec3 helper = std::abs(q.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  e1 = tangent_part(q, helper).normalized();
  e2 = q.cross(e1);
}

// Local ascent of a function on the sphere from a start point (projected
// gradient with numerical derivatives and step halving).
template <class F>
double polish_max(const F& f, Vec3 q) {
  double best = f(q);
  double step = 0.05;
  for (int it = 0; it < 400 && step > 1e-12; ++it) {
    Vec3 e1, e2;
    tangent_frame(q, e1, e2);
    constexpr double h = 1e-6;
    const double g1 = (f(sphere_exp(q, h * e1)) - f(sphere_exp(q, -h * e1))) / (2 * h);
    const double g2 = (f(sphere_exp(q, h * e2)) - f(sphere_exp(q, -h * e2))) / (2 * h);
    const Vec3 g = g1 * e1 + g2 * e2;
    const double gn = g.norm();
    if (gn < 1e-14) break;
    const Vec3 trial = sphere_exp(q, (step / gn) * g);
    const double v = f(trial);
    if (v > best) {
      best = v;
      q = trial;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return best;
}

}  // namespace

double default_extension_radius(double e_max, double max_abs_potential) {
  return 3.0 * std::sqrt(2.0 * std::max(e_max, 0.0) + 2.0 * std::abs(max_abs_potential));
}

LagrangianJet lagrangian_jet(const Lagrangian& l, const Vec3& q, const Vec3& v) {
  const double conf = l.metric.factor(q);
  const double s = conf * v.squaredNorm();
  const Psi psi = fiber_profile(l, s);
  const Vec3 drift = l.drift.value(q);
  const double pot = l.potential.value(q);

  LagrangianJet jet;
  jet.value = psi.value + drift.dot(v) - pot;
  jet.energy = 2.0 * psi.slope * s - psi.value + pot;
  jet.dv = 2.0 * psi.slope * conf * v + drift;
  jet.dq = (2.0 * psi.slope * s) * l.metric.exponent_gradient(q) - l.potential.gradient(q);
  if (!l.drift.is_none()) jet.dq += l.drift.jacobian(q).transpose() * v;
  return jet;
}

double lagrangian_eval(const Lagrangian& l, const Vec3& q, const Vec3& v) {
  const double s = l.metric.factor(q) * v.squaredNorm();
  return fiber_profile(l, s).value + l.drift.value(q).dot(v) - l.potential.value(q);
}

double energy(const Lagrangian& l, const Vec3& q, const Vec3& v) { return lagrangian_jet(l, q, v).energy; }

Vec3 legendre(const Lagrangian& l, const Vec3& q, const Vec3& v) {
  const double conf = l.metric.factor(q);
  if (l.is_electromagnetic()) return v + tangent_part(q, l.drift.value(q)) / conf;
  Vec3 e1, e2;
  tangent_frame(q, e1, e2);
  const double h = 1e-6 * std::max(1.0, v.norm());
  const double d1 = (lagrangian_eval(l, q, v + h * e1) - lagrangian_eval(l, q, v - h * e1)) / (2 * h);
  const double d2 = (lagrangian_eval(l, q, v + h * e2) - lagrangian_eval(l, q, v - h * e2)) / (2 * h);
  return (d1 * e1 + d2 * e2) / conf;
}

double min_fiber_hessian_eigenvalue(const Lagrangian& l, const Vec3& q, const Vec3& v) {
  Vec3 e1, e2;
  tangent_frame(q, e1, e2);
  const double h = 1e-4 * std::max(1.0, v.norm());
  const auto L = [&](const Vec3& w) { return lagrangian_eval(l, q, w); };
  const double f0 = L(v);
  const double h11 = (L(v + h * e1) - 2 * f0 + L(v - h * e1)) / (h * h);
  const double h22 = (L(v + h * e2) - 2 * f0 + L(v - h * e2)) / (h * h);
  const double h12 =
      (L(v + h * e1 + h * e2) - L(v + h * e1 - h * e2) - L(v - h * e1 + h * e2) + L(v - h * e1 - h * e2)) /
      (4 * h * h);
  const double conf = l.metric.factor(q);
  const double tr = 0.5 * (h11 + h22);
  const double disc = std::sqrt(0.25 * (h11 - h22) * (h11 - h22) + h12 * h12);
  return (tr - disc) / conf;
}

double e0(const Lagrangian& l, int grid_depth) {
  if (grid_depth < 2) throw InvalidArgument("e0 grid depth must be >= 2");
  const auto rest_energy = [&l](const Vec3& q) { return energy(l, q, Vec3::Zero()); };
  const Icosphere mesh = make_icosphere(grid_depth);
  std::size_t arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const double v = rest_energy(mesh.vertices[i]);
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  return std::max(best, polish_max(rest_energy, mesh.vertices[arg]));
}

FiberBounds fiber_bounds(const Lagrangian& l, const TwoForm& sigma, int sample_count, std::uint64_t seed) {
  if (sample_count < 1000) throw InvalidArgument("fiber_bounds needs at least 1000 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double vmax = std::isfinite(l.extension_radius) ? 2.0 * l.extension_radius : 10.0;
  double min_eig = std::numeric_limits<double>::infinity();
  double max_ratio = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < sample_count; ++i) {
    const Vec3 q = random_sphere_point(rng);
    Vec3 e1, e2;
    tangent_frame(q, e1, e2);
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    // g-length uniform in [0, vmax]
    const double len = vmax * unit(rng) / std::sqrt(l.metric.factor(q));
    const Vec3 v = len * (std::cos(angle) * e1 + std::sin(angle) * e2);
    const double eig = min_fiber_hessian_eigenvalue(l, q, v);
    if (!(eig > 0.0)) throw NonConvexFiber("fiber Hessian is not positive definite at a sampled point");
    min_eig = std::min(min_eig, eig);
    const double g = l.metric.inner(q, v, v);
    max_ratio = std::max(max_ratio, lagrangian_eval(l, q, v) / (g + 1.0));
  }

  FiberBounds b;
  b.h1 = 0.5 * min_eig;
  b.h2 = std::max(1.1 * max_ratio, 1.1 * b.h1);

  // |d lambda + sigma| measured against dA_g.
  const auto form_norm = [&](const Vec3& q) {
    return std::abs(sigma.density.value(q) + l.drift.curl_density(q) / l.metric.factor(q));
  };
  const Icosphere mesh = make_icosphere(4);
  Vec3 arg = mesh.vertices.front();
  double best = -1.0;
  for (const Vec3& q : mesh.vertices) {
    const double v = form_norm(q);
    if (v > best) {
      best = v;
      arg = q;
    }
  }
  for (int i = 0; i < sample_count; ++i) {
    const Vec3 q = random_sphere_point(rng);
    const double v = form_norm(q);
    if (v > best) {
      best = v;
      arg = q;
    }
  }
  b.sup_norm_dlambda_plus_sigma = std::max(best, polish_max(form_norm, arg));
  return b;
}

}  // namespace magflow
