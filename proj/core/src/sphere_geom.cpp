#include "magflow/sphere_geom.hpp"

#include <algorithm>
#include <map>
#include <numbers>

#include "magflow/errors.hpp"

namespace magflow {

SpherePoint project_to_sphere(const Vec3& x) {
  const double n = x.norm();
  if (!(n > 1e-9)) throw NearZeroVector("cannot project a vector of norm <= 1e-9 to the sphere");
  return SpherePoint::unchecked(x / n);
}

double angular_distance(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Vec3 sphere_log(const Vec3& a, const Vec3& b) {
  const Vec3 w = tangent_part(a, b);
  const double s = w.norm();
  if (s == 0.0) return Vec3::Zero();
  return w * (std::atan2(s, a.dot(b)) / s);
}

Vec3 sphere_exp(const Vec3& q, const Vec3& w) {
  const double n = w.norm();
  if (n == 0.0) return q;
  return (std::cos(n) * q + std::sin(n) * (w / n)).normalized();
}

Vec3 slerp(const Vec3& a, const Vec3& b, double t) { return sphere_exp(a, t * sphere_log(a, b)); }

double two_form_eval(const TwoForm& sigma, const SpherePoint& q, const Vec3& v, const Vec3& w) {
  const Vec3& x = q.vec();
  return sigma.round_density(x) * x.dot(v.cross(w));
}

double signed_spherical_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double det = a.dot(b.cross(c));
  const double sa = angular_distance(b, c);
  const double sb = angular_distance(c, a);
  const double sc = angular_distance(a, b);
  const double s = 0.5 * (sa + sb + sc);
  const double prod = std::tan(0.5 * s) * std::tan(0.5 * (s - sa)) * std::tan(0.5 * (s - sb)) *
                      std::tan(0.5 * (s - sc));
  double area = 4.0 * std::atan(std::sqrt(std::max(prod, 0.0)));
  if (area < 1e-14) area = 0.5 * (b - a).cross(c - a).norm();
  return det < 0.0 ? -area : area;
}

namespace detail {

LineRule gauss_legendre(int n) {
  LineRule r;
  r.x.resize(n);
  r.w.resize(n);
  // Newton iteration on P_n.
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = z;
    r.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

const TriangleRule& triangle_rule() {
  static const TriangleRule rule = [] {
    constexpr int n = TriangleRule::kOrder;
    const LineRule line = gauss_legendre(n);
    const auto& x = line.x;
    const auto& w = line.w;
    // Collapsed (Duffy) product rule on {s, t >= 0, s + t <= 1}:
    //   s = u, t = (1 - u) v, ds dt = (1 - u) du dv.
    TriangleRule r;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double u = 0.5 * (x[i] + 1.0);
        const double v = 0.5 * (x[j] + 1.0);
        const int k = i * n + j;
        r.s[k] = u;
        r.t[k] = (1.0 - u) * v;
        r.w[k] = 0.25 * w[i] * w[j] * (1.0 - u);
      }
    }
    return r;
  }();
  return rule;
}

void check_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  constexpr double kLimit = std::numbers::pi - 1e-9;
  if (angular_distance(a, b) >= kLimit || angular_distance(b, c) >= kLimit ||
      angular_distance(c, a) >= kLimit) {
    throw DegenerateTriangle("spherical triangle has (nearly) antipodal vertices");
  }
}

}  // namespace detail

double integrate_two_form_triangle(const TwoForm& sigma, const SphericalTriangle& tri, int depth) {
  if (depth < 0) throw InvalidArgument("quadrature depth must be >= 0");
  detail::check_triangle(tri.a.vec(), tri.b.vec(), tri.c.vec());
  if (sigma.density.identically_zero()) return 0.0;
  const auto density = [&sigma](const Vec3& q) { return sigma.round_density(q); };
  return integrate_density_triangle(density, tri.a.vec(), tri.b.vec(), tri.c.vec(), depth);
}

Icosphere make_icosphere(int depth) {
  Icosphere mesh;
  const double z = 1.0 / std::sqrt(5.0);
  const double r = 2.0 / std::sqrt(5.0);
  mesh.vertices.emplace_back(0.0, 0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / 5.0;
    mesh.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  for (int i = 0; i < 5; ++i) {
    const double phi = 2.0 * std::numbers::pi * (i + 0.5) / 5.0;
    mesh.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi), -z);
  }
  mesh.vertices.emplace_back(0.0, 0.0, -1.0);
  for (int i = 0; i < 5; ++i) {
    const int u0 = 1 + i, u1 = 1 + (i + 1) % 5;
    const int l0 = 6 + i, l1 = 6 + (i + 1) % 5;
    mesh.faces.push_back({0, u0, u1});
    mesh.faces.push_back({u0, l0, u1});
    mesh.faces.push_back({u1, l0, l1});
    mesh.faces.push_back({11, l1, l0});
  }
  for (auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    if (a.dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]])) < 0.0) std::swap(f[1], f[2]);
  }

  for (int level = 0; level < depth; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int i, int j) {
      const auto key = std::minmax(i, j);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[i] + mesh.vertices[j]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({ab, f[1], bc});
      next.push_back({ca, bc, f[2]});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  return mesh;
}

double total_flux(const TwoForm& sigma, int depth) {
  if (depth < 2) throw InvalidArgument("total_flux needs depth >= 2");
  if (sigma.density.identically_zero()) return 0.0;
  const Icosphere mesh = make_icosphere(2);
  const auto density = [&sigma](const Vec3& q) { return sigma.round_density(q); };
  double sum = 0.0;
  for (const auto& f : mesh.faces) {
    sum += integrate_density_triangle(density, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                      mesh.vertices[f[2]], depth - 2);
  }
  return sum;
}

}  // namespace magflow
