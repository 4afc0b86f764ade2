#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "magflow/scalar_field.hpp"

namespace magflow {

// Point of the unit sphere in R^3. Construct through project_to_sphere (or
// SpherePoint::unchecked when the caller already normalized).
class SpherePoint {
 public:
  SpherePoint() : x_(Vec3::UnitZ()) {}

  static SpherePoint unchecked(const Vec3& x) { return SpherePoint(x); }

  const Vec3& vec() const { return x_; }
  double x() const { return x_.x(); }
  double y() const { return x_.y(); }
  double z() const { return x_.z(); }

  friend bool operator==(const SpherePoint& a, const SpherePoint& b) { return a.x_ == b.x_; }

 private:
  explicit SpherePoint(const Vec3& x) : x_(x) {}
  Vec3 x_;
};

struct TangentVector {
  SpherePoint base;
  Vec3 v = Vec3::Zero();
};

// Base point of the universal-cover construction.
inline SpherePoint base_point() { return SpherePoint::unchecked(Vec3(-1.0, 0.0, 0.0)); }

// Throws NearZeroVector when |x| <= 1e-9.
SpherePoint project_to_sphere(const Vec3& x);

// Orthogonal projection of w onto T_q S^2.
inline Vec3 tangent_part(const Vec3& q, const Vec3& w) { return w - q * q.dot(w); }

// Great-circle distance.
double angular_distance(const Vec3& a, const Vec3& b);

// Riemannian logarithm on the round sphere (tangent vector at a pointing to b
// with length angular_distance(a, b)). a and b must not be antipodal.
Vec3 sphere_log(const Vec3& a, const Vec3& b);

// Point reached from q along the great circle with initial tangent w, |w| = arc length.
Vec3 sphere_exp(const Vec3& q, const Vec3& w);

// Geodesic interpolation between non-antipodal points, t in [0, 1].
Vec3 slerp(const Vec3& a, const Vec3& b, double t);

// Round metric (u == 0) or conformal metric g = e^{2u} g_round.
struct Metric {
  enum class Kind { kRound, kConformal };

  Kind kind = Kind::kRound;
  ScalarField conformal_exponent = ScalarField::constant(0.0);

  static Metric round() { return {}; }
  static Metric conformal(ScalarField u) { return {Kind::kConformal, std::move(u)}; }

  bool is_round() const { return kind == Kind::kRound; }

  // e^{2u(q)}
  double factor(const Vec3& q) const {
    return is_round() ? 1.0 : std::exp(2.0 * conformal_exponent.value(q));
  }
  // Ambient gradient of u.
  Vec3 exponent_gradient(const Vec3& q) const {
    return is_round() ? Vec3::Zero() : conformal_exponent.gradient(q);
  }
  double inner(const Vec3& q, const Vec3& v, const Vec3& w) const { return factor(q) * v.dot(w); }
};

// sigma = f dA_g.
struct TwoForm {
  ScalarField density = ScalarField::constant(0.0);
  Metric metric;

  // Density of sigma with respect to the round area form, f e^{2u}.
  double round_density(const Vec3& q) const { return density.value(q) * metric.factor(q); }
};

double two_form_eval(const TwoForm& sigma, const SpherePoint& q, const Vec3& v, const Vec3& w);

// Geodesic triangle; vertex order is the orientation.
struct SphericalTriangle {
  SpherePoint a, b, c;
};

// Signed area of the geodesic triangle: l'Huilier magnitude, sign of <a, b x c>.
double signed_spherical_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Integral of the round density over the flat triangle (a, b, c) pulled back
// through central projection, without the det(a, b, c) prefactor:
//
//   flux(a, b, c) = det(a, b, c) * projected_density_integral(a, b, c)
//
// The formula is exact for the geodesic triangle; the integral is computed
// with a collapsed Gauss-Legendre rule. It stays well defined (and smooth) for
// degenerate triangles, which is what the loop-space gradient relies on.
template <class Density>
double projected_density_integral(const Density& density, const Vec3& a, const Vec3& b, const Vec3& c);

// Single-leaf flux of one small triangle.
template <class Density>
double leaf_flux(const Density& density, const Vec3& a, const Vec3& b, const Vec3& c) {
  const double det = a.dot(b.cross(c));
  if (det == 0.0) return 0.0;
  return det * projected_density_integral(density, a, b, c);
}

// Recursive 4-way geodesic-midpoint subdivision to `depth`, leaf rule above.
// Throws DegenerateTriangle if two vertices are (nearly) antipodal.
double integrate_two_form_triangle(const TwoForm& sigma, const SphericalTriangle& tri, int depth);

// Same, with the density given as any callable q -> round density.
template <class Density>
double integrate_density_triangle(const Density& density, const Vec3& a, const Vec3& b, const Vec3& c,
                                  int depth);

// Icosahedron with vertices at both poles, refined `depth` times and
// projected to the sphere. Faces are positively oriented.
struct Icosphere {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};
Icosphere make_icosphere(int depth);

// Integral of sigma over S^2 on the depth-`depth` icosahedral triangulation
// (faces of the depth-2 mesh, each integrated recursively). depth >= 2.
double total_flux(const TwoForm& sigma, int depth = 6);

// ---------------------------------------------------------------------------

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1].
struct LineRule {
  std::vector<double> x, w;
};
LineRule gauss_legendre(int n);

struct TriangleRule {
  static constexpr int kOrder = 5;
  std::array<double, kOrder * kOrder> s{}, t{}, w{};
};
const TriangleRule& triangle_rule();

void check_triangle(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace detail

template <class Density>
double projected_density_integral(const Density& density, const Vec3& a, const Vec3& b, const Vec3& c) {
  const auto& rule = detail::triangle_rule();
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.w.size(); ++k) {
    const Vec3 x = a + rule.s[k] * e1 + rule.t[k] * e2;
    const double r2 = x.squaredNorm();
    const double r = std::sqrt(r2);
    acc += rule.w[k] * density(x / r) / (r2 * r);
  }
  return acc;
}

template <class Density>
double integrate_density_triangle(const Density& density, const Vec3& a, const Vec3& b, const Vec3& c,
                                  int depth) {
  if (depth <= 0) return leaf_flux(density, a, b, c);
  const Vec3 ab = (a + b).normalized();
  const Vec3 bc = (b + c).normalized();
  const Vec3 ca = (c + a).normalized();
  return integrate_density_triangle(density, a, ab, ca, depth - 1) +
         integrate_density_triangle(density, ab, b, bc, depth - 1) +
         integrate_density_triangle(density, ca, bc, c, depth - 1) +
         integrate_density_triangle(density, ab, bc, ca, depth - 1);
}

}  // namespace magflow
