#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace magflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Scalar function on S^2 given by one of the named built-ins. Every built-in
// is the restriction of a polynomial on R^3, so `gradient` returns the
// ambient gradient; callers project it onto the tangent plane when needed.
//
//   constant(c)            f(q) = c
//   height(a, c)           f(q) = a z + c
//   zonal_poly(c0..ck)     f(q) = c0 + c1 z + ... + ck z^k
//   linear(ax, ay, az, c)  f(q) = <a, q> + c
class ScalarField {
 public:
  enum class Kind { kConstant, kHeight, kZonalPoly, kLinear };

  ScalarField() = default;

  static ScalarField constant(double c);
  static ScalarField height(double a, double c);
  static ScalarField zonal_poly(std::vector<double> coefficients);
  static ScalarField linear(const Vec3& a, double c);

  // Parses the textual form used in config files, e.g. "height(1, 0.2)".
  static ScalarField parse(const std::string& text);

  double value(const Vec3& q) const;
  Vec3 gradient(const Vec3& q) const;

  // Value as a function of the height z alone; only meaningful when zonal().
  double zonal_value(double z) const;

  bool zonal() const { return kind_ != Kind::kLinear || (a_.x() == 0.0 && a_.y() == 0.0); }
  bool identically_zero() const;

  ScalarField scaled(double factor) const;

  Kind kind() const { return kind_; }
  std::string to_string() const;

 private:
  Kind kind_ = Kind::kConstant;
  std::vector<double> coefficients_{0.0};  // constant / height / zonal_poly in powers of z
  Vec3 a_ = Vec3::Zero();                  // linear only
  double c_ = 0.0;                         // linear only
};

// A 1-form lambda on S^2 represented by an ambient vector field Lambda with
// lambda_q(v) = <Lambda(q), v>.
//
//   none             Lambda = 0
//   rotation(k)      Lambda(q) = k e_z x q           (d lambda = 2 k z dA)
//   gradient(a,b,c)  Lambda(q) = (a, b, c) constant  (exact, d lambda = 0)
class DriftField {
 public:
  enum class Kind { kNone, kRotation, kGradient };

  DriftField() = default;

  static DriftField none() { return {}; }
  static DriftField rotation(double k);
  static DriftField gradient(const Vec3& a);
  static DriftField parse(const std::string& text);

  Vec3 value(const Vec3& q) const;
  // d Lambda / d q.
  Mat3 jacobian(const Vec3& q) const;
  // Density of d lambda with respect to the round area form.
  double curl_density(const Vec3& q) const;

  bool is_none() const { return kind_ == Kind::kNone; }
  bool zonal() const { return kind_ != Kind::kGradient || (a_.x() == 0.0 && a_.y() == 0.0); }
  Kind kind() const { return kind_; }
  std::string to_string() const;

 private:
  Kind kind_ = Kind::kNone;
  double k_ = 0.0;
  Vec3 a_ = Vec3::Zero();
};

}  // namespace magflow
