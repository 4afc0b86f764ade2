#include "magflow/scalar_field.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "magflow/errors.hpp"

namespace magflow {
namespace {

// Splits "name(a, b, c)" into a name and its numeric arguments.
void split_call(const std::string& text, std::string& name, std::vector<double>& args) {
  std::string s;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  }
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') {
    name = s;
    args.clear();
    return;
  }
  name = s.substr(0, open);
  args.clear();
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  if (inner.empty()) return;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: '" + item + "' in '" + text + "'");
    }
    if (used != item.size()) throw InvalidArgument("not a number: '" + item + "' in '" + text + "'");
    args.push_back(v);
  }
}

std::string join(const std::vector<double>& xs) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ", ";
    os << xs[i];
  }
  return os.str();
}

}  // namespace

ScalarField ScalarField::constant(double c) {
  ScalarField f;
  f.kind_ = Kind::kConstant;
  f.coefficients_ = {c};
  return f;
}

ScalarField ScalarField::height(double a, double c) {
  ScalarField f;
  f.kind_ = Kind::kHeight;
  f.coefficients_ = {c, a};
  return f;
}

ScalarField ScalarField::zonal_poly(std::vector<double> coefficients) {
  if (coefficients.empty()) throw InvalidArgument("zonal_poly needs at least one coefficient");
  ScalarField f;
  f.kind_ = Kind::kZonalPoly;
  f.coefficients_ = std::move(coefficients);
  return f;
}

ScalarField ScalarField::linear(const Vec3& a, double c) {
  ScalarField f;
  f.kind_ = Kind::kLinear;
  f.coefficients_ = {};
  f.a_ = a;
  f.c_ = c;
  return f;
}

ScalarField ScalarField::parse(const std::string& text) {
  std::string name;
  std::vector<double> args;
  split_call(text, name, args);
  if (name == "constant" && args.size() == 1) return constant(args[0]);
  if (name == "height" && args.size() == 2) return height(args[0], args[1]);
  if (name == "zonal_poly" && !args.empty()) return zonal_poly(args);
  if (name == "linear" && args.size() == 4) return linear(Vec3(args[0], args[1], args[2]), args[3]);
  throw InvalidArgument("unknown scalar field '" + text +
                        "' (expected constant(c), height(a,c), zonal_poly(c0..ck) or linear(ax,ay,az,c))");
}

double ScalarField::zonal_value(double z) const {
  if (kind_ == Kind::kLinear) return a_.z() * z + c_;
  // Horner in z.
  double acc = 0.0;
  for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

double ScalarField::value(const Vec3& q) const {
  if (kind_ == Kind::kLinear) return a_.dot(q) + c_;
  return zonal_value(q.z());
}

Vec3 ScalarField::gradient(const Vec3& q) const {
  if (kind_ == Kind::kLinear) return a_;
  double d = 0.0;
  const double z = q.z();
  for (std::size_t k = coefficients_.size(); k-- > 1;) d = d * z + static_cast<double>(k) * coefficients_[k];
  return Vec3(0.0, 0.0, d);
}

bool ScalarField::identically_zero() const {
  if (kind_ == Kind::kLinear) return a_.isZero(0.0) && c_ == 0.0;
  for (double c : coefficients_) {
    if (c != 0.0) return false;
  }
  return true;
}

ScalarField ScalarField::scaled(double factor) const {
  ScalarField f = *this;
  for (double& c : f.coefficients_) c *= factor;
  f.a_ *= factor;
  f.c_ *= factor;
  return f;
}

std::string ScalarField::to_string() const {
  switch (kind_) {
    case Kind::kConstant:
      return "constant(" + join({coefficients_[0]}) + ")";
    case Kind::kHeight:
      return "height(" + join({coefficients_[1], coefficients_[0]}) + ")";
    case Kind::kZonalPoly:
      return "zonal_poly(" + join(coefficients_) + ")";
    case Kind::kLinear:
      return "linear(" + join({a_.x(), a_.y(), a_.z(), c_}) + ")";
  }
  return {};
}

DriftField DriftField::rotation(double k) {
  DriftField d;
  d.kind_ = Kind::kRotation;
  d.k_ = k;
  return d;
}

DriftField DriftField::gradient(const Vec3& a) {
  DriftField d;
  d.kind_ = Kind::kGradient;
  d.a_ = a;
  return d;
}

DriftField DriftField::parse(const std::string& text) {
  std::string name;
  std::vector<double> args;
  split_call(text, name, args);
  if ((name == "none" || name == "zero") && args.empty()) return none();
  if (name == "rotation" && args.size() == 1) return rotation(args[0]);
  if (name == "gradient" && args.size() == 3) return gradient(Vec3(args[0], args[1], args[2]));
  throw InvalidArgument("unknown drift '" + text + "' (expected none, rotation(k) or gradient(a,b,c))");
}

Vec3 DriftField::value(const Vec3& q) const {
  switch (kind_) {
    case Kind::kNone:
      return Vec3::Zero();
    case Kind::kRotation:
      return k_ * Vec3::UnitZ().cross(q);
    case Kind::kGradient:
      return a_;
  }
  return Vec3::Zero();
}

Mat3 DriftField::jacobian(const Vec3& /*q*/) const {
  Mat3 j = Mat3::Zero();
  if (kind_ == Kind::kRotation) {
    // e_z x q = (-y, x, 0)
    j(0, 1) = -k_;
    j(1, 0) = k_;
  }
  return j;
}

double DriftField::curl_density(const Vec3& q) const {
  return kind_ == Kind::kRotation ? 2.0 * k_ * q.z() : 0.0;
}

std::string DriftField::to_string() const {
  switch (kind_) {
    case Kind::kNone:
      return "none";
    case Kind::kRotation:
      return "rotation(" + join({k_}) + ")";
    case Kind::kGradient:
      return "gradient(" + join({a_.x(), a_.y(), a_.z()}) + ")";
  }
  return {};
}

}  // namespace magflow
