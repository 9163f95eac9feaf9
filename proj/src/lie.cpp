#include "liefpf/lie.hpp"

#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

#include "liefpf/errors.hpp"

namespace liefpf {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_tag_match(GroupTag a, GroupTag b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": group tags differ");
}

}  // namespace

const char* group_name(GroupTag tag) { return tag == GroupTag::SO2 ? "SO2" : "SO3"; }

Eigen::MatrixXd algebra_basis(GroupTag tag, int n) {
  if (n < 1 || n > group_dim(tag)) {
    throw std::invalid_argument("algebra_basis: index out of range for " +
                                std::string(group_name(tag)));
  }
  if (tag == GroupTag::SO2) {
    Eigen::MatrixXd e(2, 2);
    e << 0, -1, 1, 0;
    return e;
  }
  Eigen::Vector3d unit = Eigen::Vector3d::Zero();
  unit(n - 1) = 1.0;
  return skew3(unit);
}

AlgebraVector::AlgebraVector(GroupTag tag, const Eigen::Vector3d& v) : tag_(tag), v_(v) {
  if (tag == GroupTag::SO2 && (v(1) != 0.0 || v(2) != 0.0)) {
    throw std::invalid_argument("AlgebraVector: SO2 vector has one coordinate");
  }
}

AlgebraVector AlgebraVector::zero(GroupTag tag) { return AlgebraVector(tag, Eigen::Vector3d::Zero()); }

AlgebraVector AlgebraVector::so2(double v) { return AlgebraVector(GroupTag::SO2, {v, 0.0, 0.0}); }

AlgebraVector AlgebraVector::so3(double v1, double v2, double v3) {
  return AlgebraVector(GroupTag::SO3, {v1, v2, v3});
}

AlgebraVector AlgebraVector::from_coords(GroupTag tag, const Eigen::VectorXd& coords) {
  if (coords.size() != group_dim(tag)) {
    throw std::invalid_argument("AlgebraVector: coordinate length does not match group dimension");
  }
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (int i = 0; i < coords.size(); ++i) v(i) = coords(i);
  return AlgebraVector(tag, v);
}

double AlgebraVector::coord(int n) const {
  if (n < 1 || n > dim()) throw std::invalid_argument("AlgebraVector: coordinate index out of range");
  return v_(n - 1);
}

Eigen::VectorXd AlgebraVector::coords() const { return v_.head(dim()); }

Eigen::MatrixXd AlgebraVector::matrix_form() const {
  if (tag_ == GroupTag::SO2) {
    Eigen::MatrixXd m(2, 2);
    m << 0, -v_(0), v_(0), 0;
    return m;
  }
  return skew3(v_);
}

double algebra_inner(const AlgebraVector& v, const AlgebraVector& w) {
  check_tag_match(v.tag(), w.tag(), "algebra_inner");
  return v.storage().dot(w.storage());
}

GroupElement GroupElement::identity(GroupTag tag) {
  return unchecked(tag, Eigen::Matrix3d::Identity());
}

GroupElement GroupElement::from_matrix(GroupTag tag, const Eigen::MatrixXd& m) {
  const int n = matrix_size(tag);
  if (m.rows() != n || m.cols() != n) {
    throw std::invalid_argument("GroupElement: matrix size does not match group tag");
  }
  Eigen::Matrix3d storage = Eigen::Matrix3d::Identity();
  storage.topLeftCorner(n, n) = m;
  GroupElement x = unchecked(tag, storage);
  if (!x.is_valid()) throw InvariantViolation("GroupElement: matrix is not a rotation");
  return x;
}

GroupElement GroupElement::unchecked(GroupTag tag, const Eigen::Matrix3d& storage) {
  GroupElement x;
  x.tag_ = tag;
  x.m_ = storage;
  return x;
}

GroupElement GroupElement::from_phase(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  return unchecked(GroupTag::SO2, m);
}

GroupElement GroupElement::from_quaternion(const UnitQuaternion& q) {
  return unchecked(GroupTag::SO3, quat_to_rotation(q));
}

Eigen::MatrixXd GroupElement::matrix() const {
  const int n = matrix_size(tag_);
  return m_.topLeftCorner(n, n);
}

bool GroupElement::is_valid(double tol) const {
  const Eigen::Matrix3d gram = m_.transpose() * m_ - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(m_.determinant() - 1.0) > tol) return false;
  if (tag_ == GroupTag::SO2) {
    // Embedded SO(2) keeps the third row/column at (0, 0, 1).
    if (std::abs(m_(2, 2) - 1.0) > tol) return false;
    if (std::abs(m_(0, 2)) > tol || std::abs(m_(1, 2)) > tol) return false;
    if (std::abs(m_(2, 0)) > tol || std::abs(m_(2, 1)) > tol) return false;
  }
  return true;
}

GroupElement operator*(const GroupElement& a, const GroupElement& b) {
  check_tag_match(a.tag(), b.tag(), "GroupElement product");
  return GroupElement::unchecked(a.tag(), a.m_ * b.m_);
}

Eigen::Matrix3d skew3(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& v) {
  const double a = v.norm();
  const Eigen::Matrix3d k = skew3(v);
  double c1;  // sin(a)/a
  double c2;  // (1 - cos(a))/a^2
  if (a < 1e-6) {
    const double a2 = a * a;
    c1 = 1.0 - a2 / 6.0;
    c2 = 0.5 - a2 / 24.0;
  } else {
    c1 = std::sin(a) / a;
    c2 = (1.0 - std::cos(a)) / (a * a);
  }
  return Eigen::Matrix3d::Identity() + c1 * k + c2 * (k * k);
}

GroupElement group_exp(const AlgebraVector& v) {
  if (v.tag() == GroupTag::SO2) return GroupElement::from_phase(v.storage()(0));
  return GroupElement::unchecked(GroupTag::SO3, so3_exp(v.storage()));
}

double wrap_phase(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;  // fmod rounding can land exactly on 2*pi
  return t;
}

double phase_difference(double a, double b) {
  double d = std::remainder(a - b, kTwoPi);
  if (d <= -3.14159265358979323846) d = 3.14159265358979323846;
  return d;
}

double phase_from_so2(const GroupElement& x) {
  if (x.tag() != GroupTag::SO2) throw InvariantViolation("phase_from_so2: not an SO2 element");
  if (!x.is_valid()) throw InvariantViolation("phase_from_so2: element fails rotation invariants");
  return wrap_phase(std::atan2(x.storage()(1, 0), x.storage()(0, 0)));
}

Eigen::Matrix3d quat_to_rotation(const UnitQuaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d r;
  r << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return r;
}

UnitQuaternion rotation_to_quat(const Eigen::Matrix3d& r) {
  {
    const Eigen::Matrix3d gram = r.transpose() * r - Eigen::Matrix3d::Identity();
    if (gram.cwiseAbs().maxCoeff() > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9) {
      throw InvariantViolation("rotation_to_quat: input is not a rotation");
    }
  }
  const double tr = r.trace();
  UnitQuaternion q;
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    const double s = std::sqrt(tr + 1.0) * 2.0;  // 4 q.w
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;  // 4 q.x
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = std::sqrt(1.0 - r(0, 0) + r(1, 1) - r(2, 2)) * 2.0;  // 4 q.y
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = std::sqrt(1.0 - r(0, 0) - r(1, 1) + r(2, 2)) * 2.0;  // 4 q.z
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

Eigen::Matrix3d reorthonormalize(const Eigen::Matrix3d& r) {
  return r * (3.0 * Eigen::Matrix3d::Identity() - r.transpose() * r) * 0.5;
}

UnitQuaternion quat_from_phase(double theta) {
  return UnitQuaternion{std::cos(0.5 * theta), 0.0, 0.0, std::sin(0.5 * theta)};
}

double phase_from_quat(const UnitQuaternion& q) {
  // atan2(z, w) halves the double cover; scaling by 2 restores the phase, and
  // (w, z) -> (-w, -z) lands on the same wrapped value.
  return wrap_phase(2.0 * std::atan2(q.z, q.w));
}

double quat_geodesic(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

double error_metric(const GroupElement& a, const GroupElement& b) {
  if (a.tag() != b.tag()) throw std::invalid_argument("error_metric: mixed group tags");
  if (a.tag() == GroupTag::SO2) {
    return std::abs(phase_difference(phase_from_so2(a), phase_from_so2(b)));
  }
  return quat_geodesic(rotation_to_quat(a.storage()), rotation_to_quat(b.storage()));
}

double directional_derivative(const std::function<double(const GroupElement&)>& f,
                              const GroupElement& x, int n, double step) {
  if (step <= 0.0) throw std::invalid_argument("directional_derivative: step must be positive");
  if (n < 1 || n > group_dim(x.tag())) {
    throw std::invalid_argument("directional_derivative: basis index out of range");
  }
  Eigen::Vector3d unit = Eigen::Vector3d::Zero();
  unit(n - 1) = 1.0;
  const AlgebraVector plus(x.tag(), step * unit);
  const AlgebraVector minus(x.tag(), -step * unit);
  return (f(x * group_exp(plus)) - f(x * group_exp(minus))) / (2.0 * step);
}

}  // namespace liefpf
