#pragma once

#include <Eigen/Core>
#include <cmath>

namespace liefpf {

/// Unit quaternion, scalar-first layout q = (w, x, y, z), Hamilton product.
/// q and -q denote the same rotation; nothing here canonicalizes the sign
/// except canonicalized(), which callers use for stable reporting.
struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static UnitQuaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

  /// Exact exponential increment: exp_half(v) = (cos(|v|/2), sin(|v|/2) v/|v|).
  /// Right-multiplying by this advances a body-frame rotation by the algebra
  /// increment v.
  static UnitQuaternion exp_half(const Eigen::Vector3d& v) {
    const double a = v.norm();
    double s;  // sin(a/2)/a, with series for small angles
    if (a < 1e-8) {
      s = 0.5 - a * a / 48.0;
    } else {
      s = std::sin(0.5 * a) / a;
    }
    return {std::cos(0.5 * a), s * v.x(), s * v.y(), s * v.z()};
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  double dot(const UnitQuaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }

  UnitQuaternion normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  /// Same rotation, with the leading nonzero component made positive.
  UnitQuaternion canonicalized() const {
    const double lead = (w != 0.0) ? w : (x != 0.0 ? x : (y != 0.0 ? y : z));
    if (lead < 0.0) return {-w, -x, -y, -z};
    return *this;
  }

  Eigen::Vector4d coeffs() const { return {w, x, y, z}; }
};

inline UnitQuaternion operator*(const UnitQuaternion& p, const UnitQuaternion& q) {
  return {
      p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
      p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
      p.w * q.y + p.y * q.w + p.z * q.x - p.x * q.z,
      p.w * q.z + p.z * q.w + p.x * q.y - p.y * q.x,
  };
}

}  // namespace liefpf
