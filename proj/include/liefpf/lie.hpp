#pragma once

#include <Eigen/Core>
#include <functional>

#include "liefpf/quaternion.hpp"

namespace liefpf {

enum class GroupTag { SO2, SO3 };

/// Algebra dimension d: 1 for so(2), 3 for so(3).
constexpr int group_dim(GroupTag tag) { return tag == GroupTag::SO2 ? 1 : 3; }

/// Matrix side n of the defining representation.
constexpr int matrix_size(GroupTag tag) { return tag == GroupTag::SO2 ? 2 : 3; }

const char* group_name(GroupTag tag);

/// n-th algebra basis element (1-based), as an n x n matrix. SO(2): E.
/// SO(3): E1, E2, E3 (generators of rotations about e1, e2, e3). Throws
/// std::invalid_argument for an out-of-range index.
Eigen::MatrixXd algebra_basis(GroupTag tag, int n);

/// Tangent vector at identity in basis coordinates. Storage is a fixed
/// Vector3d; for SO(2) only coordinate 1 is live and the rest stay zero.
class AlgebraVector {
 public:
  AlgebraVector() : tag_(GroupTag::SO3), v_(Eigen::Vector3d::Zero()) {}
  AlgebraVector(GroupTag tag, const Eigen::Vector3d& v);

  static AlgebraVector zero(GroupTag tag);
  static AlgebraVector so2(double v);
  static AlgebraVector so3(double v1, double v2, double v3);
  /// From a d-dimensional coordinate vector; length must equal group_dim(tag).
  static AlgebraVector from_coords(GroupTag tag, const Eigen::VectorXd& coords);

  GroupTag tag() const { return tag_; }
  int dim() const { return group_dim(tag_); }

  /// 1-based coordinate access, mirroring the basis index convention.
  double coord(int n) const;

  /// Coordinates as a d-vector.
  Eigen::VectorXd coords() const;

  /// Fixed-size storage; SO(2) pads coordinates 2, 3 with zero.
  const Eigen::Vector3d& storage() const { return v_; }

  /// Matrix form sum_n v_n E_n (n x n).
  Eigen::MatrixXd matrix_form() const;

  double norm() const { return v_.norm(); }

 private:
  GroupTag tag_;
  Eigen::Vector3d v_;
};

/// Inner product <V, W> = (1/2) Tr(M(V)^T M(W)) = coordinate dot product.
/// Mixed tags throw std::invalid_argument.
double algebra_inner(const AlgebraVector& v, const AlgebraVector& w);

/// Group element with fixed 3x3 storage. SO(2) elements embed in the top-left
/// 2x2 block with storage(2,2) = 1, i.e. as the rotation about e3 by the same
/// phase; all group operations work uniformly on the 3x3 storage.
class GroupElement {
 public:
  GroupElement() : tag_(GroupTag::SO3), m_(Eigen::Matrix3d::Identity()) {}

  static GroupElement identity(GroupTag tag);
  /// Validates orthonormality and det = +1 to tolerance 1e-9.
  static GroupElement from_matrix(GroupTag tag, const Eigen::MatrixXd& m);
  /// Trusted constructor for values produced by the library itself.
  static GroupElement unchecked(GroupTag tag, const Eigen::Matrix3d& storage);
  static GroupElement from_phase(double theta);
  static GroupElement from_quaternion(const UnitQuaternion& q);

  GroupTag tag() const { return tag_; }
  /// The defining n x n matrix (copy).
  Eigen::MatrixXd matrix() const;
  const Eigen::Matrix3d& storage() const { return m_; }

  GroupElement inverse() const { return unchecked(tag_, m_.transpose()); }
  bool is_valid(double tol = 1e-9) const;

  friend GroupElement operator*(const GroupElement& a, const GroupElement& b);

 private:
  GroupTag tag_;
  Eigen::Matrix3d m_;
};

/// Exponential map. SO(2): planar rotation by the coordinate. SO(3): Rodrigues
/// with a series fallback below ||v|| = 1e-6.
GroupElement group_exp(const AlgebraVector& v);

/// Rodrigues formula on raw coordinates (so(3) only); hot-path kernel.
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& v);

/// Cross-product matrix sum_n v_n E_n.
Eigen::Matrix3d skew3(const Eigen::Vector3d& v);

/// Phase of an SO(2) element in [0, 2*pi). Throws InvariantViolation if the
/// element is not SO(2)-tagged or fails the orthonormality check.
double phase_from_so2(const GroupElement& x);

/// Wrap an angle to [0, 2*pi).
double wrap_phase(double theta);

/// Signed smallest angular difference a - b, in (-pi, pi].
double phase_difference(double a, double b);

/// Rotation matrix of a unit quaternion (Hamilton, scalar-first): the matrix
/// R with R(p*q) = R(p) R(q) and exp_half(v) -> so3_exp(v).
Eigen::Matrix3d quat_to_rotation(const UnitQuaternion& q);

/// Shepperd's method: branch on the largest of trace and diagonal entries for
/// numerical safety. Input must be a rotation to tolerance 1e-9 (throws
/// InvariantViolation otherwise). Returned sign follows the branch convention;
/// callers that need a canonical sign use UnitQuaternion::canonicalized().
UnitQuaternion rotation_to_quat(const Eigen::Matrix3d& r);

/// One polar-decomposition Newton step R <- R (3I - R^T R) / 2. Restores
/// orthonormality of a slightly drifted rotation (quadratic convergence).
Eigen::Matrix3d reorthonormalize(const Eigen::Matrix3d& r);

/// Embedding of S^1 as the e3-rotation circle in SO(3), quaternion form:
/// theta -> (cos(theta/2), 0, 0, sin(theta/2)).
UnitQuaternion quat_from_phase(double theta);

/// Inverse of quat_from_phase, sign-invariant, in [0, 2*pi). Only meaningful
/// for quaternions on (or numerically near) the e3 circle.
double phase_from_quat(const UnitQuaternion& q);

/// Geodesic distance on SO(3) through the double cover: 2 acos(|<a, b>|),
/// in [0, pi].
double quat_geodesic(const UnitQuaternion& a, const UnitQuaternion& b);

/// Geodesic distance between group elements: wrapped phase difference on
/// SO(2) (in [0, pi]), quat_geodesic on SO(3) (in [0, pi]). Mixed tags throw.
double error_metric(const GroupElement& a, const GroupElement& b);

/// Central-difference directional derivative of f at x along basis direction n
/// (1-based): (f(x exp(s E_n)) - f(x exp(-s E_n))) / (2 s). Numeric oracle for
/// closed-form derivative tables; error is O(s^2).
double directional_derivative(const std::function<double(const GroupElement&)>& f,
                              const GroupElement& x, int n, double step);

}  // namespace liefpf
