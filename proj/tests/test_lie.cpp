#include "liefpf/lie.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "liefpf/errors.hpp"
#include "liefpf/noise.hpp"

using namespace liefpf;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent exponential: scaling and squaring over a 20-term Taylor series.
// Plain Taylor alone is not enough at ||v|| ~ pi; halving to ||v|| <= 0.25
// puts the series remainder far below 1e-15.
Eigen::Matrix3d exp_oracle(const Eigen::Vector3d& v) {
  Eigen::Matrix3d a;
  a << 0, -v(2), v(1), v(2), 0, -v(0), -v(1), v(0), 0;
  int squarings = 0;
  double norm = v.norm();
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  a *= std::ldexp(1.0, -squarings);
  Eigen::Matrix3d result = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k <= 20; ++k) {
    term = (term * a / static_cast<double>(k)).eval();
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = (result * result).eval();
  return result;
}

Eigen::Vector3d random_axis_angle(const NoiseStream& s, std::uint64_t k, double max_norm) {
  Eigen::Vector3d v(s.normal(k, 0), s.normal(k, 1), s.normal(k, 2));
  const double scale = max_norm * s.uniform(k, 3) / std::max(v.norm(), 1e-300);
  return v * scale;
}

double orthonormality_defect(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("algebra basis matrices") {
  const Eigen::MatrixXd e = algebra_basis(GroupTag::SO2, 1);
  CHECK(e.rows() == 2);
  CHECK(e(0, 0) == 0.0);
  CHECK(e(0, 1) == -1.0);
  CHECK(e(1, 0) == 1.0);
  CHECK(e(1, 1) == 0.0);

  Eigen::Matrix3d e1, e2, e3;
  e1 << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  e2 << 0, 0, 1, 0, 0, 0, -1, 0, 0;
  e3 << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  CHECK((algebra_basis(GroupTag::SO3, 1) - e1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((algebra_basis(GroupTag::SO3, 2) - e2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((algebra_basis(GroupTag::SO3, 3) - e3).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(algebra_basis(GroupTag::SO2, 2), std::invalid_argument);
  CHECK_THROWS_AS(algebra_basis(GroupTag::SO3, 0), std::invalid_argument);
  CHECK_THROWS_AS(algebra_basis(GroupTag::SO3, 4), std::invalid_argument);
}

TEST_CASE("algebra inner product equals (1/2) Tr(M^T M) and the coordinate dot") {
  const AlgebraVector v = AlgebraVector::so3(0.3, -1.2, 2.0);
  const AlgebraVector w = AlgebraVector::so3(-0.7, 0.4, 0.9);
  const double direct = 0.3 * -0.7 + -1.2 * 0.4 + 2.0 * 0.9;
  CHECK(algebra_inner(v, w) == doctest::Approx(direct).epsilon(1e-15));
  const double trace_form = 0.5 * (v.matrix_form().transpose() * w.matrix_form()).trace();
  CHECK(trace_form == doctest::Approx(direct).epsilon(1e-12));

  // so(3) basis is orthonormal in this inner product
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 3; ++j) {
      const double t =
          0.5 * (algebra_basis(GroupTag::SO3, i).transpose() * algebra_basis(GroupTag::SO3, j))
                    .trace();
      CHECK(t == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(algebra_inner(v, AlgebraVector::so2(1.0)), std::invalid_argument);
}

TEST_CASE("so2 exponential matches closed form") {
  const GroupElement half_turn = group_exp(AlgebraVector::so2(kPi));
  const Eigen::MatrixXd m = half_turn.matrix();
  CHECK(m(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(m(0, 1) == doctest::Approx(0.0).scale(1).epsilon(1e-15));
  CHECK(m(1, 0) == doctest::Approx(0.0).scale(1).epsilon(1e-15));
  CHECK(m(1, 1) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(phase_from_so2(GroupElement::from_phase(2.5)) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("so3_exp agrees with the series oracle and stays on the group") {
  const NoiseStream s(2024, NoiseDomain::TruthState, 0);
  double max_err = 0.0, max_defect = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector3d v = random_axis_angle(s, static_cast<std::uint64_t>(k), 10.0);
    const Eigen::Matrix3d r = so3_exp(v);
    max_err = std::max(max_err, (r - exp_oracle(v)).cwiseAbs().maxCoeff());
    max_defect = std::max(max_defect, orthonormality_defect(r));
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(max_err < 1e-12);
  CHECK(max_defect < 1e-13);
}

TEST_CASE("so3_exp small-angle series branch") {
  const Eigen::Vector3d v(3e-9, -4e-9, 1e-9);
  const Eigen::Matrix3d r = so3_exp(v);
  CHECK((r - exp_oracle(v)).cwiseAbs().maxCoeff() < 1e-18);
  CHECK(orthonormality_defect(so3_exp(Eigen::Vector3d::Zero())) == 0.0);
}

TEST_CASE("quaternion exponential is the double cover of so3_exp") {
  const NoiseStream s(7, NoiseDomain::TruthState, 1);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector3d v = random_axis_angle(s, static_cast<std::uint64_t>(k), 6.0);
    const UnitQuaternion q = UnitQuaternion::exp_half(v);
    CHECK(std::abs(q.norm() - 1.0) < 1e-15);
    CHECK((quat_to_rotation(q) - so3_exp(v)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("quaternion product maps to rotation product") {
  const NoiseStream s(8, NoiseDomain::TruthState, 2);
  for (int k = 0; k < 100; ++k) {
    const UnitQuaternion p =
        UnitQuaternion::exp_half(random_axis_angle(s, static_cast<std::uint64_t>(k), 3.0));
    const UnitQuaternion q =
        UnitQuaternion::exp_half(random_axis_angle(s, static_cast<std::uint64_t>(k + 1000), 3.0));
    const Eigen::Matrix3d lhs = quat_to_rotation(p * q);
    const Eigen::Matrix3d rhs = quat_to_rotation(p) * quat_to_rotation(q);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("rotation_to_quat round-trips through all Shepperd branches") {
  const Eigen::Vector3d probes[] = {
      {0.1, 0.2, 0.3},          // trace branch
      {kPi - 1e-3, 0, 0},       // x branch (trace near -1)
      {0, kPi - 1e-3, 0},       // y branch
      {0, 0, kPi - 1e-3},       // z branch
      {2.2, -2.0, 0.3},         // generic large
      {1e-9, -2e-9, 1.5e-9},    // near identity
  };
  for (const Eigen::Vector3d& v : probes) {
    const Eigen::Matrix3d r = so3_exp(v);
    const UnitQuaternion q = rotation_to_quat(r);
    CHECK(std::abs(q.norm() - 1.0) < 1e-15);
    CHECK((quat_to_rotation(q) - r).cwiseAbs().maxCoeff() < 1e-12);
    // sign-insensitive match against the direct quaternion
    const UnitQuaternion direct = UnitQuaternion::exp_half(v);
    CHECK(std::abs(std::abs(q.dot(direct)) - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(rotation_to_quat(2.0 * Eigen::Matrix3d::Identity()), InvariantViolation);
}

TEST_CASE("group element validation and embedding") {
  const GroupElement x = GroupElement::from_phase(1.2);
  CHECK(x.is_valid());
  CHECK(x.matrix().rows() == 2);
  // embedded storage is the rotation about e3 by the same phase
  CHECK((x.storage() - so3_exp(Eigen::Vector3d(0, 0, 1.2))).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(GroupElement::from_matrix(GroupTag::SO3, 1.1 * Eigen::Matrix3d::Identity()),
                  InvariantViolation);
  Eigen::MatrixXd reflect(2, 2);
  reflect << 1, 0, 0, -1;  // orthogonal, det -1
  CHECK_THROWS_AS(GroupElement::from_matrix(GroupTag::SO2, reflect), InvariantViolation);

  const GroupElement y = GroupElement::from_phase(0.7);
  CHECK(phase_from_so2(x * y) == doctest::Approx(1.9).epsilon(1e-14));
  CHECK(phase_from_so2(x.inverse()) == doctest::Approx(2.0 * kPi - 1.2).epsilon(1e-13));
}

TEST_CASE("wrap_phase and phase_difference") {
  CHECK(wrap_phase(-0.1) == doctest::Approx(2.0 * kPi - 0.1).epsilon(1e-15));
  CHECK(wrap_phase(2.0 * kPi) == 0.0);
  CHECK(wrap_phase(7.0) == doctest::Approx(7.0 - 2.0 * kPi).epsilon(1e-14));
  CHECK(phase_difference(0.1, 2.0 * kPi - 0.1) == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(phase_difference(2.0 * kPi - 0.1, 0.1) == doctest::Approx(-0.2).epsilon(1e-13));
  CHECK(phase_difference(3.0, 3.0) == 0.0);
  CHECK(phase_difference(kPi, 0.0) == doctest::Approx(kPi));  // boundary lands on +pi
}

TEST_CASE("circle embedding round-trips through the double cover") {
  for (double theta : {0.0, 0.5, kPi - 0.01, kPi + 0.01, 5.9}) {
    const UnitQuaternion q = quat_from_phase(theta);
    CHECK(phase_from_quat(q) == doctest::Approx(theta).epsilon(1e-13));
    // negated representative maps to the same phase
    const UnitQuaternion minus{-q.w, -q.x, -q.y, -q.z};
    CHECK(phase_from_quat(minus) == doctest::Approx(theta).epsilon(1e-13));
    // and the embedded rotation agrees with the SO(2) storage
    CHECK((quat_to_rotation(q) - GroupElement::from_phase(theta).storage()).cwiseAbs().maxCoeff() <
          1e-14);
  }
}

TEST_CASE("error metric is the geodesic distance") {
  const GroupElement a = GroupElement::from_phase(0.3);
  const GroupElement b = GroupElement::from_phase(2.0 * kPi - 0.2);
  CHECK(error_metric(a, b) == doctest::Approx(0.5).epsilon(1e-13));

  const Eigen::Vector3d axis = Eigen::Vector3d(1, 2, -1).normalized();
  for (double angle : {0.0, 0.4, 1.7, 3.0}) {
    const GroupElement r = GroupElement::from_matrix(GroupTag::SO3, so3_exp(angle * axis));
    CHECK(error_metric(GroupElement::identity(GroupTag::SO3), r) ==
          doctest::Approx(angle).epsilon(1e-12).scale(1));
  }
  CHECK(quat_geodesic(quat_from_phase(0.0), quat_from_phase(0.0)) == 0.0);
  CHECK_THROWS_AS(error_metric(a, GroupElement::identity(GroupTag::SO3)), std::invalid_argument);
}

TEST_CASE("reorthonormalize repairs small drift quadratically") {
  const Eigen::Matrix3d r = so3_exp(Eigen::Vector3d(0.4, -0.8, 1.1));
  Eigen::Matrix3d drifted = r;
  drifted(0, 1) += 3e-6;
  drifted(2, 2) -= 2e-6;
  CHECK(orthonormality_defect(drifted) > 1e-6);
  const Eigen::Matrix3d fixed = reorthonormalize(drifted);
  CHECK(orthonormality_defect(fixed) < 1e-10);  // ~defect^2 from one Newton step
  CHECK((fixed - r).cwiseAbs().maxCoeff() < 1e-5);  // stays near the original rotation
}

TEST_CASE("directional derivative converges at second order") {
  const GroupElement x = GroupElement::from_matrix(GroupTag::SO3, so3_exp({0.9, -0.4, 0.7}));
  const auto f = [](const GroupElement& g) { return g.storage()(0, 0); };
  for (int n = 1; n <= 3; ++n) {
    const double d1 = directional_derivative(f, x, n, 0.02);
    const double d2 = directional_derivative(f, x, n, 0.01);
    const double d3 = directional_derivative(f, x, n, 0.005);
    const double e1 = std::abs(d1 - d2);
    const double e2 = std::abs(d2 - d3);
    if (e1 > 1e-10) {
      // error ~ C s^2, so consecutive halving differences shrink by 4
      CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
    }
  }
  CHECK_THROWS_AS(directional_derivative(f, x, 4, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(directional_derivative(f, x, 1, 0.0), std::invalid_argument);
}
