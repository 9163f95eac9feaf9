#include "liefpf/galerkin.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "liefpf/errors.hpp"
#include "liefpf/noise.hpp"

using namespace liefpf;

namespace {

constexpr double kPi = std::numbers::pi;

GroupElement random_so3(const NoiseStream& s, std::uint64_t k) {
  const Eigen::Vector3d v(s.normal(k, 0), s.normal(k, 1), s.normal(k, 2));
  return GroupElement::from_matrix(GroupTag::SO3, so3_exp(v));
}

std::vector<GroupElement> random_ensemble(GroupTag tag, std::size_t n, std::uint64_t seed) {
  const NoiseStream s(seed, NoiseDomain::FpfPrior, 0);
  std::vector<GroupElement> states;
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (tag == GroupTag::SO2) {
      states.push_back(GroupElement::from_phase(2.0 * kPi * s.uniform(i, 7)));
    } else {
      states.push_back(random_so3(s, i));
    }
  }
  return states;
}

}  // namespace

TEST_CASE("fourier basis values on the circle") {
  const BasisSet basis(BasisId::Fourier1So2);
  CHECK(basis.count() == 2);
  CHECK(basis.dim() == 1);
  const BasisEval e = basis.evaluate_phase(0.6);
  CHECK(e.psi(0) == doctest::Approx(std::sin(0.6)).epsilon(1e-15));
  CHECK(e.psi(1) == doctest::Approx(std::cos(0.6)).epsilon(1e-15));
  CHECK(e.deriv(0, 0) == doctest::Approx(std::cos(0.6)).epsilon(1e-15));
  CHECK(e.deriv(0, 1) == doctest::Approx(-std::sin(0.6)).epsilon(1e-15));
  // unused slots stay zero
  CHECK(e.psi(2) == 0.0);
  CHECK(e.deriv(1, 0) == 0.0);
  // phase evaluation agrees with the group-element path
  const BasisEval g = basis.evaluate(GroupElement::from_phase(0.6));
  CHECK((e.psi - g.psi).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((e.deriv - g.deriv).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("closed-form derivatives match the finite-difference oracle") {
  const NoiseStream s(11, NoiseDomain::TruthState, 5);
  for (BasisId id : {BasisId::Fourier1So2, BasisId::MatrixSo3, BasisId::QuaternionSo3}) {
    const BasisSet basis(id);
    double max_err = 0.0;
    for (int k = 0; k < 50; ++k) {
      const GroupElement x = basis.tag() == GroupTag::SO2
                                 ? GroupElement::from_phase(2.0 * kPi * s.uniform(k, 9))
                                 : random_so3(s, static_cast<std::uint64_t>(k));
      const BasisEval e = basis.evaluate(x);
      for (int l = 0; l < basis.count(); ++l) {
        for (int n = 1; n <= basis.dim(); ++n) {
          const auto f = [&](const GroupElement& g) {
            return basis.evaluate(g).psi(l);
          };
          const double fd = directional_derivative(f, x, n, 1e-4);
          max_err = std::max(max_err, std::abs(e.deriv(n - 1, l) - fd));
        }
      }
    }
    CAPTURE(basis_name(id));
    CHECK(max_err < 1e-6);
  }
}

TEST_CASE("four-particle circle example assembles and solves in closed form") {
  // particles at 0, pi/2, pi, 3pi/2 with h = sin(theta):
  //   A = diag(1/2, 1/2), b = (1/2, 0), kappa = (1, 0), gain k(t) = cos(t)
  const BasisSet basis(BasisId::Fourier1So2);
  std::vector<GroupElement> states;
  std::vector<double> h;
  for (int j = 0; j < 4; ++j) {
    const double theta = 0.5 * kPi * j;
    states.push_back(GroupElement::from_phase(theta));
    h.push_back(std::sin(theta));
  }
  const GalerkinSystem sys = assemble(basis, states, h);
  CHECK(sys.a(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sys.a(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(sys.a(0, 1)) < 1e-16);
  CHECK(std::abs(sys.a(1, 0)) < 1e-16);
  CHECK(sys.b(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(sys.b(1)) < 1e-16);

  const GainCoefficients gain = solve_gain(basis, sys, 0.0);
  CHECK(gain.kappa(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(gain.kappa(1)) < 1e-14);
  CHECK(gain.regularization_used == 0.0);

  for (double theta : {0.0, 0.3, 2.2, 5.5}) {
    const AlgebraVector k = gain_at(basis, gain, GroupElement::from_phase(theta));
    CHECK(k.coord(1) == doctest::Approx(std::cos(theta)).epsilon(1e-13));
  }
}

TEST_CASE("coincident-pair ensemble degenerates to A = diag(1, 0)") {
  // theta in {0, pi}: Dpsi = (+-1, 0), so the cos-row of A vanishes.
  const BasisSet basis(BasisId::Fourier1So2);
  const std::vector<GroupElement> states = {GroupElement::from_phase(0.0),
                                            GroupElement::from_phase(kPi)};
  {
    const GalerkinSystem sys = assemble(basis, states, {0.0, 0.0});
    CHECK(sys.a(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(sys.a(1, 1)) < 1e-16);
    CHECK(std::abs(sys.a(0, 1)) < 1e-16);
    CHECK(sys.condition_estimate > 1e12);  // numerically singular (zero eigenvalue up to rounding)
    // b = 0, so even the singular system has the zero gain as its solution
    const GainCoefficients gain = solve_gain(basis, sys, 0.0);
    CHECK(std::abs(gain.kappa(0)) < 1e-14);
    CHECK(std::abs(gain.kappa(1)) < 1e-14);
    CHECK(gain.regularization_used > 0.0);  // escalation was needed for the factorization
  }
  {
    // h = cos(theta) puts mass on the dead direction; the escalated ridge
    // bounds the otherwise-unbounded coefficient at b_2 / lambda.
    const GalerkinSystem sys = assemble(basis, states, {1.0, -1.0});
    CHECK(sys.b(1) == doctest::Approx(1.0).epsilon(1e-15));
    const GainCoefficients gain = solve_gain(basis, sys, 0.0);
    CHECK(gain.regularization_used > 0.0);
    const Eigen::VectorXd residual =
        (sys.a + gain.regularization_used * Eigen::MatrixXd::Identity(2, 2)) * gain.kappa - sys.b;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(gain.kappa(1) == doctest::Approx(1.0 / gain.regularization_used).epsilon(1e-9));
  }
}

TEST_CASE("galerkin residual vanishes on healthy random ensembles") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    for (GroupTag tag : {GroupTag::SO2, GroupTag::SO3}) {
      const BasisSet basis(tag == GroupTag::SO2 ? BasisId::Fourier1So2 : BasisId::QuaternionSo3);
      const std::vector<GroupElement> states = random_ensemble(tag, 50, seed);
      std::vector<double> h(states.size());
      for (std::size_t i = 0; i < states.size(); ++i) {
        h[i] = states[i].storage()(0, 0) + 0.3 * states[i].storage()(1, 0);
      }
      const GalerkinSystem sys = assemble(basis, states, h);
      const GainCoefficients gain = solve_gain(basis, sys, 0.0);
      CHECK(gain.regularization_used == 0.0);
      CHECK((sys.a * gain.kappa - sys.b).cwiseAbs().maxCoeff() < 1e-12);

      // weak form through the gain field: (1/N) sum_i <K(x_i), grad psi_l(x_i)> = b_l
      Eigen::VectorXd weak = Eigen::VectorXd::Zero(basis.count());
      for (const GroupElement& x : states) {
        const AlgebraVector k = gain_at(basis, gain, x);
        const BasisEval e = basis.evaluate(x);
        for (int l = 0; l < basis.count(); ++l) {
          weak(l) += k.storage().dot(e.deriv.col(l));
        }
      }
      weak /= static_cast<double>(states.size());
      CHECK((weak - sys.b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("assembled A is symmetric positive semidefinite") {
  const std::vector<GroupElement> states = random_ensemble(GroupTag::SO3, 40, 17);
  std::vector<double> h(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) h[i] = states[i].storage().trace();
  const GalerkinSystem sys = assemble(BasisSet(BasisId::MatrixSo3), states, h);
  CHECK((sys.a - sys.a.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.a);
  CHECK(eig.eigenvalues().minCoeff() > -1e-14);
}

TEST_CASE("matrix and quaternion bases produce the same gain") {
  const std::vector<GroupElement> states = random_ensemble(GroupTag::SO3, 60, 23);
  std::vector<double> h(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) h[i] = states[i].storage()(0, 0);

  const BasisSet mat(BasisId::MatrixSo3);
  const BasisSet quat(BasisId::QuaternionSo3);
  const GalerkinSystem sys_m = assemble(mat, states, h);
  const GalerkinSystem sys_q = assemble(quat, states, h);
  CHECK((sys_m.a - sys_q.a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((sys_m.b - sys_q.b).cwiseAbs().maxCoeff() < 1e-12);

  const GainCoefficients gain_m = solve_gain(mat, sys_m, 0.0);
  const GainCoefficients gain_q = solve_gain(quat, sys_q, 0.0);
  CHECK((gain_m.kappa - gain_q.kappa).cwiseAbs().maxCoeff() < 1e-10);
  for (std::size_t i = 0; i < states.size(); i += 7) {
    const AlgebraVector km = gain_at(mat, gain_m, states[i]);
    const AlgebraVector kq = gain_at(quat, gain_q, states[i]);
    CHECK((km.storage() - kq.storage()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("trace form reproduces the contracted gain") {
  const NoiseStream s(31, NoiseDomain::TruthState, 2);
  const BasisSet basis(BasisId::MatrixSo3);
  for (int k = 0; k < 100; ++k) {
    GainCoefficients gain;
    gain.basis = BasisId::MatrixSo3;
    gain.kappa = Eigen::Vector4d(s.normal(k, 4), s.normal(k, 5), s.normal(k, 6), s.normal(k, 7));
    const GroupElement x = random_so3(s, static_cast<std::uint64_t>(k));
    const AlgebraVector direct = gain_at(basis, gain, x);
    const AlgebraVector traced = gain_trace_form(gain, x);
    CHECK((direct.storage() - traced.storage()).cwiseAbs().maxCoeff() < 1e-12);
  }
  GainCoefficients wrong;
  wrong.basis = BasisId::QuaternionSo3;
  wrong.kappa = Eigen::Vector4d::Zero();
  CHECK_THROWS_AS(gain_trace_form(wrong, GroupElement::identity(GroupTag::SO3)),
                  std::invalid_argument);
}

TEST_CASE("assembly and solve reject malformed inputs") {
  const BasisSet basis(BasisId::Fourier1So2);
  CHECK_THROWS_AS(assemble(basis, {GroupElement::from_phase(0.0)}, {1.0}),
                  std::invalid_argument);  // N < 2
  const std::vector<GroupElement> states = {GroupElement::from_phase(0.0),
                                            GroupElement::from_phase(1.0)};
  CHECK_THROWS_AS(assemble(basis, states, {1.0}), std::invalid_argument);  // length mismatch
  CHECK_THROWS_AS(assemble(basis, states, {1.0, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(assemble(basis, {GroupElement::identity(GroupTag::SO3),
                                   GroupElement::identity(GroupTag::SO3)},
                           {1.0, 2.0}),
                  std::invalid_argument);  // tag mismatch

  const GalerkinSystem sys = assemble(basis, states, {0.0, 0.5});
  CHECK_THROWS_AS(solve_gain(basis, sys, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_gain(BasisSet(BasisId::MatrixSo3), sys, 0.0), std::invalid_argument);
}

TEST_CASE("basis names round-trip") {
  for (BasisId id : {BasisId::Fourier1So2, BasisId::MatrixSo3, BasisId::QuaternionSo3}) {
    CHECK(basis_from_name(basis_name(id)) == id);
  }
  CHECK_THROWS_AS(basis_from_name("nope"), std::invalid_argument);
}
