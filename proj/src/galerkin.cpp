#include "liefpf/galerkin.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "liefpf/errors.hpp"

namespace liefpf {

const char* basis_name(BasisId id) {
  switch (id) {
    case BasisId::Fourier1So2:
      return "fourier1_so2";
    case BasisId::MatrixSo3:
      return "matrix_so3";
    case BasisId::QuaternionSo3:
      return "quaternion_so3";
  }
  return "?";
}

BasisId basis_from_name(const std::string& name) {
  if (name == "fourier1_so2") return BasisId::Fourier1So2;
  if (name == "matrix_so3") return BasisId::MatrixSo3;
  if (name == "quaternion_so3") return BasisId::QuaternionSo3;
  throw std::invalid_argument("unknown basis id: " + name);
}

BasisSet::BasisSet(BasisId id) : id_(id) {
  switch (id) {
    case BasisId::Fourier1So2:
      tag_ = GroupTag::SO2;
      count_ = 2;
      break;
    case BasisId::MatrixSo3:
    case BasisId::QuaternionSo3:
      tag_ = GroupTag::SO3;
      count_ = 4;
      break;
  }
}

BasisEval BasisSet::evaluate_phase(double theta) const {
  if (id_ != BasisId::Fourier1So2) {
    throw std::invalid_argument("evaluate_phase: basis is not an SO2 basis");
  }
  BasisEval e;
  e.count = 2;
  e.dim = 1;
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  e.psi(0) = s;
  e.psi(1) = c;
  e.deriv(0, 0) = c;
  e.deriv(0, 1) = -s;
  return e;
}

BasisEval BasisSet::evaluate_matrix(const Eigen::Matrix3d& r) const {
  if (tag_ != GroupTag::SO3) throw std::invalid_argument("evaluate_matrix: basis is not an SO3 basis");
  BasisEval e;
  e.count = 4;
  e.dim = 3;
  e.psi(0) = 0.5 * (r(1, 2) - r(2, 1));
  e.psi(1) = 0.5 * (r(2, 0) - r(0, 2));
  e.psi(2) = 0.5 * (r(0, 1) - r(1, 0));
  e.psi(3) = 0.5 * (r.trace() - 1.0);
  // Row n holds E_n . psi_l; closed forms of the right-invariant derivatives.
  e.deriv(0, 0) = -0.5 * (r(1, 1) + r(2, 2));
  e.deriv(1, 0) = 0.5 * r(1, 0);
  e.deriv(2, 0) = 0.5 * r(2, 0);
  e.deriv(0, 1) = 0.5 * r(0, 1);
  e.deriv(1, 1) = -0.5 * (r(0, 0) + r(2, 2));
  e.deriv(2, 1) = 0.5 * r(2, 1);
  e.deriv(0, 2) = 0.5 * r(0, 2);
  e.deriv(1, 2) = 0.5 * r(1, 2);
  e.deriv(2, 2) = -0.5 * (r(0, 0) + r(1, 1));
  e.deriv(0, 3) = 0.5 * (r(1, 2) - r(2, 1));
  e.deriv(1, 3) = 0.5 * (r(2, 0) - r(0, 2));
  e.deriv(2, 3) = 0.5 * (r(0, 1) - r(1, 0));
  return e;
}

BasisEval BasisSet::evaluate_quaternion(const UnitQuaternion& q) const {
  if (tag_ != GroupTag::SO3) {
    throw std::invalid_argument("evaluate_quaternion: basis is not an SO3 basis");
  }
  if (id_ == BasisId::MatrixSo3) return evaluate_matrix(quat_to_rotation(q));
  BasisEval e;
  e.count = 4;
  e.dim = 3;
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  // Quaternion coordinates of the same four functions as the matrix basis
  // (values and derivatives are invariant under q -> -q).
  e.psi(0) = -2.0 * x * w;
  e.psi(1) = -2.0 * y * w;
  e.psi(2) = -2.0 * z * w;
  e.psi(3) = 2.0 * w * w - 1.0;
  e.deriv(0, 0) = x * x - w * w;
  e.deriv(1, 0) = x * y + z * w;
  e.deriv(2, 0) = x * z - y * w;
  e.deriv(0, 1) = x * y - z * w;
  e.deriv(1, 1) = y * y - w * w;
  e.deriv(2, 1) = y * z + x * w;
  e.deriv(0, 2) = x * z + y * w;
  e.deriv(1, 2) = y * z - x * w;
  e.deriv(2, 2) = z * z - w * w;
  e.deriv(0, 3) = -2.0 * x * w;
  e.deriv(1, 3) = -2.0 * y * w;
  e.deriv(2, 3) = -2.0 * z * w;
  return e;
}

BasisEval BasisSet::evaluate(const GroupElement& x) const {
  if (x.tag() != tag_) throw std::invalid_argument("BasisSet::evaluate: tag mismatch");
  switch (id_) {
    case BasisId::Fourier1So2:
      return evaluate_phase(std::atan2(x.storage()(1, 0), x.storage()(0, 0)));
    case BasisId::MatrixSo3:
      return evaluate_matrix(x.storage());
    case BasisId::QuaternionSo3:
      return evaluate_quaternion(rotation_to_quat(x.storage()));
  }
  throw std::logic_error("unreachable");
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> evaluate_basis(const BasisSet& basis,
                                                           const GroupElement& x) {
  const BasisEval e = basis.evaluate(x);
  Eigen::VectorXd psi = e.psi.head(e.count);
  Eigen::MatrixXd d = e.deriv.topLeftCorner(e.dim, e.count);
  return {psi, d};
}

namespace {

GalerkinSystem finalize_system(const BasisSet& basis, Eigen::MatrixXd a, Eigen::VectorXd b,
                               std::size_t n) {
  GalerkinSystem sys;
  sys.a = std::move(a);
  sys.b = std::move(b);
  sys.particle_count = n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi <= 0.0) {
    sys.condition_estimate = std::numeric_limits<double>::infinity();
  } else {
    sys.condition_estimate = hi / lo;
  }
  (void)basis;
  return sys;
}

}  // namespace

GalerkinSystem assemble_from_evals(const BasisSet& basis, const std::vector<BasisEval>& evals,
                                   const std::vector<double>& h_values) {
  const std::size_t n = evals.size();
  if (n < 2) throw std::invalid_argument("assemble: need at least two particles");
  if (h_values.size() != n) {
    throw std::invalid_argument("assemble: h_values length does not match ensemble size");
  }
  const int count = basis.count();
  double h_bar = 0.0;
  for (double h : h_values) {
    if (!std::isfinite(h)) throw std::invalid_argument("assemble: non-finite h value");
    h_bar += h;
  }
  h_bar /= static_cast<double>(n);

  Eigen::Matrix4d a4 = Eigen::Matrix4d::Zero();
  Eigen::Vector4d b4 = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const BasisEval& e = evals[i];
    a4.noalias() += e.deriv.transpose() * e.deriv;  // symmetric by construction
    b4.noalias() += (h_values[i] - h_bar) * e.psi;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return finalize_system(basis, (a4 * inv_n).topLeftCorner(count, count),
                         (b4 * inv_n).head(count), n);
}

GalerkinSystem assemble(const BasisSet& basis, const std::vector<GroupElement>& states,
                        const std::vector<double>& h_values) {
  std::vector<BasisEval> evals;
  evals.reserve(states.size());
  for (const GroupElement& x : states) evals.push_back(basis.evaluate(x));
  return assemble_from_evals(basis, evals, h_values);
}

GainCoefficients solve_gain(const BasisSet& basis, const GalerkinSystem& system, double ridge) {
  const int count = basis.count();
  if (system.a.rows() != count || system.a.cols() != count || system.b.size() != count) {
    throw std::invalid_argument("solve_gain: system dimensions do not match basis");
  }
  if (!system.a.allFinite() || !system.b.allFinite()) {
    throw std::invalid_argument("solve_gain: non-finite system");
  }
  if (ridge < 0.0) throw std::invalid_argument("solve_gain: ridge must be nonnegative");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system.a, Eigen::EigenvaluesOnly);
  const double eig_lo = eig.eigenvalues().minCoeff();
  const double eig_hi = eig.eigenvalues().maxCoeff();

  const auto attempt = [&](double lambda, Eigen::VectorXd& out) {
    Eigen::MatrixXd m = system.a;
    m.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) return false;
    const double lo = eig_lo + lambda;
    const double hi = eig_hi + lambda;
    if (!(lo > 0.0) || hi / lo > 1e12) return false;
    out = ldlt.solve(system.b);
    return out.allFinite();
  };

  GainCoefficients gain;
  gain.basis = basis.id();
  if (attempt(ridge, gain.kappa)) {
    gain.regularization_used = ridge;
    return gain;
  }
  double lambda = std::max(ridge, 1e-8 * system.a.trace() / static_cast<double>(count));
  if (!(lambda > 0.0)) lambda = 1e-8;  // collapsed ensembles have tr(A) = 0
  if (attempt(lambda, gain.kappa)) {
    gain.regularization_used = lambda;
    return gain;
  }
  throw NumericError("solve_gain: regularized solve failed (lambda=" + std::to_string(lambda) + ")");
}

Eigen::Vector3d gain_from_eval(const BasisEval& eval, const Eigen::VectorXd& kappa) {
  Eigen::Vector4d k4 = Eigen::Vector4d::Zero();
  k4.head(eval.count) = kappa;
  return eval.deriv * k4;
}

AlgebraVector gain_at(const BasisSet& basis, const GainCoefficients& gain, const GroupElement& x) {
  if (gain.basis != basis.id()) throw std::invalid_argument("gain_at: basis mismatch");
  if (gain.kappa.size() != basis.count()) {
    throw std::invalid_argument("gain_at: coefficient length does not match basis");
  }
  const BasisEval e = basis.evaluate(x);
  const Eigen::Vector3d k = gain_from_eval(e, gain.kappa);
  if (basis.tag() == GroupTag::SO2) return AlgebraVector::so2(k(0));
  return AlgebraVector(GroupTag::SO3, k);
}

AlgebraVector gain_trace_form(const GainCoefficients& gain, const GroupElement& x) {
  if (gain.basis != BasisId::MatrixSo3) {
    throw std::invalid_argument("gain_trace_form: defined for the SO3 matrix basis");
  }
  if (gain.kappa.size() != 4) throw std::invalid_argument("gain_trace_form: need 4 coefficients");
  if (x.tag() != GroupTag::SO3) throw std::invalid_argument("gain_trace_form: SO3 element required");
  const double k1 = gain.kappa(0), k2 = gain.kappa(1), k3 = gain.kappa(2), k4 = gain.kappa(3);
  Eigen::Matrix3d upsilon;
  upsilon << k4, -k3, k2, k3, k4, -k1, -k2, k1, k4;
  const Eigen::Matrix3d& r = x.storage();
  Eigen::Vector3d k;
  for (int n = 0; n < 3; ++n) {
    Eigen::Vector3d unit = Eigen::Vector3d::Zero();
    unit(n) = 1.0;
    k(n) = 0.5 * (r * skew3(unit) * upsilon).trace();
  }
  return AlgebraVector(GroupTag::SO3, k);
}

}  // namespace liefpf
