#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "liefpf/lie.hpp"

namespace liefpf {

enum class BasisId { Fourier1So2, MatrixSo3, QuaternionSo3 };

const char* basis_name(BasisId id);
BasisId basis_from_name(const std::string& name);

/// Values and right-invariant derivatives of one basis set at one point.
/// psi holds the L basis values; deriv(n-1, l-1) = (E_n . psi_l). Slots past
/// (dim, count) are zero so the fixed-size storage can be used blindly.
struct BasisEval {
  int count = 0;
  int dim = 0;
  Eigen::Vector4d psi = Eigen::Vector4d::Zero();
  Eigen::Matrix<double, 3, 4> deriv = Eigen::Matrix<double, 3, 4>::Zero();
};

/// The gain bases. Fourier1So2: psi = (sin t, cos t) on the circle.
/// MatrixSo3 / QuaternionSo3 are the same four functions on SO(3) — the three
/// antisymmetric components psi_n(R) = (1/2) e_i^T (R - R^T) e_j plus
/// psi_4(R) = (Tr R - 1)/2 — evaluated from the matrix or from quaternion
/// coordinates. Derivatives are closed forms, validated against the
/// directional_derivative oracle.
class BasisSet {
 public:
  explicit BasisSet(BasisId id);

  BasisId id() const { return id_; }
  GroupTag tag() const { return tag_; }
  int count() const { return count_; }
  int dim() const { return group_dim(tag_); }

  BasisEval evaluate(const GroupElement& x) const;
  BasisEval evaluate_phase(double theta) const;               // Fourier1So2 only
  BasisEval evaluate_quaternion(const UnitQuaternion& q) const;  // SO(3) bases
  BasisEval evaluate_matrix(const Eigen::Matrix3d& r) const;     // SO(3) bases

 private:
  BasisId id_;
  GroupTag tag_;
  int count_;
};

/// Spec-level wrapper: (psi, D) with psi an L-vector and D a (d x L) matrix.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> evaluate_basis(const BasisSet& basis,
                                                           const GroupElement& x);

/// Normalized Galerkin system for the gain weak form.
///   A[l][m] = (1/N) sum_i sum_n (E_n.psi_l)(X_i) (E_n.psi_m)(X_i)
///   b[l]    = (1/N) sum_i (h_i - h_bar) psi_l(X_i)
/// A is symmetric by construction; condition_estimate is the eigenvalue ratio
/// (inf when the smallest eigenvalue is not positive).
struct GalerkinSystem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  std::size_t particle_count = 0;
  double condition_estimate = 0.0;
};

GalerkinSystem assemble(const BasisSet& basis, const std::vector<GroupElement>& states,
                        const std::vector<double>& h_values);

/// Assembly from precomputed per-particle evaluations (hot path; fixed order).
GalerkinSystem assemble_from_evals(const BasisSet& basis, const std::vector<BasisEval>& evals,
                                   const std::vector<double>& h_values);

struct GainCoefficients {
  BasisId basis = BasisId::Fourier1So2;
  Eigen::VectorXd kappa;
  /// Ridge actually applied: the requested ridge, or the escalated value when
  /// the plain solve failed or was ill-conditioned beyond 1e12.
  double regularization_used = 0.0;
};

/// Solve (A + lambda I) kappa = b with lambda = ridge, escalating once to
/// max(lambda, 1e-8 tr(A)/L) — with an absolute floor of 1e-8 when that is not
/// positive — if factorization fails, the solution is not finite, or the
/// regularized condition number exceeds 1e12. Throws NumericError only if the
/// escalated solve still fails.
GainCoefficients solve_gain(const BasisSet& basis, const GalerkinSystem& system, double ridge);

/// Gain field at x: k_n = sum_l kappa_l (E_n . psi_l)(x).
AlgebraVector gain_at(const BasisSet& basis, const GainCoefficients& gain, const GroupElement& x);

/// Same contraction from a precomputed evaluation (hot path).
Eigen::Vector3d gain_from_eval(const BasisEval& eval, const Eigen::VectorXd& kappa);

/// Closed trace form of the SO(3) matrix-basis gain:
///   Upsilon = kappa_4 I + kappa_1 E1 + kappa_2 E2 + kappa_3 E3,
///   k_n(R) = (1/2) Tr(R E_n Upsilon).
/// Requires gain.basis == MatrixSo3 (argument error otherwise); agrees with
/// gain_at to rounding.
AlgebraVector gain_trace_form(const GainCoefficients& gain, const GroupElement& x);

}  // namespace liefpf
