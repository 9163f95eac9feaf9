#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "liefpf/galerkin.hpp"
#include "liefpf/lie.hpp"
#include "liefpf/noise.hpp"

namespace liefpf {

enum class Representation { Phase, Matrix, Quaternion };

const char* representation_name(Representation rep);
Representation representation_from_name(const std::string& name);

/// Signal and observation model
///   dX = X V0(X) dt + X V1 o dB,   dZ = h(X) dt + dW
/// with V1 constant and B, W scalar Wiener processes. drift/observation are
/// arbitrary callables on group elements; the CLI resolves them from a named
/// registry.
struct FilterModel {
  GroupTag tag = GroupTag::SO2;
  std::function<AlgebraVector(const GroupElement&)> drift;
  AlgebraVector diffusion;  // V1 coordinates
  std::function<double(const GroupElement&)> observation;
};

/// Particle ensemble in one of three state layouts. Only the layout matching
/// `rep` is populated. step_count addresses the per-step noise counters, so a
/// sequence of step_* calls is reproducible regardless of chunking.
struct ParticleEnsemble {
  GroupTag tag = GroupTag::SO2;
  Representation rep = Representation::Phase;
  std::vector<double> phases;
  std::vector<UnitQuaternion> quaternions;
  std::vector<Eigen::Matrix3d> rotations;
  NoiseStreams streams;
  std::uint64_t step_count = 0;
  /// Largest |norm - 1| seen on a freshly composed quaternion before
  /// renormalization (diagnostic for the geometric-integrity checks).
  double max_quat_norm_deviation = 0.0;

  std::size_t size() const;
  GroupElement element(std::size_t i) const;
};

/// All particles start at the identity; N >= 2 enforced. Valid layouts:
/// SO2+Phase, SO3+Matrix, SO3+Quaternion.
ParticleEnsemble make_ensemble(GroupTag tag, Representation rep, std::size_t n,
                               NoiseStreams streams);

struct GainConfig {
  BasisId basis = BasisId::Fourier1So2;
  double ridge = 0.0;
};

/// Posterior summary of one ensemble. SO(2): circular mean, mean resultant
/// length (concentration), and the raw first moments. SO(3): principal
/// eigenvector of the quaternion outer-moment matrix plus spread = 1 - lambda_max.
struct PosteriorSummary {
  GroupTag tag = GroupTag::SO2;
  double mean_phase = 0.0;
  double concentration = 0.0;
  double moment_sin = 0.0;
  double moment_cos = 0.0;
  UnitQuaternion mean_quaternion;
  double spread = 0.0;

  GroupElement mean_element() const;
};

PosteriorSummary summarize_phases(const std::vector<double>& phases);
PosteriorSummary summarize_quaternions(const std::vector<UnitQuaternion>& quats);
PosteriorSummary summarize_rotations(const std::vector<Eigen::Matrix3d>& rotations);

struct StepRecord {
  double t = 0.0;
  double h_hat = 0.0;
  Eigen::VectorXd kappa;
  double regularization_used = 0.0;
  double dz_consumed = 0.0;
  PosteriorSummary posterior;
};

/// Innovation increment dI = dZ - (1/2)(h_i + h_bar) dt.
double control_term(double h_i, double h_bar, double dz, double dt);

/// Heun update of the phase through the gain's state dependence only:
///   predictor theta* = theta + drift_dt + db + k(theta) di
///   corrector theta' = theta + drift_dt + db + (1/2)(k(theta) + k(theta*)) di
/// Exposed as a building block; the steppers inline the same arithmetic.
double heun_phase_update(double theta, double drift_dt, double db, double di,
                         const std::function<double(double)>& gain);

/// Quaternion kinematics matrix Lambda(K) with dq = (1/2) Lambda(V) q; its
/// exact exponential is the right Hamilton product by exp_half.
Eigen::Matrix4d quat_kinematics_matrix(const AlgebraVector& k);

/// One filter step per representation. The ensemble advances in place and the
/// gain is frozen from the pre-step ensemble. All reductions are fixed-order;
/// `threads` parallelizes only the per-particle maps.
StepRecord step_phase(ParticleEnsemble& ens, const FilterModel& model, double dz, double dt,
                      const GainConfig& gain, int threads = 1);
StepRecord step_quaternion(ParticleEnsemble& ens, const FilterModel& model, double dz, double dt,
                           const GainConfig& gain, int threads = 1);
StepRecord step_matrix(ParticleEnsemble& ens, const FilterModel& model, double dz, double dt,
                       const GainConfig& gain, int threads = 1);

/// Observation increments on a uniform grid: times[k] = (k+1) dt, increments[k]
/// consumed while stepping from times[k] - dt to times[k].
struct ObservationPath {
  std::vector<double> times;
  std::vector<double> increments;
};

/// Run the matching stepper over the whole path. Requires strictly increasing,
/// uniformly spaced times (argument error otherwise).
std::vector<StepRecord> run_filter(const FilterModel& model, ParticleEnsemble& ens,
                                   const ObservationPath& path, const GainConfig& gain,
                                   int threads = 1);

}  // namespace liefpf
