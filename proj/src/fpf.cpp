#include "liefpf/fpf.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "liefpf/errors.hpp"
#include "liefpf/parallel.hpp"

namespace liefpf {

const char* representation_name(Representation rep) {
  switch (rep) {
    case Representation::Phase:
      return "phase";
    case Representation::Matrix:
      return "matrix";
    case Representation::Quaternion:
      return "quaternion";
  }
  return "?";
}

Representation representation_from_name(const std::string& name) {
  if (name == "phase") return Representation::Phase;
  if (name == "matrix") return Representation::Matrix;
  if (name == "quaternion") return Representation::Quaternion;
  throw std::invalid_argument("unknown representation: " + name);
}

std::size_t ParticleEnsemble::size() const {
  switch (rep) {
    case Representation::Phase:
      return phases.size();
    case Representation::Matrix:
      return rotations.size();
    case Representation::Quaternion:
      return quaternions.size();
  }
  return 0;
}

GroupElement ParticleEnsemble::element(std::size_t i) const {
  switch (rep) {
    case Representation::Phase:
      return GroupElement::from_phase(phases[i]);
    case Representation::Matrix:
      return GroupElement::unchecked(GroupTag::SO3, rotations[i]);
    case Representation::Quaternion:
      return GroupElement::from_quaternion(quaternions[i]);
  }
  throw std::logic_error("unreachable");
}

ParticleEnsemble make_ensemble(GroupTag tag, Representation rep, std::size_t n,
                               NoiseStreams streams) {
  if (n < 2) throw std::invalid_argument("make_ensemble: need at least two particles");
  const bool valid = (tag == GroupTag::SO2 && rep == Representation::Phase) ||
                     (tag == GroupTag::SO3 && rep != Representation::Phase);
  if (!valid) throw std::invalid_argument("make_ensemble: representation does not fit group");
  ParticleEnsemble ens;
  ens.tag = tag;
  ens.rep = rep;
  ens.streams = streams;
  switch (rep) {
    case Representation::Phase:
      ens.phases.assign(n, 0.0);
      break;
    case Representation::Matrix:
      ens.rotations.assign(n, Eigen::Matrix3d::Identity());
      break;
    case Representation::Quaternion:
      ens.quaternions.assign(n, UnitQuaternion::identity());
      break;
  }
  return ens;
}

double control_term(double h_i, double h_bar, double dz, double dt) {
  return dz - 0.5 * (h_i + h_bar) * dt;
}

double heun_phase_update(double theta, double drift_dt, double db, double di,
                         const std::function<double(double)>& gain) {
  const double k0 = gain(theta);
  const double predictor = theta + drift_dt + db + k0 * di;
  const double k1 = gain(predictor);
  return theta + drift_dt + db + 0.5 * (k0 + k1) * di;
}

Eigen::Matrix4d quat_kinematics_matrix(const AlgebraVector& k) {
  if (k.tag() != GroupTag::SO3) {
    throw std::invalid_argument("quat_kinematics_matrix: so(3) vector required");
  }
  const double k1 = k.storage()(0), k2 = k.storage()(1), k3 = k.storage()(2);
  Eigen::Matrix4d m;
  m << 0, -k1, -k2, -k3,
      k1, 0, k3, -k2,
      k2, -k3, 0, k1,
      k3, k2, -k1, 0;
  return m;
}

GroupElement PosteriorSummary::mean_element() const {
  if (tag == GroupTag::SO2) return GroupElement::from_phase(mean_phase);
  return GroupElement::from_quaternion(mean_quaternion);
}

PosteriorSummary summarize_phases(const std::vector<double>& phases) {
  PosteriorSummary s;
  s.tag = GroupTag::SO2;
  double cs = 0.0, sn = 0.0;
  for (double t : phases) {
    cs += std::cos(t);
    sn += std::sin(t);
  }
  const double n = static_cast<double>(phases.size());
  s.moment_sin = sn / n;
  s.moment_cos = cs / n;
  s.concentration = std::hypot(s.moment_sin, s.moment_cos);
  s.mean_phase = wrap_phase(std::atan2(s.moment_sin, s.moment_cos));
  return s;
}

namespace {

PosteriorSummary summarize_quat_outer(const Eigen::Matrix4d& outer) {
  PosteriorSummary s;
  s.tag = GroupTag::SO3;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(outer);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // ascending order: last is principal
  s.mean_quaternion = UnitQuaternion{q(0), q(1), q(2), q(3)}.normalized().canonicalized();
  s.spread = std::max(0.0, 1.0 - eig.eigenvalues()(3));
  return s;
}

}  // namespace

PosteriorSummary summarize_quaternions(const std::vector<UnitQuaternion>& quats) {
  Eigen::Matrix4d outer = Eigen::Matrix4d::Zero();
  for (const UnitQuaternion& q : quats) {
    const Eigen::Vector4d v = q.coeffs();
    outer.noalias() += v * v.transpose();
  }
  outer /= static_cast<double>(quats.size());
  return summarize_quat_outer(outer);
}

PosteriorSummary summarize_rotations(const std::vector<Eigen::Matrix3d>& rotations) {
  Eigen::Matrix4d outer = Eigen::Matrix4d::Zero();
  for (const Eigen::Matrix3d& r : rotations) {
    const Eigen::Vector4d v = rotation_to_quat(r).coeffs();
    outer.noalias() += v * v.transpose();
  }
  outer /= static_cast<double>(rotations.size());
  return summarize_quat_outer(outer);
}

namespace {

struct StepContext {
  const FilterModel& model;
  const GainConfig& gain_cfg;
  double dz;
  double dt;
  int threads;
};

void validate_step_args(const ParticleEnsemble& ens, const StepContext& ctx,
                        Representation expected) {
  if (ens.rep != expected) throw std::invalid_argument("step: ensemble representation mismatch");
  if (ens.tag != ctx.model.tag) throw std::invalid_argument("step: model/ensemble tag mismatch");
  if (!(ctx.dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (!std::isfinite(ctx.dz)) throw std::invalid_argument("step: non-finite dz");
  const BasisSet basis(ctx.gain_cfg.basis);
  if (basis.tag() != ens.tag) throw std::invalid_argument("step: basis does not match group");
  if (ens.size() < 2) throw std::invalid_argument("step: need at least two particles");
}

/// Shared pre-step stage: h on all particles, fixed-order mean, Galerkin solve.
template <class EvalFn, class ObsFn>
GainCoefficients presolve(const ParticleEnsemble& ens, const StepContext& ctx,
                          const BasisSet& basis, EvalFn&& eval, ObsFn&& observe,
                          std::vector<double>& h, std::vector<BasisEval>& evals, double& h_bar) {
  const std::size_t n = ens.size();
  h.resize(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) { h[i] = observe(i); });
  double acc = 0.0;
  for (double v : h) acc += v;  // fixed order
  h_bar = acc / static_cast<double>(n);

  evals.resize(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) { evals[i] = eval(i); });
  const GalerkinSystem sys = assemble_from_evals(basis, evals, h);
  return solve_gain(basis, sys, ctx.gain_cfg.ridge);
}

StepRecord make_record(const ParticleEnsemble& ens, const StepContext& ctx, double h_bar,
                       const GainCoefficients& gain) {
  StepRecord rec;
  rec.t = static_cast<double>(ens.step_count) * ctx.dt;
  rec.h_hat = h_bar;
  rec.kappa = gain.kappa;
  rec.regularization_used = gain.regularization_used;
  rec.dz_consumed = ctx.dz;
  switch (ens.rep) {
    case Representation::Phase:
      rec.posterior = summarize_phases(ens.phases);
      break;
    case Representation::Matrix:
      rec.posterior = summarize_rotations(ens.rotations);
      break;
    case Representation::Quaternion:
      rec.posterior = summarize_quaternions(ens.quaternions);
      break;
  }
  return rec;
}

}  // namespace

StepRecord step_phase(ParticleEnsemble& ens, const FilterModel& model, double dz, double dt,
                      const GainConfig& gain_cfg, int threads) {
  const StepContext ctx{model, gain_cfg, dz, dt, threads};
  validate_step_args(ens, ctx, Representation::Phase);
  const BasisSet basis(gain_cfg.basis);
  const std::size_t n = ens.size();
  const double sigma = model.diffusion.storage()(0);
  const double sqrt_dt = std::sqrt(dt);

  std::vector<double> h;
  std::vector<BasisEval> evals;
  double h_bar = 0.0;
  const GainCoefficients gain = presolve(
      ens, ctx, basis, [&](std::size_t i) { return basis.evaluate_phase(ens.phases[i]); },
      [&](std::size_t i) { return model.observation(ens.element(i)); }, h, evals, h_bar);

  parallel_for(n, threads, [&](std::size_t i) {
    const double theta = ens.phases[i];
    const double drift_dt = model.drift(GroupElement::from_phase(theta)).storage()(0) * dt;
    const double db = sigma * sqrt_dt * ens.streams.stream(i).normal(ens.step_count);
    const double di = control_term(h[i], h_bar, dz, dt);
    const double k0 = gain_from_eval(evals[i], gain.kappa)(0);
    const double predictor = theta + drift_dt + db + k0 * di;
    const double k1 = gain_from_eval(basis.evaluate_phase(predictor), gain.kappa)(0);
    ens.phases[i] = wrap_phase(theta + drift_dt + db + 0.5 * (k0 + k1) * di);
  });

  ens.step_count += 1;
  return make_record(ens, ctx, h_bar, gain);
}

StepRecord step_quaternion(ParticleEnsemble& ens, const FilterModel& model, double dz, double dt,
                           const GainConfig& gain_cfg, int threads) {
  const StepContext ctx{model, gain_cfg, dz, dt, threads};
  validate_step_args(ens, ctx, Representation::Quaternion);
  const BasisSet basis(gain_cfg.basis);
  const std::size_t n = ens.size();
  const Eigen::Vector3d v1 = model.diffusion.storage();
  const double sqrt_dt = std::sqrt(dt);

  std::vector<double> h;
  std::vector<BasisEval> evals;
  double h_bar = 0.0;
  const GainCoefficients gain = presolve(
      ens, ctx, basis, [&](std::size_t i) { return basis.evaluate_quaternion(ens.quaternions[i]); },
      [&](std::size_t i) { return model.observation(ens.element(i)); }, h, evals, h_bar);

  std::vector<double> norm_dev(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const UnitQuaternion q = ens.quaternions[i];
    const Eigen::Vector3d omega_dt = model.drift(GroupElement::from_quaternion(q)).storage() * dt;
    const Eigen::Vector3d noise = v1 * (sqrt_dt * ens.streams.stream(i).normal(ens.step_count));
    const double di = control_term(h[i], h_bar, dz, dt);
    const Eigen::Vector3d base = omega_dt + noise;
    const Eigen::Vector3d k0 = gain_from_eval(evals[i], gain.kappa);
    const UnitQuaternion predictor = q * UnitQuaternion::exp_half(base + k0 * di);
    const Eigen::Vector3d k1 = gain_from_eval(basis.evaluate_quaternion(predictor), gain.kappa);
    const UnitQuaternion next = q * UnitQuaternion::exp_half(base + 0.5 * (k0 + k1) * di);
    norm_dev[i] = std::abs(next.norm() - 1.0);
    ens.quaternions[i] = next.normalized();
  });
  for (double d : norm_dev) ens.max_quat_norm_deviation = std::max(ens.max_quat_norm_deviation, d);

  ens.step_count += 1;
  return make_record(ens, ctx, h_bar, gain);
}

StepRecord step_matrix(ParticleEnsemble& ens, const FilterModel& model, double dz, double dt,
                       const GainConfig& gain_cfg, int threads) {
  const StepContext ctx{model, gain_cfg, dz, dt, threads};
  validate_step_args(ens, ctx, Representation::Matrix);
  const BasisSet basis(gain_cfg.basis);
  const std::size_t n = ens.size();
  const Eigen::Vector3d v1 = model.diffusion.storage();
  const double sqrt_dt = std::sqrt(dt);

  std::vector<double> h;
  std::vector<BasisEval> evals;
  double h_bar = 0.0;
  const GainCoefficients gain = presolve(
      ens, ctx, basis, [&](std::size_t i) { return basis.evaluate_matrix(ens.rotations[i]); },
      [&](std::size_t i) { return model.observation(ens.element(i)); }, h, evals, h_bar);

  // Per-step products keep R orthonormal to rounding; a polar Newton step
  // every 100 steps absorbs the slow drift.
  const bool reproject = (ens.step_count + 1) % 100 == 0;
  parallel_for(n, threads, [&](std::size_t i) {
    const Eigen::Matrix3d r = ens.rotations[i];
    const Eigen::Vector3d omega_dt =
        model.drift(GroupElement::unchecked(GroupTag::SO3, r)).storage() * dt;
    const Eigen::Vector3d noise = v1 * (sqrt_dt * ens.streams.stream(i).normal(ens.step_count));
    const double di = control_term(h[i], h_bar, dz, dt);
    const Eigen::Vector3d base = omega_dt + noise;
    const Eigen::Vector3d k0 = gain_from_eval(evals[i], gain.kappa);
    const Eigen::Matrix3d predictor = r * so3_exp(base + k0 * di);
    const Eigen::Vector3d k1 = gain_from_eval(basis.evaluate_matrix(predictor), gain.kappa);
    Eigen::Matrix3d next = r * so3_exp(base + 0.5 * (k0 + k1) * di);
    if (reproject) next = reorthonormalize(next);
    ens.rotations[i] = next;
  });

  ens.step_count += 1;
  return make_record(ens, ctx, h_bar, gain);
}

std::vector<StepRecord> run_filter(const FilterModel& model, ParticleEnsemble& ens,
                                   const ObservationPath& path, const GainConfig& gain,
                                   int threads) {
  const std::size_t steps = path.times.size();
  if (path.increments.size() != steps) {
    throw std::invalid_argument("run_filter: times/increments length mismatch");
  }
  if (steps == 0) return {};
  const double dt = path.times.front();
  if (!(dt > 0.0)) throw std::invalid_argument("run_filter: first time must be positive");
  for (std::size_t k = 0; k < steps; ++k) {
    const double expected = static_cast<double>(k + 1) * dt;
    if (std::abs(path.times[k] - expected) > 1e-9 * std::max(1.0, expected)) {
      throw std::invalid_argument("run_filter: observation times must be uniformly spaced");
    }
  }

  std::vector<StepRecord> records;
  records.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    switch (ens.rep) {
      case Representation::Phase:
        records.push_back(step_phase(ens, model, path.increments[k], dt, gain, threads));
        break;
      case Representation::Matrix:
        records.push_back(step_matrix(ens, model, path.increments[k], dt, gain, threads));
        break;
      case Representation::Quaternion:
        records.push_back(step_quaternion(ens, model, path.increments[k], dt, gain, threads));
        break;
    }
  }
  return records;
}

}  // namespace liefpf
