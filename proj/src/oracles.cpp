#include "liefpf/oracles.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "liefpf/errors.hpp"
#include "liefpf/parallel.hpp"

namespace liefpf {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kMaxSubsteps = 100000;
}  // namespace

double GridDensity::spacing() const { return kTwoPi / static_cast<double>(values.size()); }

double GridDensity::node(std::size_t j) const { return static_cast<double>(j) * spacing(); }

double GridDensity::mass() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc * spacing();
}

GridDensity uniform_grid_density(std::size_t m) {
  if (m < 8 || (m & (m - 1)) != 0) {
    throw std::invalid_argument("uniform_grid_density: node count must be a power of two >= 8");
  }
  GridDensity d;
  d.values.assign(m, 1.0 / kTwoPi);
  return d;
}

double wrapped_normal_density(double theta, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("wrapped_normal_density: sigma must be positive");
  const double norm = 1.0 / (sigma * std::sqrt(kTwoPi));
  double acc = 0.0;
  for (int k = -8; k <= 8; ++k) {
    const double d = theta - mu + kTwoPi * static_cast<double>(k);
    acc += std::exp(-0.5 * d * d / (sigma * sigma));
  }
  return norm * acc;
}

So2GridModel sample_grid_model(const FilterModel& model, std::size_t m) {
  if (model.tag != GroupTag::SO2) {
    throw std::invalid_argument("sample_grid_model: SO(2) model required");
  }
  So2GridModel g;
  g.drift.resize(m);
  g.h.resize(m);
  g.sigma = model.diffusion.coord(1);
  const double dth = kTwoPi / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const GroupElement x = GroupElement::from_phase(static_cast<double>(j) * dth);
    g.drift[j] = model.drift(x).coord(1);
    g.h[j] = model.observation(x);
  }
  return g;
}

GridStepInfo ks_grid_step(GridDensity& density, const So2GridModel& model, double dz, double dt) {
  const std::size_t m = density.size();
  if (m == 0 || model.drift.size() != m || model.h.size() != m) {
    throw std::invalid_argument("ks_grid_step: model/grid size mismatch");
  }
  if (!(dt > 0.0) || !std::isfinite(dz)) throw std::invalid_argument("ks_grid_step: bad dz/dt");
  const double dth = density.spacing();
  const double sigma2 = model.sigma * model.sigma;

  double max_omega = 0.0;
  for (double w : model.drift) max_omega = std::max(max_omega, std::abs(w));

  // CFL for the explicit scheme: both the diffusion number sigma^2 dt / dth^2
  // and the advection number |omega| dt / dth stay below 0.4.
  double dt_limit = std::numeric_limits<double>::infinity();
  if (sigma2 > 0.0) dt_limit = std::min(dt_limit, 0.4 * dth * dth / sigma2);
  if (max_omega > 0.0) dt_limit = std::min(dt_limit, 0.4 * dth / max_omega);

  std::size_t substeps = 1;
  if (dt_limit < dt) {
    const double needed = std::ceil(dt / dt_limit);
    if (needed > static_cast<double>(kMaxSubsteps)) {
      throw NumericError("ks_grid_step: CFL limit exceeds the substep cap");
    }
    substeps = static_cast<std::size_t>(needed);
  }
  const double dts = dt / static_cast<double>(substeps);

  GridStepInfo info;
  info.substeps = substeps;

  std::vector<double>& p = density.values;
  std::vector<double> flux(m), next(m);
  const double adv = dts / (2.0 * dth);
  const double dif = 0.5 * sigma2 * dts / (dth * dth);
  for (std::size_t s = 0; s < substeps; ++s) {
    for (std::size_t j = 0; j < m; ++j) flux[j] = model.drift[j] * p[j];
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t jp = (j + 1) % m;
      const std::size_t jm = (j + m - 1) % m;
      next[j] = p[j] - adv * (flux[jp] - flux[jm]) + dif * (p[jp] - 2.0 * p[j] + p[jm]);
    }
    p.swap(next);
  }

  // Robust Bayes factor with the max exponent pulled out (renormalized below).
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    flux[j] = model.h[j] * dz - 0.5 * model.h[j] * model.h[j] * dt;  // reuse as exponent buffer
    emax = std::max(emax, flux[j]);
  }
  for (std::size_t j = 0; j < m; ++j) p[j] *= std::exp(flux[j] - emax);

  for (std::size_t j = 0; j < m; ++j) {
    if (p[j] < 0.0) {
      info.clipped_mass -= p[j] * dth;
      p[j] = 0.0;
    }
  }

  double mass = 0.0;
  for (double v : p) mass += v;
  mass *= dth;
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw NumericError("ks_grid_step: posterior mass collapsed");
  }
  for (double& v : p) v /= mass;
  return info;
}

double grid_moment(const GridDensity& density, const std::vector<double>& f_values) {
  if (f_values.size() != density.size()) {
    throw std::invalid_argument("grid_moment: value vector does not match the grid");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < density.size(); ++j) acc += f_values[j] * density.values[j];
  return acc * density.spacing();
}

double grid_moment(const GridDensity& density, const std::function<double(double)>& f) {
  double acc = 0.0;
  for (std::size_t j = 0; j < density.size(); ++j) acc += f(density.node(j)) * density.values[j];
  return acc * density.spacing();
}

GroupElement WeightedEnsemble::element(std::size_t i) const {
  if (tag == GroupTag::SO2) return GroupElement::from_phase(phase_from_quat(states[i]));
  return GroupElement::from_quaternion(states[i]);
}

WeightedEnsemble make_weighted_ensemble(GroupTag tag, std::size_t n, NoiseStreams streams) {
  if (n < 2) throw std::invalid_argument("make_weighted_ensemble: need at least two particles");
  WeightedEnsemble ens;
  ens.tag = tag;
  ens.states.assign(n, UnitQuaternion::identity());
  ens.weights.assign(n, 1.0 / static_cast<double>(n));
  ens.streams = streams;
  return ens;
}

double effective_sample_size(const std::vector<double>& weights) {
  double acc = 0.0;
  for (double w : weights) acc += w * w;
  return 1.0 / acc;
}

PosteriorSummary weighted_posterior(const WeightedEnsemble& ens) {
  if (ens.tag == GroupTag::SO2) {
    PosteriorSummary s;
    s.tag = GroupTag::SO2;
    double cs = 0.0, sn = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const double theta = phase_from_quat(ens.states[i]);
      cs += ens.weights[i] * std::cos(theta);
      sn += ens.weights[i] * std::sin(theta);
    }
    s.moment_sin = sn;
    s.moment_cos = cs;
    s.concentration = std::hypot(sn, cs);
    s.mean_phase = wrap_phase(std::atan2(sn, cs));
    return s;
  }
  Eigen::Matrix4d outer = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Eigen::Vector4d v = ens.states[i].coeffs();
    outer.noalias() += ens.weights[i] * (v * v.transpose());
  }
  PosteriorSummary s;
  s.tag = GroupTag::SO3;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(outer);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);
  s.mean_quaternion = UnitQuaternion{q(0), q(1), q(2), q(3)}.normalized().canonicalized();
  s.spread = std::max(0.0, 1.0 - eig.eigenvalues()(3));
  return s;
}

SirStepRecord sir_step(WeightedEnsemble& ens, const FilterModel& model, double dz, double dt,
                       int threads) {
  if (ens.tag != model.tag) throw std::invalid_argument("sir_step: model/ensemble tag mismatch");
  if (!(dt > 0.0) || !std::isfinite(dz)) throw std::invalid_argument("sir_step: bad dz/dt");
  const std::size_t n = ens.size();
  if (n < 2) throw std::invalid_argument("sir_step: need at least two particles");
  const double sqrt_dt = std::sqrt(dt);
  const Eigen::Vector3d v1 = ens.tag == GroupTag::SO2
                                 ? Eigen::Vector3d(0.0, 0.0, model.diffusion.coord(1))
                                 : model.diffusion.storage();

  std::vector<double> h(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const GroupElement x = ens.element(i);
    Eigen::Vector3d base;
    if (ens.tag == GroupTag::SO2) {
      base = Eigen::Vector3d(0.0, 0.0, model.drift(x).coord(1) * dt);
    } else {
      base = model.drift(x).storage() * dt;
    }
    base += v1 * (sqrt_dt * ens.streams.stream(i).normal(ens.step_count));
    const UnitQuaternion next = ens.states[i] * UnitQuaternion::exp_half(base);
    ens.states[i] = next.normalized();
    h[i] = model.observation(ens.element(i));
  });

  // Log-space reweight with the max exponent subtracted before exponentiating.
  std::vector<double> log_inc(n);
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    log_inc[i] = h[i] * dz - 0.5 * h[i] * h[i] * dt;
    emax = std::max(emax, log_inc[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ens.weights[i] *= std::exp(log_inc[i] - emax);
    total += ens.weights[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("sir_step: weights collapsed");
  }
  for (double& w : ens.weights) w /= total;

  SirStepRecord rec;
  rec.ess = effective_sample_size(ens.weights);
  rec.posterior = weighted_posterior(ens);

  if (rec.ess < 0.5 * static_cast<double>(n)) {
    rec.resampled = true;
    ens.resample_count += 1;
    const double u =
        NoiseStream(ens.streams.seed, NoiseDomain::SirResample, 0).uniform(ens.step_count);
    std::vector<UnitQuaternion> picked(n);
    double cumulative = ens.weights[0];
    std::size_t src = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double pos = (static_cast<double>(j) + u) / static_cast<double>(n);
      while (cumulative < pos && src + 1 < n) {
        ++src;
        cumulative += ens.weights[src];
      }
      picked[j] = ens.states[src];
    }
    ens.states = std::move(picked);
    ens.weights.assign(n, 1.0 / static_cast<double>(n));
  }

  ens.step_count += 1;
  rec.t = static_cast<double>(ens.step_count) * dt;
  return rec;
}

}  // namespace liefpf
