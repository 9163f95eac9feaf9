#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "liefpf/fpf.hpp"
#include "liefpf/lie.hpp"
#include "liefpf/noise.hpp"

namespace liefpf {

// Reference filters the particle filter is judged against: a dense grid solver
// for the exact S^1 posterior and a bootstrap particle filter for SO(3).

/// Probability density on the uniform periodic grid theta_j = 2*pi*j/M.
struct GridDensity {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double spacing() const;
  double node(std::size_t j) const;
  /// Integral of the stored values (should stay 1 after each step).
  double mass() const;
};

/// Uniform density 1/(2*pi) on m nodes; m must be a power of two, m >= 8.
GridDensity uniform_grid_density(std::size_t m);

/// Wrapped normal density on [0, 2*pi), summed over images k in [-8, 8].
double wrapped_normal_density(double theta, double mu, double sigma);

/// SO(2) model sampled at the grid nodes, ready for finite differencing.
struct So2GridModel {
  std::vector<double> drift;  // omega(theta_j)
  std::vector<double> h;      // h(theta_j)
  double sigma = 0.0;
};

So2GridModel sample_grid_model(const FilterModel& model, std::size_t m);

struct GridStepInfo {
  std::size_t substeps = 0;
  double clipped_mass = 0.0;
};

/// One Kushner-Stratonovich step by Lie splitting: Fokker-Planck prediction
/// with explicit central differences (substepped to the CFL limit), then the
/// robust Bayes factor exp(h dz - h^2 dt / 2), negative-value clipping, and
/// renormalization. Throws NumericError if the CFL limit asks for more than
/// 100000 substeps or the posterior mass collapses.
GridStepInfo ks_grid_step(GridDensity& density, const So2GridModel& model, double dz, double dt);

/// Posterior expectation of f under the grid density.
double grid_moment(const GridDensity& density, const std::vector<double>& f_values);
double grid_moment(const GridDensity& density, const std::function<double(double)>& f);

/// Bootstrap (SIR) particle filter state. States live as quaternions for both
/// groups; SO(2) runs on the e3 circle via quat_from_phase. Weights stay
/// normalized between steps.
struct WeightedEnsemble {
  GroupTag tag = GroupTag::SO3;
  std::vector<UnitQuaternion> states;
  std::vector<double> weights;
  NoiseStreams streams;  // SirParticles domain expected
  std::uint64_t step_count = 0;
  std::size_t resample_count = 0;

  std::size_t size() const { return states.size(); }
  GroupElement element(std::size_t i) const;
};

/// Identity-initialized equal-weight ensemble; N >= 2 enforced.
WeightedEnsemble make_weighted_ensemble(GroupTag tag, std::size_t n, NoiseStreams streams);

/// 1 / sum(w^2) for normalized weights.
double effective_sample_size(const std::vector<double>& weights);

struct SirStepRecord {
  double t = 0.0;
  double ess = 0.0;
  bool resampled = false;
  PosteriorSummary posterior;
};

/// One bootstrap step: gain-free geometric propagation, log-space reweight by
/// the same robust Bayes factor, posterior summary before resampling, then
/// systematic resampling when ESS < N/2 (single uniform from the SirResample
/// domain).
SirStepRecord sir_step(WeightedEnsemble& ens, const FilterModel& model, double dz, double dt,
                       int threads = 1);

/// Weighted posterior summary (circular mean for SO(2), quaternion
/// outer-moment eigenvector for SO(3)).
PosteriorSummary weighted_posterior(const WeightedEnsemble& ens);

}  // namespace liefpf
