#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liefpf/fpf.hpp"
#include "liefpf/oracles.hpp"

namespace liefpf {

// Scenario = one complete experiment description: dynamics, observation
// channel, priors, and the filters to run against a generated trajectory.
// Configs live as JSON (schema liefpf.scenario.v1); parse_config applies the
// documented defaults so two configs that spell the same experiment hash the
// same.

struct DriftSpec {
  std::string kind = "constant";  // constant | named
  std::vector<double> coords;     // constant: algebra coordinates, length d
  std::string name = "zero";      // named: zero | sin_theta | cos_theta
  double scale = 1.0;             // named: multiplier
};

/// Distribution on the group. point: exp of the given coordinates. gaussian:
/// exp of an isotropic tangent normal at the identity. uniform: Haar measure.
/// Kind "prior" is allowed for truth_init only and means "reuse the filter
/// prior spec" (with the truth-init noise domain).
struct PriorSpec {
  std::string kind = "point";
  std::vector<double> coords;  // point
  double sigma = 0.5;          // gaussian
};

struct FpfSpec {
  std::size_t particles = 5000;
  std::string basis;           // defaults by group
  std::string representation;  // defaults by group
  double ridge = 0.0;
};

struct GridSpec {
  bool enabled = false;
  std::size_t nodes = 512;
};

struct SirSpec {
  bool enabled = false;
  std::size_t particles = 20000;
};

struct ScenarioConfig {
  std::string name = "scenario";
  GroupTag group = GroupTag::SO2;
  std::uint64_t seed = 42;
  double dt = 1e-3;
  double duration = 2.0;
  DriftSpec drift;
  std::vector<double> diffusion;  // V1 coordinates, length d
  std::string observation = "sin_theta";
  PriorSpec truth_init;
  PriorSpec prior;
  FpfSpec fpf;
  GridSpec grid;
  SirSpec sir;

  std::size_t step_count() const;
};

/// Parse + apply defaults. Throws std::invalid_argument on malformed JSON or
/// wrong field types; semantic problems are reported by validate_config.
ScenarioConfig parse_config(const std::string& json_text);

/// Canonical effective form (sorted keys, defaults materialized).
std::string config_to_json(const ScenarioConfig& cfg);

/// Semantic checks; returns human-readable failures, empty when valid.
std::vector<std::string> validate_config(const ScenarioConfig& cfg);

/// Throws std::invalid_argument listing every validate_config failure.
void require_valid(const ScenarioConfig& cfg);

/// FNV-1a over the canonical JSON, 16 hex digits. config_hash covers the whole
/// effective config; generation_hash covers only the fields that determine the
/// truth trajectory (group, seed, dt, duration, drift, diffusion, observation,
/// truth_init), so one trajectory can serve runs that differ in filter setup.
std::string config_hash(const ScenarioConfig& cfg);
std::string generation_hash(const ScenarioConfig& cfg);

FilterModel build_model(const ScenarioConfig& cfg);

/// Prior samplers. Draws come from the given stream at step 0; the spec kind
/// decides how many uniforms/normals are consumed.
double sample_prior_phase(const PriorSpec& spec, const NoiseStream& stream);
UnitQuaternion sample_prior_quaternion(GroupTag tag, const PriorSpec& spec,
                                       const NoiseStream& stream);

/// FPF ensemble with the prior sampled per particle (FpfPrior domain) and
/// particle streams in the FpfParticles domain.
ParticleEnsemble make_fpf_ensemble(const ScenarioConfig& cfg);

/// SIR ensemble, same shape with the Sir* domains.
WeightedEnsemble make_sir_ensemble(const ScenarioConfig& cfg);

/// Grid discretization of the prior (SO(2) only); point priors become a
/// single-node spike, and the result is renormalized on the grid.
GridDensity make_grid_prior(const ScenarioConfig& cfg);

/// Truth trajectory: row k holds the state at t = (k+1) dt and the observation
/// increment dZ_k = h(X_k) dt + sqrt(dt) xi_k accumulated over the step that
/// produced it.
struct TruthPath {
  GroupTag tag = GroupTag::SO2;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string generation_hash;
  std::vector<double> times;
  std::vector<double> increments;
  std::vector<double> phases;              // SO2
  std::vector<UnitQuaternion> quaternions;  // SO3

  GroupElement state(std::size_t k) const;
  ObservationPath observations() const;
};

TruthPath generate_truth(const ScenarioConfig& cfg);

/// CSV with one '#'-prefixed JSON header line (schema liefpf.trajectory.v1),
/// then a column header and %.17g rows.
void write_trajectory_csv(const TruthPath& path, const std::string& file);
TruthPath read_trajectory_csv(const std::string& file);

struct ScenarioMetrics {
  double fpf_mean_error = 0.0;
  double fpf_final_error = 0.0;
  std::size_t escalated_steps = 0;
  double grid_mean_error = 0.0;
  double fpf_vs_grid_mean_abs_diff_sin = 0.0;
  double fpf_vs_grid_mean_abs_diff_cos = 0.0;
  double sir_mean_error = 0.0;
  double fpf_vs_sir_mean_geodesic = 0.0;
  std::size_t sir_resamples = 0;
};

struct ScenarioResult {
  ScenarioMetrics metrics;
  std::string summary_json;  // what was written to summary.json
};

/// Run the configured filters against a trajectory and write fpf_steps.csv,
/// grid_steps.csv / sir_steps.csv (when enabled), summary.json, and the
/// timings.json sidecar into out_dir. Refuses (std::invalid_argument) when the
/// trajectory's generation_hash does not match the config. Everything except
/// timings.json is byte-deterministic for a given config + trajectory.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const TruthPath& path,
                            const std::string& out_dir, int threads = 1);

}  // namespace liefpf
