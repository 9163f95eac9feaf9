#include "liefpf/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "liefpf/errors.hpp"
#include "liefpf/version.hpp"

namespace liefpf {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) bad(std::string("unknown field '") + item.key() + "' in " + where);
  }
}

double get_double(const json& j, const char* key, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) bad(std::string(key) + " must be a number");
  return j[key].get<double>();
}

std::string get_string(const json& j, const char* key, const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_string()) bad(std::string(key) + " must be a string");
  return j[key].get<std::string>();
}

std::vector<double> get_array(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) bad(std::string(key) + " must be an array of numbers");
  for (const auto& v : j[key]) {
    if (!v.is_number()) bad(std::string(key) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

PriorSpec parse_prior(const json& j, const char* where) {
  PriorSpec spec;
  if (!j.is_object()) bad(std::string(where) + " must be an object");
  check_keys(j, {"kind", "coords", "sigma"}, where);
  spec.kind = get_string(j, "kind", "point");
  spec.coords = get_array(j, "coords");
  spec.sigma = get_double(j, "sigma", 0.5);
  return spec;
}

json prior_to_json(const PriorSpec& spec) {
  json j;
  j["kind"] = spec.kind;
  if (spec.kind == "point") j["coords"] = spec.coords;
  if (spec.kind == "gaussian") j["sigma"] = spec.sigma;
  return j;
}

json drift_to_json(const DriftSpec& spec) {
  json j;
  j["kind"] = spec.kind;
  if (spec.kind == "constant") {
    j["coords"] = spec.coords;
  } else {
    j["name"] = spec.name;
    j["scale"] = spec.scale;
  }
  return j;
}

/// Lowercase group id used by the JSON schemas (group_name is the display form).
const char* group_id(GroupTag tag) { return tag == GroupTag::SO2 ? "so2" : "so3"; }

/// Generation-relevant fields only; see generation_hash.
json generation_view(const ScenarioConfig& cfg) {
  json j;
  j["group"] = group_id(cfg.group);
  j["seed"] = cfg.seed;
  j["dt"] = cfg.dt;
  j["duration"] = cfg.duration;
  j["drift"] = drift_to_json(cfg.drift);
  j["diffusion"] = cfg.diffusion;
  j["observation"] = cfg.observation;
  j["truth_init"] = prior_to_json(cfg.truth_init);
  return j;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool so2_observation_known(const std::string& name) {
  return name == "sin_theta" || name == "cos_theta";
}

bool so3_observation_known(const std::string& name) {
  return name == "trace" || name == "e1_R_e1" || name == "r21" || name == "quat_scalar";
}

}  // namespace

std::size_t ScenarioConfig::step_count() const {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

ScenarioConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");
  check_keys(j,
             {"schema", "name", "group", "seed", "dt", "duration", "drift", "diffusion",
              "observation", "truth_init", "prior", "fpf", "grid", "sir"},
             "top level");
  const std::string schema = get_string(j, "schema", "liefpf.scenario.v1");
  if (schema != "liefpf.scenario.v1") bad("unsupported schema '" + schema + "'");

  ScenarioConfig cfg;
  cfg.name = get_string(j, "name", "scenario");
  const std::string group = get_string(j, "group", "so2");
  if (group == "so2") {
    cfg.group = GroupTag::SO2;
  } else if (group == "so3") {
    cfg.group = GroupTag::SO3;
  } else {
    bad("group must be \"so2\" or \"so3\"");
  }
  const int d = group_dim(cfg.group);

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("seed must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.dt = get_double(j, "dt", cfg.dt);
  cfg.duration = get_double(j, "duration", cfg.duration);

  cfg.drift.coords.assign(d, 0.0);
  if (j.contains("drift")) {
    const json& dj = j["drift"];
    if (!dj.is_object()) bad("drift must be an object");
    check_keys(dj, {"kind", "coords", "name", "scale"}, "drift");
    cfg.drift.kind = get_string(dj, "kind", "constant");
    if (dj.contains("coords")) cfg.drift.coords = get_array(dj, "coords");
    cfg.drift.name = get_string(dj, "name", "zero");
    cfg.drift.scale = get_double(dj, "scale", 1.0);
  }

  cfg.diffusion.assign(d, 0.0);
  if (j.contains("diffusion")) cfg.diffusion = get_array(j, "diffusion");

  cfg.observation =
      get_string(j, "observation", cfg.group == GroupTag::SO2 ? "sin_theta" : "e1_R_e1");

  cfg.truth_init.coords.assign(d, 0.0);
  if (j.contains("truth_init")) cfg.truth_init = parse_prior(j["truth_init"], "truth_init");
  if (cfg.truth_init.kind == "point" && cfg.truth_init.coords.empty()) {
    cfg.truth_init.coords.assign(d, 0.0);
  }

  cfg.prior.kind = "gaussian";
  if (j.contains("prior")) cfg.prior = parse_prior(j["prior"], "prior");
  if (cfg.prior.kind == "point" && cfg.prior.coords.empty()) cfg.prior.coords.assign(d, 0.0);

  cfg.fpf.basis = cfg.group == GroupTag::SO2 ? "fourier1_so2" : "quaternion_so3";
  cfg.fpf.representation = cfg.group == GroupTag::SO2 ? "phase" : "quaternion";
  if (j.contains("fpf")) {
    const json& fj = j["fpf"];
    if (!fj.is_object()) bad("fpf must be an object");
    check_keys(fj, {"particles", "basis", "representation", "ridge"}, "fpf");
    cfg.fpf.particles = static_cast<std::size_t>(get_double(fj, "particles", 5000.0));
    cfg.fpf.basis = get_string(fj, "basis", cfg.fpf.basis);
    cfg.fpf.representation = get_string(fj, "representation", cfg.fpf.representation);
    cfg.fpf.ridge = get_double(fj, "ridge", 0.0);
  }

  cfg.grid.enabled = cfg.group == GroupTag::SO2;
  if (j.contains("grid")) {
    const json& gj = j["grid"];
    if (!gj.is_object()) bad("grid must be an object");
    check_keys(gj, {"enabled", "nodes"}, "grid");
    if (gj.contains("enabled")) {
      if (!gj["enabled"].is_boolean()) bad("grid.enabled must be a boolean");
      cfg.grid.enabled = gj["enabled"].get<bool>();
    }
    cfg.grid.nodes = static_cast<std::size_t>(get_double(gj, "nodes", 512.0));
  }

  cfg.sir.enabled = cfg.group == GroupTag::SO3;
  if (j.contains("sir")) {
    const json& sj = j["sir"];
    if (!sj.is_object()) bad("sir must be an object");
    check_keys(sj, {"enabled", "particles"}, "sir");
    if (sj.contains("enabled")) {
      if (!sj["enabled"].is_boolean()) bad("sir.enabled must be a boolean");
      cfg.sir.enabled = sj["enabled"].get<bool>();
    }
    cfg.sir.particles = static_cast<std::size_t>(get_double(sj, "particles", 20000.0));
  }
  return cfg;
}

std::string config_to_json(const ScenarioConfig& cfg) {
  json j = generation_view(cfg);
  j["schema"] = "liefpf.scenario.v1";
  j["name"] = cfg.name;
  j["prior"] = prior_to_json(cfg.prior);
  j["fpf"] = {{"particles", cfg.fpf.particles},
              {"basis", cfg.fpf.basis},
              {"representation", cfg.fpf.representation},
              {"ridge", cfg.fpf.ridge}};
  j["grid"] = {{"enabled", cfg.grid.enabled}, {"nodes", cfg.grid.nodes}};
  j["sir"] = {{"enabled", cfg.sir.enabled}, {"particles", cfg.sir.particles}};
  return j.dump(2) + "\n";
}

std::string config_hash(const ScenarioConfig& cfg) {
  json j = json::parse(config_to_json(cfg));
  return hex16(fnv1a(j.dump()));
}

std::string generation_hash(const ScenarioConfig& cfg) {
  return hex16(fnv1a(generation_view(cfg).dump()));
}

std::vector<std::string> validate_config(const ScenarioConfig& cfg) {
  std::vector<std::string> problems;
  const auto fail = [&](const std::string& m) { problems.push_back(m); };
  const int d = group_dim(cfg.group);
  const bool so2 = cfg.group == GroupTag::SO2;

  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) fail("dt must be positive and finite");
  if (!(cfg.duration > 0.0) || !std::isfinite(cfg.duration)) {
    fail("duration must be positive and finite");
  }
  if (cfg.dt > 0.0 && cfg.duration > 0.0) {
    const double steps = cfg.duration / cfg.dt;
    const double rounded = std::llround(steps);
    if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
      fail("duration must be a whole number of dt steps");
    }
  }

  if (cfg.drift.kind == "constant") {
    if (cfg.drift.coords.size() != static_cast<std::size_t>(d)) {
      fail("drift.coords must have length " + std::to_string(d));
    }
    for (double v : cfg.drift.coords) {
      if (!std::isfinite(v)) fail("drift.coords must be finite");
    }
  } else if (cfg.drift.kind == "named") {
    const bool known =
        cfg.drift.name == "zero" || cfg.drift.name == "sin_theta" || cfg.drift.name == "cos_theta";
    if (!known) fail("unknown drift name '" + cfg.drift.name + "'");
    if (!so2 && cfg.drift.name != "zero") fail("drift '" + cfg.drift.name + "' is SO(2)-only");
    if (!std::isfinite(cfg.drift.scale)) fail("drift.scale must be finite");
  } else {
    fail("drift.kind must be \"constant\" or \"named\"");
  }

  if (cfg.diffusion.size() != static_cast<std::size_t>(d)) {
    fail("diffusion must have length " + std::to_string(d));
  }
  for (double v : cfg.diffusion) {
    if (!std::isfinite(v)) fail("diffusion must be finite");
  }

  const bool obs_known =
      so2 ? so2_observation_known(cfg.observation) : so3_observation_known(cfg.observation);
  if (!obs_known) {
    fail("unknown observation '" + cfg.observation + "' for " + group_name(cfg.group));
  }

  const auto check_prior = [&](const PriorSpec& spec, const char* where, bool allow_prior_kind) {
    if (spec.kind == "prior") {
      if (!allow_prior_kind) fail(std::string(where) + ".kind \"prior\" is truth_init-only");
      return;
    }
    if (spec.kind == "point") {
      if (spec.coords.size() != static_cast<std::size_t>(d)) {
        fail(std::string(where) + ".coords must have length " + std::to_string(d));
      }
      for (double v : spec.coords) {
        if (!std::isfinite(v)) fail(std::string(where) + ".coords must be finite");
      }
    } else if (spec.kind == "gaussian") {
      if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
        fail(std::string(where) + ".sigma must be positive and finite");
      }
    } else if (spec.kind != "uniform") {
      fail(std::string(where) + ".kind must be point, gaussian, or uniform");
    }
  };
  check_prior(cfg.truth_init, "truth_init", true);
  check_prior(cfg.prior, "prior", false);

  if (cfg.fpf.particles < 2) fail("fpf.particles must be at least 2");
  try {
    const BasisId id = basis_from_name(cfg.fpf.basis);
    if (BasisSet(id).tag() != cfg.group) {
      fail("fpf.basis '" + cfg.fpf.basis + "' does not match group " + group_name(cfg.group));
    }
  } catch (const std::invalid_argument&) {
    fail("unknown fpf.basis '" + cfg.fpf.basis + "'");
  }
  try {
    const Representation rep = representation_from_name(cfg.fpf.representation);
    const bool ok = (so2 && rep == Representation::Phase) || (!so2 && rep != Representation::Phase);
    if (!ok) {
      fail("fpf.representation '" + cfg.fpf.representation + "' does not fit group " +
           group_name(cfg.group));
    }
  } catch (const std::invalid_argument&) {
    fail("unknown fpf.representation '" + cfg.fpf.representation + "'");
  }
  if (!(cfg.fpf.ridge >= 0.0) || !std::isfinite(cfg.fpf.ridge)) {
    fail("fpf.ridge must be non-negative and finite");
  }

  if (cfg.grid.enabled) {
    if (!so2) fail("grid oracle is SO(2)-only");
    if (cfg.grid.nodes < 8 || (cfg.grid.nodes & (cfg.grid.nodes - 1)) != 0) {
      fail("grid.nodes must be a power of two >= 8");
    }
  }
  if (cfg.sir.enabled && cfg.sir.particles < 2) fail("sir.particles must be at least 2");
  return problems;
}

void require_valid(const ScenarioConfig& cfg) {
  const std::vector<std::string> problems = validate_config(cfg);
  if (problems.empty()) return;
  std::string msg = "invalid config:";
  for (const std::string& p : problems) msg += "\n  - " + p;
  throw std::invalid_argument(msg);
}

FilterModel build_model(const ScenarioConfig& cfg) {
  FilterModel model;
  model.tag = cfg.group;
  model.diffusion = AlgebraVector::from_coords(
      cfg.group, Eigen::Map<const Eigen::VectorXd>(cfg.diffusion.data(),
                                                   static_cast<Eigen::Index>(cfg.diffusion.size())));

  if (cfg.drift.kind == "constant") {
    const AlgebraVector v = AlgebraVector::from_coords(
        cfg.group, Eigen::Map<const Eigen::VectorXd>(cfg.drift.coords.data(),
                                                     static_cast<Eigen::Index>(
                                                         cfg.drift.coords.size())));
    model.drift = [v](const GroupElement&) { return v; };
  } else if (cfg.drift.name == "zero") {
    const AlgebraVector v = AlgebraVector::zero(cfg.group);
    model.drift = [v](const GroupElement&) { return v; };
  } else if (cfg.drift.name == "sin_theta") {
    const double s = cfg.drift.scale;
    model.drift = [s](const GroupElement& x) {
      return AlgebraVector::so2(s * std::sin(phase_from_so2(x)));
    };
  } else {  // cos_theta
    const double s = cfg.drift.scale;
    model.drift = [s](const GroupElement& x) {
      return AlgebraVector::so2(s * std::cos(phase_from_so2(x)));
    };
  }

  if (cfg.observation == "sin_theta") {
    model.observation = [](const GroupElement& x) { return x.storage()(1, 0); };
  } else if (cfg.observation == "cos_theta") {
    model.observation = [](const GroupElement& x) { return x.storage()(0, 0); };
  } else if (cfg.observation == "trace") {
    model.observation = [](const GroupElement& x) { return x.storage().trace(); };
  } else if (cfg.observation == "e1_R_e1") {
    model.observation = [](const GroupElement& x) { return x.storage()(0, 0); };
  } else if (cfg.observation == "r21") {
    model.observation = [](const GroupElement& x) { return x.storage()(1, 0); };
  } else if (cfg.observation == "quat_scalar") {
    model.observation = [](const GroupElement& x) { return 0.5 * (x.storage().trace() - 1.0); };
  } else {
    throw std::invalid_argument("build_model: unknown observation '" + cfg.observation + "'");
  }
  return model;
}

double sample_prior_phase(const PriorSpec& spec, const NoiseStream& stream) {
  if (spec.kind == "point") return wrap_phase(spec.coords.at(0));
  if (spec.kind == "gaussian") return wrap_phase(spec.sigma * stream.normal(0, 0));
  if (spec.kind == "uniform") return wrap_phase(2.0 * std::numbers::pi * stream.uniform(0, 0));
  throw std::invalid_argument("sample_prior_phase: unsupported kind '" + spec.kind + "'");
}

UnitQuaternion sample_prior_quaternion(GroupTag tag, const PriorSpec& spec,
                                       const NoiseStream& stream) {
  if (tag == GroupTag::SO2) return quat_from_phase(sample_prior_phase(spec, stream));
  if (spec.kind == "point") {
    return UnitQuaternion::exp_half(
        Eigen::Vector3d(spec.coords.at(0), spec.coords.at(1), spec.coords.at(2)));
  }
  if (spec.kind == "gaussian") {
    const Eigen::Vector3d v(spec.sigma * stream.normal(0, 0), spec.sigma * stream.normal(0, 1),
                            spec.sigma * stream.normal(0, 2));
    return UnitQuaternion::exp_half(v);
  }
  if (spec.kind == "uniform") {
    // Normalized 4-vector of iid normals is Haar on the double cover.
    const UnitQuaternion q{stream.normal(0, 0), stream.normal(0, 1), stream.normal(0, 2),
                           stream.normal(0, 3)};
    if (q.norm() < 1e-12) return UnitQuaternion::identity();
    return q.normalized();
  }
  throw std::invalid_argument("sample_prior_quaternion: unsupported kind '" + spec.kind + "'");
}

ParticleEnsemble make_fpf_ensemble(const ScenarioConfig& cfg) {
  require_valid(cfg);
  const Representation rep = representation_from_name(cfg.fpf.representation);
  ParticleEnsemble ens = make_ensemble(cfg.group, rep, cfg.fpf.particles,
                                       NoiseStreams{cfg.seed, NoiseDomain::FpfParticles});
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const NoiseStream prior(cfg.seed, NoiseDomain::FpfPrior, i);
    switch (rep) {
      case Representation::Phase:
        ens.phases[i] = sample_prior_phase(cfg.prior, prior);
        break;
      case Representation::Quaternion:
        ens.quaternions[i] = sample_prior_quaternion(cfg.group, cfg.prior, prior);
        break;
      case Representation::Matrix:
        ens.rotations[i] = quat_to_rotation(sample_prior_quaternion(cfg.group, cfg.prior, prior));
        break;
    }
  }
  return ens;
}

WeightedEnsemble make_sir_ensemble(const ScenarioConfig& cfg) {
  require_valid(cfg);
  WeightedEnsemble ens = make_weighted_ensemble(cfg.group, cfg.sir.particles,
                                                NoiseStreams{cfg.seed, NoiseDomain::SirParticles});
  for (std::size_t i = 0; i < ens.size(); ++i) {
    ens.states[i] =
        sample_prior_quaternion(cfg.group, cfg.prior, NoiseStream(cfg.seed, NoiseDomain::SirPrior, i));
  }
  return ens;
}

GridDensity make_grid_prior(const ScenarioConfig& cfg) {
  require_valid(cfg);
  if (cfg.group != GroupTag::SO2) {
    throw std::invalid_argument("make_grid_prior: grid densities are SO(2)-only");
  }
  GridDensity d = uniform_grid_density(cfg.grid.nodes);
  const std::size_t m = d.size();
  if (cfg.prior.kind == "gaussian") {
    for (std::size_t j = 0; j < m; ++j) {
      d.values[j] = wrapped_normal_density(d.node(j), 0.0, cfg.prior.sigma);
    }
  } else if (cfg.prior.kind == "point") {
    const double theta = wrap_phase(cfg.prior.coords.at(0));
    const std::size_t idx =
        static_cast<std::size_t>(std::llround(theta / d.spacing())) % m;
    d.values.assign(m, 0.0);
    d.values[idx] = 1.0 / d.spacing();
  }
  const double mass = d.mass();
  if (!(mass > 0.0)) throw NumericError("make_grid_prior: prior mass collapsed on the grid");
  for (double& v : d.values) v /= mass;
  return d;
}

GroupElement TruthPath::state(std::size_t k) const {
  if (tag == GroupTag::SO2) return GroupElement::from_phase(phases.at(k));
  return GroupElement::from_quaternion(quaternions.at(k));
}

ObservationPath TruthPath::observations() const { return {times, increments}; }

TruthPath generate_truth(const ScenarioConfig& cfg) {
  require_valid(cfg);
  const FilterModel model = build_model(cfg);
  const std::size_t steps = cfg.step_count();
  const double dt = cfg.dt;
  const double sqrt_dt = std::sqrt(dt);

  TruthPath path;
  path.tag = cfg.group;
  path.seed = cfg.seed;
  path.config_hash = config_hash(cfg);
  path.generation_hash = generation_hash(cfg);
  path.times.reserve(steps);
  path.increments.reserve(steps);

  const NoiseStream init(cfg.seed, NoiseDomain::TruthInit, 0);
  const NoiseStream obs(cfg.seed, NoiseDomain::Observation, 0);
  const NoiseStream dyn(cfg.seed, NoiseDomain::TruthState, 0);
  const PriorSpec& tinit = cfg.truth_init.kind == "prior" ? cfg.prior : cfg.truth_init;

  if (cfg.group == GroupTag::SO2) {
    path.phases.reserve(steps);
    double theta = sample_prior_phase(tinit, init);
    const double sigma = model.diffusion.coord(1);
    for (std::size_t k = 0; k < steps; ++k) {
      const GroupElement x = GroupElement::from_phase(theta);
      const double dz = model.observation(x) * dt + sqrt_dt * obs.normal(k);
      theta = wrap_phase(theta + model.drift(x).coord(1) * dt + sigma * sqrt_dt * dyn.normal(k));
      path.times.push_back(static_cast<double>(k + 1) * dt);
      path.increments.push_back(dz);
      path.phases.push_back(theta);
    }
  } else {
    path.quaternions.reserve(steps);
    UnitQuaternion q = sample_prior_quaternion(cfg.group, tinit, init);
    const Eigen::Vector3d v1 = model.diffusion.storage();
    for (std::size_t k = 0; k < steps; ++k) {
      const GroupElement x = GroupElement::from_quaternion(q);
      const double dz = model.observation(x) * dt + sqrt_dt * obs.normal(k);
      const Eigen::Vector3d dv = model.drift(x).storage() * dt + v1 * (sqrt_dt * dyn.normal(k));
      q = (q * UnitQuaternion::exp_half(dv)).normalized();
      path.times.push_back(static_cast<double>(k + 1) * dt);
      path.increments.push_back(dz);
      path.quaternions.push_back(q);
    }
  }
  return path;
}

void write_trajectory_csv(const TruthPath& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  json header;
  header["schema"] = "liefpf.trajectory.v1";
  header["group"] = group_id(path.tag);
  header["seed"] = path.seed;
  header["steps"] = path.times.size();
  header["config_hash"] = path.config_hash;
  header["generation_hash"] = path.generation_hash;
  header["version"] = kVersion;
  out << "# " << header.dump() << "\n";
  if (path.tag == GroupTag::SO2) {
    out << "t,theta,dz\n";
    for (std::size_t k = 0; k < path.times.size(); ++k) {
      out << fmt17(path.times[k]) << ',' << fmt17(path.phases[k]) << ','
          << fmt17(path.increments[k]) << "\n";
    }
  } else {
    out << "t,qw,qx,qy,qz,dz\n";
    for (std::size_t k = 0; k < path.times.size(); ++k) {
      const UnitQuaternion& q = path.quaternions[k];
      out << fmt17(path.times[k]) << ',' << fmt17(q.w) << ',' << fmt17(q.x) << ',' << fmt17(q.y)
          << ',' << fmt17(q.z) << ',' << fmt17(path.increments[k]) << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + file);
}

namespace {

std::vector<double> split_row(const std::string& line, std::size_t expected,
                              const std::string& file) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error("bad numeric cell in " + file + ": '" + cell + "'");
    }
    if (pos != cell.size()) throw std::runtime_error("bad numeric cell in " + file);
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw std::runtime_error("wrong column count in " + file + ": got " +
                             std::to_string(out.size()));
  }
  return out;
}

}  // namespace

TruthPath read_trajectory_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw std::runtime_error("missing trajectory header line in " + file);
  }
  json header;
  try {
    header = json::parse(line.substr(2));
  } catch (const json::exception& e) {
    throw std::runtime_error("bad trajectory header in " + file + ": " + e.what());
  }
  if (header.value("schema", "") != "liefpf.trajectory.v1") {
    throw std::runtime_error("unsupported trajectory schema in " + file);
  }

  TruthPath path;
  const std::string group = header.value("group", "");
  if (group == "so2") {
    path.tag = GroupTag::SO2;
  } else if (group == "so3") {
    path.tag = GroupTag::SO3;
  } else {
    throw std::runtime_error("bad group in trajectory header: '" + group + "'");
  }
  path.seed = header.value("seed", std::uint64_t{0});
  path.config_hash = header.value("config_hash", "");
  path.generation_hash = header.value("generation_hash", "");

  if (!std::getline(in, line)) throw std::runtime_error("missing column header in " + file);
  const std::string expected_cols = path.tag == GroupTag::SO2 ? "t,theta,dz" : "t,qw,qx,qy,qz,dz";
  if (line != expected_cols) {
    throw std::runtime_error("unexpected columns in " + file + ": '" + line + "'");
  }
  const std::size_t width = path.tag == GroupTag::SO2 ? 3 : 6;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<double> row = split_row(line, width, file);
    path.times.push_back(row[0]);
    if (path.tag == GroupTag::SO2) {
      path.phases.push_back(row[1]);
      path.increments.push_back(row[2]);
    } else {
      path.quaternions.push_back(UnitQuaternion{row[1], row[2], row[3], row[4]});
      path.increments.push_back(row[5]);
    }
  }
  const std::size_t steps = header.value("steps", std::size_t{0});
  if (steps != 0 && steps != path.times.size()) {
    throw std::runtime_error("trajectory row count does not match its header in " + file);
  }
  if (path.times.empty()) throw std::runtime_error("trajectory has no rows: " + file);
  for (std::size_t k = 1; k < path.times.size(); ++k) {
    if (!(path.times[k] > path.times[k - 1])) {
      throw std::runtime_error("trajectory times must be strictly increasing: " + file);
    }
  }
  return path;
}

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg, const TruthPath& path,
                            const std::string& out_dir, int threads) {
  require_valid(cfg);
  if (path.tag != cfg.group) {
    throw std::invalid_argument("run_scenario: trajectory group does not match the config");
  }
  if (path.generation_hash != generation_hash(cfg)) {
    throw std::invalid_argument(
        "run_scenario: trajectory was generated under different dynamics "
        "(generation hash mismatch); regenerate it from this config");
  }
  const std::size_t steps = path.times.size();
  if (steps != cfg.step_count()) {
    throw std::invalid_argument("run_scenario: trajectory step count does not match the config");
  }
  const double dt = cfg.dt;
  for (std::size_t k = 0; k < steps; ++k) {
    const double expected = static_cast<double>(k + 1) * dt;
    if (std::abs(path.times[k] - expected) > 1e-9 * std::max(1.0, expected)) {
      throw std::invalid_argument("run_scenario: trajectory times are not on the dt grid");
    }
  }

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const bool so2 = cfg.group == GroupTag::SO2;

  const FilterModel model = build_model(cfg);
  ParticleEnsemble ens = make_fpf_ensemble(cfg);
  const Representation rep = representation_from_name(cfg.fpf.representation);
  const GainConfig gain{basis_from_name(cfg.fpf.basis), cfg.fpf.ridge};

  GridDensity density;
  So2GridModel grid_model;
  std::vector<double> sin_nodes, cos_nodes;
  if (cfg.grid.enabled) {
    density = make_grid_prior(cfg);
    grid_model = sample_grid_model(model, cfg.grid.nodes);
    sin_nodes.resize(density.size());
    cos_nodes.resize(density.size());
    for (std::size_t j = 0; j < density.size(); ++j) {
      sin_nodes[j] = std::sin(density.node(j));
      cos_nodes[j] = std::cos(density.node(j));
    }
  }
  WeightedEnsemble sir;
  if (cfg.sir.enabled) sir = make_sir_ensemble(cfg);

  std::ofstream fpf_out(fs::path(out_dir) / "fpf_steps.csv");
  if (!fpf_out) throw std::runtime_error("cannot open fpf_steps.csv in " + out_dir);
  fpf_out << (so2 ? "t,mean_phase,concentration,moment_sin,moment_cos,h_hat,kappa_1,kappa_2,"
                    "regularization_used,error_vs_truth"
                  : "t,mean_qw,mean_qx,mean_qy,mean_qz,spread,h_hat,kappa_1,kappa_2,kappa_3,"
                    "kappa_4,regularization_used,error_vs_truth")
          << "\n";
  std::ofstream grid_out;
  if (cfg.grid.enabled) {
    grid_out.open(fs::path(out_dir) / "grid_steps.csv");
    if (!grid_out) throw std::runtime_error("cannot open grid_steps.csv in " + out_dir);
    grid_out << "t,mean_phase,moment_sin,moment_cos,substeps,clipped_mass,error_vs_truth\n";
  }
  std::ofstream sir_out;
  if (cfg.sir.enabled) {
    sir_out.open(fs::path(out_dir) / "sir_steps.csv");
    if (!sir_out) throw std::runtime_error("cannot open sir_steps.csv in " + out_dir);
    sir_out << (so2 ? "t,mean_phase,concentration,ess,resampled,error_vs_truth"
                    : "t,mean_qw,mean_qx,mean_qy,mean_qz,spread,ess,resampled,error_vs_truth")
            << "\n";
  }

  ScenarioMetrics metrics;
  double fpf_seconds = 0.0, grid_seconds = 0.0, sir_seconds = 0.0;
  const auto run_start = std::chrono::steady_clock::now();

  for (std::size_t k = 0; k < steps; ++k) {
    const double dz = path.increments[k];

    auto t0 = std::chrono::steady_clock::now();
    StepRecord rec;
    switch (rep) {
      case Representation::Phase:
        rec = step_phase(ens, model, dz, dt, gain, threads);
        break;
      case Representation::Matrix:
        rec = step_matrix(ens, model, dz, dt, gain, threads);
        break;
      case Representation::Quaternion:
        rec = step_quaternion(ens, model, dz, dt, gain, threads);
        break;
    }
    fpf_seconds += seconds_since(t0);

    double fpf_error = 0.0;
    if (so2) {
      fpf_error = std::abs(phase_difference(rec.posterior.mean_phase, path.phases[k]));
      fpf_out << fmt17(rec.t) << ',' << fmt17(rec.posterior.mean_phase) << ','
              << fmt17(rec.posterior.concentration) << ',' << fmt17(rec.posterior.moment_sin)
              << ',' << fmt17(rec.posterior.moment_cos) << ',' << fmt17(rec.h_hat) << ','
              << fmt17(rec.kappa(0)) << ',' << fmt17(rec.kappa(1)) << ','
              << fmt17(rec.regularization_used) << ',' << fmt17(fpf_error) << "\n";
    } else {
      fpf_error = quat_geodesic(rec.posterior.mean_quaternion, path.quaternions[k]);
      const UnitQuaternion& q = rec.posterior.mean_quaternion;
      fpf_out << fmt17(rec.t) << ',' << fmt17(q.w) << ',' << fmt17(q.x) << ',' << fmt17(q.y) << ','
              << fmt17(q.z) << ',' << fmt17(rec.posterior.spread) << ',' << fmt17(rec.h_hat) << ','
              << fmt17(rec.kappa(0)) << ',' << fmt17(rec.kappa(1)) << ',' << fmt17(rec.kappa(2))
              << ',' << fmt17(rec.kappa(3)) << ',' << fmt17(rec.regularization_used) << ','
              << fmt17(fpf_error) << "\n";
    }
    metrics.fpf_mean_error += fpf_error;
    metrics.fpf_final_error = fpf_error;
    if (rec.regularization_used > cfg.fpf.ridge) metrics.escalated_steps += 1;

    if (cfg.grid.enabled) {
      t0 = std::chrono::steady_clock::now();
      const GridStepInfo info = ks_grid_step(density, grid_model, dz, dt);
      grid_seconds += seconds_since(t0);
      const double msin = grid_moment(density, sin_nodes);
      const double mcos = grid_moment(density, cos_nodes);
      const double gmean = wrap_phase(std::atan2(msin, mcos));
      const double gerr = std::abs(phase_difference(gmean, path.phases[k]));
      grid_out << fmt17(rec.t) << ',' << fmt17(gmean) << ',' << fmt17(msin) << ',' << fmt17(mcos)
               << ',' << info.substeps << ',' << fmt17(info.clipped_mass) << ',' << fmt17(gerr)
               << "\n";
      metrics.grid_mean_error += gerr;
      metrics.fpf_vs_grid_mean_abs_diff_sin += std::abs(rec.posterior.moment_sin - msin);
      metrics.fpf_vs_grid_mean_abs_diff_cos += std::abs(rec.posterior.moment_cos - mcos);
    }

    if (cfg.sir.enabled) {
      t0 = std::chrono::steady_clock::now();
      const SirStepRecord srec = sir_step(sir, model, dz, dt, threads);
      sir_seconds += seconds_since(t0);
      double serr = 0.0, gap = 0.0;
      if (so2) {
        serr = std::abs(phase_difference(srec.posterior.mean_phase, path.phases[k]));
        gap = std::abs(phase_difference(rec.posterior.mean_phase, srec.posterior.mean_phase));
        sir_out << fmt17(srec.t) << ',' << fmt17(srec.posterior.mean_phase) << ','
                << fmt17(srec.posterior.concentration) << ',' << fmt17(srec.ess) << ','
                << (srec.resampled ? 1 : 0) << ',' << fmt17(serr) << "\n";
      } else {
        serr = quat_geodesic(srec.posterior.mean_quaternion, path.quaternions[k]);
        gap = quat_geodesic(rec.posterior.mean_quaternion, srec.posterior.mean_quaternion);
        const UnitQuaternion& q = srec.posterior.mean_quaternion;
        sir_out << fmt17(srec.t) << ',' << fmt17(q.w) << ',' << fmt17(q.x) << ',' << fmt17(q.y)
                << ',' << fmt17(q.z) << ',' << fmt17(srec.posterior.spread) << ','
                << fmt17(srec.ess) << ',' << (srec.resampled ? 1 : 0) << ',' << fmt17(serr)
                << "\n";
      }
      metrics.sir_mean_error += serr;
      metrics.fpf_vs_sir_mean_geodesic += gap;
    }
  }

  const double inv_steps = 1.0 / static_cast<double>(steps);
  metrics.fpf_mean_error *= inv_steps;
  metrics.grid_mean_error *= inv_steps;
  metrics.fpf_vs_grid_mean_abs_diff_sin *= inv_steps;
  metrics.fpf_vs_grid_mean_abs_diff_cos *= inv_steps;
  metrics.sir_mean_error *= inv_steps;
  metrics.fpf_vs_sir_mean_geodesic *= inv_steps;
  metrics.sir_resamples = sir.resample_count;

  json summary;
  summary["schema"] = "liefpf.summary.v1";
  summary["version"] = kVersion;
  summary["name"] = cfg.name;
  summary["group"] = group_id(cfg.group);
  summary["seed"] = cfg.seed;
  summary["config_hash"] = config_hash(cfg);
  summary["generation_hash"] = generation_hash(cfg);
  summary["steps"] = steps;
  summary["dt"] = dt;
  summary["fpf"] = {{"particles", cfg.fpf.particles},
                    {"basis", cfg.fpf.basis},
                    {"representation", cfg.fpf.representation},
                    {"ridge", cfg.fpf.ridge},
                    {"escalated_steps", metrics.escalated_steps},
                    {"max_quat_norm_deviation", ens.max_quat_norm_deviation},
                    {"mean_error_vs_truth", metrics.fpf_mean_error},
                    {"final_error_vs_truth", metrics.fpf_final_error}};
  json comparisons = json::object();
  if (cfg.grid.enabled) {
    summary["grid"] = {{"nodes", cfg.grid.nodes},
                       {"mean_error_vs_truth", metrics.grid_mean_error}};
    comparisons["fpf_vs_grid"] = {
        {"mean_abs_diff_sin", metrics.fpf_vs_grid_mean_abs_diff_sin},
        {"mean_abs_diff_cos", metrics.fpf_vs_grid_mean_abs_diff_cos}};
  }
  if (cfg.sir.enabled) {
    summary["sir"] = {{"particles", cfg.sir.particles},
                      {"resamples", metrics.sir_resamples},
                      {"mean_error_vs_truth", metrics.sir_mean_error}};
    comparisons["fpf_vs_sir"] = {{"mean_geodesic", metrics.fpf_vs_sir_mean_geodesic}};
  }
  summary["comparisons"] = comparisons;

  ScenarioResult result;
  result.metrics = metrics;
  result.summary_json = summary.dump(2) + "\n";
  {
    std::ofstream out(fs::path(out_dir) / "summary.json");
    if (!out) throw std::runtime_error("cannot open summary.json in " + out_dir);
    out << result.summary_json;
  }
  {
    json timings;
    timings["schema"] = "liefpf.timings.v1";
    timings["fpf_seconds"] = fpf_seconds;
    timings["grid_seconds"] = grid_seconds;
    timings["sir_seconds"] = sir_seconds;
    timings["total_seconds"] = seconds_since(run_start);
    std::ofstream out(fs::path(out_dir) / "timings.json");
    if (!out) throw std::runtime_error("cannot open timings.json in " + out_dir);
    out << timings.dump(2) << "\n";
  }
  return result;
}

}  // namespace liefpf
