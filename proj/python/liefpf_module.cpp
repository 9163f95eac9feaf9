#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "liefpf/galerkin.hpp"
#include "liefpf/lie.hpp"
#include "liefpf/noise.hpp"
#include "liefpf/scenario.hpp"
#include "liefpf/version.hpp"

namespace py = pybind11;
using namespace liefpf;

namespace {

GroupTag tag_from_name(const std::string& group) {
  if (group == "so2") return GroupTag::SO2;
  if (group == "so3") return GroupTag::SO3;
  throw std::invalid_argument("group must be \"so2\" or \"so3\"");
}

UnitQuaternion quat_from_vec(const Eigen::Vector4d& q) {
  return UnitQuaternion{q(0), q(1), q(2), q(3)};
}

/// kappa + per-particle gains for an SO(2) ensemble given as phases.
py::dict so2_gain(const std::vector<double>& phases, const std::vector<double>& h, double ridge) {
  const BasisSet basis(BasisId::Fourier1So2);
  std::vector<BasisEval> evals(phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) evals[i] = basis.evaluate_phase(phases[i]);
  const GalerkinSystem sys = assemble_from_evals(basis, evals, h);
  const GainCoefficients gain = solve_gain(basis, sys, ridge);
  std::vector<double> gains(phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) gains[i] = gain_from_eval(evals[i], gain.kappa)(0);
  py::dict out;
  out["kappa"] = gain.kappa;
  out["regularization_used"] = gain.regularization_used;
  out["gains"] = gains;
  return out;
}

/// Same for SO(3), ensemble given as scalar-first quaternion rows.
py::dict so3_gain(const std::vector<Eigen::Vector4d>& quats, const std::vector<double>& h,
                  const std::string& basis_name, double ridge) {
  const BasisSet basis(basis_from_name(basis_name));
  if (basis.tag() != GroupTag::SO3) throw std::invalid_argument("so3_gain: SO(3) basis required");
  std::vector<BasisEval> evals(quats.size());
  for (std::size_t i = 0; i < quats.size(); ++i) {
    evals[i] = basis.evaluate_quaternion(quat_from_vec(quats[i]).normalized());
  }
  const GalerkinSystem sys = assemble_from_evals(basis, evals, h);
  const GainCoefficients gain = solve_gain(basis, sys, ridge);
  std::vector<Eigen::Vector3d> gains(quats.size());
  for (std::size_t i = 0; i < quats.size(); ++i) gains[i] = gain_from_eval(evals[i], gain.kappa);
  py::dict out;
  out["kappa"] = gain.kappa;
  out["regularization_used"] = gain.regularization_used;
  out["gains"] = gains;
  return out;
}

}  // namespace

PYBIND11_MODULE(liefpf, m) {
  m.doc() = "Feedback particle filtering on SO(2) and SO(3)";
  m.attr("__version__") = std::string(kVersion).substr(std::string(kVersion).find(' ') + 1);

  m.def(
      "threefry2x64",
      [](std::uint64_t c0, std::uint64_t c1, std::uint64_t k0, std::uint64_t k1) {
        const auto out = threefry2x64({c0, c1}, {k0, k1});
        return py::make_tuple(out[0], out[1]);
      },
      py::arg("c0"), py::arg("c1"), py::arg("k0"), py::arg("k1"),
      "Threefry-2x64-20 block: (counter, key) -> two 64-bit words");

  py::class_<NoiseStream>(m, "NoiseStream")
      .def(py::init([](std::uint64_t seed, std::uint64_t domain, std::uint64_t stream) {
             return NoiseStream(seed, static_cast<NoiseDomain>(domain), stream);
           }),
           py::arg("seed"), py::arg("domain"), py::arg("stream"))
      .def("normal", &NoiseStream::normal, py::arg("step"), py::arg("draw") = 0)
      .def("uniform", &NoiseStream::uniform, py::arg("step"), py::arg("draw") = 0);

  m.def(
      "algebra_basis",
      [](const std::string& group, int n) { return algebra_basis(tag_from_name(group), n); },
      py::arg("group"), py::arg("n"), "n-th algebra basis matrix (1-based)");
  m.def("so3_exp", &so3_exp, py::arg("v"), "Rodrigues exponential of so(3) coordinates");
  m.def("wrap_phase", &wrap_phase, py::arg("theta"));
  m.def("phase_difference", &phase_difference, py::arg("a"), py::arg("b"));
  m.def(
      "quat_to_rotation",
      [](const Eigen::Vector4d& q) { return quat_to_rotation(quat_from_vec(q).normalized()); },
      py::arg("q"), "Rotation matrix of a scalar-first unit quaternion");
  m.def(
      "rotation_to_quat",
      [](const Eigen::Matrix3d& r) { return rotation_to_quat(r).canonicalized().coeffs(); },
      py::arg("r"), "Canonical scalar-first quaternion of a rotation matrix");
  m.def(
      "quat_exp_half",
      [](const Eigen::Vector3d& v) { return UnitQuaternion::exp_half(v).coeffs(); }, py::arg("v"),
      "Quaternion of the rotation exp(sum v_n E_n)");
  m.def(
      "quat_geodesic",
      [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
        return quat_geodesic(quat_from_vec(a).normalized(), quat_from_vec(b).normalized());
      },
      py::arg("a"), py::arg("b"), "Geodesic distance on SO(3), in [0, pi]");

  m.def(
      "basis_eval",
      [](const std::string& basis_name, const Eigen::Matrix3d& r) {
        const BasisSet basis(basis_from_name(basis_name));
        const auto [psi, deriv] = evaluate_basis(basis, GroupElement::from_matrix(GroupTag::SO3, r));
        return py::make_tuple(psi, deriv);
      },
      py::arg("basis"), py::arg("r"),
      "Basis functions and their derivative table at an SO(3) element");
  m.def("so2_gain", &so2_gain, py::arg("phases"), py::arg("h"), py::arg("ridge") = 0.0);
  m.def("so3_gain", &so3_gain, py::arg("quats"), py::arg("h"),
        py::arg("basis") = "quaternion_so3", py::arg("ridge") = 0.0);

  m.def(
      "canonical_config",
      [](const std::string& config_json) { return config_to_json(parse_config(config_json)); },
      py::arg("config_json"), "Effective config with defaults materialized (canonical JSON)");
  m.def(
      "config_hashes",
      [](const std::string& config_json) {
        const ScenarioConfig cfg = parse_config(config_json);
        require_valid(cfg);
        return py::make_tuple(config_hash(cfg), generation_hash(cfg));
      },
      py::arg("config_json"), "(config_hash, generation_hash) of a config");
  m.def(
      "generate_truth",
      [](const std::string& config_json, const std::string& out_path) {
        const ScenarioConfig cfg = parse_config(config_json);
        require_valid(cfg);
        const TruthPath path = generate_truth(cfg);
        write_trajectory_csv(path, out_path);
        return path.times.size();
      },
      py::arg("config_json"), py::arg("out_path"),
      "Simulate the truth trajectory; returns the step count");
  m.def(
      "run_scenario",
      [](const std::string& config_json, const std::string& trajectory_path,
         const std::string& out_dir, int threads) {
        const ScenarioConfig cfg = parse_config(config_json);
        require_valid(cfg);
        const TruthPath path = read_trajectory_csv(trajectory_path);
        return run_scenario(cfg, path, out_dir, threads).summary_json;
      },
      py::arg("config_json"), py::arg("trajectory_path"), py::arg("out_dir"),
      py::arg("threads") = 1, "Run the configured filters; returns the summary JSON");
}
