"""Smoke tests for the liefpf extension module (run via ctest)."""

import json
import math
import os
import tempfile

import numpy as np

import liefpf


def test_version():
    major, minor, patch = liefpf.__version__.split(".")
    assert all(part.isdigit() for part in (major, minor, patch))


def test_threefry_known_answers():
    assert liefpf.threefry2x64(0, 0, 0, 0) == (0xC2B6E3A8C2C69865, 0x6F81ED42F350084D)
    assert liefpf.threefry2x64(
        0x243F6A8885A308D3, 0x13198A2E03707344, 0xA4093822299F31D0, 0x082EFA98EC4E6C89
    ) == (0x263C7D30BB0F0AF1, 0x56BE8361D3311526)


def test_noise_stream_moments():
    stream = liefpf.NoiseStream(seed=7, domain=5, stream=3)
    draws = [stream.normal(k) for k in range(20000)]
    assert abs(np.mean(draws)) < 0.03
    assert abs(np.std(draws) - 1.0) < 0.03
    u = [stream.uniform(k, draw=1) for k in range(1000)]
    assert 0.0 < min(u) and max(u) < 1.0


def test_exponentials_agree():
    v = np.array([0.3, -0.7, 0.2])
    r_direct = liefpf.so3_exp(v)
    r_quat = liefpf.quat_to_rotation(liefpf.quat_exp_half(v))
    assert np.abs(r_direct - r_quat).max() < 1e-14
    assert np.abs(r_direct @ r_direct.T - np.eye(3)).max() < 1e-14
    back = liefpf.rotation_to_quat(r_direct)
    assert liefpf.quat_geodesic(back, liefpf.quat_exp_half(v)) < 1e-12


def test_so2_gain_four_particle_example():
    # Symmetric four-point ensemble with h = sin: A = diag(1/2, 1/2), b = (1/2, 0),
    # so kappa = (1, 0) and the gain field is cos(theta).
    phases = [0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0]
    h = [math.sin(t) for t in phases]
    out = liefpf.so2_gain(phases, h)
    assert np.abs(np.asarray(out["kappa"]) - [1.0, 0.0]).max() < 1e-12
    assert out["regularization_used"] == 0.0
    assert np.abs(np.asarray(out["gains"]) - [math.cos(t) for t in phases]).max() < 1e-12


def test_so3_gain_bases_agree():
    rng = np.random.default_rng(11)
    quats = []
    h = []
    for _ in range(40):
        q = liefpf.quat_exp_half(rng.normal(size=3))
        quats.append(q)
        h.append(liefpf.quat_to_rotation(q)[0, 0])
    a = liefpf.so3_gain(quats, h, basis="quaternion_so3")
    b = liefpf.so3_gain(quats, h, basis="matrix_so3")
    assert np.abs(np.asarray(a["kappa"]) - np.asarray(b["kappa"])).max() < 1e-10
    gaps = [np.abs(ga - gb).max() for ga, gb in zip(a["gains"], b["gains"])]
    assert max(gaps) < 1e-10


def test_basis_eval_matches_table():
    r = liefpf.so3_exp(np.array([0.4, 0.1, -0.3]))
    psi, deriv = liefpf.basis_eval("matrix_so3", r)
    assert psi.shape == (4,)
    assert deriv.shape == (3, 4)
    assert abs(psi[0] - 0.5 * (r[1, 2] - r[2, 1])) < 1e-14
    assert abs(psi[3] - 0.5 * (np.trace(r) - 1.0)) < 1e-14


def test_scenario_round_trip():
    config_dir = os.environ.get("LIEFPF_CONFIG_DIR")
    assert config_dir, "LIEFPF_CONFIG_DIR must point at the shipped configs"
    with open(os.path.join(config_dir, "default_so2.json")) as f:
        config = f.read()
    cfg_hash, gen_hash = liefpf.config_hashes(config)
    assert len(cfg_hash) == 16 and len(gen_hash) == 16
    assert cfg_hash != gen_hash

    # a small self-contained run: truth -> filters -> summary
    small = json.dumps(
        {
            "name": "smoke",
            "group": "so2",
            "seed": 3,
            "dt": 1e-3,
            "duration": 0.2,
            "drift": {"kind": "constant", "coords": [0.5]},
            "diffusion": [0.4],
            "observation": "sin_theta",
            "truth_init": {"kind": "point", "coords": [0.3]},
            "prior": {"kind": "gaussian", "sigma": 0.5},
            "fpf": {"particles": 256},
            "grid": {"enabled": True, "nodes": 128},
            "sir": {"enabled": False},
        }
    )
    canonical = json.loads(liefpf.canonical_config(small))
    assert canonical["fpf"]["basis"] == "fourier1_so2"

    with tempfile.TemporaryDirectory() as tmp:
        traj = os.path.join(tmp, "truth.csv")
        steps = liefpf.generate_truth(small, traj)
        assert steps == 200
        summary = json.loads(liefpf.run_scenario(small, traj, os.path.join(tmp, "out"), threads=2))
        assert summary["schema"] == "liefpf.summary.v1"
        assert summary["steps"] == 200
        assert 0.0 < summary["fpf"]["mean_error_vs_truth"] < math.pi
        assert summary["fpf"]["escalated_steps"] == 0
        for name in ("fpf_steps.csv", "grid_steps.csv", "summary.json", "timings.json"):
            assert os.path.exists(os.path.join(tmp, "out", name))


def main():
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith("test_")]
    for name, fn in tests:
        fn()
        print(f"ok {name}")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    main()
