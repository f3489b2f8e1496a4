import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from adiabound.criteria import omega_max
from adiabound.errors import ContractError
from adiabound.propagator import (
    SchwingerParams,
    StateTrajectory,
    adiabatic_amplitudes,
    infidelity,
    propagate,
    schwinger_exact,
    simulate,
    trajectory_table,
    write_trajectory,
)
from adiabound.schedules import (
    TimeGrid,
    build_grid,
    dressed,
    evaluate_h,
    random_smooth,
    schwinger,
)
from adiabound.spectral import frame_track

from conftest import SZ, random_unit_vector


def _rotating_frame_exact(p: SchwingerParams, t):
    """Diabatic propagator through the frame rotating with the field, by matrix exponential."""
    static = -0.5 * np.array([[p.omega0 * math.cos(p.theta) - p.omega_l, p.omega0 * math.sin(p.theta)], [p.omega0 * math.sin(p.theta), -(p.omega0 * math.cos(p.theta) - p.omega_l)]])
    v = np.diag([np.exp(0.5j * p.omega_l * t), np.exp(-0.5j * p.omega_l * t)])
    return v @ expm(-1j * static * t)


def test_static_state_acquires_phase():
    w0 = 1.3
    spec = dressed(w0, 0.0, (0, 7))
    traj = propagate(spec, np.array([1, 0], dtype=complex), TimeGrid(np.linspace(0, 7, 15)), 1e-12)
    expected = np.exp(0.5j * w0 * traj.times)
    np.testing.assert_allclose(traj.diabatic[:, 0], expected, atol=1e-10)
    assert np.all(traj.diabatic[:, 1] == 0)


def test_resonant_rabi_formula():
    rabi = 0.9
    spec = dressed(0.0, rabi, (0, 30))
    traj = propagate(spec, np.array([1, 0], dtype=complex), TimeGrid(np.linspace(0, 30, 301)), 1e-10)
    np.testing.assert_allclose(np.abs(traj.diabatic[:, 1]) ** 2, np.sin(rabi * traj.times / 2) ** 2, atol=1e-8)


def test_schwinger_matches_exact_propagator():
    p = SchwingerParams(1.0, 0.3, 0.2)
    spec = schwinger(p.omega0, p.theta, p.omega_l, (0, 50))
    grid = TimeGrid(np.linspace(0, 50, 101))
    for psi0 in (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)):
        traj = propagate(spec, psi0, grid, 1e-10)
        exact = np.array([schwinger_exact(p, t, "diabatic") @ psi0 for t in grid.times])
        np.testing.assert_allclose(traj.diabatic, exact, atol=1e-8)


def test_exact_identity_at_zero():
    p = SchwingerParams(1.2, 0.8, -0.4)
    np.testing.assert_allclose(schwinger_exact(p, 0.0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(schwinger_exact(p, 0.0, "diabatic"), np.eye(2), atol=1e-15)
    with pytest.raises(ValueError):
        schwinger_exact(p, 1.0, "lab")


def test_exact_on_resonance_magnitudes():
    th = 0.7
    p = SchwingerParams(1.0, th, 1.0 / math.cos(th))
    assert abs(p.detuning_l) < 1e-15
    for t in (0.3, 2.0, 11.0):
        u = schwinger_exact(p, t)
        assert abs(abs(u[0, 1]) - abs(math.sin(p.rabi_r * t / 2))) < 1e-14
        assert abs(abs(u[0, 0]) - abs(math.cos(p.rabi_r * t / 2))) < 1e-14


def test_exact_max_transition():
    p = SchwingerParams(1.0, math.pi / 2, 0.2)
    assert abs(p.rabi_r - math.sqrt(1.04)) < 1e-15
    ts = np.linspace(0, 2 * math.pi / p.rabi_r, 2001)
    peak = max(abs(schwinger_exact(p, t)[1, 0]) ** 2 for t in ts)
    assert abs(peak - 0.04 / 1.04) < 1e-9


def test_exact_matches_rotating_frame_exponential():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = SchwingerParams(rng.uniform(0.5, 2), rng.uniform(0.05, 3.09), rng.uniform(-2, 2))
        for t in rng.uniform(0, 30, 3):
            np.testing.assert_allclose(schwinger_exact(p, t, "diabatic"), _rotating_frame_exact(p, t), atol=1e-12)


@settings(max_examples=60)
@given(st.floats(0.5, 2), st.floats(0.05, math.pi - 0.05), st.floats(-2, 2), st.floats(0, 100))
def test_exact_is_unitary(w0, th, wl, t):
    p = SchwingerParams(w0, th, wl)
    for basis in ("adiabatic", "diabatic"):
        u = schwinger_exact(p, t, basis)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-12)


def test_random_system_matches_scipy_dop853():
    spec = random_smooth(4, 21, (0, 12), complex_entries=True)
    psi0 = random_unit_vector(np.random.default_rng(0), 4)
    grid = TimeGrid(np.linspace(0, 12, 61))
    traj = propagate(spec, psi0, grid, 1e-11)
    ref = solve_ivp(
        lambda t, y: -1j * evaluate_h(spec, t) @ y, (0, 12), psi0, method="DOP853", t_eval=grid.times, rtol=1e-13, atol=1e-13
    )
    np.testing.assert_allclose(traj.diabatic, ref.y.T, atol=1e-8)


@pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10, 1e-12])
def test_norm_drift_within_ten_tol(tol):
    spec = random_smooth(5, 2, (0, 80), complex_entries=True)
    traj = propagate(spec, random_unit_vector(np.random.default_rng(1), 5), build_grid(spec, 401), tol)
    assert traj.norm_drift <= 10 * tol
    assert traj.stats["accepted"] > 0


def test_input_validation():
    spec = dressed(1.0, 0.5, (0, 1))
    grid = TimeGrid(np.linspace(0, 1, 3))
    with pytest.raises(ValueError):
        propagate(spec, [1, 1], grid)
    with pytest.raises(ValueError):
        propagate(spec, [1, 0, 0], grid)
    with pytest.raises(ValueError):
        propagate(spec, [1, 0], grid, tol=1e-3)
    with pytest.raises(ValueError):
        propagate(spec, [1, 0], TimeGrid(np.linspace(0, 2, 3)))
    with pytest.raises(ValueError):
        simulate(spec)


def test_static_eigenstate_amplitude_is_one():
    spec = dressed(1.5, 0.8, (0, 20))
    for choice in ("theta1", "theta2"):
        traj, _ = simulate(spec, level=1, tol=1e-12, phase_choice=choice, n_min=41)
        np.testing.assert_allclose(traj.adiabatic_b[:, 1], 1.0, atol=1e-9)
        np.testing.assert_allclose(traj.adiabatic_b[:, 0], 0.0, atol=1e-12)


def test_phase_choices_share_magnitudes():
    spec = random_smooth(3, 4, (0, 10), complex_entries=True)
    traj1, track = simulate(spec, level=0, tol=1e-10)
    traj2 = adiabatic_amplitudes(traj1, track, "theta2")
    np.testing.assert_allclose(np.abs(traj1.adiabatic_b), np.abs(traj2.adiabatic_b), atol=1e-14)
    assert np.abs(traj2.correction_phase).max() > 0
    assert np.all(traj1.correction_phase == 0)


def test_adiabatic_frame_is_unitary():
    spec = random_smooth(4, 8, (0, 15), complex_entries=True)
    psi0 = random_unit_vector(np.random.default_rng(5), 4)
    traj, _ = simulate(spec, psi0, tol=1e-10)
    norms = np.linalg.norm(traj.diabatic, axis=1) ** 2
    np.testing.assert_allclose(traj.populations.sum(axis=1), norms, atol=1e-10)


def test_resonance_transfers_population():
    spec = schwinger(1.0, 0.02, 1.0, (0, 200))
    traj, _ = simulate(spec, level=0, tol=1e-10, n_min=2001)
    assert traj.populations[:, 1].max() >= 0.99


def test_amplitudes_need_matching_grid():
    spec = dressed(1.0, 0.4, (0, 2))
    traj = propagate(spec, [1, 0], TimeGrid(np.linspace(0, 2, 5)))
    track = frame_track(spec, TimeGrid(np.linspace(0, 2, 6)))
    with pytest.raises(ContractError):
        adiabatic_amplitudes(traj, track)
    with pytest.raises(ContractError):
        traj.populations


def _with_b(b):
    b = np.asarray(b, dtype=complex)[None, :]
    return StateTrajectory(TimeGrid(np.array([0.0, 1.0])), np.zeros((2, b.shape[1]), complex), 1e-10, 0.0, adiabatic_b=np.repeat(b, 2, axis=0))


def test_infidelity_arithmetic():
    assert infidelity(_with_b([1, 0]), 0) == (0.0, 0.0)
    one_minus, proj = infidelity(_with_b([math.sqrt(0.75), 0.5]), 0)
    assert abs(one_minus - (1 - math.sqrt(0.75))) < 1e-15
    assert abs(proj - 0.5) < 1e-15


def test_complete_transfer_on_resonance():
    th, w0 = 0.5, 1.0
    wl = w0 / math.cos(th)
    p = SchwingerParams(w0, th, wl)
    spec = schwinger(w0, th, wl, (0, math.pi / p.rabi_r))
    traj, _ = simulate(spec, level=0, tol=1e-12, n_min=2001)
    one_minus, proj = infidelity(traj, 0)
    assert abs(one_minus - 1) < 1e-8
    assert abs(proj - 1) < 1e-8


@settings(max_examples=25)
@given(st.integers(2, 5), st.integers(0, 2**31), st.floats(0.01, 0.3))
def test_zeno_short_time_law(n, seed, duration):
    spec = random_smooth(n, seed, (0, duration), complex_entries=True)
    traj, track = simulate(spec, level=0, tol=1e-12, n_min=201)
    _, omega_n, _ = omega_max(track, 0)
    assert 1 - abs(traj.adiabatic_b[-1, 0]) <= (n - 1) * omega_n**2 * duration**2 / 2 + 1e-9


def test_trajectory_table(tmp_path):
    spec = dressed(1.0, 0.4, (0, 2))
    traj, _ = simulate(spec, level=0, n_min=5)
    header, rows = trajectory_table(traj)
    assert header == ["t", "re_psi_0", "im_psi_0", "re_psi_1", "im_psi_1", "pop_b_0", "pop_b_1", "norm_drift"]
    assert len(rows) == len(traj.times)
    write_trajectory(traj, tmp_path / "traj.json", "json")
    doc = json.loads((tmp_path / "traj.json").read_text())
    assert doc["columns"] == header and len(doc["rows"]) == len(rows)


FALLBACK_SCRIPT = """
import json, numpy as np
from adiabound import _jit
from adiabound.schedules import random_smooth, build_grid
from adiabound.propagator import propagate
spec = random_smooth(3, 12, (0, 20), complex_entries=True)
psi0 = np.ones(3, dtype=complex) / np.sqrt(3)
traj = propagate(spec, psi0, build_grid(spec, 41), 1e-10)
print(json.dumps({"numba": _jit.NUMBA_ENABLED, "re": traj.diabatic.real.tolist(), "im": traj.diabatic.imag.tolist(), "steps": traj.stats["accepted"]}))
"""


def _run_kernel_script(disable):
    env = dict(os.environ)
    env.pop("ADIABOUND_DISABLE_NUMBA", None)
    if disable:
        env["ADIABOUND_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", FALLBACK_SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_numpy_fallback_matches_compiled_kernels():
    fast = _run_kernel_script(False)
    slow = _run_kernel_script(True)
    assert fast["numba"] and not slow["numba"]
    a = np.array(fast["re"]) + 1j * np.array(fast["im"])
    b = np.array(slow["re"]) + 1j * np.array(slow["im"])
    np.testing.assert_allclose(a, b, atol=1e-9)
    assert abs(fast["steps"] - slow["steps"]) <= 0.01 * fast["steps"] + 2
