import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiabound import criteria as C
from adiabound.errors import ConvergenceError, DegeneracyError, PreconditionError
from adiabound.propagator import SchwingerParams, simulate
from adiabound.schedules import TimeGrid, build_grid, cycling, dressed, linear_chirp, random_smooth, schwinger
from adiabound.spectral import frame_track


def _track(spec, n_min=401):
    return frame_track(spec, build_grid(spec, n_min))


@pytest.fixture(scope="module")
def transverse():
    spec = schwinger(1.0, math.pi / 2, 0.2, (0, 100))
    return _track(spec, 801)


def test_static_usual_condition_zero():
    series, mx = C.usual_condition(_track(dressed(1.0, 0.5, (0, 3)), 11), 0)
    assert mx == 0 and np.all(series == 0)


def test_schwinger_usual_condition(transverse):
    # |<+|dH|->| / gap^2 = (Omega_L / 2) / omega0
    _, mx = C.usual_condition(transverse, 0)
    assert abs(mx - 0.1) < 1e-12


def test_schwinger_functionals(transverse):
    a1 = C.a_functionals(transverse, "a1")
    np.testing.assert_allclose(2 * np.abs(a1.values[:, 1, 0]), 0.2, atol=1e-9)
    a2 = C.a_functionals(transverse, "a2")
    closed = 0.2 / (1 + math.sqrt(1.04))
    assert abs(closed - 0.0990195135927848) < 1e-15
    np.testing.assert_allclose(np.abs(a2.values[:, 1, 0]), closed, atol=1e-10)
    assert abs(C.a2_schwinger(0.2, -1.0) - closed) < 1e-15
    a0 = C.a_functionals(transverse, "a0")
    np.testing.assert_allclose(np.abs(a0.values[:, 1, 0]), 0.1, atol=1e-12)


def test_omega_examples(transverse):
    assert C.omega_max(_track(dressed(1.0, 0.5, (0, 3)), 11), 0)[:2] == (0.0, 0.0)
    om, om_n, _ = C.omega_max(transverse, 0)
    assert abs(om - 0.1) < 1e-12 and abs(om_n - 0.1) < 1e-12
    spec = random_smooth(3, 14, (0, 10))
    om, om_n, bound = C.omega_max(_track(spec), 1)
    assert om_n <= om <= bound


def test_total_variation_examples():
    assert C.total_variation(np.full(10, 3.0)) == 0
    ramp = np.linspace(-2, 5, 50) ** 3
    assert abs(C.total_variation(ramp) - (ramp[-1] - ramp[0])) < 1e-12
    t = np.linspace(0, 2 * math.pi, 2001)
    assert abs(C.total_variation(np.sin(t)) - 4.0) < 0.04
    with pytest.raises(ValueError):
        C.total_variation([0, np.inf])


def test_monotonicity_examples():
    assert C.monotonicity_changes(np.linspace(0, 1, 100)) == 0
    for m in range(1, 7):
        t = np.linspace(0, m * math.pi, 200 * m + 1)
        assert C.monotonicity_changes(np.cos(t)) == m - 1
    noisy = np.linspace(0, 1, 200) + 1e-9 * np.random.default_rng(0).normal(size=200)
    assert C.monotonicity_changes(noisy, noise_tol=1e-6) == 0


def test_cycling_passage_counts():
    for m in range(1, 5):
        spec = cycling(5.0, 1.0, 1.0, (0, m * math.pi))
        assert C.passage_count(_track(spec)) == m
    one_period = cycling(5.0, 1.0, 1.0, (0, 2 * math.pi))
    assert C.passage_count(_track(one_period)) == 2


def test_mixing_angle_needs_two_levels():
    with pytest.raises(PreconditionError):
        C.mixing_angle(_track(random_smooth(3, 1, (0, 1)), 11))


def test_zeno_examples():
    assert C.zeno_bound(0.0, 2, 5.0) == (0.0, 0.0)
    cos_b, quad = C.zeno_bound(0.5, 2, 1.0)
    assert abs(cos_b - (1 - math.cos(0.5))) < 1e-15 and abs(cos_b - 0.12242) < 1e-5
    assert quad == 0.125
    assert C.zeno_bound(1.0, 3, 1.0)[0] == pytest.approx(1 - math.cos(math.sqrt(2)))
    assert C.zeno_bound(2.0, 2, 10.0)[0] == 2.0


def test_pointfix_examples():
    zero = C.pointfix_bounds(0.0, 0.0, 0.3, 10.0, 4)
    assert zero.b_minus == 0 and zero.one_minus_b_plus == 0 and not zero.vacuous
    a, tv, om, T = 0.01, 0.02, 0.1, 5.0
    two = C.pointfix_bounds(a, tv, om, T, 2)
    assert abs(two.b_minus - (2 * a + tv) / (1 - a * om * T)) < 1e-15
    assert abs(two.one_minus_b_plus - (2 * a * om * T + 2 * (a + tv) ** 2)) < 1e-15
    second = C.pointfix_bounds(a, tv, om, T, 2, second_order=True)
    assert abs(second.b_minus - (2 * a + tv)) < 1e-15
    assert C.pointfix_bounds(0.5, 0.1, 1.0, 10.0, 3).vacuous
    assert C.pointfix_bounds(math.inf, 0.0, 1.0, 1.0, 2).b_minus == math.inf


def test_static_conditions_all_satisfied():
    rep = C.criteria_report(_track(dressed(2.0, 0.0, (0, 5)), 11))
    for cond in C.Condition:
        v = C.check_conditions(rep, cond)
        assert v.satisfied and v.lhs == 0


def test_slow_transverse_field_satisfies_two_level_condition():
    spec = schwinger(1.0, math.pi / 2, 0.02, (0, 300))
    rep = C.criteria_report(_track(spec, 601))
    assert abs(2 * rep.a_max["a1"] - 0.02) < 1e-9
    assert rep.passages == 1
    v = C.check_conditions(rep, "eq_two_level_M")
    assert v.satisfied and v.rhs == 1


def test_many_passages_violate_two_level_condition():
    # 2|A1| at a crossing is alpha omega / Omega0^2 = 0.05
    spec = cycling(5.0, 0.01, 1.0, (0, 4 * math.pi / 0.01))
    rep = C.criteria_report(_track(spec, 4001))
    v = C.check_conditions(rep, C.Condition.TWO_LEVEL_M)
    assert rep.passages == 4 and v.rhs == 1 / 16
    assert abs(v.lhs - 0.05) < 1e-4
    assert not v.satisfied


def test_two_level_condition_needs_two_levels():
    rep = C.criteria_report(_track(random_smooth(3, 2, (0, 10))))
    with pytest.raises(PreconditionError):
        C.check_conditions(rep, "eq_two_level_M")


def test_monotonic_condition_subdivides():
    spec = cycling(5.0, 0.05, 1.0, (0, 2 * math.pi / 0.05))
    rep = C.criteria_report(_track(spec, 2001))
    assert rep.m_count.any()
    v = C.check_conditions(rep, "eq_monotonic")
    assert "monotone pieces" in v.note
    # the summed pieces are at least the single worst piece
    assert v.lhs >= rep.a_max["a1"]
    with pytest.raises(PreconditionError):
        C.check_conditions(rep, "eq_monotonic", subdivide=False)


def test_resonance_pole_violates_first_order_conditions():
    th = 0.4
    spec = schwinger(1.0, th, 1 / math.cos(th), (0, 10))
    rep = C.criteria_report(_track(spec))
    assert rep.a1.has_poles and rep.a_max["a1"] == math.inf
    assert abs(rep.a_max["a2"] - 1.0) < 1e-10
    for cond in ("eq_not_optimized", "eq_monotonic", "eq_two_level_M"):
        v = C.check_conditions(rep, cond)
        assert not v.satisfied and v.lhs == math.inf
    assert rep.pointfix["theta1"].vacuous


def test_real_two_level_condition():
    series, mx = C.real_two_level_condition(_track(dressed(1.0, 2.0, (0, 2)), 11))
    assert mx == 0
    beta, rabi = 1.3, 0.9
    spec = linear_chirp(beta, rabi, (-20, 20))
    track = frame_track(spec, TimeGrid(np.linspace(-20, 20, 4001)))
    series, _ = C.real_two_level_condition(track)
    mid = np.argmin(np.abs(track.times))
    assert abs(series[mid] - beta / rabi**2) < 1e-12
    a1 = C.a_functionals(track, "a1")
    np.testing.assert_allclose(series, 2 * np.abs(a1.values[:, 1, 0]), atol=1e-8)
    with pytest.raises(PreconditionError):
        C.real_two_level_condition(_track(schwinger(1.0, 0.3, 0.2, (0, 3)), 11))


def test_a2_solver_convergence_error(monkeypatch):
    monkeypatch.setattr(C, "FIXED_POINT_MAX_ITER", 2)
    track = _track(random_smooth(3, 0, (0, 5)), 51)
    with pytest.raises(ConvergenceError):
        C.gamma_dot2(track)
    rep = C.criteria_report(track)
    assert rep.a2 is None and any("a2" in f for f in rep.flags)


def test_second_order_rate_two_level():
    # for two levels the extra rate is -|c|^2 / gamma2
    spec = schwinger(1.0, 0.9, 0.3, (0, 20))
    track = _track(spec)
    g2 = C.gamma_dot2(track)
    rate = C.second_order_phase_rate(track)
    c = np.abs(track.c[:, 0, 1])
    np.testing.assert_allclose(rate[:, 0], -c**2 / g2[:, 1, 0], atol=1e-14)
    np.testing.assert_allclose(rate[:, 1], -c**2 / g2[:, 0, 1], atol=1e-14)


def test_report_serialisation(tmp_path, transverse):
    rep = C.criteria_report(transverse, 0)
    d = rep.to_dict()
    assert d["n_levels"] == 2 and d["passages"] == 1
    assert '"usual_max"' in rep.to_json()
    header, rows = rep.table()
    assert header[:2] == ["t", "usual_lhs"] and "a2_1_0" in header
    rep.write(tmp_path / "c.csv")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == len(rows) + 1


schwinger_params = st.tuples(st.floats(0.5, 2), st.floats(0.05, math.pi - 0.05), st.floats(-2, 2).filter(lambda w: abs(w) > 1e-3))


@settings(max_examples=25)
@given(schwinger_params)
def test_a2_fixed_point_matches_schwinger_closed_form(params):
    w0, th, wl = params
    p = SchwingerParams(w0, th, wl)
    if abs(p.detuning_l) < 1e-6:
        return
    track = _track(schwinger(w0, th, wl, (0, 20)), 201)
    g1 = C.gamma_dot1(track)
    g2 = C.gamma_dot2(track, g1)
    a2 = np.abs(track.c[:, 0, 1]) / g2[:, 1, 0]
    np.testing.assert_allclose(np.abs(a2), C.a2_schwinger(p.rabi_l, p.detuning_l), atol=1e-10)
    np.testing.assert_allclose(a2, C.a2_two_level(g1[:, 1, 0], np.abs(track.c[:, 0, 1])), atol=1e-10)


@settings(max_examples=25)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_real_symmetric_first_order_equals_zeroth(n, seed):
    try:
        track = _track(random_smooth(n, seed, (0, 10)), 201)
    except DegeneracyError:
        return
    a0 = C.a_functionals(track, "a0").values
    a1 = C.a_functionals(track, "a1").values
    np.testing.assert_allclose(np.abs(a1), np.abs(a0), atol=1e-9)


@settings(max_examples=15)
@given(st.integers(2, 4), st.integers(0, 2**31), st.floats(0.5, 30))
def test_pointfix_and_zeno_hold_on_random_instances(n, seed, duration):
    spec = random_smooth(n, seed, (0, duration))
    try:
        traj, track = simulate(spec, level=0, tol=1e-11, n_min=201)
    except DegeneracyError:
        return
    rep = C.criteria_report(track, 0)
    observed = 1 - np.abs(traj.adiabatic_b[:, 0]).min()
    assert observed <= rep.zeno[0] + 1e-9
    for b in rep.pointfix.values():
        if b.one_minus_b_plus < 1:
            assert observed <= b.one_minus_b_plus + 1e-9
        if b.b_minus < 1:
            assert np.abs(traj.adiabatic_b[:, 1:]).max() <= b.b_minus + 1e-9


def test_turning_points_hysteresis():
    x = np.array([0, 1, 2, 1.9999999, 3, 2, 1, 2])
    assert C.turning_points(x, noise_tol=1e-3) == [4, 6]
    assert C.turning_points(x, noise_tol=1e-9) == [2, 3, 4, 6]


def test_a2_closed_form_tie_takes_positive_branch():
    g1 = np.array([-1e-14, 1e-14, -0.5])
    out = C.a2_two_level(g1, np.ones(3), zero_tol=1e-12)
    assert out[0] == pytest.approx(1.0) and out[1] == pytest.approx(1.0)
    assert out[2] < 0
