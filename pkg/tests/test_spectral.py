import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiabound.errors import DegeneracyError
from adiabound.schedules import (
    TimeGrid,
    build_grid,
    cycling,
    dressed,
    evaluate_h,
    evaluate_hdot,
    linear_chirp,
    random_smooth,
    schwinger,
)
from adiabound.spectral import couplings, eigenframe, frame_track, frames_table, min_gap, write_frames


def test_diagonal_matrix_frame():
    f = eigenframe(np.diag([-1.0, 1.0]))
    np.testing.assert_array_equal(f.energies, [-1, 1])
    np.testing.assert_allclose(f.vectors, np.eye(2), atol=1e-15)
    assert f.gap == 2


def test_transverse_schwinger_frame():
    w0 = 1.7
    f = eigenframe(evaluate_h(schwinger(w0, math.pi / 2, 0.2, (0, 1)), 0.0))
    np.testing.assert_allclose(f.energies, [-w0 / 2, w0 / 2], atol=1e-14)
    np.testing.assert_allclose(np.abs(f.vectors[:, 0]), [1 / math.sqrt(2)] * 2, atol=1e-14)
    assert abs(abs(np.vdot(f.vectors[:, 0], [1, 1])) / math.sqrt(2) - 1) < 1e-14


def test_consecutive_frames_overlap_real_positive():
    spec = schwinger(1.0, 0.6, 0.05, (0, 40))
    track = frame_track(spec, build_grid(spec, 201))
    ov = np.einsum("tim,tim->tm", track.vectors[:-1].conj(), track.vectors[1:])
    assert np.all(np.abs(ov.imag) < 1e-12)
    assert np.all(ov.real > 0)
    prev = eigenframe(track.h[0])
    nxt = eigenframe(track.h[1], prev=prev)
    d = np.einsum("im,im->m", prev.vectors.conj(), nxt.vectors)
    assert np.all(np.abs(d.imag) < 1e-14) and np.all(d.real > 0)


def test_zero_hdot_gives_zero_couplings():
    f = eigenframe(np.diag([0.0, 1.0, 3.0]))
    assert np.all(couplings(f, np.zeros((3, 3))).c == 0)


def test_schwinger_coupling_magnitude_constant():
    spec = schwinger(1.0, math.pi / 2, 0.2, (0, 60))
    track = frame_track(spec, build_grid(spec, 301))
    np.testing.assert_allclose(np.abs(track.c[:, 0, 1]), 0.1, atol=1e-12)
    np.testing.assert_allclose(np.abs(track.c[:, 1, 0]), 0.1, atol=1e-12)


def test_random_coupling_matches_finite_difference():
    spec = random_smooth(4, 5, (0, 10), complex_entries=True)
    h = 1e-5
    for t in (1.0, 4.2, 8.7):
        frame = eigenframe(evaluate_h(spec, t))
        c = couplings(frame, evaluate_hdot(spec, t)).c
        plus = eigenframe(evaluate_h(spec, t + h), prev=frame)
        minus = eigenframe(evaluate_h(spec, t - h), prev=frame)
        fd = frame.vectors.conj().T @ (plus.vectors - minus.vectors) / (2 * h)
        off = ~np.eye(4, dtype=bool)
        np.testing.assert_allclose(c[off], fd[off], atol=1e-5)
        assert np.all(np.abs(np.diag(fd)) < 1e-5)


def test_coupling_rate_matches_finite_difference():
    spec = random_smooth(3, 9, (0, 10))
    track = frame_track(spec, TimeGrid(np.linspace(0, 10, 4001)))
    fd = np.gradient(track.c, track.times, axis=0)
    off = ~np.eye(3, dtype=bool)
    err = np.abs(fd[5:-5][:, off] - track.c_dot[5:-5][:, off]).max()
    assert err < 1e-4 * max(1.0, np.abs(track.c_dot).max())


def test_static_track_frames_identical():
    spec = dressed(2.0, 0.7, (0, 5))
    track = frame_track(spec, build_grid(spec, 11))
    for frame, cm in track:
        np.testing.assert_allclose(frame.vectors, track.vectors[0], atol=1e-15)
        np.testing.assert_allclose(frame.energies, track.energies[0], atol=1e-15)
        assert np.all(np.abs(cm.c) < 1e-15)


def test_cycling_labels_preserved():
    spec = cycling(10.0, 1.0, 0.5, (0, 2 * math.pi))
    track = frame_track(spec, build_grid(spec, 101))
    assert np.all(track.energies[:, 0] <= track.energies[:, 1])
    ov = np.abs(np.einsum("tim,tim->tm", track.vectors[:-1].conj(), track.vectors[1:]))
    assert ov.min() >= 0.99


def test_refinement_bisects_coarse_intervals():
    spec = cycling(10.0, 1.0, 0.5, (0, 2 * math.pi))
    track = frame_track(spec, TimeGrid(np.linspace(0, 2 * math.pi, 41)))
    assert track.refine_levels >= 1
    assert track.grid.policy == "adaptive-refined"
    assert len(track) > 41
    unrefined = frame_track(spec, TimeGrid(np.linspace(0, 2 * math.pi, 41)), refine=False)
    assert len(unrefined) == 41 and unrefined.refine_levels == 0


def test_chirp_gap_minimum_at_crossing():
    rabi = 0.8
    spec = linear_chirp(1.5, rabi, (-10, 10))
    track = frame_track(spec, build_grid(spec, 401))
    assert abs(min_gap(track) - rabi) < 1e-6


def test_min_gap_examples():
    spec = dressed(0.0, 0.0, (0, 1))
    assert min_gap([eigenframe(np.diag([-1.0, 1.0]))]) == 2
    sweep = linear_chirp(1.0, 1.0, (-5, 5))
    assert abs(min_gap(frame_track(sweep, build_grid(sweep, 1001))) - 1.0) < 1e-6
    sch = schwinger(1.0, 0.7, 0.3, (0, 10))
    assert abs(min_gap(frame_track(sch, build_grid(sch, 51))) - 1.0) < 1e-12
    with pytest.raises(DegeneracyError):
        frame_track(spec, build_grid(spec, 3))


def test_degeneracy_reports_location():
    with pytest.raises(DegeneracyError) as info:
        frame_track(linear_chirp(1.0, 0.0, (-1, 1)), TimeGrid(np.linspace(-1, 1, 5)))
    assert info.value.t == 0.0
    assert info.value.pair == (0, 1)


def test_frames_table_and_writer(tmp_path):
    spec = random_smooth(3, 1, (0, 2))
    track = frame_track(spec, build_grid(spec, 5))
    header, rows = frames_table(track)
    assert header == ["t", "E_0", "E_1", "E_2", "gap", "abs_c_0_1", "abs_c_0_2", "abs_c_1_2"]
    assert len(rows) == len(track)
    write_frames(track, tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().startswith("t,E_0")


frame_cases = st.tuples(st.integers(2, 6), st.integers(0, 2**31), st.booleans(), st.floats(0, 1))


@settings(max_examples=100)
@given(frame_cases)
def test_frame_invariants(case):
    n, seed, cplx, frac = case
    spec = random_smooth(n, seed, (0, 5), complex_entries=cplx)
    t = 5 * frac
    h = evaluate_h(spec, t)
    f = eigenframe(h, t)
    v = f.vectors
    np.testing.assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-12)
    scale = np.linalg.norm(h, 2)
    assert np.all(np.linalg.norm(h @ v - v * f.energies, axis=0) <= 1e-10 * scale)
    assert np.all(np.diff(f.energies) > 0)
    c = couplings(f, evaluate_hdot(spec, t)).c
    np.testing.assert_allclose(c, -c.conj().T, atol=1e-9 * max(1.0, np.abs(c).max()))


@settings(max_examples=30)
@given(frame_cases, st.integers(0, 2**31))
def test_gauge_invariance(case, phase_seed):
    n, seed, cplx, frac = case
    spec = random_smooth(n, seed, (0, 5), complex_entries=cplx)
    t = 5 * frac
    f = eigenframe(evaluate_h(spec, t), t)
    phases = np.exp(2j * math.pi * np.random.default_rng(phase_seed).random(n))
    g = type(f)(f.t, f.energies, f.vectors * phases, f.gap)
    hd = evaluate_hdot(spec, t)
    np.testing.assert_allclose(np.abs(couplings(g, hd).c), np.abs(couplings(f, hd).c), atol=1e-10)
    again = eigenframe(evaluate_h(spec, t), t, prev=g)
    np.testing.assert_allclose(again.energies, f.energies, atol=1e-10)
    assert abs(again.gap - f.gap) < 1e-10


@settings(max_examples=20)
@given(st.integers(2, 5), st.integers(0, 2**31))
def test_track_parallel_transport_and_reality(n, seed):
    spec = random_smooth(n, seed, (0, 4))
    try:
        track = frame_track(spec, build_grid(spec, 201))
    except DegeneracyError:
        return
    assert np.abs(np.diagonal(track.c, axis1=1, axis2=2)).max() <= 1e-9
    assert np.abs(track.vectors.imag).max() <= 1e-9
    assert np.abs(track.c.imag).max() <= 1e-9
    off = ~np.eye(n, dtype=bool)
    anti = track.c + np.conj(np.swapaxes(track.c, 1, 2))
    assert np.abs(anti[:, off]).max() <= 1e-9 * max(1.0, np.abs(track.c).max())
