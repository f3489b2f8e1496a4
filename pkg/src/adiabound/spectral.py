"""Instantaneous eigenframes along a time grid and the nonadiabatic couplings <m|dk/dt>.

Eigenvectors are kept in the discrete parallel-transport gauge: the overlap of
each vector with its predecessor on the grid is real and positive. Labels follow
states by maximal overlap, so they survive avoided crossings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._io import write_table
from .errors import DegeneracyError
from .schedules import ScheduleSpec, TimeGrid, evaluate_batch

log = logging.getLogger(__name__)

GAP_FLOOR = 1e-10
OVERLAP_THRESHOLD = 0.99
MAX_REFINE_LEVELS = 8


@dataclass(frozen=True, eq=False)
class EigenFrame:
    t: float
    energies: np.ndarray
    vectors: np.ndarray  # columns
    gap: float


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """``c[m, k] = <m|dk/dt>``; ``c_dot`` is its time derivative in parallel-transport gauge."""

    t: float
    c: np.ndarray
    c_dot: np.ndarray | None = None


def _gap(energies: np.ndarray):
    """Smallest level spacing along the last axis, and the (sorted-order) pair that realises it."""
    e = np.sort(energies, axis=-1)
    d = np.diff(e, axis=-1)
    return d.min(axis=-1), d.argmin(axis=-1)


def _check_gap(times, energies, gap_floor):
    gaps, where = _gap(energies)
    scale = np.maximum(np.abs(energies).max(axis=-1), np.finfo(float).tiny)
    floor = gap_floor * scale
    bad = np.flatnonzero(gaps <= floor)
    if bad.size:
        i = bad[0]
        j = int(where[i])
        raise DegeneracyError(times[i], (j, j + 1), gaps[i], floor[i])
    return gaps


def _fix_phase_largest(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column real positive."""
    idx = np.argmax(np.abs(v), axis=0)
    ref = v[idx, np.arange(v.shape[1])]
    return v * (np.conj(ref) / np.abs(ref))


def _match(prev_vectors: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Column permutation of ``vectors`` maximising |overlap| with ``prev_vectors``."""
    ov = np.abs(prev_vectors.conj().T @ vectors)
    rows, cols = linear_sum_assignment(-ov)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return perm


def eigenframe(h, t: float = 0.0, prev: EigenFrame | None = None, gap_floor: float = GAP_FLOOR) -> EigenFrame:
    """Diagonalise ``h`` and fix labels and phases.

    Without ``prev`` levels are energy-ordered and the largest component of each
    vector is made real positive. With ``prev`` levels are matched to it by
    overlap and each ``<prev_m|m>`` is made real positive.
    """
    h = np.asarray(h, dtype=np.complex128)
    w, v = np.linalg.eigh(h)
    gap = float(_check_gap(np.array([t]), w[None, :], gap_floor)[0])
    if prev is None:
        return EigenFrame(float(t), w, _fix_phase_largest(v), gap)
    perm = _match(prev.vectors, v)
    w, v = w[perm], v[:, perm]
    d = np.einsum("im,im->m", prev.vectors.conj(), v)
    v = v * (np.conj(d) / np.abs(d))
    return EigenFrame(float(t), w, v, gap)


def _coupling_from(energies, vectors, hdot):
    """Off-diagonal couplings ``<m|Hdot|k> / (E_k - E_m)``; works on stacked arrays."""
    z = np.conj(np.swapaxes(vectors, -1, -2)) @ hdot @ vectors
    de = energies[..., None, :] - energies[..., :, None]
    n = energies.shape[-1]
    off = ~np.eye(n, dtype=bool)
    c = np.zeros_like(z)
    c[..., off] = z[..., off] / de[..., off]
    return c, z, de


def couplings(
    frame: EigenFrame, hdot, prev: EigenFrame | None = None, next: EigenFrame | None = None
) -> CouplingMatrix:
    """Coupling matrix at one frame.

    Diagonal entries ``<m|dm/dt>`` come from a finite difference of the
    gauge-fixed neighbouring frames when they are given, and are zero otherwise
    (the parallel-transport value).
    """
    c, _, _ = _coupling_from(frame.energies, frame.vectors, np.asarray(hdot, dtype=np.complex128))
    if prev is not None or next is not None:
        a = prev if prev is not None else frame
        b = next if next is not None else frame
        dv = (b.vectors - a.vectors) / (b.t - a.t)
        c[np.diag_indices_from(c)] = np.einsum("im,im->m", frame.vectors.conj(), dv)
    return CouplingMatrix(frame.t, c)


@dataclass(frozen=True, eq=False)
class FrameTrack:
    """Gauge-fixed frames and couplings on a (possibly refined) grid, stored as stacked arrays."""

    grid: TimeGrid
    energies: np.ndarray  # (T, N)
    vectors: np.ndarray  # (T, N, N)
    gaps: np.ndarray  # (T,)
    h: np.ndarray  # (T, N, N)
    hdot: np.ndarray  # (T, N, N)
    c: np.ndarray  # (T, N, N), c[t, m, k] = <m|dk/dt>
    c_dot: np.ndarray  # (T, N, N)
    min_overlap: float
    refine_levels: int

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def dim(self) -> int:
        return self.energies.shape[1]

    def __len__(self) -> int:
        return len(self.grid)

    def __getitem__(self, i) -> tuple[EigenFrame, CouplingMatrix]:
        t = float(self.times[i])
        frame = EigenFrame(t, self.energies[i], self.vectors[i], float(self.gaps[i]))
        return frame, CouplingMatrix(t, self.c[i], self.c_dot[i])

    def __iter__(self) -> Iterator[tuple[EigenFrame, CouplingMatrix]]:
        for i in range(len(self)):
            yield self[i]


def _diagonalise(spec, times, gap_floor):
    h = evaluate_batch(spec, times)
    w, v = np.linalg.eigh(h)
    _check_gap(times, w, gap_floor)
    return h, w, v


def frame_track(
    spec: ScheduleSpec,
    grid: TimeGrid,
    *,
    refine: bool = True,
    overlap_threshold: float = OVERLAP_THRESHOLD,
    max_levels: int = MAX_REFINE_LEVELS,
    gap_floor: float = GAP_FLOOR,
) -> FrameTrack:
    """Track eigenframes along ``grid``.

    Intervals across which some state's best overlap with the next frame drops
    below ``overlap_threshold`` are bisected, up to ``max_levels`` times.
    """
    times = np.asarray(grid.times, dtype=np.float64)
    level = 0
    while True:
        h, w, v = _diagonalise(spec, times, gap_floor)
        best = np.abs(np.einsum("tim,tin->tmn", v[:-1].conj(), v[1:])).max(axis=2).min(axis=1)
        bad = best < overlap_threshold
        if not refine or not bad.any() or level >= max_levels:
            break
        mids = 0.5 * (times[:-1][bad] + times[1:][bad])
        times = np.sort(np.concatenate([times, mids]))
        level += 1
    if bad.any():
        log.warning(
            "overlap %.4f below %.2f after %d refinement levels; labels follow maximal overlap",
            best.min(),
            overlap_threshold,
            level,
        )

    n_t, n = w.shape
    raw = np.einsum("tim,tin->tmn", v[:-1].conj(), v[1:])
    diag_sq = np.abs(np.diagonal(raw, axis1=1, axis2=2)) ** 2
    if np.all(diag_sq > 0.5):
        perms = np.broadcast_to(np.arange(n), (n_t, n))
    else:
        perms = np.empty((n_t, n), dtype=np.int64)
        perms[0] = np.arange(n)
        for i in range(n_t - 1):
            ov = np.abs(raw[i])[perms[i], :]
            rows, cols = linear_sum_assignment(-ov)
            perms[i + 1, rows] = cols
    idx_t = np.arange(n_t)[:, None]
    w = w[idx_t, perms]
    v = np.take_along_axis(v, perms[:, None, :], axis=2)

    # discrete parallel transport: phi_{i+1} = phi_i + arg <r_i|r_{i+1}>
    step = np.einsum("tim,tim->tm", v[:-1].conj(), v[1:])
    v0 = v[0]
    ref = v0[np.argmax(np.abs(v0), axis=0), np.arange(n)]
    phi = np.empty((n_t, n))
    phi[0] = np.angle(ref)
    phi[1:] = phi[0] + np.cumsum(np.angle(step), axis=0)
    v = v * np.exp(-1j * phi)[:, None, :]

    hdot = evaluate_batch(spec, times, order=1)
    hddot = evaluate_batch(spec, times, order=2)
    c, z, de = _coupling_from(w, v, hdot)
    c_dot = _coupling_rate(v, c, z, de, hddot)
    # first-order edges keep <v_0|v_1> (real by construction) as the only overlap used there
    dv = np.gradient(v, times, axis=0)
    # Re<m|dm/dt> vanishes for normalised vectors; only the phase rate survives
    c[:, np.arange(n), np.arange(n)] = 1j * np.imag(np.einsum("tim,tim->tm", v.conj(), dv))

    gaps, _ = _gap(w)
    return FrameTrack(
        grid=TimeGrid(times, "adaptive-refined" if level else grid.policy),
        energies=w,
        vectors=v,
        gaps=gaps,
        h=h,
        hdot=hdot,
        c=c,
        c_dot=c_dot,
        min_overlap=float(best.min()) if len(best) else 1.0,
        refine_levels=level,
    )


def _coupling_rate(v, c, z, de, hddot):
    """d/dt <m|dk/dt> in parallel-transport gauge, from Hdot, Hddot and the couplings.

    With ``Z = V^H Hdot V`` one has ``dZ/dt = C^H Z + V^H Hddot V + Z C`` and
    ``dE_k/dt = Z_kk``.
    """
    n = c.shape[-1]
    off = ~np.eye(n, dtype=bool)
    c0 = np.where(off, c, 0)
    vh = np.conj(np.swapaxes(v, -1, -2))
    zdot = np.conj(np.swapaxes(c0, -1, -2)) @ z + vh @ hddot @ v + z @ c0
    ed = np.real(np.diagonal(z, axis1=-2, axis2=-1))
    ded = ed[..., None, :] - ed[..., :, None]
    out = np.zeros_like(c)
    out[..., off] = zdot[..., off] / de[..., off] - z[..., off] * ded[..., off] / de[..., off] ** 2
    return out


def min_gap(frames) -> float:
    """Smallest level spacing over all frames (a ``FrameTrack`` or a sequence of frames)."""
    if isinstance(frames, FrameTrack):
        return float(frames.gaps.min())
    gaps = []
    for item in frames:
        frame = item[0] if isinstance(item, tuple) else item
        gaps.append(frame.gap)
    if not gaps:
        raise ValueError("min_gap needs at least one frame")
    return float(min(gaps))


def frames_table(track: FrameTrack):
    """Header and rows ``t, E_0..E_{N-1}, gap, abs_c_m_k`` for every pair ``m < k``."""
    n = track.dim
    pairs = [(m, k) for m in range(n) for k in range(m + 1, n)]
    header = ["t"] + [f"E_{m}" for m in range(n)] + ["gap"] + [f"abs_c_{m}_{k}" for m, k in pairs]
    rows = [
        [t, *track.energies[i], track.gaps[i], *(abs(track.c[i, m, k]) for m, k in pairs)]
        for i, t in enumerate(track.times)
    ]
    return header, rows


def write_frames(track: FrameTrack, path, fmt: str = "csv") -> None:
    write_table(path, *frames_table(track), fmt)


def frames_from_sequence(pairs: Sequence[tuple[EigenFrame, CouplingMatrix]]):
    """Stack an explicit sequence of frames into arrays ``(times, energies, vectors, c)``."""
    times = np.array([f.t for f, _ in pairs])
    energies = np.array([f.energies for f, _ in pairs])
    vectors = np.array([f.vectors for f, _ in pairs])
    c = np.array([cm.c for _, cm in pairs])
    return times, energies, vectors, c
