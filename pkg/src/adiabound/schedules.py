"""Parametric time-dependent Hamiltonians H(t) and their time derivatives.

Units: hbar = 1, every parameter is an angular frequency (or a time).
"""

from __future__ import annotations

import csv
import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels as K
from .errors import ScheduleRangeError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

POINTS_PER_PERIOD = 40


class Kind(str, enum.Enum):
    SCHWINGER = "schwinger"
    RWA_TWO_LEVEL = "rwa_two_level"
    DRESSED_TWO_LEVEL = "dressed_two_level"
    CYCLING = "cycling"
    LINEAR_CHIRP = "linear_chirp"
    TABLE_DRIVEN = "table_driven"
    RANDOM_SMOOTH = "random_smooth"


# required / optional parameters with defaults, per kind
PARAMS: dict[Kind, tuple[tuple[str, ...], dict[str, Any]]] = {
    Kind.SCHWINGER: (("omega0", "theta", "omega_l"), {}),
    Kind.RWA_TWO_LEVEL: (("delta0", "rabi", "omega_l"), {}),
    Kind.DRESSED_TWO_LEVEL: (("delta0", "rabi"), {}),
    Kind.CYCLING: (("alpha", "omega", "rabi"), {"swapped": False}),
    Kind.LINEAR_CHIRP: (("beta", "rabi"), {"t_cross": 0.0}),
    Kind.TABLE_DRIVEN: ((), {"path": None, "times": None, "matrices": None}),
    Kind.RANDOM_SMOOTH: (("dim",), {"seed": 0, "complex": False, "h_a": None, "h_b": None}),
}


@dataclass(frozen=True)
class _Affine:
    mats: np.ndarray  # (n_terms, N, N)
    codes: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray


@dataclass(frozen=True)
class _Table:
    spline: CubicSpline
    dim: int


@dataclass(frozen=True, eq=False)
class ScheduleSpec:
    """Immutable description of H(t) on ``t_span``.

    ``params`` holds the model constants (see ``PARAMS``); missing optional
    entries are filled with defaults.
    """

    kind: Kind
    params: Mapping[str, Any]
    t_span: tuple[float, float]
    _model: Any = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        t0, t1 = (float(x) for x in self.t_span)
        if not (math.isfinite(t0) and math.isfinite(t1)) or not t0 < t1:
            raise ValueError(f"t_span must satisfy t0 < t1, got {self.t_span!r}")
        object.__setattr__(self, "t_span", (t0, t1))

        required, optional = PARAMS[kind]
        params = dict(self.params)
        unknown = sorted(set(params) - set(required) - set(optional))
        if unknown:
            raise ValueError(f"unknown parameter(s) for {kind.value}: {', '.join(unknown)}")
        missing = [name for name in required if name not in params]
        if missing:
            raise ValueError(f"missing parameter(s) for {kind.value}: {', '.join(missing)}")
        for name, default in optional.items():
            params.setdefault(name, default)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "_model", _BUILDERS[kind](params, (t0, t1)))

    @property
    def dim(self) -> int:
        if isinstance(self._model, _Table):
            return self._model.dim
        return self._model.mats.shape[1]

    @property
    def duration(self) -> float:
        return self.t_span[1] - self.t_span[0]

    @property
    def is_table(self) -> bool:
        return isinstance(self._model, _Table)

    @functools.cached_property
    def _kernel_args(self):
        return self._flatten()

    def kernel_args(self):
        """Flat arrays understood by the kernels in ``_kernels``."""
        return self._kernel_args

    def _flatten(self):
        n = self.dim
        model = self._model
        if isinstance(model, _Table):
            c = model.spline.c
            coefs = np.ascontiguousarray(c.reshape(4, c.shape[1], n * n))
            return (
                np.zeros((0, n * n), dtype=np.complex128),
                np.zeros(0, dtype=np.int64),
                np.zeros(0),
                np.zeros(0),
                np.ascontiguousarray(model.spline.x, dtype=np.float64),
                coefs,
            )
        return (
            np.ascontiguousarray(model.mats.reshape(len(model.codes), n * n)),
            model.codes,
            model.freqs,
            model.phases,
            np.zeros(0),
            np.zeros((4, 0, n * n), dtype=np.complex128),
        )

    def frequencies(self) -> list[float]:
        """Drive frequencies that a time grid has to resolve."""
        p = self.params
        if self.kind in (Kind.SCHWINGER, Kind.RWA_TWO_LEVEL):
            if p["omega_l"] == 0:
                return []
            if self.kind is Kind.SCHWINGER:
                om_l = abs(p["omega_l"] * math.sin(p["theta"]))
                d_l = p["omega_l"] * math.cos(p["theta"]) - p["omega0"]
            else:
                om_l = abs(p["rabi"])
                d_l = -p["delta0"]
            return [abs(p["omega_l"]), math.hypot(om_l, d_l)]
        if self.kind is Kind.CYCLING:
            return [abs(p["omega"])]
        if self.kind is Kind.RANDOM_SMOOTH:
            return [math.pi / self.duration]
        return []


def _affine(terms, dim) -> _Affine:
    mats = np.array([m for m, _, _, _ in terms], dtype=np.complex128).reshape(len(terms), dim, dim)
    return _Affine(
        mats=mats,
        codes=np.array([c for _, c, _, _ in terms], dtype=np.int64),
        freqs=np.array([w for _, _, w, _ in terms], dtype=np.float64),
        phases=np.array([p for _, _, _, p in terms], dtype=np.float64),
    )


def _build_schwinger(p, t_span):
    omega0, theta, omega_l = float(p["omega0"]), float(p["theta"]), float(p["omega_l"])
    if omega0 <= 0:
        raise ValueError("omega0 must be > 0")
    if not 0 < theta < math.pi:
        raise ValueError("theta must lie in (0, pi)")
    a = -0.5 * omega0
    # phi(t) = -omega_l t, so cos(phi) = cos(omega_l t) and sin(phi) = cos(omega_l t + pi/2)
    return _affine(
        [
            (a * math.cos(theta) * SIGMA_Z, K.TERM_CONST, 0.0, 0.0),
            (a * math.sin(theta) * SIGMA_X, K.TERM_COSINE, omega_l, 0.0),
            (a * math.sin(theta) * SIGMA_Y, K.TERM_COSINE, omega_l, math.pi / 2),
        ],
        2,
    )


def _build_rwa(p, t_span):
    delta0, rabi, omega_l = float(p["delta0"]), float(p["rabi"]), float(p["omega_l"])
    return _affine(
        [
            (-0.5 * (delta0 + omega_l) * SIGMA_Z, K.TERM_CONST, 0.0, 0.0),
            (-0.5 * rabi * SIGMA_X, K.TERM_COSINE, omega_l, 0.0),
            (-0.5 * rabi * SIGMA_Y, K.TERM_COSINE, omega_l, math.pi / 2),
        ],
        2,
    )


def _build_dressed(p, t_span):
    h = -0.5 * (float(p["delta0"]) * SIGMA_Z + float(p["rabi"]) * SIGMA_X)
    return _affine([(h, K.TERM_CONST, 0.0, 0.0)], 2)


def _build_cycling(p, t_span):
    alpha, omega, rabi = float(p["alpha"]), float(p["omega"]), float(p["rabi"])
    if alpha <= 0 or omega <= 0 or rabi <= 0:
        raise ValueError("cycling requires alpha, omega, rabi > 0")
    drive, static = (SIGMA_X, SIGMA_Z) if p["swapped"] else (SIGMA_Z, SIGMA_X)
    return _affine(
        [
            (-0.5 * rabi * static, K.TERM_CONST, 0.0, 0.0),
            (-0.5 * alpha * drive, K.TERM_COSINE, omega, 0.0),
        ],
        2,
    )


def _build_chirp(p, t_span):
    beta, rabi, t_cross = float(p["beta"]), float(p["rabi"]), float(p["t_cross"])
    return _affine(
        [
            (-0.5 * rabi * SIGMA_X, K.TERM_CONST, 0.0, 0.0),
            (-0.5 * SIGMA_Z, K.TERM_LINEAR, beta, -beta * t_cross),
        ],
        2,
    )


def random_hermitian(rng: np.random.Generator, dim: int, complex_entries: bool = False) -> np.ndarray:
    """Symmetrised iid standard-normal matrix (real symmetric unless ``complex_entries``)."""
    a = rng.standard_normal((dim, dim))
    h = (a + a.T) / 2
    if complex_entries:
        b = rng.standard_normal((dim, dim))
        h = h + 0.5j * (b - b.T)
    return h.astype(np.complex128)


def _build_random(p, t_span):
    dim = int(p["dim"])
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(int(p["seed"]))
    h_a = random_hermitian(rng, dim, bool(p["complex"]))
    h_b = random_hermitian(rng, dim, bool(p["complex"]))
    if p["h_a"] is not None:
        h_a = _hermitian(np.asarray(p["h_a"], dtype=np.complex128), "h_a", dim)
    if p["h_b"] is not None:
        h_b = _hermitian(np.asarray(p["h_b"], dtype=np.complex128), "h_b", dim)
    t0, t1 = t_span
    w = math.pi / (t1 - t0)
    # sin^2(pi (t - t0) / 2T) = (1 - cos(pi (t - t0) / T)) / 2
    return _affine(
        [
            (h_a + 0.5 * h_b, K.TERM_CONST, 0.0, 0.0),
            (-0.5 * h_b, K.TERM_COSINE, w, -w * t0),
        ],
        dim,
    )


def _hermitian(m, name, dim):
    if m.shape != (dim, dim):
        raise ValueError(f"{name} must have shape ({dim}, {dim})")
    if not np.allclose(m, m.conj().T, atol=1e-12):
        raise ValueError(f"{name} must be Hermitian")
    return (m + m.conj().T) / 2


def _build_table(p, t_span):
    if p["path"] is not None:
        times, mats = read_table_csv(p["path"])
    elif p["times"] is not None and p["matrices"] is not None:
        times = np.asarray(p["times"], dtype=np.float64)
        mats = np.asarray(p["matrices"], dtype=np.complex128)
    else:
        raise ValueError("table_driven needs either 'path' or both 'times' and 'matrices'")
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[1] < 2:
        raise ValueError("table matrices must have shape (n, N, N) with N >= 2")
    if len(times) != len(mats) or len(times) < 4:
        raise ValueError("table needs at least 4 rows with one matrix per time")
    if np.any(np.diff(times) <= 0):
        raise ValueError("table times must be strictly increasing")
    if times[0] > t_span[0] or times[-1] < t_span[1]:
        raise ValueError("table does not cover t_span")
    mats = (mats + np.conj(np.swapaxes(mats, 1, 2))) / 2
    return _Table(spline=CubicSpline(times, mats, axis=0), dim=mats.shape[1])


_BUILDERS = {
    Kind.SCHWINGER: _build_schwinger,
    Kind.RWA_TWO_LEVEL: _build_rwa,
    Kind.DRESSED_TWO_LEVEL: _build_dressed,
    Kind.CYCLING: _build_cycling,
    Kind.LINEAR_CHIRP: _build_chirp,
    Kind.TABLE_DRIVEN: _build_table,
    Kind.RANDOM_SMOOTH: _build_random,
}


def read_table_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``t, re_00, im_00, re_01, ...`` rows into times and ``(n, N, N)`` matrices."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    n_cols = len(header) - 1
    dim = int(round(math.sqrt(n_cols / 2)))
    if header[0].strip() != "t" or 2 * dim * dim != n_cols:
        raise ValueError(f"{path}: expected columns t, re_00, im_00, ... for an N x N matrix")
    data = np.array(rows, dtype=np.float64)
    mats = (data[:, 1::2] + 1j * data[:, 2::2]).reshape(len(data), dim, dim)
    return data[:, 0], mats


def write_table_csv(path, times, matrices) -> None:
    """Inverse of ``read_table_csv``."""
    matrices = np.asarray(matrices, dtype=np.complex128)
    dim = matrices.shape[1]
    header = ["t"]
    for i in range(dim):
        for j in range(dim):
            header += [f"re_{i}{j}", f"im_{i}{j}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, m in zip(times, matrices):
            flat = m.reshape(-1)
            row = [repr(float(t))]
            for z in flat:
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)


def _check_time(spec: ScheduleSpec, t: float) -> float:
    t0, t1 = spec.t_span
    eps = 1e-12 * max(1.0, abs(t0), abs(t1))
    if not (t0 - eps <= t <= t1 + eps):
        raise ScheduleRangeError(f"t={t!r} outside t_span {spec.t_span}")
    return float(min(max(t, t0), t1))


def _fd_step(spec: ScheduleSpec) -> float:
    return max(1e-6, 1e-8 * spec.duration)


def _table_hdot(spec: ScheduleSpec, t: float):
    """Richardson-extrapolated finite difference; one-sided near the span edges."""
    h = _fd_step(spec)
    t0, t1 = spec.t_span
    f = spec._model.spline
    if t - h >= t0 and t + h <= t1:
        d1 = (f(t + h) - f(t - h)) / (2 * h)
        d2 = (f(t + h / 2) - f(t - h / 2)) / h
        return (4 * d2 - d1) / 3, False
    s = 1.0 if t - h < t0 else -1.0
    d1 = s * (f(t + s * h) - f(t)) / h
    d2 = s * (f(t + s * h / 2) - f(t)) / (h / 2)
    return 2 * d2 - d1, True


def evaluate_h(spec: ScheduleSpec, t: float) -> np.ndarray:
    """H(t) as an ``N x N`` Hermitian matrix."""
    t = _check_time(spec, t)
    if spec.is_table:
        h = spec._model.spline(t)
        return (h + h.conj().T) / 2
    args = spec.kernel_args()
    return K.hamiltonian(*args, t, 0, spec.dim)


def evaluate_hdot(spec: ScheduleSpec, t: float, *, return_info: bool = False):
    """dH/dt at ``t``.

    Analytic for parametric kinds. Table-driven schedules use a central
    difference with one Richardson extrapolation, switching to a one-sided
    difference at the span edges; ``return_info=True`` also returns
    ``{"one_sided": bool}``.
    """
    t = _check_time(spec, t)
    one_sided = False
    if spec.is_table:
        hd, one_sided = _table_hdot(spec, t)
        hd = (hd + hd.conj().T) / 2
    else:
        hd = K.hamiltonian(*spec.kernel_args(), t, 1, spec.dim)
    if return_info:
        return hd, {"one_sided": one_sided}
    return hd


def evaluate_hddot(spec: ScheduleSpec, t: float) -> np.ndarray:
    """d^2H/dt^2 at ``t`` (the table spline's own second derivative for table-driven kinds)."""
    t = _check_time(spec, t)
    if spec.is_table:
        h = spec._model.spline(t, 2)
        return (h + h.conj().T) / 2
    return K.hamiltonian(*spec.kernel_args(), t, 2, spec.dim)


def evaluate_batch(spec: ScheduleSpec, times, order: int = 0) -> np.ndarray:
    """``d^order H/dt^order`` at every time in ``times``, shape ``(T, N, N)``."""
    times = np.asarray(times, dtype=np.float64)
    for t in (times.min(), times.max()):
        _check_time(spec, t)
    times = np.clip(times, *spec.t_span)
    if not spec.is_table:
        mats2d, codes, freqs, phases, _, _ = spec.kernel_args()
        return K.hamiltonian_batch(mats2d, codes, freqs, phases, times, order, spec.dim)
    f = spec._model.spline
    if order == 0:
        out = f(times)
    elif order == 1:
        out = np.array([_table_hdot(spec, t)[0] for t in times])
    else:
        out = f(times, 2)
    return (out + np.conj(np.swapaxes(out, 1, 2))) / 2


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sample times covering a schedule's span."""

    times: np.ndarray
    policy: str = "uniform"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("a time grid needs at least two points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])


def build_grid(spec: ScheduleSpec, n_min: int = 2) -> TimeGrid:
    """Uniform grid with at least ``n_min`` points and 40 points per shortest drive period."""
    if n_min < 2:
        raise ValueError("n_min must be >= 2")
    n = int(n_min)
    freqs = [f for f in spec.frequencies() if f > 0]
    if freqs:
        periods = spec.duration * max(freqs) / (2 * math.pi)
        n = max(n, int(math.ceil(POINTS_PER_PERIOD * periods)) + 1)
    return TimeGrid(np.linspace(spec.t_span[0], spec.t_span[1], n), "uniform")


def grid_with_points(grid: TimeGrid, extra) -> TimeGrid:
    """Merge extra sample times into a grid (duplicates dropped)."""
    times = np.union1d(grid.times, np.asarray(extra, dtype=np.float64))
    times = times[(times >= grid.t0) & (times <= grid.t1)]
    keep = np.concatenate([[True], np.diff(times) > 1e-12 * max(1.0, abs(grid.t1))])
    return TimeGrid(times[keep], grid.policy)


def schwinger(omega0: float, theta: float, omega_l: float, t_span) -> ScheduleSpec:
    return ScheduleSpec(Kind.SCHWINGER, {"omega0": omega0, "theta": theta, "omega_l": omega_l}, t_span)


def dressed(delta0: float, rabi: float, t_span) -> ScheduleSpec:
    return ScheduleSpec(Kind.DRESSED_TWO_LEVEL, {"delta0": delta0, "rabi": rabi}, t_span)


def cycling(alpha: float, omega: float, rabi: float, t_span, swapped: bool = False) -> ScheduleSpec:
    return ScheduleSpec(Kind.CYCLING, {"alpha": alpha, "omega": omega, "rabi": rabi, "swapped": swapped}, t_span)


def linear_chirp(beta: float, rabi: float, t_span, t_cross: float = 0.0) -> ScheduleSpec:
    return ScheduleSpec(Kind.LINEAR_CHIRP, {"beta": beta, "rabi": rabi, "t_cross": t_cross}, t_span)


def random_smooth(dim: int, seed: int, t_span, complex_entries: bool = False) -> ScheduleSpec:
    return ScheduleSpec(Kind.RANDOM_SMOOTH, {"dim": dim, "seed": seed, "complex": complex_entries}, t_span)


def table_driven(times, matrices, t_span=None) -> ScheduleSpec:
    times = np.asarray(times, dtype=np.float64)
    if t_span is None:
        t_span = (times[0], times[-1])
    return ScheduleSpec(Kind.TABLE_DRIVEN, {"times": times, "matrices": matrices}, t_span)


def sample_table(spec: ScheduleSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample a schedule on ``n`` uniform points (convenient for building table-driven inputs)."""
    times = np.linspace(spec.t_span[0], spec.t_span[1], n)
    return times, evaluate_batch(spec, times)
