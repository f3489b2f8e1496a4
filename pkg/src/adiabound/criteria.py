"""Adiabaticity functionals, exact evolution bounds and condition verdicts.

Pair series are stored as ``(T, N, N)`` arrays indexed ``[t, k, m]`` for the
pair ``k != m``; the diagonal is zero. ``c[t, m, k] = <m|dk/dt>`` follows the
spectral module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._io import dumps, write_table
from .errors import ConvergenceError, PreconditionError
from .spectral import FrameTrack

DEFAULT_MARGIN = 0.1
NOISE_TOL = 1e-6
FIXED_POINT_DAMPING = 0.5
FIXED_POINT_RTOL = 1e-12
FIXED_POINT_MAX_ITER = 200
POLE_RTOL = 1e-12  # phase rates below this fraction of the largest level spacing count as zero


class AChoice(str, enum.Enum):
    A0 = "a0"
    A1 = "a1"
    A2 = "a2"


class Condition(str, enum.Enum):
    USUAL = "usual"
    NOT_OPTIMIZED = "eq_not_optimized"
    MONOTONIC = "eq_monotonic"
    TWO_LEVEL_M = "eq_two_level_M"


def _off_diagonal(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def _pair_view(c: np.ndarray) -> np.ndarray:
    """``|c[t, m, k]|`` rearranged to ``[t, k, m]``."""
    return np.abs(np.swapaxes(c, -1, -2))


def _vanishing(track: FrameTrack, g: np.ndarray) -> np.ndarray:
    """Where a phase rate is zero to round-off, relative to the level spacings at that time."""
    scale = np.abs(gamma_dot0(track)).max(axis=(1, 2), keepdims=True)
    return np.abs(g) <= POLE_RTOL * scale


def gamma_dot0(track: FrameTrack) -> np.ndarray:
    """``E_m - E_k`` at ``[t, k, m]``."""
    e = track.energies
    return e[:, None, :] - e[:, :, None]


def gamma_dot1(track: FrameTrack) -> np.ndarray:
    """First-order phase rate ``i(<k|dk> - <m|dm>) - (E_k - E_m) + d/dt arg <m|dk>`` at ``[t, k, m]``.

    ``track.c_dot`` is the parallel-transport derivative of the couplings, so
    ``Im(conj(c) dc/dt) / |c|^2`` already carries the diagonal-coupling terms
    and the sum is gauge invariant. Using it directly avoids differencing the
    eigenvector phases. The argument rate is taken as zero where the coupling
    vanishes.
    """
    n = track.dim
    c_mk = np.swapaxes(track.c, -1, -2)  # [t, k, m] -> <m|dk>
    cd_mk = np.swapaxes(track.c_dot, -1, -2)
    mag2 = np.abs(c_mk) ** 2
    floor = (np.finfo(float).eps * np.abs(c_mk).max()) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        arg_rate = np.where(mag2 > floor, np.imag(np.conj(c_mk) * cd_mk) / mag2, 0.0)
    g = gamma_dot0(track) + arg_rate
    g[:, ~_off_diagonal(n)] = 0.0
    return g


def gamma_dot2(track: FrameTrack, g1: np.ndarray | None = None) -> np.ndarray:
    """Second-order phase rate from the damped fixed point
    ``x_km = g1_km + sum_{j != m} |<m|dj>|^2 / x_jm``.

    The iteration starts at ``g1`` (or at ``|c|`` where ``g1`` vanishes), so it
    settles on the branch with the sign of ``g1``.
    """
    if g1 is None:
        g1 = gamma_dot1(track)
    mag2 = _pair_view(track.c) ** 2
    n = track.dim
    off = _off_diagonal(n)
    mag2[:, ~off] = 0.0
    x = np.where(_vanishing(track, g1), np.sqrt(mag2), g1)
    x[:, ~off] = 1.0
    for _ in range(FIXED_POINT_MAX_ITER):
        s = np.sum(np.where(off, mag2 / x, 0.0), axis=1)  # S[t, m] = sum_j |c_jm|^2 / x_jm
        target = g1 + s[:, None, :]
        new = (1 - FIXED_POINT_DAMPING) * x + FIXED_POINT_DAMPING * target
        new[:, ~off] = 1.0
        change = np.abs(new - x)
        x = new
        if np.all(change <= FIXED_POINT_RTOL * np.abs(x)):
            break
    else:
        bad = np.argwhere(change > FIXED_POINT_RTOL * np.abs(x))[0]
        raise ConvergenceError(
            f"second-order phase rate did not converge in {FIXED_POINT_MAX_ITER} iterations "
            f"(t={track.times[bad[0]]:.6g}, pair {tuple(bad[1:])})"
        )
    x[:, ~off] = 0.0
    return x


def a2_two_level(g1, abs_c, zero_tol: float = 0.0):
    """Closed form of the second-order functional for two levels (same-sign branch).

    Where ``|g1| <= zero_tol`` both branches are admissible; the positive one is
    returned, as the fixed-point iteration does.
    """
    g1 = np.asarray(g1, dtype=float)
    abs_c = np.asarray(abs_c, dtype=float)
    root = np.sqrt(g1 * g1 + 4 * abs_c * abs_c)
    sign = np.where(g1 < -zero_tol, -1.0, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sign * 2 * abs_c / (np.abs(g1) + root)


def a2_schwinger(rabi_l: float, detuning_l: float) -> float:
    """``|Omega_L| / (|delta_L| + sqrt(delta_L^2 + Omega_L^2))``."""
    return abs(rabi_l) / (abs(detuning_l) + math.hypot(rabi_l, detuning_l))


@dataclass(frozen=True, eq=False)
class PairSeries:
    """Signed functional values at ``[t, k, m]``; ``poles`` marks non-finite entries."""

    choice: AChoice
    values: np.ndarray
    poles: np.ndarray

    @property
    def has_poles(self) -> bool:
        return bool(self.poles.any())

    def max_abs(self) -> float:
        """Largest finite magnitude (poles excluded; check ``has_poles``)."""
        finite = np.abs(self.values[~self.poles])
        return float(finite.max()) if finite.size else 0.0

    def pair(self, k: int, m: int) -> np.ndarray:
        return self.values[:, k, m]


def a_functionals(track: FrameTrack, choice: AChoice | str, gammas: dict | None = None) -> PairSeries:
    """``|<m|dk/dt>| / gamma_km`` with the zeroth, first or second order phase rate."""
    choice = AChoice(choice)
    if choice is AChoice.A0:
        g = gamma_dot0(track)
    elif choice is AChoice.A1:
        g = gamma_dot1(track) if gammas is None else gammas["g1"]
    else:
        g = gamma_dot2(track) if gammas is None else gammas["g2"]
    num = _pair_view(track.c)
    off = _off_diagonal(track.dim)
    zero = _vanishing(track, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(zero, np.inf, num / np.where(zero, 1.0, g))
    vals[:, ~off] = 0.0
    poles = ~np.isfinite(vals)
    return PairSeries(choice, vals, poles)


def second_order_phase_rate(track: FrameTrack) -> np.ndarray:
    """Extra phase rate of the second-order choice, ``-sum_{k != m} |<m|dk>|^2 / gamma2_km``, shape ``(T, N)``."""
    g2 = gamma_dot2(track)
    mag2 = _pair_view(track.c) ** 2
    off = _off_diagonal(track.dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(off, mag2 / np.where(off, g2, 1.0), 0.0)
    return -terms.sum(axis=1)


def usual_condition(track: FrameTrack, n: int = 0) -> tuple[np.ndarray, float]:
    """``sum_{m != n} |<m|dn/dt> / (E_m - E_n)|`` over time, and its maximum."""
    e = track.energies
    mask = np.arange(track.dim) != n
    num = np.abs(track.c[:, mask, n])
    den = np.abs(e[:, mask] - e[:, [n]])
    series = (num / den).sum(axis=1)
    return series, float(series.max())


def omega_max(track: FrameTrack, n: int | None = None) -> tuple[float, float | None, float]:
    """``(max |<m|dk>|, max_m |<n|dm>|, max ‖dH/dt‖ / min gap)``; the last is an upper bound on the first."""
    mags = np.abs(track.c)
    off = _off_diagonal(track.dim)
    omega = float(mags[:, off].max()) if mags.size else 0.0
    omega_n = None
    if n is not None:
        mask = np.arange(track.dim) != n
        omega_n = float(mags[:, n, mask].max())
    hdot_norm = np.linalg.norm(track.hdot, ord=2, axis=(1, 2))
    return omega, omega_n, float(hdot_norm.max() / track.gaps.min())


def total_variation(series) -> float:
    """Discrete total variation ``sum |A_{i+1} - A_i|``."""
    x = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("series has non-finite entries (a pole); its total variation is undefined")
    return float(np.abs(np.diff(x)).sum())


def pair_total_variation(series: PairSeries) -> float:
    """``max_{k != m} TV(A_km)``."""
    n = series.values.shape[1]
    return max(total_variation(series.values[:, k, m]) for k in range(n) for m in range(n) if k != m)


def turning_points(series, noise_tol: float = NOISE_TOL) -> list[int]:
    """Indices where a series reverses direction, ignoring wiggles smaller than ``noise_tol * max|series|``."""
    x = np.asarray(series, dtype=float)
    if x.size < 3:
        return []
    thr = noise_tol * float(np.abs(x).max())
    turns: list[int] = []
    direction = 0
    ext, ext_i = x[0], 0
    for i in range(1, x.size):
        v = x[i]
        if direction == 0:
            if v - x[0] > thr:
                direction, ext, ext_i = 1, v, i
            elif x[0] - v > thr:
                direction, ext, ext_i = -1, v, i
        elif direction > 0:
            if v > ext:
                ext, ext_i = v, i
            elif ext - v > thr:
                turns.append(ext_i)
                direction, ext, ext_i = -1, v, i
        else:
            if v < ext:
                ext, ext_i = v, i
            elif v - ext > thr:
                turns.append(ext_i)
                direction, ext, ext_i = 1, v, i
    return turns


def monotonicity_changes(series, noise_tol: float = NOISE_TOL) -> int:
    """Number of direction reversals (``M - 1``)."""
    x = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("monotonicity_changes needs a finite series")
    return len(turning_points(x, noise_tol))


def mixing_angle(track: FrameTrack) -> np.ndarray:
    """Unwrapped ``atan2(Omega0, delta0)`` of a two-level ``H = -(delta0 sz + Omega0 sx)/2``-type Hamiltonian.

    ``delta0 = H11 - H00`` and ``Omega0 = -2 H01`` (its modulus when complex).
    The angle changes monotonicity exactly where the ratio ``Omega0/delta0``
    does, and stays continuous where that ratio has a pole.
    """
    if track.dim != 2:
        raise PreconditionError("the mixing angle is defined for two levels only")
    h = track.h
    delta0 = np.real(h[:, 1, 1] - h[:, 0, 0])
    off = -2 * h[:, 0, 1]
    rabi = np.real(off) if np.allclose(np.imag(off), 0, atol=1e-14) else np.abs(off)
    return np.unwrap(np.arctan2(rabi, delta0))


def passage_count(track: FrameTrack, noise_tol: float = NOISE_TOL) -> int:
    """``M``: one plus the monotonicity changes of ``Omega0/delta0`` over the track."""
    return 1 + monotonicity_changes(mixing_angle(track), noise_tol)


def zeno_bound(omega_n: float, n_levels: int, duration: float) -> tuple[float, float]:
    """``(1 - cos(min(sqrt(N-1) Omega_n T, pi)), (N-1) Omega_n^2 T^2 / 2)``."""
    x = math.sqrt(n_levels - 1) * omega_n * duration
    return 1.0 - math.cos(min(x, math.pi)), (n_levels - 1) * (omega_n * duration) ** 2 / 2


@dataclass(frozen=True)
class PointFixBounds:
    b_minus: float
    one_minus_b_plus: float
    vacuous: bool
    second_order: bool


def pointfix_bounds(
    a_max: float, tv: float, omega: float, duration: float, n_levels: int, second_order: bool = False
) -> PointFixBounds:
    """Bounds on ``max_{m != n} |b_m|`` and on ``1 - min_t |b_n|``.

    ``second_order=True`` drops the terms that the second-order phase choice
    cancels. A non-positive denominator makes both bounds vacuous (infinite).
    """
    n = n_levels
    aot = a_max * omega * duration
    typewriter = 0.0 if second_order else 1.0
    num = 2 * a_max + tv + (n - 2) * aot
    den = 1 - (n - 2) * (a_max + tv) - (typewriter * (n - 1) + (n - 2) ** 2) * aot
    inner = a_max + math.sqrt(n - 1) * tv + (n - 2) * aot
    plus = typewriter * 2 * (n - 1) * aot + 2 * (n - 1) * inner**2
    if not math.isfinite(num + den + plus) or den <= 0:
        return PointFixBounds(math.inf, math.inf, True, second_order)
    return PointFixBounds(num / den, plus, False, second_order)


@dataclass(frozen=True)
class Verdict:
    condition: str
    lhs: float
    rhs: float
    margin: float
    satisfied: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "lhs": _json_float(self.lhs),
            "rhs": _json_float(self.rhs),
            "margin": self.margin,
            "satisfied": self.satisfied,
            "note": self.note,
        }


def _verdict(condition, lhs, rhs, margin, note=""):
    ok = bool(math.isfinite(lhs) and lhs <= margin * rhs)
    return Verdict(str(condition.value if isinstance(condition, enum.Enum) else condition), lhs, rhs, margin, ok, note)


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


@dataclass(frozen=True, eq=False)
class CriteriaReport:
    """Every functional and bound evaluated on one frame track for tracked level ``level``."""

    times: np.ndarray
    level: int
    n_levels: int
    duration: float
    usual_lhs: np.ndarray
    usual_max: float
    a0: PairSeries
    a1: PairSeries
    a2: PairSeries | None
    a_max: dict
    tv: dict
    omega: float
    omega_n: float
    omega_bound: float
    m_count: np.ndarray  # (N, N) monotonicity changes of each A1 pair series
    passages: int | None
    zeno: tuple[float, float]
    pointfix: dict
    margin: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "level": self.level,
            "n_levels": self.n_levels,
            "duration": self.duration,
            "usual_max": self.usual_max,
            "a_max": {k: _json_float(v) for k, v in self.a_max.items()},
            "a1_has_poles": self.a1.has_poles,
            "tv": {k: _json_float(v) for k, v in self.tv.items()},
            "omega": self.omega,
            "omega_n": self.omega_n,
            "omega_bound": self.omega_bound,
            "m_count": self.m_count.tolist(),
            "passages": self.passages,
            "zeno": {"cos_bound": self.zeno[0], "quadratic_bound": self.zeno[1]},
            "pointfix": {
                name: {
                    "b_minus": _json_float(b.b_minus),
                    "one_minus_b_plus": _json_float(b.one_minus_b_plus),
                    "vacuous": b.vacuous,
                }
                for name, b in self.pointfix.items()
            },
            "margin": self.margin,
            "flags": list(self.flags),
        }
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def table(self):
        """Header and rows ``t, usual_lhs`` then ``a0_k_m, a1_k_m, a2_k_m`` for each ordered pair."""
        n = self.n_levels
        pairs = [(k, m) for k in range(n) for m in range(n) if k != m]
        series = [("a0", self.a0), ("a1", self.a1)] + ([("a2", self.a2)] if self.a2 is not None else [])
        header = ["t", "usual_lhs"] + [f"{name}_{k}_{m}" for name, _ in series for k, m in pairs]
        rows = []
        for i, t in enumerate(self.times):
            row = [t, self.usual_lhs[i]]
            for _, s in series:
                row += [s.values[i, k, m] for k, m in pairs]
            rows.append(row)
        return header, rows

    def write(self, path, fmt: str = "csv") -> None:
        write_table(path, *self.table(), fmt)


def criteria_report(
    track: FrameTrack, level: int = 0, *, margin: float = DEFAULT_MARGIN, noise_tol: float = NOISE_TOL
) -> CriteriaReport:
    n = track.dim
    if not 0 <= level < n:
        raise ValueError(f"level {level} out of range for {n} levels")
    flags = []
    duration = float(track.times[-1] - track.times[0])
    g1 = gamma_dot1(track)
    usual, usual_max = usual_condition(track, level)
    a0 = a_functionals(track, AChoice.A0)
    a1 = a_functionals(track, AChoice.A1, {"g1": g1})
    try:
        a2 = a_functionals(track, AChoice.A2, {"g2": gamma_dot2(track, g1)})
    except ConvergenceError as exc:
        a2 = None
        flags.append(f"a2: {exc}")
    if a1.has_poles:
        flags.append("a1 has poles (first-order phase rate vanishes)")

    omega, omega_n, omega_bound = omega_max(track, level)
    a_max = {"a0": a0.max_abs(), "a1": math.inf if a1.has_poles else a1.max_abs()}
    tv = {"a0": pair_total_variation(a0), "a1": math.inf if a1.has_poles else pair_total_variation(a1)}
    if a2 is not None:
        a_max["a2"] = a2.max_abs()
        tv["a2"] = pair_total_variation(a2)

    m_count = np.zeros((n, n), dtype=int)
    if not a1.has_poles:
        for k in range(n):
            for m in range(n):
                if k != m:
                    m_count[k, m] = monotonicity_changes(a1.values[:, k, m], noise_tol)
    passages = passage_count(track, noise_tol) if n == 2 else None

    pointfix = {"theta1": pointfix_bounds(a_max["a1"], tv["a1"], omega, duration, n)}
    if a2 is not None:
        pointfix["theta2"] = pointfix_bounds(a_max["a2"], tv["a2"], omega, duration, n, second_order=True)
    return CriteriaReport(
        times=np.asarray(track.times),
        level=level,
        n_levels=n,
        duration=duration,
        usual_lhs=usual,
        usual_max=usual_max,
        a0=a0,
        a1=a1,
        a2=a2,
        a_max=a_max,
        tv=tv,
        omega=omega,
        omega_n=omega_n,
        omega_bound=omega_bound,
        m_count=m_count,
        passages=passages,
        zeno=zeno_bound(omega_n, n, duration),
        pointfix=pointfix,
        margin=margin,
        flags=flags,
    )


def _monotone_pieces(report: CriteriaReport, noise_tol: float) -> list[tuple[int, int]]:
    n = report.n_levels
    cuts = set()
    for k in range(n):
        for m in range(n):
            if k != m:
                cuts.update(turning_points(report.a1.values[:, k, m], noise_tol))
    edges = [0] + sorted(cuts) + [len(report.times) - 1]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def check_conditions(
    report: CriteriaReport,
    which: Condition | str,
    *,
    margin: float | None = None,
    subdivide: bool = True,
    noise_tol: float = NOISE_TOL,
) -> Verdict:
    """Evaluate one adiabatic condition; satisfied iff ``lhs <= margin * rhs``.

    A pole of the first-order functional makes every first-order condition
    violated (``lhs = inf``).
    """
    which = Condition(which)
    margin = report.margin if margin is None else margin
    n = report.n_levels
    if which is Condition.USUAL:
        return _verdict(which, report.usual_max, 1.0, margin)
    if report.a1.has_poles:
        return _verdict(which, math.inf, 1.0, margin, "first-order functional has a pole")
    a, tv, om, dur = report.a_max["a1"], report.tv["a1"], report.omega, report.duration

    if which is Condition.NOT_OPTIMIZED:
        lhs = a + math.sqrt(n) * tv + (math.sqrt(n) + n - 2) * a * om * dur
        return _verdict(which, lhs, 1 / math.sqrt(n), margin)

    if which is Condition.MONOTONIC:
        monotone = not report.m_count.any()
        if monotone:
            return _verdict(which, a + math.sqrt(n - 2) * a * om * dur, 1 / n, margin)
        if not subdivide:
            raise PreconditionError("first-order functionals are not monotone and subdivision is disabled")
        # each piece has monotone functionals; their contributions are summed
        lhs = 0.0
        pieces = _monotone_pieces(report, noise_tol)
        for i0, i1 in pieces:
            vals = np.abs(report.a1.values[i0 : i1 + 1])
            a_i = float(vals.max())
            dur_i = float(report.times[i1] - report.times[i0])
            lhs += a_i + math.sqrt(n - 2) * a_i * om * dur_i
        return _verdict(which, lhs, 1 / n, margin, f"evaluated on {len(pieces)} monotone pieces")

    if n != 2:
        raise PreconditionError("the time-independent two-level condition needs exactly two levels")
    m = report.passages
    return _verdict(which, 2 * a, 1 / m**2, margin, f"M={m}")


def real_two_level_condition(track: FrameTrack) -> tuple[np.ndarray, float]:
    """``|delta0 dOmega0 - Omega0 ddelta0| / (delta0^2 + Omega0^2)^(3/2)`` for a real two-level track.

    This equals ``2|A1|`` and the rate of the mixing angle over the splitting.
    """
    if track.dim != 2:
        raise PreconditionError("real two-level condition needs two levels")
    h, hd = track.h, track.hdot
    if not (np.allclose(np.imag(h), 0, atol=1e-14) and np.allclose(np.imag(hd), 0, atol=1e-14)):
        raise PreconditionError("real two-level condition needs a real Hamiltonian")
    d0 = np.real(h[:, 1, 1] - h[:, 0, 0])
    r0 = np.real(-2 * h[:, 0, 1])
    dd = np.real(hd[:, 1, 1] - hd[:, 0, 0])
    rd = np.real(-2 * hd[:, 0, 1])
    series = np.abs(d0 * rd - r0 * dd) / (d0**2 + r0**2) ** 1.5
    return series, float(series.max())
