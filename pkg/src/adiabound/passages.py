"""Landau-Zener-Stueckelberg analytics for the cycling Hamiltonian, checked against propagation.

The cycling model sweeps the detuning ``delta0(t) = alpha cos(omega t)`` through
zero at ``(k + 1/2) pi / omega``. Each crossing is a Landau-Zener passage;
successive passages interfere through the phase accumulated between them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import loggamma

from ._io import write_table
from .errors import ContractError
from .propagator import DEFAULT_TOL, propagate
from .schedules import Kind, ScheduleSpec, TimeGrid, cycling, evaluate_h

J0_STITCH = 12.0
J0_SERIES_TERMS = 40
NEAR_ZERO = 0.01
COS_FLOOR = 1e-8


# crossings -----------------------------------------------------------------


def _detuning(spec: ScheduleSpec):
    """The swept diabatic detuning of a two-level schedule as a scalar function of time."""
    if spec.kind is Kind.CYCLING:
        a, w = float(spec.params["alpha"]), float(spec.params["omega"])
        return lambda t: a * math.cos(w * t)
    if spec.kind is Kind.LINEAR_CHIRP:
        b, tc = float(spec.params["beta"]), float(spec.params["t_cross"])
        return lambda t: b * (t - tc)
    if spec.dim != 2:
        raise ContractError("crossings are defined for two-level schedules")

    def delta(t):
        h = evaluate_h(spec, t)
        return float(np.real(h[1, 1] - h[0, 0]))

    return delta


def _samples_per_span(spec: ScheduleSpec, t0: float, t1: float) -> int:
    n = 64
    if spec.kind is Kind.CYCLING:
        n = max(n, int(math.ceil(16 * (t1 - t0) * float(spec.params["omega"]) / math.pi)) + 1)
    return n


def find_crossings(spec: ScheduleSpec, t_span=None) -> np.ndarray:
    """Times in ``t_span`` where the diabatic detuning changes sign, refined by Brent's method."""
    t0, t1 = spec.t_span if t_span is None else (float(t_span[0]), float(t_span[1]))
    f = _detuning(spec)
    ts = np.linspace(t0, t1, _samples_per_span(spec, t0, t1))
    vals = np.array([f(t) for t in ts])
    scale = max(1.0, abs(t0), abs(t1))
    out = []
    for i in range(len(ts) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            if i == 0 or np.sign(vals[i - 1]) != 0:
                out.append(ts[i])
            continue
        if a * b < 0:
            out.append(brentq(f, ts[i], ts[i + 1], xtol=1e-12 * scale, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        out.append(ts[-1])
    return np.array(sorted(set(out)))


# single passage ------------------------------------------------------------


@dataclass(frozen=True)
class LandauZener:
    p1: float
    p1_from_a1: float
    a1_inf: float
    in_regime: bool


def lz_single(alpha: float, omega: float, rabi: float) -> LandauZener:
    """Single-passage diabatic transition probability ``exp(-2 pi Omega0^2 / (4 alpha omega))``.

    The same exponent written as ``pi / (4 A1_inf)`` pins ``A1_inf = alpha omega / (2 Omega0^2)``,
    which is ``|A1|`` at the crossing.
    """
    if alpha <= 0 or omega <= 0 or rabi < 0:
        raise ValueError("need alpha > 0, omega > 0, rabi >= 0")
    in_regime = alpha >= 5 * max(rabi, omega)
    if not in_regime:
        warnings.warn("Landau-Zener formula assumes alpha >> Omega0 and alpha >> omega", stacklevel=2)
    p1 = math.exp(-2 * math.pi * rabi**2 / (4 * alpha * omega))
    a1_inf = math.inf if rabi == 0 else alpha * omega / (2 * rabi**2)
    p1_alt = math.exp(-math.pi / (4 * a1_inf))
    return LandauZener(p1, p1_alt, a1_inf, in_regime)


def adiabaticity_parameter(alpha: float, omega: float, rabi: float) -> float:
    """``Omega0^2 / (4 alpha omega)``, so that ``p1 = exp(-2 pi delta)``."""
    return rabi**2 / (4 * alpha * omega)


def stokes_phase(delta: float) -> float:
    """Phase picked up at one Landau-Zener crossing: ``pi/4 + delta (ln delta - 1) + arg Gamma(1 - i delta)``."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return math.pi / 4
    return math.pi / 4 + delta * (math.log(delta) - 1) + float(np.imag(loggamma(1 - 1j * delta)))


@dataclass(frozen=True)
class StueckelbergPhase:
    approx: float  # alpha / omega
    numeric: float  # half the integrated adiabatic splitting between the crossings
    stokes: float
    effective: float  # numeric + stokes


def stueckelberg_phase(spec: ScheduleSpec, crossings) -> StueckelbergPhase:
    """Interference phase between two consecutive crossings of a cycling schedule."""
    if spec.kind is not Kind.CYCLING:
        raise ContractError("stueckelberg_phase needs a cycling schedule")
    t_a, t_b = (float(x) for x in crossings)
    if not t_b > t_a:
        raise ContractError("crossings must be increasing")
    p = spec.params
    alpha, omega, rabi = float(p["alpha"]), float(p["omega"]), float(p["rabi"])
    between = find_crossings(spec, (t_a, t_b))
    eps = 1e-9 * max(1.0, abs(t_b))
    inner = between[(between > t_a + eps) & (between < t_b - eps)]
    if inner.size or abs(omega * (t_b - t_a) - math.pi) > 1e-6 * math.pi:
        raise ContractError("crossings are not consecutive")
    split = lambda t: math.sqrt((alpha * math.cos(omega * t)) ** 2 + rabi**2)  # noqa: E731
    integral, _ = quad(split, t_a, t_b, epsabs=1e-13, epsrel=1e-13, limit=200)
    numeric = 0.5 * integral
    stokes = stokes_phase(adiabaticity_parameter(alpha, omega, rabi))
    return StueckelbergPhase(alpha / omega, numeric, stokes, numeric + stokes)


# multi passage -------------------------------------------------------------


@dataclass(frozen=True)
class MultiPassage:
    p: float
    clamped: bool
    limit_used: bool
    note: str = ""


def multi_passage(p1: float, theta: float, m: int) -> MultiPassage:
    """``p1 sin^2(M Theta) / cos^2(Theta)`` (``4 p1 sin^2 Theta`` at ``M = 2``), clamped to [0, 1].

    The formula describes an even number of passages. When ``cos Theta`` vanishes
    the even-``M`` limit ``M^2 p1`` is used; for odd ``M`` it diverges and the
    result is clamped to 1.
    """
    if m < 1:
        raise ValueError("M must be >= 1")
    if not 0 <= p1 <= 1:
        raise ValueError("p1 must lie in [0, 1]")
    if m == 1:
        return MultiPassage(p1, False, False)
    c = math.cos(theta)
    if abs(c) < COS_FLOOR:
        raw = m * m * p1 if m % 2 == 0 else math.inf
        note = "cos(Theta) ~ 0: " + ("even-M limit M^2 p1" if m % 2 == 0 else "odd M diverges")
        val = min(1.0, raw)
        return MultiPassage(val, raw > 1, True, note)
    raw = 4 * p1 * math.sin(theta) ** 2 if m == 2 else p1 * math.sin(m * theta) ** 2 / c**2
    val = min(1.0, max(0.0, raw))
    return MultiPassage(val, val != raw, False)


def multi_passage_any_parity(p1: float, theta: float, m: int) -> float:
    """``p1 sin^2(M (Theta + pi/2)) / cos^2 Theta``: equal to ``multi_passage`` for even ``M``
    and also valid for odd ``M`` (each passage adds a sign flip between paths)."""
    c = math.cos(theta)
    if abs(c) < COS_FLOOR:
        return min(1.0, m * m * p1) if m % 2 == 0 else 1.0
    return min(1.0, p1 * math.sin(m * (theta + math.pi / 2)) ** 2 / c**2)


# Bessel J0 -----------------------------------------------------------------


def _j0_series(x: float) -> float:
    q = -x * x / 4
    term = total = 1.0
    for k in range(1, J0_SERIES_TERMS + 1):
        term *= q / (k * k)
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total


def _j0_asymptotic(x: float) -> float:
    # Hankel expansion truncated at its smallest term
    terms = [1.0]
    for k in range(1, 60):
        nxt = terms[-1] * (-((2 * k - 1) ** 2)) / (k * 8 * x)
        if abs(nxt) >= abs(terms[-1]):
            break
        terms.append(nxt)
    p = sum((-1) ** (k // 2) * terms[k] for k in range(0, len(terms), 2))
    q = sum((-1) ** (k // 2) * terms[k] for k in range(1, len(terms), 2))
    chi = x - math.pi / 4
    return math.sqrt(2 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j0(x: float) -> float:
    """Bessel ``J0``: power series for ``|x| <= 12``, asymptotic expansion beyond.

    At the stitch the series has lost about 1e-12 to cancellation and the
    asymptotic expansion is good to about 1e-12, so the absolute error stays
    near 1e-12 everywhere.
    """
    x = abs(float(x))
    return _j0_series(x) if x <= J0_STITCH else _j0_asymptotic(x)


def j0_zeros(upto: float) -> list[float]:
    """Zeros of ``bessel_j0`` up to ``upto`` (plus the next one)."""
    zeros = []
    k = 1
    while True:
        guess = (k - 0.25) * math.pi
        zeros.append(brentq(bessel_j0, guess - 0.5, guess + 0.5, xtol=1e-14))
        if zeros[-1] > upto:
            return zeros
        k += 1


@dataclass(frozen=True)
class LocalizationCheck:
    near_zero: bool
    distance: float
    j0: float
    nearest_zero: float


def localization_check(alpha_over_omega: float) -> LocalizationCheck:
    """Whether the drive ratio sits near a zero of ``J0`` (``|J0| < 0.01``), and how far the nearest zero is."""
    if alpha_over_omega < 0:
        raise ValueError("ratio must be >= 0")
    val = bessel_j0(alpha_over_omega)
    zeros = j0_zeros(alpha_over_omega)
    nearest = min(zeros, key=lambda z: abs(z - alpha_over_omega))
    return LocalizationCheck(abs(val) < NEAR_ZERO, abs(nearest - alpha_over_omega), val, nearest)


# experiments ---------------------------------------------------------------


@dataclass(frozen=True)
class PassageReport:
    alpha: float
    omega: float
    rabi: float
    m: int
    crossings: np.ndarray
    window: tuple[float, float]
    p1: float
    theta_approx: float
    theta_num: float
    theta_stokes: float
    p_pred: float
    p_pred_any_parity: float
    p_num: float
    norm_drift: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "omega": self.omega,
            "rabi": self.rabi,
            "M": self.m,
            "crossings": [float(t) for t in self.crossings],
            "window": list(self.window),
            "p1": self.p1,
            "theta_approx": self.theta_approx,
            "theta_num": self.theta_num,
            "theta_stokes": self.theta_stokes,
            "p_pred": self.p_pred,
            "p_pred_any_parity": self.p_pred_any_parity,
            "p_num": self.p_num,
            "norm_drift": self.norm_drift,
            "flags": list(self.flags),
        }


def _lower_state(spec, t):
    w, v = np.linalg.eigh(evaluate_h(spec, t))
    return v[:, 0]


def passage_experiment(
    spec: ScheduleSpec, m: int, tol: float = DEFAULT_TOL, first_crossing: int = 0
) -> PassageReport:
    """Propagate through ``m`` consecutive crossings and measure the population left in the upper level.

    The window runs between the turning points of the drive that bracket the
    crossings, i.e. the midpoints between neighbouring crossings. The state
    starts in the lower adiabatic level there.
    """
    if spec.kind is not Kind.CYCLING or spec.params["swapped"]:
        raise ContractError("passage_experiment needs an unswapped cycling schedule")
    if m < 1:
        raise ValueError("M must be >= 1")
    p = spec.params
    alpha, omega, rabi = float(p["alpha"]), float(p["omega"]), float(p["rabi"])
    crossings = find_crossings(spec)
    if len(crossings) < first_crossing + m:
        raise ContractError(f"t_span holds {len(crossings)} crossings, need {first_crossing + m}")
    used = crossings[first_crossing : first_crossing + m]
    half = math.pi / omega
    t_start = max(spec.t_span[0], used[0] - half / 2)
    t_end = min(spec.t_span[1], used[-1] + half / 2)
    flags = []
    if t_start > used[0] - half / 2 + 1e-12 or t_end < used[-1] + half / 2 - 1e-12:
        flags.append("window truncated by t_span")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lz = lz_single(alpha, omega, rabi)
    if not lz.in_regime:
        flags.append("outside the Landau-Zener regime (alpha not >> Omega0, omega)")
    if m >= 2:
        ph = stueckelberg_phase(spec, used[:2])
    else:
        ph = StueckelbergPhase(alpha / omega, math.nan, stokes_phase(adiabaticity_parameter(alpha, omega, rabi)), math.nan)
    theta_eff = ph.effective if m >= 2 else 0.0
    pred = multi_passage(lz.p1, theta_eff, m)
    if pred.note:
        flags.append(pred.note)
    if m % 2 and m > 1:
        flags.append("odd M: the sin^2(M Theta)/cos^2 Theta form assumes an even passage count")

    grid = TimeGrid(np.array([t_start, t_end]))
    psi0 = _lower_state(spec, t_start)
    traj = propagate(spec, psi0, grid, tol)
    psi = traj.diabatic[-1]
    p_num = float(1 - abs(np.vdot(_lower_state(spec, t_end), psi)) ** 2 / np.vdot(psi, psi).real)
    return PassageReport(
        alpha=alpha,
        omega=omega,
        rabi=rabi,
        m=m,
        crossings=used,
        window=(t_start, t_end),
        p1=lz.p1,
        theta_approx=ph.approx,
        theta_num=ph.numeric,
        theta_stokes=ph.stokes,
        p_pred=pred.p,
        p_pred_any_parity=multi_passage_any_parity(lz.p1, theta_eff, m),
        p_num=p_num,
        norm_drift=traj.norm_drift,
        flags=flags,
    )


def cycling_for_passages(alpha: float, omega: float, rabi: float, m: int) -> ScheduleSpec:
    """Cycling schedule whose span holds exactly ``m`` crossings, from one turning point to another."""
    return cycling(alpha, omega, rabi, (0.0, m * math.pi / omega))


@dataclass(frozen=True)
class LocalizationReport:
    alpha_over_omega: float
    omega: float
    rabi: float
    periods: int
    retained: float
    lost: float
    check: LocalizationCheck
    norm_drift: float


def localization_experiment(
    alpha_over_omega: float, omega: float = 20.0, rabi: float = 1.0, periods: int = 1, tol: float = DEFAULT_TOL
) -> LocalizationReport:
    """Population kept in ``(1, 1)/sqrt(2)`` after whole drive periods of the swapped cycling model.

    In the swapped model the drive acts along ``sigma_x``, whose eigenstates it
    dresses; the static ``Omega0 sigma_z`` term tunnels between them unless
    ``J0(alpha/omega)`` vanishes.
    """
    spec = cycling(alpha_over_omega * omega, omega, rabi, (0.0, periods * 2 * math.pi / omega), swapped=True)
    psi0 = np.array([1, 1], dtype=np.complex128) / math.sqrt(2)
    traj = propagate(spec, psi0, TimeGrid(np.array(spec.t_span)), tol)
    retained = float(abs(np.vdot(psi0, traj.diabatic[-1])) ** 2)
    return LocalizationReport(
        alpha_over_omega, omega, rabi, periods, retained, 1 - retained, localization_check(alpha_over_omega), traj.norm_drift
    )


SWEEP_COLUMNS = ["alpha", "omega", "rabi", "M", "p1_pred", "theta_approx", "theta_num", "pM_pred", "pM_num"]


def sweep_row(report: PassageReport) -> list[float]:
    return [
        report.alpha,
        report.omega,
        report.rabi,
        report.m,
        report.p1,
        report.theta_approx,
        report.theta_num,
        report.p_pred,
        report.p_num,
    ]


def write_sweep(reports, path, fmt: str = "csv") -> None:
    write_table(path, SWEEP_COLUMNS, [sweep_row(r) for r in reports], fmt)
