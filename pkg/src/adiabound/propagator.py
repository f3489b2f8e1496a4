"""Time-dependent Schrodinger equation: adaptive integration, the exact two-level
propagator for a uniformly rotating field, and adiabatic-frame amplitudes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import _kernels as K
from ._io import write_table
from .errors import ContractError, IntegrationError
from .schedules import Kind, ScheduleSpec, TimeGrid, build_grid
from .spectral import FrameTrack, frame_track

DEFAULT_TOL = 1e-10
MAX_STEPS = 20_000_000


class PhaseChoice(str, enum.Enum):
    THETA1 = "theta1"
    THETA2 = "theta2"


@dataclass(frozen=True)
class SchwingerParams:
    """Constant field magnitude ``omega0``, polar angle ``theta`` and rotation rate ``omega_l``."""

    omega0: float
    theta: float
    omega_l: float

    @classmethod
    def from_spec(cls, spec: ScheduleSpec) -> "SchwingerParams":
        if spec.kind is not Kind.SCHWINGER:
            raise ContractError(f"expected a schwinger schedule, got {spec.kind.value}")
        p = spec.params
        return cls(float(p["omega0"]), float(p["theta"]), float(p["omega_l"]))

    @property
    def rabi_l(self) -> float:
        return self.omega_l * math.sin(self.theta)

    @property
    def detuning_l(self) -> float:
        return self.omega_l * math.cos(self.theta) - self.omega0

    @property
    def rabi_r(self) -> float:
        return math.sqrt(self.rabi_l**2 + self.detuning_l**2)


def schwinger_frame(p: SchwingerParams, t: float) -> np.ndarray:
    """Eigenvector matrix at ``t`` (columns: lower, upper level) with the first-order phases.

    Each column carries ``exp(i theta_pm)`` with
    ``theta_pm = -/+ (omega0 - omega_l cos theta) t / 2``.
    """
    phi = -p.omega_l * t
    th_minus = 0.5 * (p.omega0 - p.omega_l * math.cos(p.theta)) * t
    c, s = math.cos(p.theta / 2), math.sin(p.theta / 2)
    em, ep = np.exp(-0.5j * phi), np.exp(0.5j * phi)
    pm, pp = np.exp(1j * th_minus), np.exp(-1j * th_minus)
    return np.array([[em * c * pm, -em * s * pp], [ep * s * pm, ep * c * pp]])


def schwinger_exact(p: SchwingerParams, t: float, basis: str = "adiabatic") -> np.ndarray:
    """Exact evolution operator from 0 to ``t``.

    ``basis="adiabatic"`` gives the operator acting on the amplitudes of the
    phase-dressed eigenvectors; ``basis="diabatic"`` gives the plain
    ``U(t, 0) = R(t) U_ad R(0)^dagger``.
    """
    om_r = p.rabi_r
    if om_r == 0:
        u = np.eye(2, dtype=np.complex128)
    else:
        d, om = p.detuning_l, p.rabi_l
        c, s = math.cos(om_r * t / 2), math.sin(om_r * t / 2)
        e = np.exp(0.5j * d * t)
        u = np.array(
            [
                [(c - 1j * d / om_r * s) * e, 1j * e * om / om_r * s],
                [1j / e * om / om_r * s, (c + 1j * d / om_r * s) / e],
            ]
        )
    if basis == "adiabatic":
        return u
    if basis == "diabatic":
        return schwinger_frame(p, t) @ u @ schwinger_frame(p, 0.0).conj().T
    raise ValueError(f"basis must be 'adiabatic' or 'diabatic', got {basis!r}")


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """State samples on a grid, plus (once frames are attached) adiabatic amplitudes ``b_m``.

    ``dynamical_phase`` is ``-int E_m dt`` and ``geometric_phase`` is
    ``int i<m|dm/dt> dt``; ``correction_phase`` holds the extra second-order
    term when ``phase_choice`` is theta2 and is zero otherwise.
    """

    grid: TimeGrid
    diabatic: np.ndarray  # (T, N)
    tol: float
    norm_drift: float
    stats: dict = field(default_factory=dict)
    adiabatic_b: np.ndarray | None = None
    dynamical_phase: np.ndarray | None = None
    geometric_phase: np.ndarray | None = None
    correction_phase: np.ndarray | None = None
    phase_choice: PhaseChoice | None = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def dim(self) -> int:
        return self.diabatic.shape[1]

    @property
    def populations(self) -> np.ndarray:
        """``|b_m(t)|^2``, shape ``(T, N)``."""
        if self.adiabatic_b is None:
            raise ContractError("trajectory has no adiabatic amplitudes; call adiabatic_amplitudes first")
        return np.abs(self.adiabatic_b) ** 2


def propagate(spec: ScheduleSpec, psi0, grid: TimeGrid, tol: float = DEFAULT_TOL) -> StateTrajectory:
    """Integrate ``i dpsi/dt = H(t) psi`` from ``grid.t0`` and sample on ``grid``.

    Dormand-Prince 5(4) with PI step control and 4th-order dense output. The
    state is never renormalised; ``norm_drift`` reports ``max |‖psi‖ - 1|``.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128).reshape(-1)
    if psi0.shape != (spec.dim,):
        raise ValueError(f"psi0 must have {spec.dim} components, got {psi0.shape[0]}")
    if abs(np.linalg.norm(psi0) - 1) > 1e-12:
        raise ValueError("psi0 must be normalised to 1e-12")
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-13, 1e-6], got {tol}")
    t0, t1 = spec.t_span
    span_eps = 1e-12 * max(1.0, abs(t0), abs(t1))
    if grid.t0 < t0 - span_eps or grid.t1 > t1 + span_eps:
        raise ValueError("grid extends outside the schedule's t_span")

    out, stats = K.dopri5(*spec.kernel_args(), psi0, np.ascontiguousarray(grid.times), float(tol), MAX_STEPS)
    status = int(stats[2])
    if status == K.STATUS_STEP_UNDERFLOW:
        raise IntegrationError("step size underflow", stats[3])
    if status == K.STATUS_MAX_STEPS:
        raise IntegrationError(f"exceeded {MAX_STEPS} steps", stats[3])
    drift = float(np.max(np.abs(np.linalg.norm(out, axis=1) - 1)))
    info = {"accepted": int(stats[0]), "rejected": int(stats[1]), "max_local_error": float(stats[4])}
    return StateTrajectory(grid=grid, diabatic=out, tol=float(tol), norm_drift=drift, stats=info)


def _check_labels(traj: StateTrajectory, track: FrameTrack):
    if len(track) != len(traj.grid) or not np.allclose(track.times, traj.times, rtol=0, atol=1e-12):
        raise ContractError("frames and trajectory are sampled on different grids")
    if track.dim != traj.dim:
        raise ContractError(f"frames have {track.dim} levels, trajectory has {traj.dim}")


def adiabatic_amplitudes(
    traj: StateTrajectory, track: FrameTrack, phase_choice: PhaseChoice | str = PhaseChoice.THETA1
) -> StateTrajectory:
    """Attach ``b_m(t) = exp(-i theta_m(t)) <m(t)|psi(t)>`` to a trajectory.

    Phases are integrated with the trapezoidal rule on the shared grid.
    """
    choice = PhaseChoice(phase_choice)
    _check_labels(traj, track)
    t = traj.times
    overlaps = np.einsum("tim,ti->tm", track.vectors.conj(), traj.diabatic)
    dynamical = -cumulative_trapezoid(track.energies, t, axis=0, initial=0)
    berry_rate = np.real(1j * np.diagonal(track.c, axis1=1, axis2=2))
    geometric = cumulative_trapezoid(berry_rate, t, axis=0, initial=0)
    correction = np.zeros_like(dynamical)
    if choice is PhaseChoice.THETA2:
        from .criteria import second_order_phase_rate

        correction = cumulative_trapezoid(second_order_phase_rate(track), t, axis=0, initial=0)
    theta = dynamical + geometric + correction
    b = np.exp(-1j * theta) * overlaps
    return replace(
        traj,
        adiabatic_b=b,
        dynamical_phase=dynamical,
        geometric_phase=geometric,
        correction_phase=correction,
        phase_choice=choice,
    )


def simulate(
    spec: ScheduleSpec,
    psi0=None,
    *,
    level: int | None = None,
    grid: TimeGrid | None = None,
    tol: float = DEFAULT_TOL,
    phase_choice: PhaseChoice | str = PhaseChoice.THETA1,
    n_min: int = 201,
    track: FrameTrack | None = None,
) -> tuple[StateTrajectory, FrameTrack]:
    """Frames, propagation and amplitudes on one shared grid.

    The frame tracker may refine the grid; the state is then sampled on the
    refined grid so every quantity lives on the same times. Give either
    ``psi0`` or ``level`` (start in that eigenvector of ``H(t0)``).
    """
    if track is None:
        track = frame_track(spec, grid if grid is not None else build_grid(spec, n_min))
    if (psi0 is None) == (level is None):
        raise ValueError("give exactly one of psi0 and level")
    if level is not None:
        if not 0 <= level < spec.dim:
            raise ValueError(f"level {level} out of range for {spec.dim} levels")
        psi0 = track.vectors[0][:, level]
    traj = propagate(spec, psi0, track.grid, tol)
    return adiabatic_amplitudes(traj, track, phase_choice), track


def infidelity(traj: StateTrajectory, n: int) -> tuple[float, float]:
    """``(1 - |b_n(T)|, sqrt(1 - |b_n(T)|^2))`` at the final grid time."""
    if traj.adiabatic_b is None:
        raise ContractError("trajectory has no adiabatic amplitudes")
    if not 0 <= n < traj.dim:
        raise ValueError(f"level {n} out of range")
    mag = min(1.0, float(abs(traj.adiabatic_b[-1, n])))
    return 1.0 - mag, math.sqrt(max(0.0, 1.0 - mag * mag))


def trajectory_table(traj: StateTrajectory):
    """Header and rows: ``t``, re/im of each diabatic component, ``|b_m|^2`` per level, norm drift."""
    n = traj.dim
    header = ["t"]
    for i in range(n):
        header += [f"re_psi_{i}", f"im_psi_{i}"]
    if traj.adiabatic_b is not None:
        header += [f"pop_b_{m}" for m in range(n)]
    header.append("norm_drift")
    drift = np.abs(np.linalg.norm(traj.diabatic, axis=1) - 1)
    rows = []
    for i, t in enumerate(traj.times):
        row = [t]
        for z in traj.diabatic[i]:
            row += [z.real, z.imag]
        if traj.adiabatic_b is not None:
            row += list(np.abs(traj.adiabatic_b[i]) ** 2)
        row.append(drift[i])
        rows.append(row)
    return header, rows


def write_trajectory(traj: StateTrajectory, path, fmt: str = "csv") -> None:
    write_table(path, *trajectory_table(traj), fmt)
