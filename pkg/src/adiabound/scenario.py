"""Scenario documents: strict parsing, the task pipeline and parameter sweeps.

A scenario is a JSON object with the sections ``schedule``, ``initial``,
``grid``, ``tasks``, ``output``, ``tolerances`` and optionally ``seed``,
``passages`` and ``sweep``.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import criteria as C
from ._io import dumps, write_table
from .errors import AdiaboundError, PreconditionError, ValidationError
from .passages import (
    cycling_for_passages,
    find_crossings,
    localization_experiment,
    passage_experiment,
    sweep_row,
    SWEEP_COLUMNS,
)
from .propagator import DEFAULT_TOL, PhaseChoice, StateTrajectory, infidelity, simulate, write_trajectory
from .schedules import PARAMS, Kind, ScheduleSpec, TimeGrid, build_grid
from .spectral import FrameTrack, frame_track, write_frames

TASKS = ("simulate", "criteria", "bounds", "passages")
SECTIONS = {"schedule", "initial", "grid", "tasks", "output", "tolerances", "seed", "passages", "sweep", "description"}
GRID_KEYS = {"n_min": 201, "refine": True, "overlap_threshold": 0.99, "max_levels": 8}
TOL_KEYS = {"integrator": DEFAULT_TOL, "margin": C.DEFAULT_MARGIN, "gap_floor": 1e-10, "noise_tol": C.NOISE_TOL}
OUTPUT_KEYS = {"dir": None, "format": "csv", "prefix": ""}
INITIAL_KEYS = {"level", "state", "phase_choice"}
PASSAGE_KEYS = {"M": [1, 2], "first_crossing": 0, "periods": 1}
SWEEP_KEYS = {"axes", "workers"}
AXIS_KEYS = {"values", "start", "stop", "num", "spacing"}
SPAN_AXES = ("t0", "t1")


@dataclass(frozen=True, eq=False)
class Scenario:
    schedule: ScheduleSpec
    initial_level: int | None
    initial_state: np.ndarray | None
    phase_choice: PhaseChoice
    grid: dict
    tasks: tuple[str, ...]
    output: dict
    tolerances: dict
    seed: int
    passages: dict
    sweep: dict | None
    document: dict = field(repr=False)


# parsing -------------------------------------------------------------------


def _expect(cond, path, message):
    if not cond:
        raise ValidationError(path, message)


def _check_keys(obj, allowed, path):
    _expect(isinstance(obj, dict), path, "must be an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ValidationError(where, "unknown key")


def _number(x, path, *, integer=False, positive=False, minimum=None):
    ok = isinstance(x, (int, float)) and not isinstance(x, bool)
    _expect(ok, path, "must be a number")
    _expect(math.isfinite(x), path, "must be finite")
    if integer:
        _expect(float(x).is_integer(), path, "must be an integer")
        x = int(x)
    if positive:
        _expect(x > 0, path, "must be > 0")
    if minimum is not None:
        _expect(x >= minimum, path, f"must be >= {minimum}")
    return x


def load_document(text: str, source: str = "<scenario>") -> dict:
    """Parse JSON text, reporting the line and column of syntax errors."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError("", f"{source}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _expect(isinstance(doc, dict), "", "scenario document must be a JSON object")
    return doc


def _parse_schedule(doc, seed):
    path = "schedule"
    _check_keys(doc, {"kind", "params", "t_span"}, path)
    _expect("kind" in doc, f"{path}.kind", "missing")
    kinds = [k.value for k in Kind]
    _expect(doc["kind"] in kinds, f"{path}.kind", f"must be one of {', '.join(kinds)}")
    kind = Kind(doc["kind"])
    _expect("t_span" in doc, f"{path}.t_span", "missing")
    span = doc["t_span"]
    _expect(isinstance(span, list) and len(span) == 2, f"{path}.t_span", "must be a list [t0, t1]")
    t0 = _number(span[0], f"{path}.t_span[0]")
    t1 = _number(span[1], f"{path}.t_span[1]")
    _expect(t0 < t1, f"{path}.t_span", "must satisfy t0 < t1")

    params = dict(doc.get("params", {}))
    _check_keys(params, set(PARAMS[kind][0]) | set(PARAMS[kind][1]), f"{path}.params")
    for name in PARAMS[kind][0]:
        _expect(name in params, f"{path}.params.{name}", "missing required parameter")
    for name, value in params.items():
        p = f"{path}.params.{name}"
        if name in ("swapped", "complex"):
            _expect(isinstance(value, bool), p, "must be true or false")
        elif name == "path":
            _expect(isinstance(value, str), p, "must be a file path")
        elif name in ("h_a", "h_b", "times", "matrices"):
            continue
        elif name in ("dim", "seed"):
            params[name] = _number(value, p, integer=True)
        else:
            params[name] = _number(value, p)
    if kind is Kind.RANDOM_SMOOTH:
        _expect(params["dim"] >= 2, f"{path}.params.dim", "dim must be ≥ 2")
        params.setdefault("seed", seed)
    if kind is Kind.CYCLING:
        for name in ("alpha", "omega", "rabi"):
            _expect(params[name] > 0, f"{path}.params.{name}", "must be > 0")
    if kind is Kind.SCHWINGER:
        _expect(params["omega0"] > 0, f"{path}.params.omega0", "must be > 0")
        _expect(0 < params["theta"] < math.pi, f"{path}.params.theta", "must lie in (0, pi)")
    try:
        return ScheduleSpec(kind, params, (t0, t1))
    except (ValueError, OSError) as exc:
        raise ValidationError(f"{path}.params", str(exc)) from None


def _parse_initial(doc, dim):
    path = "initial"
    _check_keys(doc, INITIAL_KEYS, path)
    choice = doc.get("phase_choice", "theta1")
    _expect(choice in ("theta1", "theta2"), f"{path}.phase_choice", "must be theta1 or theta2")
    if "state" in doc:
        _expect("level" not in doc, path, "give either level or state, not both")
        raw = doc["state"]
        _expect(isinstance(raw, list) and len(raw) == dim, f"{path}.state", f"must list {dim} components")
        comps = []
        for i, z in enumerate(raw):
            p = f"{path}.state[{i}]"
            if isinstance(z, list):
                _expect(len(z) == 2, p, "complex entries are [re, im]")
                comps.append(complex(_number(z[0], p), _number(z[1], p)))
            else:
                comps.append(complex(_number(z, p)))
        state = np.array(comps, dtype=np.complex128)
        norm = np.linalg.norm(state)
        _expect(norm > 0, f"{path}.state", "must be nonzero")
        return None, state / norm, PhaseChoice(choice)
    level = _number(doc.get("level", 0), f"{path}.level", integer=True, minimum=0)
    _expect(level < dim, f"{path}.level", f"level must be < N = {dim}")
    return level, None, PhaseChoice(choice)


def _parse_section(doc, defaults, path):
    _check_keys(doc, defaults, path)
    out = dict(defaults)
    out.update(doc)
    return out


def _parse_axes(doc, kind):
    path = "sweep"
    _check_keys(doc, SWEEP_KEYS, path)
    _expect("axes" in doc and isinstance(doc["axes"], dict) and doc["axes"], f"{path}.axes", "needs at least one axis")
    allowed = set(PARAMS[kind][0]) | set(PARAMS[kind][1]) | set(SPAN_AXES)
    axes = {}
    for name, spec in doc["axes"].items():
        p = f"{path}.axes.{name}"
        _expect(name in allowed, p, f"not a parameter of {kind.value}")
        _check_keys(spec, AXIS_KEYS, p)
        if "values" in spec:
            vals = spec["values"]
            _expect(isinstance(vals, list) and vals, f"{p}.values", "must be a nonempty list")
            axes[name] = [_number(v, f"{p}.values") for v in vals]
            continue
        for key in ("start", "stop", "num"):
            _expect(key in spec, f"{p}.{key}", "missing")
        num = _number(spec["num"], f"{p}.num", integer=True, minimum=1)
        start, stop = _number(spec["start"], f"{p}.start"), _number(spec["stop"], f"{p}.stop")
        spacing = spec.get("spacing", "linear")
        _expect(spacing in ("linear", "log"), f"{p}.spacing", "must be linear or log")
        if spacing == "log":
            _expect(start > 0 and stop > 0, p, "log spacing needs positive bounds")
            axes[name] = [float(v) for v in np.geomspace(start, stop, num)]
        else:
            axes[name] = [float(v) for v in np.linspace(start, stop, num)]
    workers = _number(doc.get("workers", 1), f"{path}.workers", integer=True, minimum=1)
    return {"axes": axes, "workers": workers}


def parse_scenario(document, *, overrides: dict | None = None) -> Scenario:
    """Validate a scenario document (dict or JSON text).

    ``overrides`` may set ``seed``, ``tol``, ``out``, ``format``, ``workers`` and
    ``tasks`` (command-line flags win over the document).
    """
    doc = load_document(document) if isinstance(document, str) else copy.deepcopy(document)
    _expect(isinstance(doc, dict), "", "scenario document must be an object")
    _check_keys(doc, SECTIONS, "")
    overrides = overrides or {}
    seed = doc.get("seed", 0)
    if overrides.get("seed") is not None:
        seed = overrides["seed"]
    seed = _number(seed, "seed", integer=True, minimum=0)
    _expect(seed < 2**64, "seed", "must fit in 64 bits")

    _expect("schedule" in doc, "schedule", "missing")
    sched_doc = copy.deepcopy(doc["schedule"])
    if overrides.get("seed") is not None and sched_doc.get("kind") == Kind.RANDOM_SMOOTH.value:
        sched_doc.setdefault("params", {})["seed"] = seed
    spec = _parse_schedule(sched_doc, seed)

    level, state, choice = _parse_initial(doc.get("initial", {}), spec.dim)
    grid = _parse_section(doc.get("grid", {}), GRID_KEYS, "grid")
    grid["n_min"] = _number(grid["n_min"], "grid.n_min", integer=True, minimum=2)
    _expect(isinstance(grid["refine"], bool), "grid.refine", "must be true or false")
    grid["overlap_threshold"] = _number(grid["overlap_threshold"], "grid.overlap_threshold", positive=True)
    grid["max_levels"] = _number(grid["max_levels"], "grid.max_levels", integer=True, minimum=0)

    tasks = overrides.get("tasks") or doc.get("tasks", ["simulate"])
    _expect(isinstance(tasks, list) and tasks, "tasks", "needs at least one task")
    for i, t in enumerate(tasks):
        _expect(t in TASKS, f"tasks[{i}]", f"must be one of {', '.join(TASKS)}")

    output = _parse_section(doc.get("output", {}), OUTPUT_KEYS, "output")
    if overrides.get("out") is not None:
        output["dir"] = overrides["out"]
    if overrides.get("format") is not None:
        output["format"] = overrides["format"]
    _expect(output["format"] in ("csv", "json"), "output.format", "must be csv or json")
    _expect(output["dir"] is None or isinstance(output["dir"], str), "output.dir", "must be a path")
    _expect(isinstance(output["prefix"], str), "output.prefix", "must be a string")

    tol = _parse_section(doc.get("tolerances", {}), TOL_KEYS, "tolerances")
    if overrides.get("tol") is not None:
        tol["integrator"] = overrides["tol"]
    for key in TOL_KEYS:
        tol[key] = _number(tol[key], f"tolerances.{key}", positive=True)
    _expect(1e-13 <= tol["integrator"] <= 1e-6, "tolerances.integrator", "must lie in [1e-13, 1e-6]")

    passages = _parse_section(doc.get("passages", {}), PASSAGE_KEYS, "passages")
    ms = passages["M"]
    _expect(isinstance(ms, list) and ms, "passages.M", "must be a nonempty list")
    passages["M"] = [_number(m, "passages.M", integer=True, minimum=1) for m in ms]
    passages["first_crossing"] = _number(passages["first_crossing"], "passages.first_crossing", integer=True, minimum=0)
    passages["periods"] = _number(passages["periods"], "passages.periods", integer=True, minimum=1)
    if "passages" in tasks:
        _expect(spec.kind is Kind.CYCLING, "tasks", "the passages task needs a cycling schedule")

    sweep = None
    if "sweep" in doc:
        sweep = _parse_axes(doc["sweep"], spec.kind)
        if overrides.get("workers") is not None:
            sweep["workers"] = int(overrides["workers"])

    return Scenario(
        schedule=spec,
        initial_level=level,
        initial_state=state,
        phase_choice=choice,
        grid=grid,
        tasks=tuple(tasks),
        output=output,
        tolerances=tol,
        seed=seed,
        passages=passages,
        sweep=sweep,
        document=doc,
    )


# presets -------------------------------------------------------------------


def preset_names() -> list[str]:
    files = resources.files("adiabound").joinpath("presets")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def preset_document(name: str) -> dict:
    path = resources.files("adiabound").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ValidationError("preset", f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return load_document(path.read_text(), f"preset {name}")


def load_preset(name: str, **overrides) -> Scenario:
    return parse_scenario(preset_document(name), overrides=overrides)


# running -------------------------------------------------------------------


@dataclass(eq=False)
class ReportBundle:
    scenario: Scenario
    summary: dict = field(default_factory=dict)
    track: FrameTrack | None = None
    trajectory: StateTrajectory | None = None
    criteria: C.CriteriaReport | None = None
    verdicts: dict = field(default_factory=dict)
    passages: list = field(default_factory=list)
    localization: Any = None
    files: list = field(default_factory=list)


class TaskError(AdiaboundError):
    """A module error raised while running one task of a scenario."""

    def __init__(self, task: str, source: str, cause: Exception):
        self.task, self.source, self.cause = task, source, cause
        super().__init__(f"{source}: task {task!r} failed: {cause}")


def _grid_for(sc: Scenario) -> TimeGrid:
    return build_grid(sc.schedule, sc.grid["n_min"])


def _track(sc: Scenario) -> FrameTrack:
    g = sc.grid
    return frame_track(
        sc.schedule,
        _grid_for(sc),
        refine=g["refine"],
        overlap_threshold=g["overlap_threshold"],
        max_levels=g["max_levels"],
        gap_floor=sc.tolerances["gap_floor"],
    )


def _level(sc: Scenario, track: FrameTrack) -> int:
    if sc.initial_level is not None:
        return sc.initial_level
    weights = np.abs(track.vectors[0].conj().T @ sc.initial_state)
    return int(np.argmax(weights))


def _task_simulate(sc, bundle):
    track = bundle.track
    kwargs = {"level": sc.initial_level} if sc.initial_level is not None else {"psi0": sc.initial_state}
    traj, _ = simulate(sc.schedule, tol=sc.tolerances["integrator"], phase_choice=sc.phase_choice, track=track, **kwargs)
    bundle.trajectory = traj
    n = _level(sc, track)
    one_minus, proj = infidelity(traj, n)
    pops = traj.populations
    bundle.summary["simulate"] = {
        "level": n,
        "phase_choice": sc.phase_choice.value,
        "grid_points": len(track),
        "refine_levels": track.refine_levels,
        "min_gap": float(track.gaps.min()),
        "norm_drift": traj.norm_drift,
        "tol": traj.tol,
        "integrator": traj.stats,
        "infidelity": {"one_minus_bn": one_minus, "proj_dist": proj},
        "max_population": pops.max(axis=0).tolist(),
        "final_population": pops[-1].tolist(),
    }


def _task_criteria(sc, bundle):
    n = _level(sc, bundle.track)
    rep = C.criteria_report(bundle.track, n, margin=sc.tolerances["margin"], noise_tol=sc.tolerances["noise_tol"])
    bundle.criteria = rep
    verdicts = {}
    for cond in C.Condition:
        try:
            verdicts[cond.value] = C.check_conditions(rep, cond, noise_tol=sc.tolerances["noise_tol"])
        except PreconditionError as exc:
            verdicts[cond.value] = C.Verdict(cond.value, math.nan, math.nan, rep.margin, False, f"not applicable: {exc}")
    bundle.verdicts = verdicts
    out = rep.to_dict()
    out["verdicts"] = {k: v.to_dict() for k, v in verdicts.items()}
    if rep.n_levels == 2 and np.allclose(np.imag(bundle.track.h), 0, atol=1e-14) and np.allclose(
        np.imag(bundle.track.hdot), 0, atol=1e-14
    ):
        series, mx = C.real_two_level_condition(bundle.track)
        out["real_two_level"] = {
            "max": mx,
            "max_deviation_from_2a1": float(np.max(np.abs(series - 2 * np.abs(rep.a1.values[:, 1, 0])))),
        }
    bundle.summary["criteria"] = out


def _task_bounds(sc, bundle):
    traj, rep = bundle.trajectory, bundle.criteria
    n = rep.level
    mags = np.abs(traj.adiabatic_b)
    observed_final = 1 - float(mags[-1, n])
    observed_min = 1 - float(mags[:, n].min())
    others = np.delete(mags, n, axis=1)
    b_minus_obs = float(others.max()) if others.size else 0.0
    cos_b, quad_b = rep.zeno
    out = {
        "zeno": {
            "observed": observed_final,
            "cos_bound": cos_b,
            "quadratic_bound": quad_b,
            "slack": cos_b - observed_final,
            "saturation_gap": abs(observed_final - cos_b),
            "omega_n_T": rep.omega_n * rep.duration,
        },
        "pointfix": {},
    }
    for name, b in rep.pointfix.items():
        out["pointfix"][name] = {
            "b_minus_observed": b_minus_obs,
            "b_minus_bound": b.b_minus,
            "one_minus_b_plus_observed": observed_min,
            "one_minus_b_plus_bound": b.one_minus_b_plus,
            "vacuous": b.vacuous,
            "informative": bool(not b.vacuous and b.one_minus_b_plus < 1),
            "holds": bool(b.vacuous or b.one_minus_b_plus >= 1 or observed_min <= b.one_minus_b_plus + 1e-9),
        }
    bundle.summary["bounds"] = out


def _task_passages(sc, bundle):
    spec = sc.schedule
    p = spec.params
    tol = sc.tolerances["integrator"]
    if p["swapped"]:
        ratio = p["alpha"] / p["omega"]
        loc = localization_experiment(ratio, p["omega"], p["rabi"], sc.passages["periods"], tol)
        bundle.localization = loc
        bundle.summary["passages"] = {
            "localization": {
                "alpha_over_omega": ratio,
                "retained": loc.retained,
                "lost": loc.lost,
                "j0": loc.check.j0,
                "near_j0_zero": loc.check.near_zero,
                "distance_to_zero": loc.check.distance,
                "nearest_zero": loc.check.nearest_zero,
                "norm_drift": loc.norm_drift,
            }
        }
        return
    reports = []
    for m in sc.passages["M"]:
        sub = cycling_for_passages(p["alpha"], p["omega"], p["rabi"], sc.passages["first_crossing"] + m)
        reports.append(passage_experiment(sub, m, tol, sc.passages["first_crossing"]))
    bundle.passages = reports
    bundle.summary["passages"] = {
        "crossings": [float(t) for t in find_crossings(spec)],
        "reports": [r.to_dict() for r in reports],
    }


def _outputs(sc: Scenario, bundle: ReportBundle):
    out_dir = sc.output["dir"]
    if out_dir is None:
        return
    fmt = sc.output["format"]
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    pre = sc.output["prefix"]
    written = []

    def name(stem):
        return d / f"{pre}{stem}.{fmt}"

    if bundle.track is not None:
        write_frames(bundle.track, name("frames"), fmt)
        written.append(name("frames"))
    if bundle.trajectory is not None:
        write_trajectory(bundle.trajectory, name("trajectory"), fmt)
        written.append(name("trajectory"))
    if bundle.criteria is not None:
        bundle.criteria.write(name("criteria"), fmt)
        written.append(name("criteria"))
    if bundle.passages:
        write_table(name("passages"), SWEEP_COLUMNS, [sweep_row(r) for r in bundle.passages], fmt)
        written.append(name("passages"))
    report = d / f"{pre}report.json"
    report.write_text(dumps(bundle.summary))
    written.append(report)
    bundle.files = [str(p) for p in written]


def run(scenario: Scenario, *, source: str = "<scenario>", write: bool = True) -> ReportBundle:
    """Execute the scenario's tasks in dependency order and return every result.

    Frames are computed once and shared, so criteria and amplitudes live on
    the grid the propagator was sampled on.
    """
    tasks = set(scenario.tasks)
    if "bounds" in tasks:
        tasks |= {"simulate", "criteria"}
    bundle = ReportBundle(scenario)
    bundle.summary["scenario"] = {
        "kind": scenario.schedule.kind.value,
        "params": _plain_params(scenario.schedule.params),
        "t_span": list(scenario.schedule.t_span),
        "seed": scenario.seed,
        "tasks": [t for t in TASKS if t in tasks],
    }
    order = [("simulate", _task_simulate), ("criteria", _task_criteria), ("bounds", _task_bounds), ("passages", _task_passages)]
    for name, fn in order:
        if name not in tasks:
            continue
        try:
            if name in ("simulate", "criteria") and bundle.track is None:
                bundle.track = _track(scenario)
            fn(scenario, bundle)
        except AdiaboundError as exc:
            raise TaskError(name, source, exc) from exc
    if write:
        _outputs(scenario, bundle)
    return bundle


def _plain_params(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            out[k] = "<array>"
        elif isinstance(v, (list, tuple)) and v and isinstance(v[0], (list, tuple)):
            out[k] = "<array>"
        else:
            out[k] = v
    return out


# sweeps --------------------------------------------------------------------


def _flatten(tree, prefix=""):
    out = {}
    if isinstance(tree, dict):
        for k in sorted(tree):
            out.update(_flatten(tree[k], f"{prefix}{k}."))
    elif isinstance(tree, (int, float, bool, str)) or tree is None:
        out[prefix[:-1]] = tree
    return out


def _sweep_point(args):
    doc, point = args
    doc = copy.deepcopy(doc)
    doc.pop("sweep", None)
    doc["output"] = {k: v for k, v in doc.get("output", {}).items() if k != "dir"}
    sched = doc["schedule"]
    for key, value in point.items():
        if key in SPAN_AXES:
            sched["t_span"][SPAN_AXES.index(key)] = value
        else:
            sched.setdefault("params", {})[key] = value
    try:
        bundle = run(parse_scenario(doc), write=False)
        summary = copy.deepcopy(bundle.summary)
        summary.pop("scenario", None)
        for section in ("passages",):
            if section in summary and "reports" in summary[section]:
                reports = summary[section].pop("reports")
                for r in reports:
                    summary[section][f"M{r['M']}"] = {k: r[k] for k in ("p1", "theta_num", "p_pred", "p_num")}
        return {"status": "ok", **_flatten(summary)}
    except AdiaboundError as exc:
        cause = exc.cause if isinstance(exc, TaskError) else exc
        return {"status": "error", "error": f"{type(cause).__name__}: {exc}"}


def sweep(scenario: Scenario, *, workers: int | None = None) -> tuple[list[str], list[list]]:
    """Run the cross product of the sweep axes; one row per point, in lexicographic axis order.

    Points run in a process pool; a failing point yields a row with its error.
    """
    if scenario.sweep is None:
        raise ValidationError("sweep", "scenario has no sweep section")
    axes = scenario.sweep["axes"]
    names = list(axes)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]
    base = copy.deepcopy(scenario.document)
    base["seed"] = scenario.seed
    base.setdefault("tolerances", {})["integrator"] = scenario.tolerances["integrator"]
    base["tasks"] = list(scenario.tasks)
    jobs = [(base, p) for p in points]
    n_workers = workers or scenario.sweep["workers"]
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs), os.cpu_count() or 1)) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    metric_keys = sorted({k for r in results for k in r} - {"status", "error"})
    header = names + ["status", "error"] + metric_keys
    rows = [[p[n] for n in names] + [r["status"], r.get("error", "")] + [r.get(k) for k in metric_keys] for p, r in zip(points, results)]
    return header, rows


def write_sweep_table(scenario: Scenario, header, rows) -> str | None:
    out_dir = scenario.output["dir"]
    if out_dir is None:
        return None
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{scenario.output['prefix']}sweep.{scenario.output['format']}"
    write_table(path, header, rows, scenario.output["format"])
    return str(path)
