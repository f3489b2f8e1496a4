"""Adiabaticity conditions, rigorous bounds and multi-passage experiments for driven quantum systems."""

from .criteria import (
    AChoice,
    Condition,
    CriteriaReport,
    Verdict,
    a_functionals,
    check_conditions,
    criteria_report,
    passage_count,
    pointfix_bounds,
    usual_condition,
    zeno_bound,
)
from .errors import (
    AdiaboundError,
    ContractError,
    ConvergenceError,
    DegeneracyError,
    IntegrationError,
    PreconditionError,
    ScheduleRangeError,
    ValidationError,
)
from .passages import (
    localization_check,
    localization_experiment,
    lz_single,
    multi_passage,
    passage_experiment,
    stueckelberg_phase,
)
from .propagator import PhaseChoice, StateTrajectory, adiabatic_amplitudes, propagate, schwinger_exact, simulate
from .scenario import Scenario, load_preset, parse_scenario, preset_names, run, sweep
from .schedules import (
    Kind,
    ScheduleSpec,
    TimeGrid,
    build_grid,
    cycling,
    dressed,
    evaluate_h,
    evaluate_hdot,
    linear_chirp,
    random_smooth,
    schwinger,
    table_driven,
)
from .spectral import FrameTrack, couplings, eigenframe, frame_track, min_gap

__version__ = "0.1.0"
