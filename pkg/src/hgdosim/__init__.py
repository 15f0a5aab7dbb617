"""Deterministic closed-loop quadrotor simulation with a high-gain disturbance
observer and sliding-mode tracking control."""

from .config import ConfigError, load_scenario, parse_scenario
from .control import DEFAULT_GAINS, SmcGains
from .disturbances import (
    CompositeSinusoid,
    Constant,
    DrydenGust,
    GroundEffect,
    WhiteNoise,
    derivative_l1,
)
from .emit import emit_csv, emit_json, emit_svg, read_csv
from .metrics import (
    bound_check,
    compare,
    metrics_report,
    rms_errors,
    rms_estimation,
    sweep,
)
from .quad import MICRO_QUAD, VehicleParams
from .sim import (
    Diverged,
    ScenarioConfig,
    SimTrace,
    TRACE_COLUMNS,
    run_scenario,
)
from .trajectories import HoverRamp, Lemniscate

__version__ = "0.1.0"

__all__ = [
    "CompositeSinusoid",
    "ConfigError",
    "Constant",
    "DEFAULT_GAINS",
    "Diverged",
    "DrydenGust",
    "GroundEffect",
    "HoverRamp",
    "Lemniscate",
    "MICRO_QUAD",
    "ScenarioConfig",
    "SimTrace",
    "SmcGains",
    "TRACE_COLUMNS",
    "VehicleParams",
    "WhiteNoise",
    "bound_check",
    "compare",
    "derivative_l1",
    "emit_csv",
    "emit_json",
    "emit_svg",
    "load_scenario",
    "metrics_report",
    "parse_scenario",
    "read_csv",
    "rms_errors",
    "rms_estimation",
    "run_scenario",
    "sweep",
    "__version__",
]
