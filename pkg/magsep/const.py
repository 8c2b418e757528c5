"""Constants."""

from __future__ import annotations

from enum import IntEnum, StrEnum
import math
from typing import Final

SCHEMA_VERSION: Final = 1
STATS_SCHEMA_VERSION: Final = 1

ENV_WORKERS: Final = "MAGSEP_WORKERS"

MU_0: Final = 4.0e-7 * math.pi  # H/m
STANDARD_GRAVITY: Final = 9.80665  # m/s^2

# Channel
SHALLOW_CHANNEL_RATIO: Final = 10.0

# Field
DEFAULT_FIELD_DIRECTION: Final = (0.0, 1.0)

# Wires
DEFAULT_ASPECT_FACTOR: Final = 1.0

# Cells
RBC_DEOXY_LABEL: Final = "RBC-deoxy"
WBC_LABEL: Final = "WBC"
WBC_DELTA_CHI: Final = -0.2e-6
RBC_VOLUME: Final = 4.0 / 3.0 * math.pi * (3.5e-6) ** 3
RBC_DENSITY: Final = 1100.0
WBC_VOLUME: Final = 4.0 / 3.0 * math.pi * (6e-6) ** 3
WBC_DENSITY: Final = 1070.0
MIN_RADIUS_FRACTION: Final = 0.2
RADIUS_TRUNCATION_SIGMAS: Final = 3.0

# Integrator
DEFAULT_RTOL: Final = 1e-6
DEFAULT_ATOL: Final = 1e-10  # m
DEFAULT_DT_MIN: Final = 1e-9  # s
DEFAULT_NEAR_WIRE_CAP_FACTOR: Final = 0.1
DEFAULT_NEAR_WIRE_RADIUS_FACTOR: Final = 5.0
STEP_SAFETY: Final = 0.9
STEP_GROWTH_MAX: Final = 5.0
STEP_SHRINK_MIN: Final = 0.2
MAX_STEPS: Final = 2_000_000

# Limits
DEFAULT_T_MAX_TRANSITS: Final = 10.0
DEFAULT_SAMPLES_PER_RUN: Final = 2000
DEFAULT_CAPTURE_RADIUS_MULTIPLIER: Final = 1.0
CONTACT_PROJECTION_FACTOR: Final = 1.0 + 1e-9

# Oracle
DEFAULT_FD_STEP_FRACTION: Final = 1e-3

# Statistics and reporting
DEFAULT_CONFIDENCE: Final = 0.95
REFERENCE_TRAPPING_EFFICIENCY: Final = 0.95
DEFAULT_MASTER_SEED: Final = 20240101
DEFAULT_TRAJECTORY_CAP: Final = 50
DEFAULT_CALIBRATION_TOLERANCE: Final = 0.02
CALIBRATION_MIN_RELATIVE_WIDTH: Final = 0.01

CONF_VERSION: Final = "version"
CONF_CHANNEL: Final = "channel"
CONF_DEPTH: Final = "depth"
CONF_WIDTH: Final = "width"
CONF_LENGTH: Final = "length"
CONF_FLUID: Final = "fluid"
CONF_VISCOSITY: Final = "viscosity"
CONF_DENSITY: Final = "density"
CONF_FLOW_RATE: Final = "flow_rate"
CONF_FIELD: Final = "field"
CONF_FLUX_DENSITY: Final = "flux_density"
CONF_DIRECTION: Final = "direction"
CONF_WIRES: Final = "wires"
CONF_HALF_WIDTH: Final = "half_width"
CONF_ASPECT_FACTOR: Final = "aspect_factor"
CONF_MATERIAL: Final = "material"
CONF_MU_WIRE: Final = "mu_wire"
CONF_MU_BUFFER: Final = "mu_buffer"
CONF_SATURATION_MAGNETIZATION: Final = "saturation_magnetization"
CONF_CENTERS: Final = "centers"
CONF_LATTICE: Final = "lattice"
CONF_PITCH: Final = "pitch"
CONF_COUNT: Final = "count"
CONF_OFFSET: Final = "offset"
CONF_HEIGHT: Final = "height"
CONF_SPECIES: Final = "species"
CONF_LABEL: Final = "label"
CONF_DELTA_CHI: Final = "delta_chi"
CONF_VOLUME: Final = "volume"
CONF_HYDRODYNAMIC_RADIUS: Final = "hydrodynamic_radius"
CONF_POPULATIONS: Final = "populations"
CONF_RADIUS_SPREAD: Final = "radius_spread"
CONF_INTEGRATOR: Final = "integrator"
CONF_RTOL: Final = "rtol"
CONF_ATOL: Final = "atol"
CONF_DT_MIN: Final = "dt_min"
CONF_DT_INITIAL: Final = "dt_initial"
CONF_LIMITS: Final = "limits"
CONF_T_MAX: Final = "t_max"
CONF_SAMPLE_INTERVAL: Final = "sample_interval"
CONF_CAPTURE_RADIUS_MULTIPLIER: Final = "capture_radius_multiplier"
CONF_CAPTURE_RULE: Final = "capture_rule"
CONF_GRAVITY: Final = "gravity"
CONF_MASTER_SEED: Final = "master_seed"
CONF_TRAJECTORY_CAP: Final = "trajectory_cap"

BUNDLED_SCENARIO: Final = "default.json"

FILE_STATS: Final = "stats.json"
FILE_CAPTURE_FRACTIONS: Final = "capture_fractions.csv"
FILE_SEPARATION: Final = "separation.json"
FILE_SWEEP: Final = "sweep.csv"
FILE_SWEEP_STATS: Final = "sweep_stats.json"
FILE_CALIBRATION: Final = "calibration.json"
DIR_TRAJECTORIES: Final = "trajectories"


class CaptureRule(StrEnum):
    """Enum with capture rules."""

    CONTACT = "contact"
    MAGNETIC_HOLD = "magnetic_hold"


class Outcome(StrEnum):
    """Enum with trajectory outcomes."""

    CAPTURED = "captured"
    ESCAPED = "escaped"
    MAX_TIME_EXCEEDED = "max_time_exceeded"


class ExitCode(IntEnum):
    """Enum with process exit codes."""

    SUCCESS = 0
    VALIDATION_ERROR = 2
    RUNTIME_ERROR = 3
