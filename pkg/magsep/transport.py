"""
Overdamped cell transport through the separation channel.

A cell moves with the local Poiseuille velocity plus its drift under Stokes
drag: dx/dt = v(z) e_x + b (F_mag + F_g). Trajectories are integrated with an
embedded Runge-Kutta-Fehlberg 4(5) pair and end on capture, on escape through
the outlet or at the time limit.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.typing import NDArray

from .const import (
    CONTACT_PROJECTION_FACTOR,
    DEFAULT_ATOL,
    DEFAULT_CAPTURE_RADIUS_MULTIPLIER,
    DEFAULT_DT_MIN,
    DEFAULT_NEAR_WIRE_CAP_FACTOR,
    DEFAULT_NEAR_WIRE_RADIUS_FACTOR,
    DEFAULT_RTOL,
    DEFAULT_SAMPLES_PER_RUN,
    DEFAULT_T_MAX_TRANSITS,
    MAX_STEPS,
    SHALLOW_CHANNEL_RATIO,
    STANDARD_GRAVITY,
    STEP_GROWTH_MAX,
    STEP_SAFETY,
    STEP_SHRINK_MIN,
    CaptureRule,
    Outcome,
)
from .exceptions import ContactWithWire, DomainError, StiffnessError, ValidationException
from .magnetics import (
    CellMagnetics,
    FieldConfig,
    WireArray,
    cartesian_to_polar,
    effective_contrast,
    is_saturated,
    superpose_forces,
    wire_force_polar,
)

_LOGGER = logging.getLogger(__name__)

Rhs = Callable[[NDArray[np.float64]], NDArray[np.float64]]

# Fehlberg 4(5) tableau
_A2 = 1.0 / 4.0
_A3 = (3.0 / 32.0, 9.0 / 32.0)
_A4 = (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0)
_A5 = (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0)
_A6 = (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0)
_B5 = (16.0 / 135.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_E = (1.0 / 360.0, -128.0 / 4275.0, -2197.0 / 75240.0, 1.0 / 50.0, 2.0 / 55.0)


@dataclass(frozen=True, kw_only=True, slots=True)
class ChannelGeometry:
    """Rectangular channel: depth along z, width along y, length along x."""

    depth: float
    width: float
    length: float

    def __post_init__(self) -> None:
        """Validate the geometry."""
        if not (self.depth > 0 and self.width > 0 and self.length > 0):
            raise ValidationException(
                f"channel dimensions must be positive (depth={self.depth}, width={self.width}, length={self.length})"
            )
        if self.width < SHALLOW_CHANNEL_RATIO * self.depth:
            _LOGGER.warning(
                "Channel width %s m is not much larger than its depth %s m; the plane Poiseuille profile is a poor fit",
                self.width,
                self.depth,
            )


@dataclass(frozen=True, kw_only=True, slots=True)
class FluidConfig:
    """Buffer properties and volumetric flow rate."""

    viscosity: float
    density: float
    flow_rate: float

    def __post_init__(self) -> None:
        """Validate the fluid."""
        if not (self.viscosity > 0 and self.density > 0 and self.flow_rate > 0):
            raise ValidationException(
                f"fluid properties must be positive "
                f"(viscosity={self.viscosity}, density={self.density}, flow_rate={self.flow_rate})"
            )


@dataclass(frozen=True, kw_only=True, slots=True)
class CellSpecies:
    """
    A cell type.

    The volume in ``magnetics`` drives magnetic force and buoyancy; the
    hydrodynamic radius drives drag and contact.
    """

    label: str
    magnetics: CellMagnetics
    hydrodynamic_radius: float
    density: float

    def __post_init__(self) -> None:
        """Validate the species."""
        if not self.label:
            raise ValidationException("species label must not be empty")
        if not (self.hydrodynamic_radius > 0 and self.density > 0):
            raise ValidationException(
                f"{self.label}: radius and density must be positive "
                f"(radius={self.hydrodynamic_radius}, density={self.density})"
            )


@dataclass(frozen=True, kw_only=True, slots=True)
class CellState:
    """Cell center position and time."""

    x: float
    y: float
    z: float
    t: float = 0.0

    @property
    def position(self) -> tuple[float, float, float]:
        """Return (x, y, z)."""
        return (self.x, self.y, self.z)


@dataclass(frozen=True, kw_only=True, slots=True)
class IntegratorSettings:
    """Tolerances and step-size limits of the adaptive integrator."""

    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    dt_min: float = DEFAULT_DT_MIN
    dt_initial: float | None = None
    near_wire_cap_factor: float = DEFAULT_NEAR_WIRE_CAP_FACTOR
    near_wire_radius_factor: float = DEFAULT_NEAR_WIRE_RADIUS_FACTOR

    def __post_init__(self) -> None:
        """Validate the settings."""
        if not (self.rtol > 0 and self.atol > 0 and self.dt_min > 0):
            raise ValidationException("integrator tolerances and dt_min must be positive")
        if self.dt_initial is not None and not self.dt_initial > 0:
            raise ValidationException(f"dt_initial must be positive: {self.dt_initial}")
        if not (self.near_wire_cap_factor > 0 and self.near_wire_radius_factor >= 0):
            raise ValidationException("near-wire step limits must be positive")


@dataclass(frozen=True, kw_only=True, slots=True)
class SimulationLimits:
    """Run-time limit, sampling interval and capture criterion."""

    t_max: float | None = None
    sample_interval: float | None = None
    capture_radius_multiplier: float = DEFAULT_CAPTURE_RADIUS_MULTIPLIER
    capture_rule: CaptureRule = CaptureRule.CONTACT

    def __post_init__(self) -> None:
        """Validate the limits."""
        if self.t_max is not None and not self.t_max > 0:
            raise ValidationException(f"t_max must be positive: {self.t_max}")
        if self.sample_interval is not None and not self.sample_interval > 0:
            raise ValidationException(f"sample interval must be positive: {self.sample_interval}")
        if not self.capture_radius_multiplier > 0:
            raise ValidationException(f"capture radius multiplier must be positive: {self.capture_radius_multiplier}")


@dataclass(frozen=True, kw_only=True, slots=True)
class ChannelScenario:
    """Everything needed to integrate a trajectory."""

    channel: ChannelGeometry
    fluid: FluidConfig
    field: FieldConfig
    wires: WireArray
    integrator: IntegratorSettings = IntegratorSettings()
    limits: SimulationLimits = SimulationLimits()
    gravity: bool = True

    def __post_init__(self) -> None:
        """Check that the wires lie in the channel cross-section."""
        a = self.wires.half_width
        for index, (y, z) in enumerate(self.wires.centers):
            if not (0.0 <= y <= self.channel.width and -a <= z <= self.channel.depth):
                raise ValidationException(
                    f"wire {index} at (y={y}, z={z}) lies outside the channel cross-section "
                    f"(width={self.channel.width}, depth={self.channel.depth})"
                )
        if len(self.wires) and is_saturated(self.wires.material, self.field.h0):
            _LOGGER.info(
                "Wires saturated at B0=%s T: contrast clamped to %s",
                self.field.flux_density,
                effective_contrast(self.wires.material, self.field.h0),
            )

    @property
    def mean_velocity(self) -> float:
        """Return the mean flow velocity."""
        return mean_velocity(self.fluid.flow_rate, self.channel)

    @property
    def t_max(self) -> float:
        """Return the run-time limit."""
        if self.limits.t_max is not None:
            return self.limits.t_max
        return DEFAULT_T_MAX_TRANSITS * self.channel.length / self.mean_velocity

    @property
    def sample_interval(self) -> float:
        """Return the trajectory sampling interval."""
        if self.limits.sample_interval is not None:
            return self.limits.sample_interval
        return self.t_max / DEFAULT_SAMPLES_PER_RUN


@dataclass(frozen=True, kw_only=True, slots=True)
class Trajectory:
    """
    Result of one integration.

    ``samples`` holds rows (t, x, y, z) at the sampling interval followed by the
    terminal state.
    """

    label: str
    samples: NDArray[np.float64] = field(compare=False, repr=False)
    outcome: Outcome
    terminal: CellState
    captured_wire: int | None = None
    steps: int = 0
    diagnostic: str | None = None

    @property
    def states(self) -> list[CellState]:
        """Return the samples as cell states."""
        return [CellState(x=x, y=y, z=z, t=t) for t, x, y, z in self.samples.tolist()]


def mean_velocity(flow_rate: float, channel: ChannelGeometry) -> float:
    """Return Q / (W H)."""
    return flow_rate / (channel.width * channel.depth)


def poiseuille_velocity(z: float, depth: float, v_mean: float) -> float:
    """Return the plane Poiseuille velocity 6 v_mean (z/H)(1 - z/H)."""
    if not 0.0 <= z <= depth:
        raise DomainError(f"z={z} outside the channel depth [0, {depth}]")
    s = z / depth
    return 6.0 * v_mean * s * (1.0 - s)


def drag_mobility(species: CellSpecies, fluid: FluidConfig) -> float:
    """Return the Stokes mobility 1 / (6 pi eta R_h)."""
    return 1.0 / (6.0 * math.pi * fluid.viscosity * species.hydrodynamic_radius)


def gravity_force(species: CellSpecies, fluid: FluidConfig) -> float:
    """Return the buoyant weight along z."""
    return -(species.density - fluid.density) * species.magnetics.volume * STANDARD_GRAVITY


def net_velocity(state: CellState, species: CellSpecies, scenario: ChannelScenario) -> tuple[float, float, float]:
    """Return the cell velocity at state."""
    velocity = _CellDynamics(species=species, scenario=scenario).velocity(
        np.array(state.position, dtype=np.float64), clamp=False
    )
    return float(velocity[0]), float(velocity[1]), float(velocity[2])


def rkf45_step(fun: Rhs, y: NDArray[np.float64], dt: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Advance the autonomous system y' = fun(y) by one Fehlberg step.

    Returns the fifth-order solution and the absolute error estimate.
    """
    k1 = fun(y)
    k2 = fun(y + dt * _A2 * k1)
    k3 = fun(y + dt * (_A3[0] * k1 + _A3[1] * k2))
    k4 = fun(y + dt * (_A4[0] * k1 + _A4[1] * k2 + _A4[2] * k3))
    k5 = fun(y + dt * (_A5[0] * k1 + _A5[1] * k2 + _A5[2] * k3 + _A5[3] * k4))
    k6 = fun(y + dt * (_A6[0] * k1 + _A6[1] * k2 + _A6[2] * k3 + _A6[3] * k4 + _A6[4] * k5))
    y_new = y + dt * (_B5[0] * k1 + _B5[1] * k3 + _B5[2] * k4 + _B5[3] * k5 + _B5[4] * k6)
    error = np.abs(dt * (_E[0] * k1 + _E[1] * k3 + _E[2] * k4 + _E[3] * k5 + _E[4] * k6))
    return y_new, error


class _CellDynamics:
    """Right-hand side, bounds and contact geometry for one cell in one scenario."""

    def __init__(self, *, species: CellSpecies, scenario: ChannelScenario) -> None:
        """Init the dynamics."""
        channel = scenario.channel
        radius = species.hydrodynamic_radius
        if 2.0 * radius >= min(channel.depth, channel.width):
            raise ValidationException(f"{species.label}: cell of radius {radius} m does not fit the channel")
        self.species = species
        self.scenario = scenario
        self.mobility = drag_mobility(species, scenario.fluid)
        self.v_mean = scenario.mean_velocity
        self.settling = self.mobility * gravity_force(species, scenario.fluid) if scenario.gravity else 0.0
        self.lower = np.array([radius, radius])
        self.upper = np.array([channel.width - radius, channel.depth - radius])
        self.half_width = scenario.wires.half_width
        self.capture_radius = scenario.limits.capture_radius_multiplier * (self.half_width + radius)
        self.near_wire_gap = scenario.integrator.near_wire_radius_factor * self.half_width
        self.near_wire_cap = scenario.integrator.near_wire_cap_factor * self.half_width

    def clamp(self, y: NDArray[np.float64]) -> NDArray[np.float64]:
        """Return y with the cross-section coordinates clamped to the walls."""
        clamped = y.copy()
        clamped[1:] = np.clip(y[1:], self.lower, self.upper)
        return clamped

    def velocity(self, y: NDArray[np.float64], *, clamp: bool = True) -> NDArray[np.float64]:
        """Return dx/dt at position y."""
        pos = self.clamp(y) if clamp else y
        channel = self.scenario.channel
        f_y, f_z = superpose_forces(pos[1:], self.species.magnetics, self.scenario.wires, self.scenario.field)
        return np.array(
            [
                poiseuille_velocity(float(pos[2]), channel.depth, self.v_mean),
                self.mobility * f_y,
                self.mobility * f_z + self.settling,
            ]
        )

    def nearest_wire(self, y: NDArray[np.float64]) -> tuple[int, float]:
        """Return index of and distance to the nearest wire axis."""
        centers = self.scenario.wires.center_array
        if not len(centers):
            return -1, math.inf
        distances = np.hypot(centers[:, 0] - y[1], centers[:, 1] - y[2])
        index = int(np.argmin(distances))
        return index, float(distances[index])

    def transverse_cap(self, y: NDArray[np.float64]) -> float:
        """Return the largest allowed (y, z) displacement from y."""
        _, distance = self.nearest_wire(y)
        gap = distance - self.capture_radius
        if gap < self.near_wire_gap:
            return self.near_wire_cap
        return 0.5 * gap

    def holds(self, y: NDArray[np.float64], wire_index: int) -> bool:
        """Return True when the contacted wire attracts the cell."""
        scenario = self.scenario
        wires = scenario.wires
        h0 = scenario.field.h0
        force = wire_force_polar(
            cartesian_to_polar(y[1:], wires.centers[wire_index], scenario.field.direction),
            self.species.magnetics,
            half_width=wires.half_width,
            aspect_factor=wires.aspect_factor,
            k_eff=effective_contrast(wires.material, h0),
            h0=h0,
            mu_0=scenario.field.mu_0,
            wire_index=wire_index,
        )
        return force.f_r < 0

    def project_out(self, y: NDArray[np.float64], wire_index: int) -> NDArray[np.float64]:
        """Return y moved radially onto the capture surface of a wire."""
        center = self.scenario.wires.center_array[wire_index]
        offset = y[1:] - center
        distance = float(np.hypot(*offset))
        projected = y.copy()
        projected[1:] = center + offset * (self.capture_radius * CONTACT_PROJECTION_FACTOR / distance)
        return self.clamp(projected)


class _AdaptiveStepper:
    """Embedded-pair stepping with error control and displacement limits."""

    def __init__(self, dynamics: _CellDynamics) -> None:
        """Init the stepper."""
        self.dynamics = dynamics
        self.settings = dynamics.scenario.integrator

    def initial_dt(self) -> float:
        """Return the first trial step."""
        if self.settings.dt_initial is not None:
            return self.settings.dt_initial
        return max(self.settings.dt_min, 1e-3 * self.dynamics.scenario.channel.depth / self.dynamics.v_mean)

    def step(self, y: NDArray[np.float64], t: float, dt: float) -> tuple[NDArray[np.float64], float, float]:
        """Return (y_new, dt_taken, dt_next) of one accepted step."""
        dynamics = self.dynamics
        settings = self.settings
        while True:
            if dt < settings.dt_min:
                raise StiffnessError(position=(float(y[0]), float(y[1]), float(y[2])), time=t)
            try:
                y_trial, error = rkf45_step(dynamics.velocity, y, dt)
            except ContactWithWire:
                dt *= 0.5
                continue
            y_trial = dynamics.clamp(y_trial)
            scale = settings.atol + settings.rtol * np.maximum(np.abs(y), np.abs(y_trial))
            error_norm = float(np.max(error / scale))
            if error_norm > 1.0:
                dt *= max(STEP_SHRINK_MIN, STEP_SAFETY * error_norm**-0.2)
                continue
            displacement = float(np.hypot(*(y_trial[1:] - y[1:])))
            cap = dynamics.transverse_cap(y)
            if displacement > cap:
                dt *= max(STEP_SHRINK_MIN, 0.9 * cap / displacement)
                continue
            growth = STEP_GROWTH_MAX if error_norm == 0 else min(STEP_GROWTH_MAX, STEP_SAFETY * error_norm**-0.2)
            return y_trial, dt, dt * max(STEP_SHRINK_MIN, growth)


def step_adaptive(
    state: CellState, species: CellSpecies, scenario: ChannelScenario, dt: float
) -> tuple[CellState, float]:
    """Take one accepted adaptive step from state, starting with a trial step dt."""
    stepper = _AdaptiveStepper(_CellDynamics(species=species, scenario=scenario))
    y_new, dt_taken, dt_next = stepper.step(np.array(state.position, dtype=np.float64), state.t, dt)
    return CellState(x=float(y_new[0]), y=float(y_new[1]), z=float(y_new[2]), t=state.t + dt_taken), dt_next


class _Sampler:
    """Collect states at a fixed interval by linear interpolation between step ends."""

    def __init__(self, interval: float, y0: NDArray[np.float64], t0: float) -> None:
        """Init the sampler."""
        self.interval = interval
        self.start = t0
        self.rows: list[list[float]] = [[t0, *y0.tolist()]]
        self.next_index = 1

    def record(self, t0: float, y0: NDArray[np.float64], t1: float, y1: NDArray[np.float64]) -> None:
        """Add every sample time in (t0, t1]."""
        while (t_sample := self.start + self.next_index * self.interval) <= t1:
            s = (t_sample - t0) / (t1 - t0)
            self.rows.append([t_sample, *(y0 + s * (y1 - y0)).tolist()])
            self.next_index += 1

    def finish(self, terminal: CellState) -> NDArray[np.float64]:
        """Return the samples with the terminal state appended."""
        if self.rows[-1][0] < terminal.t:
            self.rows.append([terminal.t, *terminal.position])
        return np.array(self.rows, dtype=np.float64)


def simulate_trajectory(initial: CellState, species: CellSpecies, scenario: ChannelScenario) -> Trajectory:
    """Integrate one cell from initial until capture, escape or the time limit."""
    dynamics = _CellDynamics(species=species, scenario=scenario)
    stepper = _AdaptiveStepper(dynamics)
    length = scenario.channel.length
    t_max = scenario.t_max
    rule = scenario.limits.capture_rule
    y = np.array(initial.position, dtype=np.float64)
    t = initial.t
    sampler = _Sampler(scenario.sample_interval, y, t)
    dt = stepper.initial_dt()
    steps = 0

    def finish(
        outcome: Outcome,
        y_end: NDArray[np.float64],
        t_end: float,
        wire: int | None = None,
        diagnostic: str | None = None,
    ) -> Trajectory:
        terminal = CellState(x=float(y_end[0]), y=float(y_end[1]), z=float(y_end[2]), t=t_end)
        _LOGGER.debug("%s: %s at t=%.6g s after %i steps", species.label, outcome, t_end, steps)
        return Trajectory(
            label=species.label,
            samples=sampler.finish(terminal),
            outcome=outcome,
            terminal=terminal,
            captured_wire=wire,
            steps=steps,
            diagnostic=diagnostic,
        )

    while True:
        wire, distance = dynamics.nearest_wire(y)
        if distance <= dynamics.capture_radius:
            if rule is CaptureRule.CONTACT or dynamics.holds(y, wire):
                return finish(Outcome.CAPTURED, y, t, wire)
            y = dynamics.project_out(y, wire)
        if t_max - t < scenario.integrator.dt_min:
            return finish(Outcome.MAX_TIME_EXCEEDED, y, t)
        if steps >= MAX_STEPS:
            return finish(Outcome.MAX_TIME_EXCEEDED, y, t, diagnostic=f"step limit {MAX_STEPS} reached")
        try:
            y_new, dt_taken, dt = stepper.step(y, t, min(dt, t_max - t))
        except StiffnessError as err:
            partial = finish(Outcome.MAX_TIME_EXCEEDED, y, t)
            raise StiffnessError(position=err.position, time=err.time, trajectory=partial) from err
        steps += 1
        t_new = t + dt_taken
        if y_new[0] >= length:
            s = (length - y[0]) / (y_new[0] - y[0])
            t_exit = t + s * dt_taken
            y_exit = y + s * (y_new - y)
            y_exit[0] = length
            sampler.record(t, y, t_exit, y_exit)
            return finish(Outcome.ESCAPED, y_exit, t_exit)
        sampler.record(t, y, t_new, y_new)
        y, t = y_new, t_new
