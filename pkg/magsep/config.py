"""Experiment configuration: JSON documents with unit strings, validated and converted to SI."""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
import copy
from dataclasses import dataclass
from functools import partial
import importlib.resources
import json
import logging
import math
from pathlib import Path
from typing import Any, Final

import voluptuous as vol

from .const import (
    BUNDLED_SCENARIO,
    CONF_ASPECT_FACTOR,
    CONF_ATOL,
    CONF_CAPTURE_RADIUS_MULTIPLIER,
    CONF_CAPTURE_RULE,
    CONF_CENTERS,
    CONF_CHANNEL,
    CONF_COUNT,
    CONF_DELTA_CHI,
    CONF_DENSITY,
    CONF_DEPTH,
    CONF_DIRECTION,
    CONF_DT_INITIAL,
    CONF_DT_MIN,
    CONF_FIELD,
    CONF_FLOW_RATE,
    CONF_FLUID,
    CONF_FLUX_DENSITY,
    CONF_GRAVITY,
    CONF_HALF_WIDTH,
    CONF_HEIGHT,
    CONF_HYDRODYNAMIC_RADIUS,
    CONF_INTEGRATOR,
    CONF_LABEL,
    CONF_LATTICE,
    CONF_LENGTH,
    CONF_LIMITS,
    CONF_MASTER_SEED,
    CONF_MATERIAL,
    CONF_MU_BUFFER,
    CONF_MU_WIRE,
    CONF_OFFSET,
    CONF_PITCH,
    CONF_POPULATIONS,
    CONF_RADIUS_SPREAD,
    CONF_RTOL,
    CONF_SAMPLE_INTERVAL,
    CONF_SATURATION_MAGNETIZATION,
    CONF_SPECIES,
    CONF_T_MAX,
    CONF_TRAJECTORY_CAP,
    CONF_VERSION,
    CONF_VISCOSITY,
    CONF_VOLUME,
    CONF_WIDTH,
    CONF_WIRES,
    DEFAULT_ASPECT_FACTOR,
    DEFAULT_ATOL,
    DEFAULT_CAPTURE_RADIUS_MULTIPLIER,
    DEFAULT_DT_MIN,
    DEFAULT_FIELD_DIRECTION,
    DEFAULT_MASTER_SEED,
    DEFAULT_RTOL,
    DEFAULT_TRAJECTORY_CAP,
    SCHEMA_VERSION,
    CaptureRule,
)
from .ensemble import Population
from .exceptions import InvalidConfig, ValidationException
from .magnetics import CellMagnetics, FieldConfig, MagneticMaterial, WireArray
from .support import finite_float, format_invalid, quantity
from .transport import (
    CellSpecies,
    ChannelGeometry,
    ChannelScenario,
    FluidConfig,
    IntegratorSettings,
    SimulationLimits,
)

_LOGGER = logging.getLogger(__name__)

_DIRECTION_NORMALIZE_TOLERANCE: Final = 1e-12


def _direction(value: Any) -> tuple[float, float]:
    """Validate a (y, z) direction and normalize it to unit length."""
    if not isinstance(value, list | tuple) or len(value) != 2:
        raise vol.Invalid("expected a (y, z) pair")
    y, z = (finite_float(v) for v in value)
    if (norm := math.hypot(y, z)) == 0:
        raise vol.Invalid("direction must not be the zero vector")
    if abs(norm - 1.0) > _DIRECTION_NORMALIZE_TOLERANCE:
        return y / norm, z / norm
    return y, z


def _center(value: Any) -> tuple[float, float]:
    if not isinstance(value, list | tuple) or len(value) != 2:
        raise vol.Invalid("expected a (y, z) pair")
    length = quantity("length", positive=False)
    return length(value[0]), length(value[1])


def _has_exactly_one_key(*keys: str) -> Callable[[Mapping[str, Any]], Mapping[str, Any]]:
    """Validate that exactly one of the keys is present."""

    def validate(obj: Mapping[str, Any]) -> Mapping[str, Any]:
        if sum(key in obj for key in keys) != 1:
            raise vol.Invalid(f"exactly one of {', '.join(keys)} is required")
        return obj

    return validate


_POSITIVE: Final = vol.Range(min=0, min_included=False)

SCHEMA_CHANNEL: Final = vol.Schema(
    {
        vol.Required(CONF_DEPTH): quantity("length"),
        vol.Required(CONF_WIDTH): quantity("length"),
        vol.Required(CONF_LENGTH): quantity("length"),
    }
)

SCHEMA_FLUID: Final = vol.Schema(
    {
        vol.Required(CONF_VISCOSITY): quantity("viscosity"),
        vol.Required(CONF_DENSITY): quantity("density"),
        vol.Required(CONF_FLOW_RATE): quantity("flow_rate"),
    }
)

SCHEMA_FIELD: Final = vol.Schema(
    {
        vol.Required(CONF_FLUX_DENSITY): quantity("flux_density", positive=False),
        vol.Optional(CONF_DIRECTION, default=list(DEFAULT_FIELD_DIRECTION)): _direction,
    }
)

SCHEMA_MATERIAL: Final = vol.Schema(
    {
        vol.Required(CONF_MU_WIRE): quantity("permeability"),
        vol.Required(CONF_MU_BUFFER): quantity("permeability"),
        vol.Optional(CONF_SATURATION_MAGNETIZATION): quantity("magnetization"),
    }
)

SCHEMA_LATTICE: Final = vol.Schema(
    {
        vol.Required(CONF_PITCH): quantity("length"),
        vol.Optional(CONF_COUNT): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_OFFSET): quantity("length", positive=False),
        vol.Optional(CONF_HEIGHT): quantity("length", positive=False),
    }
)

SCHEMA_WIRES: Final = vol.All(
    _has_exactly_one_key(CONF_CENTERS, CONF_LATTICE),
    vol.Schema(
        {
            vol.Required(CONF_HALF_WIDTH): quantity("length"),
            vol.Optional(CONF_ASPECT_FACTOR, default=DEFAULT_ASPECT_FACTOR): vol.All(finite_float, _POSITIVE),
            vol.Required(CONF_MATERIAL): SCHEMA_MATERIAL,
            vol.Optional(CONF_CENTERS): [_center],
            vol.Optional(CONF_LATTICE): SCHEMA_LATTICE,
        }
    ),
)

SCHEMA_SPECIES: Final = vol.Schema(
    {
        vol.Required(CONF_LABEL): vol.All(str, vol.Length(min=1)),
        vol.Required(CONF_DELTA_CHI): finite_float,
        vol.Required(CONF_VOLUME): quantity("volume"),
        vol.Required(CONF_HYDRODYNAMIC_RADIUS): quantity("length"),
        vol.Required(CONF_DENSITY): quantity("density"),
    }
)

SCHEMA_POPULATION: Final = vol.Schema(
    {
        vol.Required(CONF_SPECIES): str,
        vol.Required(CONF_COUNT): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_RADIUS_SPREAD, default=0.0): vol.All(finite_float, vol.Range(min=0)),
    }
)

SCHEMA_INTEGRATOR: Final = vol.Schema(
    {
        vol.Optional(CONF_RTOL, default=DEFAULT_RTOL): vol.All(finite_float, _POSITIVE),
        vol.Optional(CONF_ATOL, default=DEFAULT_ATOL): quantity("length"),
        vol.Optional(CONF_DT_MIN, default=DEFAULT_DT_MIN): quantity("time"),
        vol.Optional(CONF_DT_INITIAL): quantity("time"),
    }
)

SCHEMA_LIMITS: Final = vol.Schema(
    {
        vol.Optional(CONF_T_MAX): quantity("time"),
        vol.Optional(CONF_SAMPLE_INTERVAL): quantity("time"),
        vol.Optional(CONF_CAPTURE_RADIUS_MULTIPLIER, default=DEFAULT_CAPTURE_RADIUS_MULTIPLIER): vol.All(
            finite_float, _POSITIVE
        ),
        vol.Optional(CONF_CAPTURE_RULE, default=CaptureRule.CONTACT.value): vol.All(
            vol.In([rule.value for rule in CaptureRule]), CaptureRule
        ),
    }
)

SCHEMA_SCENARIO: Final = vol.Schema(
    {
        vol.Required(CONF_VERSION): vol.All(int, vol.In([SCHEMA_VERSION])),
        vol.Required(CONF_CHANNEL): SCHEMA_CHANNEL,
        vol.Required(CONF_FLUID): SCHEMA_FLUID,
        vol.Required(CONF_FIELD): SCHEMA_FIELD,
        vol.Required(CONF_WIRES): SCHEMA_WIRES,
        vol.Required(CONF_SPECIES): vol.All([SCHEMA_SPECIES], vol.Length(min=1)),
        vol.Optional(CONF_POPULATIONS, default=list): [SCHEMA_POPULATION],
        vol.Optional(CONF_INTEGRATOR, default=dict): SCHEMA_INTEGRATOR,
        vol.Optional(CONF_LIMITS, default=dict): SCHEMA_LIMITS,
        vol.Optional(CONF_GRAVITY, default=True): bool,
        vol.Optional(CONF_MASTER_SEED, default=DEFAULT_MASTER_SEED): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_TRAJECTORY_CAP, default=DEFAULT_TRAJECTORY_CAP): vol.All(int, vol.Range(min=0)),
    },
    extra=vol.PREVENT_EXTRA,
)


@dataclass(frozen=True, kw_only=True, slots=True)
class PopulationConfig:
    """Population entry referring to a species by label."""

    species: str
    count: int
    radius_spread: float = 0.0


@dataclass(frozen=True, kw_only=True, slots=True)
class ScenarioConfig:
    """
    Validated experiment description in SI units.

    Attributes:
        channel: Channel dimensions
        fluid: Buffer and flow rate
        field: External field
        wires: Wire layout, lattices expanded to explicit centers
        species: Cell types by label
        populations: Number of cells per species
        integrator: Integrator tolerances
        limits: Time limit, sampling and capture rule
        gravity: Whether buoyant weight acts on the cells
        master_seed: Seed of all random streams
        trajectory_cap: Maximum number of trajectory files per species

    """

    channel: ChannelGeometry
    fluid: FluidConfig
    field: FieldConfig
    wires: WireArray
    species: tuple[CellSpecies, ...]
    populations: tuple[PopulationConfig, ...] = ()
    integrator: IntegratorSettings = IntegratorSettings()
    limits: SimulationLimits = SimulationLimits()
    gravity: bool = True
    master_seed: int = DEFAULT_MASTER_SEED
    trajectory_cap: int = DEFAULT_TRAJECTORY_CAP

    def species_by_label(self, label: str) -> CellSpecies:
        """Return the species with the given label."""
        for species in self.species:
            if species.label == label:
                return species
        raise InvalidConfig(CONF_SPECIES, f"unknown species {label}")

    def to_scenario(self) -> ChannelScenario:
        """Return the physics scenario."""
        try:
            return ChannelScenario(
                channel=self.channel,
                fluid=self.fluid,
                field=self.field,
                wires=self.wires,
                integrator=self.integrator,
                limits=self.limits,
                gravity=self.gravity,
            )
        except ValidationException as err:
            raise InvalidConfig(CONF_WIRES, str(err)) from err

    def to_populations(self) -> list[Population]:
        """Return the populations with their species resolved."""
        return [
            Population(species=self.species_by_label(pop.species), count=pop.count, radius_spread=pop.radius_spread)
            for pop in self.populations
        ]


def _build(path: str, factory: Callable[[], Any]) -> Any:
    """Run factory, reporting physics validation failures at path."""
    try:
        return factory()
    except ValidationException as err:
        raise InvalidConfig(path, str(err)) from err


def _build_species(entry: Mapping[str, Any]) -> CellSpecies:
    return CellSpecies(
        label=entry[CONF_LABEL],
        magnetics=CellMagnetics(delta_chi=entry[CONF_DELTA_CHI], volume=entry[CONF_VOLUME]),
        hydrodynamic_radius=entry[CONF_HYDRODYNAMIC_RADIUS],
        density=entry[CONF_DENSITY],
    )


def _build_wires(data: Mapping[str, Any], channel: ChannelGeometry) -> WireArray:
    material = _build(
        f"{CONF_WIRES}.{CONF_MATERIAL}",
        lambda: MagneticMaterial(
            mu_wire=data[CONF_MATERIAL][CONF_MU_WIRE],
            mu_buffer=data[CONF_MATERIAL][CONF_MU_BUFFER],
            saturation_magnetization=data[CONF_MATERIAL].get(CONF_SATURATION_MAGNETIZATION),
        ),
    )
    half_width = data[CONF_HALF_WIDTH]
    if CONF_CENTERS in data:
        return _build(
            f"{CONF_WIRES}.{CONF_CENTERS}",
            lambda: WireArray(
                half_width=half_width,
                aspect_factor=data[CONF_ASPECT_FACTOR],
                material=material,
                centers=tuple(tuple(c) for c in data[CONF_CENTERS]),
            ),
        )
    lattice = data[CONF_LATTICE]
    pitch = lattice[CONF_PITCH]
    offset = lattice.get(CONF_OFFSET, pitch / 2.0)
    count = lattice.get(CONF_COUNT, max(0, math.floor((channel.width - half_width - offset) / pitch) + 1))
    return _build(
        f"{CONF_WIRES}.{CONF_LATTICE}",
        lambda: WireArray.from_lattice(
            half_width=half_width,
            aspect_factor=data[CONF_ASPECT_FACTOR],
            material=material,
            pitch=pitch,
            count=count,
            offset=offset,
            height=lattice.get(CONF_HEIGHT, half_width),
        ),
    )


def load_config(document: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a configuration document and return it in SI units."""
    try:
        data = SCHEMA_SCENARIO(dict(document))
    except vol.Invalid as err:
        raise format_invalid(err) from err

    channel = _build(CONF_CHANNEL, lambda: ChannelGeometry(**data[CONF_CHANNEL]))
    fluid = _build(CONF_FLUID, lambda: FluidConfig(**data[CONF_FLUID]))
    field_config = _build(
        CONF_FIELD,
        lambda: FieldConfig(
            flux_density=data[CONF_FIELD][CONF_FLUX_DENSITY], direction=data[CONF_FIELD][CONF_DIRECTION]
        ),
    )
    species: list[CellSpecies] = []
    for index, entry in enumerate(data[CONF_SPECIES]):
        if any(known.label == entry[CONF_LABEL] for known in species):
            raise InvalidConfig(f"{CONF_SPECIES}.{index}.{CONF_LABEL}", f"duplicate species {entry[CONF_LABEL]}")
        species.append(_build(f"{CONF_SPECIES}.{index}", partial(_build_species, entry)))
    labels = {s.label for s in species}
    populations: list[PopulationConfig] = []
    for index, entry in enumerate(data[CONF_POPULATIONS]):
        if entry[CONF_SPECIES] not in labels:
            raise InvalidConfig(f"{CONF_POPULATIONS}.{index}.{CONF_SPECIES}", f"unknown species {entry[CONF_SPECIES]}")
        if any(pop.species == entry[CONF_SPECIES] for pop in populations):
            raise InvalidConfig(
                f"{CONF_POPULATIONS}.{index}.{CONF_SPECIES}", f"duplicate population {entry[CONF_SPECIES]}"
            )
        populations.append(PopulationConfig(**entry))

    integrator = data[CONF_INTEGRATOR]
    limits = data[CONF_LIMITS]
    config = ScenarioConfig(
        channel=channel,
        fluid=fluid,
        field=field_config,
        wires=_build_wires(data[CONF_WIRES], channel),
        species=tuple(species),
        populations=tuple(populations),
        integrator=_build(
            CONF_INTEGRATOR,
            lambda: IntegratorSettings(
                rtol=integrator[CONF_RTOL],
                atol=integrator[CONF_ATOL],
                dt_min=integrator[CONF_DT_MIN],
                dt_initial=integrator.get(CONF_DT_INITIAL),
            ),
        ),
        limits=_build(
            CONF_LIMITS,
            lambda: SimulationLimits(
                t_max=limits.get(CONF_T_MAX),
                sample_interval=limits.get(CONF_SAMPLE_INTERVAL),
                capture_radius_multiplier=limits[CONF_CAPTURE_RADIUS_MULTIPLIER],
                capture_rule=limits[CONF_CAPTURE_RULE],
            ),
        ),
        gravity=data[CONF_GRAVITY],
        master_seed=data[CONF_MASTER_SEED],
        trajectory_cap=data[CONF_TRAJECTORY_CAP],
    )
    config.to_scenario()
    _LOGGER.debug("Loaded configuration with %i wires and species %s", len(config.wires), sorted(labels))
    return config


def _without_none(values: Mapping[str, Any]) -> dict[str, Any]:
    return {key: value for key, value in values.items() if value is not None}


def save_config(config: ScenarioConfig) -> dict[str, Any]:
    """Return the configuration document in SI numbers."""
    material = config.wires.material
    return {
        CONF_VERSION: SCHEMA_VERSION,
        CONF_CHANNEL: {
            CONF_DEPTH: config.channel.depth,
            CONF_WIDTH: config.channel.width,
            CONF_LENGTH: config.channel.length,
        },
        CONF_FLUID: {
            CONF_VISCOSITY: config.fluid.viscosity,
            CONF_DENSITY: config.fluid.density,
            CONF_FLOW_RATE: config.fluid.flow_rate,
        },
        CONF_FIELD: {
            CONF_FLUX_DENSITY: config.field.flux_density,
            CONF_DIRECTION: list(config.field.direction),
        },
        CONF_WIRES: {
            CONF_HALF_WIDTH: config.wires.half_width,
            CONF_ASPECT_FACTOR: config.wires.aspect_factor,
            CONF_MATERIAL: _without_none(
                {
                    CONF_MU_WIRE: material.mu_wire,
                    CONF_MU_BUFFER: material.mu_buffer,
                    CONF_SATURATION_MAGNETIZATION: material.saturation_magnetization,
                }
            ),
            CONF_CENTERS: [list(center) for center in config.wires.centers],
        },
        CONF_SPECIES: [
            {
                CONF_LABEL: species.label,
                CONF_DELTA_CHI: species.magnetics.delta_chi,
                CONF_VOLUME: species.magnetics.volume,
                CONF_HYDRODYNAMIC_RADIUS: species.hydrodynamic_radius,
                CONF_DENSITY: species.density,
            }
            for species in config.species
        ],
        CONF_POPULATIONS: [
            {CONF_SPECIES: pop.species, CONF_COUNT: pop.count, CONF_RADIUS_SPREAD: pop.radius_spread}
            for pop in config.populations
        ],
        CONF_INTEGRATOR: _without_none(
            {
                CONF_RTOL: config.integrator.rtol,
                CONF_ATOL: config.integrator.atol,
                CONF_DT_MIN: config.integrator.dt_min,
                CONF_DT_INITIAL: config.integrator.dt_initial,
            }
        ),
        CONF_LIMITS: _without_none(
            {
                CONF_T_MAX: config.limits.t_max,
                CONF_SAMPLE_INTERVAL: config.limits.sample_interval,
                CONF_CAPTURE_RADIUS_MULTIPLIER: config.limits.capture_radius_multiplier,
                CONF_CAPTURE_RULE: config.limits.capture_rule.value,
            }
        ),
        CONF_GRAVITY: config.gravity,
        CONF_MASTER_SEED: config.master_seed,
        CONF_TRAJECTORY_CAP: config.trajectory_cap,
    }


def read_document(path: Path) -> dict[str, Any]:
    """Return the JSON document stored at path."""
    try:
        with path.open("r", encoding="utf-8") as f:
            document = json.load(f)
    except OSError as err:
        raise InvalidConfig("", f"cannot read {path}: {err.strerror}") from err
    except json.JSONDecodeError as err:
        raise InvalidConfig("", f"{path} is not valid JSON: {err.msg} (line {err.lineno})") from err
    if not isinstance(document, dict):
        raise InvalidConfig("", f"{path} must contain a JSON object")
    return document


def bundled_document() -> dict[str, Any]:
    """Return the bundled default scenario document."""
    text = importlib.resources.files(__package__).joinpath("scenarios", BUNDLED_SCENARIO).read_text(encoding="utf-8")
    document: dict[str, Any] = json.loads(text)
    return document


def load_config_file(path: Path | None = None) -> ScenarioConfig:
    """Load a configuration file, or the bundled default scenario when path is None."""
    return load_config(bundled_document() if path is None else read_document(path))


def _step(node: Any, segment: str, path: str) -> tuple[Any, str | int]:
    """Return the child of node addressed by segment and the key used."""
    if isinstance(node, Mapping):
        if segment not in node:
            raise InvalidConfig(path, f"cannot resolve {segment!r}")
        return node[segment], segment
    if isinstance(node, Sequence) and not isinstance(node, str):
        if segment.isdigit() and int(segment) < len(node):
            return node[int(segment)], int(segment)
        for index, item in enumerate(node):
            if isinstance(item, Mapping) and segment in (item.get(CONF_LABEL), item.get(CONF_SPECIES)):
                return item, index
    raise InvalidConfig(path, f"cannot resolve {segment!r}")


def resolve_parameter(document: Mapping[str, Any], path: str) -> Any:
    """Return the value at a dotted parameter path."""
    node: Any = document
    for segment in path.split("."):
        node, _ = _step(node, segment, path)
    return node


def apply_parameter(document: Mapping[str, Any], path: str, value: Any) -> dict[str, Any]:
    """Return a copy of document with the value at the dotted path replaced."""
    result = copy.deepcopy(dict(document))
    *parents, leaf = path.split(".")
    node: Any = result
    for segment in parents:
        node, _ = _step(node, segment, path)
    if isinstance(node, Mapping):
        if leaf not in node and not _is_optional_leaf(parents, leaf):
            raise InvalidConfig(path, f"cannot resolve {leaf!r}")
        node[leaf] = value
        return result
    _, key = _step(node, leaf, path)
    node[key] = value
    return result


def _is_optional_leaf(parents: Sequence[str], leaf: str) -> bool:
    """Return True when leaf is an optional key that may be added to its section."""
    optional: Mapping[str, set[str]] = {
        CONF_INTEGRATOR: {CONF_RTOL, CONF_ATOL, CONF_DT_MIN, CONF_DT_INITIAL},
        CONF_LIMITS: {CONF_T_MAX, CONF_SAMPLE_INTERVAL, CONF_CAPTURE_RADIUS_MULTIPLIER, CONF_CAPTURE_RULE},
        CONF_FIELD: {CONF_DIRECTION},
        CONF_WIRES: {CONF_ASPECT_FACTOR},
    }
    if len(parents) == 1:
        return leaf in optional.get(parents[0], set())
    return not parents and leaf in {CONF_GRAVITY, CONF_MASTER_SEED, CONF_TRAJECTORY_CAP}
