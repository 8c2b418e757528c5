"""
Monte Carlo capture statistics.

Every cell draws its random numbers from its own Philox stream keyed by the
master seed, the species label and the cell index, so results do not depend on
the number of worker processes or the order in which cells finish.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import hashlib
import logging
from typing import Any

import numpy as np
from scipy.stats import binomtest, truncnorm

from .const import (
    DEFAULT_CONFIDENCE,
    MIN_RADIUS_FRACTION,
    RADIUS_TRUNCATION_SIGMAS,
    RBC_DEOXY_LABEL,
    STATS_SCHEMA_VERSION,
    WBC_LABEL,
    Outcome,
)
from .exceptions import (
    InconsistentCountsError,
    NotComparableError,
    StiffnessError,
    UndefinedEfficiencyError,
    ValidationException,
)
from .magnetics import CellMagnetics
from .support import default_workers, sha256_digest, to_plain
from .transport import CellSpecies, CellState, ChannelGeometry, ChannelScenario, Trajectory, simulate_trajectory

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True, slots=True)
class Population:
    """A number of cells of one species with a relative spread of the radius."""

    species: CellSpecies
    count: int
    radius_spread: float = 0.0

    def __post_init__(self) -> None:
        """Validate the population."""
        if self.count < 0:
            raise ValidationException(f"{self.species.label}: population count must not be negative: {self.count}")
        if self.radius_spread < 0:
            raise ValidationException(f"{self.species.label}: radius spread must not be negative")


@dataclass(frozen=True, kw_only=True, slots=True)
class SpeciesStats:
    """Capture counts of one species."""

    label: str
    n_total: int
    n_captured: int
    n_escaped: int
    n_timeout: int
    capture_fraction: float
    ci_low: float
    ci_high: float
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True, kw_only=True, slots=True)
class EnsembleStats:
    """Per-species statistics of one ensemble run."""

    master_seed: int
    scenario_digest: str
    species: Mapping[str, SpeciesStats]
    trajectories: Mapping[str, tuple[Trajectory, ...]] = field(default_factory=dict, compare=False, repr=False)


@dataclass(frozen=True, kw_only=True, slots=True)
class SeparationSummary:
    """Comparison of a captured and a passing species."""

    captured_label: str
    passed_label: str
    fractions: Mapping[str, float]
    capture_gap: float
    purity: float | None


@dataclass(frozen=True, kw_only=True, slots=True)
class _CellTask:
    scenario: ChannelScenario
    species: CellSpecies
    initial: CellState
    index: int
    keep: bool


@dataclass(frozen=True, kw_only=True, slots=True)
class _CellResult:
    outcome: Outcome
    diagnostic: str | None
    trajectory: Trajectory | None


def _label_key(label: str) -> int:
    """Return a stable integer key for a label."""
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big")


def cell_generator(master_seed: int, label: str, index: int) -> np.random.Generator:
    """Return the random stream of one cell."""
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(_label_key(label), index))
    return np.random.Generator(np.random.Philox(sequence))


def _realize_species(species: CellSpecies, radius_spread: float, rng: np.random.Generator) -> CellSpecies:
    if radius_spread == 0:
        return species
    nominal = species.hydrodynamic_radius
    lower = max(-RADIUS_TRUNCATION_SIGMAS, (MIN_RADIUS_FRACTION - 1.0) / radius_spread)
    radius = float(
        truncnorm.rvs(lower, RADIUS_TRUNCATION_SIGMAS, loc=nominal, scale=radius_spread * nominal, random_state=rng)
    )
    scale = (radius / nominal) ** 3
    return replace(
        species,
        hydrodynamic_radius=radius,
        magnetics=CellMagnetics(delta_chi=species.magnetics.delta_chi, volume=species.magnetics.volume * scale),
    )


def sample_population(
    pop: Population, master_seed: int, channel: ChannelGeometry
) -> list[tuple[CellState, CellSpecies]]:
    """Return the initial state and realized species of every cell, entering at x = 0."""
    cells: list[tuple[CellState, CellSpecies]] = []
    for index in range(pop.count):
        rng = cell_generator(master_seed, pop.species.label, index)
        species = _realize_species(pop.species, pop.radius_spread, rng)
        radius = species.hydrodynamic_radius
        if 2.0 * radius >= min(channel.width, channel.depth):
            raise ValidationException(f"{species.label}: cell of radius {radius} m does not fit the channel")
        y = rng.uniform(radius, channel.width - radius)
        z = rng.uniform(radius, channel.depth - radius)
        cells.append((CellState(x=0.0, y=float(y), z=float(z)), species))
    return cells


def wilson_interval(successes: int, n: int, confidence: float = DEFAULT_CONFIDENCE) -> tuple[float, float]:
    """
    Return the Wilson score interval of a binomial proportion.

    The bounds are clamped so that the interval always contains successes / n.
    """
    if n == 0:
        return 0.0, 1.0
    interval = binomtest(successes, n).proportion_ci(confidence_level=confidence, method="wilson")
    p = successes / n
    return min(p, max(0.0, float(interval.low))), max(p, min(1.0, float(interval.high)))


def _simulate_cell(task: _CellTask) -> _CellResult:
    try:
        trajectory = simulate_trajectory(task.initial, task.species, task.scenario)
    except StiffnessError as err:
        diagnostic = f"{task.species.label}[{task.index}]: {err}"
        _LOGGER.warning("Counting %s[%i] as timeout: %s", task.species.label, task.index, err)
        return _CellResult(
            outcome=Outcome.MAX_TIME_EXCEEDED,
            diagnostic=diagnostic,
            trajectory=err.trajectory if task.keep else None,
        )
    diagnostic = f"{task.species.label}[{task.index}]: {trajectory.diagnostic}" if trajectory.diagnostic else None
    return _CellResult(
        outcome=trajectory.outcome, diagnostic=diagnostic, trajectory=trajectory if task.keep else None
    )


def scenario_digest(scenario: ChannelScenario, populations: Sequence[Population]) -> str:
    """Return the SHA-256 digest identifying a scenario and its populations."""
    return sha256_digest({"scenario": scenario, "populations": list(populations)})


def _species_stats(label: str, results: Sequence[_CellResult]) -> SpeciesStats:
    outcomes = [result.outcome for result in results]
    n_total = len(outcomes)
    n_captured = outcomes.count(Outcome.CAPTURED)
    ci_low, ci_high = wilson_interval(n_captured, n_total)
    return SpeciesStats(
        label=label,
        n_total=n_total,
        n_captured=n_captured,
        n_escaped=outcomes.count(Outcome.ESCAPED),
        n_timeout=outcomes.count(Outcome.MAX_TIME_EXCEEDED),
        capture_fraction=n_captured / n_total if n_total else 0.0,
        ci_low=ci_low,
        ci_high=ci_high,
        diagnostics=tuple(result.diagnostic for result in results if result.diagnostic),
    )


def run_ensemble(
    populations: Sequence[Population],
    scenario: ChannelScenario,
    master_seed: int,
    *,
    workers: int | None = None,
    trajectory_cap: int = 0,
) -> EnsembleStats:
    """
    Simulate every cell of every population and collect capture statistics.

    Only the first trajectory_cap trajectories of each species are kept.
    """
    labels = [pop.species.label for pop in populations]
    if len(set(labels)) != len(labels):
        raise ValidationException(f"species labels must be unique: {labels}")
    if trajectory_cap < 0:
        raise ValidationException(f"trajectory cap must not be negative: {trajectory_cap}")
    workers = default_workers() if workers is None else max(1, workers)
    tasks = [
        _CellTask(scenario=scenario, species=species, initial=initial, index=index, keep=index < trajectory_cap)
        for pop in populations
        for index, (initial, species) in enumerate(sample_population(pop, master_seed, scenario.channel))
    ]
    _LOGGER.info("Simulating %i cells of %s with %i worker(s)", len(tasks), ", ".join(labels), workers)
    if workers == 1 or len(tasks) < 2:
        results = [_simulate_cell(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_simulate_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))

    species: dict[str, SpeciesStats] = {}
    trajectories: dict[str, tuple[Trajectory, ...]] = {}
    start = 0
    for pop in populations:
        chunk = results[start : start + pop.count]
        start += pop.count
        label = pop.species.label
        species[label] = _species_stats(label, chunk)
        if trajectory_cap > 0:
            trajectories[label] = tuple(result.trajectory for result in chunk if result.trajectory is not None)
        _LOGGER.info(
            "%s: %i/%i captured (%.3f, CI %.3f-%.3f)",
            label,
            species[label].n_captured,
            species[label].n_total,
            species[label].capture_fraction,
            species[label].ci_low,
            species[label].ci_high,
        )
    return EnsembleStats(
        master_seed=master_seed,
        scenario_digest=scenario_digest(scenario, populations),
        species=species,
        trajectories=trajectories,
    )


def stats_to_dict(stats: EnsembleStats) -> dict[str, Any]:
    """Return the JSON document of ensemble statistics."""
    return {
        "schema_version": STATS_SCHEMA_VERSION,
        "master_seed": stats.master_seed,
        "scenario_digest": stats.scenario_digest,
        "species": {label: to_plain(entry) for label, entry in stats.species.items()},
    }


def efficiency_report(count_before: float, count_after: float) -> float:
    """Return the trapping efficiency 1 - after / before of two hemocytometer counts."""
    if not count_before > 0:
        raise UndefinedEfficiencyError(f"count before the device must be positive: {count_before}")
    if count_after > count_before or count_after < 0:
        raise InconsistentCountsError(f"count after ({count_after}) exceeds count before ({count_before})")
    return 1.0 - count_after / count_before


def expected_outlet_count(stats: EnsembleStats, label: str, count_before: float) -> float:
    """Return the count expected after the device for a given count before it."""
    if (entry := stats.species.get(label)) is None:
        raise NotComparableError(f"species {label} not in ensemble")
    if entry.n_total == 0:
        raise UndefinedEfficiencyError(f"species {label} has no simulated cells")
    return count_before * entry.n_escaped / entry.n_total


def compare_species(
    stats: EnsembleStats, captured_label: str = RBC_DEOXY_LABEL, passed_label: str = WBC_LABEL
) -> SeparationSummary:
    """Return how well the captured species is separated from the passing one."""
    if len(stats.species) < 2:
        raise NotComparableError(f"need at least two species, got {list(stats.species)}")
    if (missing := [label for label in (captured_label, passed_label) if label not in stats.species]):
        raise NotComparableError(f"species not in ensemble: {', '.join(missing)}")
    captured = stats.species[captured_label]
    passed = stats.species[passed_label]
    outlet = passed.n_escaped + captured.n_escaped
    return SeparationSummary(
        captured_label=captured_label,
        passed_label=passed_label,
        fractions={label: entry.capture_fraction for label, entry in stats.species.items()},
        capture_gap=captured.capture_fraction - passed.capture_fraction,
        purity=passed.n_escaped / outlet if outlet else None,
    )
