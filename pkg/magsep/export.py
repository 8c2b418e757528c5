"""Result files written by the command-line harness."""

from __future__ import annotations

from collections.abc import Sequence
import logging
from pathlib import Path
from typing import Any, Final

from .const import DIR_TRAJECTORIES, FILE_CAPTURE_FRACTIONS, FILE_SEPARATION, FILE_STATS
from .ensemble import EnsembleStats, SeparationSummary, stats_to_dict
from .support import to_plain, write_csv, write_json
from .transport import Trajectory

_LOGGER = logging.getLogger(__name__)

CAPTURE_FRACTIONS_HEADER: Final = (
    "species",
    "n_total",
    "n_captured",
    "n_escaped",
    "n_timeout",
    "capture_fraction",
    "ci_low",
    "ci_high",
)
TRAJECTORY_HEADER: Final = ("t", "x", "y", "z", "outcome")
SWEEP_HEADER: Final = (
    "parameter",
    "value",
    "species",
    "n_total",
    "n_captured",
    "capture_fraction",
    "ci_low",
    "ci_high",
)
FIELDMAP_HEADER: Final = ("r", "phi", "F_r", "F_phi")


def trajectory_filename(label: str, index: int) -> str:
    """Return the file name of one trajectory."""
    return f"{label}_{index:04d}.csv"


def write_stats(output_dir: Path, stats: EnsembleStats) -> None:
    """Write stats.json and capture_fractions.csv."""
    write_json(output_dir / FILE_STATS, stats_to_dict(stats))
    write_csv(
        output_dir / FILE_CAPTURE_FRACTIONS,
        CAPTURE_FRACTIONS_HEADER,
        (
            (
                label,
                entry.n_total,
                entry.n_captured,
                entry.n_escaped,
                entry.n_timeout,
                entry.capture_fraction,
                entry.ci_low,
                entry.ci_high,
            )
            for label, entry in stats.species.items()
        ),
    )


def write_separation(output_dir: Path, summary: SeparationSummary) -> None:
    """Write separation.json."""
    write_json(output_dir / FILE_SEPARATION, to_plain(summary))


def write_trajectories(output_dir: Path, trajectories: Sequence[Trajectory], cap: int) -> int:
    """Write up to cap trajectories per species; return the number of files."""
    written: dict[str, int] = {}
    for trajectory in trajectories:
        index = written.get(trajectory.label, 0)
        if index >= cap:
            continue
        rows = trajectory.samples.tolist()
        last = len(rows) - 1
        write_csv(
            output_dir / DIR_TRAJECTORIES / trajectory_filename(trajectory.label, index),
            TRAJECTORY_HEADER,
            ((*row, trajectory.outcome.value if i == last else "") for i, row in enumerate(rows)),
        )
        written[trajectory.label] = index + 1
    _LOGGER.debug("Wrote trajectories %s", written)
    return sum(written.values())


def write_sweep(path: Path, rows: Sequence[Sequence[Any]]) -> None:
    """Write sweep.csv."""
    write_csv(path, SWEEP_HEADER, rows)


def write_fieldmap(path: Path, rows: Sequence[Sequence[float]]) -> None:
    """Write the force map grid."""
    write_csv(path, FIELDMAP_HEADER, rows)
