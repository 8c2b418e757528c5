"""Helper."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
import csv
import dataclasses
from enum import Enum
from functools import wraps
import hashlib
import io
import json
import logging
import math
import os
from pathlib import Path
import tempfile
from typing import Any, Final

import voluptuous as vol

from .const import ENV_WORKERS, MU_0, ExitCode
from .exceptions import BaseMagsepException, CalibrationInfeasibleError, InvalidConfig, ValidationException

_LOGGER = logging.getLogger(__name__)

UNITS: Final[Mapping[str, Mapping[str, float]]] = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "flow_rate": {
        "m^3/s": 1.0,
        "ml/h": 1e-6 / 3600.0,
        "ml/min": 1e-6 / 60.0,
        "ul/h": 1e-9 / 3600.0,
        "ul/min": 1e-9 / 60.0,
        "µl/min": 1e-9 / 60.0,
    },
    "flux_density": {"T": 1.0, "mT": 1e-3},
    "viscosity": {"Pa*s": 1.0, "Pa.s": 1.0, "mPa*s": 1e-3, "cP": 1e-3},
    "density": {"kg/m^3": 1.0, "g/cm^3": 1e3, "g/ml": 1e3},
    "volume": {"m^3": 1.0, "um^3": 1e-18, "µm^3": 1e-18, "fl": 1e-18, "fL": 1e-18},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "min": 60.0, "h": 3600.0},
    "magnetization": {"A/m": 1.0, "kA/m": 1e3},
    "permeability": {"H/m": 1.0, "mu0": MU_0},
}


def parse_quantity(value: Any, kind: str) -> float:
    """Return value in SI units; strings carry a unit, bare numbers are SI."""
    if isinstance(value, bool):
        raise vol.Invalid(f"expected a {kind}, got a boolean")
    if isinstance(value, int | float):
        return float(value)
    if not isinstance(value, str):
        raise vol.Invalid(f"expected a {kind}, got {type(value).__name__}")
    number, _, unit = value.strip().partition(" ")
    try:
        magnitude = float(number)
    except ValueError as err:
        raise vol.Invalid(f"cannot parse {value!r} as a {kind}") from err
    if not (unit := unit.strip()):
        return magnitude
    if (factor := UNITS[kind].get(unit)) is None:
        raise vol.Invalid(f"unit {unit!r} is not a {kind} unit (expected one of {', '.join(UNITS[kind])})")
    return magnitude * factor


def quantity(kind: str, *, positive: bool = True) -> Callable[[Any], float]:
    """Return a voluptuous validator converting a unit string of the given kind to SI."""
    if kind not in UNITS:
        raise ValueError(f"unknown quantity kind {kind}")

    def validate(value: Any) -> float:
        result = parse_quantity(value, kind)
        if positive and not result > 0:
            raise vol.Invalid(f"{kind} must be positive, got {value!r}")
        return result

    return validate


def finite_float(value: Any) -> float:
    """Validate a plain finite number."""
    if isinstance(value, bool) or not isinstance(value, int | float) or not math.isfinite(value):
        raise vol.Invalid(f"expected a finite number, got {value!r}")
    return float(value)


def format_invalid(err: vol.Invalid) -> InvalidConfig:
    """Return a path-qualified InvalidConfig from a voluptuous error."""
    if isinstance(err, vol.MultipleInvalid):
        err = err.errors[0]
    path = ".".join(str(part) for part in err.path)
    return InvalidConfig(path, err.msg)


def sort_json(obj: Any) -> Any:
    """Recursively sort dictionaries by key; leave lists and scalars as-is."""
    if isinstance(obj, dict):
        return {k: sort_json(obj[k]) for k in sorted(obj.keys(), key=str)}
    if isinstance(obj, list | tuple):
        return [sort_json(i) for i in obj]
    return obj


def dumps_sorted(obj: Any) -> str:
    """Return a stable, pretty-printed JSON string with keys sorted recursively."""
    return json.dumps(sort_json(obj), ensure_ascii=False, indent=4, separators=(",", ": ")) + "\n"


def to_plain(obj: Any) -> Any:
    """Return dataclasses, enums and tuples as JSON-compatible values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [to_plain(i) for i in obj]
    return obj


def sha256_digest(obj: Any) -> str:
    """Return the SHA-256 of the canonical JSON form of obj."""
    canonical = json.dumps(sort_json(to_plain(obj)), separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    """Write text to path through a temporary file in the same directory."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", newline="", dir=path.parent, prefix=f".{path.name}.", delete=False
    ) as tmp:
        tmp.write(text)
    os.replace(tmp.name, path)
    _LOGGER.debug("Wrote %s", path)


def write_json(path: Path, obj: Any) -> None:
    """Write obj as sorted, indented JSON."""
    atomic_write_text(path, dumps_sorted(obj))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV file with a header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buffer.getvalue())


def default_workers() -> int:
    """Return the worker count from the environment, 1 when unset."""
    raw = os.environ.get(ENV_WORKERS, "1")
    try:
        workers = int(raw)
    except ValueError:
        _LOGGER.warning("Ignoring %s=%s: not an integer", ENV_WORKERS, raw)
        return 1
    return max(1, workers)


def handle_magsep_errors[**P](func: Callable[P, int]) -> Callable[P, int]:
    """
    Convert magsep exceptions of a command into exit codes.

    Validation problems map to 2, any other exception raised while computing
    maps to 3. KeyboardInterrupt and SystemExit are left alone.
    """

    @wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except (InvalidConfig, ValidationException, CalibrationInfeasibleError) as exc:
            _LOGGER.error("%s: %s", exc.name, exc)
            return ExitCode.VALIDATION_ERROR
        except BaseMagsepException as exc:
            _LOGGER.error("%s: %s", exc.name, exc)
            _LOGGER.debug("Traceback", exc_info=exc)
            return ExitCode.RUNTIME_ERROR
        except Exception as exc:  # pylint: disable=broad-exception-caught
            _LOGGER.error("%s: %s", type(exc).__name__, exc)
            _LOGGER.debug("Traceback", exc_info=exc)
            return ExitCode.RUNTIME_ERROR

    return wrapper
