"""Exceptions raised by magsep."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .transport import Trajectory


class BaseMagsepException(Exception):
    """Base exception of magsep."""

    def __init__(self, name: str, *args: Any) -> None:
        """Init the exception."""
        super().__init__(*args)
        self.name = name


class ValidationException(BaseMagsepException):
    """A physical quantity violates its invariant."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("ValidationException", *args)


class InvalidConfig(BaseMagsepException):
    """Error to indicate there is invalid config."""

    def __init__(self, path: str, message: str) -> None:
        """Init the exception."""
        super().__init__("InvalidConfig", f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class ContactWithWire(BaseMagsepException):
    """The evaluation point is on or inside a wire."""

    def __init__(self, wire_index: int, *args: Any) -> None:
        """Init the exception."""
        super().__init__("ContactWithWire", f"contact with wire {wire_index}", *args)
        self.wire_index = wire_index


class OracleDomainError(BaseMagsepException):
    """The finite-difference stencil would reach into the wire."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("OracleDomainError", *args)


class DegeneratePositionError(BaseMagsepException):
    """The polar basis is undefined at the wire axis."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("DegeneratePositionError", *args)


class DomainError(BaseMagsepException):
    """A coordinate lies outside the channel."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("DomainError", *args)


class StiffnessError(BaseMagsepException):
    """The adaptive step size fell below its floor."""

    def __init__(
        self,
        *,
        position: tuple[float, float, float],
        time: float,
        trajectory: Trajectory | None = None,
    ) -> None:
        """Init the exception."""
        super().__init__("StiffnessError", f"step size underflow at t={time:.6g} s, position={position}")
        self.position = position
        self.time = time
        self.trajectory = trajectory


class InconsistentCountsError(BaseMagsepException):
    """More cells after the device than before."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("InconsistentCountsError", *args)


class UndefinedEfficiencyError(BaseMagsepException):
    """The count before the device is not positive."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("UndefinedEfficiencyError", *args)


class NotComparableError(BaseMagsepException):
    """The ensemble does not hold the requested species pair."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("NotComparableError", *args)


class CalibrationInfeasibleError(BaseMagsepException):
    """The target is not bracketed by the flow-rate endpoints."""

    def __init__(self, *args: Any) -> None:
        """Init the exception."""
        super().__init__("CalibrationInfeasibleError", *args)
