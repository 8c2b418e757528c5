"""
Magnetic force on a cell near magnetized wires.

A wire of half-width ``a`` sits in a uniform transverse field ``H0``. Outside the
wire the field is the two-dimensional cylinder solution with contrast factor
``k``; once the wire saturates the contrast is clamped to ``M_s / (2 H0)``.

The single-wire force is evaluated in the polar frame of the wire, with the
angle measured from the field direction. Arrays superpose the single-wire
forces; mutual magnetization between wires is neglected.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import pdist

from .const import DEFAULT_ASPECT_FACTOR, DEFAULT_FD_STEP_FRACTION, DEFAULT_FIELD_DIRECTION, MU_0
from .exceptions import ContactWithWire, DegeneratePositionError, OracleDomainError, ValidationException

_LOGGER = logging.getLogger(__name__)

_DIRECTION_TOLERANCE = 1e-9


@dataclass(frozen=True, kw_only=True, slots=True)
class MagneticMaterial:
    """Permeabilities of wire and buffer, plus the optional saturation magnetization."""

    mu_wire: float
    mu_buffer: float
    saturation_magnetization: float | None = None

    def __post_init__(self) -> None:
        """Validate the material."""
        if not (self.mu_wire > 0 and self.mu_buffer > 0):
            raise ValidationException(
                f"permeabilities must be positive (mu_wire={self.mu_wire}, mu_buffer={self.mu_buffer})"
            )
        if self.saturation_magnetization is not None and not self.saturation_magnetization > 0:
            raise ValidationException(f"saturation magnetization must be positive: {self.saturation_magnetization}")


@dataclass(frozen=True, kw_only=True, slots=True)
class FieldConfig:
    """Uniform external field in the cross-flow (y, z) plane."""

    flux_density: float
    direction: tuple[float, float] = DEFAULT_FIELD_DIRECTION
    mu_0: float = MU_0

    def __post_init__(self) -> None:
        """Validate the field."""
        if not (math.isfinite(self.flux_density) and self.flux_density >= 0):
            raise ValidationException(f"flux density must be non-negative: {self.flux_density}")
        if abs(math.hypot(*self.direction) - 1.0) > _DIRECTION_TOLERANCE:
            raise ValidationException(f"field direction must be a unit vector: {self.direction}")

    @property
    def h0(self) -> float:
        """Return the applied field strength in A/m."""
        return self.flux_density / self.mu_0

    @property
    def normal(self) -> tuple[float, float]:
        """Return the field direction rotated by +90 degrees."""
        return (-self.direction[1], self.direction[0])


@dataclass(frozen=True, kw_only=True, slots=True)
class CellMagnetics:
    """Susceptibility contrast and volume of a cell."""

    delta_chi: float
    volume: float

    def __post_init__(self) -> None:
        """Validate the cell."""
        if not math.isfinite(self.delta_chi):
            raise ValidationException(f"delta_chi must be finite: {self.delta_chi}")
        if not self.volume > 0:
            raise ValidationException(f"cell volume must be positive: {self.volume}")


@dataclass(frozen=True, kw_only=True, slots=True)
class WireArray:
    """
    Parallel wires along the flow axis.

    Attributes:
        half_width: Half-width ``a`` of every wire
        aspect_factor: Width over height of the wire cross-section
        material: Wire and buffer material
        centers: Wire axes as (y, z) positions

    """

    half_width: float
    material: MagneticMaterial
    centers: tuple[tuple[float, float], ...]
    aspect_factor: float = DEFAULT_ASPECT_FACTOR
    center_array: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Validate the wire layout and cache the center array."""
        if not self.half_width > 0:
            raise ValidationException(f"wire half-width must be positive: {self.half_width}")
        if not self.aspect_factor > 0:
            raise ValidationException(f"aspect factor must be positive: {self.aspect_factor}")
        centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        if len(centers) > 1 and (min_gap := float(pdist(centers).min())) <= 2 * self.half_width:
            raise ValidationException(
                f"wire centers must be separated by more than 2a: "
                f"closest pair {min_gap:.3g} m, a={self.half_width:.3g} m"
            )
        centers.setflags(write=False)
        object.__setattr__(self, "center_array", centers)

    @classmethod
    def from_lattice(
        cls,
        *,
        half_width: float,
        material: MagneticMaterial,
        pitch: float,
        count: int,
        offset: float,
        height: float,
        aspect_factor: float = DEFAULT_ASPECT_FACTOR,
    ) -> WireArray:
        """Expand a uniform lattice along y into explicit centers."""
        if count < 0:
            raise ValidationException(f"wire count must not be negative: {count}")
        if count > 1 and not pitch > 0:
            raise ValidationException(f"lattice pitch must be positive: {pitch}")
        return cls(
            half_width=half_width,
            material=material,
            aspect_factor=aspect_factor,
            centers=tuple((offset + i * pitch, height) for i in range(count)),
        )

    def __len__(self) -> int:
        """Return the number of wires."""
        return len(self.centers)


@dataclass(frozen=True, kw_only=True, slots=True)
class WirePolar:
    """
    Position relative to one wire; phi is measured from the field direction.

    Any finite phi is accepted and read modulo 2 pi; cartesian_to_polar returns phi in (-pi, pi].
    """

    r: float
    phi: float

    def __post_init__(self) -> None:
        """Validate the position."""
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValidationException(f"wire distance must be finite and non-negative: {self.r}")
        if not math.isfinite(self.phi):
            raise ValidationException(f"wire angle must be finite: {self.phi}")


@dataclass(frozen=True, kw_only=True, slots=True)
class PolarForce:
    """Force in the polar frame of a wire; positive f_r points away from the wire."""

    f_r: float
    f_phi: float


@dataclass(frozen=True, kw_only=True, slots=True)
class WireForceTerms:
    """The single-wire force split into its separately scaling parts."""

    radial_self: float
    radial_cross: float
    azimuthal: float

    @property
    def force(self) -> PolarForce:
        """Return the total polar force."""
        return PolarForce(f_r=self.radial_self + self.radial_cross, f_phi=self.azimuthal)


def contrast_factor(material: MagneticMaterial) -> float:
    """Return k = (mu_w - mu_b) / (mu_w + mu_b)."""
    if not (material.mu_wire > 0 and material.mu_buffer > 0):
        raise ValidationException("permeabilities must be positive")
    return (material.mu_wire - material.mu_buffer) / (material.mu_wire + material.mu_buffer)


def effective_contrast(material: MagneticMaterial, h0: float) -> float:
    """Return the contrast factor, clamped once the wire saturates."""
    if h0 < 0:
        raise ValidationException(f"field strength must not be negative: {h0}")
    k = contrast_factor(material)
    if material.saturation_magnetization is None or h0 == 0:
        return k
    return min(k, material.saturation_magnetization / (2.0 * h0))


def is_saturated(material: MagneticMaterial, h0: float) -> bool:
    """Return True when the saturation clamp is active."""
    return effective_contrast(material, h0) < contrast_factor(material)


def _force_kernel(
    along: NDArray[np.float64] | float,
    across: NDArray[np.float64] | float,
    *,
    cell: CellMagnetics,
    half_width: float,
    aspect_factor: float,
    k_eff: float,
    h0: float,
    mu_0: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return (radial self, radial cross, azimuthal) terms from wire-frame coordinates."""
    along = np.asarray(along, dtype=np.float64)
    across = np.asarray(across, dtype=np.float64)
    r2 = along * along + across * across
    a2 = half_width * half_width
    prefactor = (
        -2.0 * k_eff * mu_0 * cell.delta_chi * cell.volume * a2 / (r2 * np.sqrt(r2)) * aspect_factor * h0 * h0
    )
    radial_self = prefactor * (k_eff * aspect_factor * a2 / r2)
    radial_cross = prefactor * (along * along - across * across) / r2
    azimuthal = prefactor * (2.0 * along * across) / r2
    return radial_self, radial_cross, azimuthal


def wire_force_terms(
    pos: WirePolar,
    cell: CellMagnetics,
    *,
    half_width: float,
    aspect_factor: float = DEFAULT_ASPECT_FACTOR,
    k_eff: float,
    h0: float,
    mu_0: float = MU_0,
    wire_index: int = 0,
) -> WireForceTerms:
    """Return the three terms of the single-wire force."""
    if pos.r <= half_width:
        raise ContactWithWire(wire_index)
    radial_self, radial_cross, azimuthal = _force_kernel(
        pos.r * math.cos(pos.phi),
        pos.r * math.sin(pos.phi),
        cell=cell,
        half_width=half_width,
        aspect_factor=aspect_factor,
        k_eff=k_eff,
        h0=h0,
        mu_0=mu_0,
    )
    return WireForceTerms(radial_self=float(radial_self), radial_cross=float(radial_cross), azimuthal=float(azimuthal))


def wire_force_polar(
    pos: WirePolar,
    cell: CellMagnetics,
    *,
    half_width: float,
    aspect_factor: float = DEFAULT_ASPECT_FACTOR,
    k_eff: float,
    h0: float,
    mu_0: float = MU_0,
    wire_index: int = 0,
) -> PolarForce:
    """Return the magnetic force of one wire on a cell at pos."""
    return wire_force_terms(
        pos,
        cell,
        half_width=half_width,
        aspect_factor=aspect_factor,
        k_eff=k_eff,
        h0=h0,
        mu_0=mu_0,
        wire_index=wire_index,
    ).force


def field_at_polar(pos: WirePolar, *, half_width: float, k_eff: float, h0: float) -> tuple[float, float]:
    """Return (H_r, H_phi) of the magnetized wire outside its cross-section."""
    kappa = k_eff * half_width * half_width / (pos.r * pos.r)
    return h0 * (1.0 + kappa) * math.cos(pos.phi), -h0 * (1.0 - kappa) * math.sin(pos.phi)


def _half_energy_density(along: float, across: float, *, half_width: float, k_eff: float, h0: float) -> float:
    pos = WirePolar(r=math.hypot(along, across), phi=math.atan2(across, along))
    h_r, h_phi = field_at_polar(pos, half_width=half_width, k_eff=k_eff, h0=h0)
    return 0.5 * (h_r * h_r + h_phi * h_phi)


def oracle_force_energy_gradient(
    pos: WirePolar,
    cell: CellMagnetics,
    *,
    half_width: float,
    k_eff: float,
    h0: float,
    mu_0: float = MU_0,
    fd_step: float | None = None,
) -> PolarForce:
    """
    Return mu_0 * delta_chi * V * grad(|H|^2 / 2) by finite differences.

    Central differences at h and h/2 are combined by Richardson extrapolation.
    The aspect factor is not part of this model.
    """
    step = DEFAULT_FD_STEP_FRACTION * half_width if fd_step is None else fd_step
    if pos.r <= half_width + 2.0 * step:
        raise OracleDomainError(f"stencil reaches into the wire: r={pos.r:.6g}, a={half_width:.6g}, h={step:.6g}")
    along = pos.r * math.cos(pos.phi)
    across = pos.r * math.sin(pos.phi)

    def energy(x: float, y: float) -> float:
        return _half_energy_density(x, y, half_width=half_width, k_eff=k_eff, h0=h0)

    def central(h: float) -> tuple[float, float]:
        return (
            (energy(along + h, across) - energy(along - h, across)) / (2.0 * h),
            (energy(along, across + h) - energy(along, across - h)) / (2.0 * h),
        )

    coarse = central(step)
    fine = central(step / 2.0)
    grad_along, grad_across = ((4.0 * f - c) / 3.0 for f, c in zip(fine, coarse, strict=True))
    scale = mu_0 * cell.delta_chi * cell.volume
    cos_phi, sin_phi = math.cos(pos.phi), math.sin(pos.phi)
    return PolarForce(
        f_r=scale * (grad_along * cos_phi + grad_across * sin_phi),
        f_phi=scale * (-grad_along * sin_phi + grad_across * cos_phi),
    )


def cartesian_to_polar(
    point: Sequence[float], wire_center: Sequence[float], direction: Sequence[float] = DEFAULT_FIELD_DIRECTION
) -> WirePolar:
    """Return the wire-frame polar position of a (y, z) point."""
    dy = point[0] - wire_center[0]
    dz = point[1] - wire_center[1]
    along = dy * direction[0] + dz * direction[1]
    across = -dy * direction[1] + dz * direction[0]
    phi = math.atan2(across, along)
    if phi <= -math.pi:
        phi += 2.0 * math.pi
    return WirePolar(r=math.hypot(along, across), phi=phi)


def polar_to_cartesian_force(
    force: PolarForce, pos: WirePolar, direction: Sequence[float] = DEFAULT_FIELD_DIRECTION
) -> tuple[float, float]:
    """Return (F_y, F_z) of a polar force at pos."""
    if pos.r == 0:
        raise DegeneratePositionError("polar basis undefined at r=0")
    cos_phi, sin_phi = math.cos(pos.phi), math.sin(pos.phi)
    f_along = force.f_r * cos_phi - force.f_phi * sin_phi
    f_across = force.f_r * sin_phi + force.f_phi * cos_phi
    return (
        f_along * direction[0] - f_across * direction[1],
        f_along * direction[1] + f_across * direction[0],
    )


def superpose_forces(
    point: Sequence[float], cell: CellMagnetics, array: WireArray, field_config: FieldConfig
) -> tuple[float, float]:
    """Return the summed (F_y, F_z) of all wires on a cell at the (y, z) point."""
    if not array.centers:
        return 0.0, 0.0
    e_f = field_config.direction
    offset = np.asarray(point, dtype=np.float64) - array.center_array
    along = offset[:, 0] * e_f[0] + offset[:, 1] * e_f[1]
    across = -offset[:, 0] * e_f[1] + offset[:, 1] * e_f[0]
    r2 = along * along + across * across
    if (inside := np.flatnonzero(r2 <= array.half_width * array.half_width)).size:
        raise ContactWithWire(int(inside[0]))
    h0 = field_config.h0
    radial_self, radial_cross, azimuthal = _force_kernel(
        along,
        across,
        cell=cell,
        half_width=array.half_width,
        aspect_factor=array.aspect_factor,
        k_eff=effective_contrast(array.material, h0),
        h0=h0,
        mu_0=field_config.mu_0,
    )
    f_r = radial_self + radial_cross
    r = np.sqrt(r2)
    f_along = float(np.sum((f_r * along - azimuthal * across) / r))
    f_across = float(np.sum((f_r * across + azimuthal * along) / r))
    return (
        f_along * e_f[0] - f_across * e_f[1],
        f_along * e_f[1] + f_across * e_f[0],
    )


def force_map(
    cell: CellMagnetics,
    array: WireArray,
    field_config: FieldConfig,
    *,
    radii: Iterable[float],
    angles: Iterable[float],
) -> list[tuple[float, float, float, float]]:
    """Return (r, phi, F_r, F_phi) rows of the single-wire force on a polar grid."""
    h0 = field_config.h0
    k_eff = effective_contrast(array.material, h0)
    angle_list = list(angles)
    rows: list[tuple[float, float, float, float]] = []
    for r in radii:
        for phi in angle_list:
            force = wire_force_polar(
                WirePolar(r=r, phi=phi),
                cell,
                half_width=array.half_width,
                aspect_factor=array.aspect_factor,
                k_eff=k_eff,
                h0=h0,
                mu_0=field_config.mu_0,
            )
            rows.append((r, phi, force.f_r, force.f_phi))
    _LOGGER.debug("Computed force map with %i points (k_eff=%s)", len(rows), k_eff)
    return rows
