"""
Unit tests for magsep.magnetics.

Covered functions:
- contrast_factor / effective_contrast / is_saturated: contrast and saturation clamp.
- wire_force_polar / wire_force_terms: closed-form force, sign structure, scaling laws, linearity in delta_chi and V.
- field_at_polar: surface values and the uniform far field.
- oracle_force_energy_gradient: agreement with the closed form, stencil domain.
- cartesian_to_polar / polar_to_cartesian_force: wire frame for arbitrary field directions.
- superpose_forces: additivity, mirror symmetry, contact detection.
- force_map: grid layout.
- WireArray / FieldConfig / MagneticMaterial: validation.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from magsep.const import MU_0
from magsep.exceptions import (
    ContactWithWire,
    DegeneratePositionError,
    OracleDomainError,
    ValidationException,
)
from magsep.magnetics import (
    CellMagnetics,
    FieldConfig,
    MagneticMaterial,
    PolarForce,
    WireArray,
    WirePolar,
    cartesian_to_polar,
    contrast_factor,
    effective_contrast,
    field_at_polar,
    force_map,
    is_saturated,
    oracle_force_energy_gradient,
    polar_to_cartesian_force,
    superpose_forces,
    wire_force_polar,
    wire_force_terms,
)

from tests import const
from tests.helper import NICKEL

UNIT_CELL = CellMagnetics(delta_chi=1.0, volume=1.0)
RBC_CELL = CellMagnetics(delta_chi=const.RBC_DELTA_CHI, volume=const.RBC_VOLUME)


def _unit_force(r: float, phi: float, *, k: float = 0.5, aspect_factor: float = 1.0) -> PolarForce:
    return wire_force_polar(
        WirePolar(r=r, phi=phi),
        UNIT_CELL,
        half_width=1.0,
        aspect_factor=aspect_factor,
        k_eff=k,
        h0=1.0,
        mu_0=1.0,
    )


class TestContrast:
    """Tests for the contrast factor and the saturation clamp."""

    def test_contrast_factor(self) -> None:
        """It should return (mu_w - mu_b) / (mu_w + mu_b)."""
        assert contrast_factor(NICKEL) == pytest.approx(599.0 / 601.0)
        same = MagneticMaterial(mu_wire=MU_0, mu_buffer=MU_0)
        assert contrast_factor(same) == 0.0

    def test_nickel_not_saturated_at_default_field(self) -> None:
        """It should keep the linear contrast for Ni at 0.2 T."""
        h0 = FieldConfig(flux_density=0.2).h0
        assert not is_saturated(NICKEL, h0)
        assert effective_contrast(NICKEL, h0) == contrast_factor(NICKEL)

    def test_clamped_when_saturated(self) -> None:
        """It should clamp the contrast to M_s / (2 H0) at high fields."""
        h0 = FieldConfig(flux_density=1.0).h0
        assert is_saturated(NICKEL, h0)
        assert effective_contrast(NICKEL, h0) == pytest.approx(4.8e5 / (2.0 * h0))

    def test_no_saturation_without_magnetization(self) -> None:
        """It should never clamp when no saturation magnetization is given."""
        material = MagneticMaterial(mu_wire=600 * MU_0, mu_buffer=MU_0)
        assert not is_saturated(material, 1e9)

    def test_zero_field(self) -> None:
        """It should return the linear contrast at zero field."""
        assert effective_contrast(NICKEL, 0.0) == contrast_factor(NICKEL)

    def test_negative_field_rejected(self) -> None:
        """It should reject a negative field strength."""
        with pytest.raises(ValidationException):
            effective_contrast(NICKEL, -1.0)

    def test_material_validation(self) -> None:
        """It should reject non-positive permeabilities and magnetization."""
        with pytest.raises(ValidationException):
            MagneticMaterial(mu_wire=0.0, mu_buffer=MU_0)
        with pytest.raises(ValidationException):
            MagneticMaterial(mu_wire=MU_0, mu_buffer=MU_0, saturation_magnetization=0.0)


class TestWireForcePolar:
    """Tests for the closed-form single-wire force."""

    def test_worked_example(self) -> None:
        """It should give F_r = -0.140625 for the unit example at phi=0."""
        force = _unit_force(2.0, 0.0)
        assert force.f_r == pytest.approx(-0.140625, rel=1e-12)
        assert force.f_phi == 0.0

    def test_azimuthal_zero_on_axes(self) -> None:
        """It should give F_phi = 0 where sin 2phi = 0, up to the rounding of sin and cos at pi multiples."""
        for phi in (0.0, math.pi / 2, -math.pi / 2, math.pi):
            force = _unit_force(3.0, phi)
            assert abs(force.f_phi) < 1e-15 * abs(force.f_r)

    def test_contact_raises(self) -> None:
        """It should raise ContactWithWire inside the wire."""
        with pytest.raises(ContactWithWire) as err:
            wire_force_polar(
                WirePolar(r=1.0, phi=0.0), UNIT_CELL, half_width=1.0, k_eff=0.5, h0=1.0, mu_0=1.0, wire_index=7
            )
        assert err.value.wire_index == 7

    def test_zero_field_zero_force(self) -> None:
        """It should return zero force at zero field."""
        force = wire_force_polar(WirePolar(r=2.0, phi=0.3), UNIT_CELL, half_width=1.0, k_eff=0.5, h0=0.0)
        assert force.f_r == 0.0
        assert force.f_phi == 0.0

    def test_mode_signs(self) -> None:
        """It should attract at phi=0 and repel at phi=pi/2 for delta_chi > 0, over a random sample."""
        rng = np.random.default_rng(const.MASTER_SEED)
        for _ in range(1000):
            a = rng.uniform(0.1e-6, 50e-6)
            cell = CellMagnetics(delta_chi=rng.uniform(1e-8, 1e-3), volume=rng.uniform(1e-18, 1e-14))
            k = rng.uniform(1e-3, 1.0 - 1e-9)
            h0 = rng.uniform(1e3, 1e6)
            r = a * rng.uniform(1.0 + 1e-6, 100.0)
            attract = wire_force_polar(WirePolar(r=r, phi=0.0), cell, half_width=a, k_eff=k, h0=h0)
            repel = wire_force_polar(WirePolar(r=r, phi=math.pi / 2), cell, half_width=a, k_eff=k, h0=h0)
            assert attract.f_r < 0
            assert repel.f_r > 0

    def test_signs_flip_for_diamagnetic_cells(self) -> None:
        """It should flip both signs for delta_chi < 0."""
        cell = CellMagnetics(delta_chi=const.WBC_DELTA_CHI, volume=const.WBC_VOLUME)
        kwargs = {"half_width": 1e-6, "k_eff": 0.9, "h0": 1.6e5}
        assert wire_force_polar(WirePolar(r=3e-6, phi=0.0), cell, **kwargs).f_r > 0
        assert wire_force_polar(WirePolar(r=3e-6, phi=math.pi / 2), cell, **kwargs).f_r < 0

    def test_saturated_field_dependence(self) -> None:
        """It should make the self term field-independent and the cross terms linear in H0 once saturated."""
        h_values = np.array([2e6, 4e6, 8e6])
        pos = WirePolar(r=3e-6, phi=0.3)
        terms = []
        for h0 in h_values:
            assert is_saturated(NICKEL, h0)
            k_eff = effective_contrast(NICKEL, h0)
            terms.append(wire_force_terms(pos, RBC_CELL, half_width=1e-6, k_eff=k_eff, h0=h0))
        log_h = np.log(h_values)
        self_slope = np.polyfit(log_h, np.log([abs(t.radial_self) for t in terms]), 1)[0]
        cross_slope = np.polyfit(log_h, np.log([abs(t.radial_cross) for t in terms]), 1)[0]
        azimuthal_slope = np.polyfit(log_h, np.log([abs(t.azimuthal) for t in terms]), 1)[0]
        assert self_slope == pytest.approx(0.0, abs=1e-6)
        assert cross_slope == pytest.approx(1.0, abs=1e-6)
        assert azimuthal_slope == pytest.approx(1.0, abs=1e-6)

    def test_radial_scaling(self) -> None:
        """It should decay the cross terms as r^-3 and the self term as r^-5."""
        radii = np.geomspace(2e-6, 20e-6, 16)
        log_r = np.log(radii)
        kwargs = {"half_width": 1e-6, "k_eff": 0.9, "h0": 1.6e5}
        azimuthal = [
            abs(wire_force_terms(WirePolar(r=r, phi=math.pi / 4), RBC_CELL, **kwargs).azimuthal) for r in radii
        ]
        radial_self = [
            abs(wire_force_terms(WirePolar(r=r, phi=math.pi / 2), RBC_CELL, **kwargs).radial_self) for r in radii
        ]
        assert np.polyfit(log_r, np.log(azimuthal), 1)[0] == pytest.approx(-3.0, abs=1e-3)
        assert np.polyfit(log_r, np.log(radial_self), 1)[0] == pytest.approx(-5.0, abs=1e-3)

    def test_aspect_factor_scales_terms(self) -> None:
        """It should scale the self term by gamma^2 and the cross terms by gamma."""
        plain = wire_force_terms(WirePolar(r=2.0, phi=0.4), UNIT_CELL, half_width=1.0, k_eff=0.5, h0=1.0, mu_0=1.0)
        wide = wire_force_terms(
            WirePolar(r=2.0, phi=0.4), UNIT_CELL, half_width=1.0, aspect_factor=2.0, k_eff=0.5, h0=1.0, mu_0=1.0
        )
        assert wide.radial_self == pytest.approx(4.0 * plain.radial_self)
        assert wide.radial_cross == pytest.approx(2.0 * plain.radial_cross)
        assert wide.azimuthal == pytest.approx(2.0 * plain.azimuthal)

    def test_linear_in_contrast_and_volume(self) -> None:
        """It should scale linearly with delta_chi and V and flip sign with delta_chi."""
        rng = np.random.default_rng(const.MASTER_SEED)
        kwargs = {"half_width": 1e-6, "k_eff": 0.9, "h0": 1.6e5}
        for _ in range(200):
            pos = WirePolar(r=rng.uniform(1.1e-6, 50e-6), phi=rng.uniform(-math.pi, math.pi))
            base = wire_force_polar(pos, RBC_CELL, **kwargs)
            for cell, factor in (
                (CellMagnetics(delta_chi=3.0 * const.RBC_DELTA_CHI, volume=const.RBC_VOLUME), 3.0),
                (CellMagnetics(delta_chi=const.RBC_DELTA_CHI, volume=2.5 * const.RBC_VOLUME), 2.5),
                (CellMagnetics(delta_chi=-const.RBC_DELTA_CHI, volume=const.RBC_VOLUME), -1.0),
            ):
                scaled = wire_force_polar(pos, cell, **kwargs)
                assert scaled.f_r == pytest.approx(factor * base.f_r, rel=1e-12)
                assert scaled.f_phi == pytest.approx(factor * base.f_phi, rel=1e-12, abs=1e-300)

    def test_quadratic_in_field_below_saturation(self) -> None:
        """It should quadruple the force when H0 doubles while the wire stays unsaturated."""
        h0 = FieldConfig(flux_density=0.1).h0
        assert not is_saturated(NICKEL, 2.0 * h0)
        pos = WirePolar(r=3e-6, phi=0.3)
        single = wire_force_polar(pos, RBC_CELL, half_width=1e-6, k_eff=effective_contrast(NICKEL, h0), h0=h0)
        double = wire_force_polar(
            pos, RBC_CELL, half_width=1e-6, k_eff=effective_contrast(NICKEL, 2.0 * h0), h0=2.0 * h0
        )
        assert double.f_r == pytest.approx(4.0 * single.f_r, rel=1e-12)
        assert double.f_phi == pytest.approx(4.0 * single.f_phi, rel=1e-12)


class TestField:
    """Tests for the field around a magnetized wire."""

    def test_surface_values(self) -> None:
        """It should add k H0 radially on the field axis and leave (1 - k) H0 across it."""
        h_r, h_phi = field_at_polar(WirePolar(r=1.0, phi=0.0), half_width=1.0, k_eff=0.5, h0=2.0)
        assert h_r == pytest.approx(3.0)
        assert h_phi == pytest.approx(0.0, abs=1e-15)
        h_r, h_phi = field_at_polar(WirePolar(r=1.0, phi=math.pi / 2.0), half_width=1.0, k_eff=0.5, h0=2.0)
        assert h_r == pytest.approx(0.0, abs=1e-15)
        assert h_phi == pytest.approx(-1.0)

    def test_far_field_is_uniform(self) -> None:
        """It should approach the applied field far from the wire."""
        for phi in (0.3, 1.7, 4.0):
            h_r, h_phi = field_at_polar(WirePolar(r=1e4, phi=phi), half_width=1.0, k_eff=0.5, h0=1.0)
            assert math.hypot(h_r, h_phi) == pytest.approx(1.0, rel=1e-7)


class TestOracle:
    """Tests for the energy-gradient oracle."""

    def test_matches_closed_form_on_grid(self) -> None:
        """It should agree with the closed form to 1e-6 relative on a 32x32 grid."""
        a = const.HALF_WIDTH
        h0 = FieldConfig(flux_density=0.2).h0
        k = effective_contrast(NICKEL, h0)
        for r in np.linspace(1.1 * a, 10.0 * a, 32):
            for phi in np.linspace(0.0, 2.0 * math.pi, 32, endpoint=False):
                pos = WirePolar(r=float(r), phi=float(phi))
                exact = wire_force_polar(pos, RBC_CELL, half_width=a, k_eff=k, h0=h0)
                oracle = oracle_force_energy_gradient(pos, RBC_CELL, half_width=a, k_eff=k, h0=h0)
                scale = math.hypot(exact.f_r, exact.f_phi)
                assert abs(oracle.f_r - exact.f_r) <= 1e-6 * scale
                assert abs(oracle.f_phi - exact.f_phi) <= 1e-6 * scale

    def test_stencil_inside_wire(self) -> None:
        """It should refuse points whose stencil reaches into the wire."""
        with pytest.raises(OracleDomainError):
            oracle_force_energy_gradient(
                WirePolar(r=1.001, phi=0.0), UNIT_CELL, half_width=1.0, k_eff=0.5, h0=1.0, fd_step=0.01
            )


class TestFrame:
    """Tests for the wire-frame conversions."""

    def test_default_direction(self) -> None:
        """It should measure phi from +z for a vertical field."""
        above = cartesian_to_polar((0.0, 2.0), (0.0, 0.0))
        assert above.r == pytest.approx(2.0)
        assert above.phi == pytest.approx(0.0)
        beside = cartesian_to_polar((3.0, 1.0), (1.0, 1.0))
        assert beside.r == pytest.approx(2.0)
        assert beside.phi == pytest.approx(-math.pi / 2)

    def test_phi_range(self) -> None:
        """It should normalise phi into (-pi, pi]."""
        below = cartesian_to_polar((0.0, -1.0), (0.0, 0.0))
        assert below.phi == pytest.approx(math.pi)

    def test_force_rotation_roundtrip(self) -> None:
        """It should rotate polar forces consistently for an oblique field."""
        direction = (math.cos(0.7), math.sin(0.7))
        pos = cartesian_to_polar((2.0, 1.0), (0.5, -0.5), direction)
        f_y, f_z = polar_to_cartesian_force(PolarForce(f_r=1.0, f_phi=0.0), pos, direction)
        assert f_y == pytest.approx(1.5 / pos.r)
        assert f_z == pytest.approx(1.5 / pos.r)

    def test_degenerate_position(self) -> None:
        """It should refuse to build a basis at r=0."""
        with pytest.raises(DegeneratePositionError):
            polar_to_cartesian_force(PolarForce(f_r=1.0, f_phi=0.0), WirePolar(r=0.0, phi=0.0))

    @pytest.mark.parametrize(("r", "phi"), [(-1e-6, 0.0), (math.nan, 0.0), (math.inf, 0.0), (1e-6, math.nan)])
    def test_invalid_polar_position(self, r: float, phi: float) -> None:
        """It should reject a negative or non-finite distance and a non-finite angle."""
        with pytest.raises(ValidationException):
            WirePolar(r=r, phi=phi)

    def test_angle_read_modulo_full_turn(self) -> None:
        """It should give the same force for phi and phi + 2 pi."""
        base = _unit_force(3.0, 0.4)
        turned = _unit_force(3.0, 0.4 + 2.0 * math.pi)
        assert turned.f_r == pytest.approx(base.f_r, rel=1e-12)
        assert turned.f_phi == pytest.approx(base.f_phi, rel=1e-12)


class TestSuperposition:
    """Tests for multi-wire superposition."""

    def test_matches_sum_of_single_wires(self) -> None:
        """It should equal the sum of the single-wire forces."""
        rng = np.random.default_rng(7)
        field_config = FieldConfig(flux_density=0.2, direction=(math.cos(0.3), math.sin(0.3)))
        h0 = field_config.h0
        k = effective_contrast(NICKEL, h0)
        centers = tuple((float(y), float(z)) for y, z in zip(np.arange(16) * 10e-6, rng.uniform(-5e-6, 5e-6, 16)))
        array = WireArray(half_width=1e-6, material=NICKEL, centers=centers)
        point = (37e-6, 20e-6)
        expected_y = expected_z = 0.0
        for center in centers:
            pos = cartesian_to_polar(point, center, field_config.direction)
            force = wire_force_polar(pos, RBC_CELL, half_width=1e-6, k_eff=k, h0=h0)
            f_y, f_z = polar_to_cartesian_force(force, pos, field_config.direction)
            expected_y += f_y
            expected_z += f_z
        f_y, f_z = superpose_forces(point, RBC_CELL, array, field_config)
        scale = math.hypot(expected_y, expected_z)
        assert abs(f_y - expected_y) <= 1e-12 * scale
        assert abs(f_z - expected_z) <= 1e-12 * scale

    def test_mirror_pair_cancels_across_field(self) -> None:
        """It should cancel the lateral force midway between two mirror-image wires."""
        array = WireArray(half_width=1e-6, material=NICKEL, centers=((-10e-6, 1e-6), (10e-6, 1e-6)))
        field_config = FieldConfig(flux_density=0.2)
        for z in (3e-6, 8e-6, 20e-6, 45e-6):
            f_y, f_z = superpose_forces((0.0, z), RBC_CELL, array, field_config)
            assert f_z != 0.0
            assert abs(f_y) <= 1e-12 * abs(f_z)

    def test_empty_array(self) -> None:
        """It should return zero force without wires."""
        array = WireArray(half_width=1e-6, material=NICKEL, centers=())
        assert superpose_forces((1e-6, 1e-6), RBC_CELL, array, FieldConfig(flux_density=0.2)) == (0.0, 0.0)

    def test_contact_reports_first_wire(self) -> None:
        """It should raise ContactWithWire with the index of the touched wire."""
        array = WireArray(half_width=1e-6, material=NICKEL, centers=((0.0, 0.0), (10e-6, 0.0)))
        with pytest.raises(ContactWithWire) as err:
            superpose_forces((10.5e-6, 0.0), RBC_CELL, array, FieldConfig(flux_density=0.2))
        assert err.value.wire_index == 1


class TestWireArray:
    """Tests for wire layout validation."""

    def test_lattice(self) -> None:
        """It should expand a lattice into explicit centers."""
        array = WireArray.from_lattice(
            half_width=1e-6, material=NICKEL, pitch=10e-6, count=3, offset=5e-6, height=1e-6
        )
        assert len(array) == 3
        assert array.centers[2] == pytest.approx((25e-6, 1e-6))

    def test_overlapping_wires_rejected(self) -> None:
        """It should reject wires closer than 2a."""
        with pytest.raises(ValidationException):
            WireArray(half_width=1e-6, material=NICKEL, centers=((0.0, 0.0), (1.5e-6, 0.0)))

    def test_field_direction_must_be_unit(self) -> None:
        """It should reject a non-unit field direction."""
        with pytest.raises(ValidationException):
            FieldConfig(flux_density=0.2, direction=(1.0, 1.0))


class TestForceMap:
    """Tests for force_map."""

    def test_grid_rows(self) -> None:
        """It should return one row per (r, phi) pair in radius-major order."""
        array = WireArray(half_width=1e-6, material=NICKEL, centers=((0.0, 0.0),))
        rows = force_map(RBC_CELL, array, FieldConfig(flux_density=0.2), radii=[2e-6, 3e-6], angles=[0.0, 1.0, 2.0])
        assert len(rows) == 6
        assert [row[:2] for row in rows[:3]] == [(2e-6, 0.0), (2e-6, 1.0), (2e-6, 2.0)]
        assert rows[0][2] < 0
