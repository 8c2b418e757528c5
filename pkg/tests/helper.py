"""Helpers for tests."""

from __future__ import annotations

from typing import Any

from magsep.const import MU_0, RBC_DEOXY_LABEL, WBC_LABEL, CaptureRule
from magsep.magnetics import CellMagnetics, FieldConfig, MagneticMaterial, WireArray
from magsep.transport import (
    CellSpecies,
    ChannelGeometry,
    ChannelScenario,
    FluidConfig,
    IntegratorSettings,
    SimulationLimits,
)

from tests import const

NICKEL = MagneticMaterial(mu_wire=600 * MU_0, mu_buffer=MU_0, saturation_magnetization=4.8e5)


def get_rbc(*, delta_chi: float = const.RBC_DELTA_CHI, radius: float = const.RBC_RADIUS) -> CellSpecies:
    """Return a deoxygenated red blood cell."""
    return CellSpecies(
        label=RBC_DEOXY_LABEL,
        magnetics=CellMagnetics(delta_chi=delta_chi, volume=const.RBC_VOLUME),
        hydrodynamic_radius=radius,
        density=const.RBC_DENSITY,
    )


def get_wbc() -> CellSpecies:
    """Return a white blood cell."""
    return CellSpecies(
        label=WBC_LABEL,
        magnetics=CellMagnetics(delta_chi=const.WBC_DELTA_CHI, volume=const.WBC_VOLUME),
        hydrodynamic_radius=const.WBC_RADIUS,
        density=const.WBC_DENSITY,
    )


def get_wires(*, count: int = 60, pitch: float = const.PITCH) -> WireArray:
    """Return a lattice of Ni wires on the channel floor."""
    return WireArray.from_lattice(
        half_width=const.HALF_WIDTH,
        material=NICKEL,
        pitch=pitch,
        count=count,
        offset=pitch / 2.0,
        height=const.HALF_WIDTH,
    )


def get_scenario(
    *,
    wires: WireArray | None = None,
    flux_density: float = const.FLUX_DENSITY,
    flow_rate: float = const.FLOW_RATE,
    length: float = const.LENGTH,
    gravity: bool = True,
    integrator: IntegratorSettings | None = None,
    limits: SimulationLimits | None = None,
    capture_rule: CaptureRule = CaptureRule.CONTACT,
) -> ChannelScenario:
    """Return a short channel scenario."""
    return ChannelScenario(
        channel=ChannelGeometry(depth=const.DEPTH, width=const.WIDTH, length=length),
        fluid=FluidConfig(viscosity=const.VISCOSITY, density=const.FLUID_DENSITY, flow_rate=flow_rate),
        field=FieldConfig(flux_density=flux_density),
        wires=get_wires() if wires is None else wires,
        integrator=integrator or IntegratorSettings(),
        limits=limits or SimulationLimits(capture_rule=capture_rule),
        gravity=gravity,
    )


def get_document(*, count: int = 3) -> dict[str, Any]:
    """Return a small scenario document with unit strings."""
    return {
        "version": 1,
        "channel": {"depth": "60 um", "width": "0.6 mm", "length": "0.5 mm"},
        "fluid": {"viscosity": "1 mPa*s", "density": "1000 kg/m^3", "flow_rate": "0.5 ml/h"},
        "field": {"flux_density": "0.2 T", "direction": [0, 1]},
        "wires": {
            "half_width": "1 um",
            "material": {"mu_wire": "600 mu0", "mu_buffer": "1 mu0", "saturation_magnetization": "480 kA/m"},
            "lattice": {"pitch": "10 um"},
        },
        "species": [
            {
                "label": RBC_DEOXY_LABEL,
                "delta_chi": const.RBC_DELTA_CHI,
                "volume": "179.59 um^3",
                "hydrodynamic_radius": "3.5 um",
                "density": "1100 kg/m^3",
            },
            {
                "label": WBC_LABEL,
                "delta_chi": const.WBC_DELTA_CHI,
                "volume": "904.78 um^3",
                "hydrodynamic_radius": "6 um",
                "density": "1070 kg/m^3",
            },
        ],
        "populations": [
            {"species": RBC_DEOXY_LABEL, "count": count},
            {"species": WBC_LABEL, "count": count},
        ],
        "limits": {"capture_rule": "magnetic_hold"},
        "master_seed": const.MASTER_SEED,
        "trajectory_cap": 2,
    }
