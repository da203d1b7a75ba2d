"""Non-dimensionalization of the governing equations.

Pressures scale by a nominal pressure ``p0``, lengths by ``l0``, areas by
``area0`` and mass flows by ``phi0 = rho0 * u0 * area0`` with
``rho0 = p0 / a0^2``.  The wave-speed scale ``a0`` is the geometric mean of
the two species' sound speeds and the velocity scale is ``ceil(a0)/300``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import GasConstants
from .network import Network


@dataclass(frozen=True)
class ScalingConfig:
    p0: float          # pressure scale [Pa]
    l0: float          # length scale [m]
    a0_sq_ref: float   # wave-speed scale a0^2 [m^2/s^2]
    area0: float       # area scale [m^2]
    u0: float          # velocity scale [m/s]

    def __post_init__(self):
        for name in ("p0", "l0", "a0_sq_ref", "area0", "u0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"scaling constant {name} must be positive")

    @property
    def rho0(self) -> float:
        """Density scale [kg/m^3]."""
        return self.p0 / self.a0_sq_ref

    @property
    def phi0(self) -> float:
        """Mass flow scale [kg/s]."""
        return self.rho0 * self.u0 * self.area0


def default_scaling(network: Network, gc: GasConstants | None = None) -> ScalingConfig:
    """Scaling implied by a network: p0 from its slack pressure unless overridden."""
    gc = gc or network.gas_constants
    a0_sq = gc.a_ng * gc.a_h2
    a0 = math.sqrt(a0_sq)
    overrides = network.scaling_overrides
    slack = network.slack_junction_ids
    p0 = overrides.get("p0", network.junctions[slack[0]].slack_pressure if slack else 1e6)
    return ScalingConfig(
        p0=float(p0),
        l0=float(overrides.get("l0", 5000.0)),
        a0_sq_ref=float(overrides.get("a0_sq_ref", a0_sq)),
        area0=float(overrides.get("area0", 1.0)),
        u0=float(overrides.get("u0", math.ceil(a0) / 300.0)),
    )
