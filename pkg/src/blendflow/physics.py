"""Pure physical formulas for blended-gas pipeline flow.

All blend properties combine the two species linearly in the hydrogen mass
fraction ``gamma``.  Functions raise ``ValueError`` when gamma leaves [0, 1]
rather than clamping: out-of-range values indicate upstream bound violations
that must surface.
"""

from __future__ import annotations

import math

from .constants import DEFAULT_GAS_CONSTANTS, GasConstants

__all__ = [
    "sound_speed_sq",
    "blend_kappa",
    "blend_gravity",
    "blend_calorific",
    "weymouth_residual",
    "compressor_power",
    "carbon_offset",
]

# Coefficient of the adiabatic compression power formula (with suction
# temperature in K and mass flow in kg/s the result is interpreted as kW).
POWER_COEFF = 286.76


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"hydrogen mass fraction {gamma} outside [0, 1]")


def sound_speed_sq(gamma: float, gc: GasConstants = DEFAULT_GAS_CONSTANTS) -> float:
    """Squared sound speed of the blend [m^2/s^2], linear in gamma."""
    _check_gamma(gamma)
    return gamma * gc.a_h2**2 + (1.0 - gamma) * gc.a_ng**2


def blend_kappa(gamma: float, gc: GasConstants = DEFAULT_GAS_CONSTANTS) -> float:
    """Specific heat capacity ratio of the blend."""
    _check_gamma(gamma)
    return gc.kappa_h2 * gamma + gc.kappa_ng * (1.0 - gamma)


def blend_gravity(gamma: float, gc: GasConstants = DEFAULT_GAS_CONSTANTS) -> float:
    """Specific gravity of the blend."""
    _check_gamma(gamma)
    return gc.g_h2 * gamma + gc.g_ng * (1.0 - gamma)


def blend_calorific(gamma: float, gc: GasConstants = DEFAULT_GAS_CONSTANTS) -> float:
    """Calorific value of the blend [MJ/kg]."""
    _check_gamma(gamma)
    return gc.r_h2 * gamma + gc.r_ng * (1.0 - gamma)


def weymouth_residual(
    p_from: float,
    p_to: float,
    phi: float,
    gamma: float,
    pipe,
    gc: GasConstants = DEFAULT_GAS_CONSTANTS,
) -> float:
    """Residual of the steady-state pipe pressure-drop relation [Pa^2].

    Returns ``p_from^2 - p_to^2 - (lambda L / (D A^2)) * V(gamma) * phi|phi|``;
    zero when the pipe equation holds.  ``pipe`` needs attributes ``length``,
    ``diameter``, ``area`` and ``friction`` (SI units).
    """
    if min(pipe.length, pipe.diameter, pipe.area, pipe.friction) <= 0.0:
        raise ValueError(f"pipe {getattr(pipe, 'id', '?')} has non-positive parameters")
    coeff = pipe.friction * pipe.length / (pipe.diameter * pipe.area**2)
    return p_from**2 - p_to**2 - coeff * sound_speed_sq(gamma, gc) * phi * abs(phi)


def compressor_power(
    alpha: float,
    phi: float,
    gamma: float,
    gc: GasConstants = DEFAULT_GAS_CONSTANTS,
) -> float:
    """Adiabatic power drawn by a compressor at boost ratio ``alpha`` [kW].

    ``phi`` is the mass flow through the machine [kg/s]; the blend heat
    capacity ratio and specific gravity are evaluated at ``gamma``.
    """
    if alpha < 1.0:
        raise ValueError(f"boost ratio {alpha} below 1")
    if phi < 0.0:
        raise ValueError(f"compressor flow {phi} negative")
    kappa = blend_kappa(gamma, gc)
    grav = blend_gravity(gamma, gc)
    m_exp = (kappa - 1.0) / kappa
    head = POWER_COEFF * (kappa - 1.0) * gc.t_suction / (grav * kappa)
    return head * (alpha**m_exp - 1.0) * abs(phi)


def carbon_offset(
    d: float,
    gamma: float,
    gc: GasConstants = DEFAULT_GAS_CONSTANTS,
) -> float:
    """CO2 mass rate avoided by the hydrogen share of a delivery [kg/s].

    The delivered hydrogen displaces natural gas energy, so the offset scales
    with the calorific ratio of the species.
    """
    if d < 0.0:
        raise ValueError(f"withdrawal {d} negative")
    _check_gamma(gamma)
    return d * gamma * (gc.r_h2 / gc.r_ng) * gc.zeta_ng


def max_pipe_flow(p_from: float, p_to: float, gamma: float, pipe,
                  gc: GasConstants = DEFAULT_GAS_CONSTANTS) -> float:
    """Flow that produces exactly the pressure drop ``p_from -> p_to`` [kg/s]."""
    coeff = pipe.friction * pipe.length / (pipe.diameter * pipe.area**2)
    drop = p_from**2 - p_to**2
    if drop < 0.0:
        raise ValueError("p_to exceeds p_from for a forward-flow pipe")
    return math.sqrt(drop / (coeff * sound_speed_sq(gamma, gc)))
