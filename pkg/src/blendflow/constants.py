"""Species-level physical constants for natural gas / hydrogen blends."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class GasConstants:
    """Physical constants of the two gas species and the compression cost factor.

    Wave speeds are isothermal sound speeds [m/s], calorific values are per
    unit mass [MJ/kg], and ``eta`` converts compressor power to an operating
    cost [$/kW-s].  ``zeta_ng`` is the CO2-to-natural-gas molecular weight
    ratio used in the emissions offset.
    """

    a_ng: float = 370.0            # wave speed of natural gas [m/s]
    a_h2: float = 1090.0           # wave speed of hydrogen [m/s]
    kappa_ng: float = 1.304        # specific heat capacity ratio, NG
    kappa_h2: float = 1.405        # specific heat capacity ratio, H2
    g_ng: float = 0.5537           # specific gravity, NG
    g_h2: float = 0.0696           # specific gravity, H2
    r_ng: float = 44.2             # calorific value, NG [MJ/kg]
    r_h2: float = 141.8            # calorific value, H2 [MJ/kg]
    zeta_ng: float = 44.0 / 18.0   # CO2 / NG molecular weight ratio
    t_suction: float = 288.7       # compressor suction temperature [K]
    m_ng: float = 0.01737          # molar mass, NG [kg/mol]
    m_h2: float = 0.002016         # molar mass, H2 [kg/mol]
    r_universal: float = 8.314     # universal gas constant [J/mol/K]
    eta: float = 0.13 / 3600.0     # compression cost factor [$/kW-s]

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0.0:
                raise ValueError(f"gas constant {f.name} must be positive")
        if self.a_h2 <= self.a_ng:
            raise ValueError("hydrogen wave speed must exceed natural gas wave speed")
        if self.r_h2 <= self.r_ng:
            raise ValueError("hydrogen calorific value must exceed natural gas calorific value")


DEFAULT_GAS_CONSTANTS = GasConstants()
