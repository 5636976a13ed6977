"""Physical constants (2019 SI exact values) and power-unit helpers."""

from __future__ import annotations

import math

# 2019 SI redefinition: h, e, k_B are exact.
PLANCK = 6.62607015e-34         # J s
HBAR = PLANCK / (2.0 * math.pi)  # J s
BOLTZMANN = 1.380649e-23        # J / K
ELEMENTARY_CHARGE = 1.602176634e-19  # C


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power level in dBm to watts. -30 dBm -> 1e-6 W exactly."""
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    """Convert watts to dBm. Requires p_watts > 0."""
    if p_watts <= 0.0:
        raise ValueError(f"p_watts must be > 0, got {p_watts}")
    return 10.0 * math.log10(p_watts / 1e-3)
