"""Nonlinear quadruple-tank dynamics and their linearization.

Units are cm, s and V throughout. Tanks 1 and 2 are the lower (measured)
tanks; tank 3 drains into tank 1 and tank 4 drains into tank 2. Pump 1
feeds tanks 1 and 4, pump 2 feeds tanks 2 and 3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, InvalidInputError, OverflowEquilibriumError

__all__ = [
    "PlantParams",
    "OperatingPoint",
    "LinearModel",
    "NOMINAL_OPERATING_POINT",
    "derivatives",
    "mass_balance_residual",
    "equilibrium",
    "time_constants",
    "linearize",
    "measure",
]


@dataclass(frozen=True)
class PlantParams:
    tank_area: tuple = (28.0, 32.0, 28.0, 32.0)
    orifice_area: tuple = (0.071, 0.057, 0.071, 0.057)
    valve_split_1: float = 0.70
    valve_split_2: float = 0.60
    pump_gain_1: float = 3.33
    pump_gain_2: float = 3.35
    sensor_gain: float = 0.50
    gravity: float = 981.0
    tank_height: float = 20.0
    pump_voltage_range: tuple = (0.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "tank_area", tuple(float(a) for a in self.tank_area))
        object.__setattr__(self, "orifice_area", tuple(float(a) for a in self.orifice_area))
        object.__setattr__(
            self, "pump_voltage_range", tuple(float(v) for v in self.pump_voltage_range)
        )
        if len(self.tank_area) != 4 or len(self.orifice_area) != 4:
            raise InvalidInputError("tank_area and orifice_area need 4 entries each")
        if len(self.pump_voltage_range) != 2:
            raise InvalidInputError("pump_voltage_range needs [V_min, V_max]")
        positive = {
            "tank_area": min(self.tank_area),
            "orifice_area": min(self.orifice_area),
            "pump_gain_1": self.pump_gain_1,
            "pump_gain_2": self.pump_gain_2,
            "sensor_gain": self.sensor_gain,
            "gravity": self.gravity,
            "tank_height": self.tank_height,
        }
        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be strictly positive, got {value}")
        for name in ("valve_split_1", "valve_split_2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise InvalidInputError(f"{name} must lie strictly inside (0, 1), got {value}")
        v_min, v_max = self.pump_voltage_range
        if not v_min < v_max:
            raise InvalidInputError("pump_voltage_range must satisfy V_min < V_max")

    def _kernel_constants(self):
        # flat tuple consumed by _rates; avoids attribute lookups in the integrator loop
        A1, A2, A3, A4 = self.tank_area
        a1, a2, a3, a4 = self.orifice_area
        g1, g2 = self.valve_split_1, self.valve_split_2
        k1, k2 = self.pump_gain_1, self.pump_gain_2
        return (
            A1, A2, A3, A4, a1, a2, a3, a4,
            g1 * k1, g2 * k2, (1.0 - g2) * k2, (1.0 - g1) * k1,
            2.0 * self.gravity,
        )


@dataclass(frozen=True)
class OperatingPoint:
    levels0: tuple
    voltages0: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels0", tuple(float(h) for h in self.levels0))
        object.__setattr__(self, "voltages0", tuple(float(v) for v in self.voltages0))
        if len(self.levels0) != 4 or len(self.voltages0) != 2:
            raise InvalidInputError("operating point needs 4 levels and 2 voltages")
        if not all(h > 0 for h in self.levels0):
            raise DomainError(f"operating-point levels must be strictly positive, got {self.levels0}")


NOMINAL_OPERATING_POINT = OperatingPoint((12.4, 12.7, 1.8, 1.4), (3.0, 3.0))


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    operating_point: OperatingPoint
    time_constants: np.ndarray = field(repr=False)


def _rates(c, h1, h2, h3, h4, v1, v2):
    A1, A2, A3, A4, a1, a2, a3, a4, q1, q2, q3, q4, two_g = c
    s1 = math.sqrt(two_g * h1) if h1 > 0.0 else 0.0
    s2 = math.sqrt(two_g * h2) if h2 > 0.0 else 0.0
    s3 = math.sqrt(two_g * h3) if h3 > 0.0 else 0.0
    s4 = math.sqrt(two_g * h4) if h4 > 0.0 else 0.0
    return (
        (-a1 * s1 + a3 * s3 + q1 * v1) / A1,
        (-a2 * s2 + a4 * s4 + q2 * v2) / A2,
        (-a3 * s3 + q3 * v2) / A3,
        (-a4 * s4 + q4 * v1) / A4,
    )


def _as_finite(values, size, name):
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size != size:
        raise InvalidInputError(f"{name} must have {size} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values: {arr}")
    return arr


def derivatives(params, state, pump):
    """Level rates dh/dt in cm/s for levels ``state`` and pump voltages ``pump``.

    Negative levels are treated as empty tanks inside the outflow square root.
    """
    h = _as_finite(state, 4, "state")
    v = _as_finite(pump, 2, "pump")
    return np.array(_rates(params._kernel_constants(), *h, *v))


def mass_balance_residual(params, state, pump, rates):
    """Stored-volume rate minus net external flow; zero up to rounding."""
    h = np.maximum(_as_finite(state, 4, "state"), 0.0)
    v = _as_finite(pump, 2, "pump")
    rates = _as_finite(rates, 4, "rates")
    two_g = 2.0 * params.gravity
    stored = float(np.dot(params.tank_area, rates))
    inflow = params.pump_gain_1 * v[0] + params.pump_gain_2 * v[1]
    outflow = params.orifice_area[0] * math.sqrt(two_g * h[0]) + params.orifice_area[1] * math.sqrt(
        two_g * h[1]
    )
    return stored - (inflow - outflow)


def equilibrium(params, pump):
    """Steady-state levels for constant pump voltages.

    Upper tanks are solved first since they only see their own pump share;
    the lower tanks then balance pump inflow plus upper-tank drainage.
    """
    v1, v2 = _as_finite(pump, 2, "pump")
    if v1 < 0 or v2 < 0:
        raise DomainError(f"equilibrium needs non-negative voltages, got {(v1, v2)}")
    a1, a2, a3, a4 = params.orifice_area
    g1, g2 = params.valve_split_1, params.valve_split_2
    k1, k2 = params.pump_gain_1, params.pump_gain_2
    two_g = 2.0 * params.gravity
    q3 = (1.0 - g2) * k2 * v2
    q4 = (1.0 - g1) * k1 * v1
    levels = (
        ((g1 * k1 * v1 + q3) / a1) ** 2 / two_g,
        ((g2 * k2 * v2 + q4) / a2) ** 2 / two_g,
        (q3 / a3) ** 2 / two_g,
        (q4 / a4) ** 2 / two_g,
    )
    for i, level in enumerate(levels):
        if level > params.tank_height:
            raise OverflowEquilibriumError(i + 1, level, params.tank_height)
    return np.array(levels)


def time_constants(params, levels0):
    h0 = _as_finite(levels0, 4, "levels0")
    if np.any(h0 <= 0):
        raise DomainError(f"time constants need strictly positive levels, got {h0}")
    return np.asarray(params.tank_area) / np.asarray(params.orifice_area) * np.sqrt(
        2.0 * h0 / params.gravity
    )


def linearize(params, op_point=NOMINAL_OPERATING_POINT):
    """Small-signal model about ``op_point`` in deviation variables x = h - h0, u = v - v0."""
    T = time_constants(params, op_point.levels0)
    A1, A2, A3, A4 = params.tank_area
    g1, g2 = params.valve_split_1, params.valve_split_2
    k1, k2 = params.pump_gain_1, params.pump_gain_2
    A = np.diag(-1.0 / T)
    A[0, 2] = A3 / (A1 * T[2])
    A[1, 3] = A4 / (A2 * T[3])
    B = np.zeros((4, 2))
    B[0, 0] = g1 * k1 / A1
    B[1, 1] = g2 * k2 / A2
    B[2, 1] = (1.0 - g2) * k2 / A3
    B[3, 0] = (1.0 - g1) * k1 / A4
    C = np.zeros((2, 4))
    C[0, 0] = C[1, 1] = params.sensor_gain
    return LinearModel(A, B, C, op_point, T)


def measure(params, state):
    h = np.asarray(state, dtype=float)
    return params.sensor_gain * h[:2].copy()
