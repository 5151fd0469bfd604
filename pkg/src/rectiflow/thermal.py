"""Bosonic reservoirs: occupations, jump rates and the coupling asymmetry."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NonPositiveEnergy

# regime boundaries of the occupation-number evaluation (in units of E/T)
_LARGE_X = 30.0
_SMALL_X = 1e-6


class Orientation(enum.Enum):
    HOT_LEFT = "hot_left"
    HOT_RIGHT = "hot_right"

    def flipped(self) -> "Orientation":
        return Orientation.HOT_RIGHT if self is Orientation.HOT_LEFT else Orientation.HOT_LEFT


@dataclass(frozen=True)
class ThermalScenario:
    T_h: float
    T_c: float
    orientation: Orientation = Orientation.HOT_LEFT

    def __post_init__(self):
        if not (self.T_h > 0 and self.T_c > 0):
            raise InvalidParameter(f"temperatures must be positive, got T_h={self.T_h}, T_c={self.T_c}")
        if self.T_h < self.T_c:
            raise InvalidParameter("T_h must be >= T_c; use the orientation flag to reverse the bias")

    @property
    def T_left(self) -> float:
        return self.T_h if self.orientation is Orientation.HOT_LEFT else self.T_c

    @property
    def T_right(self) -> float:
        return self.T_c if self.orientation is Orientation.HOT_LEFT else self.T_h

    def temperature(self, side: str) -> float:
        return self.T_left if side == "L" else self.T_right

    def reversed(self) -> "ThermalScenario":
        return ThermalScenario(self.T_h, self.T_c, self.orientation.flipped())


@dataclass(frozen=True)
class CouplingConfig:
    gamma: float
    chi: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidParameter(f"gamma must be positive, got {self.gamma}")
        if not abs(self.chi) <= 1:
            raise InvalidParameter(f"chi must lie in [-1, 1], got {self.chi}")

    def side(self, side: str) -> float:
        gl, gr = side_couplings(self)
        return gl if side == "L" else gr


def side_couplings(c: CouplingConfig) -> tuple[float, float]:
    """Left and right coupling rates ``(gamma (1 - chi), gamma (1 + chi))``."""
    return c.gamma * (1.0 - c.chi), c.gamma * (1.0 + c.chi)


def bose_einstein(energy, temperature):
    """Bose-Einstein occupation ``1 / (exp(E/T) - 1)``.

    Works on scalars and arrays. Large ``E/T`` is evaluated through
    ``exp(-E/T)`` so it underflows to zero instead of overflowing; tiny
    ``E/T`` uses the Laurent series ``T/E - 1/2 + E/(12 T)``.
    """
    e = np.asarray(energy, dtype=float)
    t = np.asarray(temperature, dtype=float)
    if np.any(~(e > 0)):
        raise NonPositiveEnergy(f"transition energy must be positive, got {np.min(e)}")
    if np.any(~(t > 0)):
        raise InvalidParameter(f"temperature must be positive, got {np.min(t)}")
    x = e / t
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        big = np.exp(-x) / -np.expm1(-x)
        mid = 1.0 / np.expm1(x)
        small = 1.0 / x - 0.5 + x / 12.0
    out = np.where(x > _LARGE_X, big, np.where(x < _SMALL_X, small, mid))
    return float(out) if out.ndim == 0 else out


def rates(energy, temperature, gamma_side):
    """Absorption and emission rates ``(g n_B, g (1 + n_B))`` for one reservoir."""
    g = np.asarray(gamma_side, dtype=float)
    if np.any(g < 0):
        raise InvalidParameter(f"coupling rate must be nonnegative, got {np.min(g)}")
    n = bose_einstein(energy, temperature)
    up, down = g * n, g * (1.0 + n)
    if np.ndim(up) == 0:
        return float(up), float(down)
    return up, down
