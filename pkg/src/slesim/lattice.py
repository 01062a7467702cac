"""Uniform 1D grid, complex wave fields and trapezoid-rule observables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, ZeroNorm

__all__ = [
    "SpatialGrid",
    "WaveField",
    "default_grid",
    "trapezoid_weights",
    "norm_squared",
    "normalize",
    "inner_product",
    "expectation_H0",
    "apply_h0",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on ``[x_min, x_max]`` with ``n_points`` nodes (end points included)."""

    x_min: float = -20.0
    x_max: float = 20.0
    n_points: int = 401

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError(f"n_points must be >= 16, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def midpoint(self) -> int:
        return (self.n_points - 1) // 2

    @classmethod
    def from_spacing(cls, x_min: float, x_max: float, dx: float) -> "SpatialGrid":
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(x_min, x_max, n)

    def refined(self, factor: int = 2) -> "SpatialGrid":
        """Same extent, ``factor`` times finer spacing."""
        return SpatialGrid(self.x_min, self.x_max, (self.n_points - 1) * factor + 1)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "dx": self.dx}


def default_grid() -> SpatialGrid:
    return SpatialGrid(-20.0, 20.0, 401)


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: SpatialGrid
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=np.complex128)
        if amps.shape != (self.grid.n_points,):
            raise ValueError(
                f"amps has shape {amps.shape}, grid expects ({self.grid.n_points},)"
            )
        object.__setattr__(self, "amps", amps)

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.amps.copy())

    def with_amps(self, amps) -> "WaveField":
        return WaveField(self.grid, amps)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


def trapezoid_weights(grid: SpatialGrid) -> np.ndarray:
    w = np.full(grid.n_points, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx
    return w


def _check_same_grid(a: WaveField, b: WaveField):
    if a.grid != b.grid:
        raise GridMismatch(f"{a.grid} != {b.grid}")


def norm_squared(field: WaveField) -> float:
    return float(trapezoid_weights(field.grid) @ field.density)


def normalize(field: WaveField) -> WaveField:
    n2 = norm_squared(field)
    if not n2 >= 1e-30:
        raise ZeroNorm(f"squared norm {n2:.3e} is below 1e-30")
    return field.with_amps(field.amps / np.sqrt(n2))


def inner_product(a: WaveField, b: WaveField) -> complex:
    """Trapezoid estimate of the integral of conj(a) * b."""
    _check_same_grid(a, b)
    return complex(trapezoid_weights(a.grid) @ (np.conj(a.amps) * b.amps))


def apply_h0(amps: np.ndarray, v: np.ndarray, dx: float) -> np.ndarray:
    """Apply the 3-point kinetic stencil plus ``v`` with hard walls at both ends."""
    out = (1.0 / dx**2 + v) * amps
    off = -0.5 / dx**2
    out[:-1] += off * amps[1:]
    out[1:] += off * amps[:-1]
    return out


def expectation_H0(field: WaveField, pot) -> float:
    v = pot.values(field.grid)
    h_psi = apply_h0(field.amps, v, field.grid.dx)
    return float(np.real(trapezoid_weights(field.grid) @ (np.conj(field.amps) * h_psi)))
