"""Potentials, the discrete tridiagonal H0 and its eigenbasis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import ConvergenceFailure, InsufficientLevels
from .lattice import SpatialGrid, WaveField, normalize

__all__ = [
    "Potential",
    "Eigenbasis",
    "build_h0_tridiagonal",
    "solve_eigenpairs",
    "eigenbasis",
    "harmonic_eigenstate_analytic",
    "thermal_average_energy",
    "HARMONIC",
    "LINEAR",
]

HARMONIC = "harmonic"
LINEAR = "linear"
TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class Potential:
    """External potential; harmonic ``K x^2/2``, linear ``K_l |x|/2`` or tabulated."""

    kind: str = HARMONIC
    strength: float = 1.0
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (HARMONIC, LINEAR, TABULATED):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == TABULATED and self.table is None:
            raise ValueError("tabulated potential needs a value table")

    @classmethod
    def harmonic(cls, K: float = 1.0) -> "Potential":
        return cls(HARMONIC, K)

    @classmethod
    def linear(cls, K_l: float = 1.0) -> "Potential":
        return cls(LINEAR, K_l)

    @classmethod
    def tabulated(cls, values) -> "Potential":
        return cls(TABULATED, 1.0, np.asarray(values, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == HARMONIC:
            return self.strength * x**2 / 2
        if self.kind == LINEAR:
            return self.strength * np.abs(x) / 2
        raise TypeError("a tabulated potential has no closed form; use values(grid)")

    def values(self, grid: SpatialGrid) -> np.ndarray:
        if self.kind == TABULATED:
            if self.table.shape != (grid.n_points,):
                raise ValueError("tabulated potential does not match grid")
            return self.table
        return self(grid.x)

    def __eq__(self, other):
        if not isinstance(other, Potential):
            return NotImplemented
        if self.kind != other.kind or self.strength != other.strength:
            return False
        if self.table is None or other.table is None:
            return self.table is other.table
        return np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.kind, self.strength))


@dataclass(frozen=True, eq=False)
class Eigenbasis:
    grid: SpatialGrid
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)  # shape (n_levels, n_points), real

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def states(self) -> list[WaveField]:
        return [WaveField(self.grid, v) for v in self.vectors]

    def project(self, amps: np.ndarray) -> np.ndarray:
        """Weights |<psi_n|psi>|^2 for every level (trapezoid rule)."""
        c = (self.vectors * self.grid.dx) @ amps
        return np.abs(c) ** 2

    def truncated(self, n_levels: int) -> "Eigenbasis":
        return Eigenbasis(self.grid, self.energies[:n_levels], self.vectors[:n_levels])


def build_h0_tridiagonal(grid: SpatialGrid, pot: Potential):
    """Return ``(diagonal, off_diagonal)`` of the discrete H0 (dimensionless units)."""
    dx = grid.dx
    diag = 1.0 / dx**2 + pot.values(grid)
    off = np.full(grid.n_points - 1, -0.5 / dx**2)
    return diag, off


def solve_eigenpairs(h0, n_levels: int, grid: SpatialGrid) -> Eigenbasis:
    """Lowest ``n_levels`` eigenpairs of ``h0`` with the wave field pinned at both walls."""
    diag, off = h0
    n = len(diag)
    if n != grid.n_points:
        raise ValueError("matrix size does not match the grid")
    if n_levels < 1 or n_levels > n // 4:
        raise ValueError(f"n_levels must be in [1, {n // 4}], got {n_levels}")
    try:
        w, v = eigh_tridiagonal(
            diag[1:-1], off[1:-1], select="i", select_range=(0, n_levels - 1)
        )
    except LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if np.any(np.diff(w) <= 0):
        raise ConvergenceFailure("eigenvalues are not strictly ascending")
    vectors = np.zeros((n_levels, n))
    vectors[:, 1:-1] = v.T
    vectors /= np.sqrt(grid.dx * np.sum(vectors**2, axis=1))[:, None]
    # sign convention: first lobe above 1e-3 of the peak is positive
    for vec in vectors:
        big = np.flatnonzero(np.abs(vec) > 1e-3 * np.abs(vec).max())
        if vec[big[0]] < 0:
            vec *= -1
    return Eigenbasis(grid, w, vectors)


def eigenbasis(grid: SpatialGrid, pot: Potential, n_levels: int = 40) -> Eigenbasis:
    return solve_eigenpairs(build_h0_tridiagonal(grid, pot), n_levels, grid)


def harmonic_eigenstate_analytic(n: int, grid: SpatialGrid) -> WaveField:
    """Hermite function of order ``n`` (dimensionless, width 1), normalized on the grid."""
    if not 0 <= n <= 30:
        raise ValueError("n must lie in [0, 30]")
    x = grid.x
    # normalized Hermite-function recurrence, stable for moderate n
    h_prev = np.zeros_like(x)
    h = np.pi**-0.25 * np.exp(-x**2 / 2)
    for k in range(n):
        h, h_prev = np.sqrt(2.0 / (k + 1)) * x * h - np.sqrt(k / (k + 1)) * h_prev, h
    return normalize(WaveField(grid, h.astype(complex)))


def thermal_average_energy(basis: Eigenbasis, T: float, tail_tol: float = 1e-4) -> float:
    """Boltzmann mean of the supplied energies at temperature ``T``."""
    E = np.asarray(basis.energies, dtype=float)
    if T <= 0:
        raise ValueError("T must be positive")
    w = np.exp(-(E - E[0]) / T)
    Z = w.sum()
    num = (E * w).sum()
    # the last level stands in for the omitted tail
    if w[-1] / Z > tail_tol or abs(E[-1] * w[-1]) / abs(num) > tail_tol:
        raise InsufficientLevels(
            f"level {len(E) - 1} still carries {w[-1] / Z:.2e} of the weight at T={T}"
        )
    return float(num / Z)


def boltzmann_weights(energies, T: float) -> np.ndarray:
    E = np.asarray(energies, dtype=float)
    w = np.exp(-(E - E[0]) / T)
    return w / w.sum()


def parity_overlap(vec: np.ndarray) -> float:
    """<psi|P psi> for a real vector on a grid symmetric about x = 0."""
    return float(np.dot(vec, vec[::-1]) / np.dot(vec, vec))

