"""Crank-Nicolson time stepping of the Schroedinger-Langevin equation.

Within a step the effective Hamiltonian

    H(t) = H0 + A (S - <S>) - x F_t

is built once from psi(t) (S and <S> frozen) and the implicit system
(1 + i H dt/2) psi(t+dt) = (1 - i H dt/2) psi(t) is solved with the Thomas
algorithm. H(t) is Hermitian for frozen S, so every step is unitary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import NormViolation, SolverBreakdown
from .lattice import WaveField, trapezoid_weights
from .phase import DEFAULT_GUARD, POLAR, prescription_code
from .spectrum import Potential

__all__ = ["SLEStepConfig", "effective_hamiltonian", "step", "evolve", "thomas_solve"]


@dataclass(frozen=True)
class SLEStepConfig:
    dt: float = 0.01
    A: float = 0.0
    prescription: str = POLAR
    potential: Potential = field(default_factory=Potential.harmonic)
    guard: float = DEFAULT_GUARD
    norm_tol: float = 1e-8

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.A < 0:
            raise ValueError("A must be non-negative")
        prescription_code(self.prescription)


def effective_hamiltonian(field: WaveField, cfg: SLEStepConfig, F_t: float):
    """Diagonal potential of H(t) and the kinetic stencil ``(diag, off)``.

    The full operator is ``diag(potential) + kinetic``; kinetic has
    1/dx^2 on the diagonal and -1/(2 dx^2) off it.
    """
    grid = field.grid
    n = grid.n_points
    fric = np.empty(n)
    K.friction_into(field.amps, prescription_code(cfg.prescription), cfg.A,
                    grid.midpoint, cfg.guard, trapezoid_weights(grid), np.empty(n), fric)
    pot = cfg.potential.values(grid) + fric - grid.x * F_t
    kinetic = (np.full(n, 1.0 / grid.dx**2), np.full(n - 1, -0.5 / grid.dx**2))
    return pot, kinetic


def thomas_solve(lower, diag, upper, rhs):
    """Solve a (complex) tridiagonal system by forward elimination and back substitution."""
    n = len(diag)
    cp = np.empty(n, dtype=complex)
    dp = np.empty(n, dtype=complex)
    cp[0] = upper[0] / diag[0] if n > 1 else 0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i - 1] * cp[i - 1]
        if abs(m) < 1e-300:
            raise SolverBreakdown(f"pivot {abs(m):.2e} at row {i}")
        if i < n - 1:
            cp[i] = upper[i] / m
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / m
    out = np.empty(n, dtype=complex)
    out[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


def step(field: WaveField, cfg: SLEStepConfig, F_t: float, t: float = 0.0) -> WaveField:
    """Advance ``field`` by one step of ``cfg.dt`` with the force held at ``F_t``.

    ``t`` only labels the step; H(t) depends on time through ``F_t`` alone.
    """
    grid = field.grid
    v, _ = effective_hamiltonian(field, cfg, F_t)
    n = grid.n_points
    out = np.empty(n, dtype=complex)
    pivot = K.cn_step(field.amps, v, grid.dx, cfg.dt,
                      np.empty(n, dtype=complex), np.empty(n, dtype=complex), out)
    if pivot < 1e-300:
        raise SolverBreakdown(f"pivot magnitude {pivot:.2e} at t={t}")
    w = trapezoid_weights(grid)
    before = K.norm2(field.amps, w)
    after = K.norm2(out, w)
    if abs(after - before) > cfg.norm_tol:
        raise NormViolation(f"norm moved by {after - before:.2e} at t={t}")
    return WaveField(grid, out)


@dataclass
class Trajectory:
    times: np.ndarray
    weights: np.ndarray  # (n_records, n_levels)
    energy: np.ndarray
    norm: np.ndarray
    final: WaveField
    max_step_drift: float
    status: int
    steps_done: int


def evolve(field: WaveField, cfg: SLEStepConfig, forces, basis=None,
           stride: int = 1) -> Trajectory:
    """Run ``len(forces)`` steps in compiled code, recording every ``stride`` steps.

    ``basis`` (an Eigenbasis) selects the levels whose weights are recorded.
    A failing realization is reported through ``status`` rather than raised.
    """
    grid = field.grid
    forces = np.ascontiguousarray(forces, dtype=float)
    n_steps = len(forces)
    if n_steps % stride:
        raise ValueError("stride must divide the number of steps")
    n_rec = n_steps // stride + 1
    vecs = np.zeros((0, grid.n_points)) if basis is None else basis.vectors
    w_out = np.full((n_rec, len(vecs)), np.nan)
    e_out = np.full(n_rec, np.nan)
    n_out = np.full(n_rec, np.nan)
    status, done, drift, psi = K.run_trajectory(
        field.amps, cfg.potential.values(grid), grid.x, trapezoid_weights(grid),
        grid.dx, cfg.dt, float(cfg.A), prescription_code(cfg.prescription),
        grid.midpoint, cfg.guard, forces, stride, np.ascontiguousarray(vecs),
        cfg.norm_tol, w_out, e_out, n_out)
    times = np.arange(n_rec) * stride * cfg.dt
    return Trajectory(times, w_out, e_out, n_out, WaveField(grid, psi), drift, status, done)
