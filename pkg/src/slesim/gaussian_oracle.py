"""Gaussian wave-packet reduction of the harmonic SLE.

For V = x^2/2 the Ansatz psi = exp(i[alpha (x - x_cl)^2 + p_cl (x - x_cl) + gamma])
is closed under the polar-prescription SLE, giving ODEs (dimensionless units)

    alpha' = -2 alpha^2 - A Re(alpha) - 1/2
    x_cl'  = p_cl
    p_cl'  = -A p_cl + F - x_cl
    gamma' = i alpha + p_cl^2 / 2 + F x_cl - x_cl^2 / 2

Integrating them with the same step-constant force as the grid solver gives
an independent reference for the PDE propagator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import WidthCollapse
from .lattice import SpatialGrid, WaveField, normalize

__all__ = [
    "GaussianState",
    "OracleRun",
    "derivatives",
    "integrate",
    "render",
    "coherent_weights",
    "pinney_residual",
    "circle_invariant",
]


@dataclass(frozen=True)
class GaussianState:
    alpha: complex = 0.5j
    x_cl: float = 0.0
    p_cl: float = 0.0
    gamma: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha.real, self.alpha.imag, self.x_cl, self.p_cl,
                         self.gamma.real, self.gamma.imag])

    @classmethod
    def from_array(cls, y) -> "GaussianState":
        return cls(complex(y[0], y[1]), float(y[2]), float(y[3]), complex(y[4], y[5]))


def _rhs(y, A, F, omega0=1.0):
    ar, ai, x, p = y[0], y[1], y[2], y[3]
    # -2 alpha^2 = -2 (ar^2 - ai^2) - 4 i ar ai
    dar = -2.0 * (ar * ar - ai * ai) - A * ar - 0.5 * omega0**2
    dai = -4.0 * ar * ai
    dx = p
    dp = -A * p + F - omega0**2 * x
    dgr = -ai + 0.5 * p * p + F * x - 0.5 * omega0**2 * x * x
    dgi = ar
    return np.array([dar, dai, dx, dp, dgr, dgi])


def derivatives(state: GaussianState, A: float, F_t: float) -> GaussianState:
    """Time derivative of every Ansatz parameter, packed as a GaussianState."""
    if not state.alpha.imag > 0:
        raise WidthCollapse(f"Im(alpha) = {state.alpha.imag} <= 0")
    return GaussianState.from_array(_rhs(state.as_array(), A, F_t))


@dataclass
class OracleRun:
    times: np.ndarray
    trajectory: np.ndarray  # (n_steps + 1, 6): Re a, Im a, x_cl, p_cl, Re g, Im g
    A: float
    dt: float
    forces: np.ndarray
    omega0: float = 1.0

    def state(self, k: int) -> GaussianState:
        return GaussianState.from_array(self.trajectory[k])

    @property
    def alpha(self) -> np.ndarray:
        return self.trajectory[:, 0] + 1j * self.trajectory[:, 1]

    @property
    def x_cl(self) -> np.ndarray:
        return self.trajectory[:, 2]

    @property
    def p_cl(self) -> np.ndarray:
        return self.trajectory[:, 3]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re_alpha", "im_alpha", "x_cl", "p_cl"])
            for t, row in zip(self.times, self.trajectory):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row[:4]])


def integrate(initial: GaussianState, forces, dt: float, n_steps: int | None = None,
              A: float = 0.0) -> OracleRun:
    """Classic RK4 with the force held constant on every step.

    ``forces`` may be a NoiseStream, an array, or None (no force).
    """
    if forces is None:
        if n_steps is None:
            raise ValueError("n_steps is required without a force stream")
        forces = np.zeros(n_steps)
    forces = np.asarray(getattr(forces, "forces", forces), dtype=float)
    if n_steps is None:
        n_steps = len(forces)
    if len(forces) < n_steps:
        raise ValueError("force stream shorter than the requested number of steps")
    y = initial.as_array()
    out = np.empty((n_steps + 1, 6))
    out[0] = y
    for k in range(n_steps):
        F = forces[k]
        k1 = _rhs(y, A, F)
        k2 = _rhs(y + 0.5 * dt * k1, A, F)
        k3 = _rhs(y + 0.5 * dt * k2, A, F)
        k4 = _rhs(y + dt * k3, A, F)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not y[1] > 0:
            raise WidthCollapse(f"Im(alpha) = {y[1]} at step {k + 1}")
        out[k + 1] = y
    return OracleRun(np.arange(n_steps + 1) * dt, out, A, dt, forces[:n_steps])


def render(state: GaussianState, grid: SpatialGrid) -> WaveField:
    """Sample the packet on the grid; Im(gamma) is replaced by grid normalization."""
    if not state.alpha.imag > 0:
        raise WidthCollapse(f"Im(alpha) = {state.alpha.imag} <= 0")
    d = grid.x - state.x_cl
    expo = 1j * (state.alpha * d**2 + state.p_cl * d + state.gamma.real)
    # shift the real part of the exponent so the peak is exp(0)
    expo = expo - expo.real.max()
    return normalize(WaveField(grid, np.exp(expo)))


def coherent_weights(x_cl: float, p_cl: float, n_max: int, a: float = 1.0) -> np.ndarray:
    """Poisson weights lam^n e^{-lam} / n! of a displaced ground state, n = 0..n_max."""
    lam = 0.5 * (x_cl / a) ** 2 + 0.5 * (p_cl * a) ** 2
    n = np.arange(n_max + 1)
    if lam == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    logp = n * math.log(lam) - lam - gammaln(n + 1)
    return np.exp(logp)


def width(alpha) -> np.ndarray:
    """Packet width a = sqrt(1 / (4 Im alpha))."""
    return np.sqrt(1.0 / (4.0 * np.imag(alpha)))


def pinney_residual(run: OracleRun) -> np.ndarray:
    """a'' + A a' + a - 1/(4 a^3) by central differences at interior samples."""
    a = width(run.alpha)
    if len(a) < 3:
        raise ValueError("need at least three samples")
    h = run.dt
    d1 = (a[2:] - a[:-2]) / (2 * h)
    d2 = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    am = a[1:-1]
    return d2 + run.A * d1 + run.omega0**2 * am - 1.0 / (4.0 * am**3)


def circle_invariant(z) -> np.ndarray:
    """r = sqrt((1 + z^2)(1 + conj(z)^2)) / (2 Im z) for the reduced width variable z = 2 alpha."""
    z = np.asarray(z, dtype=complex)
    return np.sqrt(np.abs((1 + z**2) * (1 + np.conj(z) ** 2))) / (2 * z.imag)
