"""Stationary Gaussian force streams built by kernel convolution.

A stream is F_i = sum_j W_{i-j} r_j with r_j ~ N(0, dt) i.i.d., where the
kernel W is the cosine transform of the square root of the power spectrum:

    W(tau) = (1/pi) int_0^inf sqrt(P(omega)) cos(omega tau) d omega.

Its self-convolution reproduces the force covariance
C(tau) = (1/pi) int_0^inf P(omega) cos(omega tau) d omega.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, signal

from .errors import TruncationTooShort

__all__ = [
    "WHITE",
    "SENITZKY",
    "COLORED",
    "NoiseSpec",
    "NoiseKernel",
    "NoiseStream",
    "white_strength",
    "power_spectrum",
    "covariance",
    "colored_covariance_closed_form",
    "kernel_from_spectrum",
    "sample_stream",
    "realization_rng",
    "empirical_covariance",
    "write_stream_csv",
]

WHITE = "white"
SENITZKY = "senitzky"
COLORED = "colored"
KINDS = (WHITE, SENITZKY, COLORED)


def _bose(u: float) -> float:
    """1 / (exp(u) - 1) without overflow at large u."""
    return math.exp(-u) / -math.expm1(-u)


def white_strength(A: float, T_bath: float, E0: float = 0.5, mass: float = 1.0) -> float:
    """B = 2 m A E0 [coth(E0/T) - 1], written as 4 m A E0 / (exp(2 E0/T) - 1)."""
    return 4.0 * mass * A * E0 * _bose(2.0 * E0 / T_bath)


def senitzky_strength(A: float, T_bath: float, E0: float = 0.5, mass: float = 1.0) -> float:
    """Zero-point term kept: 2 m A [hw/2 + hw/(exp(hw/T) - 1)] with hw = 2 E0."""
    hw = 2.0 * E0
    return 2.0 * mass * A * (hw / 2 + hw * _bose(hw / T_bath))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = WHITE
    A: float = 0.5
    T_bath: float = 1.0
    E0: float = 0.5
    sigma: float = 0.03
    mass: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.A < 0 or not self.T_bath > 0 or not self.sigma > 0:
            raise ValueError("need A >= 0, T_bath > 0, sigma > 0")

    @property
    def strength(self) -> float:
        """White-noise strength B (area under the covariance)."""
        if self.kind == WHITE:
            return white_strength(self.A, self.T_bath, self.E0, self.mass)
        if self.kind == SENITZKY:
            return senitzky_strength(self.A, self.T_bath, self.E0, self.mass)
        return 2.0 * self.mass * self.A * self.T_bath

    @property
    def correlation_time(self) -> float:
        return self.sigma if self.kind != COLORED else 1.0 / self.T_bath

    def default_truncation_time(self) -> float:
        if self.kind == COLORED:
            return max(10.0, 10.0 / self.T_bath)
        return 8.0 * self.sigma

    def omega_max(self, rel: float = 1e-8) -> float:
        """Frequency beyond which sqrt(P) stays below ``rel`` times its peak."""
        if self.kind == COLORED:
            T = self.T_bath
            # sqrt(x/(e^x-1)) <= rel at x = u, solved by a short fixed-point iteration
            u = 40.0
            for _ in range(50):
                u = 2.0 * (math.log(1.0 / rel) + 0.5 * math.log(max(u, 1.0)))
            return u * T
        return 2.0 * math.sqrt(math.log(1.0 / rel)) / self.sigma


def power_spectrum(spec: NoiseSpec, omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("omega must be non-negative")
    if spec.kind == COLORED:
        T = spec.T_bath
        u = omega / T
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            planck = np.where(u > 1e-12, omega / np.expm1(np.where(u > 1e-12, u, 1.0)), T)
        return 2.0 * spec.mass * spec.A * planck
    return spec.strength * np.exp(-0.5 * spec.sigma**2 * omega**2)


def covariance(spec: NoiseSpec, tau):
    """C(tau) by quadrature of the power spectrum (white kinds: Gaussian closed form)."""
    tau = np.abs(np.atleast_1d(np.asarray(tau, dtype=float)))
    if spec.kind != COLORED:
        s = spec.sigma
        return spec.strength / (s * math.sqrt(2 * math.pi)) * np.exp(-0.5 * (tau / s) ** 2)
    wmax = spec.omega_max(1e-16)
    out = np.empty_like(tau)
    for i, t in enumerate(tau):
        f = lambda w: float(power_spectrum(spec, w))  # noqa: E731
        if t == 0:
            val = integrate.quad(f, 0, wmax, limit=200, epsabs=0, epsrel=1e-11)[0]
        else:
            val = integrate.quad(f, 0, wmax, weight="cos", wvar=t, limit=500,
                                 epsabs=0, epsrel=1e-10)[0]
        out[i] = val / math.pi
    return out


def colored_covariance_closed_form(A: float, T: float, tau, mass: float = 1.0):
    """Closed form of the Planck covariance; used to cross-check the quadrature.

    Uses int_0^inf x cos(a x)/(e^x - 1) dx = 1/(2 a^2) - pi^2 / (2 sinh^2(pi a)).
    """
    tau = np.abs(np.atleast_1d(np.asarray(tau, dtype=float)))
    a = T * tau
    out = np.empty_like(tau)
    small = a < 1e-3
    out[small] = math.pi**2 / 6 - (math.pi**4 / 30) * a[small] ** 2
    big = ~small
    ab = a[big]
    out[big] = 0.5 / ab**2 - 0.5 * math.pi**2 / np.sinh(math.pi * ab) ** 2
    return 2 * mass * A * T**2 / math.pi * out


@dataclass(frozen=True, eq=False)
class NoiseKernel:
    weights: np.ndarray = field(repr=False)  # W_{-L..L}, symmetric
    dt: float
    truncation_lag: int

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.truncation_lag, self.truncation_lag + 1)

    @property
    def half(self) -> np.ndarray:
        """W_0 .. W_L."""
        return self.weights[self.truncation_lag:]

    def self_convolution(self, max_lag: int) -> np.ndarray:
        """sum_j W_{i-j} W_{-j} dt for i = 0..max_lag, the covariance the kernel produces."""
        w = self.weights
        full = np.correlate(w, w, mode="full") * self.dt
        mid = len(w) - 1
        out = np.zeros(max_lag + 1)
        k = min(max_lag, mid)
        out[: k + 1] = full[mid: mid + k + 1]
        return out


@lru_cache(maxsize=32)
def _kernel_cached(spec: NoiseSpec, dt: float, truncation_lag: int):
    taus = np.arange(truncation_lag + 1) * dt
    wmax = spec.omega_max()
    root = lambda w: np.sqrt(power_spectrum(spec, w))  # noqa: E731
    scale = float(root(0.0)) * wmax
    half, err = integrate.quad_vec(
        lambda w: root(w) * np.cos(w * taus), 0.0, wmax,
        epsabs=1e-12 * scale, epsrel=1e-10, norm="max", limit=20000)
    half = half / math.pi
    half.setflags(write=False)
    return half


def kernel_from_spectrum(spec: NoiseSpec, dt: float, truncation_lag: int | None = None,
                         tail_tol: float = 1e-3) -> NoiseKernel:
    """Sample W(tau) on lags -L..L; raises TruncationTooShort when the cut tail is too large."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if truncation_lag is None:
        truncation_lag = int(math.ceil(spec.default_truncation_time() / dt))
    if truncation_lag < 1:
        raise ValueError("truncation_lag must be at least 1")
    half = _kernel_cached(spec, float(dt), int(truncation_lag))
    peak = np.max(np.abs(half))
    if abs(half[-1]) > tail_tol * peak:
        raise TruncationTooShort(
            f"|W| at lag {truncation_lag} is {abs(half[-1]) / peak:.2e} of its peak"
        )
    weights = np.concatenate([half[:0:-1], half])
    return NoiseKernel(weights, float(dt), int(truncation_lag))


@dataclass(frozen=True, eq=False)
class NoiseStream:
    forces: np.ndarray = field(repr=False)
    seed: int | tuple | None
    spec: NoiseSpec | None = None
    dt: float = 0.01


def realization_rng(master_seed: int, r: int) -> np.random.Generator:
    """Independent generator for realization ``r``; does not depend on scheduling order."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(r)]))


def sample_stream(kernel: NoiseKernel, n_steps: int, seed, spec: NoiseSpec | None = None,
                  rng: np.random.Generator | None = None) -> NoiseStream:
    """F_i = sum_j W_{i-j} r_j for i = 0..n_steps-1 with r_j ~ N(0, dt)."""
    if rng is None:
        rng = np.random.default_rng(seed)
    L = kernel.truncation_lag
    r = rng.standard_normal(n_steps + 2 * L) * math.sqrt(kernel.dt)
    if len(kernel.weights) == 1:
        forces = kernel.weights[0] * r
    elif L > 64:
        forces = signal.fftconvolve(r, kernel.weights, mode="valid")
    else:
        forces = np.convolve(r, kernel.weights, mode="valid")
    return NoiseStream(np.ascontiguousarray(forces), seed, spec, kernel.dt)


def empirical_covariance(streams, max_lag: int):
    """Lag covariance averaged over streams and time origins, with jackknife errors.

    Returns ``(cov, stderr)`` arrays for lags 0..max_lag.
    """
    data = np.asarray([s.forces if isinstance(s, NoiseStream) else s for s in streams])
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need at least two streams of equal length")
    n_str, n = data.shape
    if max_lag >= n - 1:
        raise ValueError("max_lag too large for the stream length")
    # the mean is known to vanish, so plain lagged products are unbiased
    per = np.empty((n_str, max_lag + 1))
    for k in range(max_lag + 1):
        per[:, k] = np.mean(data[:, : n - k] * data[:, k:], axis=1)
    total = per.sum(axis=0)
    cov = total / n_str
    loo = (total[None, :] - per) / (n_str - 1)
    stderr = np.sqrt((n_str - 1) / n_str * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return cov, stderr


def write_stream_csv(stream: NoiseStream, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "force"])
        for i, f in enumerate(stream.forces):
            w.writerow([i, repr(float(f))])
