"""Closed-form asymptotics of the harmonic SLE under white and Planck-colored noise.

All quantities are dimensionless (hbar = m = omega0 = k = 1).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import (CriticalDamping, FitDivergence, InvertedPopulation,
                     QuadratureFailure)
from .noise import _bose, white_strength

__all__ = [
    "AsymptoticPrediction",
    "white_harmonic_weights",
    "laplace_of_colored_C",
    "decay_rates",
    "reduction_factors",
    "colored_harmonic_weights",
    "generating_function",
    "t_sub_from_weights",
    "t_sub_colored",
    "harmonic_asymptotic_energy",
    "senitzky_relaxation_curve",
    "fit_relaxation",
    "predict_colored",
]


@dataclass
class AsymptoticPrediction:
    weights: np.ndarray = field(repr=False)
    T_sub: float
    r_x: float
    r_p: float
    regime_flags: dict


def white_harmonic_weights(A: float, T_bath: float, E0: float = 0.5,
                           n_max: int = 40) -> np.ndarray:
    """p_n = x / (1 + x)^(n+1) with x = 1 / T_eff and T_eff = B / (2A).

    The exponent n+1 (rather than n) is what the n-th derivative of the
    generating function x / (eta + x) at eta = 1 gives; it makes the weights
    sum to one.
    """
    if not T_bath > 0:
        raise ValueError("T_bath must be positive")
    n = np.arange(n_max + 1)
    if A > 0:
        T_eff = white_strength(A, T_bath, E0) / (2.0 * A)
    else:
        T_eff = 2.0 * E0 * _bose(2.0 * E0 / T_bath)
    if T_eff == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    x = 1.0 / T_eff
    return np.exp(math.log(x) - (n + 1) * math.log1p(x))


def laplace_of_colored_C(lam: complex, A: float, T_bath: float,
                         rtol: float = 1e-10) -> complex:
    """Laplace transform of the Planck covariance at complex rate ``lam``.

    L(lam) = (2A/pi) int_0^inf omega/(exp(omega/T) - 1) * lam / (lam^2 + omega^2) d omega
    """
    lam = complex(lam)
    if not lam.real > 0:
        raise ValueError("Re(lam) must be positive")
    T = T_bath
    if T <= 0:
        raise ValueError("T_bath must be positive")
    a, b = lam.real, abs(lam.imag)

    def planck(w):
        u = w / T
        if u > 700.0:
            return 0.0
        return T if u < 1e-12 else w / math.expm1(u)

    def f_re(w):
        return planck(w) * (lam / (lam * lam + w * w)).real

    def f_im(w):
        return planck(w) * (lam / (lam * lam + w * w)).imag

    # the kernel peaks near omega = |Im lam| with width Re lam; beyond 80 T the
    # Planck factor is below e^-80 of its peak and the tail is dropped
    wmax = T * 80.0 + b + 50.0 * a
    pts = sorted({p for p in (b - 5 * a, b, b + 5 * a) if 0 < p < wmax})
    # absolute scale for both parts: |L| <= T * int |lam|/|lam^2 + w^2| dw
    scale = T * abs(lam) / max(a * abs(lam), 1e-300) * math.pi
    vals = []
    for f in (f_re, f_im):
        val, err = integrate.quad(f, 0.0, wmax, points=pts or None, limit=4000,
                                  epsabs=rtol * 1e-3 * scale, epsrel=rtol)
        if not math.isfinite(val) or err > rtol * max(abs(val), 1e-3 * scale):
            raise QuadratureFailure(f"quadrature error {err:.2e} for lam={lam}")
        vals.append(val)
    return 2.0 * A / math.pi * complex(vals[0], vals[1])


def decay_rates(A: float, omega0: float = 1.0):
    """Eigenvalues lam_+/- = A/2 +/- sqrt(A^2/4 - omega0^2) of the classical drift matrix."""
    root = cmath.sqrt(A * A / 4 - omega0 * omega0)
    return A / 2 + root, A / 2 - root


def reduction_factors(A: float, T_bath: float):
    """(r_x, r_p): colored-noise centroid variances relative to the classical ones."""
    if not A > 0:
        raise ValueError("A must be positive")
    if abs(A - 2.0) < 1e-6:
        raise CriticalDamping("reduction factors are not evaluated at A = 2")
    lp, lm = decay_rates(A)
    Lp = laplace_of_colored_C(lp, A, T_bath)
    if A < 2:
        Lm = Lp.conjugate()  # lam_- = conj(lam_+)
    else:
        Lm = laplace_of_colored_C(lm, A, T_bath)
    d = lp - lm  # sqrt(A^2 - 4), imaginary when underdamped
    r_x = (lp * Lm - lm * Lp) / (A * T_bath * d)
    r_p = (lp * Lp - lm * Lm) / (A * T_bath * d)
    return float(r_x.real), float(r_p.real)


def _half_power_series(c: float, n_max: int) -> np.ndarray:
    """Coefficients of (c + eps)^(-1/2) in powers of (-eps): c^(-1/2) C(2k,k) / (4c)^k."""
    out = np.empty(n_max + 1)
    out[0] = c**-0.5
    for k in range(1, n_max + 1):
        out[k] = out[k - 1] * (2 * k - 1) / (2 * k) / c
    return out


def generating_function(eta, r_x: float, r_p: float, T_bath: float):
    """G(eta) = sqrt(Pi_x(0) Pi_p(0) / (Pi_x(eta) Pi_p(eta))), Pi(eta) = eta + 1/(T r)."""
    ax = 1.0 / (T_bath * r_x)
    ap = 1.0 / (T_bath * r_p)
    return np.sqrt(ax * ap / ((eta + ax) * (eta + ap)))


def colored_harmonic_weights(A: float, T_bath: float, n_max: int = 40,
                             factors: tuple | None = None) -> np.ndarray:
    """p_n = (-1)^n / n! d^n G / d eta^n at eta = 1, via the exact Taylor product.

    ``factors`` overrides (r_x, r_p); otherwise they are computed from A and T.
    """
    r_x, r_p = reduction_factors(A, T_bath) if factors is None else factors
    ax = 1.0 / (T_bath * r_x)
    ap = 1.0 / (T_bath * r_p)
    sx = _half_power_series(1.0 + ax, n_max)
    sp = _half_power_series(1.0 + ap, n_max)
    return math.sqrt(ax * ap) * np.convolve(sx, sp)[: n_max + 1]


def t_sub_from_weights(p0: float, p1: float, E0: float, E1: float) -> float:
    if not (p0 > 0 and p1 > 0):
        raise ValueError("weights must be positive")
    if p1 >= p0:
        raise InvertedPopulation(f"p1 = {p1} >= p0 = {p0}")
    return -(E1 - E0) / math.log(p1 / p0)


def t_sub_colored(A: float, T_bath: float, factors: tuple | None = None) -> float:
    """Two-level temperature of the colored harmonic distribution in closed form."""
    r_x, r_p = reduction_factors(A, T_bath) if factors is None else factors
    qx = 1.0 / (1.0 + 1.0 / (T_bath * r_x))
    qp = 1.0 / (1.0 + 1.0 / (T_bath * r_p))
    return -1.0 / math.log(0.5 * (qx + qp))


def harmonic_asymptotic_energy(T_bath, E0: float = 0.5):
    """E0 coth(E0 / T)."""
    T = np.asarray(T_bath, dtype=float)
    out = E0 / np.tanh(E0 / T)
    return float(out) if out.ndim == 0 else out


def senitzky_relaxation_curve(E_start: float, E_inf: float, A: float, t):
    if not A > 0:
        raise ValueError("A must be positive")
    decay = np.exp(-A * np.asarray(t, dtype=float))
    return E_start * decay + E_inf * (1.0 - decay)


def fit_relaxation(t, energy, E_start: float | None = None, A_guess: float = 0.1,
                   sigma=None):
    """Least-squares (E_inf, A_eff) of the exponential relaxation law.

    ``E_start`` defaults to the first sample. Returns ``(E_inf, A_eff, cov)``.
    """
    t = np.asarray(t, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if E_start is None:
        E_start = float(energy[0])
    model = lambda tt, e_inf, a: senitzky_relaxation_curve(E_start, e_inf, abs(a), tt)  # noqa: E731
    try:
        popt, pcov = optimize.curve_fit(model, t, energy, p0=[energy[-1], A_guess],
                                        sigma=sigma, absolute_sigma=sigma is not None,
                                        maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitDivergence(str(exc)) from exc
    e_inf, a = float(popt[0]), abs(float(popt[1]))
    if not (np.all(np.isfinite(popt)) and a > 0):
        raise FitDivergence(f"non-physical fit {popt}")
    return e_inf, a, pcov


def predict_colored(A: float, T_bath: float, n_max: int = 40) -> AsymptoticPrediction:
    r_x, r_p = reduction_factors(A, T_bath)
    weights = colored_harmonic_weights(A, T_bath, n_max, factors=(r_x, r_p))
    lp, _ = decay_rates(A)
    flags = {
        "classical_limit": T_bath > 10 * abs(lp),
        "weak_coupling": A < 0.1 * min(1.0, T_bath),
        "brownian_hierarchy_ok": A < min(1.0, T_bath),
    }
    return AsymptoticPrediction(weights, t_sub_colored(A, T_bath, (r_x, r_p)), r_x, r_p, flags)
