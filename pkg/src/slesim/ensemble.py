"""Seeded ensembles of SLE realizations and equilibrium fits.

Each realization r draws its noise from ``SeedSequence([master_seed, r])``, so
its output does not depend on which worker ran it. Results are reduced in
realization order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .errors import InvertedPopulation, NonPositiveWeight, TooManyFailures
from .gaussian_oracle import GaussianState, render
from .lattice import SpatialGrid, WaveField, default_grid, normalize
from .noise import KINDS, NoiseSpec, kernel_from_spectrum, realization_rng, sample_stream
from .phase import POLAR, prescription_code
from .propagator import SLEStepConfig, evolve
from .spectrum import Eigenbasis, Potential, eigenbasis
from .theory import t_sub_from_weights

__all__ = [
    "InitialState",
    "RunConfig",
    "RealizationResult",
    "EnsembleStats",
    "run_realization",
    "run_ensemble",
    "fit_boltzmann",
    "t_sub_two_level",
    "default_workers",
]

WORKERS_ENV = "SLESIM_WORKERS"
FAILURE_CAP = 0.01


@dataclass(frozen=True, eq=False)
class InitialState:
    """``eigenstate`` (level n), ``gaussian`` (alpha, x_cl, p_cl) or ``tabulated`` amplitudes."""

    kind: str = "eigenstate"
    n: int = 0
    alpha: complex = 0.5j
    x_cl: float = 0.0
    p_cl: float = 0.0
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("eigenstate", "gaussian", "tabulated"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        if self.kind == "eigenstate" and self.n < 0:
            raise ValueError("eigenstate index must be non-negative")
        if self.kind == "gaussian" and not complex(self.alpha).imag > 0:
            raise ValueError("gaussian initial state needs Im(alpha) > 0")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated initial state needs amplitudes")

    def build(self, basis: Eigenbasis) -> WaveField:
        if self.kind == "eigenstate":
            if self.n >= basis.n_levels:
                raise ValueError(f"eigenstate {self.n} outside the {basis.n_levels}-level basis")
            return WaveField(basis.grid, basis.vectors[self.n].astype(complex))
        if self.kind == "gaussian":
            return render(GaussianState(complex(self.alpha), self.x_cl, self.p_cl), basis.grid)
        return normalize(WaveField(basis.grid, np.asarray(self.table, dtype=complex)))

    def to_dict(self) -> dict:
        if self.kind == "eigenstate":
            return {"kind": "eigenstate", "n": self.n}
        if self.kind == "gaussian":
            a = complex(self.alpha)
            return {"kind": "gaussian", "alpha": [a.real, a.imag],
                    "x_cl": self.x_cl, "p_cl": self.p_cl}
        t = np.asarray(self.table, dtype=complex)
        return {"kind": "tabulated", "re": t.real.tolist(), "im": t.imag.tolist()}


@dataclass(frozen=True, eq=False)
class RunConfig:
    potential: Potential = field(default_factory=Potential.harmonic)
    prescription: str = POLAR
    noise: str = "white"  # white | senitzky | colored | none
    A: float = 0.5
    T_bath: float = 1.0
    E0: float | None = None  # zero-point energy in the white-noise strength; None -> E_0 of H0
    sigma: float = 0.03
    initial: InitialState = field(default_factory=InitialState)
    dt: float = 0.01
    n_steps: int = 10000
    grid: SpatialGrid = field(default_factory=default_grid)
    n_stat: int = 100
    master_seed: int = 0
    record_stride: int = 10
    n_levels: int = 20
    window_fraction: float = 0.25
    truncation_lag: int | None = None

    def __post_init__(self):
        if self.n_stat < 1:
            raise ValueError("n_stat must be at least 1")
        if self.n_steps < 1 or self.record_stride < 1 or self.n_steps % self.record_stride:
            raise ValueError("record_stride must divide n_steps")
        if self.noise not in KINDS + ("none",):
            raise ValueError(f"unknown noise kind {self.noise!r}")
        if not 0 < self.window_fraction <= 1:
            raise ValueError("window_fraction must lie in (0, 1]")
        if self.noise != "none" and not self.T_bath > 0:
            raise ValueError("T_bath must be positive")
        if self.n_levels < 2:
            raise ValueError("n_levels must be at least 2")
        prescription_code(self.prescription)
        SLEStepConfig(self.dt, self.A, self.prescription, self.potential)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    def basis(self) -> Eigenbasis:
        return _basis(self.grid, self.potential, self.n_levels)

    def zero_point(self) -> float:
        if self.E0 is not None:
            return self.E0
        return float(self.basis().energies[0])

    def noise_spec(self) -> NoiseSpec | None:
        if self.noise == "none" or self.A == 0:
            return None
        return NoiseSpec(self.noise, self.A, self.T_bath, self.zero_point(), self.sigma)

    def step_config(self) -> SLEStepConfig:
        return SLEStepConfig(self.dt, self.A, self.prescription, self.potential)

    def to_dict(self) -> dict:
        pot = self.potential
        pdict = {"kind": pot.kind, "strength": pot.strength}
        if pot.table is not None:
            pdict["table"] = pot.table.tolist()
        return {
            "potential": pdict,
            "prescription": self.prescription,
            "noise": self.noise,
            "A": self.A,
            "T_bath": self.T_bath,
            "E0": self.zero_point(),
            "sigma": self.sigma,
            "initial": self.initial.to_dict(),
            "dt": self.dt,
            "n_steps": self.n_steps,
            "grid": self.grid.to_dict(),
            "n_stat": self.n_stat,
            "master_seed": self.master_seed,
            "record_stride": self.record_stride,
            "n_levels": self.n_levels,
            "window_fraction": self.window_fraction,
            "truncation_lag": self.truncation_lag,
        }


@lru_cache(maxsize=16)
def _basis(grid: SpatialGrid, pot: Potential, n_levels: int) -> Eigenbasis:
    return eigenbasis(grid, pot, n_levels)


@dataclass
class RealizationResult:
    r: int
    status: int
    steps_done: int
    times: np.ndarray
    weights: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    max_step_drift: float

    @property
    def ok(self) -> bool:
        return self.status == K.OK


def _forces(cfg: RunConfig, r: int) -> np.ndarray:
    spec = cfg.noise_spec()
    if spec is None:
        return np.zeros(cfg.n_steps)
    kernel = kernel_from_spectrum(spec, cfg.dt, cfg.truncation_lag)
    stream = sample_stream(kernel, cfg.n_steps, (cfg.master_seed, r), spec,
                           rng=realization_rng(cfg.master_seed, r))
    return stream.forces


def run_realization(cfg: RunConfig, r: int) -> RealizationResult:
    """One stochastic trajectory; weights and <H0> recorded every ``record_stride`` steps."""
    basis = cfg.basis()
    psi0 = cfg.initial.build(basis)
    traj = evolve(psi0, cfg.step_config(), _forces(cfg, r), basis, cfg.record_stride)
    return RealizationResult(r, traj.status, traj.steps_done, traj.times, traj.weights,
                             traj.energy, traj.norm, traj.max_step_drift)


@dataclass
class EnsembleStats:
    times: np.ndarray
    energies: np.ndarray  # eigenvalues E_n of the projection basis
    mean_energy: np.ndarray
    stderr_energy: np.ndarray
    weights: np.ndarray  # (n_records, n_levels)
    stderr_weights: np.ndarray
    mean_norm: np.ndarray
    stderr_norm: np.ndarray
    max_step_drift: float
    max_norm_drift: float
    n_ok: int
    failed: list
    window_start: float
    # per-realization averages over the terminal window, rows ordered by r
    window_weights: np.ndarray = field(repr=False)
    window_energy: np.ndarray = field(repr=False)
    config: RunConfig | None = field(default=None, repr=False)

    @property
    def n_failed(self) -> int:
        return len(self.failed)

    def _stderr(self, a):
        n = a.shape[0]
        return a.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(a.shape[1:], np.nan)

    @property
    def asymptotic_weights(self) -> np.ndarray:
        return self.window_weights.mean(axis=0)

    @property
    def asymptotic_weights_stderr(self) -> np.ndarray:
        """Across-realization spread of window means, which absorbs time correlations."""
        return self._stderr(self.window_weights)

    @property
    def asymptotic_energy(self) -> float:
        return float(self.window_energy.mean())

    @property
    def asymptotic_energy_stderr(self) -> float:
        return float(self._stderr(self.window_energy))


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer")
        return n
    return 1


def _run_chunk(args):
    cfg, rs = args
    return [run_realization(cfg, r) for r in rs]


def run_ensemble(cfg: RunConfig, workers: int | None = None) -> EnsembleStats:
    """Mean and standard error over the non-failed realizations 0..n_stat-1."""
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError("workers must be positive")
    rs = list(range(cfg.n_stat))
    if workers == 1 or cfg.n_stat == 1:
        results = [run_realization(cfg, r) for r in rs]
    else:
        cfg.basis()  # warm the cache before forking
        chunks = [rs[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [res for part in pool.map(_run_chunk, [(cfg, c) for c in chunks])
                       for res in part]
    results.sort(key=lambda res: res.r)
    return reduce_results(cfg, results)


def reduce_results(cfg: RunConfig, results) -> EnsembleStats:
    ok = [res for res in results if res.ok]
    failed = [res.r for res in results if not res.ok]
    if len(failed) > FAILURE_CAP * len(results):
        raise TooManyFailures(f"{len(failed)} of {len(results)} realizations failed")
    if not ok:
        raise TooManyFailures("no realization completed")
    times = ok[0].times
    W = np.stack([res.weights for res in ok])
    E = np.stack([res.energy for res in ok])
    n = len(ok)
    se = (lambda a: a.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else (
        lambda a: np.full(a.shape[1:], np.nan))
    t_win = (1.0 - cfg.window_fraction) * times[-1]
    win = times >= t_win - 1e-12 * max(times[-1], 1.0)
    norms = np.stack([res.norm for res in ok])
    return EnsembleStats(
        times=times,
        energies=cfg.basis().energies.copy(),
        mean_energy=E.mean(axis=0),
        stderr_energy=se(E),
        weights=W.mean(axis=0),
        stderr_weights=se(W),
        mean_norm=norms.mean(axis=0),
        stderr_norm=se(norms),
        max_step_drift=max(res.max_step_drift for res in ok),
        max_norm_drift=float(np.max(np.abs(norms - norms[:, :1]))),
        n_ok=n,
        failed=failed,
        window_start=float(times[win][0]),
        window_weights=W[:, win, :].mean(axis=1),
        window_energy=E[:, win].mean(axis=1),
        config=cfg,
    )


@dataclass
class BoltzmannFit:
    T_sub: float
    intercept: float
    goodness: float  # rms residual of ln p over the fitted levels
    n_conforming: int
    ratios: np.ndarray  # p_n / fitted law for every supplied level


def fit_boltzmann(weights, energies, n_fit: int, band: float = 0.3,
                  contiguous: bool = True) -> BoltzmannFit:
    """Least squares of ln p_n against E_n over the first ``n_fit`` levels.

    A level conforms when p_n lies within a factor (1 +/- band) of the fitted
    law. With ``contiguous`` the count stops at the first level that does not.
    """
    p = np.asarray(weights, dtype=float)
    E = np.asarray(energies, dtype=float)[: len(p)]
    if n_fit < 2 or n_fit > len(p):
        raise ValueError("need 2 <= n_fit <= number of weights")
    if np.any(p[:n_fit] <= 0):
        raise NonPositiveWeight("weights entering the fit must be positive")
    slope, intercept = np.polyfit(E[:n_fit], np.log(p[:n_fit]), 1)
    if slope >= 0:
        raise InvertedPopulation("fitted Boltzmann slope is not negative")
    resid = np.log(p[:n_fit]) - (intercept + slope * E[:n_fit])
    goodness = float(np.sqrt(np.mean(resid**2)))
    ratios = p / np.exp(intercept + slope * E)
    good = (ratios >= 1 - band) & (ratios <= 1 + band)
    if contiguous:
        n_conf = int(np.argmin(good)) if not good.all() else len(good)
    else:
        n_conf = int(good.sum())
    return BoltzmannFit(-1.0 / slope, float(intercept), goodness, n_conf, ratios)


def t_sub_two_level(stats: EnsembleStats, basis: Eigenbasis | None = None):
    """(T_sub, stderr) from window-averaged p_0, p_1.

    The error uses the per-realization window means, so the p_0/p_1
    correlation is kept in the propagation.
    """
    E = stats.energies if basis is None else basis.energies
    w = stats.window_weights
    p0, p1 = w[:, 0].mean(), w[:, 1].mean()
    if p1 >= p0:
        raise InvertedPopulation(f"p1 = {p1} >= p0 = {p0}")
    T = t_sub_from_weights(p0, p1, E[0], E[1])
    n = w.shape[0]
    if n < 2:
        return T, float("nan")
    # d ln(p1/p0) per realization, linearised around the means
    g = w[:, 1] / p1 - w[:, 0] / p0
    err_log = g.std(ddof=1) / math.sqrt(n)
    return T, float(T * T / (E[1] - E[0]) * err_log)

