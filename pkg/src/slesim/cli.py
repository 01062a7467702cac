"""Command-line entry point, YAML run configuration, presets and output files.

Config schema (every key optional; unknown keys are fatal)::

    preset: fig6              # start from a named preset, keys below override it
    potential: harmonic       # or {kind: harmonic|linear|tabulated, strength: 1.0, table: [...]}
    prescription: polar       # polar | arctan | none
    bath: {A: 0.5, T_bath: 1.0, noise: white, sigma: 0.03, E0: null, truncation_lag: null}
    initial: {kind: eigenstate, n: 0}   # or {kind: gaussian, alpha: [0, 0.5], x_cl: 0, p_cl: 0}
    time: {dt: 0.01, n_steps: 10000, record_stride: 10}
    grid: {x_min: -20, x_max: 20, dx: 0.1}
    ensemble: {n_stat: 100, master_seed: 0, n_levels: 20, window_fraction: 0.25}
    observables: [energy, weights]
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .ensemble import (EnsembleStats, InitialState, RunConfig, default_workers,
                       fit_boltzmann, run_ensemble, t_sub_two_level)
from .errors import ConfigError, ParseError, SLEError, ValidationError
from .lattice import SpatialGrid
from .spectrum import Potential

__all__ = [
    "UnitMap",
    "ScenarioPreset",
    "presets",
    "charmonium_preset",
    "load_config",
    "load_configs",
    "parse_config",
    "config_to_mapping",
    "dump_config",
    "emit_outputs",
    "main",
]

OBSERVABLES = ("energy", "weights", "norm")
DEFAULT_OBSERVABLES = ("energy", "weights")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


# ---------------------------------------------------------------- units

@dataclass(frozen=True)
class UnitMap:
    """Scales that turn dimensionless values into physical ones.

    ``hbar_omega0`` is the energy unit; ``hbar_c`` (energy x length) and
    ``mass_c2`` (energy) fix the length and time units.
    """

    hbar_omega0: float
    mass_c2: float = 1.0
    hbar_c: float = 1.0
    energy_unit: str = "GeV"
    length_unit: str = "fm"

    @property
    def omega0(self) -> float:
        """Angular frequency in units of c / length."""
        return self.hbar_omega0 / self.hbar_c

    @property
    def length(self) -> float:
        """sqrt(hbar / m omega0)."""
        return self.hbar_c / math.sqrt(self.mass_c2 * self.hbar_omega0)

    def scale(self, quantity: str) -> float:
        scales = {
            "energy": self.hbar_omega0,
            "temperature": self.hbar_omega0,
            "time": 1.0 / self.omega0,
            "rate": self.omega0,
            "length": self.length,
            "force": self.hbar_omega0 / self.length,
        }
        try:
            return scales[quantity]
        except KeyError:
            raise ValueError(f"unknown quantity {quantity!r}") from None

    def to_physical(self, quantity: str, value):
        return value * self.scale(quantity)

    def to_dimensionless(self, quantity: str, value):
        return value / self.scale(quantity)

    def to_dict(self) -> dict:
        return {"hbar_omega0": self.hbar_omega0, "mass_c2": self.mass_c2, "hbar_c": self.hbar_c,
                "energy_unit": self.energy_unit, "length_unit": self.length_unit}


# ---------------------------------------------------------------- presets

@dataclass
class ScenarioPreset:
    name: str
    runs: list
    expected: dict = field(default_factory=dict)
    units: UnitMap | None = None
    description: str = ""


def charmonium_preset(n_temperatures: int = 5, n_stat: int = 1000) -> ScenarioPreset:
    """Linear potential, colored noise, A = 0.3 T, kT from 0.15 to 0.6 GeV."""
    # hbar omega0 = ((hbar c K_l)^2 / mu c^2)^(1/3) with K_l = 2 GeV/fm, mu = 0.9 GeV;
    # the rounded 0.55 GeV is the value quoted alongside the temperature window
    units = UnitMap(hbar_omega0=0.55, mass_c2=0.9, hbar_c=0.2)
    kT = np.linspace(0.15, 0.6, n_temperatures)
    runs = []
    for k in kT:
        T = float(units.to_dimensionless("temperature", k))
        runs.append(RunConfig(potential=Potential.linear(), noise="colored", A=0.3 * T,
                              T_bath=T, n_steps=int(round(15.0 / (0.3 * T) / 0.01 / 10)) * 10,
                              n_stat=n_stat, n_levels=20))
    return ScenarioPreset(
        "charmonium", runs,
        expected={"hbar_omega0_GeV": {"value": 0.55, "tol": 0.01, "source": "paper"},
                  "T_range": {"value": [0.3, 1.1], "tol": 0.05, "source": "paper"}},
        units=units,
        description="c-cbar pair as a 1D linear oscillator in a hot medium",
    )


def _sweep(base: RunConfig, temps, n_steps_of=None):
    out = []
    for T in temps:
        steps = base.n_steps if n_steps_of is None else n_steps_of(T)
        out.append(base.replace(T_bath=float(T), n_steps=steps))
    return out


def presets() -> dict:
    harm_white = RunConfig(n_stat=1000, n_steps=10000)
    lin = Potential.linear()
    table = {
        "fig3_polar": ScenarioPreset(
            "fig3_polar",
            [RunConfig(noise="none", A=0.1, initial=InitialState(n=1), n_steps=6000, n_stat=1)],
            {"p1_at_60": {"max": 0.1, "source": "paper"}, "p0_at_60": {"min": 0.85, "source": "paper"}},
            description="friction only, polar phase, first excited state"),
        "fig3_arctan": ScenarioPreset(
            "fig3_arctan",
            [RunConfig(noise="none", A=0.1, prescription="arctan", initial=InitialState(n=1),
                       n_steps=6000, n_stat=1)],
            {"p1_drift": {"max": 1e-3, "source": "paper"}},
            description="friction only, arctan phase, first excited state"),
        "fig4": ScenarioPreset(
            "fig4", [harm_white.replace(A=a, n_steps=n) for a, n in ((0.1, 40000), (0.5, 10000),
                                                                      (1.0, 10000))],
            {"E_inf": {"value": 0.5 / math.tanh(0.5), "rel_tol": 0.03, "source": "paper"}},
            description="energy relaxation from the ground state"),
        "fig6": ScenarioPreset(
            "fig6", [harm_white.replace(A=0.5)],
            {"T_sub": {"value": 0.99, "tol": 0.05, "source": "paper"}},
            description="asymptotic weights, white noise"),
        "fig7_weak": ScenarioPreset(
            "fig7_weak", _sweep(harm_white.replace(A=0.1, n_steps=40000), (0.25, 0.5, 1.0, 2.0)),
            {"T_sub_over_T_bath": {"value": 1.0, "rel_tol": 0.1, "source": "paper"}},
            description="T_sub against T_bath at A = 0.1"),
        "fig7_strong": ScenarioPreset(
            "fig7_strong", _sweep(harm_white.replace(A=1.5), (0.25, 0.5, 1.0, 2.0)),
            {"T_sub_over_T_bath": {"value": 1.0, "rel_tol": 0.1, "source": "paper"}},
            description="T_sub against T_bath at A = 1.5"),
        "fig9": ScenarioPreset(
            "fig9", [harm_white.replace(noise="colored", A=a, T_bath=T, n_steps=n)
                     for a, T, n in ((0.1, 1.0, 40000), (0.5, 0.5, 10000), (1.5, 0.2, 10000))],
            {"weights": {"source": "derived", "oracle": "colored_harmonic_weights"}},
            description="colored-noise asymptotic weights"),
        "fig10": ScenarioPreset(
            "fig10", [harm_white.replace(noise="colored", A=a, T_bath=T)
                      for a in (0.1, 0.5, 1.5) for T in (0.2, 0.5, 1.0, 2.0)],
            {"T_sub": {"source": "derived", "oracle": "t_sub_colored"}},
            description="colored-noise T_sub against T_bath"),
        "fig12": ScenarioPreset(
            "fig12", [harm_white.replace(potential=lin, A=a, T_bath=T)
                      for a in (0.1, 0.5, 1.5) for T in (0.2, 0.5, 1.0)],
            {"E0": {"value": 0.509, "tol": 0.005, "source": "paper"}},
            description="linear potential, white noise"),
        "fig14": ScenarioPreset(
            "fig14", [harm_white.replace(potential=lin, noise="colored", A=a, T_bath=T,
                                         n_steps=40000 if a < 0.1 else 10000)
                      for a in (0.05, 0.5, 1.5) for T in (0.2, 0.5, 1.0, 1.5)],
            {"T_sub_over_T_bath": {"value": 1.0, "rel_tol": 0.1, "source": "paper",
                                   "applies_to": "A = 0.05"}},
            description="linear potential, colored noise"),
    }
    table["charmonium"] = charmonium_preset()
    return table


# ---------------------------------------------------------------- config parsing

_SCHEMA = {
    "preset": None,
    "potential": {"kind", "strength", "table"},
    "prescription": None,
    "bath": {"A", "T_bath", "noise", "sigma", "E0", "truncation_lag"},
    "initial": {"kind", "n", "alpha", "x_cl", "p_cl", "re", "im"},
    "time": {"dt", "n_steps", "record_stride"},
    "grid": {"x_min", "x_max", "dx"},
    "ensemble": {"n_stat", "master_seed", "n_levels", "window_fraction"},
    "observables": None,
}


def _key_lines(node, prefix="", out=None) -> dict:
    """Map dotted key paths to 1-based line numbers from a composed YAML tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _key_lines(v, path, out)
    return out


class _Reader:
    def __init__(self, data: dict, lines: dict):
        self.data = data
        self.lines = lines

    def err(self, path, msg, cls=ParseError):
        return cls(msg, line=self.lines.get(path), field=path)

    def number(self, path, value, integer=False, allow_none=False):
        if value is None and allow_none:
            return None
        ok = isinstance(value, int) if integer else isinstance(value, (int, float))
        if isinstance(value, bool) or not ok:
            kind = "an integer" if integer else "a number"
            raise self.err(path, f"expected {kind}, got {value!r}")
        return int(value) if integer else float(value)

    def string(self, path, value):
        if not isinstance(value, str):
            raise self.err(path, f"expected a string, got {value!r}")
        return value


def parse_config(text: str, base: RunConfig | None = None):
    """Parse YAML text into ``(runs, observables)``; ``runs`` has several entries for sweep presets."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], line=mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("top level must be a mapping", line=1)
    lines = _key_lines(root)
    rd = _Reader(data, lines)

    for key, value in data.items():
        if key not in _SCHEMA:
            raise rd.err(key, f"unknown key {key!r}")
        allowed = _SCHEMA[key]
        if allowed is not None and isinstance(value, dict):
            for sub in value:
                if sub not in allowed:
                    raise rd.err(f"{key}.{sub}", f"unknown key {key}.{sub}")
        elif allowed is not None and not (key == "potential" and isinstance(value, str)):
            raise rd.err(key, f"{key} must be a mapping")

    if "preset" in data:
        name = rd.string("preset", data["preset"])
        table = presets()
        if name not in table:
            raise rd.err("preset", f"unknown preset {name!r}")
        bases = table[name].runs
    else:
        bases = [base or RunConfig()]

    changes = {}
    pot = data.get("potential")
    if isinstance(pot, str):
        changes["potential"] = _potential(rd, {"kind": pot})
    elif isinstance(pot, dict):
        changes["potential"] = _potential(rd, pot)
    if "prescription" in data:
        changes["prescription"] = rd.string("prescription", data["prescription"])
    bath = data.get("bath", {})
    for k in ("A", "T_bath", "sigma"):
        if k in bath:
            changes[k] = rd.number(f"bath.{k}", bath[k])
    if "noise" in bath:
        changes["noise"] = rd.string("bath.noise", bath["noise"])
    if "E0" in bath:
        changes["E0"] = rd.number("bath.E0", bath["E0"], allow_none=True)
    if "truncation_lag" in bath:
        changes["truncation_lag"] = rd.number("bath.truncation_lag", bath["truncation_lag"],
                                              integer=True, allow_none=True)
    if "initial" in data:
        changes["initial"] = _initial(rd, data["initial"])
    tm = data.get("time", {})
    if "dt" in tm:
        changes["dt"] = rd.number("time.dt", tm["dt"])
    for k in ("n_steps", "record_stride"):
        if k in tm:
            changes[k] = rd.number(f"time.{k}", tm[k], integer=True)
    if "grid" in data:
        g = data["grid"]
        ref = bases[0].grid
        x_min = rd.number("grid.x_min", g.get("x_min", ref.x_min))
        x_max = rd.number("grid.x_max", g.get("x_max", ref.x_max))
        dx = rd.number("grid.dx", g.get("dx", ref.dx))
        n = (x_max - x_min) / dx
        if not dx > 0 or abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise rd.err("grid.dx", "dx must divide x_max - x_min", ValidationError)
        try:
            changes["grid"] = SpatialGrid(x_min, x_max, int(round(n)) + 1)
        except ValueError as exc:
            raise rd.err("grid", str(exc), ValidationError) from None
    ens = data.get("ensemble", {})
    for k in ("n_stat", "master_seed", "n_levels"):
        if k in ens:
            changes[k] = rd.number(f"ensemble.{k}", ens[k], integer=True)
    if "window_fraction" in ens:
        changes["window_fraction"] = rd.number("ensemble.window_fraction", ens["window_fraction"])

    obs = data.get("observables", list(DEFAULT_OBSERVABLES))
    if not isinstance(obs, list) or any(o not in OBSERVABLES for o in obs):
        raise rd.err("observables", f"observables must be a list drawn from {OBSERVABLES}")

    runs = []
    for b in bases:
        try:
            runs.append(b.replace(**changes))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    return runs, tuple(obs)


def _potential(rd: _Reader, spec: dict) -> Potential:
    kind = rd.string("potential.kind", spec.get("kind", "harmonic"))
    strength = rd.number("potential.strength", spec.get("strength", 1.0))
    try:
        if kind == "tabulated":
            return Potential.tabulated(spec.get("table"))
        return Potential(kind, strength)
    except (ValueError, TypeError) as exc:
        raise rd.err("potential", str(exc), ValidationError) from None


def _initial(rd: _Reader, spec) -> InitialState:
    if not isinstance(spec, dict):
        raise rd.err("initial", "initial must be a mapping")
    kind = rd.string("initial.kind", spec.get("kind", "eigenstate"))
    try:
        if kind == "eigenstate":
            return InitialState("eigenstate", rd.number("initial.n", spec.get("n", 0), integer=True))
        if kind == "gaussian":
            a = spec.get("alpha", [0.0, 0.5])
            if not (isinstance(a, list) and len(a) == 2):
                raise rd.err("initial.alpha", "alpha must be [re, im]")
            alpha = complex(rd.number("initial.alpha", a[0]), rd.number("initial.alpha", a[1]))
            return InitialState("gaussian", alpha=alpha,
                                x_cl=rd.number("initial.x_cl", spec.get("x_cl", 0.0)),
                                p_cl=rd.number("initial.p_cl", spec.get("p_cl", 0.0)))
        if kind == "tabulated":
            re = np.asarray(spec.get("re"), dtype=float)
            im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
            return InitialState("tabulated", table=re + 1j * im)
        return InitialState(kind)
    except ValueError as exc:
        raise rd.err("initial", str(exc), ValidationError) from None


def load_configs(path):
    """All runs described by a config file (several for sweep presets) and the observables."""
    return parse_config(Path(path).read_text())


def load_config(path) -> RunConfig:
    runs, _ = load_configs(path)
    if len(runs) != 1:
        raise ValidationError(f"{path} expands to {len(runs)} runs; use load_configs")
    return runs[0]


def config_to_mapping(cfg: RunConfig, observables=DEFAULT_OBSERVABLES) -> dict:
    """Explicit schema mapping with every default written out."""
    pot = cfg.potential
    pmap = {"kind": pot.kind, "strength": pot.strength}
    if pot.table is not None:
        pmap["table"] = [float(v) for v in pot.table]
    init = cfg.initial.to_dict()
    return {
        "potential": pmap,
        "prescription": cfg.prescription,
        "bath": {"A": cfg.A, "T_bath": cfg.T_bath, "noise": cfg.noise, "sigma": cfg.sigma,
                 "E0": cfg.zero_point(), "truncation_lag": cfg.truncation_lag},
        "initial": init,
        "time": {"dt": cfg.dt, "n_steps": cfg.n_steps, "record_stride": cfg.record_stride},
        "grid": {"x_min": cfg.grid.x_min, "x_max": cfg.grid.x_max, "dx": cfg.grid.dx},
        "ensemble": {"n_stat": cfg.n_stat, "master_seed": cfg.master_seed,
                     "n_levels": cfg.n_levels, "window_fraction": cfg.window_fraction},
        "observables": list(observables),
    }


def dump_config(cfg: RunConfig, observables=DEFAULT_OBSERVABLES) -> str:
    return yaml.safe_dump(config_to_mapping(cfg, observables), sort_keys=False)


# ---------------------------------------------------------------- outputs

def _fmt(v) -> str:
    return repr(float(v))


def summarize(stats: EnsembleStats) -> dict:
    cfg = stats.config
    out = {
        "version": __version__,
        "master_seed": cfg.master_seed,
        "config": config_to_mapping(cfg),
        "n_ok": stats.n_ok,
        "failed_realizations": list(stats.failed),
        "failure_count": stats.n_failed,
        "window_start": stats.window_start,
        "max_step_norm_drift": stats.max_step_drift,
        "max_norm_drift": stats.max_norm_drift,
        "asymptotic_energy": stats.asymptotic_energy,
        "asymptotic_energy_stderr": _nan_to_none(stats.asymptotic_energy_stderr),
        "asymptotic_weights": stats.asymptotic_weights.tolist(),
        "asymptotic_weights_stderr": [_nan_to_none(v) for v in stats.asymptotic_weights_stderr],
        "eigen_energies": stats.energies.tolist(),
    }
    try:
        T, err = t_sub_two_level(stats)
        out["T_sub"] = T
        out["T_sub_stderr"] = _nan_to_none(err)
    except SLEError as exc:
        out["T_sub"] = None
        out["T_sub_error"] = str(exc)
    try:
        fit = fit_boltzmann(stats.asymptotic_weights, stats.energies, 2)
        out["boltzmann_fit"] = {"n_fit": 2, "T_sub": fit.T_sub, "intercept": fit.intercept,
                                "goodness": fit.goodness, "n_conforming": fit.n_conforming}
    except SLEError as exc:
        out["boltzmann_fit"] = {"error": str(exc)}
    return out


def _nan_to_none(v):
    v = float(v)
    return None if math.isnan(v) else v


def emit_outputs(stats: EnsembleStats, out_dir, observables=DEFAULT_OBSERVABLES,
                 noise_audit=None) -> list:
    """Write timeseries.csv, summary.json, config_echo.yaml and optionally noise_audit.csv.

    With no observables only summary.json is written. Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    summary = summarize(stats)
    summary["observables"] = list(observables)
    p = out_dir / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(p)
    if not observables:
        return written
    cfg = stats.config
    p = out_dir / "config_echo.yaml"
    p.write_text(f"# slesim {__version__} master_seed {cfg.master_seed}\n"
                 + dump_config(cfg, observables))
    written.append(p)
    p = out_dir / "timeseries.csv"
    with open(p, "w", newline="") as fh:
        fh.write(f"# slesim {__version__} master_seed {cfg.master_seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "observable", "value", "stderr"])
        for k, t in enumerate(stats.times):
            if "energy" in observables:
                w.writerow([_fmt(t), "energy", _fmt(stats.mean_energy[k]),
                            _fmt(stats.stderr_energy[k])])
            if "weights" in observables:
                for n in range(stats.weights.shape[1]):
                    w.writerow([_fmt(t), f"p_{n}", _fmt(stats.weights[k, n]),
                                _fmt(stats.stderr_weights[k, n])])
            if "norm" in observables:
                w.writerow([_fmt(t), "norm", _fmt(stats.mean_norm[k]), _fmt(stats.stderr_norm[k])])
    written.append(p)
    if noise_audit is not None:
        written.append(write_noise_audit(noise_audit, out_dir / "noise_audit.csv",
                                         cfg.master_seed))
    return written


def write_noise_audit(audit: dict, path, master_seed) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# slesim {__version__} master_seed {master_seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        cols = ["lag", "tau", "empirical", "stderr", "quadrature"]
        w.writerow(cols)
        for row in zip(*(audit[c] for c in cols)):
            w.writerow([str(int(row[0]))] + [_fmt(v) for v in row[1:]])
    return path


def noise_audit(kind: str, A: float, T_bath: float, dt: float = 0.01, n_streams: int = 500,
                n_steps: int = 2000, max_lag: int = 500, seed: int = 0, E0: float = 0.5,
                sigma: float = 0.03) -> dict:
    """Empirical covariance of sampled streams against the spectral quadrature."""
    from .noise import (NoiseSpec, covariance, empirical_covariance, kernel_from_spectrum,
                        realization_rng, sample_stream)

    spec = NoiseSpec(kind, A, T_bath, E0, sigma)
    kernel = kernel_from_spectrum(spec, dt)
    streams = [sample_stream(kernel, n_steps, (seed, r), spec, rng=realization_rng(seed, r))
               for r in range(n_streams)]
    cov, err = empirical_covariance(streams, max_lag)
    lags = np.arange(max_lag + 1)
    ref = covariance(spec, lags * dt)
    return {"lag": lags, "tau": lags * dt, "empirical": cov, "stderr": err, "quadrature": ref}


# ---------------------------------------------------------------- commands

def _cmd_run(args) -> int:
    runs, obs = load_configs(args.config)
    workers = args.workers if args.workers is not None else default_workers()
    for i, cfg in enumerate(runs):
        if args.seed is not None:
            cfg = cfg.replace(master_seed=args.seed)
        stats = run_ensemble(cfg, workers=workers)
        out = Path(args.out) if len(runs) == 1 else Path(args.out) / f"run_{i:03d}"
        emit_outputs(stats, out, obs)
        T = summarize(stats).get("T_sub")
        print(f"run {i}: A={cfg.A} T_bath={cfg.T_bath} n_ok={stats.n_ok} "
              f"E_inf={stats.asymptotic_energy:.5f} T_sub={T if T is None else round(T, 5)} -> {out}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    table = presets()
    if args.action == "list":
        for name, p in table.items():
            print(f"{name:14s} {len(p.runs):3d} run(s)  {p.description}")
        return EXIT_OK
    if args.name not in table:
        raise ConfigError(f"unknown preset {args.name!r}")
    preset = table[args.name]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, cfg in enumerate(preset.runs):
        if args.seed is not None:
            cfg = cfg.replace(master_seed=args.seed)
        p = out / f"{preset.name}_{i:03d}.yaml"
        p.write_text(dump_config(cfg))
        print(p)
    meta = {"name": preset.name, "expected": preset.expected,
            "units": preset.units.to_dict() if preset.units else None}
    (out / f"{preset.name}_expected.json").write_text(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def _cmd_noise_audit(args) -> int:
    seed = 0 if args.seed is None else args.seed
    audit = noise_audit(args.kind, args.A, args.T_bath, args.dt, args.n_streams, args.n_steps,
                        args.max_lag, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_noise_audit(audit, out / "noise_audit.csv", seed)
    z = np.abs(audit["empirical"] - audit["quadrature"]) / audit["stderr"]
    print(f"max |z| over {len(z)} lags: {z.max():.3f}; lags beyond 3 stderr: {int((z > 3).sum())}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from .gaussian_oracle import GaussianState, integrate, render
    from .lattice import default_grid, inner_product
    from .noise import NoiseSpec, kernel_from_spectrum, realization_rng, sample_stream
    from .propagator import SLEStepConfig, evolve

    seed = 0 if args.seed is None else args.seed
    n = int(round(args.t_final / args.dt))
    spec = NoiseSpec(args.noise, args.A, args.T_bath)
    kernel = kernel_from_spectrum(spec, args.dt)
    forces = sample_stream(kernel, n, seed, spec, rng=realization_rng(seed, 0)).forces
    g0 = GaussianState(complex(args.alpha_re, args.alpha_im), args.x_cl, args.p_cl)
    grid = default_grid()
    traj = evolve(render(g0, grid), SLEStepConfig(args.dt, args.A), forces)
    run = integrate(g0, forces, args.dt, A=args.A)
    fid = abs(inner_product(render(run.state(n), grid), traj.final)) ** 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run.write_csv(out / "oracle.csv")
    print(f"fidelity at t={n * args.dt:g}: {fid:.8f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slesim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"slesim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $SLESIM_WORKERS or 1)")
        p.add_argument("--out", default="slesim_out", help="output directory")

    p = sub.add_parser("run", help="run an ensemble from a YAML config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preset", help="list presets or expand one into config files")
    p.add_argument("action", choices=["list", "expand"])
    p.add_argument("name", nargs="?")
    common(p)
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("noise-audit", help="compare sampled noise covariance with the quadrature")
    p.add_argument("--kind", default="colored", choices=["white", "senitzky", "colored"])
    p.add_argument("--A", type=float, default=0.5)
    p.add_argument("--T-bath", dest="T_bath", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--n-streams", type=int, default=500)
    p.add_argument("--n-steps", type=int, default=2000)
    p.add_argument("--max-lag", type=int, default=500)
    common(p)
    p.set_defaults(func=_cmd_noise_audit)

    p = sub.add_parser("oracle", help="compare the grid solver with the Gaussian oracle")
    p.add_argument("--A", type=float, default=0.5)
    p.add_argument("--T-bath", dest="T_bath", type=float, default=1.0)
    p.add_argument("--noise", default="white", choices=["white", "senitzky", "colored"])
    p.add_argument("--alpha-re", type=float, default=0.0)
    p.add_argument("--alpha-im", type=float, default=1.0)
    p.add_argument("--x-cl", type=float, default=1.0)
    p.add_argument("--p-cl", type=float, default=0.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t-final", type=float, default=10.0)
    common(p)
    p.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "preset" and args.action == "expand" and not args.name:
        print("error: preset expand needs a name", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SLEError as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
