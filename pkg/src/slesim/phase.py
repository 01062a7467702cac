"""Phase of the wave field and the friction potential A (S - <S>).

Two prescriptions are supported. ``polar`` builds S by accumulating
Arg[psi(x+dx)/psi(x)] from point to point, which produces +pi steps at the
nodes of a real field. ``arctan`` takes arctan(Im psi / Re psi) pointwise and
is identically zero on real fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import WaveField, trapezoid_weights
from .spectrum import Eigenbasis

__all__ = [
    "POLAR",
    "ARCTAN",
    "PhaseField",
    "unwrap_polar",
    "phase_arctan",
    "phase_of",
    "friction_potential",
    "friction_matrix_elements",
    "prescription_code",
]

POLAR = "polar"
ARCTAN = "arctan"

#: amplitudes below this fraction of max|psi| do not contribute a phase increment
DEFAULT_GUARD = 1e-12


def prescription_code(prescription: str) -> int:
    try:
        return {POLAR: K.POLAR, ARCTAN: K.ARCTAN, "none": K.NO_FRICTION}[prescription]
    except KeyError:
        raise ValueError(f"unknown prescription {prescription!r}") from None


@dataclass(frozen=True, eq=False)
class PhaseField:
    values: np.ndarray = field(repr=False)
    prescription: str
    reference_index: int

    def shifted(self, c: float) -> "PhaseField":
        return PhaseField(self.values + c, self.prescription, self.reference_index)


def unwrap_polar(field: WaveField, reference_index: int | None = None,
                 guard: float = DEFAULT_GUARD) -> PhaseField:
    """Polar phase with S(reference) = Arg psi(reference).

    Points where |psi| < guard * max|psi| take the running value of S; the
    increment across them is taken between the neighbouring significant
    points, so a sign change hidden behind an exact node still shows up as a
    +pi step.
    """
    ref = field.grid.midpoint if reference_index is None else reference_index
    out = np.empty(field.grid.n_points)
    K.polar_phase(field.amps, ref, guard, out)
    return PhaseField(out, POLAR, ref)


def phase_arctan(field: WaveField) -> PhaseField:
    out = np.empty(field.grid.n_points)
    K.arctan_phase(field.amps, out)
    return PhaseField(out, ARCTAN, field.grid.midpoint)


def phase_of(field: WaveField, prescription: str, guard: float = DEFAULT_GUARD) -> PhaseField:
    if prescription == POLAR:
        return unwrap_polar(field, guard=guard)
    if prescription == ARCTAN:
        return phase_arctan(field)
    raise ValueError(f"unknown prescription {prescription!r}")


def mean_phase(field: WaveField, S: PhaseField) -> float:
    return float(K.weighted_mean(S.values, field.amps, trapezoid_weights(field.grid)))


def friction_potential(field: WaveField, S: PhaseField, A: float) -> np.ndarray:
    if A == 0:
        return np.zeros(field.grid.n_points)
    return A * (S.values - mean_phase(field, S))


def friction_matrix_elements(basis: Eigenbasis, m: int,
                             prescription: str = POLAR) -> np.ndarray:
    """Couplings <psi_n|(S - <S>)|psi_m> for every n, S taken from psi_m itself."""
    if not 0 <= m < basis.n_levels:
        raise IndexError(f"m={m} outside basis of {basis.n_levels} levels")
    psi_m = WaveField(basis.grid, basis.vectors[m].astype(complex))
    S = phase_of(psi_m, prescription)
    dS = S.values - mean_phase(psi_m, S)
    w = trapezoid_weights(basis.grid)
    return (basis.vectors * w) @ (dS * psi_m.amps)
