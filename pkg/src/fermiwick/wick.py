"""Wick-decomposition violation W = |<n_i n_j> - <n_i><n_j>|.

Three independent routes: exact enumeration of the Gibbs state, the
closed form for two interacting modes, and first-order expansions in the
pair energies evaluated by enumeration over spectator modes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import gibbs
from .errors import InvalidArgumentError, UnsupportedModelError
from .spectra import ModeEnergies


class Method(str, enum.Enum):
    EXACT = "exact"
    TWO_MODE_CLOSED = "two-mode-closed"
    PERTURBATIVE = "perturbative"
    DIRECT_CORRELATOR = "direct-correlator"


@dataclass(frozen=True)
class WickReport:
    """Pairwise violations for i < j plus their maximum (0 when there are no pairs)."""

    n_modes: int
    pairwise: dict
    method: Method

    @property
    def w_max(self) -> float:
        return max(self.pairwise.values(), default=0.0)

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.n_modes, self.n_modes))
        for (i, j), w in self.pairwise.items():
            out[i, j] = out[j, i] = w
        return out


def _check_pair(m, i, j):
    n = m.n_modes
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidArgumentError(f"mode pair ({i}, {j}) out of range for {n} modes")
    if i == j:
        raise InvalidArgumentError("violation needs two distinct modes")


def violation_exact(m: ModeEnergies, i: int, j: int) -> float:
    _check_pair(m, i, j)
    mom = gibbs.moments(m)
    return abs(mom.pair_occupation[i, j] - mom.occupation[i] * mom.occupation[j])


def violation_two_mode_closed(e1: float, e2: float, e12: float, as_printed: bool = False) -> float:
    """Closed-form W for the two-mode spectrum {0, E1, E2, E12}.

    The default is the form that follows from the one- and two-mode
    densities, ``e^{E12} |1 - e^{E12-E1-E2}| / D**2`` with
    ``D = 1 + e^{E12-E1} + e^{E12-E2} + e^{E12}``. ``as_printed`` drops the
    ``e^{E12}`` prefactor; that variant differs from the exact value by a
    factor ``e^{-E12}`` and is kept only for comparison.
    """
    if not all(math.isfinite(x) for x in (e1, e2, e12)):
        raise InvalidArgumentError("entanglement energies must be finite")
    denom = 1.0 + math.exp(e12 - e1) + math.exp(e12 - e2) + math.exp(e12)
    numer = abs(-math.expm1(e12 - e1 - e2))
    if as_printed:
        return numer / denom**2
    # e^{E12} / D^2 == e^{-E12} / Z^2, evaluated without overflow at large E12
    z = 1.0 + math.exp(-e1) + math.exp(-e2) + math.exp(-e12)
    return numer * math.exp(-e12) / z**2


def _two_body_arrays(m: ModeEnergies):
    if m.higher:
        raise UnsupportedModelError("first-order formulas need a two-body model (no higher terms)")
    n = m.n_modes
    upper = np.zeros((n, n))
    for (i, j), v in m.pair.items():
        upper[i, j] = v
    return upper, upper + upper.T


def _spectator_patterns(spectators):
    count = len(spectators)
    idx = np.arange(1 << count)
    return ((idx[:, None] >> np.arange(count)) & 1).astype(np.float64)


def _fsum(a) -> float:
    return math.fsum(np.asarray(a).ravel())


def perturbative_occupation(m: ModeEnergies, k: int) -> float:
    """<n_k> with numerator and Z expanded to first order in the pair energies.

    The raw ratio is returned; no clamping to [0, 1].
    """
    if not 0 <= k < m.n_modes:
        raise InvalidArgumentError(f"mode index {k} out of range")
    upper, sym = _two_body_arrays(m)
    eps = m.single
    spect = [i for i in range(m.n_modes) if i != k]
    occ = _spectator_patterns(spect)
    w = np.exp(-occ @ eps[spect])
    among = np.einsum("si,ij,sj->s", occ, upper[np.ix_(spect, spect)], occ)
    with_k = occ @ sym[spect, k]
    block_empty = _fsum(w * (1.0 - among))
    block_full = _fsum(w * (1.0 - among - with_k))
    ek = math.exp(-eps[k])
    z = block_empty + ek * block_full
    return ek * block_full / z


def perturbative_pair_occupation(m: ModeEnergies, k: int, l: int, as_printed: bool = False) -> float:
    """<n_k n_l> from the four-block first-order expansion of Z.

    By default the numerator is the doubly-occupied block kept to first
    order, which makes the ratio accurate to second order. ``as_printed``
    uses the zeroth-order numerator ``e^{-eps_k-eps_l} prod_i (1 + e^{-eps_i})``
    instead; its error is first order in the pair energies.
    """
    n = m.n_modes
    if not (0 <= k < n and 0 <= l < n) or k == l:
        raise InvalidArgumentError(f"invalid mode pair ({k}, {l})")
    upper, sym = _two_body_arrays(m)
    eps = m.single
    spect = [i for i in range(n) if i not in (k, l)]
    occ = _spectator_patterns(spect)
    w = np.exp(-occ @ eps[spect])
    among = np.einsum("si,ij,sj->s", occ, upper[np.ix_(spect, spect)], occ)
    with_k = occ @ sym[spect, k]
    with_l = occ @ sym[spect, l]
    b00 = _fsum(w * (1.0 - among))
    b10 = _fsum(w * (1.0 - among - with_k))
    b01 = _fsum(w * (1.0 - among - with_l))
    b11 = _fsum(w * (1.0 - sym[k, l] - among - with_k - with_l))
    ekl = math.exp(-eps[k] - eps[l])
    z = b00 + math.exp(-eps[k]) * b10 + math.exp(-eps[l]) * b01 + ekl * b11
    if as_printed:
        return ekl * float(np.prod(1.0 + np.exp(-eps[spect]))) / z
    return ekl * b11 / z


def violation_perturbative(m: ModeEnergies, i: int, j: int, as_printed: bool = False) -> float:
    _check_pair(m, i, j)
    pair = perturbative_pair_occupation(m, i, j, as_printed=as_printed)
    return abs(pair - perturbative_occupation(m, i) * perturbative_occupation(m, j))


def report(m: ModeEnergies, method: Method | str = Method.EXACT, as_printed: bool = False) -> WickReport:
    """Violation for every mode pair i < j by the requested route."""
    method = Method(method)
    n = m.n_modes
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if method is Method.EXACT:
        mom = gibbs.moments(m)
        occ, both = mom.occupation, mom.pair_occupation
        values = {(i, j): float(abs(both[i, j] - occ[i] * occ[j])) for i, j in pairs}
    elif method is Method.TWO_MODE_CLOSED:
        if n != 2:
            raise UnsupportedModelError("two-mode closed form needs exactly two modes")
        e1, e2 = m.single
        e12 = e1 + e2 + m.pair_energy(0, 1)
        values = {(0, 1): violation_two_mode_closed(e1, e2, e12, as_printed=as_printed)}
    elif method is Method.PERTURBATIVE:
        values = {(i, j): violation_perturbative(m, i, j, as_printed=as_printed) for i, j in pairs}
    else:
        raise UnsupportedModelError("direct correlators come from edengine.direct_wick_violation")
    return WickReport(n, values, method)
