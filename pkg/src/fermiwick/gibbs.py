"""Exact Gibbs expectation values by enumeration over occupation patterns.

This is the brute-force oracle the closed-form and perturbative routes are
checked against. Weights are shifted by the lowest level before
exponentiation and accumulated with compensated summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import InvalidArgumentError
from .spectra import ModeEnergies


@dataclass(frozen=True)
class GibbsMoments:
    """All one- and two-mode densities of a diagonal Gibbs state."""

    log_z: float
    occupation: np.ndarray
    pair_occupation: np.ndarray

    @property
    def partition_function(self) -> float:
        return math.exp(self.log_z)


def moments(m: ModeEnergies) -> GibbsMoments:
    emin, total, occ, pair = kernels.gibbs_moments(m.level_energies(), m.n_modes)
    pair = pair / total
    np.fill_diagonal(pair, occ / total)
    return GibbsMoments(math.log(total) - emin, occ / total, pair)


def _check_mode(m, k):
    if not 0 <= k < m.n_modes:
        raise InvalidArgumentError(f"mode index {k} out of range for {m.n_modes} modes")


def exact_partition_function(m: ModeEnergies) -> float:
    """Z = sum over all occupation patterns of exp(-E(n)), E0 included."""
    return moments(m).partition_function


def exact_occupation(m: ModeEnergies, k: int) -> float:
    _check_mode(m, k)
    return float(moments(m).occupation[k])


def exact_pair_occupation(m: ModeEnergies, k: int, l: int) -> float:
    _check_mode(m, k)
    _check_mode(m, l)
    if k == l:
        raise InvalidArgumentError("pair occupation needs k != l; n_k**2 = n_k")
    return float(moments(m).pair_occupation[k, l])
