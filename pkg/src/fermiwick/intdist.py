"""Interaction distance: trace distance to the closest free spectrum.

For commuting diagonal states the trace distance reduces to half the L1
distance between the eigenvalue lists sorted in the same order. The closest
free spectrum is searched with multi-start Nelder-Mead over single-mode
energies; normalization fixes the overall shift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import CapacityError, InvalidArgumentError
from .spectra import MAX_MODES, EntanglementSpectrum

BOUND_FACTOR = 6.0
BOUND_TOL = 1e-9
OPTIMIZER_SLACK = 1e-6


@dataclass(frozen=True)
class FitConfig:
    restarts: int = 16
    evals_per_mode: int = 200
    tol: float = 1e-10
    seed: int = 0
    perturbation: float = 0.5

    def __post_init__(self):
        if self.restarts < 1 or self.evals_per_mode < 1:
            raise InvalidArgumentError("restarts and evaluation budget must be positive")
        if not self.tol > 0:
            raise InvalidArgumentError("tolerance must be positive")


@dataclass(frozen=True)
class FreeFitResult:
    eps_star: np.ndarray
    e0_star: float
    d_f: float
    objective_evals: int
    restarts_used: int
    converged: bool

    def free_probabilities(self) -> np.ndarray:
        """Probabilities of the fitted free spectrum, sorted descending."""
        return kernels.free_sorted_probabilities(np.ascontiguousarray(self.eps_star))


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    slack: float


def _check_normalized(p, name):
    total = math.fsum(p)
    if abs(total - 1.0) > 1e-10:
        raise InvalidArgumentError(f"{name} sums to {total!r}, not 1")
    if np.any(p < 0):
        raise InvalidArgumentError(f"{name} has negative entries")


def trace_distance_diagonal(p, q) -> float:
    """Half the L1 distance between two probability lists, each sorted descending.

    The shorter list is zero-padded.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    _check_normalized(p, "p")
    _check_normalized(q, "q")
    size = max(p.size, q.size)
    ps = np.zeros(size)
    qs = np.zeros(size)
    ps[: p.size] = np.sort(p)[::-1]
    qs[: q.size] = np.sort(q)[::-1]
    return min(1.0, 0.5 * math.fsum(np.abs(ps - qs)))


def _target(probabilities, n_modes):
    size = 1 << n_modes
    p = np.sort(probabilities)[::-1]
    target = np.zeros(size)
    head = p[:size]
    target[: head.size] = head
    tail = math.fsum(p[size:]) if p.size > size else 0.0
    return np.ascontiguousarray(target), tail


def initial_energies(s: EntanglementSpectrum, n_modes: int, signed: bool = False) -> np.ndarray:
    """Starting single-mode energies for the free fit.

    With a complete labeling: one-flip excitations about the most probable
    pattern ``r``, ``E(r xor e_i) - E(r)``, sign-corrected for modes occupied
    in ``r`` when ``signed``. These are exact for free spectra and avoid the
    tiny-weight levels a vacuum reference would use. Without labels: the
    gaps of the ``n_modes`` lowest excited levels.
    """
    if s.labels is not None and s.n_modes == n_modes and s.is_complete:
        levels = s.energy_by_label()
        ref = int(np.argmin(levels))
        flips = np.array([levels[ref ^ (1 << i)] - levels[ref] for i in range(n_modes)])
        if signed:
            occupied = (ref >> np.arange(n_modes)) & 1
            return np.where(occupied == 1, -flips, flips)
        return np.abs(flips)
    if signed:
        raise InvalidArgumentError("label-matched fit needs a complete labeled spectrum")
    e = np.sort(s.energies)
    gaps = e[1 : n_modes + 1] - e[0]
    out = np.full(n_modes, gaps[-1] if gaps.size else 1.0)
    out[: gaps.size] = gaps
    return out


def fit_free_spectrum(s: EntanglementSpectrum, n_modes: int | None = None,
                      cfg: FitConfig | None = None, pairing: str = "sorted") -> FreeFitResult:
    """Closest free spectrum to ``s`` under the diagonal trace distance.

    ``pairing="sorted"`` pairs both probability lists in descending order,
    so any free spectrum counts regardless of which occupation pattern a
    weight sits on. ``pairing="labeled"`` pairs levels by occupation label,
    restricting the search to states that are free in the spectrum's own
    modes; it needs a complete labeling and never gives a smaller distance.
    """
    cfg = cfg or FitConfig()
    if pairing not in ("sorted", "labeled"):
        raise InvalidArgumentError(f"unknown pairing {pairing!r}")
    labeled = pairing == "labeled"
    if not s.normalized:
        raise InvalidArgumentError("fit needs a normalized spectrum")
    if n_modes is None:
        n_modes = s.n_modes if s.n_modes is not None else max(1, math.ceil(math.log2(len(s))))
    if n_modes > MAX_MODES:
        raise CapacityError(f"{n_modes} modes exceeds the enumeration cap of {MAX_MODES}")
    if n_modes < 1:
        raise InvalidArgumentError("need at least one mode")

    p = s.probabilities
    if s.flagged is not None:
        p = np.where(s.flagged, 0.0, p)
    if labeled:
        if not s.is_complete or s.n_modes != n_modes:
            raise InvalidArgumentError("label-matched fit needs a complete labeled spectrum")
        target = np.zeros(1 << n_modes)
        target[s.labels] = p
        tail = 0.0
    else:
        target, tail = _target(p, n_modes)

    x0 = initial_energies(s, n_modes, signed=labeled)
    rng = np.random.default_rng(cfg.seed)
    starts = np.empty((cfg.restarts, n_modes))
    starts[0] = x0
    for r in range(1, cfg.restarts):
        starts[r] = x0 + cfg.perturbation * rng.standard_normal(n_modes)

    xs, fs, nfev, conv = kernels.nelder_mead_fit(
        np.ascontiguousarray(target), tail, np.ascontiguousarray(starts),
        cfg.evals_per_mode * n_modes, cfg.tol, labeled,
    )
    best = int(np.argmin(fs))
    if labeled:
        eps = xs[best].copy()
    else:
        # sorted pairing is blind to the sign of each energy; report |eps| ascending
        eps = np.sort(np.abs(xs[best]))
    e0 = float(np.sum(np.logaddexp(0.0, -eps)))
    return FreeFitResult(
        eps_star=eps,
        e0_star=e0,
        d_f=float(min(1.0, max(0.0, fs[best]))),
        objective_evals=int(nfev.sum()),
        restarts_used=cfg.restarts,
        converged=bool(conv.any()),
    )


def check_bound(w_max: float, d_f: float, tol: float = BOUND_TOL + OPTIMIZER_SLACK) -> BoundCheck:
    """Test W <= 6 D_F within ``tol``; slack is 6 D_F - W."""
    if w_max < 0 or d_f < 0:
        raise InvalidArgumentError("W and D_F are non-negative")
    slack = BOUND_FACTOR * d_f - w_max
    return BoundCheck(holds=bool(w_max <= BOUND_FACTOR * d_f + tol), slack=slack)
