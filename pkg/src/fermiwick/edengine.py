"""Exact diagonalization of the spinless t-V chain and its entanglement data.

    H = -t sum_i (c+_i c_{i+1} + h.c.) + V sum_i n_i n_{i+1} + mu sum_i n_i

Basis states are bitmasks with bit ``i`` the occupation of site ``i``, and
fermionic signs follow the site ordering 0..L-1. Subsystem A is always the
left block of ``cut`` sites, i.e. the low bits, so a many-body state factors
as ``|n_A>|n_B>`` without string corrections.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import (
    AmbiguousLabelError,
    CapacityError,
    InvalidArgumentError,
    LabelCollisionError,
)
from .intdist import BoundCheck, FreeFitResult, check_bound, fit_free_spectrum
from .spectra import EntanglementSpectrum
from .wick import Method, WickReport

MAX_SECTOR_DIM = 100_000
MAX_OPERATOR_SITES = 10
EIGENVALUE_FLOOR = 1e-30
DEGENERACY_GAP = 1e-10


class DegenerateGroundStateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LatticeModel:
    length: int
    hopping: float = 1.0
    interaction: float = 0.0
    chemical_potential: float = 0.0
    boundary: str = "open"
    filling: int | None = None

    def __post_init__(self):
        if self.length < 2:
            raise InvalidArgumentError("chain needs at least two sites")
        if self.boundary not in ("open", "periodic"):
            raise InvalidArgumentError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.filling is None:
            object.__setattr__(self, "filling", self.length // 2)
        if not 0 <= self.filling <= self.length:
            raise InvalidArgumentError("filling must lie in [0, L]")
        for name in ("hopping", "interaction", "chemical_potential"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")

    def bonds(self):
        out = [(i, i + 1) for i in range(self.length - 1)]
        if self.boundary == "periodic" and self.length > 2:
            out.append((self.length - 1, 0))
        return out


@dataclass(frozen=True)
class SectorHamiltonian:
    matrix: np.ndarray
    basis: np.ndarray
    model: LatticeModel


@dataclass(frozen=True)
class GroundState:
    energy: float
    vector: np.ndarray
    gap: float

    @property
    def degenerate(self) -> bool:
        return self.gap < DEGENERACY_GAP


@dataclass(frozen=True)
class ReducedState:
    """Reduced density matrix of the left block and its eigen-decomposition.

    ``eigvecs`` are columns in the A occupation basis; ``sectors`` holds the
    A particle number of each eigenvector.
    """

    cut: int
    rho_a: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    sectors: np.ndarray


@dataclass(frozen=True)
class NaturalOrbitalBasis:
    corr: np.ndarray
    occupations: np.ndarray
    orbitals: np.ndarray
    degenerate_pairs: tuple = field(default_factory=tuple)


def _popcount(x):
    return bin(x).count("1")


def _sector_basis(length, filling):
    states = [sum(1 << i for i in occ) for occ in combinations(range(length), filling)]
    return np.array(sorted(states), dtype=np.int64)


def build_hamiltonian(model: LatticeModel) -> SectorHamiltonian:
    """Dense Hamiltonian in the fixed-particle-number sector."""
    dim = math.comb(model.length, model.filling)
    if dim > MAX_SECTOR_DIM:
        raise CapacityError(f"sector dimension {dim} exceeds {MAX_SECTOR_DIM}")
    basis = _sector_basis(model.length, model.filling)
    index = {int(s): k for k, s in enumerate(basis)}
    h = np.zeros((dim, dim))
    t, v, mu = model.hopping, model.interaction, model.chemical_potential
    bonds = model.bonds()
    for col, state in enumerate(basis):
        state = int(state)
        diag = mu * _popcount(state)
        for i, j in bonds:
            ni, nj = (state >> i) & 1, (state >> j) & 1
            diag += v * ni * nj
            for a, b in ((i, j), (j, i)):
                # c+_a c_b
                if (state >> b) & 1 and not (state >> a) & 1:
                    mid = state ^ (1 << b)
                    sign = (-1) ** (_popcount(state & ((1 << b) - 1)) + _popcount(mid & ((1 << a) - 1)))
                    h[index[mid | (1 << a)], col] += -t * sign
        h[col, col] += diag
    return SectorHamiltonian(h, basis, model)


def _fix_phase(vec):
    # first significant amplitude made positive
    scale = np.abs(vec).max()
    first = np.flatnonzero(np.abs(vec) > 1e-8 * scale)[0]
    return vec if vec[first] > 0 else -vec


def ground_state(h) -> GroundState:
    """Lowest eigenpair; warns when the gap is below 1e-10."""
    h = h.matrix if isinstance(h, SectorHamiltonian) else np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgumentError("Hamiltonian must be square")
    scale = max(1.0, np.abs(h).max())
    if np.abs(h - h.conj().T).max() > 1e-12 * scale:
        raise InvalidArgumentError("Hamiltonian is not Hermitian")
    vals, vecs = np.linalg.eigh(h)
    gap = float(vals[1] - vals[0]) if vals.size > 1 else math.inf
    if gap < DEGENERACY_GAP:
        warnings.warn(f"ground state is degenerate to {gap:.3g}", DegenerateGroundStateWarning, stacklevel=2)
    return GroundState(float(vals[0]), _fix_phase(vecs[:, 0]), gap)


def reduced_density_matrix(psi, basis, length: int, cut: int) -> ReducedState:
    """Trace out sites cut..L-1 via a Schmidt decomposition per A-number sector.

    Eigenvalues come from squared singular values, which keeps small
    eigenvalues accurate to high relative precision.
    """
    if not 1 <= cut <= length - 1:
        raise InvalidArgumentError(f"cut must be in [1, {length - 1}]")
    psi = np.asarray(psi, dtype=np.float64)
    basis = np.asarray(basis, dtype=np.int64)
    dim_a = 1 << cut
    mat = np.zeros((dim_a, 1 << (length - cut)))
    mat[basis & (dim_a - 1), basis >> cut] = psi
    norm = np.linalg.norm(psi)
    mat /= norm

    a_count = np.array([_popcount(a) for a in range(dim_a)])
    b_count = np.array([_popcount(b) for b in range(mat.shape[1])])
    filling = _popcount(int(basis[0]))
    vals, vecs, sectors = [], [], []
    for n_a in range(cut + 1):
        rows = np.flatnonzero(a_count == n_a)
        cols = np.flatnonzero(b_count == filling - n_a)
        block = mat[np.ix_(rows, cols)]
        if cols.size:
            u, s, _ = np.linalg.svd(block, full_matrices=True)
            lam = np.zeros(rows.size)
            lam[: s.size] = s**2
        else:
            u, lam = np.eye(rows.size), np.zeros(rows.size)
        for k in range(rows.size):
            full = np.zeros(dim_a)
            full[rows] = u[:, k]
            vecs.append(full)
            vals.append(lam[k])
            sectors.append(n_a)
    vals = np.array(vals)
    order = np.argsort(-vals, kind="stable")
    eigvecs = np.array(vecs).T[:, order]
    for k in range(eigvecs.shape[1]):
        col = eigvecs[:, k]
        eigvecs[:, k] = col if col[np.argmax(np.abs(col))] > 0 else -col
    return ReducedState(cut, mat @ mat.T, vals[order], eigvecs, np.array(sectors)[order])


@lru_cache(maxsize=None)
def _annihilators(ell):
    """Sparse c_i on the 2**ell-dimensional A Fock space."""
    dim = 1 << ell
    ops = []
    for i in range(ell):
        rows, cols, data = [], [], []
        for a in range(dim):
            if (a >> i) & 1:
                rows.append(a ^ (1 << i))
                cols.append(a)
                data.append((-1.0) ** _popcount(a & ((1 << i) - 1)))
        ops.append(sp.csr_matrix((data, (rows, cols)), shape=(dim, dim)))
    return tuple(ops)


def _expect(rho, op):
    # Tr(rho op) for sparse op
    return float(op.multiply(rho.T).sum())


def natural_orbitals(rs: ReducedState) -> NaturalOrbitalBasis:
    """Eigen-decomposition of C_ij = Tr(rho_A c+_i c_j), occupations descending."""
    c = _annihilators(rs.cut)
    ell = rs.cut
    corr = np.empty((ell, ell))
    for i in range(ell):
        for j in range(ell):
            corr[i, j] = _expect(rs.rho_a, c[i].T @ c[j])
    corr = 0.5 * (corr + corr.T)
    nu, phi = np.linalg.eigh(corr)
    nu, phi = nu[::-1], phi[:, ::-1].copy()
    for k in range(ell):
        if phi[np.argmax(np.abs(phi[:, k])), k] < 0:
            phi[:, k] *= -1
    pairs = tuple((k, k + 1) for k in range(ell - 1) if abs(nu[k] - nu[k + 1]) < DEGENERACY_GAP)
    return NaturalOrbitalBasis(corr, nu, phi, pairs)


def mode_operators(basis: NaturalOrbitalBasis):
    """Sparse a_k = sum_j phi_k(j) c_j for every natural orbital."""
    c = _annihilators(basis.orbitals.shape[0])
    return [sum(basis.orbitals[j, k] * c[j] for j in range(len(c))) for k in range(len(c))]


def mode_number_operators(basis: NaturalOrbitalBasis):
    return [(a.T @ a).tocsr() for a in mode_operators(basis)]


def direct_wick_violation(rs: ReducedState, basis: NaturalOrbitalBasis) -> WickReport:
    """W_kl from natural-orbital densities measured directly on rho_A."""
    ell = rs.cut
    if ell > MAX_OPERATOR_SITES:
        raise CapacityError(f"operators on {ell} sites exceed the {MAX_OPERATOR_SITES}-site limit")
    nops = mode_number_operators(basis)
    occ = [_expect(rs.rho_a, n) for n in nops]
    applied = [np.asarray(n @ rs.rho_a) for n in nops]
    values = {}
    for k in range(ell):
        for l in range(k + 1, ell):
            both = float(nops[k].multiply(applied[l].T).sum())
            values[(k, l)] = abs(both - occ[k] * occ[l])
    return WickReport(ell, values, Method.DIRECT_CORRELATOR)


def verify_full_wick(rs: ReducedState, i: int, j: int) -> float:
    """Residual of the full two-operator Wick decomposition in the site basis."""
    ell = rs.cut
    if not (0 <= i < ell and 0 <= j < ell):
        raise InvalidArgumentError(f"site indices must lie in A = [0, {ell})")
    c = _annihilators(ell)
    ci, cj = c[i], c[j]
    di, dj = ci.T.tocsr(), cj.T.tocsr()
    rho = rs.rho_a
    lhs = _expect(rho, di @ ci @ dj @ cj)
    rhs = (
        _expect(rho, di @ ci) * _expect(rho, dj @ cj)
        - _expect(rho, di @ dj) * _expect(rho, ci @ cj)
        + _expect(rho, di @ cj) * _expect(rho, ci @ dj)
    )
    return abs(lhs - rhs)


def max_anomalous_correlator(rs: ReducedState, basis: NaturalOrbitalBasis) -> float:
    """max |<a_k a_l>| over natural-orbital pairs; zero for number-conserving states."""
    ops = mode_operators(basis)
    vals = [abs(_expect(rs.rho_a, ops[k] @ ops[l])) for k in range(len(ops)) for l in range(len(ops))]
    return max(vals, default=0.0)


def number_commutator_norm(rs: ReducedState) -> float:
    n_tot = np.array([_popcount(a) for a in range(1 << rs.cut)], dtype=np.float64)
    comm = n_tot[:, None] * rs.rho_a - rs.rho_a * n_tot[None, :]
    return float(np.abs(comm).max())


def _sums_to_one(energies):
    # a coarse floor can lift clamped levels enough to spoil normalization
    return abs(math.fsum(np.exp(-energies)) - 1.0) <= 1e-10


def entanglement_spectrum(rs: ReducedState, floor: float = EIGENVALUE_FLOOR) -> EntanglementSpectrum:
    """Unlabeled spectrum E_k = -ln max(lambda_k, floor); clamped levels flagged."""
    lam = rs.eigvals
    energies = -np.log(np.maximum(lam, floor))
    return EntanglementSpectrum(energies, None, rs.cut, _sums_to_one(energies), lam < floor)


def _clusters(values, tol):
    # single-linkage groups of sorted values with consecutive gaps <= tol
    order = np.argsort(-values, kind="stable")
    groups, current = [], [order[0]]
    for prev, idx in zip(order[:-1], order[1:]):
        if values[prev] - values[idx] <= tol:
            current.append(idx)
        else:
            groups.append(current)
            current = [idx]
    groups.append(current)
    return groups


def label_spectrum(rs: ReducedState, basis: NaturalOrbitalBasis, margin: float = 0.25,
                   cluster_tol: float = 1e-12, floor: float = EIGENVALUE_FLOOR) -> EntanglementSpectrum:
    """Occupation labels for the eigenvectors of rho_A in the natural-orbital modes.

    Within each A-number sector, near-degenerate eigenvectors are first
    rotated to diagonalize ``sum_m 2**m n_m``, which makes free-state labels
    unique. Each label bit is the rounded natural-orbital occupation of the
    eigenvector.

    Raises
    ------
    AmbiguousLabelError
        An occupation lies further than ``margin`` from 0 or 1, or the
        rounded label disagrees with the eigenvector's particle number.
    LabelCollisionError
        Two eigenvectors round to the same label.
    """
    ell = rs.cut
    if ell > MAX_OPERATOR_SITES:
        raise CapacityError(f"operators on {ell} sites exceed the {MAX_OPERATOR_SITES}-site limit")
    nops = mode_number_operators(basis)
    label_op = sum((1 << m) * nops[m] for m in range(ell))
    vecs = rs.eigvecs.copy()
    for n_a in np.unique(rs.sectors):
        idx = np.flatnonzero(rs.sectors == n_a)
        for group in _clusters(rs.eigvals[idx], cluster_tol):
            if len(group) < 2:
                continue
            cols = idx[group]
            sub = vecs[:, cols]
            k = sub.T @ (label_op @ sub)
            _, rot = np.linalg.eigh(0.5 * (k + k.T))
            vecs[:, cols] = sub @ rot

    occ = np.array([[vecs[:, k] @ (n @ vecs[:, k]) for n in nops] for k in range(vecs.shape[1])])
    bits = np.rint(occ)
    off = np.abs(occ - bits)
    labels = np.zeros(vecs.shape[1], dtype=np.int64)
    for k in range(vecs.shape[1]):
        if off[k].max() >= margin:
            m = int(np.argmax(off[k]))
            raise AmbiguousLabelError(
                f"level {k} (lambda={rs.eigvals[k]:.3e}): occupation of mode {m} is {occ[k, m]:.4f}"
            )
        b = np.clip(bits[k], 0, 1).astype(np.int64)
        if b.sum() != rs.sectors[k]:
            raise AmbiguousLabelError(
                f"level {k}: label popcount {b.sum()} differs from sector {rs.sectors[k]}"
            )
        labels[k] = int((b << np.arange(ell)).sum())
    uniq, counts = np.unique(labels, return_counts=True)
    if np.any(counts > 1):
        dup = int(uniq[np.argmax(counts)])
        raise LabelCollisionError(f"label {dup:0{ell}b} assigned to {counts.max()} eigenvectors")
    lam = rs.eigvals
    energies = -np.log(np.maximum(lam, floor))
    return EntanglementSpectrum(energies, labels, ell, _sums_to_one(energies), lam < floor)


def reference_pair_energies(s: EntanglementSpectrum) -> dict:
    """Second differences E(r+i+j) - E(r+i) - E(r+j) + E(r) about the most probable pattern.

    Here ``r + i`` flips mode i. About the vacuum these are the inverted pair
    energies; about ``r`` they probe the same additivity while using the best
    resolved levels. All vanish for a free spectrum.
    """
    levels = s.energy_by_label()
    r = int(np.argmin(levels))
    n = s.n_modes
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            bi, bj = 1 << i, 1 << j
            out[(i, j)] = float(levels[r ^ bi ^ bj] - levels[r ^ bi] - levels[r ^ bj] + levels[r])
    return out


def additivity_defect(s: EntanglementSpectrum, min_probability: float = 1e-10) -> float:
    """Largest |E(n+i+j) - E(n+i) - E(n+j) + E(n)| over resolved quadruples.

    Taken over every base pattern ``n`` with modes i, j empty and all four
    levels carrying probability at least ``min_probability``; levels below
    that are dominated by round-off in -ln(lambda). Zero for free spectra.
    """
    levels = s.energy_by_label()
    resolved = np.exp(-levels) >= min_probability
    if s.flagged is not None:
        flagged = np.zeros(levels.size, dtype=bool)
        flagged[s.labels] = s.flagged
        resolved &= ~flagged
    worst = 0.0
    for i in range(s.n_modes):
        for j in range(i + 1, s.n_modes):
            bi, bj = 1 << i, 1 << j
            base = np.array([n for n in range(levels.size) if not n & (bi | bj)])
            quad = np.stack([base, base | bi, base | bj, base | bi | bj])
            ok = resolved[quad].all(axis=0)
            if ok.any():
                e = levels[quad[:, ok]]
                worst = max(worst, float(np.abs(e[3] - e[1] - e[2] + e[0]).max()))
    return worst


@dataclass(frozen=True)
class PipelineResult:
    model: LatticeModel
    cut: int
    ground: GroundState
    reduced: ReducedState
    orbitals: NaturalOrbitalBasis
    spectrum: EntanglementSpectrum
    labeling_error: str | None
    wick: WickReport
    fit: FreeFitResult
    bound: BoundCheck

    @property
    def labeled(self) -> bool:
        return self.labeling_error is None


def run_pipeline(model: LatticeModel, cut: int | None = None, cfg=None) -> PipelineResult:
    """Ground state -> rho_A -> spectrum, direct W, D_F and the W <= 6 D_F check.

    Labeling failures are recorded, not raised; the fit then runs on the
    unlabeled spectrum.
    """
    cut = model.length // 2 if cut is None else cut
    ham = build_hamiltonian(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateGroundStateWarning)
        gs = ground_state(ham)
    rs = reduced_density_matrix(gs.vector, ham.basis, model.length, cut)
    nob = natural_orbitals(rs)
    try:
        spec = label_spectrum(rs, nob)
        error = None
    except (AmbiguousLabelError, LabelCollisionError) as exc:
        spec = entanglement_spectrum(rs)
        error = f"{type(exc).__name__}: {exc}"
    report = direct_wick_violation(rs, nob)
    fit = fit_free_spectrum(spec, cut, cfg)
    return PipelineResult(model, cut, gs, rs, nob, spec, error, report, fit,
                          check_bound(report.w_max, fit.d_f))
