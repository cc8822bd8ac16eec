"""Diagonal entanglement Hamiltonians and their labeled spectra.

A diagonal entanglement Hamiltonian over ``N`` fermionic modes is stored as
subset energies: ``E(n) = e0 + sum_i eps_i n_i + sum_{i<j} eps_ij n_i n_j +
...``, one coefficient per subset of occupied modes. Occupation patterns are
integer bitmasks with bit ``i`` holding ``n_i``; modes are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ._backend import kernels
from .errors import CapacityError, InvalidArgumentError, MalformedSpectrumError

MAX_MODES = 20


def _check_capacity(n_modes):
    if n_modes < 1:
        raise InvalidArgumentError("need at least one mode")
    if n_modes > MAX_MODES:
        raise CapacityError(f"{n_modes} modes exceeds the enumeration cap of {MAX_MODES}")


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def bits_to_mask(bits: str) -> int:
    """``"10"`` (mode 0 occupied, mode 1 empty) -> ``0b01``."""
    if not bits or set(bits) - {"0", "1"}:
        raise InvalidArgumentError(f"not an occupation bitstring: {bits!r}")
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


def mask_to_bits(mask: int, n_modes: int) -> str:
    return "".join("1" if (mask >> i) & 1 else "0" for i in range(n_modes))


def _as_mask(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    return sum(1 << int(i) for i in key)


@dataclass(frozen=True)
class ModeEnergies:
    """Parameters of a diagonal entanglement Hamiltonian.

    ``interactions`` maps bitmasks with two or more set bits to their subset
    energy; a missing key means exactly zero.
    """

    single: np.ndarray
    e0: float = 0.0
    interactions: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        single = np.array(self.single, dtype=np.float64).reshape(-1)
        single.setflags(write=False)
        object.__setattr__(self, "single", single)
        n = single.size
        _check_capacity(n)
        if not np.all(np.isfinite(single)) or not math.isfinite(self.e0):
            raise InvalidArgumentError("mode energies must be finite")
        clean = {}
        for key, value in self.interactions.items():
            mask = _as_mask(key)
            if popcount(mask) < 2 or mask >> n:
                raise InvalidArgumentError(f"invalid interaction subset {key!r} for {n} modes")
            if not math.isfinite(value):
                raise InvalidArgumentError("mode energies must be finite")
            clean[mask] = float(value)
        object.__setattr__(self, "interactions", clean)
        object.__setattr__(self, "e0", float(self.e0))

    @classmethod
    def from_terms(cls, single, pair=None, higher=None, e0=0.0):
        """Build from ``pair={(i, j): eps_ij}`` and ``higher={(i, j, k, ...): eps}``."""
        terms = {}
        for (i, j), value in (pair or {}).items():
            if i == j:
                raise InvalidArgumentError("pair term needs two distinct modes")
            terms[_as_mask((i, j))] = value
        for key, value in (higher or {}).items():
            mask = _as_mask(key)
            if popcount(mask) < 3:
                raise InvalidArgumentError("higher terms need at least three modes")
            terms[mask] = value
        return cls(single=single, e0=e0, interactions=terms)

    @property
    def n_modes(self) -> int:
        return self.single.size

    @property
    def pair(self) -> dict:
        out = {}
        for mask, value in self.interactions.items():
            if popcount(mask) == 2:
                i = (mask & -mask).bit_length() - 1
                j = mask.bit_length() - 1
                out[(i, j)] = value
        return out

    @property
    def higher(self) -> dict:
        return {m: v for m, v in self.interactions.items() if popcount(m) > 2}

    def pair_energy(self, i: int, j: int) -> float:
        return self.interactions.get((1 << i) | (1 << j), 0.0)

    def is_free(self) -> bool:
        return all(v == 0.0 for v in self.interactions.values())

    def subset_vector(self) -> np.ndarray:
        """Dense length-2**N array of subset energies indexed by bitmask."""
        n = self.n_modes
        vec = np.zeros(1 << n)
        vec[0] = self.e0
        vec[1 << np.arange(n)] = self.single
        for mask, value in self.interactions.items():
            vec[mask] = value
        return vec

    def level_energies(self) -> np.ndarray:
        """E(n) for every bitmask n, in ascending bitmask order."""
        return kernels.zeta_transform(np.ascontiguousarray(self.subset_vector()), self.n_modes)

    def with_interactions_scaled(self, scale: float) -> "ModeEnergies":
        return ModeEnergies(
            self.single, self.e0, {m: scale * v for m, v in self.interactions.items()}
        )


@dataclass(frozen=True)
class EntanglementSpectrum:
    """Entanglement energies, optionally labeled by occupation bitmasks.

    ``flagged`` marks levels whose energy was clamped at an eigenvalue floor;
    they are carried along but excluded from quality metrics.
    """

    energies: np.ndarray
    labels: np.ndarray | None = None
    n_modes: int | None = None
    normalized: bool = False
    flagged: np.ndarray | None = None

    def __post_init__(self):
        energies = np.array(self.energies, dtype=np.float64).reshape(-1)
        if energies.size == 0:
            raise MalformedSpectrumError("empty spectrum")
        if not np.all(np.isfinite(energies)):
            raise InvalidArgumentError("entanglement energies must be finite")
        energies.setflags(write=False)
        object.__setattr__(self, "energies", energies)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64).reshape(-1)
            if labels.size != energies.size:
                raise MalformedSpectrumError("label count does not match level count")
            if np.unique(labels).size != labels.size:
                raise MalformedSpectrumError("duplicate occupation labels")
            if labels.min() < 0:
                raise MalformedSpectrumError("negative occupation label")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
            if self.n_modes is None:
                object.__setattr__(self, "n_modes", max(1, int(labels.max()).bit_length()))
            elif int(labels.max()) >> self.n_modes:
                raise MalformedSpectrumError("label wider than the number of modes")
        if self.flagged is not None:
            flagged = np.array(self.flagged, dtype=bool).reshape(-1)
            if flagged.size != energies.size:
                raise InvalidArgumentError("flag count does not match level count")
            object.__setattr__(self, "flagged", flagged)
        if self.normalized and abs(math.fsum(np.exp(-energies)) - 1.0) > 1e-10:
            raise InvalidArgumentError("spectrum flagged normalized but probabilities do not sum to 1")

    def __len__(self):
        return self.energies.size

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(-self.energies)

    @property
    def is_complete(self) -> bool:
        if self.labels is None or self.n_modes is None:
            return False
        return self.energies.size == 1 << self.n_modes

    def normalize(self) -> "EntanglementSpectrum":
        """Fold ln Z into the energies so the probabilities sum to one."""
        emin = self.energies.min()
        log_z = -emin + math.log(math.fsum(np.exp(-(self.energies - emin))))
        return EntanglementSpectrum(
            self.energies + log_z, self.labels, self.n_modes, True, self.flagged
        )

    def sorted_probabilities(self) -> np.ndarray:
        return np.sort(self.probabilities)[::-1]

    def energy_by_label(self) -> np.ndarray:
        """Energies rearranged into bitmask order; requires a complete labeling."""
        if self.labels is None:
            raise MalformedSpectrumError("spectrum is unlabeled")
        n = self.n_modes
        if self.energies.size != 1 << n:
            raise MalformedSpectrumError(
                f"expected {1 << n} labeled levels for {n} modes, got {self.energies.size}"
            )
        out = np.empty(1 << n)
        out[self.labels] = self.energies
        return out


def free_partition_function(single) -> float:
    """Z = prod_i (1 + exp(-eps_i))."""
    eps = np.asarray(single, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(eps)):
        raise InvalidArgumentError("single-mode energies must be finite")
    return float(np.prod(1.0 + np.exp(-eps)))


def free_occupation(eps_k: float) -> float:
    """Occupation 1 / (1 + exp(eps_k)) of a free mode."""
    if not math.isfinite(eps_k):
        raise InvalidArgumentError("single-mode energy must be finite")
    # logistic form that neither overflows nor cancels
    if eps_k >= 0:
        t = math.exp(-eps_k)
        return t / (1.0 + t)
    return 1.0 / (1.0 + math.exp(eps_k))


def mode_energies_to_spectrum(m: ModeEnergies, normalized: bool = False) -> EntanglementSpectrum:
    """Complete spectrum with one level per occupation pattern, bitmask-ordered."""
    spec = EntanglementSpectrum(
        m.level_energies(), np.arange(1 << m.n_modes), m.n_modes, False
    )
    return spec.normalize() if normalized else spec


def spectrum_to_mode_energies(s: EntanglementSpectrum) -> ModeEnergies:
    """Exact subset-energy inversion of a complete labeled spectrum."""
    if s.labels is None:
        raise MalformedSpectrumError("inversion needs occupation labels")
    n = s.n_modes
    _check_capacity(n)
    levels = s.energy_by_label()
    subsets = kernels.mobius_transform(np.ascontiguousarray(levels), n)
    singles = subsets[1 << np.arange(n)]
    interactions = {
        int(mask): float(subsets[mask])
        for mask in range(1 << n)
        if popcount(mask) >= 2 and subsets[mask] != 0.0
    }
    return ModeEnergies(singles, float(subsets[0]), interactions)


def read_spectrum(lines: Iterable[str], n_modes: int | None = None) -> EntanglementSpectrum:
    """Parse the text format: ``label_bits,energy`` or ``energy`` per line.

    ``#`` lines and blank lines are skipped. Labeled and unlabeled lines
    cannot be mixed.
    """
    energies, labels = [], []
    seen = set()
    width = None
    labeled = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) > 2:
            raise MalformedSpectrumError("too many fields", lineno)
        this_labeled = len(parts) == 2
        if labeled is None:
            labeled = this_labeled
        elif labeled != this_labeled:
            raise MalformedSpectrumError("mixed labeled and unlabeled levels", lineno)
        try:
            energy = float(parts[-1])
        except ValueError:
            raise MalformedSpectrumError(f"bad energy {parts[-1]!r}", lineno) from None
        if not math.isfinite(energy):
            raise MalformedSpectrumError("non-finite energy", lineno)
        if this_labeled:
            bits = parts[0]
            if not bits or set(bits) - {"0", "1"}:
                raise MalformedSpectrumError(f"bad label {bits!r}", lineno)
            if width is None:
                width = len(bits)
            elif len(bits) != width:
                raise MalformedSpectrumError("inconsistent label width", lineno)
            mask = bits_to_mask(bits)
            if mask in seen:
                raise MalformedSpectrumError(f"duplicate label {bits}", lineno)
            seen.add(mask)
            labels.append(mask)
        energies.append(energy)
    if not energies:
        raise MalformedSpectrumError("empty spectrum")
    probs = math.fsum(math.exp(-e) for e in energies)
    normalized = abs(probs - 1.0) <= 1e-10
    if labeled:
        if n_modes is not None and n_modes != width:
            raise MalformedSpectrumError(f"labels have {width} bits, expected {n_modes}")
        return EntanglementSpectrum(energies, labels, width, normalized)
    return EntanglementSpectrum(energies, None, n_modes, normalized)


def format_spectrum(s: EntanglementSpectrum) -> str:
    """Text form with 17 significant digits, one level per line."""
    out = []
    if s.labels is None:
        for e in s.energies:
            out.append(f"{e:.17g}")
    else:
        for label, e in zip(s.labels, s.energies):
            out.append(f"{mask_to_bits(int(label), s.n_modes)},{e:.17g}")
    return "\n".join(out) + "\n"
