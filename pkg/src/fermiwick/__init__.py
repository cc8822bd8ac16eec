"""Wick-theorem violation and interaction distance for fermionic entanglement spectra."""
from ._backend import BACKEND
from .errors import (
    AmbiguousLabelError,
    CapacityError,
    FermiwickError,
    InvalidArgumentError,
    LabelCollisionError,
    MalformedSpectrumError,
    UnsupportedModelError,
)
from .gibbs import GibbsMoments, exact_occupation, exact_pair_occupation, exact_partition_function, moments
from .intdist import FitConfig, FreeFitResult, check_bound, fit_free_spectrum, trace_distance_diagonal
from .spectra import (
    EntanglementSpectrum,
    ModeEnergies,
    format_spectrum,
    free_occupation,
    free_partition_function,
    mode_energies_to_spectrum,
    read_spectrum,
    spectrum_to_mode_energies,
)
from .wick import Method, WickReport, report, violation_exact, violation_perturbative, violation_two_mode_closed

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AmbiguousLabelError", "CapacityError", "FermiwickError", "InvalidArgumentError",
    "LabelCollisionError", "MalformedSpectrumError", "UnsupportedModelError", "GibbsMoments",
    "exact_occupation", "exact_pair_occupation", "exact_partition_function", "moments", "FitConfig",
    "FreeFitResult", "check_bound", "fit_free_spectrum", "trace_distance_diagonal",
    "EntanglementSpectrum", "ModeEnergies", "format_spectrum", "free_occupation",
    "free_partition_function", "mode_energies_to_spectrum", "read_spectrum",
    "spectrum_to_mode_energies", "Method", "WickReport", "report", "violation_exact",
    "violation_perturbative", "violation_two_mode_closed",
]
