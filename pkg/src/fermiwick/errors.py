"""Exception hierarchy."""


class FermiwickError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FermiwickError, ValueError):
    pass


class CapacityError(FermiwickError, ValueError):
    """Requested enumeration or Hilbert space exceeds the hard size guard."""


class MalformedSpectrumError(FermiwickError, ValueError):
    """Missing, duplicate or unparsable spectrum levels."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedModelError(FermiwickError, ValueError):
    """Method cannot be applied to the given mode energies."""


class AmbiguousLabelError(FermiwickError):
    """An occupation expectation is too far from 0 or 1 to round."""


class LabelCollisionError(FermiwickError):
    """Two eigenvectors rounded to the same occupation pattern."""
