"""Exception hierarchy shared across the toolkit.

Everything user-facing derives from UwbposError so the CLI can map domain
failures to exit code 1 and leave genuine IO errors (OSError) on exit code 2.
"""


class UwbposError(Exception):
    """Base class for all domain errors raised by uwbpos."""


class DegenerateGeometry(UwbposError):
    """Anchor layout is collinear or duplicated; trilateration is unsolvable."""


class DegenerateFit(UwbposError):
    """Calibration points share one real distance; the line fit is underdetermined."""


class InvalidSlope(UwbposError):
    """A fitted or supplied distortion slope is not strictly positive."""


class EmptyInput(UwbposError):
    """An aggregate was requested over zero samples."""


class InvalidK(UwbposError):
    """Measurement-calibration percentage outside (0, 100]."""


class NonDividingCellSize(UwbposError):
    """Grid cell size does not divide the zone dimensions exactly."""


class OutOfZone(UwbposError):
    """A point lies outside the configured testing zone."""


class ShapeMismatch(UwbposError):
    """Network weights, biases, or inputs have inconsistent shapes."""


class EmptyDatabase(UwbposError):
    """A distance database contains no entries."""


class DivergedLoss(UwbposError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class ZeroBaseline(UwbposError):
    """Improvement percentage is undefined for a non-positive baseline."""


class InsufficientData(UwbposError):
    """Ingested measurements hold fewer repeats than requested."""


class MissingReferencePoint(UwbposError):
    """A strategy reference point is absent from the measurement file."""


class GridMismatch(UwbposError):
    """A model or database was built for a different grid than configured."""


class ConfigError(UwbposError):
    """Pipeline configuration is missing, malformed, or has unknown keys."""
