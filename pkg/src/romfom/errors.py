"""Exception types raised by romfom."""


class RomFomError(Exception):
    """Base class for all library errors."""


class ParseError(RomFomError, ValueError):
    """A matrix file could not be decoded."""


class ShapeError(RomFomError, ValueError):
    """Array dimensions are inconsistent."""


class InsufficientDataError(RomFomError, ValueError):
    """Too few snapshots for the requested operation."""


class BoundsError(RomFomError, ValueError):
    """A coordinate or index lies outside its admissible range."""


class DegenerateDataError(RomFomError, ValueError):
    """Snapshot data carry no information (e.g. all zeros)."""


class RankError(RomFomError, ValueError):
    """Requested rank exceeds the numerical rank of the data."""


class ConditioningError(RomFomError, ArithmeticError):
    """The regularized normal matrix is numerically singular."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(f"{message} (estimated condition number {condition_number:.3e})")
        self.condition_number = condition_number


class ConfigError(RomFomError, ValueError):
    """Invalid configuration."""


class DivergenceError(RomFomError, ArithmeticError):
    """A time integrator produced non-finite values."""

    def __init__(self, stage, t=None):
        msg = f"non-finite value in RK4 stage {stage}"
        if t is not None:
            msg += f" at t={t:.6g}"
        super().__init__(msg)
        self.stage = stage
        self.t = t


class RowInferenceError(RomFomError):
    """Inference failed for one sparse full-order row."""

    def __init__(self, row, cause):
        super().__init__(f"inference failed for row {row}: {cause}")
        self.row = row
        self.cause = cause
