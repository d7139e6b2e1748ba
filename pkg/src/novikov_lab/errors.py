"""Exception hierarchy shared by every module."""

from __future__ import annotations


class NovikovError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(NovikovError, ValueError):
    """A scalar parameter is outside its admissible range."""


class PreconditionError(NovikovError, ValueError):
    """An input violates a documented precondition."""


class ResolutionError(NovikovError, ValueError):
    """The grid is too coarse for the requested operation."""


class UnsupportedInputError(NovikovError, ValueError):
    """The input type is outside what the operation handles."""


class InternalCheckError(NovikovError, RuntimeError):
    """A post-condition self-check failed."""


class BlowUpError(NovikovError, RuntimeError):
    """The evolution produced non-finite values or a steep gradient.

    Attributes
    ----------
    t : float
        Time at which the blow-up was detected.
    node : int
        Index of the offending grid node.
    snapshots : list
        Snapshots emitted before the failure; the last one is the last good state.
    """

    def __init__(self, message: str, t: float | None = None, node: int | None = None,
                 snapshots: list | None = None):
        super().__init__(message)
        self.t = t
        self.node = node
        self.snapshots = list(snapshots or [])

    @property
    def last_snapshot(self):
        return self.snapshots[-1] if self.snapshots else None


class CollisionError(NovikovError, RuntimeError):
    """Two multipeakon positions came closer than the gap floor."""

    def __init__(self, message: str, t: float, states: list | None = None):
        super().__init__(message)
        self.t = t
        self.states = list(states or [])


class StepSizeError(NovikovError, RuntimeError):
    """The adaptive integrator could not make progress."""


class UndefinedEdgeError(NovikovError, ValueError):
    """The support edge is undefined because the total mass is not positive."""


class ModulationLossError(NovikovError, RuntimeError):
    """The orthogonality condition has no unique root in the search window."""

    def __init__(self, message: str, t: float | None = None, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial


class CalibrationError(NovikovError, RuntimeError):
    """No mollifier index satisfies the calibration conditions."""


class FitError(NovikovError, ValueError):
    """A decay fit cannot be formed on the requested window."""


class ConfigError(NovikovError, ValueError):
    """An experiment configuration is malformed; the message names the field."""
