"""Exception hierarchy.

Every error carries the process exit code the command-line front end maps it to.
"""

from __future__ import annotations


class HamflowError(Exception):
    exit_code = 1


class PreconditionError(HamflowError, ValueError):
    """Input violates an operation's precondition (asymmetric matrix, degenerate form, ...)."""


class NoCrossingError(PreconditionError):
    """The requested parameter value is not a crossing."""


class AssumptionError(HamflowError):
    """Hyperbolicity (A1) or endpoint invertibility (A2) fails for a family."""

    exit_code = 2

    def __init__(self, assumption: str, lam: float | None, message: str):
        self.assumption = assumption
        self.lam = lam
        where = "" if lam is None else f" at lambda={lam:.10g}"
        super().__init__(f"{assumption} violated{where}: {message}")


class ConvergenceError(HamflowError):
    """A numerical procedure did not meet its accuracy guard."""

    exit_code = 3


class StepTooLargeError(ConvergenceError):
    """Finite-difference step leaves the graph chart; retry with a smaller step."""


class IrregularCrossingError(ConvergenceError):
    """A crossing form is degenerate; the family must be regularized first."""

    def __init__(self, lam: float, message: str):
        self.lam = lam
        super().__init__(f"non-regular crossing at lambda={lam:.10g}: {message}")


class SchemaError(HamflowError, ValueError):
    exit_code = 4
