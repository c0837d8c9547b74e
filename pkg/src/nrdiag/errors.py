"""Exception types shared across the package."""

from __future__ import annotations


class NrdiagError(Exception):
    """Base class for all package-specific errors."""


class SingularMatrixError(NrdiagError):
    """A matrix factorization hit an (effectively) zero pivot."""

    def __init__(self, message: str = "matrix is singular", rcond: float | None = None):
        super().__init__(message)
        self.rcond = rcond


class SingularJacobianError(NrdiagError):
    """The Jacobian at the current iterate is numerically singular."""

    def __init__(self, message: str = "Jacobian is numerically singular", rcond: float | None = None):
        super().__init__(message)
        self.rcond = rcond


class NonEvaluableError(NrdiagError):
    """A residual (or derivative) could not be evaluated at the requested point.

    ``reason`` is either ``"domain-violation"`` (an explicit guard in the
    problem code fired) or ``"non-finite"`` (the callback produced inf/nan).
    ``equation``/``variable`` locate the failure when known.
    """

    def __init__(
        self,
        reason: str = "non-finite",
        equation: int | None = None,
        variable: int | None = None,
        message: str | None = None,
    ):
        self.reason = reason
        self.equation = equation
        self.variable = variable
        if message is None:
            where = ""
            if equation is not None:
                where = f" (equation {equation})"
            elif variable is not None:
                where = f" (variable {variable})"
            message = f"residual not evaluable: {reason}{where}"
        super().__init__(message)


class DampingExhaustedError(NrdiagError):
    """No damping factor above ``lambda_min`` made the first step evaluable."""

    def __init__(self, lambda_min: float):
        super().__init__(f"first-step damping exhausted (lambda < {lambda_min:g})")
        self.lambda_min = lambda_min


class DegenerateResidualError(NrdiagError):
    """The nonlinear residual at the start point is (numerically) zero."""


class InvalidPartitionError(NrdiagError):
    """Variable index lists overlap, miss indices, or are out of range."""


class NonPositiveScaleError(NrdiagError):
    """Scale factors must be strictly positive."""


class UnknownVariableError(NrdiagError):
    """A variable name does not exist in the model."""


class InvalidParamsError(NrdiagError):
    """Problem parameters violate their documented constraints."""
