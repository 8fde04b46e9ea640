"""Exception types shared across the package."""


class RcbarError(Exception):
    """Base class for all package errors."""


class SingularDesign(RcbarError, ValueError):
    """A least-squares design matrix is (numerically) singular."""

    def __init__(self, matrix_name, condition=float("inf")):
        self.matrix_name = matrix_name
        self.condition = condition
        super().__init__(
            f"design matrix {matrix_name} is singular "
            f"(condition number {condition:.3g})"
        )


class UnstableMoment(RcbarError, ValueError):
    """The moment recursion has no finite limit (A_p + B_p >= 2)."""


class NotPositiveDefinite(RcbarError, ValueError):
    """A matrix that must be inverted failed its Cholesky check."""


class HypothesisGateError(RcbarError):
    """The model does not satisfy the hypotheses an operation requires."""

    def __init__(self, report, gate):
        self.report = report
        self.gate = gate
        failed = ", ".join(report.failed_names(gate)) or "none"
        super().__init__(f"model fails the {gate} gate (failed: {failed})")


class MonteCarloAborted(RcbarError):
    """Too many replicates failed with a singular design."""
