"""Exception hierarchy shared by all modules.

Two roots: `InvalidInputError` (bad arguments, violated preconditions) and
`NumericalError` (the computation itself failed). The CLI maps these to
exit codes 2 and 4 respectively.
"""


class InvalidInputError(ValueError):
    """Input violates a documented precondition or invariant."""


class UnsupportedActivationError(InvalidInputError):
    """Operation is only defined for a different activation."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-convergence, singularity, overflow)."""


class NonConvergenceError(NumericalError):
    """Iteration cap reached without meeting the convergence tolerance."""


class StateOverflowError(NumericalError):
    """Simulated hidden state left the representable range."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite hidden state at time step {step}")


class CalibrationError(NumericalError):
    """Bias calibration did not reach the target activity fractions."""

    def __init__(self, fractions, target, tol):
        self.fractions = fractions
        super().__init__(
            f"calibration stopped outside target {target}+/-{tol}; "
            f"achieved fractions {fractions}"
        )


class DivergenceError(NumericalError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        msg = f"training diverged at epoch {epoch}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class DegenerateOutputError(InvalidInputError):
    """Signal is identically zero (or a target channel has no variance)."""
