class HypothesisViolation(ValueError):
    """A structural assumption on the model (positivity of the motility,
    m > 1, alpha > m/2, ...) does not hold."""


class StepRejected(RuntimeError):
    """The explicit u-update undershot below -tol_neg; retry with smaller dt."""

    def __init__(self, min_u, tol_neg):
        super().__init__(f"u undershoot {min_u:.3e} below -{tol_neg:.3e}")
        self.min_u = min_u
        self.tol_neg = tol_neg


class SolverFailure(RuntimeError):
    """Conjugate gradients did not reach the requested tolerance."""

    def __init__(self, iterations, residual, tol):
        super().__init__(
            f"CG stalled after {iterations} iterations: "
            f"relative residual {residual:.3e} > {tol:.1e}"
        )
        self.iterations = iterations
        self.residual = residual


class NonConvergence(RuntimeError):
    """Time stepping could not proceed (dt underflow)."""


class InvariantViolation(AssertionError):
    """A discrete invariant that must hold exactly was broken."""
