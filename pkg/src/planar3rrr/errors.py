"""Exception types shared across the package."""


class UnreachablePose(ValueError):
    """A chain cannot reach its coupling point (target outside the 2R annulus)."""

    def __init__(self, chain, distance, lo, hi):
        self.chain = chain
        self.distance = distance
        super().__init__(
            f"chain {chain}: coupling distance {distance:.6f} m outside "
            f"reachable annulus [{lo:.6f}, {hi:.6f}] m"
        )


class NoConvergence(RuntimeError):
    """Newton iteration failed to converge."""

    def __init__(self, iterations, residual_norm):
        self.iterations = iterations
        self.residual_norm = residual_norm
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last residual norm {residual_norm:.3e})"
        )


class SingularConfiguration(RuntimeError):
    """A required Jacobian is rank deficient at this configuration."""


class DegenerateDirection(ValueError):
    """Estimated force direction too small to define a retraction."""


class NotTrainedError(RuntimeError):
    """Model used for inference before fit()."""


class SplitViolation(ValueError):
    """Training data overlaps the held-out joint configuration."""


class EmptyClassError(ValueError):
    """A confusion matrix or training set is missing one of the two classes."""


class MissingBaseline(ValueError):
    """Outcome labeling requires the paired zero-g baseline simulation."""
