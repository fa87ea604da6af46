"""Exception hierarchy shared by all modules."""


class CavityError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(CavityError, ValueError):
    pass


class TailTooLarge(CavityError, ValueError):
    """Probability mass discarded by the Fock truncation exceeds the tolerance."""

    def __init__(self, tail: float, tol: float, what: str = "state"):
        self.tail = tail
        self.tol = tol
        super().__init__(
            f"{what}: truncated tail mass {tail:.3e} exceeds tolerance {tol:.1e}; raise n_max"
        )


class NotPositive(CavityError, ValueError):
    """A realized density matrix has a negative eigenvalue beyond tolerance."""

    def __init__(self, min_eig: float, tol: float):
        self.min_eig = min_eig
        self.tol = tol
        super().__init__(f"density matrix has eigenvalue {min_eig:.3e} < -{tol:.1e}")


class InvalidState(CavityError, ValueError):
    """Hermiticity or normalization check failed."""


class DegenerateAtom(CavityError, ValueError):
    """beta = 0: the tuning parameter alpha/(beta r) is undefined."""


class DegenerateSeed(CavityError, ValueError):
    pass


class NotConverged(CavityError, RuntimeError):
    """Channel iteration hit ``max_iter`` before successive iterates agreed."""

    def __init__(self, state, distance: float, n_iters: int):
        self.state = state
        self.distance = distance
        self.n_iters = n_iters
        super().__init__(
            f"no convergence after {n_iters} iterations (last step distance {distance:.3e})"
        )


class ConsistencyError(CavityError, RuntimeError):
    """Two independent computation routes disagree beyond tolerance."""


class InvalidTruncation(CavityError, ValueError):
    pass


class ZeroMeanAmplitude(CavityError, ValueError):
    """<gamma> = 0: phase-symmetric input, no unambiguous discrimination possible."""


class StatesIdentical(CavityError, ValueError):
    pass
