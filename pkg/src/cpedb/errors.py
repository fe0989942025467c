"""Exception types raised across the package."""


class CpedbError(Exception):
    """Base class."""


class InfeasibleConstraints(CpedbError, ValueError):
    """No maximum matching satisfies the accepted/rejected constraints."""


class InstanceTooLarge(CpedbError, ValueError):
    """Brute-force enumeration requested above the configured cap."""


class NonUniqueWinner(CpedbError, ValueError):
    """Two matchings tie for the winner within the tie tolerance."""


class IncomparablePair(CpedbError, ValueError):
    """Duel requested between edges at different positions (or a self-duel)."""


class NotMixed(CpedbError, RuntimeError):
    """MCMC sampler failed to reach a perfect matching within its step budget."""


class InfeasibleMinSide(CpedbError, ValueError):
    """Minimax oracle called with an empty minimizing polytope."""


class BudgetExceeded(CpedbError, RuntimeError):
    """A sample or iteration cap was hit before the algorithm stopped."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


class VerificationError(CpedbError):
    """Verification rejected the hypothesised winner."""

    def __init__(self, msg="hypothesis rejected", trace=None):
        super().__init__(msg)
        self.trace = trace
