"""Exception hierarchy shared by all modules."""


class WcoError(Exception):
    """Base class for errors raised by this package."""


class SpaceMismatchError(WcoError, ValueError):
    """Two objects were defined over different measure spaces."""


class PreconditionError(WcoError, ValueError):
    """An operation was called outside its mathematical hypotheses."""


class PostconditionError(WcoError, AssertionError):
    """An internal cross-check between two independent routes failed."""


class ExtensionError(WcoError):
    """The product-space extension is not a well-defined operator.

    Raised when Phi sends a product atom of positive rho_W mass onto a
    rho-null product atom, i.e. rho_W o Phi^{-1} is not absolutely
    continuous with respect to rho.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)
