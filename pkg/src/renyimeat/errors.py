"""Exception types shared across the package."""


class RenyimeatError(Exception):
    """Base class for errors raised by this package."""


class InvalidRegister(RenyimeatError):
    """A register label/dimension request is inconsistent with the space it targets."""


class InvalidState(RenyimeatError):
    """A matrix fails the structural requirements of the operation (shape,
    hermiticity, positivity, classicality on a register, normalization...)."""


class UnsupportedOrder(RenyimeatError):
    """The requested Renyi order is outside the domain of the operation."""


class DomainMismatch(RenyimeatError):
    """A tradeoff function does not cover the symbols it is evaluated on."""


class InfeasibleSpec(RenyimeatError):
    """A construction request cannot be met (e.g. a register dimension cap,
    or an entropy target outside the attainable range)."""


class SolverFailure(RenyimeatError):
    """An iterative solver did not reach its convergence target."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NotPure(InvalidState):
    """The operation needs a rank-one state."""


class NotClassical(InvalidState):
    """The state is not classical (block-diagonal) on the named registers."""


class NonConvergence(SolverFailure):
    """An optimizer hit its iteration cap; carries the best value found."""

    def __init__(self, message, value=None, gap=None):
        super().__init__(message, diagnostics={"value": value, "gap": gap})
        self.value = value
        self.gap = gap
