"""Exception types shared across the package.

The CLI maps these onto exit codes: bad configuration or inconsistent
inputs (ValueError family) exit with 2, numerical breakdowns exit with 3.
"""


class NumericalFailure(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


class IntegrationFailure(NumericalFailure):
    """A non-finite value appeared while integrating an ODE."""

    def __init__(self, message, t=None, state=None, step=None):
        super().__init__(message)
        self.t = t
        self.state = state
        self.step = step


class ConversionError(NumericalFailure):
    """A discrete-time model admits no real continuous-time counterpart."""


class ControllerSingularity(NumericalFailure):
    """The tracking controller could not invert the output sensitivity."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class UnderdeterminedFit(ValueError):
    """Fewer snapshot pairs than unknown model columns."""
