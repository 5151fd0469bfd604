"""Exception hierarchy.

Domain errors signal parameter sets that are outside the physical model
(CLI exit code 2); :class:`NumericalFailure` signals a solver result that
violates its own post-conditions (exit code 3).
"""


class RectiflowError(Exception):
    """Base class for all package errors."""


class DomainError(RectiflowError, ValueError):
    """Input lies outside the validity domain of the model."""


class DimensionMismatch(DomainError):
    pass


class InvalidParameter(DomainError):
    pass


class NonPositiveEnergy(DomainError):
    """A transition (Bohr) energy is zero or negative."""


class DegenerateSteadyState(DomainError):
    """The Liouvillian has more than one stationary state."""


class NoAnalyticForm(DomainError):
    """No closed-form expression exists for the requested configuration."""


class EquilibriumUndefined(DomainError):
    """Rectification is 0/0 because there is no thermal bias at any channel energy."""


class NoThermalBias(DomainError):
    """Both bias currents vanish, so the rectification factor is undefined."""


class AllInfeasible(DomainError):
    """Every point of an optimization grid failed to evaluate."""


class Infeasible(DomainError):
    """No evaluated point satisfies the requested constraint."""


class NumericalFailure(RectiflowError):
    """The steady-state solve did not meet its residual or positivity checks."""
