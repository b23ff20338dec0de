"""Exception hierarchy.

Data problems (bad counts, rates, files) derive from :class:`DataError`;
problems that only surface while estimating derive from
:class:`EstimationError`. The CLI maps each family to its own exit code.
"""


class BasketError(Exception):
    """Base class for every error raised by this package."""


class DataError(BasketError, ValueError):
    """Input data violates the table or scenario invariants."""


class InvalidCount(DataError):
    pass


class InvalidNullRate(DataError):
    pass


class InvalidWeight(DataError):
    pass


class EmptyTable(DataError):
    pass


class DuplicateLabel(DataError):
    pass


class EmptySubclass(DataError):
    pass


class ParseError(DataError):
    """A dataset or scenario file could not be read.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ScenarioError(DataError):
    """Simulation scenario failed validation; ``field`` names the culprit."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class EstimationError(BasketError, ArithmeticError):
    """The requested quantity is undefined for the supplied data."""


class DegenerateDenominator(EstimationError):
    pass


class SingletonBasket(EstimationError):
    pass


class DegenerateFit(EstimationError):
    pass


class LatticeOverflow(EstimationError):
    """Weights cannot be mapped onto a small enough integer lattice."""


class CombinatorialLimit(BasketError):
    """Model enumeration would exceed the configured cap."""
