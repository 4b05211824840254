"""Exception types shared across the package."""


class DivergedSeriesError(ArithmeticError):
    """A power series failed to converge within the term cap."""


class UnsupportedFamilyError(ValueError):
    """The operation needs a Poisson-type counting law and got something else."""


class NullRestrictionError(ValueError):
    """Restriction to a set of measure zero was requested."""


class PartitionError(ValueError):
    """Cells do not form a disjoint covering partition."""


class DisjointnessError(ValueError):
    """Two sets that must be disjoint overlap."""


class AnalyticUnavailableError(ValueError):
    """No closed-form or quadrature route exists for the requested expectation."""


class HypothesisViolationError(ValueError):
    """Input violates a hypothesis of the classification lemma."""


class StepSizeError(RuntimeError):
    """ODE conservation drifted beyond tolerance; the step size is too coarse."""


class HorizonError(ValueError):
    """Trajectory horizon too short to normalize the target density."""
