"""Exception types shared across the planner."""


class PlannerError(Exception):
    """Base class for all planner-specific failures."""


class MalformedDocument(PlannerError):
    """Input document could not be parsed or has an unexpected structure."""


class MissingField(PlannerError):
    """A required configuration field is absent."""


class InvalidValue(PlannerError):
    """A field value violates its declared constraint."""


class InvalidSample(PlannerError):
    """A calibration record is outside its physically valid range."""


class EmptyTable(PlannerError):
    """A calibration table is missing required samples."""


class DuplicateKey(PlannerError):
    """Two calibration records share the same key."""


class Infeasible(PlannerError):
    """The model cannot fit in device memory at any parallelism."""


class IndivisibleMicroBatch(PlannerError):
    """A micro batch size does not divide the global batch for the given d."""


class IndivisibleValue(PlannerError):
    """A swept value violates the batch divisibility constraints."""


class NoFeasibleStrategy(PlannerError):
    """The search space contains no strategy satisfying all constraints."""
