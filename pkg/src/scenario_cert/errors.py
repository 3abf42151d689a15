"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command layer never
needs a lookup table.
"""


class ScenarioCertError(Exception):
    exit_code = 1


class DomainError(ScenarioCertError, ValueError):
    """Argument outside the domain of a bound or operation."""


class InfeasibleQuery(DomainError):
    """No epsilon or sample count can meet the requested confidence."""


class SchemaError(ScenarioCertError, ValueError):
    """Malformed problem, config or report file."""


class SolverFailure(ScenarioCertError, RuntimeError):
    exit_code = 2


class AssumptionViolation(ScenarioCertError):
    """A sampled program is infeasible or unbounded."""

    exit_code = 2


class FeasibilitySetF(AssumptionViolation):
    """Second stage of a cascade is infeasible for the drawn multisample."""


class DegenerateProblem(ScenarioCertError):
    exit_code = 3


class DegenerateRemoval(ScenarioCertError):
    """A discarded sample is not violated by the final solution."""

    exit_code = 3


class PartialRemoval(DegenerateRemoval):
    def __init__(self, achieved, requested, removed=()):
        self.achieved = achieved
        self.requested = requested
        self.removed = tuple(removed)
        super().__init__(
            f"only {achieved} of {requested} requested removals lowered the "
            "target objective; no certificate issued"
        )


class ValidationFailed(ScenarioCertError):
    exit_code = 4
