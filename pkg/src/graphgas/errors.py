"""Exception hierarchy shared across the toolkit.

ValidationError covers malformed inputs (bad graphs, inconsistent matrices,
schema violations); SolverError covers numerical failures (non-convergent
refinement, non-integer winding numbers, fixed-point stalls).  The CLI maps
them to exit codes 2 and 3 respectively.
"""


class GraphGasError(Exception):
    pass


class ValidationError(GraphGasError, ValueError):
    pass


class SolverError(GraphGasError, RuntimeError):
    pass


class DimensionError(ValidationError):
    """Raised when assembled operator factors have incompatible shapes.

    Carries a human-readable size report in ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or message
