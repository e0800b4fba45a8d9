"""Exception taxonomy shared across the toolkit.

Two families matter to callers: configuration problems (bad user input,
reported before any artifact is written, CLI exit code 2) and numerical
failures (solver breakdowns mid-run, CLI exit code 1 with partial artifacts).
"""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (domain, resolution, tolerances)."""


class NumericalError(RuntimeError):
    """Base class for runtime solver failures."""


class NewtonNonConvergence(NumericalError):
    """Newton iteration exhausted max_iter; carries the last residual norm."""

    def __init__(self, message: str, last_residual: float, iterations: int):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class NearFoldError(NumericalError):
    """A linear system involving the state Jacobian is (near-)singular.

    Signals the caller to switch from natural-parameter stepping to
    arclength continuation.
    """


class DegenerateGeometryError(NumericalError):
    """The solution-adapted basis degenerates (constant state, zero norm)."""


class DegenerateFoldError(NumericalError):
    """Fold coefficient vanishes at a critical point; the nondegenerate-fold
    assumption underlying the continuation is violated."""


class ParametrizationError(NumericalError):
    """Branch energies are not strictly increasing; carries offending indices."""

    def __init__(self, message: str, indices: list[int]):
        super().__init__(message)
        self.indices = indices
