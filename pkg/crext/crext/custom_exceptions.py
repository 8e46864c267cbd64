# Exceptions shared by every crext module.
# Each class carries the process exit code the CLI uses for it:
# 2 for bad input, 3 for numerical failures.

from typing import Optional

from typing_extensions import override


class CRExtError(Exception):
    exit_code = 2

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    @override
    def __str__(self) -> str:
        return self.message


class ParameterError(CRExtError):
    """Invalid parameters such as an odd p, an α outside its window or a bad index."""


class DimensionMismatchError(CRExtError):
    pass


class ManifoldSpecError(CRExtError):
    """The manifold-spec document is not syntactically valid."""


class ManifoldValidationError(CRExtError):
    """A parsed model violates one of the graph-form invariants."""


class CutoffMismatchError(CRExtError):
    pass


class SingularJetError(CRExtError):
    pass


class InfiniteWeightError(CRExtError):
    pass


class NonHomogeneousError(CRExtError):
    pass


class ZeroPolynomialError(CRExtError):
    pass


class ConvergenceError(CRExtError):
    exit_code = 3

    def __init__(
        self, message: str, residual: float, contraction: Optional[float] = None
    ) -> None:
        super().__init__(message)
        self.residual = residual
        self.contraction = contraction


class InvariantViolationError(CRExtError):
    exit_code = 3


class FitError(CRExtError):
    exit_code = 3


class NoTransversalGainError(CRExtError):
    exit_code = 3
