"""GDPC error hierarchy — consistent error handling across estimators, simulator and harness."""
from __future__ import annotations

from typing import Optional


class GDPCError(Exception):
    """Base exception for all GDPC errors."""
    def __init__(self, message: str, details: Optional[str] = None):
        self.message = message
        self.details = details
        super().__init__(message)

    def to_cli_error(self) -> str:
        msg = f"Error: {self.message}"
        if self.details:
            msg += f"\nDetails: {self.details}"
        return msg


class InvalidPanelError(GDPCError):
    pass


class DimensionMismatchError(GDPCError):
    def __init__(self, what: str, expected: tuple[int, ...], got: tuple[int, ...]):
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected shape {expected}, got {got}")


class ParameterRangeError(GDPCError):
    def __init__(self, name: str, value: object, allowed: str):
        self.name = name
        self.value = value
        super().__init__(f"{name}={value} out of range ({allowed})")


class LagOutOfRangeError(ParameterRangeError):
    def __init__(self, lag: int, T: int):
        super().__init__("lag", lag, f"|u| < T = {T}")


class DegenerateReferenceError(GDPCError):
    pass


class SingularDesignError(GDPCError):
    pass


class SingularSystemError(GDPCError):
    def __init__(self, T: int, k: int, condition: float, details: Optional[str] = None):
        self.T = T
        self.k = k
        self.condition = condition
        super().__init__(
            f"Factor normal equations singular (T={T}, k={k}, condition estimate {condition:.3g})",
            details=details,
        )


class DegenerateFactorError(GDPCError):
    pass


class MonotonicityError(GDPCError):
    def __init__(self, iteration: int, previous: float, current: float):
        self.iteration = iteration
        super().__init__(
            f"MSE increased at iteration {iteration}: {previous:.17g} -> {current:.17g}"
        )


class InfeasibleOrthogonalizationError(GDPCError):
    def __init__(self, m: int, k: int):
        super().__init__(f"Cannot orthogonalize {k + 1} loading rows in R^{m} (need m >= k+1)")


class SpectralGridError(GDPCError):
    pass


class EigenSolverError(GDPCError):
    def __init__(self, stage: str, details: Optional[str] = None):
        self.stage = stage
        super().__init__(f"Eigen solver failed in {stage}", details=details)


class BenchmarkIOError(GDPCError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"[{path}] {message}")
