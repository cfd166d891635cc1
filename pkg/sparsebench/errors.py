from __future__ import annotations

from typing import Any


class SparseBenchError(Exception):
    """Base class for all sparsebench errors."""


class ParameterError(SparseBenchError, ValueError):
    def __init__(self, name: str, value: Any, requirement: str):
        self.name = name
        self.value = value
        self.requirement = requirement
        super().__init__(name, value, requirement)

    def __str__(self):
        return f"Invalid {self.name}={self.value!r}: {self.requirement}"


class DimensionError(SparseBenchError, ValueError):
    def __init__(self, shape: tuple, expected: str):
        self.shape = tuple(shape)
        self.expected = expected
        super().__init__(shape, expected)

    def __str__(self):
        return f"Got shape {self.shape}, expected {self.expected}"


class ValidationError(SparseBenchError, ValueError):
    def __init__(self, message: str, deviation: float | None = None):
        self.message = message
        self.deviation = deviation
        super().__init__(message, deviation)

    def __str__(self):
        if self.deviation is None:
            return self.message
        return f"{self.message} (deviation {self.deviation:.3e})"


class NumericalError(SparseBenchError, ArithmeticError):
    pass


class RankDeficientError(NumericalError):
    def __init__(self, sigma_min: float, sigma_max: float, tol: float):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        self.tol = tol
        super().__init__(sigma_min, sigma_max, tol)

    def __str__(self):
        return (
            f"Matrix is rank deficient: smallest singular value {self.sigma_min:.3e} "
            f"<= {self.tol:.0e} * largest ({self.sigma_max:.3e}). Resample the ensemble."
        )


class InfeasibleProblemError(SparseBenchError):
    def __init__(self, message: str = "The linear system has no solution"):
        self.message = message
        super().__init__(message)

    def __str__(self):
        return self.message


class SolverError(SparseBenchError):
    def __init__(self, solution):
        self.solution = solution
        super().__init__(solution)

    def __str__(self):
        return (
            f"LP solver finished with status '{self.solution.status}' "
            f"after {self.solution.iterations} iterations"
        )


class EnumerationBudgetError(SparseBenchError):
    def __init__(self, count: int, budget: int):
        self.count = count
        self.budget = budget
        super().__init__(count, budget)

    def __str__(self):
        return (
            f"Exact enumeration needs {self.count} subsets, budget is {self.budget}. "
            "Use sampled mode for a lower bound instead."
        )


class NotFoundError(SparseBenchError, LookupError):
    def __init__(self, r_max: int):
        self.r_max = r_max
        super().__init__(r_max)

    def __str__(self):
        return f"No solution with at most {self.r_max} nonzeros"


class SamplingError(SparseBenchError):
    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(attempts)

    def __str__(self):
        return f"Rejection sampling failed after {self.attempts} attempts"


class ExportError(SparseBenchError, OSError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(path, reason)

    def __str__(self):
        return f"Cannot write '{self.path}': {self.reason}"


__all__ = [
    "SparseBenchError",
    "ParameterError",
    "DimensionError",
    "ValidationError",
    "NumericalError",
    "RankDeficientError",
    "InfeasibleProblemError",
    "SolverError",
    "EnumerationBudgetError",
    "NotFoundError",
    "SamplingError",
    "ExportError",
]
