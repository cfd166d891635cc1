"""
Sparse recovery: basis pursuit through `sparsebench.lp`, the exhaustive l0 oracle and
recovery verification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from loguru import logger
from numpy.typing import NDArray

from sparsebench.ensembles import Signal, realify, realify_vector
from sparsebench.errors import DimensionError, InfeasibleProblemError, NotFoundError, ParameterError
from sparsebench.lp import (
    DEFAULT_MAXITER,
    DEFAULT_TOL,
    INFEASIBLE,
    OPTIMAL,
    LinearProgram,
    LPSolution,
    LPStatus,
    solve_lp,
)
from sparsebench.numerics import RealMatrix

Verdict = Literal["exact", "failed"]

ROUNDING_TOL = 1e-7
RESIDUAL_TOL = 1e-8
VERIFY_TOL = 1e-6
ORACLE_MAX_N = 24
ORACLE_MAX_R = 4


@dataclass
class BPResult:
    """
    Outcome of `basis_pursuit`.

    Attributes:
        signal: Recovered signal ``f*`` after rounding and polishing.
        objective: ``||f*||_1``.
        status: LP status, ``optimal`` unless the solver failed.
        residual: ``max |phi @ f* - y|``.
        lp: The raw interior point solution.
    """

    signal: NDArray[np.float64]
    objective: float
    status: LPStatus
    residual: float
    lp: LPSolution | None = None

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.signal))

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _check_system(phi: NDArray, y: NDArray) -> tuple[RealMatrix, NDArray[np.float64]]:
    phi = np.asarray(phi)
    if np.iscomplexobj(phi) or np.iscomplexobj(y):
        raise ParameterError("phi", phi.dtype, "must be real, pass complex systems through realify")
    if phi.ndim != 2:
        raise DimensionError(phi.shape, "a 2-D measurement matrix")
    y = np.asarray(y, dtype=float).ravel()
    if y.size != phi.shape[0]:
        raise DimensionError(y.shape, f"a vector of length {phi.shape[0]}")
    return phi.astype(float), y


def bp_linear_program(phi: RealMatrix, y: NDArray) -> LinearProgram:
    """
    The basis pursuit LP over the split ``(u, v) >= 0`` with ``f = u - v`` and ``t = u + v``:

        minimize sum(u + v)  subject to  [phi, -phi] @ (u, v) == y

    This is the ``(f, t)`` program ``minimize sum(t)`` subject to ``-t <= f <= t`` and
    ``phi @ f == y`` after a change of variables: any feasible ``(f, t)`` maps to
    ``u = (t + f) / 2``, ``v = (t - f) / 2`` with the same objective, and at an optimum
    ``min(u_i, v_i) = 0`` so ``t = |f|``. Both have ``2n`` variables and ``n`` objective weights on
    ``t`` (here spread over ``u + v``).
    """
    phi, y = _check_system(phi, y)
    n = phi.shape[1]
    return LinearProgram(c=np.ones(2 * n), A=np.hstack([phi, -phi]), b=y)


def _residual(phi, f, y) -> float:
    return float(np.max(np.abs(phi @ f - y))) if y.size else 0.0


def _round_and_polish(phi: RealMatrix, y: NDArray, f: NDArray) -> NDArray[np.float64]:
    residual_tol = RESIDUAL_TOL * (1 + np.max(np.abs(y), initial=0.0))
    rounded = f.copy()
    rounded[np.abs(rounded) <= ROUNDING_TOL * max(1.0, np.max(np.abs(f), initial=0.0))] = 0.0
    best = rounded if _residual(phi, rounded, y) <= residual_tol else f

    support = np.flatnonzero(rounded)
    if 0 < support.size <= phi.shape[0]:
        coef = scipy.linalg.lstsq(phi[:, support], y)[0]
        polished = np.zeros_like(f)
        polished[support] = coef
        l1_slack = 1e-9 * (1 + np.sum(np.abs(best)))
        if (
            _residual(phi, polished, y) <= residual_tol
            and np.sum(np.abs(polished)) <= np.sum(np.abs(best)) + l1_slack
        ):
            best = polished
    return best


def basis_pursuit(
    phi: RealMatrix, y: NDArray, tol: float = DEFAULT_TOL, maxiter: int = DEFAULT_MAXITER
) -> BPResult:
    """
    Minimize ``||f||_1`` subject to ``phi @ f == y``.

    Args:
        phi (RealMatrix): Real ``k x n`` measurement matrix. Complex systems go through
            `sparsebench.ensembles.realify` first.
        y (NDArray): Measurements of length ``k``.
        tol (float, optional): LP tolerance.
        maxiter (int, optional): LP iteration cap.

    Returns:
        BPResult: Small entries are rounded to zero and the support is re-solved by least
        squares when that keeps the residual and does not increase the l1 norm. A failed
        LP is reported through ``status == "numerical-failure"``.

    Raises:
        ParameterError: if ``phi`` is complex.
        InfeasibleProblemError: if ``phi @ f == y`` has no solution.

    Example:
        >>> basis_pursuit(np.array([[1.0, 2.0]]), np.array([2.0])).signal
        array([0., 1.])
    """
    lp = bp_linear_program(phi, y)
    phi, y = _check_system(phi, y)
    n = phi.shape[1]
    solution = solve_lp(lp, tol=tol, maxiter=maxiter)
    if solution.status == INFEASIBLE:
        raise InfeasibleProblemError("Measurement system phi @ f == y is inconsistent")

    f = solution.x[:n] - solution.x[n:]
    if solution.status == OPTIMAL:
        f = _round_and_polish(phi, y, f)
    else:
        logger.bind(status=solution.status, iterations=solution.iterations).warning(
            "Basis pursuit LP did not converge"
        )
    return BPResult(
        signal=f,
        objective=float(np.sum(np.abs(f))),
        status=solution.status,
        residual=_residual(phi, f, y),
        lp=solution,
    )


def l0_oracle(phi: NDArray, y: NDArray, r_max: int) -> tuple[Signal, tuple[int, ...]]:
    """
    Sparsest solution of ``phi @ f == y`` by enumerating supports.

    Supports of size ``0, 1, ..., r_max`` are visited in lexicographic order and the first
    one whose least squares residual is at most ``1e-8 * (1 + max|y|)`` wins.

    Raises:
        ParameterError: if ``n > 24`` or ``r_max > 4``.
        NotFoundError: if no support of size at most ``r_max`` fits.

    Example:
        >>> l0_oracle(np.array([[1.0, 2.0]]), np.array([2.0]), 1)[1]
        (0,)
    """
    phi = np.asarray(phi)
    y = np.asarray(y).ravel()
    if np.iscomplexobj(phi) or np.iscomplexobj(y):
        phi, y = realify(phi), realify_vector(y)
    phi = phi.astype(float)
    y = y.astype(float)
    if phi.ndim != 2 or y.size != phi.shape[0]:
        raise DimensionError(phi.shape, f"a matrix with {y.size} rows")
    n = phi.shape[1]
    if n > ORACLE_MAX_N:
        raise ParameterError("n", n, f"l0 enumeration needs n <= {ORACLE_MAX_N}")
    if not 0 <= r_max <= ORACLE_MAX_R:
        raise ParameterError("r_max", r_max, f"must satisfy 0 <= r_max <= {ORACLE_MAX_R}")

    residual_tol = RESIDUAL_TOL * (1 + np.max(np.abs(y), initial=0.0))
    for size in range(0, min(r_max, n) + 1):
        for support in itertools.combinations(range(n), size):
            values = np.zeros(n)
            if size:
                cols = list(support)
                values[cols] = scipy.linalg.lstsq(phi[:, cols], y)[0]
            if _residual(phi, values, y) <= residual_tol:
                logger.debug(f"l0 oracle: support {support} after size {size} enumeration")
                return Signal(values), support
    raise NotFoundError(r_max)


def verify_recovery(f: Signal | NDArray, result: BPResult, tol: float = VERIFY_TOL) -> Verdict:
    """
    ``exact`` iff the solver succeeded and ``||f* - f||_2 <= tol * max(1, ||f||_2)``.
    """
    values = f.values if isinstance(f, Signal) else np.asarray(f, dtype=float)
    if values.shape != result.signal.shape:
        raise DimensionError(result.signal.shape, f"{values.shape} to match the planted signal")
    if result.status != OPTIMAL:
        return "failed"
    error = float(np.linalg.norm(result.signal - values))
    return "exact" if error <= tol * max(1.0, float(np.linalg.norm(values))) else "failed"


def recovery_error(f: Signal | NDArray, result: BPResult) -> float:
    values = f.values if isinstance(f, Signal) else np.asarray(f, dtype=float)
    return float(np.linalg.norm(result.signal - values))


def check_measurement_count(k: int, r: int) -> None:
    """Warn when fewer than ``2r`` measurements are taken; no method can recover then."""
    if k < 2 * r:
        logger.bind(k=k, r=r).warning("Fewer than 2r measurements, recovery cannot be unique")


__all__ = [
    "Verdict",
    "BPResult",
    "bp_linear_program",
    "basis_pursuit",
    "l0_oracle",
    "verify_recovery",
    "recovery_error",
    "check_measurement_count",
]
