"""
Dense linear programming.

`solve_lp` minimizes ``c @ x`` subject to ``A @ x == b`` and ``lower <= x <= upper``. Problems are
first brought to standard form (``x >= 0``), redundant equality rows are removed with a
rank-revealing QR factorization, and the standard form problem is solved with the homogeneous
self-dual primal-dual interior point method using Mehrotra's predictor-corrector.

Reference for the homogeneous algorithm: Andersen, E. D., and Andersen, K. D. "The MOSEK interior
point optimizer for linear programming: an implementation of the homogeneous algorithm."
High performance optimization, 2000.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from os import PathLike
from typing import Literal

import numpy as np
import scipy.linalg
from loguru import logger
from numpy.typing import NDArray
from scipy.linalg import LinAlgError

from sparsebench.errors import DimensionError, ExportError, ParameterError

LPStatus = Literal["optimal", "infeasible", "unbounded", "numerical-failure"]

OPTIMAL: LPStatus = "optimal"
INFEASIBLE: LPStatus = "infeasible"
UNBOUNDED: LPStatus = "unbounded"
NUMERICAL_FAILURE: LPStatus = "numerical-failure"

DEFAULT_TOL = 1e-9
DEFAULT_MAXITER = 200
STEP_SCALE = 0.99995
REDUNDANCY_TOL = 1e-10

_MESSAGES = {
    OPTIMAL: "Optimization terminated successfully.",
    INFEASIBLE: "The problem appears to be infeasible.",
    UNBOUNDED: "The problem appears to be unbounded.",
    NUMERICAL_FAILURE: "Numerical difficulties or iteration limit before convergence.",
}


@dataclass
class LinearProgram:
    """
    ``minimize c @ x  subject to  A @ x == b,  lower <= x <= upper``

    ``lower`` defaults to zeros and ``upper`` to ``+inf``. Bounds may be infinite.
    """

    c: NDArray[np.float64]
    A: NDArray[np.float64]
    b: NDArray[np.float64]
    lower: NDArray[np.float64] | None = None
    upper: NDArray[np.float64] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.A.shape[0] != self.b.size:
            raise DimensionError(self.A.shape, f"{self.b.size} rows to match b")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise DimensionError(self.lower.shape, f"bounds of length {n}")
        if not np.all(np.isfinite(self.b)):
            raise ParameterError("b", self.b, "must be finite")
        if np.any(self.lower > self.upper) or np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ParameterError("bounds", (self.lower, self.upper), "need lower <= upper")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size


@dataclass
class LPSolution:
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    objective: float
    dual_objective: float
    gap: float
    primal_infeasibility: float
    status: LPStatus
    iterations: int
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _StandardForm:
    A: NDArray
    b: NDArray
    c: NDArray
    c0: float
    P: NDArray
    offset: NDArray
    free_pairs: list[tuple[int, int]] = field(default_factory=list)
    n_rows_original: int = 0


def _to_standard_form(lp: LinearProgram) -> _StandardForm:
    """
    Substitute variables so that every standard form variable is ``>= 0``.

    ``x = offset + P @ xs[:P.shape[1]]``; finite upper bounds become extra rows with slacks.
    """
    n = lp.n_vars
    columns: list[NDArray] = []
    offset = np.zeros(n)
    upper_rows: list[tuple[int, float]] = []
    free_pairs: list[tuple[int, int]] = []
    for j in range(n):
        lo, up = lp.lower[j], lp.upper[j]
        e = np.zeros(n)
        if np.isfinite(lo):
            offset[j] = lo
            e[j] = 1.0
            columns.append(e)
            if np.isfinite(up):
                upper_rows.append((len(columns) - 1, up - lo))
        elif np.isfinite(up):
            offset[j] = up
            e[j] = -1.0
            columns.append(e)
        else:
            e[j] = 1.0
            columns.append(e)
            columns.append(-e)
            free_pairs.append((len(columns) - 2, len(columns) - 1))
    P = np.column_stack(columns) if columns else np.zeros((n, 0))
    n_struct = P.shape[1]
    n_slack = len(upper_rows)

    A_struct = lp.A @ P
    b = lp.b - lp.A @ offset
    E = np.zeros((n_slack, n_struct))
    rhs = np.zeros(n_slack)
    for row, (col, width) in enumerate(upper_rows):
        E[row, col] = 1.0
        rhs[row] = width
    A = np.block(
        [
            [A_struct, np.zeros((lp.n_rows, n_slack))],
            [E, np.eye(n_slack)],
        ]
    )
    c = np.concatenate([P.T @ lp.c, np.zeros(n_slack)])
    return _StandardForm(
        A=A,
        b=np.concatenate([b, rhs]),
        c=c,
        c0=float(lp.c @ offset),
        P=P,
        offset=offset,
        free_pairs=free_pairs,
        n_rows_original=lp.n_rows,
    )


def _independent_rows(A: NDArray, b: NDArray, tol: float = REDUNDANCY_TOL) -> tuple[NDArray, bool]:
    """
    Indices of a maximal set of linearly independent rows and whether the dropped rows are
    consistent with the kept ones.
    """
    m = A.shape[0]
    if m == 0:
        return np.arange(0), True
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        rank = 0
    else:
        rank = int(np.sum(diag > tol * diag[0] * max(A.shape)))
    keep = np.sort(piv[:rank])
    if rank == m:
        return keep, True
    if rank == 0:
        return keep, bool(np.max(np.abs(b)) <= tol * (1 + np.max(np.abs(b))))
    x_ls = scipy.linalg.lstsq(A[keep], b[keep])[0]
    residual = np.max(np.abs(A @ x_ls - b))
    scale = 1.0 + np.max(np.abs(b)) + np.max(np.abs(A)) * np.max(np.abs(x_ls))
    return keep, bool(residual <= 1e-8 * scale)


def _get_solver(M: NDArray, method: str):
    if method == "cholesky":
        factor = scipy.linalg.cho_factor(M)
        return lambda r: scipy.linalg.cho_solve(factor, r)
    if method == "lu":
        factor = scipy.linalg.lu_factor(M)
        return lambda r: scipy.linalg.lu_solve(factor, r)
    return lambda r: scipy.linalg.lstsq(M, r)[0]


_FALLBACKS = ("cholesky", "lu", "lstsq")


def _sym_solve(Dinv, A, r1, r2, solve):
    r = r2 + A @ (Dinv * r1)
    v = solve(r)
    u = Dinv * (A.T @ v - r1)
    return u, v


def _get_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, alpha0):
    i_x = d_x < 0
    i_z = d_z < 0
    alpha_x = alpha0 * np.min(x[i_x] / -d_x[i_x]) if np.any(i_x) else 1.0
    alpha_tau = alpha0 * tau / -d_tau if d_tau < 0 else 1.0
    alpha_z = alpha0 * np.min(z[i_z] / -d_z[i_z]) if np.any(i_z) else 1.0
    alpha_kappa = alpha0 * kappa / -d_kappa if d_kappa < 0 else 1.0
    return float(min(1.0, alpha_x, alpha_tau, alpha_z, alpha_kappa))


def _get_delta(A, b, c, x, y, z, tau, kappa, state: dict):
    """Newton direction of the homogeneous model with one Mehrotra correction."""
    n_x = x.size
    r_P = b * tau - A @ x
    r_D = c * tau - A.T @ y - z
    r_G = c @ x - b @ y + kappa
    mu = (x @ z + tau * kappa) / (n_x + 1)

    Dinv = x / z
    M = (A * Dinv) @ A.T

    gamma = 0.0
    alpha = 0.0
    d_x = d_z = np.zeros_like(x)
    d_y = np.zeros_like(y)
    d_tau = d_kappa = 0.0
    for corrector in (False, True):
        eta = 1 - gamma
        rhatp, rhatd, rhatg = eta * r_P, eta * r_D, eta * r_G
        rhatxs = gamma * mu - x * z
        rhattk = gamma * mu - tau * kappa
        if corrector:
            rhatxs = rhatxs - d_x * d_z
            rhattk = rhattk - d_tau * d_kappa

        while True:
            method = _FALLBACKS[state["solver"]]
            try:
                solve = _get_solver(M, method)
                p, q = _sym_solve(Dinv, A, c, b, solve)
                u, v = _sym_solve(Dinv, A, rhatd - rhatxs / x, rhatp, solve)
                if not (np.all(np.isfinite(p)) and np.all(np.isfinite(u))):
                    raise LinAlgError("non-finite direction")
                break
            except (LinAlgError, ValueError) as e:
                if state["solver"] + 1 >= len(_FALLBACKS):
                    raise LinAlgError(str(e)) from e
                state["solver"] += 1
                logger.debug(f"Normal equations: '{method}' failed, falling back to '{_FALLBACKS[state['solver']]}'")

        d_tau = (rhatg + rhattk / tau - (-c @ u + b @ v)) / (kappa / tau + (-c @ p + b @ q))
        d_x = u + p * d_tau
        d_y = v + q * d_tau
        d_z = (rhatxs - z * d_x) / x
        d_kappa = (rhattk - kappa * d_tau) / tau

        alpha = _get_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, 1.0)
        gamma = (1 - alpha) ** 2 * min(0.1, 1 - alpha)

    return d_x, d_y, d_z, d_tau, d_kappa


def _recenter_free_pairs(x, tau, free_pairs):
    # x_j = p - q is invariant under a common shift; keep min(p, q) at the scale of tau
    for i, j in free_pairs:
        excess = min(x[i], x[j]) - tau
        if excess > 0:
            x[i] -= excess
            x[j] -= excess


def _ip_hsd(A, b, c, tol, maxiter, free_pairs):
    m, n = A.shape
    x, y, z = np.ones(n), np.zeros(m), np.ones(n)
    tau, kappa = 1.0, 1.0

    r_p0 = np.linalg.norm(b - A @ x)
    r_d0 = np.linalg.norm(c - z)
    r_g0 = abs(c @ x + kappa)
    mu0 = (x @ z + tau * kappa) / (n + 1)
    b_scale = 1 + np.max(np.abs(b), initial=0.0)
    c_scale = 1 + np.max(np.abs(c), initial=0.0)
    state = {"solver": 0}

    def indicators():
        xh, yh, zh = x / tau, y / tau, z / tau
        obj = c @ xh
        primal = np.max(np.abs(A @ xh - b), initial=0.0) / b_scale
        dual = np.max(np.abs(A.T @ yh + zh - c), initial=0.0) / c_scale
        gap = abs(obj - b @ yh) / (1 + abs(obj))
        return primal, dual, gap, obj

    primal, dual, gap, obj = indicators()
    iteration = 0
    status: LPStatus = OPTIMAL
    while primal > tol or dual > tol or gap > tol:
        if iteration >= maxiter:
            status = NUMERICAL_FAILURE
            break
        iteration += 1
        try:
            d_x, d_y, d_z, d_tau, d_kappa = _get_delta(A, b, c, x, y, z, tau, kappa, state)
            alpha = _get_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, STEP_SCALE)
            x = x + alpha * d_x
            y = y + alpha * d_y
            z = z + alpha * d_z
            tau = tau + alpha * d_tau
            kappa = kappa + alpha * d_kappa
        except (LinAlgError, FloatingPointError, ValueError, ZeroDivisionError) as e:
            logger.debug(f"Interior point step failed: {e}")
            status = NUMERICAL_FAILURE
            break
        if free_pairs:
            _recenter_free_pairs(x, tau, free_pairs)

        primal, dual, gap, obj = indicators()
        logger.trace(
            f"it={iteration} primal={primal:.3e} dual={dual:.3e} gap={gap:.3e} "
            f"alpha={alpha:.4f} tau={tau:.3e} kappa={kappa:.3e} obj={obj:.10g}"
        )

        rho_p = np.linalg.norm(b * tau - A @ x) / max(1, r_p0)
        rho_d = np.linalg.norm(c * tau - A.T @ y - z) / max(1, r_d0)
        rho_g = abs(c @ x - b @ y + kappa) / max(1, r_g0)
        rho_mu = ((x @ z + tau * kappa) / (n + 1)) / mu0
        inf1 = rho_p < tol and rho_d < tol and rho_g < tol and tau < tol * max(1, kappa)
        inf2 = rho_mu < tol and tau < tol * min(1, kappa)
        if inf1 or inf2:
            status = INFEASIBLE if b @ y > tol else UNBOUNDED
            break
        if not (np.isfinite(tau) and tau > 0):
            status = NUMERICAL_FAILURE
            break

    return x / tau, y / tau, status, iteration, gap


def solve_lp(lp: LinearProgram, tol: float = DEFAULT_TOL, maxiter: int = DEFAULT_MAXITER) -> LPSolution:
    """
    Solve a linear program with the homogeneous primal-dual interior point method.

    Args:
        lp (LinearProgram): The problem.
        tol (float, optional): Relative primal/dual infeasibility and duality gap tolerance.
        maxiter (int, optional): Iteration cap; reaching it yields ``numerical-failure``.

    Returns:
        LPSolution: ``x``, equality duals ``y``, objective values, duality gap and status.
        When the status is ``optimal`` the relative duality gap is at most ``tol`` and
        ``max|A x - b| <= tol * (1 + max|b|)``.
    """
    sf = _to_standard_form(lp)
    keep, consistent = _independent_rows(sf.A, sf.b)
    n_std = sf.A.shape[1]
    if not consistent:
        logger.debug("Equality constraints are inconsistent")
        return _finish(lp, sf, np.zeros(n_std), np.zeros(sf.A.shape[0]), INFEASIBLE, 0, np.inf, tol)

    A, b = sf.A[keep], sf.b[keep]
    if A.shape[0] == 0:
        if np.any(sf.c < 0):
            return _finish(lp, sf, np.zeros(n_std), np.zeros(sf.A.shape[0]), UNBOUNDED, 0, np.inf, tol)
        return _finish(lp, sf, np.zeros(n_std), np.zeros(sf.A.shape[0]), OPTIMAL, 0, 0.0, tol)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        xs, ys, status, iterations, gap = _ip_hsd(A, b, sf.c, tol, maxiter, sf.free_pairs)
    y_full = np.zeros(sf.A.shape[0])
    y_full[keep] = ys
    return _finish(lp, sf, xs, y_full, status, iterations, gap, tol)


def _finish(lp, sf, xs, y_full, status, iterations, gap, tol) -> LPSolution:
    n_struct = sf.P.shape[1]
    x = sf.offset + sf.P @ xs[:n_struct]
    objective = float(lp.c @ x)
    dual_objective = float(sf.b @ y_full + sf.c0)
    primal_infeasibility = (
        float(np.max(np.abs(lp.A @ x - lp.b))) if lp.n_rows else 0.0
    )
    b_scale = 1 + max(np.max(np.abs(lp.b), initial=0.0), np.max(np.abs(sf.b), initial=0.0))
    if status == OPTIMAL and primal_infeasibility > 10 * tol * b_scale:
        # an answer that breaks A x == b is never reported as optimal
        logger.bind(primal_infeasibility=primal_infeasibility).warning(
            "Interior point solution is infeasible after mapping back to the original variables"
        )
        status = NUMERICAL_FAILURE
    if status != OPTIMAL:
        logger.debug(f"LP finished with status '{status}' after {iterations} iterations")
    return LPSolution(
        x=x,
        y=y_full[: sf.n_rows_original],
        objective=objective,
        dual_objective=dual_objective,
        gap=float(gap),
        primal_infeasibility=primal_infeasibility,
        status=status,
        iterations=iterations,
        message=_MESSAGES[status],
    )


def _fmt_row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_lp(lp: LinearProgram, path: str | PathLike) -> None:
    """
    Write ``lp`` in the plain-text block format::

        c <n>
        <n values>
        A <m> <n>
        <m rows of n values>
        b <m>
        <m values>
        bounds <n>
        <n lines: lower upper>

    Infinite bounds are written as ``inf`` / ``-inf``.
    """
    lines = [f"c {lp.n_vars}", _fmt_row(lp.c), f"A {lp.n_rows} {lp.n_vars}"]
    lines.extend(_fmt_row(row) for row in lp.A)
    lines.append(f"b {lp.n_rows}")
    lines.append(_fmt_row(lp.b))
    lines.append(f"bounds {lp.n_vars}")
    lines.extend(f"{lo!r} {up!r}" for lo, up in zip(map(float, lp.lower), map(float, lp.upper)))  # type: ignore
    try:
        with open(os.fspath(path), "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise ExportError(os.fspath(path), str(e)) from e


def read_lp(path: str | PathLike) -> LinearProgram:
    """Read a program written by `write_lp`."""
    with open(os.fspath(path), "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]

    def numbers(line: str) -> list[float]:
        return [float(v) for v in line.split()] if line else []

    n = int(lines[0].split()[1])
    c = numbers(lines[1])
    m = int(lines[2].split()[1])
    A = [numbers(lines[3 + i]) for i in range(m)]
    pos = 3 + m
    b = numbers(lines[pos + 1]) if m else []
    pos = pos + 2 if m else pos + 1
    if not m and not lines[pos].startswith("bounds"):
        pos += 1
    bounds = [numbers(lines[pos + 1 + j]) for j in range(n)]
    return LinearProgram(
        c=np.array(c),
        A=np.array(A).reshape(m, n),
        b=np.array(b),
        lower=np.array([lo for lo, _ in bounds]),
        upper=np.array([up for _, up in bounds]),
    )


__all__ = [
    "LPStatus",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "NUMERICAL_FAILURE",
    "LinearProgram",
    "LPSolution",
    "solve_lp",
    "write_lp",
    "read_lp",
]
