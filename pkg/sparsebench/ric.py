"""
Restricted isometry constants.

For a subset ``T`` of columns let ``lambda_min(T)`` and ``lambda_max(T)`` be the extreme eigenvalues
of ``phi_T^H phi_T``. With the global extremes ``m`` and ``M`` over ``|T| = r`` the scaled
isometry ``C (1 - delta) |x|^2 <= |phi_T x|^2 <= C (1 + delta) |x|^2`` holds with the smallest
defect for ``C = (M + m) / 2``, which gives ``delta_r = (M - m) / (M + m)``.

Gram eigenvalues of nested subsets interlace, so subsets of size exactly ``r`` cover ``|T| <= r``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from sparsebench.errors import EnumerationBudgetError, ParameterError, ValidationError
from sparsebench.numerics import (
    RngStream,
    as_generator,
    batched_extreme_eigenvalues,
    compensated_mean,
)

RicMode = Literal["exact", "sampled"]

ENUMERATION_BUDGET = 10**6
DEFAULT_SAMPLED_TRIALS = 10_000
DECOMPOSITION_TOL = 1e-8
BATCH_SIZE = 4096
CT_LIMIT = 2.0

RIC_CSV_HEADER = "r,mode,lambda_min,lambda_max,C_opt,delta,verdict-inputs"


@dataclass(frozen=True)
class RicReport:
    """
    Restricted isometry constant of order ``r``.

    ``mode == "sampled"`` reports are lower bounds: they only see ``trials`` random subsets.
    """

    r: int
    lambda_min: float
    lambda_max: float
    C_opt: float
    delta: float
    mode: RicMode = "exact"
    trials: int | None = None

    @property
    def lower_bound(self) -> bool:
        return self.mode == "sampled"

    def delta_at(self, C: float) -> float:
        """Isometry defect for a fixed scaling ``C > 0``."""
        return max(1 - self.lambda_min / C, self.lambda_max / C - 1)

    def to_csv_row(self) -> str:
        """
        One line under `RIC_CSV_HEADER`. Sampled reports write their mode as ``sampled(trials)``
        and are marked ``lower-bound`` in the last column; exact reports are ``usable`` since
        only they may enter the recovery condition.
        """
        mode = self.mode if self.trials is None else f"{self.mode}({self.trials})"
        return ",".join(
            [
                str(self.r),
                mode,
                repr(self.lambda_min),
                repr(self.lambda_max),
                repr(self.C_opt),
                repr(self.delta),
                "lower-bound" if self.lower_bound else "usable",
            ]
        )


@dataclass(frozen=True)
class RicVerdict:
    """
    Outcome of the ``delta_3r + 3 delta_4r <= 2`` test.

    ``holds`` uses a single scaling ``C_shared`` for both orders. ``holds_per_r`` is the reading
    where each order has its own optimal scaling.
    """

    holds: bool
    delta_3r: float
    delta_4r: float
    C_shared: float
    holds_per_r: bool
    report_3r: RicReport
    report_4r: RicReport

    def __iter__(self):
        yield self.holds
        yield self.delta_3r
        yield self.delta_4r


def _report(r: int, m: float, M: float, mode: RicMode, trials: int | None) -> RicReport:
    m = max(m, 0.0)
    total = M + m
    if total <= 0:
        return RicReport(r, m, M, 0.0, 1.0, mode, trials)
    return RicReport(r, m, M, total / 2, (M - m) / total, mode, trials)


def _subset_batches(n: int, r: int, batch: int = BATCH_SIZE) -> Iterator[NDArray[np.intp]]:
    combos = itertools.combinations(range(n), r)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp)


def _gram_stack(cols: NDArray, idx: NDArray[np.intp]) -> NDArray:
    # (k, batch, r) -> (batch, k, r)
    sub = np.moveaxis(cols[:, idx], 1, 0)
    return np.conj(np.swapaxes(sub, 1, 2)) @ sub


def _check_order(phi: NDArray, r: int) -> None:
    if phi.ndim != 2:
        raise ParameterError("phi", phi.shape, "must be a 2-D matrix")
    if not 1 <= r <= phi.shape[1]:
        raise ParameterError("r", r, f"must satisfy 1 <= r <= n={phi.shape[1]}")


def _check_budget(n: int, r: int, budget: int) -> int:
    count = math.comb(n, r)
    if count > budget:
        raise EnumerationBudgetError(count, budget)
    return count


def _exact_extremes(phi: NDArray, r: int) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for idx in _subset_batches(phi.shape[1], r):
        mins, maxs = batched_extreme_eigenvalues(_gram_stack(phi, idx))
        lo = min(lo, float(mins.min()))
        hi = max(hi, float(maxs.max()))
    return lo, hi


def _random_subsets(n: int, r: int, trials: int, gen: np.random.Generator) -> NDArray[np.intp]:
    return np.argsort(gen.random((trials, n)), axis=1)[:, :r]


def restricted_isometry_constant(
    phi: NDArray,
    r: int,
    mode: RicMode = "exact",
    trials: int = DEFAULT_SAMPLED_TRIALS,
    rng: RngStream | np.random.Generator | int | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> RicReport:
    """
    Restricted isometry constant of order ``r`` with the defect-minimizing scaling.

    Args:
        phi (NDArray): Real or complex ``k x n`` matrix.
        r (int): Order.
        mode (str, optional): ``exact`` enumerates all ``C(n, r)`` subsets, ``sampled`` draws
            ``trials`` uniform subsets and returns a lower bound.
        trials (int, optional): Sampled subsets.
        rng (optional): Random stream for sampled mode.
        budget (int, optional): Largest number of subsets exact mode may enumerate.

    Raises:
        ParameterError: for an invalid order or mode.
        EnumerationBudgetError: if ``C(n, r) > budget`` in exact mode.

    Example:
        >>> restricted_isometry_constant(np.diag([1.0, 2.0]), 1).delta
        0.6
    """
    phi = np.asarray(phi)
    _check_order(phi, r)
    if r > phi.shape[0]:
        logger.bind(r=r, k=phi.shape[0]).warning("Order exceeds the number of rows, delta_r >= 1")
    if mode == "exact":
        _check_budget(phi.shape[1], r, budget)
        lo, hi = _exact_extremes(phi, r)
        return _report(r, lo, hi, "exact", None)
    if mode == "sampled":
        if trials < 1:
            raise ParameterError("trials", trials, "must be >= 1")
        gen = as_generator(rng if rng is not None else RngStream(0))
        lo, hi = math.inf, -math.inf
        for start in range(0, trials, BATCH_SIZE):
            idx = _random_subsets(phi.shape[1], r, min(BATCH_SIZE, trials - start), gen)
            mins, maxs = batched_extreme_eigenvalues(_gram_stack(phi, np.sort(idx, axis=1)))
            lo = min(lo, float(mins.min()))
            hi = max(hi, float(maxs.max()))
        return _report(r, lo, hi, "sampled", trials)
    raise ParameterError("mode", mode, "must be 'exact' or 'sampled'")


def restricted_isometry_profile(
    phi: NDArray,
    r_max: int,
    mode: RicMode = "exact",
    trials: int = DEFAULT_SAMPLED_TRIALS,
    rng: RngStream | np.random.Generator | int | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> list[RicReport]:
    """Reports for every order ``r = 1 .. r_max``."""
    stream = rng if rng is not None else RngStream(0)
    reports = []
    for r in range(1, r_max + 1):
        sub = stream.child("ric", r) if isinstance(stream, RngStream) else stream
        reports.append(restricted_isometry_constant(phi, r, mode, trials, sub, budget))
    return reports


def _shared_scaling(a: RicReport, b: RicReport, weight: float = 3.0) -> tuple[float, float]:
    """
    Minimize ``delta_a(C) + weight * delta_b(C)`` over ``C > 0``.

    Each defect is a convex piecewise linear function of ``u = 1/C`` with a single kink at
    ``u = 2 / (lambda_min + lambda_max)``, so the minimum sits at one of the two kinks.
    """
    candidates = [rep.C_opt for rep in (a, b) if rep.C_opt > 0]
    if not candidates:
        return 0.0, 1.0 + weight
    best_C, best = candidates[0], math.inf
    for C in candidates:
        value = a.delta_at(C) + weight * b.delta_at(C)
        if value < best:
            best_C, best = C, value
    return best_C, best


def ric_condition_holds(phi: NDArray, r: int, budget: int = ENUMERATION_BUDGET) -> RicVerdict:
    """
    Check ``delta_3r + 3 delta_4r <= 2`` with exact enumeration and one shared scaling ``C``.

    Unpacks as ``(verdict, delta_3r, delta_4r)``.

    Raises:
        ParameterError: if ``4r > n``.
        EnumerationBudgetError: if ``C(n, 4r)`` exceeds ``budget``. Sampled reports are lower
            bounds and never produce a verdict.
    """
    phi = np.asarray(phi)
    if r < 1 or 4 * r > phi.shape[1]:
        raise ParameterError("r", r, f"needs 1 <= 4r <= n={phi.shape[1]}")
    if 4 * r > phi.shape[0]:
        logger.bind(r=r, k=phi.shape[0]).warning("4r exceeds the number of rows")
    _check_budget(phi.shape[1], 4 * r, budget)
    _check_budget(phi.shape[1], 3 * r, budget)
    report_3r = restricted_isometry_constant(phi, 3 * r, "exact", budget=budget)
    report_4r = restricted_isometry_constant(phi, 4 * r, "exact", budget=budget)

    C, _ = _shared_scaling(report_3r, report_4r)
    if C > 0:
        delta_3r, delta_4r = report_3r.delta_at(C), report_4r.delta_at(C)
    else:
        delta_3r, delta_4r = 1.0, 1.0
    holds = delta_3r + 3 * delta_4r <= CT_LIMIT
    holds_per_r = report_3r.delta + 3 * report_4r.delta <= CT_LIMIT
    logger.bind(delta_3r=round(delta_3r, 6), delta_4r=round(delta_4r, 6), C=round(C, 6)).debug(
        f"Isometry condition {'holds' if holds else 'fails'}"
    )
    return RicVerdict(
        holds=bool(holds),
        delta_3r=float(delta_3r),
        delta_4r=float(delta_4r),
        C_shared=float(C),
        holds_per_r=bool(holds_per_r),
        report_3r=report_3r,
        report_4r=report_4r,
    )


def validate_decomposition(x_vectors: NDArray, tol: float = DECOMPOSITION_TOL) -> float:
    """
    Check that the rows ``x_i`` of ``x_vectors`` satisfy ``(1/N) sum_i x_i x_i^H = I``.

    Returns:
        float: The largest entrywise deviation.

    Raises:
        ValidationError: if the deviation exceeds ``tol``.
    """
    X = np.asarray(x_vectors)
    if X.ndim != 2:
        raise ValidationError(f"Expected a 2-D array of vectors, got shape {X.shape}")
    gram = X.conj().T @ X / X.shape[0]
    deviation = float(np.max(np.abs(gram - np.eye(X.shape[1]))))
    if deviation > tol:
        raise ValidationError("Vectors are not a decomposition of the identity", deviation)
    return deviation


def operator_lln_deviation(
    x_vectors: NDArray, omega, r: int, budget: int = ENUMERATION_BUDGET
) -> float:
    """
    ``sup_{|T| <= r} || I_T - (1/k) sum_{i in omega} x_i[T] x_i[T]^H ||`` for a decomposition of
    the identity ``x_1, ..., x_N``.

    Each term is the largest eigenvalue magnitude of the Hermitian deviation matrix.

    Args:
        x_vectors (NDArray): ``N x n`` array whose rows are the vectors ``x_i``.
        omega: Selected row indices, ``k = len(omega)``.
        r (int): Subset size.
        budget (int, optional): Largest number of subsets to enumerate.

    Raises:
        ValidationError: if the rows do not decompose the identity.
        EnumerationBudgetError: if ``C(n, r) > budget``.
    """
    X = np.asarray(x_vectors)
    validate_decomposition(X)
    omega = np.asarray(sorted(set(int(i) for i in omega)), dtype=np.intp)
    if omega.size == 0:
        raise ParameterError("omega", omega, "must be non-empty")
    n = X.shape[1]
    if not 1 <= r <= n:
        raise ParameterError("r", r, f"must satisfy 1 <= r <= n={n}")
    _check_budget(n, r, budget)

    rows = X[omega] / math.sqrt(omega.size)
    eye = np.eye(r)
    worst = 0.0
    for idx in _subset_batches(n, r):
        mins, maxs = batched_extreme_eigenvalues(eye - _gram_stack(rows, idx))
        worst = max(worst, float(np.max(np.abs(mins))), float(np.max(np.abs(maxs))))
    return worst


@dataclass(frozen=True)
class LLNPoint:
    k: int
    mean: float
    stderr: float
    trials: int


def operator_lln_experiment(
    x_vectors: NDArray,
    r: int,
    k_values,
    trials: int,
    rng: RngStream | int = 0,
    budget: int = ENUMERATION_BUDGET,
) -> list[LLNPoint]:
    """
    Mean operator deviation over ``trials`` uniformly random row sets of each size ``k``.

    Trial ``t`` for size ``k`` draws its rows from the stream ``rng.child("lln", k, t)``.
    """
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    X = np.asarray(x_vectors)
    points = []
    for k in k_values:
        values = []
        for t in range(trials):
            gen = stream.child("lln", k, t).generator()
            omega = gen.choice(X.shape[0], size=k, replace=False)
            values.append(operator_lln_deviation(X, omega, r, budget))
        std = float(np.std(values, ddof=1)) if trials > 1 else 0.0
        points.append(LLNPoint(int(k), compensated_mean(values), std / math.sqrt(trials), trials))
        logger.bind(k=k, mean=round(points[-1].mean, 6)).info("Operator deviation")
    return points


__all__ = [
    "RicMode",
    "ENUMERATION_BUDGET",
    "RIC_CSV_HEADER",
    "RicReport",
    "RicVerdict",
    "restricted_isometry_constant",
    "restricted_isometry_profile",
    "ric_condition_holds",
    "validate_decomposition",
    "operator_lln_deviation",
    "LLNPoint",
    "operator_lln_experiment",
]
