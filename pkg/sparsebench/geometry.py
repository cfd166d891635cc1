"""
Convex geometry of exact recovery.

A signal ``f`` is the unique l1 minimizer of ``phi @ g == phi @ f`` exactly when the kernel of
``phi`` meets the cone generated by ``f + ||f||_1 B_1`` only at zero. With ``T+`` and ``T-`` the
positive and negative support of ``f`` the cone is

    { t : sum_{T-} t - sum_{T+} t + sum_{T^c} |t| <= 0 }.

Its spherical part lies in ``(sqrt(2) + 1) D`` where ``D`` is the convex hull of unit vectors with
at most ``r`` nonzeros, so Gaussian widths of ``D`` bound the measurement count needed for a
random Gaussian kernel to miss the cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from loguru import logger
from numpy.typing import NDArray

from sparsebench.ensembles import (
    Signal,
    SparseSignalSpec,
    realify,
    sample_gaussian_full_rank,
    sample_sparse_signal,
    scaled_dft_vectors,
)
from sparsebench.errors import (
    DimensionError,
    ParameterError,
    SamplingError,
    SolverError,
    ValidationError,
)
from sparsebench.lp import OPTIMAL, LinearProgram, solve_lp
from sparsebench.numerics import (
    RealVector,
    RngStream,
    as_generator,
    compensated_mean,
    kernel_basis,
    sorted_abs_desc,
)

CONE_TOL = 1e-12
TOUCH_TOL = 1e-8
NULL_TOL = 1e-10
INCLUSION_CONSTANT = math.sqrt(2) + 1
SAMPLE_COMPLEXITY_FACTOR = 6 + 4 * math.sqrt(2)
LOG_OFFSET = 1.5
GORDON_FACTOR = 3.5
GORDON_DENOMINATOR = 18.0
MIN_WIDTH_SAMPLES = 1000
MAX_REJECTIONS = 1000
L1_BALL_TOL = 1e-12


@dataclass(frozen=True)
class ConeSpec:
    t_plus: tuple[int, ...]
    t_minus: tuple[int, ...]
    n: int

    def __post_init__(self):
        if set(self.t_plus) & set(self.t_minus):
            raise ParameterError("t_plus", self.t_plus, "must be disjoint from t_minus")

    @classmethod
    def from_signal(cls, f: Signal | NDArray) -> "ConeSpec":
        values = f.values if isinstance(f, Signal) else np.asarray(f, dtype=float)
        return cls(
            t_plus=tuple(int(i) for i in np.flatnonzero(values > 0)),
            t_minus=tuple(int(i) for i in np.flatnonzero(values < 0)),
            n=int(values.size),
        )

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.t_plus + self.t_minus))

    @property
    def complement(self) -> NDArray[np.intp]:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.support)] = False
        return np.flatnonzero(mask)

    def signs(self) -> NDArray[np.float64]:
        """Coefficients of the linear part: ``-1`` on ``T+``, ``+1`` on ``T-``, zero elsewhere."""
        s = np.zeros(self.n)
        s[list(self.t_plus)] = -1.0
        s[list(self.t_minus)] = 1.0
        return s


def cone_functional(cone: ConeSpec, t: NDArray) -> float:
    t = np.asarray(t, dtype=float)
    if t.shape != (cone.n,):
        raise DimensionError(t.shape, f"({cone.n},)")
    return float(cone.signs() @ t + np.sum(np.abs(t[cone.complement])))


def cone_contains(cone: ConeSpec, t: NDArray) -> bool:
    """
    Example:
        >>> cone_contains(ConeSpec((0,), (), 2), np.array([1.0, 0.0]))
        True
    """
    return cone_functional(cone, t) <= CONE_TOL


def d_norm(x: NDArray, r: int) -> float:
    """
    Sum of the l2 norms of consecutive blocks of ``r`` entries of the non-increasing magnitude
    rearrangement of ``x`` (the last block may be shorter).

    Example:
        >>> d_norm(np.full(4, 0.5), 2)
        1.4142135623730951
    """
    x = np.asarray(x, dtype=float).ravel()
    if not 1 <= r <= max(x.size, 1):
        raise ParameterError("r", r, f"must satisfy 1 <= r <= n={x.size}")
    values, _ = sorted_abs_desc(x)
    pad = (-values.size) % r
    blocks = np.concatenate([values, np.zeros(pad)]).reshape(-1, r)
    return float(np.sum(np.linalg.norm(blocks, axis=1)))


def sample_cone_sphere(
    f: Signal | NDArray, rng: RngStream | np.random.Generator | int
) -> RealVector:
    """
    A random unit vector of the cone of ``f``.

    Draws a random point of ``f + ||f||_1 B_1`` as a Dirichlet-weighted convex combination of
    the ``2n`` vertices ``f +- ||f||_1 e_i`` and normalizes it.

    Raises:
        ParameterError: if ``f == 0``.
        SamplingError: if no accepted point was found after 1000 draws.
    """
    values = f.values if isinstance(f, Signal) else np.asarray(f, dtype=float)
    l1 = float(np.sum(np.abs(values)))
    if l1 == 0:
        raise ParameterError("f", values, "must be nonzero")
    cone = ConeSpec.from_signal(values)
    gen = as_generator(rng)
    n = values.size
    for _ in range(MAX_REJECTIONS):
        weights = gen.dirichlet(np.ones(2 * n))
        point = values + l1 * (weights[:n] - weights[n:])
        norm = np.linalg.norm(point)
        if norm <= CONE_TOL * l1:
            continue
        x = point / norm
        if cone_contains(cone, x):
            return x
    raise SamplingError(MAX_REJECTIONS)


@dataclass(frozen=True)
class WidthEstimate:
    mean: float
    stderr: float
    samples: int
    bound: float

    def scaled(self, factor: float) -> "WidthEstimate":
        return WidthEstimate(
            self.mean * factor, self.stderr * factor, self.samples, self.bound * factor
        )


def gaussian_width_D_bound(n: int, r: int) -> float:
    """
    ``sqrt(2 r (1.5 + ln(n / r)))``

    Example:
        >>> round(gaussian_width_D_bound(256, 4), 4)
        6.7284
    """
    _check_sparsity(n, r)
    return math.sqrt(2 * r * (LOG_OFFSET + math.log(n / r)))


def _check_sparsity(n: int, r: int) -> None:
    if not 1 <= r <= n:
        raise ParameterError("r", r, f"must satisfy 1 <= r <= n={n}")


def gaussian_width_D_mc(
    n: int, r: int, samples: int, rng: RngStream | int = 0, batch: int = 10_000
) -> WidthEstimate:
    """
    Monte Carlo estimate of ``E sup_{|J| = r} ||g_J||_2`` for ``g ~ N(0, I_n)``.

    Samples are drawn in batches; batch ``b`` uses the stream ``rng.child("width", b)``.

    Raises:
        ParameterError: if ``samples < 1000``.
    """
    _check_sparsity(n, r)
    if samples < MIN_WIDTH_SAMPLES:
        raise ParameterError("samples", samples, f"must be >= {MIN_WIDTH_SAMPLES}")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    batch = max(1, min(batch, 2_000_000 // n))
    values = []
    for b, start in enumerate(range(0, samples, batch)):
        gen = stream.child("width", b).generator()
        g2 = gen.standard_normal((min(batch, samples - start), n)) ** 2
        top = np.partition(g2, n - r, axis=1)[:, n - r :]
        values.append(np.sqrt(np.sum(top, axis=1)))
    draws = np.concatenate(values)
    return WidthEstimate(
        mean=compensated_mean(draws.tolist()),
        stderr=float(np.std(draws, ddof=1) / math.sqrt(samples)),
        samples=samples,
        bound=gaussian_width_D_bound(n, r),
    )


def width_surrogate_cone(n: int, r: int, samples: int, rng: RngStream | int = 0) -> WidthEstimate:
    """Width of ``(sqrt(2) + 1) D``, an upper surrogate for the width of the cone's sphere part."""
    return gaussian_width_D_mc(n, r, samples, rng).scaled(INCLUSION_CONSTANT)


def sample_complexity_gaussian(r: int, n: int) -> float:
    """
    ``(6 + 4 sqrt(2)) r (1.5 + ln(n / r))`` Gaussian measurements suffice for recovery of every
    ``r``-sparse signal with high probability.

    Example:
        >>> round(sample_complexity_gaussian(2, 1024), 2)
        180.41
    """
    _check_sparsity(n, r)
    return SAMPLE_COMPLEXITY_FACTOR * r * (LOG_OFFSET + math.log(n / r))


@dataclass(frozen=True)
class ProbabilityBound:
    """A probability lower bound, clamped to ``[0, 1]``; ``vacuous`` marks the trivial regime."""

    value: float
    vacuous: bool

    def __float__(self) -> float:
        return self.value


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def gordon_escape_probability(k: int, w: float) -> ProbabilityBound:
    """
    ``1 - 3.5 exp(-(k / sqrt(k + 1) - w)^2 / 18)``: probability that a random subspace of
    codimension ``k`` misses a spherical set of Gaussian width ``w``.

    Vacuous when ``w >= k / sqrt(k + 1)``.
    """
    if k < 1:
        raise ParameterError("k", k, "must be >= 1")
    a = k / math.sqrt(k + 1)
    if w >= a:
        logger.bind(k=k, w=w).debug("Escape bound is vacuous")
        return ProbabilityBound(0.0, True)
    return ProbabilityBound(
        _clamp(1 - GORDON_FACTOR * math.exp(-((a - w) ** 2) / GORDON_DENOMINATOR)), False
    )


def recovery_probability_bound(k: int, r: int, n: int) -> ProbabilityBound:
    """
    ``1 - 3.5 exp(-(sqrt(k) - sqrt(k(r, n)))^2 / 18)`` with ``k(r, n)`` from
    `sample_complexity_gaussian`. Vacuous (value 0) when ``k <= k(r, n)``.
    """
    k_rn = sample_complexity_gaussian(r, n)
    if k <= k_rn:
        logger.bind(k=k, k_rn=round(k_rn, 2)).warning("Recovery bound is vacuous below k(r, n)")
        return ProbabilityBound(0.0, True)
    gap = math.sqrt(k) - math.sqrt(k_rn)
    return ProbabilityBound(
        _clamp(1 - GORDON_FACTOR * math.exp(-(gap**2) / GORDON_DENOMINATOR)), False
    )


@dataclass(frozen=True)
class ConeKernelResult:
    """
    ``value`` is the smallest cone functional over kernel vectors normalized so that the linear
    part equals ``-1`` (``inf`` when no such vector exists). The cone meets the kernel
    nontrivially iff ``value <= 1e-8``.
    """

    intersect: bool
    value: float
    degenerate: bool = False
    lp_status: str | None = None


def cone_kernel_test(phi: NDArray, f: Signal | NDArray) -> ConeKernelResult:
    """
    Decide whether ``Ker(phi)`` contains a nonzero ``t`` with cone functional ``<= 0``.

    If ``phi_T`` has a nontrivial kernel the answer is yes. Otherwise kernel vectors are
    parametrized by their off-support part ``w`` (``t_T = -pinv(phi_T) phi_{T^c} w``) and the LP

        minimize ||w||_1  subject to  w in W,  L(w) = 1

    is solved, where ``W`` is the set of admissible ``w`` and ``L`` the linear part of the
    functional with its sign flipped. The functional minimum on the slice is ``opt - 1``.

    Raises:
        RankDeficientError: if ``phi`` does not have full row rank.
        SolverError: if the LP does not reach optimality.
    """
    phi = np.asarray(phi)
    realified = np.iscomplexobj(phi)
    if realified:
        phi = realify(phi)
    values = f.values if isinstance(f, Signal) else np.asarray(f, dtype=float)
    k, n = phi.shape
    if values.shape != (n,):
        raise DimensionError(values.shape, f"({n},) to match phi")
    cone = ConeSpec.from_signal(values)
    T = np.array(cone.support, dtype=np.intp)
    Tc = cone.complement

    # realified rows come in dependent pairs, only a real phi must have full row rank
    if k < n and not realified:
        kernel_basis(phi)
    elif np.linalg.matrix_rank(phi) == n:
        return ConeKernelResult(False, math.inf)
    if T.size == 0:
        return ConeKernelResult(False, math.inf)

    s_T = cone.signs()[T]
    phi_T = phi[:, T]
    N_T = scipy.linalg.null_space(phi_T, rcond=NULL_TOL)
    if N_T.shape[1]:
        # kernel vectors supported on T
        if np.max(np.abs(s_T @ N_T)) > NULL_TOL:
            return ConeKernelResult(True, -1.0)
        logger.bind(value=0.0).warning("Degenerate touching on the support of f")
        return ConeKernelResult(True, 0.0, degenerate=True)
    if Tc.size == 0:
        return ConeKernelResult(False, math.inf)

    G = scipy.linalg.lstsq(phi_T, phi[:, Tc])[0]
    B = phi[:, Tc] - phi_T @ G
    g = -G.T @ s_T
    W = scipy.linalg.null_space(B, rcond=NULL_TOL)
    if W.shape[1] == 0 or np.max(np.abs(g @ W)) <= NULL_TOL * max(1.0, np.max(np.abs(g))):
        return ConeKernelResult(False, math.inf)

    Q = scipy.linalg.null_space(W.T).T
    A = np.vstack([Q, g[None, :]])
    lp = LinearProgram(
        c=np.ones(2 * Tc.size),
        A=np.hstack([A, -A]),
        b=np.concatenate([np.zeros(Q.shape[0]), [1.0]]),
    )
    solution = solve_lp(lp)
    if solution.status != OPTIMAL:
        raise SolverError(solution)
    value = solution.objective - 1.0
    degenerate = abs(value) <= TOUCH_TOL
    if degenerate:
        logger.bind(objective=solution.objective, value=value).warning(
            "Degenerate touching of cone and kernel"
        )
    return ConeKernelResult(value <= TOUCH_TOL, value, degenerate, solution.status)


def cone_kernel_intersect(phi: NDArray, f: Signal | NDArray) -> bool:
    """
    ``True`` iff the cone of ``f`` meets ``Ker(phi)`` outside the origin, i.e. ``f`` is not the
    unique l1 minimizer of its measurements.

    Example:
        >>> cone_kernel_intersect(np.eye(3), np.array([1.0, 0.0, 0.0]))
        False
    """
    return cone_kernel_test(phi, f).intersect


def maurey_approximate(
    y: NDArray, m: int, x_vectors: NDArray, rng: RngStream | np.random.Generator | int
) -> tuple[RealVector, float]:
    """
    Approximate ``y`` in the l1 ball by the mean of ``m`` random signed coordinate vectors.

    Each draw is ``sign(y_i) e_i`` with probability ``|y_i|`` and zero with probability
    ``1 - ||y||_1``, so its mean is ``y``.

    Args:
        y (NDArray): Real vector with ``||y||_1 <= 1``.
        m (int): Number of draws.
        x_vectors (NDArray): ``k x n`` array of the vectors defining ``||v||_X = max_i |<x_i, v>|``.
        rng: Random stream.

    Returns:
        tuple[RealVector, float]: ``z`` and ``||y - z||_X``.

    Raises:
        ValidationError: if ``||y||_1 > 1``.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(x_vectors)
    if X.ndim != 2 or X.shape[1] != y.size:
        raise DimensionError(X.shape, f"(k, {y.size})")
    if m < 1:
        raise ParameterError("m", m, "must be >= 1")
    l1 = float(np.sum(np.abs(y)))
    if l1 > 1 + L1_BALL_TOL:
        raise ValidationError("y is outside the unit l1 ball", l1 - 1)
    probabilities = np.abs(y) / max(1.0, l1)
    probabilities = np.append(probabilities, max(0.0, 1.0 - probabilities.sum()))
    counts = as_generator(rng).multinomial(m, probabilities)
    z = np.sign(y) * counts[:-1] / m
    return z, float(np.max(np.abs(X.conj() @ (y - z))))


def maurey_covering_log_bound(n: int, m: int) -> float:
    """Log of ``(2n)^m``, the number of distinct averages of ``m`` signed coordinate vectors."""
    return m * math.log(2 * n)


@dataclass(frozen=True)
class MaureyRate:
    n: int
    m: int
    trials: int
    mean_error_m: float
    mean_error_4m: float

    @property
    def ratio(self) -> float:
        return self.mean_error_m / self.mean_error_4m


def maurey_error_rate(
    n: int,
    m: int,
    trials: int,
    rng: RngStream | int = 0,
    y: NDArray | None = None,
    x_vectors: NDArray | None = None,
) -> MaureyRate:
    """
    Mean approximation error at ``m`` and ``4m`` draws; the ratio is close to 2 for the
    ``m^(-1/2)`` rate.

    Defaults to the uniform point ``(1/n, ..., 1/n)`` and scaled DFT vectors.
    """
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    y = np.full(n, 1.0 / n) if y is None else np.asarray(y, dtype=float)
    X = scaled_dft_vectors(n) if x_vectors is None else np.asarray(x_vectors)
    means = []
    for draws in (m, 4 * m):
        errors = [
            maurey_approximate(y, draws, X, stream.child("maurey", draws, t))[1]
            for t in range(trials)
        ]
        means.append(compensated_mean(errors))
    logger.bind(m=m, ratio=round(means[0] / means[1], 4)).info("Maurey error rate")
    return MaureyRate(n, m, trials, means[0], means[1])


@dataclass(frozen=True)
class EscapePoint:
    k: int
    trials: int
    misses: int
    width: float
    bound: ProbabilityBound

    @property
    def frequency(self) -> float:
        return self.misses / self.trials

    @property
    def stderr(self) -> float:
        p = self.frequency
        return math.sqrt(p * (1 - p) / self.trials)


def escape_experiment(
    n: int,
    r: int,
    k_values,
    trials: int,
    rng: RngStream | int = 0,
    width_samples: int = 10_000,
) -> list[EscapePoint]:
    """
    Frequency with which the kernel of a random Gaussian ``k x n`` matrix misses the cone of a
    fixed ``r``-sparse signal, next to the escape bound at the width surrogate of the cone.
    """
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    f = sample_sparse_signal(SparseSignalSpec(n, r), stream.child("escape-signal"))
    width = width_surrogate_cone(n, r, width_samples, stream.child("escape-width"))
    points = []
    for k in k_values:
        misses = 0
        for t in range(trials):
            phi = sample_gaussian_full_rank(k, n, stream.child("escape", k, t).generator())
            misses += not cone_kernel_intersect(phi, f)
        bound = gordon_escape_probability(k, width.mean)
        point = EscapePoint(int(k), trials, misses, width.mean, bound)
        logger.bind(k=k, frequency=point.frequency, bound=round(point.bound.value, 6)).info(
            "Escape frequency"
        )
        points.append(point)
    return points


__all__ = [
    "ConeSpec",
    "cone_functional",
    "cone_contains",
    "d_norm",
    "sample_cone_sphere",
    "WidthEstimate",
    "gaussian_width_D_mc",
    "gaussian_width_D_bound",
    "width_surrogate_cone",
    "sample_complexity_gaussian",
    "ProbabilityBound",
    "gordon_escape_probability",
    "recovery_probability_bound",
    "ConeKernelResult",
    "cone_kernel_test",
    "cone_kernel_intersect",
    "maurey_approximate",
    "maurey_covering_log_bound",
    "MaureyRate",
    "maurey_error_rate",
    "EscapePoint",
    "escape_experiment",
]
