"""
Measurement ensembles and sparse test signals.

Every sampler is a pure function of its arguments: pass an `RngStream` to get the same
draw every time, or a live `numpy.random.Generator` to consume a shared stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from sparsebench.decorators import retry
from sparsebench.errors import DimensionError, ParameterError, RankDeficientError, ValidationError
from sparsebench.numerics import (
    RANK_TOL,
    ComplexMatrix,
    RealMatrix,
    RngStream,
    as_generator,
    singular_values,
)

EnsembleKind = Literal["gaussian", "partial-fourier", "bounded-orthogonal"]
AmplitudeModel = Literal["rademacher", "gaussian"]

ENSEMBLE_KINDS: tuple[str, ...] = ("gaussian", "partial-fourier", "bounded-orthogonal")
AMPLITUDE_MODELS: tuple[str, ...] = ("rademacher", "gaussian")
ENSEMBLE_ALIASES = {
    "gaussian": "gaussian",
    "fourier": "partial-fourier",
    "partial-fourier": "partial-fourier",
    "ortho": "bounded-orthogonal",
    "bounded-orthogonal": "bounded-orthogonal",
}

ORTHOGONALITY_TOL = 1e-8
ENTRY_BOUND_WARNING = 10.0
MIN_AMPLITUDE = 1e-12


def normalize_kind(kind: str) -> str:
    """Map CLI aliases (``fourier``, ``ortho``) to canonical ensemble names."""
    try:
        return ENSEMBLE_ALIASES[kind.lower()]
    except KeyError:
        raise ParameterError(
            "ensemble", kind, f"must be one of {sorted(ENSEMBLE_ALIASES)}"
        ) from None


def _check_sizes(k: int, n: int) -> None:
    if n < 1:
        raise ParameterError("n", n, "must be >= 1")
    if not 1 <= k <= n:
        raise ParameterError("k", k, f"must satisfy 1 <= k <= n={n}")


def entry_bound(U: NDArray) -> float:
    """The constant ``K`` with ``max |U_ij| = K / sqrt(n)``."""
    U = np.asarray(U)
    return float(np.max(np.abs(U)) * math.sqrt(U.shape[1]))


def validate_orthogonal(U: NDArray, tol: float = ORTHOGONALITY_TOL) -> float:
    """
    Check that ``U`` is square with ``U^H U = I`` within ``tol`` (max-norm).

    Returns:
        float: The entry bound ``K`` of ``U``.

    Raises:
        DimensionError: if ``U`` is not square.
        ValidationError: if ``U`` is not orthogonal (unitary).
    """
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(U.shape, "a square orthogonal matrix")
    deviation = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if deviation > tol:
        raise ValidationError("Matrix is not orthogonal", deviation)
    K = entry_bound(U)
    if K > ENTRY_BOUND_WARNING:
        logger.bind(K=round(K, 3)).warning("Orthogonal matrix has large entries")
    return K


@dataclass
class EnsembleSpec:
    """
    Description of a measurement ensemble.

    Args:
        kind (str): ``gaussian``, ``partial-fourier`` or ``bounded-orthogonal``.
        n (int): Ambient dimension.
        k (int): Number of measurements.
        seed (int): Experiment seed.
        source (NDArray, optional): The orthogonal matrix ``U`` for ``bounded-orthogonal``.
    """

    kind: str
    n: int
    k: int
    seed: int = 0
    source: NDArray | None = field(default=None, repr=False)
    K: float | None = None

    def __post_init__(self):
        self.kind = normalize_kind(self.kind)
        _check_sizes(self.k, self.n)
        if self.kind == "bounded-orthogonal":
            if self.source is None:
                raise ParameterError("source", None, "bounded-orthogonal needs a matrix U")
            self.source = np.asarray(self.source)
            if self.source.shape != (self.n, self.n):
                raise DimensionError(self.source.shape, f"({self.n}, {self.n})")
            self.K = validate_orthogonal(self.source)
        elif self.kind == "partial-fourier":
            self.K = 1.0


@dataclass(frozen=True)
class SparseSignalSpec:
    n: int
    r: int
    amplitude: str = "rademacher"
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n", self.n, "must be >= 1")
        if not 1 <= self.r <= self.n:
            raise ParameterError("r", self.r, f"must satisfy 1 <= r <= n={self.n}")
        if self.amplitude not in AMPLITUDE_MODELS:
            raise ParameterError("amplitude", self.amplitude, f"must be one of {AMPLITUDE_MODELS}")


@dataclass(frozen=True)
class Signal:
    """A real signal together with its sparsity metadata."""

    values: NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values))

    @property
    def sparsity(self) -> int:
        return len(self.support)

    @classmethod
    def from_support(cls, n: int, support, amplitudes) -> "Signal":
        values = np.zeros(n)
        values[list(support)] = amplitudes
        return cls(values)


@dataclass(frozen=True)
class MeasurementMatrix:
    """A sampled operator with the provenance needed to reproduce it."""

    matrix: NDArray
    kind: str
    seed: int
    stream_id: int
    omega: tuple[int, ...] | None = None
    K: float | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix)

    def real_system(self) -> RealMatrix:
        """The real matrix fed to the LP (complex rows are split by `realify`)."""
        return realify(self.matrix) if self.is_complex else self.matrix


def dft_matrix(n: int) -> ComplexMatrix:
    """The unitary DFT matrix with entries ``exp(-2 pi i w t / n) / sqrt(n)``."""
    idx = np.arange(n)
    # reduce w*t modulo n first so large n keep full phase accuracy
    phase = np.outer(idx, idx) % n
    return np.exp(-2j * np.pi * phase / n) / math.sqrt(n)


def scaled_dft_vectors(n: int) -> ComplexMatrix:
    """Rows ``x_i = sqrt(n) * y_i`` of the DFT matrix, a decomposition of the identity."""
    return math.sqrt(n) * dft_matrix(n)


def _sample_omega(n: int, k: int, gen: np.random.Generator) -> NDArray[np.intp]:
    return np.sort(gen.choice(n, size=k, replace=False))


def sample_gaussian(k: int, n: int, rng: RngStream | np.random.Generator) -> RealMatrix:
    """
    ``k x n`` matrix of i.i.d. standard normal entries.

    Raises:
        ParameterError: if ``k > n`` or a size is below 1.
    """
    _check_sizes(k, n)
    return as_generator(rng).standard_normal((k, n))


@retry(attempts=5, exceptions=(RankDeficientError,))
def sample_gaussian_full_rank(k: int, n: int, gen: np.random.Generator) -> RealMatrix:
    """
    Gaussian matrix with full row rank, redrawn from the live generator ``gen`` when a draw is
    rank deficient.
    """
    matrix = sample_gaussian(k, n, gen)
    s = singular_values(matrix)
    if s[-1] <= RANK_TOL * s[0]:
        raise RankDeficientError(float(s[-1]), float(s[0]), RANK_TOL)
    return matrix


def sample_partial_fourier(
    k: int, n: int, rng: RngStream | np.random.Generator
) -> tuple[ComplexMatrix, NDArray[np.intp]]:
    """
    ``k`` uniformly chosen distinct rows of the unitary DFT matrix.

    Returns:
        tuple[ComplexMatrix, NDArray]: the rows and their sorted indices ``omega``.
    """
    _check_sizes(k, n)
    omega = _sample_omega(n, k, as_generator(rng))
    idx = np.arange(n)
    phase = np.outer(omega, idx) % n
    return np.exp(-2j * np.pi * phase / n) / math.sqrt(n), omega


def sample_rows(
    U: NDArray, k: int, rng: RngStream | np.random.Generator
) -> tuple[NDArray, NDArray[np.intp]]:
    """
    ``k`` uniformly chosen distinct rows of an orthogonal matrix ``U``.

    Uses the same row draw as `sample_partial_fourier`, so with ``U = dft_matrix(n)``
    and an equal stream both return identical matrices.

    Raises:
        ValidationError: if ``U`` is not orthogonal.
    """
    U = np.asarray(U)
    validate_orthogonal(U)
    _check_sizes(k, U.shape[0])
    omega = _sample_omega(U.shape[0], k, as_generator(rng))
    return U[omega].copy(), omega


def realify(M: NDArray) -> RealMatrix:
    """
    Stack real and imaginary parts: rows ``0..k-1`` are ``Re(M)``, rows ``k..2k-1`` ``Im(M)``.

    For a real vector ``f``, ``realify(M) @ f`` equals ``(Re(M f), Im(M f))``.
    """
    M = np.asarray(M)
    return np.vstack([M.real, M.imag]).astype(float)


def realify_vector(y: NDArray) -> NDArray[np.float64]:
    """The right-hand side matching `realify`: ``(Re y, Im y)``."""
    y = np.asarray(y)
    return np.concatenate([y.real, y.imag]).astype(float)


def sample_measurements(
    spec: EnsembleSpec, rng: RngStream | np.random.Generator | None = None
) -> MeasurementMatrix:
    """Sample the ensemble described by ``spec`` and record its provenance."""
    stream = rng if rng is not None else RngStream(spec.seed)
    stream_id = stream.stream_id if isinstance(stream, RngStream) else -1
    omega = None
    if spec.kind == "gaussian":
        matrix = sample_gaussian(spec.k, spec.n, stream)
    elif spec.kind == "partial-fourier":
        matrix, omega = sample_partial_fourier(spec.k, spec.n, stream)
    else:
        matrix, omega = sample_rows(spec.source, spec.k, stream)  # type: ignore
    return MeasurementMatrix(
        matrix=matrix,
        kind=spec.kind,
        seed=spec.seed,
        stream_id=stream_id,
        omega=None if omega is None else tuple(int(i) for i in omega),
        K=spec.K,
    )


def _amplitudes(model: str, r: int, gen: np.random.Generator) -> NDArray[np.float64]:
    if model == "rademacher":
        return gen.choice(np.array([-1.0, 1.0]), size=r)
    amplitudes = gen.standard_normal(r)
    small = np.abs(amplitudes) < MIN_AMPLITUDE
    while np.any(small):
        amplitudes[small] = gen.standard_normal(int(small.sum()))
        small = np.abs(amplitudes) < MIN_AMPLITUDE
    return amplitudes


def sample_sparse_signal(
    spec: SparseSignalSpec, rng: RngStream | np.random.Generator | None = None
) -> Signal:
    """
    Draw an ``r``-sparse signal with a uniformly random support.

    Amplitudes are ``+-1`` (``rademacher``) or standard normal conditioned on
    ``|a| >= 1e-12`` (``gaussian``).
    """
    gen = as_generator(rng if rng is not None else RngStream(spec.seed))
    support = np.sort(gen.choice(spec.n, size=spec.r, replace=False))
    return Signal.from_support(spec.n, support, _amplitudes(spec.amplitude, spec.r, gen))


__all__ = [
    "EnsembleKind",
    "AmplitudeModel",
    "ENSEMBLE_KINDS",
    "AMPLITUDE_MODELS",
    "normalize_kind",
    "entry_bound",
    "validate_orthogonal",
    "EnsembleSpec",
    "SparseSignalSpec",
    "Signal",
    "MeasurementMatrix",
    "dft_matrix",
    "scaled_dft_vectors",
    "sample_gaussian",
    "sample_gaussian_full_rank",
    "sample_partial_fourier",
    "sample_rows",
    "realify",
    "realify_vector",
    "sample_measurements",
    "sample_sparse_signal",
]
