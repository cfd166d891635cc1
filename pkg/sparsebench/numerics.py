"""
Dense linear algebra and reproducible random streams shared by every other module.

Matrices are plain numpy arrays: ``float64`` for real and ``complex128`` for complex
operators. Hermitian transposes are always ``M.conj().T``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg
from loguru import logger
from numpy.typing import NDArray

from sparsebench.errors import DimensionError, NumericalError, RankDeficientError

RealMatrix = NDArray[np.float64]
ComplexMatrix = NDArray[np.complex128]
RealVector = NDArray[np.float64]

HERMITIAN_TOL = 1e-10
RANK_TOL = 1e-10


@dataclass(frozen=True)
class RngStream:
    """
    A seeded, counter-based random stream.

    Two streams with equal ``(seed, stream_id)`` produce bitwise-identical draws, no matter
    in which order or in which process they are consumed.

    Args:
        seed (int): Experiment seed.
        stream_id (int, optional): Per-task stream identifier, see `derive_stream_id`.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of the stream."""
        sequence = np.random.SeedSequence(
            entropy=self.seed & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(self.stream_id & 0xFFFFFFFFFFFFFFFF,),
        )
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, *parts) -> "RngStream":
        """Derive an independent stream for a sub-task."""
        return RngStream(self.seed, derive_stream_id(self.stream_id, *parts))


def derive_stream_id(*parts) -> int:
    """
    Hash arbitrary parts (trial index, task tag, cell key, ...) to a 64-bit stream id.

    Example:
        >>> derive_stream_id(3, "signal") == derive_stream_id(3, "signal")
        True
    """
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def as_generator(rng: RngStream | np.random.Generator | int) -> np.random.Generator:
    """Accept a stream, a live generator or a bare seed and return a generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(type(rng))


def extreme_eigenvalues(G: NDArray) -> tuple[float, float]:
    """
    Smallest and largest eigenvalue of a symmetric or Hermitian matrix.

    The input is symmetrized as ``(G + G^H) / 2`` before solving.

    Args:
        G (NDArray): Square matrix, Hermitian within 1e-10.

    Returns:
        tuple[float, float]: ``(lambda_min, lambda_max)``

    Raises:
        DimensionError: if ``G`` is not square.
        NumericalError: if the eigensolver does not converge.
    """
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError(G.shape, "a square matrix")
    if G.shape[0] == 0:
        raise DimensionError(G.shape, "a non-empty matrix")
    scale = max(1.0, float(np.max(np.abs(G))))
    if hermitian_deviation(G) > HERMITIAN_TOL * scale:
        logger.warning("Input is not Hermitian within tolerance, symmetrizing")
    H = (G + G.conj().T) / 2
    try:
        w = scipy.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Eigenvalue iteration did not converge: {e}") from e
    return float(w[0]), float(w[-1])


def batched_extreme_eigenvalues(stack: NDArray) -> tuple[NDArray, NDArray]:
    """
    Extreme eigenvalues of a stack of Hermitian matrices with shape ``(batch, m, m)``.

    Returns:
        tuple[NDArray, NDArray]: per-matrix minima and maxima.
    """
    stack = np.asarray(stack)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise DimensionError(stack.shape, "a stack of square matrices (batch, m, m)")
    H = (stack + np.conj(np.swapaxes(stack, 1, 2))) / 2
    try:
        w = np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Eigenvalue iteration did not converge: {e}") from e
    return w[:, 0], w[:, -1]


def kernel_basis(M: NDArray, rank_tol: float = RANK_TOL) -> RealMatrix:
    """
    Orthonormal basis of the null space of a full row rank ``k x n`` matrix, ``k < n``.

    Args:
        M (NDArray): The matrix.
        rank_tol (float, optional): Relative singular value threshold for full row rank.

    Returns:
        RealMatrix: ``n x (n - k)`` matrix with orthonormal columns spanning ``Ker(M)``.

    Raises:
        DimensionError: if ``M`` is not 2-D.
        RankDeficientError: if the smallest singular value is below ``rank_tol`` times the largest.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError(M.shape, "a 2-D matrix")
    k, n = M.shape
    if k == 0:
        return np.eye(n)
    try:
        _, s, Vh = scipy.linalg.svd(M, full_matrices=True)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD did not converge: {e}") from e
    sigma_max = float(s[0]) if s.size else 0.0
    sigma_min = float(s[min(k, n) - 1]) if s.size else 0.0
    if k > n or sigma_min <= rank_tol * sigma_max:
        raise RankDeficientError(sigma_min, sigma_max, rank_tol)
    B = Vh[k:].conj().T
    if np.iscomplexobj(B) and not np.iscomplexobj(M):
        B = B.real
    return B


def sorted_abs_desc(x: NDArray) -> tuple[RealVector, NDArray[np.intp]]:
    """
    Magnitudes of ``x`` in non-increasing order.

    Ties are broken by the lower original index first.

    Returns:
        tuple[RealVector, NDArray]: ``(values, permutation)`` with
        ``values[j] == abs(x[permutation[j]])``.

    Example:
        >>> sorted_abs_desc(np.array([0.0, -3.0, 1.0]))
        (array([3., 1., 0.]), array([1, 2, 0]))
    """
    a = np.abs(np.asarray(x, dtype=float))
    permutation = np.argsort(-a, kind="stable")
    return a[permutation], permutation


def singular_values(A: NDArray) -> RealVector:
    """Singular values of ``A`` in non-increasing order."""
    return scipy.linalg.svdvals(np.asarray(A))


def compensated_mean(values: Iterable[float]) -> float:
    """Mean computed with ``math.fsum`` so summation order does not matter."""
    values = list(values)
    if not values:
        return math.nan
    return math.fsum(values) / len(values)


def hermitian_deviation(G: NDArray) -> float:
    """Largest entrywise deviation of ``G`` from its Hermitian transpose."""
    G = np.asarray(G)
    return float(np.max(np.abs(G - G.conj().T))) if G.size else 0.0


__all__ = [
    "RealMatrix",
    "ComplexMatrix",
    "RealVector",
    "RngStream",
    "derive_stream_id",
    "as_generator",
    "extreme_eigenvalues",
    "batched_extreme_eigenvalues",
    "kernel_basis",
    "sorted_abs_desc",
    "singular_values",
    "compensated_mean",
    "hermitian_deviation",
]
