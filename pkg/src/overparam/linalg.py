"""Dense float64 linear algebra and a portable seeded random stream.

Matrices are numpy float64 arrays in C (row-major) order throughout the
package.  Activation patterns are numpy bool arrays and are only ever used
as elementwise masks, never as 0/1 float diagonals.
"""

from __future__ import annotations

import numpy as np
from numpy.random import PCG64

__all__ = [
    "PortableRng",
    "SpectralNormError",
    "frobenius_norm",
    "gaussian_matrix",
    "pattern_diff_count",
    "power_iteration",
    "spectral_norm",
]

_INV_2_53 = 2.0 ** -53

# Seed of the fixed start vector used by spectral_norm when no warm start is
# supplied.  Any fixed value works; it only has to be deterministic.
_START_SEED = 0x5EED_0001


class PortableRng:
    """Seeded random stream with a pinned, documented algorithm.

    Raw randomness is the 64-bit output sequence of PCG64 (PCG XSL-RR
    128/64), which numpy guarantees to be reproducible for a given seed.
    Derived values are defined entirely in terms of that raw stream:

    * uniforms: ``(raw >> 11) * 2**-53`` in ``[0, 1)``
    * normals: Box-Muller on consecutive raw pairs, with the first uniform
      of each pair shifted into ``(0, 1]`` so the log stays finite.

    ``normals(k)`` always consumes ``2 * ceil(k / 2)`` raw draws, so the
    stream position depends only on the sequence of calls, never on the
    sampled values.  Integer draws use rejection sampling and consume a
    value-dependent (but seed-deterministic) number of raws.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._bits = PCG64(seed)

    def raw(self, count: int) -> np.ndarray:
        """Next `count` raw uint64 outputs of the generator."""
        out = self._bits.random_raw(count)
        return np.atleast_1d(np.asarray(out, dtype=np.uint64))

    def advance(self, draws: int) -> None:
        """Skip `draws` raw outputs without generating them."""
        self._bits.advance(draws)

    def uniforms(self, count: int) -> np.ndarray:
        """`count` doubles uniform on [0, 1)."""
        return (self.raw(count) >> np.uint64(11)) * _INV_2_53

    def normals(self, count: int) -> np.ndarray:
        """`count` standard normal doubles via Box-Muller."""
        pairs = (count + 1) // 2
        raw = self.raw(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def integer_below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) via rejection on the raw stream."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = int(self.raw(1)[0])
            if r < limit:
                return r % bound

    def sample_without_replacement(self, population: int, size: int) -> np.ndarray:
        """`size` distinct indices from range(population), partial Fisher-Yates."""
        if not 0 <= size <= population:
            raise ValueError("size must be in [0, population]")
        pool = np.arange(population)
        for i in range(size):
            j = i + self.integer_below(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:size].copy()

    def permutation(self, count: int) -> np.ndarray:
        return self.sample_without_replacement(count, count)


class SpectralNormError(RuntimeError):
    """Power iteration did not converge; carries the last iterate."""

    def __init__(self, message: str, sigma: float, vector: np.ndarray,
                 residual: float, iterations: int):
        super().__init__(message)
        self.sigma = sigma
        self.vector = vector
        self.residual = residual
        self.iterations = iterations


def gaussian_matrix(rows: int, cols: int, variance: float, rng: PortableRng) -> np.ndarray:
    """(rows, cols) matrix of i.i.d. N(0, variance) entries, row-major fill order.

    A pure function of (rows, cols, variance, rng seed and position): the
    same stream state always yields the same matrix.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    if variance <= 0:
        raise ValueError("variance must be positive")
    entries = rng.normals(rows * cols) * np.sqrt(variance)
    out = entries.reshape(rows, cols)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("gaussian_matrix produced non-finite entries")
    return out


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.asarray(a, dtype=np.float64) ** 2)))


def pattern_diff_count(a: np.ndarray, b: np.ndarray) -> int:
    """Number of positions where two bit vectors differ."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"pattern length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def power_iteration(a: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000,
                    start: np.ndarray | None = None) -> tuple[float, np.ndarray, float, int]:
    """Largest singular value of `a` by power iteration on A^T A.

    Returns ``(sigma, right_vector, residual, iterations)``.  Convergence is
    declared when the Rayleigh-quotient residual ``||A^T A v - lam v|| / lam``
    drops to `tol`; since the Rayleigh quotient never overshoots the top
    eigenvalue, this bounds the relative error of ``sigma**2`` by `tol`.

    `start` replaces the default fixed seeded start vector (warm starts
    converge in a handful of iterations when `a` changes slightly between
    calls).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"need a nonempty 2-d matrix, got shape {a.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if not a.any():
        return 0.0, np.zeros(a.shape[1]), 0.0, 0

    if start is None:
        start = PortableRng(_START_SEED).normals(a.shape[1])
    v = np.asarray(start, dtype=np.float64)
    if v.shape != (a.shape[1],):
        raise ValueError("start vector has wrong length")
    v = v / np.linalg.norm(v)

    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        u = a.T @ (a @ v)
        lam = float(v @ u)
        if lam <= 0.0:
            # start vector fell in the null space; reseed once
            v = PortableRng(_START_SEED + it).normals(a.shape[1])
            v /= np.linalg.norm(v)
            continue
        residual = float(np.linalg.norm(u - lam * v)) / lam
        v = u / np.linalg.norm(u)
        if residual <= tol:
            return float(np.sqrt(lam)), v, residual, it
    raise SpectralNormError(
        f"power iteration did not reach tol={tol:g} in {max_iter} iterations "
        f"(last residual {residual:g})",
        sigma=float(np.sqrt(max(lam, 0.0))), vector=v,
        residual=residual, iterations=max_iter)


def spectral_norm(a: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value of `a`; exact 0 for the zero matrix."""
    sigma, _, _, _ = power_iteration(a, tol=tol, max_iter=max_iter)
    return sigma
