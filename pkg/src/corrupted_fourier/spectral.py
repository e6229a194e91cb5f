"""Unitary DFT, the column-normalized partial Fourier operator and helpers.

Vectors are plain complex ``numpy`` arrays and index sets are sorted integer
arrays. The DFT kernel is ``F[j, k] = n**-0.5 * exp(-2j*pi*j*k/n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPerfectSquare, NotPrime, ZeroVector

DEFAULT_SUPPORT_RTOL = 1e-8


def as_vector(v) -> np.ndarray:
    """Return ``v`` as a 1-D complex128 array."""
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def index_set(indices, ambient: int) -> np.ndarray:
    """Validate and normalize an index set: sorted, distinct, inside ``[0, ambient)``."""
    idx = np.asarray(indices, dtype=np.intp).ravel()
    idx = np.sort(idx)
    if idx.size and (idx[0] < 0 or idx[-1] >= ambient):
        raise DimensionMismatch(f"indices out of range [0, {ambient})")
    if idx.size > 1 and np.any(np.diff(idx) == 0):
        raise DimensionMismatch("index set has repeated entries")
    return idx


def _positions(indices, ambient: int) -> np.ndarray:
    # like index_set but keeps the caller's ordering
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= ambient):
        raise DimensionMismatch(f"indices out of range [0, {ambient})")
    if np.unique(idx).size != idx.size:
        raise DimensionMismatch("index set has repeated entries")
    return idx


def complement(indices, ambient: int) -> np.ndarray:
    mask = np.ones(ambient, dtype=bool)
    mask[np.asarray(indices, dtype=np.intp)] = False
    return np.flatnonzero(mask)


def is_prime(n: int) -> bool:
    """Deterministic trial division."""
    n = int(n)
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime ``>= n``."""
    p = max(2, int(n))
    while not is_prime(p):
        p += 1
    return p


def unitary_dft(v) -> np.ndarray:
    # pocketfft handles every length, prime lengths included
    return np.fft.fft(as_vector(v), norm="ortho")


def unitary_idft(v) -> np.ndarray:
    return np.fft.ifft(as_vector(v), norm="ortho")


def dirac_comb(n: int) -> np.ndarray:
    """Ones at the multiples of ``sqrt(n)``, zeros elsewhere.

    Indices are 0-based, so the support is ``{0, r, 2r, ..., n - r}`` with
    ``r = sqrt(n)``; this vector is a fixed point of :func:`unitary_dft`.
    """
    r = math.isqrt(int(n))
    if n < 1 or r * r != n:
        raise NotPerfectSquare(f"{n} is not a perfect square")
    d = np.zeros(n, dtype=np.complex128)
    d[::r] = 1.0
    return d


def numerical_support(v, tau: float | None = None) -> np.ndarray:
    """Indices with ``|v[i]| > tau``.

    With ``tau=None`` the threshold is ``1e-8 * max|v|``.
    """
    a = np.abs(as_vector(v))
    if tau is None:
        tau = DEFAULT_SUPPORT_RTOL * (a.max() if a.size else 0.0)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return np.flatnonzero(a > tau)


def uncertainty_check(v, rtol: float = DEFAULT_SUPPORT_RTOL):
    """Count nonzeros of ``v`` and of its DFT and test ``count + count_hat >= n + 1``.

    Each support is measured relative to that vector's own max modulus. Only
    meaningful for prime ``n``; composite lengths raise :class:`NotPrime`.
    """
    v = as_vector(v)
    n = v.size
    if not is_prime(n):
        raise NotPrime(f"length {n} is not prime")
    scale = np.abs(v).max()
    if scale == 0:
        raise ZeroVector("uncertainty check needs a nonzero vector")
    vhat = unitary_dft(v)
    count_time = numerical_support(v, rtol * scale).size
    count_freq = numerical_support(vhat, rtol * np.abs(vhat).max()).size
    return count_time, count_freq, count_time + count_freq >= n + 1


@dataclass(frozen=True)
class PartialFourierOperator:
    """The map ``x -> sqrt(n/m) * (F x)[rows]``.

    Every column of the induced ``m x n`` matrix has unit norm and
    ``A A^* = (n/m) I_m``.
    """

    n: int
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = index_set(self.rows, self.n)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def full(cls, n: int) -> "PartialFourierOperator":
        return cls(n, np.arange(n))

    @property
    def m(self) -> int:
        return int(self.rows.size)

    @property
    def scale(self) -> float:
        return math.sqrt(self.n / self.m) if self.m else 0.0

    @property
    def shape(self):
        return (self.m, self.n)

    def apply(self, x) -> np.ndarray:
        x = as_vector(x)
        if x.size != self.n:
            raise DimensionMismatch(f"expected length {self.n}, got {x.size}")
        return self.scale * np.fft.fft(x, norm="ortho")[self.rows]

    def adjoint(self, y) -> np.ndarray:
        y = as_vector(y)
        if y.size != self.m:
            raise DimensionMismatch(f"expected length {self.m}, got {y.size}")
        full = np.zeros(self.n, dtype=np.complex128)
        full[self.rows] = y
        return self.scale * np.fft.ifft(full, norm="ortho")

    def dense(self) -> np.ndarray:
        return dense_submatrix(self, np.arange(self.m), np.arange(self.n))


def apply(op: PartialFourierOperator, x) -> np.ndarray:
    return op.apply(x)


def adjoint(op: PartialFourierOperator, y) -> np.ndarray:
    return op.adjoint(y)


def dense_submatrix(op: PartialFourierOperator, row_set, col_set,
                    conjugate_transpose: bool = False) -> np.ndarray:
    """Explicit block of the operator matrix.

    ``row_set`` holds positions into ``op.rows`` (so values in ``[0, m)``) and
    ``col_set`` holds signal indices in ``[0, n)``; both keep the order given. With
    ``conjugate_transpose=True`` the block of ``A^*`` with rows ``col_set`` and
    columns ``row_set`` is returned instead.
    """
    r = _positions(row_set, op.m)
    c = _positions(col_set, op.n)
    freqs = op.rows[r]
    # exact integer phase reduction keeps entries accurate for large n
    phase = np.outer(freqs, c) % op.n
    block = np.exp(-2j * np.pi * phase / op.n).reshape(r.size, c.size)
    if op.m:
        block /= math.sqrt(op.m)
    return block.conj().T if conjugate_transpose else block
