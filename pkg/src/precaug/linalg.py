"""Dense symmetric linear algebra shared by every estimator.

Samples are stored as columns: a data matrix ``x`` has shape ``(d, n)``.
Symmetric matrices are plain ``float64`` arrays; :class:`SymEig` caches an
eigendecomposition so that sweeps over the shift ``lam`` cost ``O(d)`` per
trace instead of a fresh factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, SingularShift

__all__ = [
    "PSD_RTOL",
    "SINGULAR_TOL",
    "SymEig",
    "as_samples",
    "as_symmetric",
    "frobenius_sq_distance",
    "leave_one_out_covariance",
    "min_eigenvalue",
    "resolvent",
    "sample_covariance",
    "sqrtm_psd",
]

PSD_RTOL = 1e-10
SINGULAR_TOL = 1e-12

Array = NDArray[np.float64]


def as_samples(x: ArrayLike, *, allow_empty: bool = False) -> Array:
    """Validate a ``(d, n)`` sample matrix and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("sample matrix must be two-dimensional (d, n)")
    d, n = arr.shape
    if d < 1 or (n < 1 and not allow_empty):
        raise ValueError(f"sample matrix needs d >= 1 and n >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample matrix contains non-finite entries")
    return arr


def as_symmetric(a: ArrayLike) -> Array:
    arr = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
    return 0.5 * (arr + arr.T)


def sample_covariance(x: ArrayLike) -> Array:
    """Uncentred sample covariance ``x @ x.T / n``."""
    x = as_samples(x)
    return as_symmetric(x @ x.T / x.shape[1])


def leave_one_out_covariance(x: ArrayLike, j: int = 0) -> Array:
    """Covariance of ``x`` with column ``j`` zeroed, still normalised by ``n``."""
    x = as_samples(x)
    n = x.shape[1]
    if not -n <= j < n:
        raise IndexError(f"column index {j} out of range for n={n}")
    x_minus = x.copy()
    x_minus[:, j] = 0.0
    return as_symmetric(x_minus @ x_minus.T / n)


def min_eigenvalue(a: ArrayLike) -> float:
    return float(np.linalg.eigvalsh(as_symmetric(a))[0])


def frobenius_sq_distance(a: ArrayLike, b: ArrayLike) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    diff = (a - b).ravel()
    # numpy reductions are pairwise
    return float(np.sum(diff * diff))


def _shift_matrix(d: int, shift: float | ArrayLike) -> Array:
    if np.ndim(shift) == 0:
        return float(shift) * np.eye(d)
    s = as_symmetric(shift)
    if s.shape != (d, d):
        raise DimensionMismatch(f"shift has shape {s.shape}, expected {(d, d)}")
    return s


def resolvent(c: ArrayLike, shift: float | ArrayLike = 0.0) -> Array:
    """``(c + shift)^{-1}`` for symmetric ``c`` and a scalar or matrix shift.

    Raises :class:`SingularShift` when the smallest eigenvalue of ``c + shift``
    is at most ``SINGULAR_TOL``.
    """
    c = as_symmetric(c)
    a = c + _shift_matrix(c.shape[0], shift)
    w, v = np.linalg.eigh(a)
    if w[0] <= SINGULAR_TOL:
        raise SingularShift(f"smallest eigenvalue of C + shift is {w[0]:.3e}")
    return as_symmetric((v / w) @ v.T)


def sqrtm_psd(a: ArrayLike) -> Array:
    """Symmetric square root via eigendecomposition (negative round-off clipped)."""
    w, v = np.linalg.eigh(as_symmetric(a))
    return as_symmetric((v * np.sqrt(np.clip(w, 0.0, None))) @ v.T)


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""

    eigenvalues: Array
    eigenvectors: Array

    @classmethod
    def of(cls, a: ArrayLike) -> SymEig:
        w, v = np.linalg.eigh(as_symmetric(a))
        w.setflags(write=False)
        v.setflags(write=False)
        return cls(w, v)

    @classmethod
    def of_samples(cls, x: ArrayLike) -> SymEig:
        return cls.of(sample_covariance(x))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def matrix(self) -> Array:
        v = self.eigenvectors
        return as_symmetric((v * self.eigenvalues) @ v.T)

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])

    def _shifted(self, lam: float) -> Array:
        w = self.eigenvalues + lam
        if w[0] <= SINGULAR_TOL:
            raise SingularShift(f"smallest eigenvalue of C + lam*I is {w[0]:.3e} (lam={lam})")
        return w

    def resolvent(self, lam: float) -> Array:
        w = self._shifted(lam)
        v = self.eigenvectors
        return as_symmetric((v / w) @ v.T)

    def trace_resolvent(self, lam: float, power: int = 1) -> float:
        """``tr((A + lam I)^{-power})``."""
        w = self._shifted(lam)
        return float(np.sum(w ** (-float(power))))

    def is_psd(self) -> bool:
        scale = max(abs(self.max), abs(self.min), 1e-300)
        return self.min >= -PSD_RTOL * scale
