"""Diagonal-loading precision estimator ``(C_X + lam I)^{-1}`` and its error estimate.

The estimate of ``(1/d) ||R_X(lam) - Sigma^{-1}||_F^2`` is

    (1/d) tr R(lam)^2
    - 2 (1 - d/n) tr R(0) / (lam d) * 1[lambda_min(C_X^-) >= eta]
    + 2 tr R(lam) / (lam b(lam) d)
    + (1/d) tr Sigma^{-2}

with ``b(lam) = 1 / (1 - d/n + (lam/n) tr R(lam))``. The last term does not
depend on ``lam`` and is only added when the population covariance is known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateDenominator, InvalidRegime, NoConvergence, SingularShift
from .linalg import (
    SINGULAR_TOL,
    SymEig,
    as_samples,
    as_symmetric,
    leave_one_out_covariance,
    min_eigenvalue,
)

__all__ = [
    "FixedPointResult",
    "ShrinkageErrorParts",
    "ShrinkageModel",
    "b_hat",
    "bisect_b_star",
    "default_eta",
    "det_equiv_shrinkage",
    "error_estimate_shrinkage",
    "f_lambda",
    "indicator_eta",
    "inverse_sq_constant",
    "shrinkage_precision",
    "solve_b_star",
    "suggest_eta",
]

DAMPING = 0.5


@dataclass(frozen=True)
class ShrinkageErrorParts:
    tr_r2_term: float
    loo_term: float
    cross_term: float
    constant_term: float | None
    b_hat: float
    indicator: bool
    singular_flag: bool = False

    @property
    def total(self) -> float:
        total = self.tr_r2_term + self.loo_term + self.cross_term
        if self.constant_term is not None:
            total += self.constant_term
        return total


@dataclass(frozen=True)
class FixedPointResult:
    value: float
    iterations: int
    residual: float
    method: str = "iteration"


def inverse_sq_constant(sigma: ArrayLike) -> float:
    """``(1/d) tr(Sigma^{-2})``, the additive constant of the error."""
    eig = SymEig.of(sigma)
    if eig.min <= SINGULAR_TOL:
        raise SingularShift("sigma must be strictly positive definite")
    return float(np.sum(eig.eigenvalues ** -2.0)) / eig.dim


def indicator_eta(x: ArrayLike, eta: float) -> bool:
    """True iff the leave-first-out covariance has smallest eigenvalue >= eta."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    x = as_samples(x)
    d, n = x.shape
    if d > n - 1:
        return False
    return min_eigenvalue(leave_one_out_covariance(x, 0)) >= eta


def suggest_eta(lmin_sigma: float, n: int, d: int, safety: float = 0.5) -> float:
    """Admissible conditioning level ``safety * lmin * (sqrt((n-1)/n) - sqrt(d/n))^2``."""
    if not lmin_sigma > 0:
        raise ValueError("lmin_sigma must be positive")
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    if d >= n:
        raise InvalidRegime(f"no admissible eta when d >= n (d={d}, n={n})")
    gap = math.sqrt((n - 1) / n) - math.sqrt(d / n)
    if gap <= 0:
        raise InvalidRegime(f"admissible eta vanishes at d = n - 1 (d={d}, n={n})")
    return safety * lmin_sigma * gap * gap


def default_eta(x: ArrayLike, safety: float = 0.5) -> float:
    """Data-driven eta: the smaller of the plug-in ``suggest_eta`` and ``lambda_min(C_X^-)``.

    The indicator therefore holds on the observed sample whenever it can.
    """
    x = as_samples(x)
    d, n = x.shape
    lmin_c = min_eigenvalue(x @ x.T / n)
    eta = suggest_eta(max(lmin_c, SINGULAR_TOL), n, d, safety)
    lmin_loo = min_eigenvalue(leave_one_out_covariance(x, 0))
    if lmin_loo > 0:
        eta = min(eta, lmin_loo)
    return eta


class ShrinkageModel:
    """Per-dataset quantities shared by every ``lam`` in a sweep.

    One eigendecomposition of ``C_X`` serves all grid points.
    """

    def __init__(self, x: ArrayLike, eta: float | None = None):
        self.x = as_samples(x)
        self.d, self.n = self.x.shape
        self.eig = SymEig.of_samples(self.x)
        if eta is None:
            try:
                eta = default_eta(self.x)
            except InvalidRegime:
                eta = math.inf
        self.eta = eta
        self.indicator = math.isfinite(eta) and indicator_eta(self.x, eta)
        self.singular_flag = False
        self.trace_r0 = 0.0
        if self.indicator:
            try:
                self.trace_r0 = self.eig.trace_resolvent(0.0)
            except SingularShift:
                self.singular_flag = True

    def precision(self, lam: float) -> NDArray[np.float64]:
        return self.eig.resolvent(lam)

    def b_hat(self, lam: float) -> float:
        denom = 1.0 - self.d / self.n + (lam / self.n) * self.eig.trace_resolvent(lam)
        if denom <= SINGULAR_TOL:
            raise DegenerateDenominator(f"b_hat denominator is {denom:.3e}")
        return 1.0 / denom

    def error_parts(self, lam: float, constant: float | None = None) -> ShrinkageErrorParts:
        if not lam > 0:
            raise ValueError("the error estimate needs lam > 0")
        d, n = self.d, self.n
        tr_r = self.eig.trace_resolvent(lam)
        tr_r2 = self.eig.trace_resolvent(lam, power=2)
        b = self.b_hat(lam)
        loo = 0.0
        if self.indicator and not self.singular_flag:
            loo = -2.0 * (1.0 - d / n) * self.trace_r0 / (lam * d)
        return ShrinkageErrorParts(
            tr_r2_term=tr_r2 / d,
            loo_term=loo,
            cross_term=2.0 * tr_r / (lam * b * d),
            constant_term=constant,
            b_hat=b,
            indicator=self.indicator,
            singular_flag=self.singular_flag,
        )


def shrinkage_precision(x: ArrayLike, lam: float) -> NDArray[np.float64]:
    if lam < 0:
        raise ValueError("lam must be non-negative")
    return SymEig.of_samples(x).resolvent(lam)


def b_hat(x: ArrayLike, lam: float) -> float:
    if not lam > 0:
        raise ValueError("lam must be positive")
    return ShrinkageModel(x, eta=math.inf).b_hat(lam)


def error_estimate_shrinkage(
    x: ArrayLike,
    lam: float,
    eta: float | None = None,
    sigma: ArrayLike | None = None,
) -> ShrinkageErrorParts:
    """Data-only estimate of the quadratic error of ``(C_X + lam I)^{-1}``.

    Without ``sigma`` the result is exact up to the additive constant
    ``(1/d) tr Sigma^{-2}`` (enough for tuning ``lam``). With ``sigma`` that
    constant is included. ``eta=None`` uses :func:`default_eta`.
    """
    constant = None if sigma is None else inverse_sq_constant(sigma)
    return ShrinkageModel(x, eta).error_parts(lam, constant)


# -- deterministic equivalent -------------------------------------------------


def _eigs(sigma: ArrayLike) -> NDArray[np.float64]:
    w = np.linalg.eigvalsh(as_symmetric(sigma))
    if w[0] <= SINGULAR_TOL:
        raise SingularShift("sigma must be strictly positive definite")
    return w


def f_lambda(b: float, sigma_eigs: NDArray[np.float64], n: int, lam: float) -> float:
    """``1 + tr(Sigma (Sigma/b + lam I)^{-1}) / n`` evaluated on the spectrum of Sigma."""
    s = sigma_eigs
    return 1.0 + float(np.sum(b * s / (s + lam * b))) / n


def _f_prime(b: float, sigma_eigs: NDArray[np.float64], n: int, lam: float) -> float:
    s = sigma_eigs
    return float(np.sum(s * s / (s + lam * b) ** 2)) / n


def _polish(b: float, s: NDArray[np.float64], n: int, lam: float, steps: int = 3) -> tuple[float, float]:
    """A few Newton steps on ``f(b) - b``, kept only while the residual shrinks."""
    resid = abs(f_lambda(b, s, n, lam) - b)
    for _ in range(steps):
        slope = _f_prime(b, s, n, lam) - 1.0
        if slope >= 0 or resid == 0:
            break
        cand = max(1.0, b - (f_lambda(b, s, n, lam) - b) / slope)
        r = abs(f_lambda(cand, s, n, lam) - cand)
        if r >= resid:
            break
        b, resid = cand, r
    return b, resid


def _upper_bracket(sigma_eigs: NDArray[np.float64], n: int, lam: float) -> float:
    d = sigma_eigs.shape[0]
    hi = math.inf
    if lam > 0:
        hi = 1.0 + float(np.sum(sigma_eigs)) / (n * lam)
    if d < n:
        hi = min(hi, n / (n - d))
    return hi


def bisect_b_star(sigma: ArrayLike, n: int, lam: float, tol: float = 1e-12, max_iter: int = 400) -> FixedPointResult:
    """Fixed point of ``f_lambda`` by bisection on ``f_lambda(b) - b`` over ``[1, hi]``."""
    s = _eigs(sigma)
    return _bisect(s, n, lam, tol, max_iter)


def _bisect(s: NDArray[np.float64], n: int, lam: float, tol: float, max_iter: int) -> FixedPointResult:
    hi = _upper_bracket(s, n, lam)
    if not math.isfinite(hi):
        raise NoConvergence(f"no fixed point on [1, inf) for lam={lam}, d={s.shape[0]}, n={n}")
    lo = 1.0
    b = 0.5 * (lo + hi)
    for it in range(1, max_iter + 1):
        b = 0.5 * (lo + hi)
        g = f_lambda(b, s, n, lam) - b
        if g == 0 or hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        if g > 0:
            lo = b
        else:
            hi = b
    b, resid = _polish(b, s, n, lam)
    if resid > tol * max(1.0, b):
        raise NoConvergence(f"bisection residual {resid:.3e} exceeds tol {tol:.1e}")
    return FixedPointResult(b, it, resid, "bisection")


def solve_b_star(
    sigma: ArrayLike,
    n: int,
    lam: float,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> FixedPointResult:
    """Unique fixed point on ``[1, inf)`` of ``b -> 1 + tr(Sigma (Sigma/b + lam I)^{-1}) / n``.

    Damped iteration from ``b = 1`` until the residual is below
    ``tol * max(1, b)``, then a Newton polish; falls back to bisection if the
    iteration stalls or runs out of steps.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    s = _eigs(sigma)
    d = s.shape[0]
    if lam == 0 and d >= n:
        raise NoConvergence(f"lam = 0 requires d < n (d={d}, n={n})")
    b = 1.0
    best = math.inf
    since_best = 0
    for it in range(1, max_iter + 1):
        fb = f_lambda(b, s, n, lam)
        resid = abs(fb - b)
        if resid <= tol * max(1.0, b):
            b, resid = _polish(b, s, n, lam)
            return FixedPointResult(b, it, resid)
        if resid < best * (1 - 1e-3):
            best, since_best = resid, 0
        else:
            since_best += 1
            if since_best > 20:
                break
        b = (1 - DAMPING) * b + DAMPING * fb
    return _bisect(s, n, lam, tol, 400)


def det_equiv_shrinkage(sigma: ArrayLike, n: int, lam: float, tol: float = 1e-12) -> NDArray[np.float64]:
    """``(Sigma / b* + lam I)^{-1}``."""
    sigma = as_symmetric(sigma)
    b = solve_b_star(sigma, n, lam, tol).value
    w, v = np.linalg.eigh(sigma)
    return as_symmetric((v / (w / b + lam)) @ v.T)
