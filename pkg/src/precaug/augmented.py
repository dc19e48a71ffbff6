"""Precision estimation on data enriched with ``m`` artificial columns.

``R_Aug(lam) = ((XX^T + GG^T) / (n + m) + lam I)^{-1}`` and its error estimate

    (1/d) tr R_Aug^2 - 2 (phi1 - phi2) [+ (1/d) tr Sigma^{-2}]

where ``phi1``/``phi2`` involve two Monte Carlo dilation factors ``a_x``, ``a_g``
(conditional expectations over fresh draws of ``G`` given ``X``). The
population-level counterpart, :func:`solve_augmented_det_equiv`, solves the
coupled fixed point for ``(a_x*, a_g*)`` given ``Sigma`` and the mean
``Lambda_G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .augmentation import DaScheme, MomentDecomposition, sample_augmented
from .errors import InvalidRegime, NoConvergence, SingularM, SingularShift
from .linalg import SINGULAR_TOL, as_samples, as_symmetric, resolvent
from .parallel import pmap
from .rng import RngStream, as_stream
from .shrinkage import default_eta, indicator_eta, inverse_sq_constant, shrinkage_precision

__all__ = [
    "AugmentedDetEquiv",
    "AugmentedErrorParts",
    "DilationFactors",
    "alpha_to_m",
    "augmented_covariance",
    "augmented_precision",
    "dilation_factors",
    "error_estimate_augmented",
    "phi_functionals",
    "solve_augmented_det_equiv",
]

Array = NDArray[np.float64]
LooMode = Literal["first", "all"]

# substream keys under the caller's stream
TR_STREAM = 0
DILATION_STREAM = 1


def alpha_to_m(alpha: float, n: int) -> int:
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    return int(round(alpha * n / (1 - alpha)))


def _tr(a: Array, b: Array) -> float:
    """``tr(a @ b)`` for symmetric ``a``."""
    return float(np.sum(a * b))


def augmented_covariance(x: ArrayLike, g: ArrayLike) -> Array:
    x = as_samples(x)
    g = as_samples(g, allow_empty=True)
    if g.shape[0] != x.shape[0]:
        raise ValueError(f"X has d={x.shape[0]} but G has d={g.shape[0]}")
    total = x.shape[1] + g.shape[1]
    return as_symmetric((x @ x.T + g @ g.T) / total)


def augmented_precision(x: ArrayLike, g: ArrayLike, lam: float) -> Array:
    if lam < 0:
        raise ValueError("lam must be non-negative")
    g = as_samples(g, allow_empty=True)
    if g.shape[1] == 0:
        # same code path as the plain estimator, so m = 0 agrees bit for bit
        return shrinkage_precision(x, lam)
    return resolvent(augmented_covariance(x, g), lam)


@dataclass(frozen=True)
class DilationFactors:
    a_x: float
    a_g: float
    mc_replicates: int
    stderr_a_x: float
    stderr_a_g: float
    dropped: int = 0


@dataclass(frozen=True)
class AugmentedErrorParts:
    tr_r2_term: float
    phi1: float
    phi2: float
    constant_term: float | None
    dilation: DilationFactors
    indicator: bool
    singular_flag: bool = False

    @property
    def total(self) -> float:
        total = self.tr_r2_term - 2.0 * (self.phi1 - self.phi2)
        if self.constant_term is not None:
            total += self.constant_term
        return total


def _x_weight(beta: float, alpha: float, a_g: float) -> float:
    """Coefficient ``1 - (1 - beta/a_g) alpha`` in front of the data block."""
    return 1.0 - (1.0 - beta / a_g) * alpha


def _replicate(
    x: Array,
    sx: Array,
    q_mat: Array,
    scheme: DaScheme,
    m: int,
    lam: float,
    stream: RngStream,
    loo: LooMode,
) -> tuple[float, float] | None:
    n = x.shape[1]
    total = n + m
    g = sample_augmented(scheme, x, m, stream)
    s_aug = sx + g @ g.T
    try:
        r_full = resolvent(s_aug / total, lam)
        t_g = _tr(q_mat, r_full)
        if loo == "all":
            # exact leave-i-out quadratic forms from one resolvent (Sherman-Morrison)
            q = np.einsum("ij,ij->j", x, r_full @ x)
            qf = float(np.mean(q / (1.0 - q / total)))
        else:
            x1 = x[:, 0]
            r_minus = resolvent((s_aug - np.outer(x1, x1)) / total, lam)
            qf = float(x1 @ r_minus @ x1)
    except SingularShift:
        return None
    return t_g, qf


def dilation_factors(
    x: ArrayLike,
    scheme: DaScheme,
    m: int,
    lam: float,
    k_mc: int = 64,
    rng: RngStream | int | None = None,
    *,
    loo: LooMode = "first",
    threads: int | None = None,
    moments: MomentDecomposition | None = None,
) -> DilationFactors:
    """Monte Carlo estimates of ``a_x(X)`` and ``a_g(X)`` over ``k_mc`` draws of ``G``.

    ``loo="first"`` uses the quadratic form of the first column against the
    resolvent with that column removed. ``loo="all"`` averages the same
    quadratic form over every column, each against its own exact
    leave-one-out resolvent.
    """
    x = as_samples(x)
    if k_mc < 1:
        raise ValueError("k_mc must be >= 1")
    d, n = x.shape
    rng = as_stream(rng)
    mom = moments if moments is not None else scheme.moments(x)
    alpha = m / (n + m)
    sx = x @ x.T
    q_mat = mom.conditional_covariance(sx / n)

    results = pmap(
        lambda k: _replicate(x, sx, q_mat, scheme, m, lam, rng.spawn(k), loo),
        range(k_mc),
        threads,
    )
    kept = [r for r in results if r is not None]
    if not kept:
        raise SingularShift("every Monte Carlo replicate hit a singular resolvent")
    t_g = np.array([r[0] for r in kept])
    qf = np.array([r[1] for r in kept])
    k = len(kept)

    def _se(v: NDArray[np.float64]) -> float:
        return float(np.std(v, ddof=1) / math.sqrt(k)) if k > 1 else math.nan

    if m > 0:
        g_scale = alpha / m
        a_g = 1.0 + g_scale * float(np.mean(t_g))
        se_g = g_scale * _se(t_g)
    else:
        a_g, se_g = 1.0, 0.0
    x_scale = _x_weight(mom.beta, alpha, a_g) / n
    a_x = 1.0 + x_scale * float(np.mean(qf))
    return DilationFactors(a_x, a_g, k, x_scale * _se(qf), se_g, k_mc - k)


def _m_matrix(lambda_g: Array, alpha: float, a_g: float, lam: float) -> Array:
    mm = alpha * lambda_g / a_g + lam * np.eye(lambda_g.shape[0])
    w = np.linalg.eigvalsh(mm)
    if w[0] <= SINGULAR_TOL:
        raise SingularM(
            "alpha * Lambda_G / a_g + lam * I is singular; lam = 0 needs a positive definite Lambda_G"
        )
    return mm


def _phis(
    x: Array,
    mom: MomentDecomposition,
    m: int,
    lam: float,
    dil: DilationFactors,
    eta: float,
) -> tuple[float, float, bool, bool]:
    d, n = x.shape
    alpha = m / (n + m)
    c_x = as_symmetric(x @ x.T / n)
    m_inv = np.linalg.inv(_m_matrix(mom.lambda_g, alpha, dil.a_g, lam))
    m_inv = as_symmetric(m_inv)

    indicator = math.isfinite(eta) and indicator_eta(x, eta)
    singular = False
    phi1 = 0.0
    if indicator:
        try:
            phi1 = (1.0 - d / n) / d * _tr(resolvent(c_x, 0.0), m_inv)
        except SingularShift:
            singular = True

    shift = (1.0 - alpha) * c_x + alpha * (mom.lambda_g + mom.beta * c_x) / dil.a_g
    d_bar = resolvent(shift, lam)
    phi2 = _x_weight(mom.beta, alpha, dil.a_g) / (d * dil.a_x) * _tr(d_bar, m_inv)
    return phi1, phi2, indicator, singular


def _resolve_eta(x: Array, eta: float | None) -> float:
    if eta is not None:
        return eta
    try:
        return default_eta(x)
    except InvalidRegime:
        return math.inf


def phi_functionals(
    x: ArrayLike,
    scheme: DaScheme,
    m: int,
    lam: float,
    dil: DilationFactors,
    eta: float | None = None,
) -> tuple[float, float]:
    x = as_samples(x)
    phi1, phi2, _, _ = _phis(x, scheme.moments(x), m, lam, dil, _resolve_eta(x, eta))
    return phi1, phi2


def error_estimate_augmented(
    x: ArrayLike,
    scheme: DaScheme,
    m: int,
    lam: float,
    eta: float | None = None,
    sigma: ArrayLike | None = None,
    k_mc: int = 64,
    rng: RngStream | int | None = None,
    *,
    g: ArrayLike | None = None,
    loo: LooMode = "first",
    threads: int | None = None,
) -> AugmentedErrorParts:
    """Estimate ``(1/d) ||R_Aug(lam) - Sigma^{-1}||_F^2`` from the data.

    ``g`` is the augmented block actually used to form ``R_Aug``; when omitted
    it is drawn from substream ``TR_STREAM`` of ``rng``. The dilation factors
    use substream ``DILATION_STREAM``.
    """
    x = as_samples(x)
    rng = as_stream(rng)
    if g is None:
        g = sample_augmented(scheme, x, m, rng.spawn(TR_STREAM))
    g = as_samples(g, allow_empty=True)
    if g.shape[1] != m:
        raise ValueError(f"G has {g.shape[1]} columns, expected m={m}")
    d = x.shape[0]
    mom = scheme.moments(x)
    r_aug = augmented_precision(x, g, lam)
    dil = dilation_factors(
        x, scheme, m, lam, k_mc, rng.spawn(DILATION_STREAM), loo=loo, threads=threads, moments=mom
    )
    phi1, phi2, indicator, singular = _phis(x, mom, m, lam, dil, _resolve_eta(x, eta))
    constant = None if sigma is None else inverse_sq_constant(sigma)
    return AugmentedErrorParts(
        tr_r2_term=float(np.sum(r_aug * r_aug)) / d,
        phi1=phi1,
        phi2=phi2,
        constant_term=constant,
        dilation=dil,
        indicator=indicator,
        singular_flag=singular,
    )


# -- population-level fixed point --------------------------------------------


@dataclass(frozen=True, eq=False)
class AugmentedDetEquiv:
    a_x_star: float
    a_g_star: float
    d_bar: Array
    residuals: tuple[float, float]
    iterations: int
    method: str = "iteration"


class _Coupled:
    def __init__(self, sigma: Array, lambda_bar: Array, beta: float, n: int, m: int, lam: float):
        self.sigma = sigma
        self.lambda_bar = lambda_bar
        self.beta = beta
        self.n = n
        self.m = m
        self.alpha = m / (n + m)
        self.lam = lam
        self.q = beta * sigma + lambda_bar
        self.eye = np.eye(sigma.shape[0])

    def d_bar(self, a_x: float, a_g: float) -> Array:
        c = _x_weight(self.beta, self.alpha, a_g)
        return resolvent(c / a_x * self.sigma + self.alpha / a_g * self.lambda_bar, self.lam)

    def maps(self, a_x: float, a_g: float) -> tuple[float, float]:
        dbar = self.d_bar(a_x, a_g)
        fx = 1.0 + _x_weight(self.beta, self.alpha, a_g) / self.n * _tr(self.sigma, dbar)
        fg = 1.0 + (self.alpha / self.m * _tr(self.q, dbar) if self.m > 0 else 0.0)
        return fx, fg


def _bisect_increasing(h, lo: float, tol: float) -> float:
    """Root of ``h`` with ``h(lo) >= 0`` and ``h`` eventually negative."""
    if h(lo) <= 0:
        return lo
    hi = 2.0 * lo
    for _ in range(200):
        if h(hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoConvergence("could not bracket the fixed point")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        v = h(mid)
        if v == 0 or hi - lo <= 4 * np.finfo(float).eps * hi:
            return mid
        if v > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_augmented_det_equiv(
    sigma: ArrayLike,
    lambda_bar: ArrayLike,
    beta: float,
    n: int,
    m: int,
    lam: float,
    tol: float = 1e-12,
    max_iter: int = 1000,
) -> AugmentedDetEquiv:
    """Coupled dilation factors ``(a_x*, a_g*)`` and the matrix
    ``((1 - (1 - beta/a_g) alpha)/a_x Sigma + alpha/a_g Lambda_bar + lam I)^{-1}``.

    The expectation of the augmented resolvent inside the defining equations
    is replaced by this matrix itself. Damped alternating iteration from
    ``(1, 1)``, then nested bisection (``a_g`` outer) if it stalls.
    """
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    sigma = as_symmetric(sigma)
    lambda_bar = as_symmetric(lambda_bar)
    prob = _Coupled(sigma, lambda_bar, beta, n, m, lam)

    a_x, a_g = 1.0, 1.0
    best, since_best = math.inf, 0
    for it in range(1, max_iter + 1):
        fx, fg = prob.maps(a_x, a_g)
        rx, rg = abs(fx - a_x), abs(fg - a_g)
        if max(rx, rg) <= tol:
            return AugmentedDetEquiv(a_x, a_g, prob.d_bar(a_x, a_g), (rx, rg), it)
        if max(rx, rg) < best * (1 - 1e-3):
            best, since_best = max(rx, rg), 0
        else:
            since_best += 1
            if since_best > 20:
                break
        a_x = 0.5 * a_x + 0.5 * fx
        fg = prob.maps(a_x, a_g)[1]
        a_g = 0.5 * a_g + 0.5 * fg

    def inner(ag: float) -> float:
        return _bisect_increasing(lambda ax: prob.maps(ax, ag)[0] - ax, 1.0, tol)

    if m > 0:
        a_g = _bisect_increasing(lambda ag: prob.maps(inner(ag), ag)[1] - ag, 1.0, tol)
    else:
        a_g = 1.0
    a_x = inner(a_g)
    fx, fg = prob.maps(a_x, a_g)
    rx, rg = abs(fx - a_x), abs(fg - a_g)
    if max(rx, rg) > tol:
        raise NoConvergence(f"coupled fixed point residuals ({rx:.3e}, {rg:.3e}) above tolerance")
    return AugmentedDetEquiv(a_x, a_g, prob.d_bar(a_x, a_g), (rx, rg), max_iter, "bisection")
