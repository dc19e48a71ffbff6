"""Augmentation schemes and their exact second-moment decompositions.

Every scheme draws i.i.d. artificial columns ``G_j`` given the data ``X`` and
satisfies ``E[C_G | X] = beta * C_X + Lambda_G(X)``. For transformative
schemes ``G_j = f(X_{I_j}, Z_j)`` with ``I_j`` uniform on the columns of ``X``
and ``E[f(x, Z)] = sqrt(beta) x``, so ``beta`` and ``Lambda_G`` follow from the
law of total variance.

The masking schemes keep each coordinate with probability ``keep_prob``; the
conditional mean is then ``keep_prob * x`` and ``beta = keep_prob ** 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidScheme
from .linalg import SymEig, as_samples, as_symmetric, sample_covariance, sqrtm_psd
from .rng import RngStream, as_stream

__all__ = [
    "DaScheme",
    "FixedGaussianGDA",
    "FixedGaussianTDA",
    "GaussianMixtureGDA",
    "MomentDecomposition",
    "RandomMaskTDA",
    "SaltPepperTDA",
    "moment_decomposition",
    "sample_augmented",
    "verify_decomposition",
]

Array = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class MomentDecomposition:
    beta: float
    lambda_g: Array

    @property
    def kappa_bounds(self) -> tuple[float, float]:
        eig = SymEig.of(self.lambda_g)
        return eig.min, eig.max

    def conditional_covariance(self, c_x: ArrayLike) -> Array:
        return self.beta * np.asarray(c_x) + self.lambda_g


def _cov_matrix(cov: float | ArrayLike, d: int) -> Array:
    if np.ndim(cov) == 0:
        return float(cov) * np.eye(d)
    c = as_symmetric(cov)
    if c.shape != (d, d):
        raise InvalidScheme(f"covariance has shape {c.shape}, data dimension is {d}")
    return c


def _check_psd(cov: float | ArrayLike, what: str) -> None:
    if np.ndim(cov) == 0:
        if float(cov) < 0:
            raise InvalidScheme(f"{what} variance must be non-negative")
        return
    if not SymEig.of(cov).is_psd():
        raise InvalidScheme(f"{what} covariance is not positive semi-definite")


class DaScheme:
    """Common interface: ``sample`` draws ``m`` columns, ``moments`` gives (beta, Lambda_G)."""

    kind: ClassVar[str]
    transformative: ClassVar[bool] = False

    def sample(self, x: Array, m: int, gen: np.random.Generator) -> Array:
        raise NotImplementedError

    def moments(self, x: Array) -> MomentDecomposition:
        raise NotImplementedError

    def params(self) -> dict[str, object]:
        raise NotImplementedError


def _gaussian(cov: float | ArrayLike, d: int, m: int, gen: np.random.Generator) -> Array:
    z = gen.standard_normal((d, m))
    if np.ndim(cov) == 0:
        return np.sqrt(float(cov)) * z
    return sqrtm_psd(cov) @ z


@dataclass(frozen=True, eq=False)
class FixedGaussianGDA(DaScheme):
    """``G_j ~ N(0, cov)`` independent of the data. A scalar ``cov`` means ``cov * I``."""

    cov: float | Array = 1.0
    kind: ClassVar[str] = "fixed_gaussian_gda"

    def __post_init__(self) -> None:
        _check_psd(self.cov, "GDA")

    def sample(self, x: Array, m: int, gen: np.random.Generator) -> Array:
        return _gaussian(self.cov, x.shape[0], m, gen)

    def moments(self, x: Array) -> MomentDecomposition:
        return MomentDecomposition(0.0, _cov_matrix(self.cov, x.shape[0]))

    def params(self) -> dict[str, object]:
        return {"cov": self.cov}


@dataclass(frozen=True, eq=False)
class GaussianMixtureGDA(DaScheme):
    """``G_j ~ sum_i w_i N(mu_i, Lambda_i)``; ``means`` has shape ``(k, d)``.

    ``covs`` is a sequence of ``k`` covariances (scalars mean isotropic).
    The mixture must be centred.
    """

    weights: Array
    means: Array
    covs: tuple
    kind: ClassVar[str] = "gaussian_mixture_gda"

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", tuple(self.covs))
        if w.ndim != 1 or w.shape[0] != mu.shape[0] or len(self.covs) != w.shape[0]:
            raise InvalidScheme("weights, means and covs must describe the same number of components")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise InvalidScheme("mixture weights must be non-negative and sum to 1")
        for c in self.covs:
            _check_psd(c, "mixture component")
        centre = np.linalg.norm(w @ mu)
        scale = float(np.max(np.linalg.norm(mu, axis=1))) if mu.size else 0.0
        if centre > 1e-10 * scale:
            raise InvalidScheme(f"mixture is not centred (|sum w_i mu_i| = {centre:.3e})")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def sample(self, x: Array, m: int, gen: np.random.Generator) -> Array:
        d = x.shape[0]
        comp = gen.choice(self.k, size=m, p=self.weights)
        z = gen.standard_normal((d, m))
        out = self.means[comp].T.copy()
        for i in range(self.k):
            sel = comp == i
            if not np.any(sel):
                continue
            c = self.covs[i]
            if np.ndim(c) == 0:
                out[:, sel] += np.sqrt(float(c)) * z[:, sel]
            else:
                out[:, sel] += sqrtm_psd(c) @ z[:, sel]
        return out

    def moments(self, x: Array) -> MomentDecomposition:
        d = x.shape[0]
        lam = np.zeros((d, d))
        for w, mu, c in zip(self.weights, self.means, self.covs):
            lam += w * (_cov_matrix(c, d) + np.outer(mu, mu))
        return MomentDecomposition(0.0, as_symmetric(lam))

    def params(self) -> dict[str, object]:
        return {"weights": self.weights, "means": self.means, "covs": self.covs}


def _pick(x: Array, m: int, gen: np.random.Generator) -> Array:
    if x.shape[1] < 1:
        raise InvalidScheme("transformative augmentation needs at least one data column")
    return x[:, gen.integers(0, x.shape[1], size=m)]


@dataclass(frozen=True, eq=False)
class FixedGaussianTDA(DaScheme):
    """``G_j = X_{I_j} + N(0, cov)``."""

    cov: float | Array = 1.0
    kind: ClassVar[str] = "fixed_gaussian_tda"
    transformative: ClassVar[bool] = True

    def __post_init__(self) -> None:
        _check_psd(self.cov, "TDA noise")

    def sample(self, x: Array, m: int, gen: np.random.Generator) -> Array:
        base = _pick(x, m, gen)
        return base + _gaussian(self.cov, x.shape[0], m, gen)

    def moments(self, x: Array) -> MomentDecomposition:
        return MomentDecomposition(1.0, _cov_matrix(self.cov, x.shape[0]))

    def params(self) -> dict[str, object]:
        return {"cov": self.cov}


def _check_keep(rho: float) -> None:
    if not 0.0 < rho <= 1.0:
        raise InvalidScheme(f"keep probability must lie in (0, 1], got {rho}")


@dataclass(frozen=True, eq=False)
class RandomMaskTDA(DaScheme):
    """``G_j = X_{I_j} * B_j`` with ``B_j`` i.i.d. Bernoulli(keep_prob) per coordinate."""

    keep_prob: float
    kind: ClassVar[str] = "random_mask_tda"
    transformative: ClassVar[bool] = True

    def __post_init__(self) -> None:
        _check_keep(self.keep_prob)

    def sample(self, x: Array, m: int, gen: np.random.Generator) -> Array:
        base = _pick(x, m, gen)
        keep = gen.random(base.shape) < self.keep_prob
        return np.where(keep, base, 0.0)

    def moments(self, x: Array) -> MomentDecomposition:
        rho = self.keep_prob
        diag = np.diag(np.diag(sample_covariance(x)))
        return MomentDecomposition(rho * rho, rho * (1.0 - rho) * diag)

    def params(self) -> dict[str, object]:
        return {"keep_prob": self.keep_prob}


@dataclass(frozen=True, eq=False)
class SaltPepperTDA(DaScheme):
    """Masked coordinates are replaced by ``N(0, noise_var)`` draws instead of zero."""

    keep_prob: float
    noise_var: float
    kind: ClassVar[str] = "salt_pepper_tda"
    transformative: ClassVar[bool] = True

    def __post_init__(self) -> None:
        _check_keep(self.keep_prob)
        if self.noise_var < 0:
            raise InvalidScheme("noise variance must be non-negative")

    def sample(self, x: Array, m: int, gen: np.random.Generator) -> Array:
        base = _pick(x, m, gen)
        keep = gen.random(base.shape) < self.keep_prob
        noise = np.sqrt(self.noise_var) * gen.standard_normal(base.shape)
        return np.where(keep, base, noise)

    def moments(self, x: Array) -> MomentDecomposition:
        rho = self.keep_prob
        d = x.shape[0]
        diag = np.diag(np.diag(sample_covariance(x)))
        lam = rho * (1.0 - rho) * diag + (1.0 - rho) * self.noise_var * np.eye(d)
        return MomentDecomposition(rho * rho, lam)

    def params(self) -> dict[str, object]:
        return {"keep_prob": self.keep_prob, "noise_var": self.noise_var}


def sample_augmented(scheme: DaScheme, x: ArrayLike, m: int, rng: RngStream | int | None = None) -> Array:
    """Draw ``m`` artificial columns from the scheme given data ``x``.

    Transformative schemes draw the source indices first, then the noise, from
    the same stream.
    """
    x = as_samples(x)
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return np.zeros((x.shape[0], 0))
    return scheme.sample(x, m, as_stream(rng).generator())


def moment_decomposition(scheme: DaScheme, x: ArrayLike) -> MomentDecomposition:
    return scheme.moments(as_samples(x))


def verify_decomposition(
    scheme: DaScheme,
    x: ArrayLike,
    m_mc: int,
    rng: RngStream | int | None = None,
    chunk: int = 50_000,
) -> float:
    """Relative Frobenius gap between a Monte Carlo ``C_G`` and ``beta C_X + Lambda_G``."""
    if m_mc < 1000:
        raise ValueError("m_mc must be at least 1000")
    x = as_samples(x)
    rng = as_stream(rng)
    target = scheme.moments(x).conditional_covariance(sample_covariance(x))
    d = x.shape[0]
    acc = np.zeros((d, d))
    done = 0
    for i in range(0, (m_mc + chunk - 1) // chunk):
        size = min(chunk, m_mc - done)
        g = sample_augmented(scheme, x, size, rng.spawn(i))
        acc += g @ g.T
        done += size
    c_g = acc / m_mc
    return float(np.linalg.norm(c_g - target) / np.linalg.norm(target))
