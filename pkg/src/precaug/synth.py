"""Synthetic data ``X = Sigma^{1/2} Z`` with independent unit-variance entries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidSpec
from .linalg import as_symmetric, sqrtm_psd
from .rng import RngStream, as_stream

SigmaKind = Literal["identity", "scaled", "ar1", "spectrum", "spiked"]
NoiseDist = Literal["gaussian", "rademacher", "uniform"]

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class SigmaSpec:
    """Population covariance family.

    ``scale`` is used by ``scaled``; ``r`` by ``ar1``; ``spectrum`` by
    ``spectrum``; ``bulk``/``spikes`` by ``spiked``. Random eigenbases are drawn
    from ``seed``.
    """

    kind: SigmaKind
    d: int
    scale: float = 1.0
    r: float = 0.0
    spectrum: tuple[float, ...] = ()
    bulk: float = 1.0
    spikes: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidSpec("d must be >= 1")
        if self.kind == "scaled" and not self.scale > 0:
            raise InvalidSpec("scaled covariance needs sigma^2 > 0")
        if self.kind == "ar1" and not -1.0 < self.r < 1.0:
            raise InvalidSpec(f"ar1 coefficient must lie in (-1, 1), got {self.r}")
        if self.kind == "spectrum":
            if len(self.spectrum) != self.d:
                raise InvalidSpec(f"spectrum needs {self.d} entries, got {len(self.spectrum)}")
            if min(self.spectrum) <= 0:
                raise InvalidSpec("spectrum entries must be positive")
        if self.kind == "spiked":
            if self.bulk <= 0 or any(s <= 0 for s in self.spikes):
                raise InvalidSpec("spiked covariance needs positive bulk and spikes")
            if len(self.spikes) > self.d:
                raise InvalidSpec("more spikes than dimensions")
        if self.kind not in ("identity", "scaled", "ar1", "spectrum", "spiked"):
            raise InvalidSpec(f"unknown covariance kind {self.kind!r}")


@dataclass(frozen=True)
class NoiseSpec:
    dist: NoiseDist = "gaussian"

    def __post_init__(self) -> None:
        if self.dist not in ("gaussian", "rademacher", "uniform"):
            raise InvalidSpec(f"unknown noise distribution {self.dist!r}")

    def draw(self, gen: np.random.Generator, shape: tuple[int, ...]) -> NDArray[np.float64]:
        if self.dist == "gaussian":
            return gen.standard_normal(shape)
        if self.dist == "rademacher":
            return gen.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        return gen.uniform(-_SQRT3, _SQRT3, size=shape)


def random_orthogonal(d: int, seed: int) -> NDArray[np.float64]:
    """Haar-distributed orthogonal matrix (QR with sign correction)."""
    gen = RngStream(seed, stream_id=0x5EED).generator()
    q, r = np.linalg.qr(gen.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _conjugate(eigs: ArrayLike, seed: int) -> NDArray[np.float64]:
    eigs = np.asarray(eigs, dtype=np.float64)
    q = random_orthogonal(eigs.shape[0], seed)
    return as_symmetric((q * eigs) @ q.T)


def build_sigma(spec: SigmaSpec) -> NDArray[np.float64]:
    d = spec.d
    if spec.kind == "identity":
        return np.eye(d)
    if spec.kind == "scaled":
        return spec.scale * np.eye(d)
    if spec.kind == "ar1":
        idx = np.arange(d)
        return spec.r ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    if spec.kind == "spectrum":
        return _conjugate(spec.spectrum, spec.seed)
    eigs = np.full(d, spec.bulk)
    eigs[: len(spec.spikes)] = spec.spikes
    return _conjugate(eigs, spec.seed)


@dataclass
class Population:
    """A covariance together with its square root, ready for repeated sampling."""

    sigma: NDArray[np.float64]
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self) -> None:
        self.sigma = as_symmetric(self.sigma)
        self.root = sqrtm_psd(self.sigma)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def sample(self, n: int, rng: RngStream | int | None) -> NDArray[np.float64]:
        z = self.noise.draw(as_stream(rng).generator(), (self.d, n))
        return self.root @ z


def sample_data(
    sigma: ArrayLike,
    n: int,
    noise: NoiseSpec | None = None,
    rng: RngStream | int | None = None,
) -> NDArray[np.float64]:
    """Draw ``n`` columns ``Sigma^{1/2} z`` with i.i.d. unit-variance ``z`` entries."""
    sigma = as_symmetric(sigma)
    if np.linalg.eigvalsh(sigma)[0] <= 0:
        raise InvalidSpec("sigma must be strictly positive definite")
    return Population(sigma, noise or NoiseSpec()).sample(n, rng)
