"""Oracles, error curves and Monte Carlo experiments.

Everything here is seeded through :class:`~precaug.rng.RngStream`; replicates
run through :func:`~precaug.parallel.pmap` and are reduced in input order, so
reports are identical for any thread count.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize_scalar

from .augmentation import DaScheme, FixedGaussianGDA, GaussianMixtureGDA, sample_augmented
from .augmented import (
    TR_STREAM,
    LooMode,
    alpha_to_m,
    augmented_precision,
    error_estimate_augmented,
    solve_augmented_det_equiv,
)
from .errors import DegenerateCluster, PrecaugError, SingularSigma
from .linalg import SINGULAR_TOL, SymEig, as_samples, as_symmetric, sample_covariance
from .parallel import pmap
from .rng import RngStream, as_stream
from .shrinkage import (
    ShrinkageModel,
    det_equiv_shrinkage,
    indicator_eta,
    inverse_sq_constant,
    suggest_eta,
)
from .synth import NoiseSpec, Population, SigmaSpec, build_sigma

Array = NDArray[np.float64]
Mode = Literal["relative", "oracle"]


def _inverse_pd(sigma: ArrayLike) -> Array:
    eig = SymEig.of(sigma)
    if eig.min <= SINGULAR_TOL:
        raise SingularSigma(f"covariance is not positive definite (lambda_min = {eig.min:.3e})")
    v = eig.eigenvectors
    return as_symmetric((v / eig.eigenvalues) @ v.T)


def _sq_dist_over_d(r: Array, target: Array) -> float:
    diff = r - target
    return float(np.sum(diff * diff)) / r.shape[0]


def oracle_error(r: ArrayLike, sigma: ArrayLike) -> float:
    """``(1/d) ||R - Sigma^{-1}||_F^2``."""
    return _sq_dist_over_d(np.asarray(r, dtype=np.float64), _inverse_pd(sigma))


def proxy_error(r: ArrayLike, sigma_full: ArrayLike) -> float:
    """Same functional against the inverse of a large-sample covariance."""
    return _sq_dist_over_d(np.asarray(r, dtype=np.float64), _inverse_pd(sigma_full))


# -- error curves -------------------------------------------------------------


@dataclass
class CurvePoint:
    value: float
    estimate: float = math.nan
    oracle: float | None = None
    proxy: float | None = None
    flags: str = ""
    error: str | None = None


@dataclass
class ErrorCurve:
    axis: Literal["lambda", "alpha"]
    points: list[CurvePoint]
    argmin_estimate: int | None = None
    argmin_oracle: int | None = None
    argmin_proxy: int | None = None

    def __post_init__(self) -> None:
        self.points.sort(key=lambda p: p.value)
        ok = [i for i, p in enumerate(self.points) if p.error is None and math.isfinite(p.estimate)]
        self.argmin_estimate = _first_argmin([self.points[i].estimate for i in ok], ok)
        self.argmin_oracle = _first_argmin([self.points[i].oracle for i in ok], ok)
        self.argmin_proxy = _first_argmin([self.points[i].proxy for i in ok], ok)

    @property
    def values(self) -> Array:
        return np.array([p.value for p in self.points])

    @property
    def estimates(self) -> Array:
        return np.array([p.estimate for p in self.points])

    @property
    def oracles(self) -> Array:
        return np.array([math.nan if p.oracle is None else p.oracle for p in self.points])

    @property
    def proxies(self) -> Array:
        return np.array([math.nan if p.proxy is None else p.proxy for p in self.points])

    def best(self) -> float:
        if self.argmin_estimate is None:
            raise PrecaugError("no grid point produced a finite estimate")
        return self.points[self.argmin_estimate].value


def _first_argmin(vals: Sequence[float | None], idx: Sequence[int]) -> int | None:
    """Index of the smallest value, first occurrence wins."""
    best, where = math.inf, None
    for i, v in zip(idx, vals):
        if v is None or not math.isfinite(v):
            continue
        if v < best:
            best, where = v, i
    return where


def lambda_curve(
    x: ArrayLike,
    lam_grid: Sequence[float],
    eta: float | None = None,
    mode: Mode = "relative",
    sigma: ArrayLike | None = None,
    sigma_full: ArrayLike | None = None,
) -> ErrorCurve:
    """Shrinkage error estimate on a grid of ``lam``.

    ``sigma`` fills the oracle column (and the additive constant in oracle
    mode); ``sigma_full`` fills the proxy column.
    """
    if len(lam_grid) == 0:
        raise ValueError("empty lambda grid")
    if mode == "oracle" and sigma is None:
        raise ValueError("oracle mode needs sigma")
    model = ShrinkageModel(x, eta)
    sigma_inv = None if sigma is None else _inverse_pd(sigma)
    full_inv = None if sigma_full is None else _inverse_pd(sigma_full)
    constant = inverse_sq_constant(sigma) if mode == "oracle" else None

    points = []
    for lam in sorted(float(v) for v in lam_grid):
        pt = CurvePoint(lam)
        try:
            parts = model.error_parts(lam, constant)
            r = model.precision(lam)
        except (PrecaugError, ValueError) as exc:
            pt.error = f"{type(exc).__name__}: {exc}"
            pt.flags = "error"
            points.append(pt)
            continue
        pt.estimate = parts.total
        if sigma_inv is not None:
            pt.oracle = _sq_dist_over_d(r, sigma_inv)
        if full_inv is not None:
            pt.proxy = _sq_dist_over_d(r, full_inv)
        flags = []
        if not parts.indicator:
            flags.append("no_indicator")
        if parts.singular_flag:
            flags.append("singular_cx")
        pt.flags = ";".join(flags)
        points.append(pt)
    return ErrorCurve("lambda", points)


def alpha_curve(
    x: ArrayLike,
    scheme: DaScheme,
    lam: float,
    alpha_grid: Sequence[float] | None = None,
    eta: float | None = None,
    mode: Mode = "relative",
    sigma: ArrayLike | None = None,
    sigma_full: ArrayLike | None = None,
    k_mc: int = 64,
    rng: RngStream | int | None = None,
    *,
    m_grid: Sequence[int] | None = None,
    loo: LooMode = "first",
    threads: int | None = None,
) -> ErrorCurve:
    """Augmented error estimate as a function of ``alpha = m / (n + m)``.

    Grid point ``j`` uses substream ``j`` of ``rng``; the augmented block used
    for the estimate, oracle and proxy is the same draw.
    """
    x = as_samples(x)
    n = x.shape[1]
    if (alpha_grid is None) == (m_grid is None):
        raise ValueError("give exactly one of alpha_grid and m_grid")
    ms = [alpha_to_m(a, n) for a in alpha_grid] if m_grid is None else [int(v) for v in m_grid]
    if not ms:
        raise ValueError("empty alpha grid")
    if mode == "oracle" and sigma is None:
        raise ValueError("oracle mode needs sigma")
    rng = as_stream(rng)
    sigma_inv = None if sigma is None else _inverse_pd(sigma)
    full_inv = None if sigma_full is None else _inverse_pd(sigma_full)
    constant_sigma = sigma if mode == "oracle" else None

    points = []
    for j, m in enumerate(ms):
        alpha = m / (n + m)
        pt = CurvePoint(alpha)
        stream = rng.spawn(j)
        try:
            g = sample_augmented(scheme, x, m, stream.spawn(TR_STREAM))
            parts = error_estimate_augmented(
                x, scheme, m, lam, eta, constant_sigma, k_mc, stream, g=g, loo=loo, threads=threads
            )
            r = augmented_precision(x, g, lam)
        except (PrecaugError, ValueError) as exc:
            pt.error = f"{type(exc).__name__}: {exc}"
            pt.flags = "error"
            points.append(pt)
            continue
        pt.estimate = parts.total
        if sigma_inv is not None:
            pt.oracle = _sq_dist_over_d(r, sigma_inv)
        if full_inv is not None:
            pt.proxy = _sq_dist_over_d(r, full_inv)
        flags = [f"m={m}"]
        if not parts.indicator:
            flags.append("no_indicator")
        if parts.singular_flag:
            flags.append("singular_cx")
        if parts.dilation.dropped:
            flags.append(f"dropped={parts.dilation.dropped}")
        pt.flags = ";".join(flags)
        points.append(pt)
    return ErrorCurve("alpha", points)


def refine_lambda(curve: ErrorCurve, objective: Callable[[float], float]) -> float:
    """Golden-section refinement of the grid minimiser in ``log(lam)``.

    Only applies when the grid minimiser is interior; otherwise the grid
    value is returned unchanged.
    """
    i = curve.argmin_estimate
    if i is None:
        raise PrecaugError("curve has no valid minimiser")
    vals = curve.values
    if i == 0 or i == len(vals) - 1:
        return float(vals[i])
    bracket = (math.log(vals[i - 1]), math.log(vals[i]), math.log(vals[i + 1]))
    res = minimize_scalar(lambda t: objective(math.exp(t)), bracket=bracket, method="golden")
    t = min(max(res.x, bracket[0]), bracket[2])
    return math.exp(t)


# -- experiment reports -------------------------------------------------------


def _jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        out.update({f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)})
        return out
    if isinstance(obj, DaScheme):
        return {"kind": obj.kind, **{k: _jsonable(v) for k, v in obj.params().items()}}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        # strict JSON has no inf/nan literals
        return str(obj)
    return obj


@dataclass
class ExperimentReport:
    name: str
    config: dict[str, Any]
    records: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, label: str, value: float, op: str, bound: float) -> bool:
        ok = {"<=": value <= bound, "<": value < bound, ">=": value >= bound, ">": value > bound}[op]
        self.summary.setdefault("checks", []).append(
            {"label": label, "value": value, "op": op, "bound": bound, "pass": bool(ok)}
        )
        if not ok:
            self.failures.append(f"{label}: {value!r} not {op} {bound!r}")
        return bool(ok)

    def to_jsonl(self) -> str:
        lines = [{"kind": "config", "name": self.name, "config": _jsonable(self.config)}]
        lines += [{"kind": "record", **_jsonable(r)} for r in self.records]
        lines.append(
            {
                "kind": "summary",
                "name": self.name,
                "passed": self.passed,
                "failures": self.failures,
                **_jsonable(self.summary),
            }
        )
        return "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines)


@dataclass(frozen=True)
class ConcentrationConfig:
    sigma: SigmaSpec
    n: int
    lam: float
    eta: float | None = None
    replicates: int = 50
    percentile_bound: float = math.inf
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0


def concentration_experiment(cfg: ConcentrationConfig, threads: int | None = None) -> ExperimentReport:
    """Per-replicate ``|E_hat(lam) - E(lam)|`` for the shrinkage estimator."""
    if cfg.replicates < 20:
        raise ValueError("need at least 20 replicates")
    sigma = build_sigma(cfg.sigma)
    pop = Population(sigma, cfg.noise)
    sigma_inv = _inverse_pd(sigma)
    constant = inverse_sq_constant(sigma)
    root = RngStream(cfg.seed, stream_id=1)

    def one(r: int) -> dict[str, Any]:
        x = pop.sample(cfg.n, root.spawn(r))
        model = ShrinkageModel(x, cfg.eta)
        est = model.error_parts(cfg.lam, constant).total
        true = _sq_dist_over_d(model.precision(cfg.lam), sigma_inv)
        return {"replicate": r, "estimate": est, "oracle": true, "abs_dev": abs(est - true),
                "rel_dev": abs(est - true) / true, "indicator": model.indicator}

    report = ExperimentReport("concentration", dataclasses.asdict(cfg))
    report.records = pmap(one, range(cfg.replicates), threads)
    dev = np.array([r["abs_dev"] for r in report.records])
    rel = np.array([r["rel_dev"] for r in report.records])
    report.summary.update(
        mean_abs_dev=float(dev.mean()),
        stderr_abs_dev=float(dev.std(ddof=1) / math.sqrt(dev.size)),
        p95_abs_dev=float(np.quantile(dev, 0.95)),
        mean_rel_dev=float(rel.mean()),
    )
    report.check("p95_abs_dev", report.summary["p95_abs_dev"], "<=", cfg.percentile_bound)
    return report


@dataclass(frozen=True)
class DetEquivConfig:
    """``sigma`` is a template; its ``d`` is replaced by ``round(ratio * n)``.

    ``scheme=None`` checks the shrinkage resolvent; otherwise the augmented
    resolvent with ``m = round(alpha n / (1 - alpha))`` draws from ``scheme``.
    """

    sigma: SigmaSpec
    ratio: float = 0.25
    n_list: tuple[int, ...] = (200, 400, 800)
    lam: float = 0.2
    b_matrix: Literal["inverse", "identity"] = "inverse"
    replicates: int = 200
    scheme: DaScheme | None = None
    alpha: float = 0.0
    decay: float = 0.6
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0


def _b_matrix(kind: str, sigma: Array) -> Array:
    b = _inverse_pd(sigma) if kind == "inverse" else np.eye(sigma.shape[0])
    return b / np.linalg.norm(b)


def det_equiv_convergence(cfg: DetEquivConfig, threads: int | None = None) -> ExperimentReport:
    """Bias ``|(1/d) tr(B (mean_MC[R 1_A] - D_bar))|`` for each ``n`` in ``n_list``."""
    if len(cfg.n_list) < 3 or list(cfg.n_list) != sorted(cfg.n_list):
        raise ValueError("n_list must be ascending with at least 3 values")
    report = ExperimentReport("det_equiv_convergence", dataclasses.asdict(cfg))
    metrics = []
    for idx, n in enumerate(cfg.n_list):
        d = max(1, int(round(cfg.ratio * n)))
        sigma = build_sigma(dataclasses.replace(cfg.sigma, d=d))
        pop = Population(sigma, cfg.noise)
        b = _b_matrix(cfg.b_matrix, sigma)
        eta = suggest_eta(float(np.linalg.eigvalsh(sigma)[0]), n, d)
        m = 0 if cfg.scheme is None else alpha_to_m(cfg.alpha, n)
        root = RngStream(cfg.seed, stream_id=2).spawn(idx)

        def one(r: int, n=n, pop=pop, eta=eta, m=m, root=root) -> tuple[Array, Array | None, float]:
            stream = root.spawn(r)
            x = pop.sample(n, stream.spawn(0))
            ind = float(indicator_eta(x, eta))
            lam_g = None
            if cfg.scheme is None:
                res = SymEig.of_samples(x).resolvent(cfg.lam)
            else:
                g = sample_augmented(cfg.scheme, x, m, stream.spawn(1))
                res = augmented_precision(x, g, cfg.lam)
                lam_g = cfg.scheme.moments(x).lambda_g
            return res * ind, lam_g, ind

        out = pmap(one, range(cfg.replicates), threads)
        mean_r = np.zeros((d, d))
        for res, _, _ in out:
            mean_r += res
        mean_r /= cfg.replicates
        per_rep = np.array([float(np.sum(b * res)) / d for res, _, _ in out])
        if cfg.scheme is None:
            d_bar = det_equiv_shrinkage(sigma, n, cfg.lam)
        else:
            lam_bar = np.zeros((d, d))
            for _, lg, _ in out:
                lam_bar += lg
            lam_bar /= cfg.replicates
            beta = cfg.scheme.moments(pop.sample(n, root.spawn(cfg.replicates))).beta
            d_bar = solve_augmented_det_equiv(sigma, lam_bar, beta, n, m, cfg.lam).d_bar
        metric = abs(float(np.sum(b * (mean_r - d_bar))) / d)
        metrics.append(metric)
        report.records.append(
            {
                "n": n,
                "d": d,
                "m": m,
                "bias": metric,
                "stderr": float(per_rep.std(ddof=1) / math.sqrt(cfg.replicates)),
                "indicator_rate": float(np.mean([o[2] for o in out])),
            }
        )
    ratios = [metrics[i + 1] / metrics[i] if metrics[i] > 0 else 0.0 for i in range(len(metrics) - 1)]
    report.summary["ratios"] = ratios
    for i, ratio in enumerate(ratios):
        report.check(f"bias(n={cfg.n_list[i + 1]})/bias(n={cfg.n_list[i]})", ratio, "<=", cfg.decay)
    return report


# -- mixture fitting ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MixtureFit:
    scheme: GaussianMixtureGDA
    centroids: Array
    variances: Array
    shift: Array
    iterations: int
    log_likelihood: float


def _kmeanspp(x: Array, k: int, gen: np.random.Generator) -> Array:
    n = x.shape[1]
    chosen = [int(gen.integers(n))]
    d2 = np.sum((x - x[:, chosen[0], None]) ** 2, axis=0)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(gen.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(gen.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[:, nxt, None]) ** 2, axis=0))
    return x[:, chosen].T.copy()


def _em_isotropic(x: Array, means: Array, iters: int, tol: float) -> tuple[Array, Array, Array, int, float]:
    d, n = x.shape
    k = means.shape[0]
    floor = 1e-8 * max(float(np.mean(np.var(x, axis=1))), 1e-300)
    sq = ((x.T[:, None, :] - means[None, :, :]) ** 2).sum(-1)
    # hard-assignment start so each component gets a variance
    lab = np.argmin(sq, axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), lab] = 1.0
    ll_old = -math.inf
    it = 0
    ll = -math.inf
    for it in range(1, iters + 1):
        nk = resp.sum(0)
        if np.any(nk < 1e-10):
            raise DegenerateCluster("a mixture component lost all its mass")
        weights = nk / n
        means = (resp.T @ x.T) / nk[:, None]
        sq = ((x.T[:, None, :] - means[None, :, :]) ** 2).sum(-1)
        var = np.maximum((resp * sq).sum(0) / (d * nk), floor)
        logp = np.log(weights) - 0.5 * d * np.log(2 * math.pi * var) - 0.5 * sq / var
        mx = logp.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(logp - mx).sum(axis=1))
        resp = np.exp(logp - lse[:, None])
        ll = float(lse.sum())
        if abs(ll - ll_old) <= tol * max(1.0, abs(ll)):
            break
        ll_old = ll
    nk = resp.sum(0)
    if np.any(nk < 1e-10):
        raise DegenerateCluster("a mixture component lost all its mass")
    weights = nk / nk.sum()
    return weights, means, var, it, ll


def fit_mixture(
    x: ArrayLike,
    k: int,
    rng: RngStream | int | None = None,
    iters: int = 100,
    tol: float = 1e-8,
    restarts: int = 5,
) -> MixtureFit:
    """Isotropic Gaussian mixture by k-means++ seeding and EM.

    Each component has its own variance shared across coordinates. The
    returned scheme is recentred so that its weighted mean is zero; the
    subtracted vector is ``shift``.
    """
    x = as_samples(x)
    n = x.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = as_stream(rng)
    last: Exception | None = None
    for attempt in range(restarts + 1):
        gen = rng.spawn(attempt).generator()
        try:
            weights, means, var, it, ll = _em_isotropic(x, _kmeanspp(x, k, gen), iters, tol)
        except DegenerateCluster as exc:
            last = exc
            continue
        shift = weights @ means
        centred = means - shift
        scheme = GaussianMixtureGDA(weights, centred, tuple(float(v) for v in var))
        return MixtureFit(scheme, means, var, shift, it, ll)
    raise DegenerateCluster(f"mixture fit failed after {restarts} restarts: {last}")


def isotropic_gda(variance: float) -> FixedGaussianGDA:
    return FixedGaussianGDA(float(variance))


def full_covariance(x_full: ArrayLike) -> Array:
    """Sample covariance of a large reference dataset, the target of proxy errors."""
    return sample_covariance(x_full)
