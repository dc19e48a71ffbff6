"""Command-line entry point.

    precaug <command> [--config FILE] [key=value ...]

Exit status: 0 on success, 1 when a declared tolerance fails, 2 on a
configuration or input error, 3 when a computation fails.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from .augmentation import (
    DaScheme,
    FixedGaussianGDA,
    FixedGaussianTDA,
    RandomMaskTDA,
    SaltPepperTDA,
    sample_augmented,
)
from .augmented import alpha_to_m, augmented_precision
from .config import RunConfig, load_config
from .errors import ConfigError, InvalidRegime, InvalidScheme, InvalidSpec, ParseError, PrecaugError
from .harness import ErrorCurve, alpha_curve, fit_mixture, full_covariance, lambda_curve, refine_lambda
from .io import load_matrix, save_matrix, write_curve_csv
from .rng import RngStream
from .shrinkage import ShrinkageModel, default_eta, shrinkage_precision
from .suites import SUITES, run_suite
from .synth import NoiseSpec, SigmaSpec, build_sigma, sample_data

COMMANDS = ("gen", "estimate", "lambda-curve", "alpha-curve", "tune", "augment", "validate")

# stream ids under the configured seed
DATA_STREAM = 1
AUG_STREAM = 2
CURVE_STREAM = 3
MIXTURE_STREAM = 4


class ToleranceFailure(Exception):
    pass


def _sigma_spec(cfg: RunConfig, d: int | None) -> SigmaSpec | None:
    opts = cfg.prefixed("sigma")
    opts.pop("file", None)
    if "kind" not in opts:
        return None
    opts.setdefault("d", d)
    if opts["d"] is None:
        raise ConfigError("sigma.d is required")
    for key in ("spectrum", "spikes"):
        if key in opts:
            opts[key] = tuple(opts[key])
    return SigmaSpec(**opts)


def _sigma(cfg: RunConfig, d: int | None) -> np.ndarray | None:
    if cfg.has("sigma.file"):
        if cfg.has("sigma.kind"):
            raise ConfigError("give either sigma.file or sigma.kind, not both")
        sigma = load_matrix(cfg.get("sigma.file"))
        if sigma.shape[0] != sigma.shape[1] or (d is not None and sigma.shape[0] != d):
            raise ConfigError(f"sigma.file has shape {sigma.shape}, expected ({d}, {d})")
        return sigma
    spec = _sigma_spec(cfg, d)
    return None if spec is None else build_sigma(spec)


def _cov(value: float | str) -> float | np.ndarray:
    return value if isinstance(value, float) else load_matrix(value)


def _scheme(cfg: RunConfig, x: np.ndarray) -> DaScheme:
    kind = cfg.require("scheme.kind")
    if kind == "fixed_gaussian_gda":
        return FixedGaussianGDA(_cov(cfg.get("scheme.cov", 1.0)))
    if kind == "fixed_gaussian_tda":
        return FixedGaussianTDA(_cov(cfg.get("scheme.cov", 1.0)))
    if kind == "random_mask_tda":
        return RandomMaskTDA(cfg.require("scheme.keep_prob"))
    if kind == "salt_pepper_tda":
        return SaltPepperTDA(cfg.require("scheme.keep_prob"), cfg.require("scheme.noise_var"))
    k = cfg.require("scheme.k")
    return fit_mixture(x, k, RngStream(cfg.get("seed"), stream_id=MIXTURE_STREAM)).scheme


def _data(cfg: RunConfig) -> np.ndarray:
    return load_matrix(cfg.require("data"))


def _eta(cfg: RunConfig, x: np.ndarray) -> float:
    eta = cfg.get("eta", "auto")
    if eta == "auto":
        try:
            eta = default_eta(x)
        except InvalidRegime:
            eta = math.inf
        cfg.resolve("eta", eta, "auto")
    return eta


def _m(cfg: RunConfig, n: int) -> int:
    if cfg.has("m") == cfg.has("alpha"):
        raise ConfigError("give exactly one of m and alpha")
    if cfg.has("m"):
        return cfg.get("m")
    m = alpha_to_m(cfg.get("alpha"), n)
    cfg.resolve("m", m, "from alpha")
    cfg.values.pop("alpha")
    return m


def _write_matrix(cfg: RunConfig, path: str | Path, mat: np.ndarray) -> None:
    save_matrix(path, mat)
    Path(str(path) + ".cfg").write_text("".join(line + "\n" for line in cfg.echo()))


def _emit_curve(cfg: RunConfig, curve: ErrorCurve, out: TextIO) -> None:
    if cfg.has("output"):
        with open(cfg.get("output"), "w", newline="") as fh:
            write_curve_csv(curve, fh, cfg.echo())
    else:
        write_curve_csv(curve, out, cfg.echo())


def _sigmas_for_curve(cfg: RunConfig, x: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
    sigma = _sigma(cfg, x.shape[0])
    full = full_covariance(load_matrix(cfg.get("full_data"))) if cfg.has("full_data") else None
    if cfg.get("mode") == "oracle" and sigma is None:
        raise ConfigError("mode=oracle needs sigma.kind or sigma.file")
    return sigma, full


# -- commands ---------------------------------------------------------------


def cmd_gen(cfg: RunConfig, out: TextIO) -> None:
    sigma = _sigma(cfg, cfg.get("sigma.d"))
    if sigma is None:
        raise ConfigError("gen needs sigma.kind or sigma.file")
    n = cfg.require("n")
    x = sample_data(sigma, n, NoiseSpec(cfg.get("noise.dist")), RngStream(cfg.get("seed"), stream_id=DATA_STREAM))
    path = Path(cfg.require("output"))
    _write_matrix(cfg, path, x)
    save_matrix(path.with_name(path.stem + ".sigma" + path.suffix), sigma)


def cmd_estimate(cfg: RunConfig, out: TextIO) -> None:
    x = _data(cfg)
    lam = cfg.require("lambda")
    if cfg.has("scheme.kind"):
        scheme = _scheme(cfg, x)
        m = _m(cfg, x.shape[1])
        g = sample_augmented(scheme, x, m, RngStream(cfg.get("seed"), stream_id=AUG_STREAM))
        r = augmented_precision(x, g, lam)
    else:
        r = shrinkage_precision(x, lam)
    _write_matrix(cfg, cfg.require("output"), r)


def cmd_augment(cfg: RunConfig, out: TextIO) -> None:
    x = _data(cfg)
    scheme = _scheme(cfg, x)
    m = _m(cfg, x.shape[1])
    g = sample_augmented(scheme, x, m, RngStream(cfg.get("seed"), stream_id=AUG_STREAM))
    _write_matrix(cfg, cfg.require("output"), g)


def _lambda_curve(cfg: RunConfig, x: np.ndarray) -> ErrorCurve:
    grid = cfg.get("lambda_grid") or ((cfg.get("lambda"),) if cfg.has("lambda") else None)
    if grid is None:
        raise ConfigError("missing required key 'lambda_grid'")
    sigma, full = _sigmas_for_curve(cfg, x)
    return lambda_curve(x, grid, _eta(cfg, x), cfg.get("mode"), sigma, full)


def _alpha_curve(cfg: RunConfig, x: np.ndarray) -> ErrorCurve:
    scheme = _scheme(cfg, x)
    if cfg.has("alpha_grid") == cfg.has("m_grid"):
        raise ConfigError("give exactly one of alpha_grid and m_grid")
    sigma, full = _sigmas_for_curve(cfg, x)
    return alpha_curve(
        x,
        scheme,
        cfg.require("lambda"),
        cfg.get("alpha_grid"),
        _eta(cfg, x),
        cfg.get("mode"),
        sigma,
        full,
        cfg.get("k_mc"),
        RngStream(cfg.get("seed"), stream_id=CURVE_STREAM),
        m_grid=cfg.get("m_grid"),
        loo=cfg.get("loo"),
    )


def cmd_lambda_curve(cfg: RunConfig, out: TextIO) -> None:
    _emit_curve(cfg, _lambda_curve(cfg, _data(cfg)), out)


def cmd_alpha_curve(cfg: RunConfig, out: TextIO) -> None:
    _emit_curve(cfg, _alpha_curve(cfg, _data(cfg)), out)


def cmd_tune(cfg: RunConfig, out: TextIO) -> None:
    x = _data(cfg)
    if cfg.has("scheme.kind"):
        curve = _alpha_curve(cfg, x)
        best = curve.points[curve.argmin_estimate] if curve.argmin_estimate is not None else None
        if best is None:
            raise PrecaugError("no grid point produced a finite estimate")
        out.write(f"alpha*={best.value!r} ({best.flags.split(';')[0]})\n")
    else:
        curve = _lambda_curve(cfg, x)
        lam = curve.best()
        if cfg.get("refine", False):
            model = ShrinkageModel(x, cfg.get("eta"))
            lam = refine_lambda(curve, lambda v: model.error_parts(v).total)
        out.write(f"lambda*={lam!r}\n")
    if cfg.has("output"):
        _emit_curve(cfg, curve, out)


def cmd_validate(cfg: RunConfig, out: TextIO) -> None:
    name = cfg.get("suite", "all")
    if name != "all" and name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
    reports = run_suite(name, cfg.get("seed"), cfg.get("replicates"))
    text = "".join(rep.to_jsonl() for rep in reports)
    if cfg.has("output"):
        Path(cfg.get("output")).write_text(text)
    else:
        out.write(text)
    failed = False
    for rep in reports:
        for c in rep.summary.get("checks", []):
            status = "PASS" if c["pass"] else "FAIL"
            print(f"{status} {rep.name}: {c['label']} = {c['value']!r} ({c['op']} {c['bound']!r})", file=sys.stderr)
        failed |= not rep.passed
    if failed:
        raise ToleranceFailure("at least one tolerance failed")


HANDLERS: dict[str, Callable[[RunConfig, TextIO], None]] = {
    "gen": cmd_gen,
    "estimate": cmd_estimate,
    "lambda-curve": cmd_lambda_curve,
    "alpha-curve": cmd_alpha_curve,
    "tune": cmd_tune,
    "augment": cmd_augment,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="precaug", description="Regularized precision estimation and augmentation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value configuration file")
        if name == "validate":
            p.add_argument("--suite", help=f"one of all, {', '.join(SUITES)}")
        p.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def main(argv: list[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = list(args.overrides)
    if getattr(args, "suite", None):
        overrides.append(f"suite={args.suite}")
    try:
        cfg = load_config(args.config, overrides)
        HANDLERS[args.command](cfg, out)
    except ToleranceFailure as exc:
        print(f"precaug: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ParseError, InvalidSpec, InvalidScheme, OSError) as exc:
        print(f"precaug: error: {exc}", file=sys.stderr)
        return 2
    except (PrecaugError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"precaug: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
