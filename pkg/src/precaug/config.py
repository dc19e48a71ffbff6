"""``key=value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment; later keys override
earlier ones. Unknown keys are rejected. Grids are comma lists or
``logspace(a, b, k)`` (``10**a .. 10**b``) or ``linspace(a, b, k)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .errors import ConfigError

__all__ = ["KEYS", "RunConfig", "load_config", "parse_grid", "config_from_echo"]

CURVE_HEADER = "hyperparam,"
_GRID_FN = re.compile(r"^(logspace|linspace)\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)$")


def parse_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    mt = _GRID_FN.match(text)
    if mt:
        fn, a, b, k = mt.groups()
        try:
            a_, b_, k_ = float(a), float(b), int(k)
        except ValueError:
            raise ConfigError(f"bad grid arguments in {text!r}") from None
        if k_ < 1:
            raise ConfigError(f"grid needs at least one point: {text!r}")
        pts = np.logspace(a_, b_, k_) if fn == "logspace" else np.linspace(a_, b_, k_)
        return tuple(float(v) for v in pts)
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if not vals:
        raise ConfigError("empty grid")
    return vals


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    return float(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _eta(text: str) -> float | str:
    return "auto" if text == "auto" else float(text)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _float_or_path(text: str) -> float | str:
    try:
        return float(text)
    except ValueError:
        return text


KEYS: dict[str, Callable[[str], Any]] = {
    "data": str,
    "full_data": str,
    "output": str,
    "lambda": _float,
    "lambda_grid": parse_grid,
    "alpha": _float,
    "alpha_grid": parse_grid,
    "m": _int,
    "m_grid": _ints,
    "n": _int,
    "eta": _eta,
    "k_mc": _int,
    "seed": _int,
    "mode": _choice("relative", "oracle"),
    "loo": _choice("first", "all"),
    "refine": _bool,
    "suite": str,
    "replicates": _int,
    "noise.dist": _choice("gaussian", "rademacher", "uniform"),
    "sigma.kind": _choice("identity", "scaled", "ar1", "spectrum", "spiked"),
    "sigma.d": _int,
    "sigma.scale": _float,
    "sigma.r": _float,
    "sigma.spectrum": _floats,
    "sigma.bulk": _float,
    "sigma.spikes": _floats,
    "sigma.seed": _int,
    "sigma.file": str,
    "scheme.kind": _choice(
        "fixed_gaussian_gda", "gaussian_mixture_gda", "fixed_gaussian_tda", "random_mask_tda", "salt_pepper_tda"
    ),
    "scheme.cov": _float_or_path,
    "scheme.keep_prob": _float,
    "scheme.noise_var": _float,
    "scheme.k": _int,
}

DEFAULTS: dict[str, Any] = {"k_mc": 64, "seed": 0, "mode": "relative", "loo": "first", "noise.dist": "gaussian"}


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    values: dict[str, Any] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], where: str = "") -> RunConfig:
        cfg = cls(dict(DEFAULTS))
        for key, raw in pairs:
            cfg.set(key, raw, where)
        return cfg

    def set(self, key: str, raw: str, where: str = "") -> None:
        key, raw = key.strip(), raw.strip()
        loc = f"{where}: " if where else ""
        if key not in KEYS:
            raise ConfigError(f"{loc}unknown key {key!r}")
        try:
            self.values[key] = KEYS[key](raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{loc}bad value for {key}: {exc}") from None

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def require(self, key: str) -> Any:
        if key not in self.values:
            raise ConfigError(f"missing required key {key!r}")
        return self.values[key]

    def has(self, key: str) -> bool:
        return key in self.values

    def prefixed(self, prefix: str) -> dict[str, Any]:
        return {k[len(prefix) + 1:]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def resolve(self, key: str, value: Any, note: str | None = None) -> None:
        """Record a value chosen at run time so the echo reproduces the run."""
        self.values[key] = value
        if note:
            self.notes[key] = note

    def echo(self) -> list[str]:
        lines = []
        for key in sorted(self.values):
            line = f"{key}={_format(self.values[key])}"
            if key in self.notes:
                line += f"  # {self.notes[key]}"
            lines.append(line)
        return lines


def _split(line: str, where: str) -> tuple[str, str] | None:
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    if "=" not in line:
        raise ConfigError(f"{where}: expected key=value, got {line!r}")
    key, value = line.split("=", 1)
    return key, value


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    pairs: list[tuple[str, str]] = []
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        for i, line in enumerate(text.splitlines(), 1):
            kv = _split(line, f"{path}:{i}")
            if kv:
                pairs.append(kv)
    for item in overrides:
        kv = _split(item, "command line")
        if kv:
            pairs.append(kv)
    return RunConfig.from_pairs(pairs)


def config_from_echo(text: str) -> RunConfig:
    """Rebuild a config from the ``#`` header of a curve CSV or a ``.cfg`` sidecar."""
    pairs = []
    for line in text.splitlines():
        if line.startswith(CURVE_HEADER):
            break
        kv = _split(line[1:] if line.startswith("#") else line, "echo")
        if kv:
            pairs.append(kv)
    return RunConfig.from_pairs(pairs)
