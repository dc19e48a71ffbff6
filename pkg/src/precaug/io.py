"""Matrix files and curve CSV.

Two matrix formats:

* ``csv``: one sample per row, an optional single header row.
* ``bin``: ``b"PMX1"``, ``u32`` d, ``u32`` n (little endian), then ``d * n``
  little-endian float64 values, one sample after another.

Internally samples are columns, so both readers return a ``(d, n)`` array.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from pathlib import Path
from typing import Iterable, Literal, TextIO

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NonFinite, ParseError
from .harness import ErrorCurve

__all__ = [
    "CURVE_COLUMNS",
    "format_float",
    "guess_format",
    "load_matrix",
    "save_matrix",
    "write_curve_csv",
    "read_curve_csv",
]

MAGIC = b"PMX1"
_HEADER = struct.Struct("<4sII")
CURVE_COLUMNS = ("hyperparam", "estimate", "oracle", "proxy", "flags")

MatrixFormat = Literal["csv", "bin"]


def guess_format(path: str | Path) -> MatrixFormat:
    return "bin" if Path(path).suffix.lower() in (".bin", ".pmx") else "csv"


def _parse_csv(text: str, source: str) -> NDArray[np.float64]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{source}: no data rows")

    def numeric(row: list[str]) -> bool:
        try:
            [float(c) for c in row]
        except ValueError:
            return False
        return True

    start = 0 if numeric(rows[0]) else 1
    data = rows[start:]
    if not data:
        raise ParseError(f"{source}: header but no data rows")
    d = len(data[0])
    out = np.empty((len(data), d))
    for i, row in enumerate(data):
        lineno = i + start + 1
        if len(row) != d:
            raise ParseError(f"{source}: expected {d} fields, found {len(row)}", row=lineno)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{source}: not a number: {cell.strip()!r}", row=lineno, column=j + 1) from None
            if not math.isfinite(v):
                raise NonFinite(f"{source}: non-finite value {cell.strip()!r}", row=lineno, column=j + 1)
            out[i, j] = v
    return np.ascontiguousarray(out.T)


def _parse_bin(raw: bytes, source: str) -> NDArray[np.float64]:
    if len(raw) < _HEADER.size:
        raise ParseError(f"{source}: truncated header")
    magic, d, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{source}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * d * n:
        raise ParseError(f"{source}: expected {8 * d * n} data bytes for d={d}, n={n}, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    x = flat.reshape(n, d).T.copy()
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        i, j = bad[0]
        raise NonFinite(f"{source}: non-finite value", row=int(j) + 1, column=int(i) + 1)
    return x


def load_matrix(path: str | Path, format: MatrixFormat | None = None) -> NDArray[np.float64]:
    """Read a ``(d, n)`` sample matrix. Row/column locations in errors are 1-based."""
    path = Path(path)
    fmt = format or guess_format(path)
    if fmt == "bin":
        return _parse_bin(path.read_bytes(), str(path))
    return _parse_csv(path.read_text(), str(path))


def save_matrix(path: str | Path, x: ArrayLike, format: MatrixFormat | None = None) -> None:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D array")
    path = Path(path)
    fmt = format or guess_format(path)
    d, n = x.shape
    if fmt == "bin":
        path.write_bytes(_HEADER.pack(MAGIC, d, n) + x.T.astype("<f8").tobytes())
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for col in x.T:
            w.writerow([format_float(v) for v in col])


def format_float(v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return "%.17g" % v


def write_curve_csv(curve: ErrorCurve, out: TextIO, echo: Iterable[str] = ()) -> None:
    """Curve rows under ``#``-prefixed config lines and a fixed header."""
    for line in echo:
        out.write(f"# {line}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for p in curve.points:
        est = "" if p.error is not None else format_float(p.estimate)
        flags = p.flags if p.error is None else f"error:{p.error}"
        w.writerow([format_float(p.value), est, format_float(p.oracle), format_float(p.proxy), flags])


def read_curve_csv(text: str) -> list[dict[str, str]]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))
