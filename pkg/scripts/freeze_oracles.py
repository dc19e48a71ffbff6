"""Regenerate tests/data/frozen.json from the independent oracles in tests/oracles.py."""

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import b_star_brent, b_star_identity, coupled_isotropic, error_estimate_direct  # noqa: E402

B_STAR_CASES = [
    ([1.0, 2.0, 4.0], 10, 0.3),
    ([0.5] * 20 + [3.0] * 5, 50, 0.05),
    ([0.1, 1.0, 10.0, 100.0], 6, 1.0),
    (list(np.linspace(0.2, 5.0, 40)), 30, 0.2),
]
IDENTITY_CASES = [(0.5, 0.5), (0.25, 0.2), (0.9, 0.01), (2.0, 0.3), (0.1, 10.0)]
# (d, n, m, kappa, beta, lam)
COUPLED_CASES = [
    (100, 400, 400, 1.0, 0.0, 0.2),
    (100, 400, 400, 0.25, 1.0, 0.1),
    (100, 200, 86, 0.3, 0.64, 0.5),
    (30, 60, 0, 0.5, 0.0, 0.05),
]
ESTIMATE_CASES = [(12, 60, 0.3, 0.05, 1), (30, 100, 0.1, 0.01, 2), (5, 8, 1.0, 0.1, 3)]


def main() -> None:
    out = {
        "b_star": [
            {"eigs": list(map(float, e)), "n": n, "lam": lam, "value": b_star_brent(e, n, lam)}
            for e, n, lam in B_STAR_CASES
        ],
        "b_star_identity": [
            {"ratio": r, "lam": lam, "value": b_star_identity(r, lam)} for r, lam in IDENTITY_CASES
        ],
        "coupled_isotropic": [],
        "shrinkage_estimate": [],
        "suggest_eta": {"lmin": 1.0, "n": 100, "d": 25, "safety": 1.0,
                        "value": (math.sqrt(0.99) - 0.5) ** 2},
    }
    for d, n, m, kappa, beta, lam in COUPLED_CASES:
        ax, ag, t = coupled_isotropic(d, n, m, kappa, beta, lam)
        out["coupled_isotropic"].append(
            {"d": d, "n": n, "m": m, "kappa": kappa, "beta": beta, "lam": lam,
             "a_x": float(ax), "a_g": float(ag), "d_bar_diag": float(t)}
        )
    for d, n, lam, eta, seed in ESTIMATE_CASES:
        x = np.random.default_rng(seed).standard_normal((d, n))
        out["shrinkage_estimate"].append(
            {"d": d, "n": n, "lam": lam, "eta": eta, "seed": seed,
             "value": float(error_estimate_direct(x, lam, eta, np.eye(d)))}
        )
    path = ROOT / "tests" / "data" / "frozen.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
