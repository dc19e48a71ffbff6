"""Relative deviation of the shrinkage error estimate as the dimension grows.

Keeps d/n = 0.1 and an AR(1) 0.5 covariance, and reports the mean and the
90th percentile over seeds of |estimate - oracle| / oracle at a few lambdas.
"""

import argparse

import numpy as np

from precaug.harness import lambda_curve
from precaug.rng import RngStream
from precaug.synth import Population, SigmaSpec, build_sigma


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", default="25,50,100,200")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--lambdas", default="0.01,0.1,1.0")
    args = ap.parse_args()
    lams = [float(v) for v in args.lambdas.split(",")]
    print("d      n     lambda   mean_rel   p90_rel")
    for d in (int(v) for v in args.dims.split(",")):
        n = 10 * d
        sigma = build_sigma(SigmaSpec("ar1", d, r=0.5))
        pop = Population(sigma)
        root = RngStream(0, stream_id=20 + d)
        rel = []
        for s in range(args.seeds):
            curve = lambda_curve(pop.sample(n, root.spawn(s)), lams, mode="oracle", sigma=sigma)
            rel.append(np.abs(curve.estimates - curve.oracles) / curve.oracles)
        rel = np.array(rel)
        for j, lam in enumerate(lams):
            print(f"{d:<6d} {n:<5d} {lam:<8.3g} {rel[:, j].mean():<10.4f} {np.percentile(rel[:, j], 90):.4f}")


if __name__ == "__main__":
    main()
