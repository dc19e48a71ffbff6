"""Run validation suites and write one JSONL report per suite.

    python3 scripts/run_suites.py [--suite NAME] [--seed S] [--out DIR]
"""

import argparse
import time
from pathlib import Path

from precaug.suites import SUITES, run_suite


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--suite", default="all", choices=["all", *SUITES])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        t0 = time.perf_counter()
        reports = run_suite(name, args.seed, args.replicates)
        (out / f"{name}.jsonl").write_text("".join(r.to_jsonl() for r in reports))
        for rep in reports:
            for c in rep.summary.get("checks", []):
                status = "PASS" if c["pass"] else "FAIL"
                print(f"{status} {rep.name}: {c['label']} = {c['value']:.4g} ({c['op']} {c['bound']})")
        print(f"  {name}: {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
