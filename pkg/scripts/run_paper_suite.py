#!/usr/bin/env python3
"""Run the numbered reproduction criteria and write their artifacts.

    python3 scripts/run_paper_suite.py --out results/suite
    python3 scripts/run_paper_suite.py --only 1,2,3 --quick

Exit status matches ``onejump paper-suite``: 0 all pass, 2 inconclusive,
3 at least one failure.
"""

import argparse
import sys
from pathlib import Path

from onejump.suite import PASS, SuiteOptions, exit_code, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("results/suite"))
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--quick", action="store_true", help="fewer paths; results are reported as inconclusive")
    ap.add_argument("--x-max-scale", type=float, default=1.0)
    ap.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")])
    args = ap.parse_args()
    opts = SuiteOptions(args.seed, args.x_max_scale, args.quick)
    results = run_suite(opts, args.out, only=args.only, echo=print)
    n_pass = sum(r.status == PASS for r in results)
    print(f"\n{n_pass}/{len(results)} criteria passed; artifacts in {args.out}")
    return exit_code(results)


if __name__ == "__main__":
    sys.exit(main())
