#!/usr/bin/env python3
"""D(K, x) = P(X_{2,2} > K | S_2 > x) on the default grid for the catalog laws.

Writes one long-format CSV per law and prints the window supremum per K,
the quantity the class verdict is read from.
"""

import argparse
from pathlib import Path

from onejump.classify import ClassifyConfig, j_profile
from onejump.suite import CATALOG


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/j_profiles"))
    ap.add_argument("--x-max", type=float, default=1e4)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = ClassifyConfig(x_max=args.x_max)
    for name, dist in CATALOG.items():
        jp = j_profile(dist, 2, cfg.window_Ks, cfg.grid())
        slug = name.replace("(", "_").replace(")", "").replace(",", "_")
        jp.to_csv(args.out / f"{slug}.csv")
        sup = ", ".join(f"K={K:g}: {v:.3g}" for K, v in zip(jp.Ks, jp.window_sup()))
        print(f"{name:<14} {sup}")


if __name__ == "__main__":
    main()
