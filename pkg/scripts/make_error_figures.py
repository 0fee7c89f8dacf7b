#!/usr/bin/env python3
"""Emit the error-profile CSVs behind the approximation-error figures.

One CSV per (approximation, exact baseline) pair, 1000-point grid, plus a
printed max/mean summary.  Plotting is left to external tools; each file is
two columns, x and abs_error.
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fastact import bench  # noqa: E402

GROUPS = {
    "sigmoid": [("sigm_fastexp_2", "sigm"), ("sigm_fastexp_512", "sigm"),
                ("sigm_taylor_9", "sigm"), ("sigm_pade_4_4", "sigm")],
    "tanh": [("tanh_cont_4", "tanh"), ("tanh_taylor_9", "tanh"),
             ("tanh_pade_4_4", "tanh"), ("serp", "tanh"),
             ("serp_clamp", "tanh")],
    "comparators": [("ultra_fast_sigmoid", "sigm"), ("word2vec", "sigm"),
                    ("sigm_fastexp_512", "sigm")],
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="figures", help="output directory")
    parser.add_argument("--range", default="-5.5,5.5")
    parser.add_argument("--grid", type=int, default=1000)
    args = parser.parse_args()

    lo, hi = (float(p) for p in args.range.split(","))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    for group, pairs in GROUPS.items():
        print(f"{group}:")
        for fn, baseline in pairs:
            profile = bench.error_profile(fn, baseline, rng=(lo, hi),
                                          grid_size=args.grid)
            path = out_dir / f"{group}_{fn}_vs_{baseline}.csv"
            bench.write_error_csv(profile, path)
            print(f"  {fn:>20} vs {baseline}: "
                  f"max {profile.max_abs_error:.3e}  "
                  f"mean {profile.mean_abs_error:.3e}  -> {path}")


if __name__ == "__main__":
    main()
