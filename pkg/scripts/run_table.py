#!/usr/bin/env python3
"""Run the full workload x activation matrix and render the summary table.

Every row is trained in a fresh `python -m fastact train` process so no JIT
or allocator state leaks between timed runs.  Exact-function rows double as
the baselines; the final `report` step fills the relative columns from the
rows present in the output directory.

Rows that fail to converge (possible for the taylor_9 substitutions and the
relu/relu charrnn pairing, depending on scale and seed) come back with
status diverged/nan and render as infinity/NaN markers rather than aborting
the sweep.
"""
import argparse
import itertools
import subprocess
import sys
from pathlib import Path

SIGMOID_GROUP = ("sigm", "sigm_fastexp_2", "sigm_fastexp_512",
                 "sigm_taylor_9", "sigm_pade_4_4", "ultra_fast_sigmoid",
                 "word2vec")
TANH_GROUP = ("tanh", "tanh_cont_4", "tanh_taylor_9", "tanh_pade_4_4",
              "serp", "serp_clamp")

CHARRNN_PAIRS = tuple(itertools.chain(
    (("relu", "relu"), ("sigm", "tanh")),
    ((s, "tanh") for s in SIGMOID_GROUP[1:5]),
    (("sigm", t) for t in TANH_GROUP[1:]),
    (("sigm_fastexp_2", "serp"), ("sigm_fastexp_2", "serp_clamp"),
     ("sigm_fastexp_512", "tanh_cont_4"), ("sigm_fastexp_512", "tanh_pade_4_4"),
     ("sigm_fastexp_512", "serp"), ("sigm_fastexp_512", "serp_clamp"),
     ("ultra_fast_sigmoid", "tanh"), ("word2vec", "tanh")),
))


def rows_for(workload):
    if workload == "charrnn":
        return [{"sigm": s, "tanh": t} for s, t in CHARRNN_PAIRS]
    rows = [{"relu": "relu"}]
    rows += [{"sigm": name} for name in SIGMOID_GROUP]
    rows += [{"tanh": name} for name in TANH_GROUP]
    return rows


def run_row(workload, assignment, out_dir, args):
    tag = "_".join([workload] + [assignment[s]
                                 for s in ("sigm", "tanh", "relu")
                                 if s in assignment])
    result = out_dir / f"{tag}.json"
    cmd = [sys.executable, "-m", "fastact", "train",
           "--workload", workload, "--seed", str(args.seed),
           "--baseline", "skip", "--result", str(result),
           "--out", str(out_dir / f"{tag}.trace.jsonl")]
    for slot, name in assignment.items():
        cmd += [f"--{slot}", name]
    if args.epochs is not None:
        cmd += ["--epochs", str(args.epochs)]
    if args.limit is not None:
        cmd += ["--limit", str(args.limit)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout else ""
    print(f"  {summary}")
    if proc.returncode != 0:
        print(proc.stderr, file=sys.stderr)
        raise SystemExit(f"row {tag} failed with exit {proc.returncode}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="result directory")
    parser.add_argument("--workloads", default="convnet,autoencoder,charrnn")
    parser.add_argument("--epochs", type=int, default=None,
                        help="override the per-workload default")
    parser.add_argument("--limit", type=int, default=None,
                        help="dataset size cap (images or characters)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    workloads = [w.strip() for w in args.workloads.split(",") if w.strip()]

    for workload in workloads:
        rows = rows_for(workload)
        print(f"{workload}: {len(rows)} rows")
        for assignment in rows:
            run_row(workload, assignment, out_dir, args)

    for fmt, name in (("table", "table.txt"), ("json", "rows.json"),
                      ("csv", "rows.csv")):
        subprocess.run([sys.executable, "-m", "fastact", "report",
                        "--in", str(out_dir), "--format", fmt,
                        "--out", str(out_dir / name)], check=True)
    print()
    print((out_dir / "table.txt").read_text())
    print(f"results in {out_dir}/ (table.txt, rows.json, rows.csv)")


if __name__ == "__main__":
    main()
