"""fastact command line interface.

Heavy modules (numpy, numba) are imported inside the handlers so main() can
pin BLAS thread counts before numpy loads; timed runs are meaningless with a
thread pool stealing cores.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import FastactError


def _parse_range(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        from .errors import ConfigError
        raise ConfigError(f"range must be lo,hi, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        from .errors import ConfigError
        raise ConfigError(f"range must be two numbers, got {text!r}") from None


def _parse_order(text: str, form: str) -> tuple:
    from .errors import ConfigError
    parts = text.split(",")
    try:
        nums = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"order must be integers, got {text!r}") from None
    if form == "taylor":
        if len(nums) != 1:
            raise ConfigError("taylor takes a single order, e.g. --order 9")
    else:
        if len(nums) != 2:
            raise ConfigError("pade takes two orders, e.g. --order 4,4")
    return nums


def _cmd_fit(args) -> int:
    from . import fitting

    lo, hi = _parse_range(args.range)
    order = _parse_order(args.order, args.form)
    target = fitting.resolve_target(args.target)
    config = fitting.FitConfig(range_lo=lo, range_hi=hi,
                               sample_count=args.samples, target=args.target)
    samples = fitting.sample_uniform(config)
    if args.form == "taylor":
        coeffs, report = fitting.fit_taylor(samples, order[0])
    else:
        coeffs, report = fitting.fit_pade(samples, order[0], order[1],
                                          reweight=args.reweight)
    prefix = "sigm" if args.target in ("sigmoid", "sigm") else args.target
    name = "_".join([prefix, args.form] + [str(n) for n in order])
    out = args.out or f"{name}.txt"
    fitting.export_coeffs(coeffs, out, name=name)
    print(f"{name}: max_abs_error={report.max_abs_error!r} "
          f"mean_abs_error={report.mean_abs_error!r} "
          f"residual_norm={report.residual_norm!r} "
          f"condition_estimate={report.condition_estimate!r}")
    print(f"wrote {out}")
    return 0


def _cmd_err(args) -> int:
    from . import bench
    from .activations import get_activation

    spec = get_activation(args.fn)
    baseline = args.baseline or spec.replaces
    if baseline is None:
        from .errors import ConfigError
        raise ConfigError(
            f"{args.fn!r} replaces nothing; pass --baseline explicitly")
    profile = bench.error_profile(args.fn, baseline, _parse_range(args.range),
                                  args.grid)
    out = args.out or f"err_{profile.function_name}_vs_{profile.baseline_name}.csv"
    bench.write_error_csv(profile, out)
    print(f"{profile.function_name} vs {profile.baseline_name}: "
          f"max_abs_error={profile.max_abs_error:.8g} "
          f"mean_abs_error={profile.mean_abs_error:.8g} rows={args.grid}")
    print(f"wrote {out}")
    return 0


def _cmd_bench_micro(args) -> int:
    from . import bench

    names = args.fns.split(",") if args.fns else None
    results = bench.micro_bench(names, iterations=args.iterations,
                                seed=args.seed, repeats=args.repeats)
    width = max(len(r.function_name) for r in results)
    for r in results:
        print(f"{r.function_name.ljust(width)}  {r.ns_per_call:8.2f} ns/call  "
              f"x{r.relative_to_relu:6.2f} vs relu  checksum={r.checksum!r}")
    if args.out:
        rows = [r.__dict__ for r in results]
        with open(args.out, "w", encoding="ascii") as fh:
            json.dump({"rows": rows}, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def _assignment_from_args(args) -> dict:
    assignment = {}
    for slot in ("sigm", "tanh", "relu"):
        name = getattr(args, slot)
        if name is not None:
            assignment[slot] = name
    if not assignment:
        from .errors import ConfigError
        raise ConfigError("pass at least one of --sigm/--tanh/--relu")
    return assignment


def _load_dataset(workload: str, data_arg: str, limit):
    from . import bench
    from . import data as data_mod
    from .errors import ConfigError, DataError

    if data_arg in (None, "synthetic"):
        return bench.default_dataset(workload, limit)
    if workload == "charrnn":
        if data_arg == "mnist":
            raise ConfigError("charrnn trains on text, not mnist")
        return data_mod.load_text_corpus(data_arg, limit_chars=limit)
    base = data_arg
    if data_arg == "mnist":
        base = os.environ.get("FASTACT_DATA_DIR", "data")
    images = os.path.join(base, "train-images-idx3-ubyte")
    labels = os.path.join(base, "train-labels-idx1-ubyte")
    if not (os.path.exists(images) and os.path.exists(labels)):
        raise DataError(
            f"no IDX files under {base!r}; expected train-images-idx3-ubyte "
            "and train-labels-idx1-ubyte (set FASTACT_DATA_DIR or --data)")
    return data_mod.load_mnist_idx(images, labels, limit=limit or 3000)


def _cmd_train(args) -> int:
    from . import bench

    assignment = _assignment_from_args(args)
    bench.validate_assignment(args.workload, assignment)
    config = bench._train_config(args.workload, args.epochs, args.seed,
                                 batch_size=args.batch_size)
    dataset = _load_dataset(args.workload, args.data, args.limit)

    baseline = args.baseline
    if baseline == "skip":
        baseline = None
    elif baseline not in ("auto", None):
        with open(baseline, encoding="ascii") as fh:
            baseline = bench.WorkloadResult.from_dict(json.load(fh))

    result, trace = bench.run_workload(args.workload, assignment, config,
                                       dataset, baseline=baseline)

    lines = [json.dumps(rec, sort_keys=True)
             for rec in trace.records(omit_timing=args.omit_timing)]
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        for line in lines:
            print(line)
    if args.result:
        with open(args.result, "w", encoding="ascii") as fh:
            json.dump(result.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    fns = "/".join(assignment[s] for s in ("sigm", "tanh", "relu")
                   if s in assignment)
    summary = (f"{args.workload} [{fns}] status={result.status} "
               f"time={result.time_abs_seconds:.2f}s")
    if result.loss_abs is not None:
        summary += f" loss={result.loss_abs:.6g}"
    if result.loss_rel is not None:
        summary += f" loss_rel={result.loss_rel:.4f}"
    if result.time_rel is not None:
        summary += f" time_rel={result.time_rel:.4f}"
    if result.layer is not None:
        summary += f" layer={result.layer}"
    print(summary)

    if args.fail_on_divergence and result.status != "converged":
        return 3
    return 0


def _cmd_infer(args) -> int:
    from . import bench, kernels, nn

    assignment = _assignment_from_args(args)
    bench.validate_assignment(args.workload, assignment)
    config = bench._train_config(args.workload, 1, args.seed)
    dataset = _load_dataset(args.workload, args.data, args.limit)
    kernels.warmup(set(assignment.values()))
    model, make_epoch_batches, _ = bench.build_workload(
        args.workload, assignment, dataset, config)
    first = next(iter(make_epoch_batches(0)))[0][:1]
    model.forward(first)  # warm path outside the timer
    stats = nn.infer_benchmark(model, [first], repeat=args.repeat)
    print(f"{args.workload}: {stats.n_samples} inferences, "
          f"mean={stats.mean_seconds * 1e3:.4f} ms, "
          f"total={stats.total_seconds:.4f} s")
    if args.out:
        payload = {"workload": args.workload, "assignment": assignment,
                   "repeat": stats.n_samples,
                   "mean_seconds": stats.mean_seconds,
                   "total_seconds": stats.total_seconds}
        with open(args.out, "w", encoding="ascii") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def _load_rows(path) -> list:
    from .errors import ConfigError, DataError

    paths = []
    if os.path.isdir(path):
        paths = sorted(os.path.join(path, p) for p in os.listdir(path)
                       if p.endswith(".json"))
        if not paths:
            raise ConfigError(f"no .json result files in {path!r}")
    elif os.path.exists(path):
        paths = [path]
    else:
        raise ConfigError(f"no such file or directory: {path!r}")

    rows = []
    for p in paths:
        with open(p, encoding="ascii") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}: not valid JSON ({exc})") from None
        if isinstance(obj, dict) and "rows" in obj:
            rows.extend(obj["rows"])
        elif isinstance(obj, dict) and "workload" in obj:
            rows.append(obj)
        else:
            raise DataError(f"{p}: neither a result row nor a rows document")
    return rows


def _cmd_report(args) -> int:
    from . import bench

    rows = []
    for path in args.inputs:
        rows.extend(_load_rows(path))
    render = {"table": bench.render_table, "json": bench.render_json,
              "csv": bench.render_csv}[args.format]
    text = render(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_catalog(args) -> int:
    from .activations import catalog

    specs = list(catalog(include_unlisted=args.all).values())
    if args.json:
        rows = [{"name": s.name, "kind": s.kind,
                 "safety": s.safety.describe(), "replaces": s.replaces,
                 "params": dict(s.params)} for s in specs]
        print(json.dumps({"rows": rows}, sort_keys=True, indent=2))
        return 0
    width = max(len(s.name) for s in specs)
    kwidth = max(len(s.kind) for s in specs)
    for s in specs:
        repl = f" replaces {s.replaces}" if s.replaces else ""
        print(f"{s.name.ljust(width)}  {s.kind.ljust(kwidth)}  "
              f"{s.safety.describe()}{repl}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastact",
        description="Fast activation-function approximations: fitting, "
                    "error profiles, micro-benchmarks, and training runs.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fit", help="fit polynomial or rational coefficients")
    p.add_argument("--target", default="tanh",
                   help="function to approximate (tanh, sigmoid, ...)")
    p.add_argument("--form", choices=["taylor", "pade"], required=True)
    p.add_argument("--order", required=True,
                   help="taylor: n; pade: n,m")
    p.add_argument("--range", default="-5.5,5.5")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--reweight", action="store_true",
                   help="one denominator-reweighted refinement pass")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("err", help="absolute-error profile CSV over a grid")
    p.add_argument("--fn", required=True)
    p.add_argument("--baseline", default=None,
                   help="defaults to the function the approximation replaces")
    p.add_argument("--range", default="-5.5,5.5")
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_err)

    p = sub.add_parser("bench-micro", help="per-call nanosecond benchmarks")
    p.add_argument("--fns", default=None, help="comma-separated names")
    p.add_argument("--iterations", type=int, default=1_000_000)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_bench_micro)

    p = sub.add_parser("train", help="train a workload with substituted "
                                     "activations")
    p.add_argument("--workload", required=True,
                   choices=["convnet", "autoencoder", "charrnn"])
    p.add_argument("--sigm", default=None, help="sigmoid-slot function")
    p.add_argument("--tanh", default=None, help="tanh-slot function")
    p.add_argument("--relu", default=None, help="relu-slot function")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--data", default="synthetic",
                   help="synthetic | mnist | path (IDX dir or text file)")
    p.add_argument("--limit", type=int, default=None,
                   help="cap on images or corpus characters")
    p.add_argument("--baseline", default="auto",
                   help="auto | skip | path to a baseline result JSON")
    p.add_argument("--out", default=None, help="trace JSON-lines file")
    p.add_argument("--result", default=None, help="result JSON file")
    p.add_argument("--omit-timing", action="store_true",
                   help="drop wall-clock fields from the trace")
    p.add_argument("--fail-on-divergence", action="store_true")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("infer", help="sequential single-input inference "
                                     "latency")
    p.add_argument("--workload", required=True,
                   choices=["convnet", "autoencoder", "charrnn"])
    p.add_argument("--sigm", default=None)
    p.add_argument("--tanh", default=None)
    p.add_argument("--relu", default=None)
    p.add_argument("--repeat", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default="synthetic")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_infer)

    p = sub.add_parser("report", help="render result rows as table/json/csv")
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="result JSON file or directory (repeatable)")
    p.add_argument("--format", choices=["table", "json", "csv"],
                   default="table")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("catalog", help="list the activation catalog")
    p.add_argument("--all", action="store_true",
                   help="include unlisted helper entries")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_catalog)

    return parser


def main(argv=None) -> int:
    # single-threaded BLAS: timed comparisons are meaningless otherwise
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except FastactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
