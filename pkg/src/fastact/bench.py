"""Benchmark harness: scalar micro-benchmarks, error profiles over a grid,
end-to-end workload runs, and table/JSON/CSV report rendering.

Relative metrics always compare against the replaced exact function measured
in the same session, never against ReLU.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import kernels, nn
from .activations import ActivationSpec, get_activation
from .errors import BenchError, ConfigError, EvaluationSingularity

# ---------------------------------------------------------------------------
# micro-benchmark


@dataclass(frozen=True)
class MicroBenchResult:
    function_name: str
    ns_per_call: float
    relative_to_relu: float
    samples: int
    input_distribution: str
    checksum: float


_MIN_TRUSTED_SECONDS = 5e-5  # ~1000x perf_counter resolution


def _time_loop(loop, xs, repeats):
    loop(xs[: min(1024, xs.shape[0])])  # JIT warmup outside the timer
    best = math.inf
    checksum = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        acc = loop(xs)
        dt = time.perf_counter() - t0
        best = min(best, dt)
        checksum = acc
    if best < _MIN_TRUSTED_SECONDS:
        raise BenchError(
            f"elapsed {best * 1e9:.0f} ns is below timer trust threshold; "
            "increase the iteration count")
    return best, float(checksum)


def micro_bench(names=None, iterations: int = 1_000_000,
                input_range=(-5.0, 5.0), seed: int = 0,
                repeats: int = 5) -> list:
    """Per-function ns/call over pre-generated uniform inputs.

    Inputs are drawn once and shared by every function (no branch-predictor
    bias from per-function regeneration); the accumulated checksum defeats
    dead-code elimination and is reported for determinism checks.
    """
    from .activations import catalog_names

    if names is None:
        names = catalog_names()
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    lo, hi = float(input_range[0]), float(input_range[1])
    if not lo < hi:
        raise ConfigError(f"empty input range [{lo}, {hi}]")
    rng = np.random.default_rng(np.random.SeedSequence([88001, int(seed)]))
    xs = rng.uniform(lo, hi, size=int(iterations))
    dist = f"uniform[{lo:g},{hi:g}]"

    base_best, _ = _time_loop(kernels.bench_loop("relu"), xs, repeats)
    base_ns = base_best / iterations * 1e9

    out = []
    for name in names:
        get_activation(name)  # fail fast on unknown names
        if name == "relu":
            best, checksum = base_best, float(kernels.bench_loop("relu")(xs))
        else:
            best, checksum = _time_loop(kernels.bench_loop(name), xs, repeats)
        ns = best / iterations * 1e9
        out.append(MicroBenchResult(
            function_name=name,
            ns_per_call=ns,
            relative_to_relu=ns / base_ns,
            samples=int(iterations),
            input_distribution=dist,
            checksum=checksum,
        ))
    return out


# ---------------------------------------------------------------------------
# error profiles


@dataclass(frozen=True)
class ErrorProfile:
    function_name: str
    baseline_name: str
    grid: np.ndarray
    abs_error: np.ndarray
    max_abs_error: float
    mean_abs_error: float


def _resolve(spec_or_name) -> ActivationSpec:
    if isinstance(spec_or_name, ActivationSpec):
        return spec_or_name
    return get_activation(spec_or_name)


def error_profile(approx, exact, rng=(-5.5, 5.5),
                  grid_size: int = 1000) -> ErrorProfile:
    """|approx - exact| on a uniform f64 grid; reproducible bit-exactly."""
    a = _resolve(approx)
    e = _resolve(exact)
    if grid_size < 2:
        raise ConfigError(f"grid_size must be >= 2, got {grid_size}")
    lo, hi = float(rng[0]), float(rng[1])
    if not lo < hi:
        raise ConfigError(f"empty profile range [{lo}, {hi}]")
    xs = np.linspace(lo, hi, grid_size)
    err = np.empty(grid_size, dtype=np.float64)
    for i, x in enumerate(xs):
        xv = float(x)
        av = a.fn(xv)
        ev = e.fn(xv)
        if not (math.isfinite(av) and math.isfinite(ev)):
            raise EvaluationSingularity(
                f"non-finite evaluation at x={xv!r} "
                f"({a.name}={av!r}, {e.name}={ev!r})", x=xv)
        err[i] = abs(av - ev)
    return ErrorProfile(
        function_name=a.name,
        baseline_name=e.name,
        grid=xs,
        abs_error=err,
        max_abs_error=float(err.max()),
        mean_abs_error=float(err.mean()),
    )


def write_error_csv(profile: ErrorProfile, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("x,abs_error\n")
        for x, e in zip(profile.grid, profile.abs_error):
            fh.write(f"{x:.17g},{e:.17g}\n")


def safe_envelope_max_error(name: str, limit: float = 88.0,
                            per_side: int = 500) -> float:
    """Max |approx - exact| over a log-spaced grid out to +/-limit; the
    testable meaning of a safe approximation not blowing up off-range."""
    spec = _resolve(name)
    if spec.replaces is None:
        raise ConfigError(f"{name!r} has no exact baseline to compare against")
    exact = get_activation(spec.replaces)
    pos = np.logspace(-3.0, math.log10(limit), per_side)
    xs = np.concatenate([-pos[::-1], [0.0], pos])
    worst = 0.0
    for x in xs:
        worst = max(worst, abs(spec.fn(float(x)) - exact.fn(float(x))))
    return worst


# ---------------------------------------------------------------------------
# workloads


WORKLOAD_DEFAULT_EPOCHS = {"convnet": 5, "autoencoder": 10, "charrnn": 3}

EXACT_FOR_SLOT = {"sigm": "sigm", "tanh": "tanh", "relu": "relu"}

# Table-level designations: the safe picks and the ranged picks
CHOICE_TAGS = {
    "sigm_fastexp_512": "safe",
    "tanh_pade_4_4": "safe",
    "sigm_fastexp_2": "ranged",
    "serp": "ranged",
}

CHARRNN_SEQ_LEN = 50
CHARRNN_HIDDEN = 64

_DATA_SEED = 4242  # fixed: baseline and approximation runs must share data


@dataclass(frozen=True)
class WorkloadResult:
    workload: str
    assignment: dict
    loss_abs: float | None
    loss_rel: float | None
    time_abs_seconds: float
    time_rel: float | None
    status: str
    layer: int | None
    choice_tag: str | None
    seed: int
    epochs: int
    counters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "workload": self.workload,
            "assignment": dict(self.assignment),
            "loss_abs": self.loss_abs,
            "loss_rel": self.loss_rel,
            "time_abs_seconds": self.time_abs_seconds,
            "time_rel": self.time_rel,
            "status": self.status,
            "layer": self.layer,
            "choice_tag": self.choice_tag,
            "seed": self.seed,
            "epochs": self.epochs,
            "counters": dict(self.counters),
        }

    @staticmethod
    def from_dict(d: dict) -> "WorkloadResult":
        return WorkloadResult(
            workload=d["workload"],
            assignment=dict(d["assignment"]),
            loss_abs=d.get("loss_abs"),
            loss_rel=d.get("loss_rel"),
            time_abs_seconds=d.get("time_abs_seconds", 0.0),
            time_rel=d.get("time_rel"),
            status=d.get("status", "converged"),
            layer=d.get("layer"),
            choice_tag=d.get("choice_tag"),
            seed=d.get("seed", 0),
            epochs=d.get("epochs", 0),
            counters=dict(d.get("counters", {})),
        )


def validate_assignment(workload: str, assignment: dict) -> dict:
    if workload not in WORKLOAD_DEFAULT_EPOCHS:
        raise ConfigError(
            f"unknown workload {workload!r}; choose from "
            f"{sorted(WORKLOAD_DEFAULT_EPOCHS)}")
    slots = set(assignment)
    if workload == "charrnn":
        if slots != {"sigm", "tanh"}:
            raise ConfigError(
                "charrnn needs both the sigm slot and the tanh slot")
    else:
        if len(slots) != 1 or not slots <= {"sigm", "tanh", "relu"}:
            raise ConfigError(
                f"{workload} takes exactly one activation slot "
                "(sigm, tanh, or relu)")
    for slot, name in assignment.items():
        get_activation(name)
    return dict(assignment)


def baseline_assignment(assignment: dict) -> dict:
    return {slot: EXACT_FOR_SLOT[slot] for slot in assignment}


def default_dataset(workload: str, limit: int | None = None):
    if workload == "charrnn":
        return data_mod.synthetic_text(_DATA_SEED, limit or 24_000)
    return data_mod.synthetic_mnist(_DATA_SEED, limit or 3_000)


def one_hot(idx: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((idx.size, n_classes), dtype=nn.F32)
    out[np.arange(idx.size), idx.reshape(-1)] = 1.0
    return out.reshape(idx.shape + (n_classes,))


def build_workload(workload: str, assignment: dict, dataset,
                   config: nn.TrainConfig):
    """Returns (model, make_epoch_batches, counters)."""
    counters: dict = {}
    rng = np.random.default_rng(np.random.SeedSequence([55001, int(config.seed)]))

    if workload == "autoencoder":
        act = assignment[next(iter(assignment))]
        slot = next(iter(assignment))
        specs = [
            nn.LayerSpec("dense", {"n_in": 784, "n_out": 32}, act, slot),
            nn.LayerSpec("dense", {"n_in": 32, "n_out": 784}, act, slot),
        ]
        model = nn.build_model(specs, rng, counters)
        flat = dataset.images.reshape(dataset.images.shape[0], -1)

        def make_epoch_batches(epoch):
            for idx in data_mod.batch_order(flat.shape[0], config.batch_size,
                                            config.seed, epoch):
                xb = flat[idx]
                yield xb, xb
        return model, make_epoch_batches, counters

    if workload == "convnet":
        act = assignment[next(iter(assignment))]
        slot = next(iter(assignment))
        specs = [
            nn.LayerSpec("conv2d", {"in_ch": 1, "out_ch": 8, "k": 3}, act, slot),
            nn.LayerSpec("maxpool", {"k": 2}),
            nn.LayerSpec("flatten"),
            nn.LayerSpec("dense", {"n_in": 8 * 13 * 13, "n_out": 128}, act, slot),
            nn.LayerSpec("dense", {"n_in": 128, "n_out": 10}, None),
        ]
        model = nn.build_model(specs, rng, counters)
        images = dataset.images[:, None, :, :]
        labels = dataset.labels

        def make_epoch_batches(epoch):
            for idx in data_mod.batch_order(images.shape[0], config.batch_size,
                                            config.seed, epoch):
                yield images[idx], labels[idx]
        return model, make_epoch_batches, counters

    # charrnn
    vocab_size = len(dataset.vocab)
    gates = nn.LstmGateConfig(gate_sigmoid=assignment["sigm"],
                              cell_tanh=assignment["tanh"])
    specs = [
        nn.LayerSpec("lstm", {"n_in": vocab_size, "n_hidden": CHARRNN_HIDDEN,
                              "gates": gates}),
        nn.LayerSpec("lstm", {"n_in": CHARRNN_HIDDEN, "n_hidden": CHARRNN_HIDDEN,
                              "gates": gates}),
        nn.LayerSpec("dense", {"n_in": CHARRNN_HIDDEN, "n_out": vocab_size}, None),
    ]
    model = nn.build_model(specs, rng, counters)
    stream = dataset.stream
    t_len = CHARRNN_SEQ_LEN
    n_windows = (stream.shape[0] - 1) // t_len
    if n_windows < 1:
        raise ConfigError("text corpus too short for one sequence window")
    starts = np.arange(n_windows) * t_len

    def make_epoch_batches(epoch):
        for idx in data_mod.batch_order(n_windows, config.batch_size,
                                        config.seed, epoch):
            offs = starts[idx][:, None] + np.arange(t_len + 1)[None, :]
            win = stream[offs]
            yield one_hot(win[:, :-1], vocab_size), win[:, 1:]
    return model, make_epoch_batches, counters


def _train_config(workload: str, epochs: int | None, seed: int,
                  batch_size: int = 64) -> nn.TrainConfig:
    loss = "mse" if workload == "autoencoder" else "cross_entropy"
    return nn.TrainConfig(
        epochs=epochs or WORKLOAD_DEFAULT_EPOCHS[workload],
        batch_size=batch_size, seed=seed, loss=loss)


def _choice_tag(assignment: dict) -> str | None:
    tags = set()
    for slot, name in assignment.items():
        if name == EXACT_FOR_SLOT.get(slot):
            continue
        if name not in CHOICE_TAGS:
            return None
        tags.add(CHOICE_TAGS[name])
    if len(tags) == 1:
        return tags.pop()
    return None


def run_workload(workload: str, assignment: dict,
                 config: nn.TrainConfig | None = None,
                 dataset=None, baseline="auto",
                 warm: bool = True) -> tuple:
    """Train one (workload, activation assignment) pair and fill the Rel
    columns against the replaced exact function's run.

    baseline: "auto" trains the exact baseline implicitly when needed, a
    WorkloadResult reuses a previous run, None skips Rel computation.
    Returns (WorkloadResult, TrainTrace).
    """
    assignment = validate_assignment(workload, assignment)
    if config is None:
        config = _train_config(workload, None, 0)
    if dataset is None:
        dataset = default_dataset(workload)

    base_assignment = baseline_assignment(assignment)
    base_result = None
    if isinstance(baseline, WorkloadResult):
        base_result = baseline
    elif baseline == "auto" and assignment != base_assignment:
        base_result, _ = run_workload(workload, base_assignment, config,
                                      dataset, baseline=None, warm=warm)

    if warm:
        kernels.warmup(set(assignment.values()) | {"identity"})
        # throwaway clone run: JIT + BLAS warm without touching the timed model
        wmodel, wbatches, _ = build_workload(workload, assignment, dataset, config)
        for xb, yb in wbatches(0):
            try:
                out = wmodel.forward(xb)
                _, grad = nn.LOSSES[config.loss](out, yb)
                wmodel.backward(grad)
            except nn.DivergenceSignal:
                pass
            break

    model, make_epoch_batches, counters = build_workload(
        workload, assignment, dataset, config)
    trace = nn.train(model, make_epoch_batches, config)

    loss_abs = trace.final_loss if trace.status == "converged" else None
    loss_rel = None
    time_rel = None
    if base_result is not None and trace.status == "converged":
        if base_result.loss_abs:
            loss_rel = loss_abs / base_result.loss_abs
        if base_result.time_abs_seconds:
            time_rel = trace.total_seconds / base_result.time_abs_seconds
    if assignment == base_assignment and trace.status == "converged":
        loss_rel = 1.0
        time_rel = 1.0

    return WorkloadResult(
        workload=workload,
        assignment=assignment,
        loss_abs=loss_abs,
        loss_rel=loss_rel,
        time_abs_seconds=trace.total_seconds,
        time_rel=time_rel,
        status=trace.status,
        layer=trace.layer,
        choice_tag=_choice_tag(assignment),
        seed=config.seed,
        epochs=config.epochs,
        counters=dict(counters),
    ), trace


# ---------------------------------------------------------------------------
# report rendering


_SLOT_ORDER = ("sigm", "tanh", "relu")


def _row_sort_key(row: dict):
    a = row.get("assignment", {})
    return (row.get("workload", ""),) + tuple(a.get(s, "") for s in _SLOT_ORDER)


def fill_rels(rows: list) -> list:
    """Compute missing Rel columns from baseline rows present in the set."""
    by_key = {}
    for row in rows:
        key = (row["workload"], tuple(sorted(row["assignment"].items())),
               row.get("seed"), row.get("epochs"))
        by_key[key] = row
    out = []
    for row in rows:
        row = dict(row)
        base_a = baseline_assignment(row["assignment"])
        key = (row["workload"], tuple(sorted(base_a.items())),
               row.get("seed"), row.get("epochs"))
        base = by_key.get(key)
        if base is not None and row.get("status") == "converged":
            if row.get("loss_rel") is None and base.get("loss_abs"):
                if row.get("loss_abs") is not None:
                    row["loss_rel"] = row["loss_abs"] / base["loss_abs"]
            if row.get("time_rel") is None and base.get("time_abs_seconds"):
                row["time_rel"] = (row["time_abs_seconds"]
                                   / base["time_abs_seconds"])
        out.append(row)
    return out


def _fmt_loss_abs(row):
    if row["status"] == "diverged":
        return "∞"
    if row["status"] == "nan":
        return "NaN"
    return f"{row['loss_abs']:.4g}" if row.get("loss_abs") is not None else "-"


def _fmt_opt(value, fmt="{:.3f}"):
    return fmt.format(value) if value is not None else "-"


def render_table(rows: list) -> str:
    rows = sorted(fill_rels(rows), key=_row_sort_key)
    header = ["workload", "function(s)", "loss", "loss rel",
              "time (s)", "time rel", "choice"]
    body = []
    for row in rows:
        a = row["assignment"]
        fns = "/".join(a[s] for s in _SLOT_ORDER if s in a)
        body.append([
            row["workload"],
            fns,
            _fmt_loss_abs(row),
            _fmt_opt(row.get("loss_rel")),
            _fmt_opt(row.get("time_abs_seconds"), "{:.2f}"),
            "-" if row["status"] != "converged" else _fmt_opt(row.get("time_rel")),
            row.get("choice_tag") or "",
        ])
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body
              else len(header[i]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(r))))
    return "\n".join(lines) + "\n"


def render_json(rows: list) -> str:
    rows = sorted(fill_rels(rows), key=_row_sort_key)
    return json.dumps({"rows": rows}, sort_keys=True, indent=2) + "\n"


def render_csv(rows: list) -> str:
    rows = sorted(fill_rels(rows), key=_row_sort_key)
    cols = ["workload", "sigm", "tanh", "relu", "loss_abs", "loss_rel",
            "time_abs_seconds", "time_rel", "status", "layer", "choice_tag"]
    lines = [",".join(cols)]
    for row in rows:
        a = row["assignment"]
        vals = [row["workload"], a.get("sigm", ""), a.get("tanh", ""),
                a.get("relu", "")]
        for c in cols[4:]:
            v = row.get(c)
            vals.append("" if v is None else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"
