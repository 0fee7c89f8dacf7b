"""Least-squares Taylor and Pade fitting plus coefficient certification and IO.

The rational fit uses the linearized formulation: minimize
sum_i (f(x_i) Q(x_i) - P(x_i))^2 with b0 fixed to 1, solved by orthogonal
factorization (numpy lstsq).  Error fields of the report always come from the
true nonlinear residual |f - P/Q|.  Everything here is f64 and deterministic:
identical config gives bit-identical coefficients.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from . import activations
from .errors import CoeffsParseError, ConfigError, FitFailure, PoleError

FORMAT_VERSION = "v1"

POLE_GRID_POINTS = 10001


@dataclass(frozen=True)
class FitConfig:
    range_lo: float = -5.5
    range_hi: float = 5.5
    sample_count: int = 5000
    target: str | Callable = "tanh"

    def __post_init__(self):
        if not self.range_lo < self.range_hi:
            raise ConfigError(
                f"fit range is empty: [{self.range_lo}, {self.range_hi}]")
        if self.sample_count < 2:
            raise ConfigError(f"sample_count must be >= 2, got {self.sample_count}")


@dataclass(frozen=True)
class FitReport:
    max_abs_error: float
    mean_abs_error: float
    residual_norm: float
    condition_estimate: float


@dataclass(frozen=True)
class PolyCoeffs:
    a: tuple
    report: FitReport | None = None

    def __post_init__(self):
        if len(self.a) == 0:
            raise ConfigError("polynomial coefficients must be nonempty")
        if not all(np.isfinite(self.a)):
            raise ConfigError("polynomial coefficients must be finite")

    @property
    def order(self) -> int:
        return len(self.a) - 1


@dataclass(frozen=True)
class RationalCoeffs:
    num: tuple
    den: tuple
    pole_free: bool = False
    report: FitReport | None = None

    def __post_init__(self):
        if len(self.num) == 0 or len(self.den) == 0:
            raise ConfigError("rational coefficients must be nonempty")
        if self.den[0] != 1.0:
            raise ConfigError("denominator must be normalized with den[0] = 1")
        if not (all(np.isfinite(self.num)) and all(np.isfinite(self.den))):
            raise ConfigError("rational coefficients must be finite")

    @property
    def orders(self) -> tuple:
        return (len(self.num) - 1, len(self.den) - 1)


_TARGETS = {
    "tanh": activations.tanh,
    "sigmoid": activations.sigm,
    "sigm": activations.sigm,
    "identity": activations.identity,
}


def resolve_target(target) -> Callable:
    if callable(target):
        return target
    if target in _TARGETS:
        return _TARGETS[target]
    try:
        return activations.get_activation(target).fn
    except ConfigError:
        raise ConfigError(f"unknown fit target {target!r}") from None


def sample_uniform(config: FitConfig) -> list:
    """sample_count (x, f(x)) pairs, x equally spaced including both endpoints."""
    f = resolve_target(config.target)
    xs = np.linspace(config.range_lo, config.range_hi, config.sample_count)
    return [(float(x), float(f(float(x)))) for x in xs]


def _as_arrays(samples):
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError("samples must be a sequence of (x, f(x)) pairs")
    return arr[:, 0], arr[:, 1]


def _lstsq(design, rhs, n_coeffs, what):
    sol, _, rank, sv = np.linalg.lstsq(design, rhs, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else float("inf")
    if rank < n_coeffs:
        raise FitFailure(
            f"{what} fit is rank-deficient (rank {rank} < {n_coeffs}, "
            f"condition estimate {cond:.3e})",
            condition_estimate=cond)
    return sol, cond


def fit_taylor(samples, n: int) -> tuple:
    """Ordinary least squares for sum_{i<=n} a_i x^i on the given samples."""
    if n < 0:
        raise ConfigError(f"polynomial order must be >= 0, got {n}")
    xs, fs = _as_arrays(samples)
    n_coeffs = n + 1
    if len(xs) < n_coeffs:
        raise ConfigError(f"need at least {n_coeffs} samples for order {n}")
    if len(xs) < 2 * n_coeffs:
        raise ConfigError(
            f"sample count {len(xs)} is below 2x coefficient count {n_coeffs}")
    design = np.vander(xs, n_coeffs, increasing=True)
    sol, cond = _lstsq(design, fs, n_coeffs, "taylor")
    resid = fs - design @ sol
    report = FitReport(
        max_abs_error=float(np.max(np.abs(resid))),
        mean_abs_error=float(np.mean(np.abs(resid))),
        residual_norm=float(np.linalg.norm(resid)),
        condition_estimate=cond,
    )
    return PolyCoeffs(tuple(float(c) for c in sol), report=report), report


def _rational_values(num, den, xs):
    p = np.polynomial.polynomial.polyval(xs, np.asarray(num))
    q = np.polynomial.polynomial.polyval(xs, np.asarray(den))
    return p, q


def fit_pade(samples, n: int, m: int, reweight: bool = False) -> tuple:
    """Linearized rational least squares with b0 = 1, then pole certification.

    With reweight=True a single extra pass divides each row by the previous
    denominator value (classic Sanathanan-Koerner step); the shipped
    coefficients use the plain linearized solve.
    """
    if n < 0 or m < 0:
        raise ConfigError(f"rational orders must be >= 0, got ({n}, {m})")
    xs, fs = _as_arrays(samples)
    n_coeffs = n + m + 1
    if len(xs) < n_coeffs:
        raise ConfigError(f"need at least {n_coeffs} samples for orders ({n}, {m})")
    if len(xs) < 2 * n_coeffs:
        raise ConfigError(
            f"sample count {len(xs)} is below 2x coefficient count {n_coeffs}")

    def solve(weights):
        cols = [xs ** i for i in range(n + 1)]
        cols += [-fs * xs ** j for j in range(1, m + 1)]
        design = np.stack(cols, axis=1)
        rhs = fs.copy()
        if weights is not None:
            design = design / weights[:, None]
            rhs = rhs / weights
        sol, cond = _lstsq(design, rhs, n_coeffs, "pade")
        num = tuple(float(c) for c in sol[: n + 1])
        den = (1.0,) + tuple(float(c) for c in sol[n + 1:])
        return num, den, cond

    num, den, cond = solve(None)
    if reweight:
        _, q = _rational_values(num, den, xs)
        num, den, cond = solve(np.abs(q))

    lo, hi = float(np.min(xs)), float(np.max(xs))
    ok, pole_at = _pole_scan(den, (lo, hi))
    if not ok:
        raise PoleError(
            f"fitted denominator changes sign near x={pole_at:.6g}; fit rejected",
            location=pole_at)

    p, q = _rational_values(num, den, xs)
    resid = fs - p / q
    report = FitReport(
        max_abs_error=float(np.max(np.abs(resid))),
        mean_abs_error=float(np.mean(np.abs(resid))),
        residual_norm=float(np.linalg.norm(resid)),
        condition_estimate=cond,
    )
    coeffs = RationalCoeffs(num, den, pole_free=True, report=report)
    return coeffs, report


def _pole_scan(den, rng):
    xs = np.linspace(rng[0], rng[1], POLE_GRID_POINTS)
    q = np.polynomial.polynomial.polyval(xs, np.asarray(den))
    if np.any(q == 0.0):
        return False, float(xs[np.argmin(np.abs(q))])
    signs = np.sign(q)
    flips = np.nonzero(signs[:-1] != signs[1:])[0]
    if len(flips):
        return False, float(xs[flips[0]])
    return True, None


def certify_pole_free(coeffs: RationalCoeffs, rng) -> bool:
    """True iff the denominator keeps one sign on a 10,001-point grid over rng."""
    ok, _ = _pole_scan(coeffs.den, rng)
    return ok


# ---------------------------------------------------------------------------
# coefficients file format
#
#   fastact-coeffs v1 <name>
#   poly: <repr floats>          (polynomial)  -- or --
#   num: <repr floats>
#   den: <repr floats>           (rational)
#   fit_report: max_abs_error=<r> mean_abs_error=<r> residual_norm=<r> condition_estimate=<r>
#
# repr() of a Python float round-trips bit-exactly, which gives the required
# lossless serialization.


def _format_floats(values):
    return " ".join(repr(float(v)) for v in values)


def _format_report(report: FitReport) -> str:
    return ("fit_report: "
            f"max_abs_error={report.max_abs_error!r} "
            f"mean_abs_error={report.mean_abs_error!r} "
            f"residual_norm={report.residual_norm!r} "
            f"condition_estimate={report.condition_estimate!r}")


def export_coeffs(coeffs, path, name: str = "unnamed") -> None:
    lines = [f"fastact-coeffs {FORMAT_VERSION} {name}"]
    if isinstance(coeffs, PolyCoeffs):
        lines.append(f"poly: {_format_floats(coeffs.a)}")
    elif isinstance(coeffs, RationalCoeffs):
        lines.append(f"num: {_format_floats(coeffs.num)}")
        lines.append(f"den: {_format_floats(coeffs.den)}")
    else:
        raise ConfigError(f"cannot export {type(coeffs).__name__}")
    if coeffs.report is not None:
        lines.append(_format_report(coeffs.report))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_floats(text, line_no):
    out = []
    for tok in text.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise CoeffsParseError(
                f"line {line_no}: bad float literal {tok!r}") from None
    return tuple(out)


def _parse_report(text, line_no):
    fields = {}
    for item in text.split():
        if "=" not in item:
            raise CoeffsParseError(f"line {line_no}: bad fit_report item {item!r}")
        key, val = item.split("=", 1)
        fields[key] = float(val)
    missing = {"max_abs_error", "mean_abs_error", "residual_norm",
               "condition_estimate"} - set(fields)
    if missing:
        raise CoeffsParseError(
            f"line {line_no}: fit_report missing field {sorted(missing)[0]!r}")
    return FitReport(**fields)


def parse_coeffs_text(text: str):
    lines = [ln.rstrip("\n") for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CoeffsParseError("empty coefficients file: missing header line")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "fastact-coeffs":
        raise CoeffsParseError("missing or malformed header line "
                               "(expected 'fastact-coeffs <version> <name>')")
    if head[1] != FORMAT_VERSION:
        raise CoeffsParseError(
            f"format version mismatch: file has {head[1]!r}, "
            f"this build reads {FORMAT_VERSION!r}")
    name = head[2]
    sections = {}
    report = None
    for i, ln in enumerate(lines[1:], start=2):
        if ":" not in ln:
            raise CoeffsParseError(f"line {i}: expected '<field>: ...'")
        key, _, rest = ln.partition(":")
        key = key.strip()
        if key == "fit_report":
            report = _parse_report(rest.strip(), i)
        elif key in ("poly", "num", "den", "table", "max_exp"):
            sections[key] = _parse_floats(rest.strip(), i)
        else:
            raise CoeffsParseError(f"line {i}: unknown field {key!r}")

    if "poly" in sections:
        return name, PolyCoeffs(sections["poly"], report=report)
    if "table" in sections:
        from .comparators import LookupTable

        max_exp = sections.get("max_exp", (6.0,))[0]
        values = np.array(sections["table"], dtype=np.float64)
        return name, LookupTable(values=values, max_exp=float(max_exp))
    if "num" in sections or "den" in sections:
        if "num" not in sections:
            raise CoeffsParseError("rational file missing 'num:' line")
        if "den" not in sections:
            raise CoeffsParseError("rational file missing 'den:' line")
        num, den = sections["num"], sections["den"]
        if den[0] != 1.0:
            if den[0] == 0.0:
                raise CoeffsParseError("den[0] is zero; cannot normalize")
            warnings.warn(
                f"coefficients file {name!r}: den[0] = {den[0]!r} != 1; "
                "normalizing by den[0]")
            num = tuple(c / den[0] for c in num)
            den = tuple(c / den[0] for c in den)
        return name, RationalCoeffs(num, den, report=report)
    raise CoeffsParseError("missing coefficients: need a 'poly:' line or "
                           "'num:'/'den:' lines")


def import_coeffs(path):
    """Read a coefficients file back; bit-exact inverse of export_coeffs."""
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    _, coeffs = parse_coeffs_text(text)
    return coeffs


def load_shipped_coeffs(name: str):
    """Load one of the canonical coefficient sets committed with the package."""
    ref = resources.files("fastact").joinpath(f"coeffs/{name}.txt")
    try:
        text = ref.read_text(encoding="ascii")
    except FileNotFoundError:
        raise ConfigError(f"no shipped coefficients named {name!r}") from None
    _, coeffs = parse_coeffs_text(text)
    return coeffs


CANONICAL_FITS = {
    "tanh_taylor_9": ("tanh", "taylor", (9,)),
    "sigm_taylor_9": ("sigmoid", "taylor", (9,)),
    "tanh_pade_4_4": ("tanh", "pade", (4, 4)),
    "sigm_pade_4_4": ("sigmoid", "pade", (4, 4)),
}


def fit_canonical(name: str):
    """Re-run the canonical fit for one shipped coefficient set."""
    if name not in CANONICAL_FITS:
        raise ConfigError(f"unknown canonical fit {name!r}")
    target, form, orders = CANONICAL_FITS[name]
    samples = sample_uniform(FitConfig(target=target))
    if form == "taylor":
        coeffs, _ = fit_taylor(samples, orders[0])
    else:
        coeffs, _ = fit_pade(samples, orders[0], orders[1])
    return coeffs
