"""Exact baseline activations and their fast approximations.

Every function here is a pure scalar ``float -> float`` in f64, written so the
same source compiles unchanged under numba (see kernels.py) for benchmarking
and for element-wise use inside the NN engine.  Analytic derivatives are
hand-derived per family; piecewise functions use the right-hand one-sided
derivative at breakpoints, and each spec records its breakpoints so gradient
checks can exclude their neighborhoods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import ConfigError, EvaluationSingularity

_NAN = float("nan")


# ---------------------------------------------------------------------------
# exact baselines


def relu(x):
    """max(0, x) via a branch; the standard baseline."""
    return x if x > 0.0 else 0.0


def drelu(x):
    # right-hand convention at the breakpoint: relu'(0) = 1
    return 1.0 if x >= 0.0 else 0.0


def relu_sum(x):
    """Branch-free ReLU: (x + |x|) * 0.5.

    Equal to max(0, x) bit-for-bit in f64, except that x + |x| overflows to
    inf for x > ~8.99e307 where max stays finite.
    """
    return (x + abs(x)) * 0.5


def sigm(x):
    """Logistic sigmoid 1/(1+exp(-x)), sign-branched so exp never overflows."""
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def dsigm(x):
    if x >= 0.0:
        s = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        s = e / (1.0 + e)
    return s * (1.0 - s)


def tanh(x):
    return math.tanh(x)


def dtanh(x):
    t = math.tanh(x)
    return 1.0 - t * t


def identity(x):
    return x


def didentity(x):
    return 1.0


def nan_probe(x):
    # diagnostic: poisons every evaluation, exercising divergence handling
    return _NAN


def dnan_probe(x):
    return _NAN


# ---------------------------------------------------------------------------
# continued-fraction tanh


def tanh_cont(x, n):
    """tanh as a truncated continued fraction x/(1 + x^2/(3 + x^2/(5 + ...))).

    Truncated after n partial denominators 1, 3, 5, ..., 2n-1 and evaluated
    bottom-up.  All partial denominators are positive for real x, so no
    intermediate denominator can vanish; the singularity guard is contractual
    only.
    """
    if n < 1:
        raise ConfigError(f"continued-fraction depth must be >= 1, got {n}")
    x2 = x * x
    r = 2.0 * n - 1.0
    for i in range(n - 1, 0, -1):
        if r == 0.0:
            raise EvaluationSingularity("continued-fraction denominator hit zero", x=x)
        r = (2.0 * i - 1.0) + x2 / r
    if r == 0.0:
        raise EvaluationSingularity("continued-fraction denominator hit zero", x=x)
    return x / r


def dtanh_cont(x, n):
    """Derivative of tanh_cont via the chain rule through the recurrence.

    With r_i = (2i-1) + x^2/r_{i+1}:  dr_i = 2x/r_{i+1} - x^2 dr_{i+1}/r_{i+1}^2,
    and d(x/r_1) = 1/r_1 - x dr_1/r_1^2.
    """
    if n < 1:
        raise ConfigError(f"continued-fraction depth must be >= 1, got {n}")
    x2 = x * x
    r = 2.0 * n - 1.0
    dr = 0.0
    for i in range(n - 1, 0, -1):
        rn = r
        drn = dr
        r = (2.0 * i - 1.0) + x2 / rn
        dr = 2.0 * x / rn - x2 * drn / (rn * rn)
    return 1.0 / r - x * dr / (r * r)


def _make_tanh_cont(n):
    # guard-free specialization for a fixed depth (denominators provably > 0)
    depth = int(n)

    def f(x):
        x2 = x * x
        r = 2.0 * depth - 1.0
        for i in range(depth - 1, 0, -1):
            r = (2.0 * i - 1.0) + x2 / r
        return x / r

    def df(x):
        x2 = x * x
        r = 2.0 * depth - 1.0
        dr = 0.0
        for i in range(depth - 1, 0, -1):
            rn = r
            drn = dr
            r = (2.0 * i - 1.0) + x2 / rn
            dr = 2.0 * x / rn - x2 * drn / (rn * rn)
        return 1.0 / r - x * dr / (r * r)

    return f, df


# ---------------------------------------------------------------------------
# polynomial / rational evaluation


def poly_eval(coeffs, x):
    """Horner evaluation of sum a_i x^i; coeffs may be PolyCoeffs or a sequence."""
    a = getattr(coeffs, "a", coeffs)
    if len(a) == 0:
        raise ConfigError("polynomial coefficients must be nonempty")
    r = 0.0
    for c in reversed(a):
        r = r * x + c
    return r


def pade_eval(coeffs, x):
    """Horner numerator / Horner denominator for a rational approximant."""
    num = getattr(coeffs, "num", None)
    den = getattr(coeffs, "den", None)
    if num is None or den is None:
        num, den = coeffs
    p = 0.0
    for c in reversed(num):
        p = p * x + c
    q = 0.0
    for c in reversed(den):
        q = q * x + c
    if q == 0.0:
        raise EvaluationSingularity(f"rational denominator is zero at x={x!r}", x=x)
    return p / q


def _poly_deriv_coeffs(a):
    return tuple(i * a[i] for i in range(1, len(a)))


def _make_poly(a):
    arev = tuple(reversed([float(c) for c in a]))
    drev = tuple(reversed(_poly_deriv_coeffs([float(c) for c in a]))) or (0.0,)

    def f(x):
        r = 0.0
        for c in arev:
            r = r * x + c
        return r

    def df(x):
        r = 0.0
        for c in drev:
            r = r * x + c
        return r

    return f, df


def _make_pade(num, den):
    nrev = tuple(reversed([float(c) for c in num]))
    drev = tuple(reversed([float(c) for c in den]))
    dnrev = tuple(reversed(_poly_deriv_coeffs([float(c) for c in num]))) or (0.0,)
    ddrev = tuple(reversed(_poly_deriv_coeffs([float(c) for c in den]))) or (0.0,)

    def f(x):
        p = 0.0
        for c in nrev:
            p = p * x + c
        q = 0.0
        for c in drev:
            q = q * x + c
        return p / q

    def df(x):
        p = 0.0
        for c in nrev:
            p = p * x + c
        q = 0.0
        for c in drev:
            q = q * x + c
        dp = 0.0
        for c in dnrev:
            dp = dp * x + c
        dq = 0.0
        for c in ddrev:
            dq = dq * x + c
        return (dp * q - p * dq) / (q * q)

    return f, df


def _make_pade_safe(num, den, freeze):
    """Benchmark-facing safe rational: input frozen at +/-freeze, output
    clamped to [-1, 1] everywhere.  Derivative is 0 wherever the clamp or
    freeze is binding (right-hand convention at the breakpoints)."""
    raw_f, raw_df = _make_pade(num, den)
    nrev = tuple(reversed([float(c) for c in num]))
    drev = tuple(reversed([float(c) for c in den]))
    dnrev = tuple(reversed(_poly_deriv_coeffs([float(c) for c in num]))) or (0.0,)
    ddrev = tuple(reversed(_poly_deriv_coeffs([float(c) for c in den]))) or (0.0,)
    hi = float(freeze)

    def f(x):
        if x > hi:
            x = hi
        elif x < -hi:
            x = -hi
        p = 0.0
        for c in nrev:
            p = p * x + c
        q = 0.0
        for c in drev:
            q = q * x + c
        r = p / q
        if r > 1.0:
            return 1.0
        if r < -1.0:
            return -1.0
        return r

    def df(x):
        if x >= hi or x < -hi:
            return 0.0
        p = 0.0
        for c in nrev:
            p = p * x + c
        q = 0.0
        for c in drev:
            q = q * x + c
        r = p / q
        if r >= 1.0 or r <= -1.0:
            return 0.0
        dp = 0.0
        for c in dnrev:
            dp = dp * x + c
        dq = 0.0
        for c in ddrev:
            dq = dq * x + c
        return (dp * q - p * dq) / (q * q)

    return f, df


# ---------------------------------------------------------------------------
# serpentine


def serp(x):
    """Serpentine curve 2x/(x^2+4); odd, peaks at +/-0.5, denominator >= 4."""
    return 2.0 * x / (x * x + 4.0)


def dserp(x):
    q = x * x + 4.0
    return (8.0 - 2.0 * x * x) / (q * q)


def serp_clamp(x):
    """serp on [-2, 2], hard -1/+1 outside.

    The literal clamp jumps from +/-0.5 to +/-1 at |x| = 2; the discontinuity
    is intentional and recorded as a breakpoint.
    """
    if x > 2.0:
        return 1.0
    if x < -2.0:
        return -1.0
    return 2.0 * x / (x * x + 4.0)


def dserp_clamp(x):
    # right-hand convention: at x=2 the right side is the constant branch;
    # at x=-2 the right side is serp, whose derivative there is 0 anyway
    if x >= 2.0 or x < -2.0:
        return 0.0
    q = x * x + 4.0
    return (8.0 - 2.0 * x * x) / (q * q)


# ---------------------------------------------------------------------------
# fast exponential product family


def _check_fastexp_n(n):
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError(f"fast-exp n must be an integer power of two >= 2, got {n!r}")
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigError(f"fast-exp n must be an integer power of two >= 2, got {n}")


def exp_fast(x, n):
    """exp(x) ~ (1 + x/n)^n computed with exactly lg2(n) squarings.

    n must be a power of two so the repeated-squaring schedule is exact.
    """
    _check_fastexp_n(n)
    y = 1.0 + x / n
    for _ in range(n.bit_length() - 1):
        y = y * y
    return y


def dexp_fast(x, n):
    """d/dx (1+x/n)^n = (1+x/n)^(n-1), via a (power, derivative) pair so no
    division by y is needed (y can be 0 at x = -n)."""
    _check_fastexp_n(n)
    y = 1.0 + x / n
    p = y
    q = 1.0
    for _ in range(n.bit_length() - 1):
        q = 2.0 * p * q
        p = p * p
    # p = y^n, q = n*y^(n-1)
    return q / n


def sigm_fastexp(x, n):
    """1/(1 + exp_fast(-x, n))."""
    _check_fastexp_n(n)
    y = 1.0 - x / n
    for _ in range(n.bit_length() - 1):
        y = y * y
    return 1.0 / (1.0 + y)


def _make_sigm_fastexp(n):
    _check_fastexp_n(n)
    nf = float(n)
    k = n.bit_length() - 1

    def f(x):
        y = 1.0 - x / nf
        for _ in range(k):
            y = y * y
        return 1.0 / (1.0 + y)

    def df(x):
        # chain rule: d sigm_fastexp/dx = g'(-x) / (1 + g(-x))^2 with
        # g(u) = (1+u/n)^n, g'(u) = (1+u/n)^(n-1) = (n*y^(n-1))/n
        y = 1.0 - x / nf
        p = y
        q = 1.0
        for _ in range(k):
            q = 2.0 * p * q
            p = p * p
        d = 1.0 + p
        return (q / nf) / (d * d)

    return f, df


# ---------------------------------------------------------------------------
# activation specs and the catalog


@dataclass(frozen=True)
class Safety:
    """safe = usable for any finite input; ranged = valid on [lo, hi] only."""

    kind: str  # "safe" | "ranged"
    lo: float | None = None
    hi: float | None = None

    @staticmethod
    def safe() -> "Safety":
        return Safety("safe")

    @staticmethod
    def ranged(lo: float, hi: float) -> "Safety":
        return Safety("ranged", lo, hi)

    def describe(self) -> str:
        if self.kind == "safe":
            return "safe"
        return f"ranged[{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class EvalPrecision:
    """f32 on the benchmark path, f64 for fitting and oracle comparison."""

    mode: str = "f32"

    def __post_init__(self):
        if self.mode not in ("f32", "f64"):
            raise ConfigError(f"precision mode must be f32 or f64, got {self.mode!r}")


@dataclass(frozen=True)
class ActivationSpec:
    """A named scalar activation: value, analytic derivative, classification.

    breakpoints lists the x where the function is only piecewise smooth;
    gradient checks exclude a 1e-3 neighborhood of each. grad_exempt marks
    functions whose forward is piecewise constant (table lookups) where a
    finite-difference check is meaningless.  listed controls whether the name
    appears in the default catalog listing (diagnostics stay resolvable but
    unlisted).
    """

    name: str
    kind: str
    safety: Safety
    fn: Callable[[float], float]
    deriv: Callable[[float], float]
    params: dict = field(default_factory=dict)
    replaces: str | None = None
    breakpoints: tuple = ()
    grad_exempt: bool = False
    listed: bool = True

    def __call__(self, x: float) -> float:
        return self.fn(x)


def derivative(spec: ActivationSpec, x: float) -> float:
    """Analytic derivative of an activation's value function at x."""
    return spec.deriv(x)


_KINDS = {
    "exact",
    "continued_fraction",
    "taylor",
    "pade",
    "fastexp",
    "serpentine",
    "serpentine_clamped",
    "relu_sum",
    "comparator",
    "diagnostic",
}

FIT_RANGE = (-5.5, 5.5)
VALIDATION_RANGE = (-5.0, 5.0)

_CATALOG: dict | None = None


def _bisect_crossings(f, lo, hi, target, n_scan=20000, iters=80):
    """x values in [lo, hi] where f crosses the given target level."""
    xs = [lo + (hi - lo) * i / n_scan for i in range(n_scan + 1)]
    out = []
    prev_x = xs[0]
    prev_s = f(prev_x) - target
    for x in xs[1:]:
        s = f(x) - target
        if (prev_s < 0.0) != (s < 0.0):
            a, b, fa = prev_x, x, prev_s
            for _ in range(iters):
                m = 0.5 * (a + b)
                fm = f(m) - target
                if (fa < 0.0) != (fm < 0.0):
                    b = m
                else:
                    a, fa = m, fm
            out.append(0.5 * (a + b))
        prev_x, prev_s = x, s
    return out


def _load_shipped(name):
    from . import fitting

    return fitting.load_shipped_coeffs(name)


def _build_catalog() -> dict:
    from . import comparators

    specs = []

    def add(spec):
        if spec.kind not in _KINDS:
            raise ConfigError(f"unknown activation kind {spec.kind!r}")
        specs.append(spec)

    add(ActivationSpec("relu", "exact", Safety.safe(), relu, drelu,
                       breakpoints=(0.0,)))
    add(ActivationSpec("sigm", "exact", Safety.safe(), sigm, dsigm))
    add(ActivationSpec("tanh", "exact", Safety.safe(), tanh, dtanh))
    add(ActivationSpec("relu_sum", "relu_sum", Safety.safe(), relu_sum, drelu,
                       replaces="relu", breakpoints=(0.0,), listed=False))

    f, df = _make_tanh_cont(4)
    add(ActivationSpec("tanh_cont_4", "continued_fraction",
                       Safety.ranged(*FIT_RANGE), f, df,
                       params={"n": 4}, replaces="tanh"))

    add(ActivationSpec("serp", "serpentine", Safety.ranged(*FIT_RANGE),
                       serp, dserp, replaces="tanh"))
    add(ActivationSpec("serp_clamp", "serpentine_clamped", Safety.safe(),
                       serp_clamp, dserp_clamp, replaces="tanh",
                       breakpoints=(-2.0, 2.0)))

    for n in (2, 512):
        f, df = _make_sigm_fastexp(n)
        safety = Safety.safe() if n == 512 else Safety.ranged(*FIT_RANGE)
        add(ActivationSpec(f"sigm_fastexp_{n}", "fastexp", safety, f, df,
                           params={"n": n}, replaces="sigm"))

    # fitted approximants from the shipped coefficient files
    tt9 = _load_shipped("tanh_taylor_9")
    f, df = _make_poly(tt9.a)
    add(ActivationSpec("tanh_taylor_9", "taylor", Safety.ranged(*FIT_RANGE),
                       f, df, params={"order": 9, "coeffs": "tanh_taylor_9"},
                       replaces="tanh"))

    st9 = _load_shipped("sigm_taylor_9")
    f, df = _make_poly(st9.a)
    add(ActivationSpec("sigm_taylor_9", "taylor", Safety.ranged(*FIT_RANGE),
                       f, df, params={"order": 9, "coeffs": "sigm_taylor_9"},
                       replaces="sigm"))

    tp44 = _load_shipped("tanh_pade_4_4")
    raw_f, raw_df = _make_pade(tp44.num, tp44.den)
    add(ActivationSpec("tanh_pade_4_4_raw", "pade", Safety.ranged(*FIT_RANGE),
                       raw_f, raw_df,
                       params={"orders": (4, 4), "coeffs": "tanh_pade_4_4"},
                       replaces="tanh", listed=False))

    # the safe variant clamps output to [-1,1]; with the shipped fit the raw
    # rational slightly exceeds 1 inside the fit range, so the clamp engages
    # on interior bands whose edges are genuine breakpoints
    f, df = _make_pade_safe(tp44.num, tp44.den, FIT_RANGE[1])
    crossings = _bisect_crossings(raw_f, 0.0, FIT_RANGE[1], 1.0)
    bps = tuple(sorted({-c for c in crossings} | set(crossings)
                       | {-FIT_RANGE[1], FIT_RANGE[1]}))
    add(ActivationSpec("tanh_pade_4_4", "pade", Safety.safe(), f, df,
                       params={"orders": (4, 4), "coeffs": "tanh_pade_4_4"},
                       replaces="tanh", breakpoints=bps))

    sp44 = _load_shipped("sigm_pade_4_4")
    f, df = _make_pade(sp44.num, sp44.den)
    add(ActivationSpec("sigm_pade_4_4", "pade", Safety.ranged(*FIT_RANGE),
                       f, df, params={"orders": (4, 4), "coeffs": "sigm_pade_4_4"},
                       replaces="sigm"))

    add(ActivationSpec("ultra_fast_sigmoid", "comparator", Safety.safe(),
                       comparators.ultra_fast_sigmoid,
                       comparators.dultra_fast_sigmoid,
                       replaces="sigm",
                       breakpoints=comparators.UFS_BREAKPOINTS))

    table = comparators.default_table()
    f, df = comparators.make_w2v_fns(table)
    add(ActivationSpec("word2vec", "comparator", Safety.safe(), f, df,
                       params={"table_size": table.table_size,
                               "max_exp": table.max_exp},
                       replaces="sigm", grad_exempt=True))

    add(ActivationSpec("identity", "diagnostic", Safety.safe(),
                       identity, didentity, listed=False))
    # empty declared domain: the probe never claims finiteness anywhere
    add(ActivationSpec("nan_probe", "diagnostic",
                       Safety.ranged(math.inf, -math.inf),
                       nan_probe, dnan_probe, grad_exempt=True, listed=False))

    cat = {}
    for s in specs:
        if s.name in cat:
            raise ConfigError(f"duplicate catalog name {s.name!r}")
        cat[s.name] = s
    return cat


def catalog(include_unlisted: bool = False) -> dict:
    """Name -> ActivationSpec mapping; copy, safe to mutate."""
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _build_catalog()
    if include_unlisted:
        return dict(_CATALOG)
    return {k: v for k, v in _CATALOG.items() if v.listed}


def catalog_names(include_unlisted: bool = False) -> list:
    return sorted(catalog(include_unlisted))


def get_activation(name: str) -> ActivationSpec:
    """Resolve a catalog entry by its exact name (diagnostics included)."""
    cat = catalog(include_unlisted=True)
    if name not in cat:
        known = ", ".join(sorted(cat))
        raise ConfigError(f"unknown activation {name!r}; known names: {known}")
    return cat[name]
