"""Reference competitor sigmoids: Theano's ultra_fast_sigmoid and the
Word2Vec lookup-table sigmoid.

Both are reimplemented as pure scalar functions against which the fastexp
family is compared.  The piecewise constants below are transcribed verbatim
from the Theano source and treated as external ground truth, not re-derived.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# ultra_fast_sigmoid works on the halved input u = x/2 and builds an odd
# curve z(u), mapped back through 0.5*(z+1):
#   |u| < 1.7        z = 1.5*u/(1+|u|), signed
#   1.7 <= |u| < 3   z = sign(u) * (UFS_MID_BASE + UFS_MID_SLOPE*(|u|-1.7))
#   |u| >= 3         z = sign(u) * UFS_PLATEAU
UFS_MID_BASE = 0.935409070603099
UFS_MID_SLOPE = 0.0458812946797165
UFS_PLATEAU = 0.99505475368673

# x-positions where the piecewise definition switches segment (u = x/2)
UFS_BREAKPOINTS = (-6.0, -3.4, 0.0, 3.4, 6.0)  # 0: the |u| seam


def ultra_fast_sigmoid(x):
    u = 0.5 * x
    a = -u if u < 0.0 else u
    if a < 1.7:
        z = 1.5 * a / (1.0 + a)
    elif a < 3.0:
        z = UFS_MID_BASE + UFS_MID_SLOPE * (a - 1.7)
    else:
        z = UFS_PLATEAU
    if u < 0.0:
        z = -z
    return 0.5 * (z + 1.0)


def dultra_fast_sigmoid(x):
    # per-segment analytic derivative; plateau is constant; the |u| factor
    # makes z' even in x so no sign handling is needed
    a = 0.5 * x
    if a < 0.0:
        a = -a
    if a < 1.7:
        da = 1.0 + a
        dz = 1.5 / (da * da)
    elif a < 3.0:
        dz = UFS_MID_SLOPE
    else:
        dz = 0.0
    return 0.25 * dz


# ---------------------------------------------------------------------------
# Word2Vec table sigmoid


@dataclass(frozen=True)
class LookupTable:
    """Precomputed sigmoid values over [-max_exp, max_exp]; out-of-range
    inputs clamp to 0/1."""

    values: np.ndarray
    max_exp: float

    @property
    def table_size(self) -> int:
        return int(self.values.shape[0])


def build_w2v_table(table_size: int = 1000, max_exp: float = 6.0) -> LookupTable:
    """Exact-sigmoid samples at each bucket's midpoint, computed exp-style
    as e/(e+1); midpoints keep the table symmetric and strictly monotone."""
    if table_size < 2:
        raise ConfigError(f"table_size must be >= 2, got {table_size}")
    if not max_exp > 0.0:
        raise ConfigError(f"max_exp must be positive, got {max_exp}")
    i = np.arange(table_size, dtype=np.float64)
    reps = -max_exp + 2.0 * max_exp * (i + 0.5) / table_size
    e = np.exp(reps)
    values = e / (e + 1.0)
    values.setflags(write=False)
    return LookupTable(values=values, max_exp=float(max_exp))


def w2v_sigmoid(x, table: LookupTable):
    """Bucketed sigmoid: index = floor((x+max_exp)*size/(2*max_exp)), with
    clamp-to-limits outside the covered range.

    The scale factor is folded into one constant first so this reference
    matches the compiled closures bit for bit at bucket boundaries."""
    size = table.table_size
    idx = int(math.floor((x + table.max_exp) * (size / (2.0 * table.max_exp))))
    if idx < 0:
        return 0.0
    if idx >= size:
        return 1.0
    return float(table.values[idx])


def dw2v_sigmoid(x, table: LookupTable):
    """Backprop rule: sigma*(1-sigma) of the looked-up output.  The true
    derivative is zero almost everywhere, which would stop all learning."""
    s = w2v_sigmoid(x, table)
    return s * (1.0 - s)


def make_w2v_fns(table: LookupTable):
    """Self-contained scalar closures over the table buffer (numba-friendly:
    the derivative repeats the lookup instead of calling the forward)."""
    values = table.values
    size = table.table_size
    scale = size / (2.0 * table.max_exp)
    max_exp = table.max_exp

    def f(x):
        idx = int(math.floor((x + max_exp) * scale))
        if idx < 0:
            return 0.0
        if idx >= size:
            return 1.0
        return values[idx]

    def df(x):
        idx = int(math.floor((x + max_exp) * scale))
        if idx < 0:
            s = 0.0
        elif idx >= size:
            s = 1.0
        else:
            s = values[idx]
        return s * (1.0 - s)

    return f, df


_DEFAULT_TABLE = None


def default_table() -> LookupTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = build_w2v_table()
    return _DEFAULT_TABLE


def dump_table(table: LookupTable, path, name: str = "word2vec") -> None:
    """Write the table in the coefficients file format (table: section)."""
    from .fitting import FORMAT_VERSION, _format_floats

    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"fastact-coeffs {FORMAT_VERSION} {name}\n")
        fh.write(f"max_exp: {table.max_exp!r}\n")
        fh.write(f"table: {_format_floats(table.values)}\n")
