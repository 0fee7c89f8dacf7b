import math

import numpy as np
import pytest

from fastact.activations import VALIDATION_RANGE, catalog


def fd_derivative(fn, x: float, h: float = 1e-4) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def gradient_grid_points(spec, n: int = 101, exclusion: float = 1e-3):
    """The shared derivative-check grid: n points over the validation range,
    skipping anything within `exclusion` of a piecewise breakpoint."""
    lo, hi = VALIDATION_RANGE
    pts = []
    for x in np.linspace(lo, hi, n):
        x = float(x)
        if any(abs(x - b) <= exclusion for b in spec.breakpoints):
            continue
        pts.append(x)
    return pts


def check_gradients(spec, rtol: float = 1e-5, atol: float = 1e-7):
    """Analytic derivative vs f64 central differences; returns worst case."""
    worst = (0.0, None)
    for x in gradient_grid_points(spec):
        ana = spec.deriv(x)
        num = fd_derivative(spec.fn, x)
        err = abs(ana - num)
        bound = atol + rtol * abs(num)
        rel = err / bound
        if rel > worst[0]:
            worst = (rel, x)
        assert err <= bound, (
            f"{spec.name} derivative off at x={x}: analytic={ana!r} "
            f"fd={num!r} err={err:.3e} bound={bound:.3e}")
    return worst


@pytest.fixture(scope="session")
def full_catalog():
    return catalog(include_unlisted=True)


@pytest.fixture(scope="session")
def listed_catalog():
    return catalog()


def assert_close(a, b, rel=1e-12, abs_tol=0.0):
    assert math.isclose(a, b, rel_tol=rel, abs_tol=abs_tol), (a, b)
