import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastact.activations import pade_eval, poly_eval
from fastact.errors import CoeffsParseError, ConfigError, FitFailure
from fastact.fitting import (
    CANONICAL_FITS,
    FitConfig,
    PolyCoeffs,
    RationalCoeffs,
    certify_pole_free,
    export_coeffs,
    fit_canonical,
    fit_pade,
    fit_taylor,
    import_coeffs,
    load_shipped_coeffs,
    parse_coeffs_text,
    sample_uniform,
)

nice_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False,
                        allow_infinity=False)


# ---------------------------------------------------------------------------
# config and sampling


def test_fit_config_defaults():
    c = FitConfig()
    assert (c.range_lo, c.range_hi) == (-5.5, 5.5)
    assert c.sample_count == 5000


def test_fit_config_rejects_empty_range():
    with pytest.raises(ConfigError, match="empty"):
        FitConfig(range_lo=0.0, range_hi=0.0)
    with pytest.raises(ConfigError):
        FitConfig(range_lo=2.0, range_hi=-2.0)


def test_fit_config_rejects_tiny_sample_count():
    with pytest.raises(ConfigError):
        FitConfig(sample_count=1)


def test_sample_uniform_includes_endpoints():
    c = FitConfig(range_lo=-1.0, range_hi=1.0, sample_count=11, target="tanh")
    samples = sample_uniform(c)
    assert len(samples) == 11
    assert samples[0][0] == -1.0
    assert samples[-1][0] == 1.0
    assert samples[5] == (0.0, 0.0)


def test_sample_uniform_unknown_target():
    with pytest.raises(ConfigError):
        sample_uniform(FitConfig(target="nosuchfunction"))


# ---------------------------------------------------------------------------
# taylor fits


def test_fit_taylor_recovers_polynomial():
    # data from an exact cubic is reproduced to solver precision
    coeffs = (0.5, -1.0, 0.25, 2.0)
    xs = np.linspace(-2, 2, 101)
    samples = [(float(x), poly_eval(coeffs, float(x))) for x in xs]
    fitted, report = fit_taylor(samples, 3)
    assert fitted.a == pytest.approx(coeffs, abs=1e-10)
    assert report.max_abs_error < 1e-10


def test_fit_taylor_requires_enough_samples():
    samples = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]
    with pytest.raises(ConfigError):
        fit_taylor(samples, 5)


def test_fit_taylor_rank_deficient():
    # all abscissae identical -> singular design matrix
    samples = [(1.0, 2.0)] * 50
    with pytest.raises(FitFailure):
        fit_taylor(samples, 3)


def test_fit_taylor_error_shrinks_with_order():
    samples = sample_uniform(FitConfig(target="tanh"))
    errs = [fit_taylor(samples, n)[1].max_abs_error for n in (3, 5, 7, 9)]
    assert errs == sorted(errs, reverse=True)


def test_fit_taylor_stable_under_sample_density():
    e_a = fit_taylor(sample_uniform(FitConfig(sample_count=4000)), 9)[1]
    e_b = fit_taylor(sample_uniform(FitConfig(sample_count=5000)), 9)[1]
    assert abs(e_a.max_abs_error - e_b.max_abs_error) < 0.1 * e_b.max_abs_error


# ---------------------------------------------------------------------------
# pade fits


def test_fit_pade_recovers_rational():
    # f = (1 + 2x) / (1 + 0.5 x^2), exactly representable at orders (1, 2)
    num = (1.0, 2.0)
    den = (1.0, 0.0, 0.5)
    xs = np.linspace(-2, 2, 201)
    samples = [(float(x), pade_eval((num, den), float(x))) for x in xs]
    fitted, report = fit_pade(samples, 1, 2)
    assert fitted.num == pytest.approx(num, abs=1e-8)
    assert fitted.den == pytest.approx(den, abs=1e-8)
    assert report.max_abs_error < 1e-8
    assert fitted.pole_free


def test_fit_pade_denominator_normalized():
    samples = sample_uniform(FitConfig(target="tanh"))
    coeffs, _ = fit_pade(samples, 4, 4)
    assert coeffs.den[0] == 1.0


def test_fit_pade_reweight_pass_changes_little():
    samples = sample_uniform(FitConfig(target="tanh"))
    plain, rep_a = fit_pade(samples, 4, 4)
    rew, rep_b = fit_pade(samples, 4, 4, reweight=True)
    assert rep_b.max_abs_error < 2 * rep_a.max_abs_error
    assert rew.num != plain.num  # the pass does something


def test_canonical_fit_determinism():
    a = fit_canonical("tanh_pade_4_4")
    b = fit_canonical("tanh_pade_4_4")
    assert a.num == b.num and a.den == b.den


def test_canonical_fit_goldens():
    # frozen from the first oracle run of the shipped pipeline
    tp = fit_canonical("tanh_pade_4_4").report
    assert tp.max_abs_error == pytest.approx(0.004570435546744744, rel=1e-6)
    assert tp.max_abs_error < 0.05
    tt = fit_canonical("tanh_taylor_9").report
    assert tt.max_abs_error == pytest.approx(0.07242717890570399, rel=1e-6)
    assert tt.max_abs_error < 0.5
    sp = fit_canonical("sigm_pade_4_4").report
    assert sp.max_abs_error < 1e-4
    st9 = fit_canonical("sigm_taylor_9").report
    assert st9.max_abs_error < 0.01


def test_canonical_unknown_name():
    with pytest.raises(ConfigError):
        fit_canonical("tanh_pade_9_9")


def test_condition_estimate_positive():
    samples = sample_uniform(FitConfig(target="sigmoid"))
    _, report = fit_pade(samples, 4, 4)
    assert report.condition_estimate >= 1.0


# ---------------------------------------------------------------------------
# pole certification


def test_certify_shipped_sets_pole_free():
    for name in CANONICAL_FITS:
        coeffs = load_shipped_coeffs(name)
        if isinstance(coeffs, RationalCoeffs):
            assert certify_pole_free(coeffs, (-5.5, 5.5))


def test_certify_detects_pole():
    # 1 / (1 - x^2/4) has poles at +/-2
    bad = RationalCoeffs(num=(1.0,), den=(1.0, 0.0, -0.25))
    assert not certify_pole_free(bad, (-5.5, 5.5))
    assert certify_pole_free(bad, (-1.5, 1.5))


# ---------------------------------------------------------------------------
# coefficient files


@given(st.lists(nice_floats, min_size=1, max_size=12))
def test_poly_roundtrip_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("coeffs") / "poly.txt"
    coeffs = PolyCoeffs(tuple(values))
    export_coeffs(coeffs, path, name="roundtrip")
    back = import_coeffs(path)
    assert back.a == coeffs.a  # repr() round-trip is exact for f64


@given(st.lists(nice_floats, min_size=1, max_size=6),
       st.lists(nice_floats, min_size=0, max_size=5))
def test_rational_roundtrip_bit_exact(tmp_path_factory, num, den_rest):
    path = tmp_path_factory.mktemp("coeffs") / "rat.txt"
    coeffs = RationalCoeffs(tuple(num), (1.0, *den_rest))
    export_coeffs(coeffs, path, name="roundtrip")
    back = import_coeffs(path)
    assert back.num == coeffs.num
    assert back.den == coeffs.den


def test_shipped_files_parse_and_match_refit():
    shipped = load_shipped_coeffs("tanh_pade_4_4")
    refit = fit_canonical("tanh_pade_4_4")
    assert shipped.num == refit.num
    assert shipped.den == refit.den


def test_load_shipped_unknown():
    with pytest.raises(ConfigError):
        load_shipped_coeffs("nope")


def test_parse_rejects_version_mismatch():
    with pytest.raises(CoeffsParseError, match="version"):
        parse_coeffs_text("fastact-coeffs v9 thing\npoly: 1.0\n")


def test_parse_rejects_missing_header():
    with pytest.raises(CoeffsParseError):
        parse_coeffs_text("poly: 1.0 2.0\n")


def test_parse_truncated_report_names_field():
    text = ("fastact-coeffs v1 t\n"
            "poly: 1.0 2.0\n"
            "fit_report: max_abs_error=0.5 mean_abs_error=0.1\n")
    with pytest.raises(CoeffsParseError,
                       match="residual_norm|condition_estimate"):
        parse_coeffs_text(text)


def test_parse_denominator_not_normalized_warns():
    text = ("fastact-coeffs v1 t\n"
            "num: 2.0 4.0\n"
            "den: 2.0 1.0\n")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, coeffs = parse_coeffs_text(text)
    assert any("normaliz" in str(w.message) for w in caught)
    assert coeffs.den[0] == 1.0
    assert coeffs.num == (1.0, 2.0)
    assert coeffs.den == (1.0, 0.5)


def test_parse_zero_leading_denominator_fails():
    text = ("fastact-coeffs v1 t\n"
            "num: 1.0\n"
            "den: 0.0 1.0\n")
    with pytest.raises(CoeffsParseError):
        parse_coeffs_text(text)


def test_parse_rational_missing_denominator():
    text = "fastact-coeffs v1 t\nnum: 1.0 2.0\n"
    with pytest.raises(CoeffsParseError, match="den"):
        parse_coeffs_text(text)


def test_coeffs_validation():
    with pytest.raises((ConfigError, ValueError)):
        PolyCoeffs((float("nan"),))
    with pytest.raises((ConfigError, ValueError)):
        RationalCoeffs((1.0,), (2.0, 1.0))  # unnormalized construction


def test_fitted_pade_evaluates_close_to_tanh():
    coeffs = load_shipped_coeffs("tanh_pade_4_4")
    for x in (-5.0, -1.0, 0.0, 0.5, 3.0):
        got = pade_eval((coeffs.num, coeffs.den), x)
        assert got == pytest.approx(math.tanh(x), abs=0.005)
