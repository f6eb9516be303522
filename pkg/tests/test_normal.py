"""Normal CDF and quantile against a 40-digit mpmath oracle."""

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcp1 import normal

mp.mp.dps = 40


def oracle_cdf(x):
    return float(mp.ncdf(mp.mpf(x)))


def oracle_ppf(p):
    return float(mp.sqrt(2) * mp.erfinv(2 * mp.mpf(p) - 1))


# [DERIVED] absolute error budget of 1e-12 on [-8, 8]
def test_cdf_matches_oracle_on_grid():
    xs = np.linspace(-8, 8, 1601)
    err = max(abs(normal.cdf(x) - oracle_cdf(x)) for x in xs)
    assert err < 1e-12


def test_cdf_scale_and_loc():
    assert normal.cdf(1.0, loc=0.5, scale=0.5) == pytest.approx(oracle_cdf(1.0), abs=1e-15)


@pytest.mark.parametrize("p", [1e-15, 1e-10, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5,
                               0.7, 0.9, 0.97575, 0.999, 1 - 1e-6, 1 - 1e-10])
def test_ppf_matches_oracle(p):
    want = oracle_ppf(p)
    assert normal.ppf(p) == pytest.approx(want, rel=1e-13, abs=1e-13)


def test_ppf_endpoints():
    assert normal.ppf(0.0) == -np.inf
    assert normal.ppf(1.0) == np.inf
    assert normal.ppf(0.5) == 0.0


def test_pdf_at_zero():
    assert normal.pdf(0.0) == pytest.approx(float(1 / mp.sqrt(2 * mp.pi)), rel=1e-15)


def test_array_inputs_keep_shape():
    p = np.array([[0.1, 0.5], [0.9, 0.99]])
    assert normal.ppf(p).shape == (2, 2)
    assert normal.cdf(normal.ppf(p)) == pytest.approx(p, abs=1e-15)


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_ppf_inverts_cdf(p):
    x = normal.ppf(p)
    # relative precision of p limits round trip in the upper tail
    assert normal.cdf(x) == pytest.approx(p, rel=1e-12, abs=1e-15)


@given(st.floats(min_value=-8, max_value=8), st.floats(min_value=-8, max_value=8))
def test_cdf_monotone(a, b):
    lo, hi = sorted((a, b))
    assert normal.cdf(lo) <= normal.cdf(hi)


@given(st.floats(min_value=-30, max_value=30))
def test_cdf_symmetry(x):
    assert normal.cdf(x) + normal.cdf(-x) == pytest.approx(1.0, abs=1e-15)
