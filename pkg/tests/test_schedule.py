import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ulacert import schedule as S
from ulacert.errors import DomainError


def test_gamma_examples():
    assert S.gamma(S.Constant(0.1), 7) == 0.1
    assert S.gamma(S.PolynomialDecay(0.5, 1.0), 4) == 0.125
    assert S.gamma(S.Explicit((0.3, 0.2, 0.1)), 5) == 0.1


def test_partial_sums():
    assert S.partial_sum(S.Constant(0.1), 1, 10) == pytest.approx(1.0, rel=1e-14)
    assert S.partial_sum(S.PolynomialDecay(1, 1), 5, 3) == 0
    assert S.partial_sum(S.PolynomialDecay(1, 1), 1, 4) == pytest.approx(25 / 12, rel=1e-14)
    assert S.power_sum(S.Constant(0.1), 1, 10, 2) == pytest.approx(0.1, rel=1e-14)
    assert S.power_sum(S.Constant(0.1), 4, 3, 2) == 0
    assert S.power_sum(S.PolynomialDecay(1, 1), 1, 3, 3) == pytest.approx(1 + 1 / 8 + 1 / 27, rel=1e-14)


@pytest.mark.parametrize("a", [0.5, 1.0, 0.3])
def test_closed_form_windows_match_summation(a):
    s = S.PolynomialDecay(0.7, a)
    n, p = 10, 3_000_000
    direct = math.fsum(0.7 * np.arange(n, p + 1, dtype=float) ** -a)
    assert S.partial_sum(s, n, p) == pytest.approx(direct, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 400), st.integers(0, 400), st.integers(0, 400),
       st.floats(0.2, 1.0), st.floats(1e-3, 1.0))
def test_partial_sum_additive(n, a, b, expo, g1):
    s = S.PolynomialDecay(g1, expo)
    m, p = n + a, n + a + b
    whole = S.partial_sum(s, n, p)
    split = S.partial_sum(s, n, m) + S.partial_sum(s, m + 1, p)
    assert whole == pytest.approx(split, rel=1e-12, abs=1e-15)


def test_burnin_examples():
    b = S.burnin_split(S.Constant(0.1), 100, 0.5)
    assert b.n == 67 and not b.degenerate
    # scan: 67 is the smallest k with 0.5^(0.1 (100 - k)) > 0.1
    ok = [k for k in range(100) if 0.5 ** (0.1 * (100 - k)) > 0.1]
    assert ok[0] == 67
    assert S.burnin_split(S.Constant(0.1), 100, 0.5, "LogGamma").n == 2
    assert S.burnin_split(S.Constant(0.1), 1, 0.5).n == 0


def test_burnin_generic_matches_constant_path():
    s = S.Explicit((0.1,))
    for p in (10, 100, 1000):
        assert S.burnin_split(s, p, 0.5) == S.burnin_split(S.Constant(0.1), p, 0.5)


def test_schedule_validation():
    with pytest.raises(DomainError):
        S.Constant(0.0)
    with pytest.raises(DomainError):
        S.Explicit((0.1, 0.2))
    with pytest.raises(DomainError):
        S.PolynomialDecay(1.0, 1.5)
    with pytest.raises(DomainError):
        S.gamma(S.Constant(0.1), 0)


def test_spec_roundtrip():
    for s in (S.Constant(0.1), S.PolynomialDecay(0.5, 0.5), S.Explicit((0.3, 0.1))):
        assert S.schedule_from_spec(S.schedule_to_spec(s)) == s
