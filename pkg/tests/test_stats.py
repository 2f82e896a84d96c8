import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats as sps

from fairsynth.errors import DegenerateVarianceError
from fairsynth.stats import betainc, paired_t_test, t_sf_two_sided


def test_worked_example_differences_1_2_3():
    t, p = paired_t_test([1, 2, 3], [0, 0, 0])
    assert t == pytest.approx(2 / (1 / math.sqrt(3)), abs=1e-9)
    assert t == pytest.approx(3.4641, abs=1e-4)
    assert p == pytest.approx(0.0742, abs=2e-3)


def test_swap_negates_t_and_keeps_p():
    a, b = [0.3, 0.5, 0.2, 0.9], [0.1, 0.45, 0.3, 0.4]
    t1, p1 = paired_t_test(a, b)
    t2, p2 = paired_t_test(b, a)
    assert t2 == pytest.approx(-t1, abs=1e-12)
    assert p2 == pytest.approx(p1, abs=1e-12)


def test_equal_samples_are_degenerate():
    with pytest.raises(DegenerateVarianceError):
        paired_t_test([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    with pytest.raises(DegenerateVarianceError):
        paired_t_test([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])


def test_argument_errors():
    with pytest.raises(ValueError):
        paired_t_test([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_t_test([1.0, 2.0], [2.0])


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.05, 50), st.floats(0, 1))
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 40), st.integers(1, 200))
def test_two_sided_tail_matches_scipy(t, df):
    assert t_sf_two_sided(t, df) == pytest.approx(2 * sps.t.sf(abs(t), df), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=20))
def test_paired_test_matches_scipy(pairs):
    a, b = zip(*pairs)
    try:
        t, p = paired_t_test(a, b)
    except DegenerateVarianceError:
        return
    ref = sps.ttest_rel(a, b)
    assert t == pytest.approx(ref.statistic, rel=1e-6, abs=1e-9)
    assert p == pytest.approx(ref.pvalue, abs=1e-8)
