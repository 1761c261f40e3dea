import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from streamwaic.exceptions import InsufficientSamplesError, NumericalError
from streamwaic.oracle import batch_log_mean_exp, naive_log_mean_exp, offline_waic, two_pass_variance


def test_hand_example():
    r = offline_waic([[math.log(1), math.log(3)]])
    assert r.lppd == pytest.approx(math.log(2), rel=1e-15)
    assert r.p_waic == pytest.approx(math.log(3) ** 2 / 2, rel=1e-15)
    assert r.waic == pytest.approx(-2 * (math.log(2) - math.log(3) ** 2 / 2), rel=1e-14)


def test_constant_matrix():
    c, M = -2.5, 4
    r = offline_waic(np.full((M, 9), c))
    assert r.lppd == pytest.approx(M * c, rel=1e-15) and r.p_waic == 0.0 and r.waic == pytest.approx(-2 * M * c)


def test_shifted_evaluation_survives_where_naive_underflows():
    row = [-1e4, -1e4 + 1]
    assert naive_log_mean_exp(row) == -math.inf
    assert batch_log_mean_exp(row) == pytest.approx(-1e4 + math.log((1 + math.e) / 2), rel=1e-15)


def test_two_pass_variance_small_case():
    assert two_pass_variance([1, 2, 3, 4]) == pytest.approx(5 / 3, rel=1e-15)


def test_bad_inputs():
    with pytest.raises(InsufficientSamplesError):
        offline_waic([[0.0]])
    with pytest.raises(NumericalError):
        offline_waic([[0.0, math.nan]])
    with pytest.raises(ValueError):
        offline_waic(np.zeros(3))


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(2, 80)), elements=st.floats(-1e4, 1e2)),
       st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_sample_order_does_not_change_result(h, rnd):
    perm = list(range(h.shape[1]))
    rnd.shuffle(perm)
    a, b = offline_waic(h), offline_waic(h[:, perm])
    assert a.to_dict() == b.to_dict()
