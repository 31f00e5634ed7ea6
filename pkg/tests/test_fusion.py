import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mulsedge.conformal import AdaptiveThreshold
from mulsedge.fusion import (Complex, FusedScore, FusionError, ModalityReport, Simple, ewc, fuse,
                             majority_vote, route, sssc)


def R(c, size=1, m=0):
    return ModalityReport(m, np.asarray(c, dtype=float), size)


def test_ewc_examples():
    f = ewc([R([1, 0]), R([1, 0])])
    np.testing.assert_array_equal(f.c_t, [2, 0])
    assert f.prediction == 0
    f = ewc([R([1, 0]), R([0, 1])])
    np.testing.assert_array_equal(f.c_t, [1, 1])
    assert f.prediction == 0
    f = ewc([R([0.8, 0.2]), R([0.3, 0.7])])
    np.testing.assert_allclose(f.c_t, [1.1, 0.9])
    assert f.prediction == 0


def test_ewc_class_mismatch():
    with pytest.raises(FusionError):
        ewc([R([1, 0]), R([1, 0, 0])])
    with pytest.raises(FusionError):
        ewc([])


def test_sssc_equal_sizes_is_mean():
    reps = [R([0.2, 0.8], 3), R([0.6, 0.4], 3)]
    np.testing.assert_allclose(sssc(reps).c_t, [0.4, 0.6], atol=1e-15)


def test_sssc_beta_two_scales_by_quarter():
    # raw weight |u|^-beta = 2^-2 for the size-2 set against 1 for the singleton
    f = sssc([R([1, 0], 2), R([0, 1], 1)], beta=2)
    np.testing.assert_allclose(f.c_t, [0.25 / 1.25, 1 / 1.25], atol=1e-15)


def test_sssc_hand_example():
    f = sssc([R([0.5, 0.5], 9), R([0.9, 0.1], 1)], beta=1)
    np.testing.assert_allclose(f.c_t, [0.86, 0.14], atol=1e-12)
    assert f.prediction == 0


def test_sssc_errors():
    with pytest.raises(FusionError):
        sssc([R([1, 0])], beta=0.5)
    with pytest.raises(FusionError):
        sssc([R([1, 0], 0)])
    with pytest.raises(FusionError):
        fuse([R([1, 0])], "median")


def test_sssc_large_beta_finite():
    f = sssc([R([0.1, 0.9], 1), R([0.9, 0.1], 5)], beta=1e6)
    np.testing.assert_allclose(f.c_t, [0.1, 0.9], atol=1e-12)


def test_majority_vote_examples():
    assert majority_vote([3, 3, 7]) == 3
    assert majority_vote([5]) == 5
    with pytest.raises(FusionError):
        majority_vote([])


def test_majority_vote_tie_is_fair():
    draws = [majority_vote([1, 2], np.random.default_rng(s)) for s in range(1000)]
    counts = [draws.count(1), draws.count(2)]
    assert sum(counts) == 1000
    assert stats.chisquare(counts).pvalue > 0.001


def test_route_examples():
    thr = AdaptiveThreshold(0.4983, 0.3, 0, "sssc")
    fused = FusedScore(np.array([0.0, 0.0, 0.0, 0.8745, 0.1255]), "sssc", 2, 1.0)
    assert route(fused, thr) == Simple(3)
    at = FusedScore(np.array([0.4983, 0.3, 0.2017]), "sssc", 2, 1.0)
    assert route(at, thr) == Simple(0)
    low = FusedScore(np.array([0.40, 0.35, 0.25]), "sssc", 2, 1.0)
    assert isinstance(route(low, thr), Complex)


def test_route_ewc_uses_normalised_confidence():
    thr = AdaptiveThreshold(0.6, 0.3, 0, "ewc")
    f = ewc([R([0.9, 0.1]), R([0.5, 0.5])])
    assert f.confidence == pytest.approx(0.7)
    assert route(f, thr) == Simple(0)


def test_route_combiner_mismatch():
    with pytest.raises(FusionError):
        route(ewc([R([1, 0])]), AdaptiveThreshold(0.5, 0.3, 0, "sssc"))


prob_st = st.integers(2, 8).flatmap(
    lambda k: st.lists(st.lists(st.floats(0.001, 1), min_size=k, max_size=k), min_size=1, max_size=5))


@settings(max_examples=300, deadline=None)
@given(prob_st, st.data())
def test_sssc_is_convex_combination(rows, data):
    c = [np.array(r) / sum(r) for r in rows]
    sizes = data.draw(st.lists(st.integers(1, len(c[0])), min_size=len(c), max_size=len(c)))
    beta = data.draw(st.floats(1, 10))
    f = sssc([R(ci, s) for ci, s in zip(c, sizes)], beta)
    assert abs(f.c_t.sum() - 1) < 1e-12
    assert np.all(f.c_t <= np.max(c, axis=0) + 1e-12)
    assert np.all(f.c_t >= np.min(c, axis=0) - 1e-12)


@settings(max_examples=300, deadline=None)
@given(prob_st)
def test_ewc_is_order_invariant(rows):
    reps = [R(r) for r in rows]
    np.testing.assert_allclose(ewc(reps).c_t, ewc(reps[::-1]).c_t, atol=1e-12)
