import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from usfft.blackbox import BlackBoxError, CachedBlackBox, TrigPolynomial, row_hash


class Counting:
    def __init__(self, G=2):
        self.G = G
        self.calls = []

    def __call__(self, pts):
        self.calls.append(len(pts))
        s = pts.sum(axis=1)
        return np.vstack([s * (g + 1) for g in range(self.G)])


def test_shape_and_values():
    fn = Counting(3)
    bb = CachedBlackBox(fn, 2, 3)
    out = bb.evaluate([[0.1, 0.2], [0.3, 0.4]])
    assert out.shape == (3, 2)
    assert np.allclose(out[2], [0.9, 2.1])


def test_repeated_point_solved_once():
    fn = Counting()
    bb = CachedBlackBox(fn, 2, 2)
    out = bb.evaluate([[0.5, 0.5], [0.1, 0.2], [0.5, 0.5]])
    assert fn.calls == [2]
    assert np.array_equal(out[:, 0], out[:, 2])
    bb.evaluate([[0.1, 0.2]])
    assert fn.calls == [2] and bb.distinct == 2


def test_negative_zero_shares_key():
    fn = Counting()
    bb = CachedBlackBox(fn, 2, 2)
    bb.evaluate([[0.0, 0.3], [-0.0, 0.3]])
    assert bb.distinct == 1


def test_distinct_survives_eviction():
    fn = Counting(1)
    bb = CachedBlackBox(fn, 1, 1, cache_size=4)
    pts = np.arange(10, dtype=float)[:, None] / 10
    bb.evaluate(pts)
    bb.evaluate(pts)
    # only 4 values stay cached, the other 6 are solved again
    assert bb.distinct == 10
    assert bb.evaluations == 16


def test_deterministic():
    p = TrigPolynomial(np.array([[1, 0], [2, -1]]), np.array([[1.0, 2j]]))
    x = np.random.default_rng(0).random((50, 2))
    assert np.array_equal(p.blackbox().evaluate(x), p.blackbox().evaluate(x))


def test_failure_names_point():
    def fn(pts):
        if np.any(pts[:, 0] > 0.7):
            raise FloatingPointError("diverged")
        return pts.T[:1]

    bb = CachedBlackBox(fn, 2, 1)
    with pytest.raises(BlackBoxError) as info:
        bb.evaluate([[0.1, 0.1], [0.9, 0.2], [0.3, 0.3]])
    assert np.array_equal(info.value.point, [0.9, 0.2])


def test_wrong_shape_rejected():
    bb = CachedBlackBox(lambda p: np.zeros((3, len(p))), 2, 2)
    with pytest.raises(BlackBoxError, match="shape"):
        bb.evaluate([[0.1, 0.1]])
    with pytest.raises(ValueError):
        bb.evaluate(np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 40), st.just(3)), elements=st.sampled_from([0.0, 0.25, 0.5, 0.75])),
       st.integers(1, 16))
def test_cache_is_transparent(pts, cache_size):
    fn = Counting(2)
    cached = CachedBlackBox(fn, 3, 2, cache_size=cache_size)
    first = cached.evaluate(pts)
    again = cached.evaluate(pts[::-1])
    assert np.array_equal(first, fn(pts))
    assert np.array_equal(again, fn(pts[::-1]))
    assert cached.distinct == len(np.unique(pts, axis=0))


def test_row_hash_distinguishes_rows():
    pts = np.random.default_rng(1).random((10000, 4))
    assert np.unique(row_hash(pts)).size == 10000


def test_trig_polynomial():
    p = TrigPolynomial(np.array([[1, 0]]), np.array([[1.0]]))
    assert np.allclose(p(np.array([[0.25, 0.9]])), [[1j]])
