import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from usfft.freq import (CandidateGrid, FormatError, FrequencySet, cross_intersect, nnz_partition,
                        project, union)


def fs(*rows, d=None):
    return FrequencySet(list(rows), dimension=d)


freq_sets = st.integers(1, 4).flatmap(
    lambda d: st.lists(st.tuples(*[st.integers(-6, 6)] * d), max_size=25).map(
        lambda rows: FrequencySet(rows, dimension=d)))


class TestFrequencySet:
    def test_dedupes_in_insertion_order(self):
        s = fs((1, 2), (0, 0), (1, 2), (3, 4))
        assert list(s) == [(1, 2), (0, 0), (3, 4)]
        assert s.index((3, 4)) == 2

    def test_membership_and_subset(self):
        s = fs((1, 2), (3, 2))
        assert (3, 2) in s and (2, 3) not in s
        assert fs((3, 2)).issubset(s)
        assert not fs((0, 0)).issubset(s)

    def test_indices_of(self):
        s = fs((1, 2), (3, 2), (0, 0))
        assert s.indices_of(fs((0, 0), (1, 2))).tolist() == [2, 0]

    def test_equality_ignores_order(self):
        assert fs((1, 0), (0, 1)) == fs((0, 1), (1, 0))

    def test_empty_needs_dimension(self):
        assert len(FrequencySet([], dimension=3)) == 0
        assert FrequencySet([], dimension=3).dimension == 3

    def test_text_round_trip(self):
        s = fs((-3, 0, 7), (1, 1, 1))
        assert FrequencySet.from_text(s.to_text()) == s

    def test_bad_text_names_line(self):
        with pytest.raises(FormatError, match="line"):
            FrequencySet.from_text("d=2 n=2\n1,2\n1,x\n")

    @given(freq_sets)
    def test_sorted_is_lexicographic(self, s):
        rows = [tuple(r) for r in s.sorted()]
        assert rows == sorted(rows)


class TestProject:
    def test_examples(self):
        s = fs((1, 2), (3, 2))
        assert project(s, (2,)) == fs((2,))
        assert project(s, (1, 2)) == s
        assert project(fs((0, 0)), (1,)) == fs((0,))

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            project(fs((1, 2)), (3,))

    @given(freq_sets)
    def test_matches_tuple_projection(self, s):
        expected = {(k[0],) for k in s}
        assert set(project(s, (1,))) == expected


class TestCrossIntersect:
    def test_examples(self):
        g2 = CandidateGrid.symmetric(2, 2)
        out = cross_intersect(fs((0,), (1,)), fs((-1,), (0,)), g2)
        assert out == fs((0, -1), (0, 0), (1, -1), (1, 0))
        assert len(cross_intersect(fs((3,)), fs((0,)), g2)) == 0
        out = cross_intersect(fs((0, 0)), fs((2,)), CandidateGrid.symmetric(2, 3))
        assert out == fs((0, 0, 2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cross_intersect(fs((0, 0)), fs((1,)), CandidateGrid.symmetric(2, 2))

    @given(freq_sets, st.lists(st.integers(-6, 6), min_size=1, max_size=8, unique=True))
    def test_product_inside_grid(self, left, ks):
        grid = CandidateGrid.symmetric(4, left.dimension + 1)
        out = cross_intersect(left, FrequencySet([(k,) for k in ks], dimension=1), grid)
        inside = [tuple(r) + (k,) for r in left for k in ks
                  if all(abs(v) <= 4 for v in tuple(r) + (k,))]
        assert out == FrequencySet(inside, dimension=left.dimension + 1)


class TestPartition:
    def test_examples(self):
        parts = nnz_partition(fs((0, 0), (1, 0), (1, 2)))
        assert parts == {0: fs((0, 0)), 1: fs((1, 0)), 2: fs((1, 2))}
        assert nnz_partition(fs((0, 0, 0))) == {0: fs((0, 0, 0))}

    @given(freq_sets)
    def test_partition_is_exact(self, s):
        parts = nnz_partition(s)
        assert sum(len(p) for p in parts.values()) == len(s)
        for l, p in parts.items():
            assert all(sum(v != 0 for v in k) == l for k in p)


def test_union_keeps_first_occurrence():
    u = union([fs((1,)), fs((0,), (1,)), fs((2,))], dimension=1)
    assert list(u) == [(1,), (0,), (2,)]


def test_grid_mask():
    grid = CandidateGrid((-1, 0), (1, 3))
    arr = np.array([[0, 0], [2, 0], [1, 3], [-1, -1]])
    assert grid.mask(arr).tolist() == [True, False, True, False]
    assert grid.extent == 3 and grid.size(1) == 4
