import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usfft.blackbox import TrigPolynomial
from usfft.freq import FrequencySet
from usfft.lattice import (LatticeError, Rank1Lattice, build_cover, clear_of_poles, cover_coefficients,
                           delta_opt, find_reconstructing, is_prime, is_reconstructing,
                           lattice_coefficients, next_prime, nodes, pole_clearance, residues)


def fs(*rows):
    return FrequencySet(list(rows))


def test_primes():
    small = [n for n in range(100) if is_prime(n)]
    assert small[:8] == [2, 3, 5, 7, 11, 13, 17, 19] and len(small) == 25
    assert is_prime(2 ** 61 - 1) and not is_prime(2 ** 61 + 1)
    assert next_prime(4096) == 4099


class TestNodes:
    def test_examples(self):
        lat = Rank1Lattice((1, 3), 5)
        assert np.allclose(nodes(lat)[2], [0.4, 0.2])
        assert np.all(nodes(lat)[0] == 0)
        assert np.all(nodes(Rank1Lattice((0, 1), 3))[:, 0] == 0)

    def test_rejects_composite_size(self):
        with pytest.raises(ValueError):
            Rank1Lattice((1, 2), 6)

    def test_line_round_trip(self):
        lat = Rank1Lattice((4, 0, 11), 13)
        assert Rank1Lattice.from_line(lat.to_line()) == lat


class TestResidues:
    def test_examples(self):
        lat = Rank1Lattice((1, 2), 5)
        assert residues(fs((0, 0), (1, 0), (0, 1)), lat).tolist() == [0, 1, 2]
        assert residues(fs((5, 0)), lat).tolist() == [0]
        assert residues(fs((-1, 0)), lat).tolist() == [4]

    def test_reconstructing(self):
        lat = Rank1Lattice((1, 2), 5)
        assert is_reconstructing(fs((0, 0), (1, 0), (0, 1)), lat)
        assert not is_reconstructing(fs((0, 0), (5, 0)), lat)
        assert is_reconstructing(fs((7, -3)), Rank1Lattice((2, 9), 3))


class TestFindReconstructing:
    def test_singleton(self):
        s = fs((3, -1))
        assert is_reconstructing(s, find_reconstructing(s, 0))

    def test_random_six_dimensional(self):
        rng = np.random.default_rng(1)
        s = FrequencySet(rng.integers(-32, 33, size=(20, 6)))
        assert is_reconstructing(s, find_reconstructing(s, 2))

    def test_one_dimensional(self):
        s = FrequencySet([(k,) for k in range(8)])
        lat = find_reconstructing(s, 0)
        assert lat.M >= 17 and is_reconstructing(s, lat)

    def test_empty_and_budget(self):
        with pytest.raises(ValueError):
            find_reconstructing(FrequencySet([], dimension=2))
        s = FrequencySet(np.arange(40).reshape(20, 2))
        with pytest.raises(LatticeError):
            find_reconstructing(s, 0, max_size=30)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 40), st.integers(0, 2 ** 31))
    def test_always_injective(self, d, n, seed):
        rng = np.random.default_rng(seed)
        s = FrequencySet(rng.integers(-10, 11, size=(n, d)))
        assert is_reconstructing(s, find_reconstructing(s, seed))

    def test_avoids_poles(self):
        s = FrequencySet(np.random.default_rng(0).integers(-8, 9, size=(30, 3)))
        delta = delta_opt(4099)
        lat = find_reconstructing(s, 0, delta=delta)
        assert clear_of_poles(lat.M, delta)


class TestCover:
    def test_singleton(self):
        cover = build_cover(fs((1, 2)), 0)
        assert len(cover.lattices) == 1 and cover.assignment.tolist() == [0]

    def test_every_frequency_alias_free(self):
        rng = np.random.default_rng(3)
        s = FrequencySet(rng.integers(-16, 17, size=(100, 5)))
        cover = build_cover(s, 4)
        assert np.all(cover.assignment >= 0)
        for j, lat in enumerate(cover.lattices):
            res = residues(s, lat)
            counts = np.bincount(res, minlength=lat.M)
            assert np.all(counts[res[cover.assignment == j]] == 1)

    def test_cover_coefficients_exact(self):
        rng = np.random.default_rng(5)
        s = FrequencySet(rng.integers(-16, 17, size=(60, 4)))
        coef = rng.standard_normal((2, len(s))) + 1j * rng.standard_normal((2, len(s)))
        p = TrigPolynomial(s, coef)
        cover = build_cover(s, 6)
        blocks = [p(nodes(lat)) for lat in cover.lattices]
        assert np.abs(cover_coefficients(blocks, cover, s) - coef).max() < 1e-10
        zero = [np.zeros((2, lat.M)) for lat in cover.lattices]
        assert np.all(cover_coefficients(zero, cover, s) == 0)

    def test_missing_block(self):
        s = fs((0, 0), (1, 1), (2, -1))
        cover = build_cover(s, 0)
        with pytest.raises(ValueError):
            cover_coefficients([], cover, s)


class TestLatticeCoefficients:
    def test_orthogonality(self):
        lat = Rank1Lattice((1, 2), 5)
        s = fs((1, 0), (0, 1))
        vals = np.exp(2j * np.pi * nodes(lat)[:, 0])
        assert np.allclose(lattice_coefficients(vals, s, lat), [1, 0], atol=1e-14)
        assert np.all(lattice_coefficients(np.zeros(5), s, lat) == 0)

    def test_two_terms(self):
        s = fs((0, 0), (2, 1))
        lat = find_reconstructing(s, 0)
        x = nodes(lat)
        vals = 2 + 3 * np.exp(2j * np.pi * (2 * x[:, 0] + x[:, 1]))
        assert np.abs(lattice_coefficients(vals, s, lat) - [2, 3]).max() < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            lattice_coefficients(np.zeros(4), fs((0, 0)), Rank1Lattice((1, 2), 5))


class TestDelta:
    def test_values(self):
        assert delta_opt(5) == pytest.approx(0.05, abs=1e-15)
        assert delta_opt(3) == pytest.approx(1 / 12, abs=1e-15)
        with pytest.raises(ValueError):
            delta_opt(9)
        with pytest.raises(ValueError):
            delta_opt(2)

    def test_clearance_at_optimum(self):
        for M in (3, 7, 4099):
            assert pole_clearance(M, delta_opt(M)) == pytest.approx(1 / (4 * M), abs=1e-15)
