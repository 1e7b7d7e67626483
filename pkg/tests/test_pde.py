import math
import time
from contextlib import nullcontext

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from usfft.pde import (Mesh, ModelError, PdeModel, Solver, as_blackbox, coeff_eval, diag_index,
                       ellipticity_bounds, sample_parameters, solve, write_snapshot, zeta)
from usfft.periodize import Periodization

TABLE_3 = {1: (0, 1, 1), 2: (1, 0, 1), 3: (0, 2, 2), 4: (1, 1, 2), 5: (2, 0, 2), 6: (0, 3, 3),
           7: (1, 2, 3), 8: (2, 1, 3), 9: (3, 0, 3), 10: (0, 4, 4), 11: (1, 3, 4), 12: (2, 2, 4),
           13: (3, 1, 4), 14: (4, 0, 4)}


def manufactured(x1, x2):
    return 2 * np.pi ** 2 * np.sin(np.pi * x1) * np.sin(np.pi * x2)


def test_zeta_matches_scipy():
    for mu in (1.1, 1.2, 2.0, 3.6, 7.0):
        assert zeta(mu) == pytest.approx(sp.zeta(mu), rel=1e-13)
    with pytest.raises(ValueError):
        zeta(1.0)


class TestDiagIndex:
    def test_table(self):
        for j, triple in TABLE_3.items():
            assert diag_index(j) == triple

    def test_errors(self):
        with pytest.raises(ValueError):
            diag_index(0)

    @given(st.integers(1, 10 ** 9))
    def test_covers_diagonals(self, j):
        m1, m2, k = diag_index(j)
        assert m1 + m2 == k and m1 >= 0 and m2 >= 0
        assert j == k * (k + 1) // 2 + m1


class TestCoefficient:
    @pytest.mark.parametrize("kind", ["periodic", "affine", "lognormal"])
    def test_unit_at_zero(self, kind):
        with pytest.warns(UserWarning) if kind == "lognormal" else nullcontext():
            model = PdeModel(kind, 4, mu=2.0, c=0.3)
        x = np.random.default_rng(0).random((20, 2))
        assert np.allclose(coeff_eval(model, x, np.zeros((1, 4))), 1.0)

    def test_ellipticity_constants(self):
        lo, hi = ellipticity_bounds(PdeModel("periodic", 5, 1.2, 0.4))
        assert abs(lo - 0.08690) < 5e-6 and abs(hi - 1.91310) < 5e-6
        lo, hi = ellipticity_bounds(PdeModel("periodic", 5, 3.6, 1.5))
        assert abs(lo - 0.31660) < 5e-6 and abs(hi - 1.68340) < 5e-6
        lo, hi = ellipticity_bounds(PdeModel("affine", 5, 2.0, 0.9 / sp.zeta(2.0)))
        assert lo == pytest.approx(0.1) and hi == pytest.approx(1.9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_bounds_hold(self, seed):
        rng = np.random.default_rng(seed)
        for kind in ("periodic", "affine"):
            model = PdeModel(kind, 6, 1.2 if kind == "periodic" else 2.0,
                             0.4 if kind == "periodic" else 0.5)
            lo, hi = ellipticity_bounds(model)
            a = coeff_eval(model, rng.random((50, 2)), sample_parameters(model, rng, 20))
            assert a.min() >= lo - 1e-12 and a.max() <= hi + 1e-12

    def test_validation(self):
        with pytest.raises(ModelError, match="c <"):
            PdeModel("periodic", 5, 1.2, 2.0)
        with pytest.raises(ModelError):
            PdeModel("affine", 5, 2.0, 1.0)
        with pytest.raises(ModelError):
            PdeModel("wave", 5)
        with pytest.raises(ModelError):
            PdeModel("periodic", 5, mu=1.0)
        with pytest.raises(ModelError):
            ellipticity_bounds(_lognormal())

    def test_parameter_samplers(self):
        rng = np.random.default_rng(0)
        y = sample_parameters(PdeModel("periodic", 3, 1.2, 0.4), rng, 1000)
        assert y.shape == (1000, 3) and np.all(np.abs(y) <= 0.5)
        y = sample_parameters(PdeModel("affine", 3, 2.0, 0.5), rng, 1000, Periodization.tent(0, 2))
        assert y.min() >= 0 and y.max() <= 2


class TestMesh:
    def test_numbering(self):
        mesh = Mesh(4)
        assert mesh.G == 9 and len(mesh.triangles) == 32
        assert np.allclose(mesh.nodes[:4], [[0.25, 0.25], [0.5, 0.25], [0.75, 0.25], [0.25, 0.5]])

    def test_stiffness_rows_sum_to_zero(self):
        local = Mesh(3).local_stiffness()
        assert np.allclose(local.sum(axis=2), 0)
        assert np.allclose(Mesh(3).areas().sum(), 1.0)

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            Mesh(1)


class TestSolver:
    def test_manufactured_convergence(self):
        model = PdeModel("periodic", 2, c=0.0, rhs=manufactured)
        t0 = time.perf_counter()
        errors = []
        for n in (8, 16, 32):
            mesh = Mesh(n)
            u = solve(model, mesh, np.zeros(2))
            exact = np.sin(np.pi * mesh.nodes[:, 0]) * np.sin(np.pi * mesh.nodes[:, 1])
            errors.append(np.abs(u - exact).max())
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 1.9)
        assert time.perf_counter() - t0 < 5

    def test_center_node(self):
        model = PdeModel("periodic", 2, c=0.0, rhs=manufactured)
        mesh = Mesh(16)
        centre = np.flatnonzero(np.all(mesh.nodes == 0.5, axis=1))[0]
        assert abs(solve(model, mesh, np.zeros(2))[centre] - 1.0) < 5 * mesh.h ** 2

    def test_batch_size_invariant(self):
        model = PdeModel("periodic", 5, 1.2, 0.4)
        solver = Solver(model, Mesh(8))
        y = sample_parameters(model, np.random.default_rng(0), 9)
        batch = solver.solve_serial(y)
        single = np.column_stack([solver.solve_serial(y[i:i + 1])[:, 0] for i in range(9)])
        assert np.array_equal(batch, single)

    def test_workers_bit_identical(self):
        model = PdeModel("periodic", 5, 1.2, 0.4)
        y = sample_parameters(model, np.random.default_rng(1), 12)
        serial = Solver(model, Mesh(8))(y)
        pooled = Solver(model, Mesh(8), workers=2)
        try:
            assert np.array_equal(serial, pooled(y))
        finally:
            pooled.close()

    def test_nonpositive_coefficient(self):
        # bypass the constructor check to get a coefficient that changes sign
        bad = PdeModel("periodic", 1, c=0.0)
        object.__setattr__(bad, "c", 3.0)
        with pytest.raises(ModelError, match="not positive"):
            solve(bad, Mesh(4), [-0.25])

    def test_lognormal_solves(self):
        assert np.all(np.isfinite(solve(_lognormal(), Mesh(4), np.ones(3))))


class TestBlackBoxAdapter:
    def test_matches_solve(self):
        model = PdeModel("periodic", 3, 1.2, 0.4)
        mesh = Mesh(6)
        bb = as_blackbox(model, mesh, Periodization.none())
        y = np.array([[0.1, -0.2, 0.3]])
        assert np.array_equal(bb.evaluate(y)[:, 0], solve(model, mesh, y[0]))

    def test_repeated_point(self):
        bb = as_blackbox(PdeModel("periodic", 3, 1.2, 0.4), Mesh(6))
        y = np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3]])
        out = bb.evaluate(y)
        assert bb.distinct == 1 and np.array_equal(out[:, 0], out[:, 1])

    def test_tent_inputs(self):
        model = PdeModel("affine", 2, 2.0, 0.5)
        mesh = Mesh(5)
        bb = as_blackbox(model, mesh, Periodization.tent())
        assert np.array_equal(bb.evaluate([[0.25, 0.5]])[:, 0], solve(model, mesh, [0.0, 1.0]))

    def test_pairing(self):
        with pytest.raises(ModelError):
            as_blackbox(PdeModel("periodic", 2, 1.2, 0.4), Mesh(4), Periodization.tent())


def test_snapshot(tmp_path):
    mesh = Mesh(3)
    write_snapshot(tmp_path / "u.csv", mesh, np.arange(4.0))
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,value" and len(lines) == 5
    assert lines[2].split(",")[2] == "1.0"


def _lognormal():
    with pytest.warns(UserWarning):
        return PdeModel("lognormal", 3)


def test_uniform_ellipticity_limits_are_strict():
    limit = math.sqrt(6) / zeta(2.0)
    PdeModel("periodic", 3, 2.0, limit * 0.999)
    with pytest.raises(ModelError):
        PdeModel("periodic", 3, 2.0, limit)
