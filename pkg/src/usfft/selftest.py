"""Built-in checks: exact recovery of sparse polynomials and property suites."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .blackbox import TrigPolynomial
from .detect import DetectionConfig, usfft
from .freq import CandidateGrid, FrequencySet
from .lattice import build_cover, find_reconstructing, lattice_coefficients, nodes, pole_clearance, residues
from .periodize import (lognormal_forward, lognormal_inverse, tau1, tau1_inverse, tent_forward)

THETA = 1e-12


def random_sparse_polynomials(rng, d: int, N: int, G: int, size: int, pool: int):
    """``G`` polynomials drawing ``size`` frequencies each from a shared pool.

    Coefficient magnitudes lie in ``[1, 3)`` with random phases.
    """
    pts = np.unique(rng.integers(-N, N + 1, size=(pool, d)), axis=0)
    pts = pts[rng.permutation(len(pts))]
    coef = np.zeros((G, len(pts)), dtype=complex)
    for g in range(G):
        idx = rng.choice(len(pts), size=min(size, len(pts)), replace=False)
        coef[g, idx] = (1 + 2 * rng.random(idx.size)) * np.exp(2j * np.pi * rng.random(idx.size))
    used = np.abs(coef).max(axis=0) > 0
    return FrequencySet(pts[used], dimension=d), coef[:, used]


def recovery_error(app, fset: FrequencySet, coef: np.ndarray) -> float:
    """Largest coefficient error over ``fset`` and the extra detected frequencies (inf if any is missed)."""
    if not fset.issubset(app.frequencies):
        return float("inf")
    idx = app.frequencies.indices_of(fset)
    err = np.abs(app.coefficients[:, idx] - coef).max()
    rest = np.delete(app.coefficients, idx, axis=1)
    return float(max(err, np.abs(rest).max() if rest.size else 0.0))


def recovery_suite(seed: int = 0, trials: int = 10, inject_small: bool = False):
    rng = np.random.default_rng(seed)
    d, N = 4, 8
    passed, notes = 0, []
    for trial in range(trials):
        fset, coef = random_sparse_polynomials(rng, d, N, G=3, size=8, pool=16)
        full_set, full_coef = fset, coef
        if inject_small:
            extra = tuple(int(v) for v in rng.integers(-N, N + 1, size=d))
            while extra in fset:
                extra = tuple(int(v) for v in rng.integers(-N, N + 1, size=d))
            full_set = FrequencySet(list(fset) + [extra], dimension=d)
            full_coef = np.hstack([coef, np.zeros((coef.shape[0], 1))])
            full_coef[0, -1] = 0.5 * THETA
        cfg = DetectionConfig(CandidateGrid.symmetric(N, d), s=len(full_set), theta=THETA,
                              r=5, seed=int(rng.integers(2 ** 31)), algoA="single_r1l")
        app = usfft(TrigPolynomial(full_set, full_coef), cfg)
        if recovery_error(app, fset, coef) <= 1e-8:
            passed += 1
        if inject_small:
            seen = extra in app.frequencies
            notes.append(f"trial {trial}: injected coefficient {0.5 * THETA:g} at {extra} "
                         f"{'detected' if seen else 'missed (expected: below threshold)'}")
    return passed, trials, notes


def lattice_suite(seed: int = 0, fixtures: int = 50):
    rng = np.random.default_rng(seed)
    passed = total = 0
    for _ in range(fixtures):
        d = int(rng.integers(2, 7))
        n = int(rng.integers(1, 30))
        fset = FrequencySet(rng.integers(-16, 17, size=(n, d)))
        lat = find_reconstructing(fset, int(rng.integers(2 ** 31)))
        coef = rng.standard_normal(len(fset)) + 1j * rng.standard_normal(len(fset))
        vals = TrigPolynomial(fset, coef[None, :])(nodes(lat))[0]
        res = residues(fset, lat)
        ok = np.unique(res).size == res.size
        ok &= np.abs(lattice_coefficients(vals, fset, lat) - coef).max() <= 1e-10
        cover = build_cover(fset, int(rng.integers(2 ** 31)))
        for j, cl in enumerate(cover.lattices):
            r = residues(fset, cl)
            mine = r[cover.assignment == j]
            ok &= bool(np.all(np.isin(mine, r[cover.assignment != j], invert=True)))
            ok &= np.unique(mine).size == mine.size
        passed += bool(ok)
        total += 1
    for M in (3, 5, 7, 11, 13, 97):
        total += 1
        grid = np.arange(1, 32 * M) / (64 * M * M)
        dist = np.array([pole_clearance(M, x) for x in grid])
        passed += bool(abs(grid[dist.argmax()] - 1 / (4 * M)) <= 1 / (64 * M))
    return passed, total, []


def periodization_suite(seed: int = 0):
    rng = np.random.default_rng(seed)
    checks = []
    x = np.linspace(-0.5 + 1e-9, 0.5 - 1e-9, 10001)
    checks.append(np.abs(tau1_inverse(tau1(x)) - x).max() <= 1e-12)
    t = np.linspace(0, 0.5, 1001)
    checks.append(np.abs(tent_forward(0.5 - t, -1, 1) - tent_forward(0.5 + t, -1, 1)).max() <= 1e-15)
    # the inverse lands on the rising branch; compared on the torus side
    yt = 0.1 + np.linspace(0.0, 0.5, 1001)[1:-1]
    checks.append(np.abs(lognormal_inverse(lognormal_forward(yt, 0.1), 0.1) - yt).max() <= 1e-13)
    samples = np.sort(lognormal_forward(rng.random(100000), 1 / (4 * 4099)))
    ecdf = np.arange(1, samples.size + 1) / samples.size
    ks = np.max(np.maximum(ecdf - ndtr(samples), ndtr(samples) - (ecdf - 1 / samples.size)))
    checks.append(ks < 0.01)
    return int(sum(bool(c) for c in checks)), len(checks), []


def run_all(seed: int = 0, inject_small: bool = False):
    """Run every suite; returns ``(name, passed, total, notes)`` tuples."""
    out = []
    for name, fn in (("recovery", lambda: recovery_suite(seed, inject_small=inject_small)),
                     ("lattice", lambda: lattice_suite(seed)),
                     ("periodization", lambda: periodization_suite(seed))):
        passed, total, notes = fn()
        out.append((name, passed, total, notes))
    return out
