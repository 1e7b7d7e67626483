"""Random-coefficient diffusion problems on the unit square and a P1 solver.

Solves ``-div(a(x, y) grad u) = f`` on ``(0, 1)^2`` with zero Dirichlet
data for many parameter vectors ``y`` on one structured mesh. The
coefficient is taken at triangle centroids, so a batch of solves only
needs the centroid values of ``a``; the stiffness pattern, the load vector
and the coefficient-to-band map are built once per mesh.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.sparse import csr_matrix

from .blackbox import CachedBlackBox
from .periodize import LOGNORMAL_CLAMP, Periodization

log = logging.getLogger(__name__)

KINDS = ("periodic", "affine", "lognormal")
RHS = ("x2", "one", "trig")

# which periodization each model is sampled through
PERIODIZATION_FOR = {"periodic": "none", "affine": "tent", "lognormal": "lognormal"}


class ModelError(ValueError):
    """Invalid model parameters or a non-positive coefficient."""


class SolverError(ArithmeticError):
    """The linear solve failed."""


def zeta(mu: float, terms: int = 64) -> float:
    """Riemann zeta for real ``mu > 1``: partial sum plus Euler-Maclaurin tail."""
    if not mu > 1.0:
        raise ValueError(f"zeta needs mu > 1, got {mu}")
    n = float(terms)
    head = math.fsum(j ** -mu for j in range(1, terms))
    tail = n ** (1 - mu) / (mu - 1) + 0.5 * n ** -mu
    # Bernoulli corrections B2/2!, B4/4!, B6/6!
    rising = mu
    tail += rising * n ** (-mu - 1) / 12
    rising *= (mu + 1) * (mu + 2)
    tail -= rising * n ** (-mu - 3) / 720
    rising *= (mu + 3) * (mu + 4)
    tail += rising * n ** (-mu - 5) / 30240
    return head + tail


def diag_index(j: int) -> tuple[int, int, int]:
    """Diagonal enumeration ``j -> (m1, m2, k)`` of the pairs with ``m1 + m2 = k``."""
    if int(j) != j or j < 1:
        raise ValueError(f"diag_index needs an integer j >= 1, got {j}")
    j = int(j)
    k = (math.isqrt(8 * j + 1) - 1) // 2
    m1 = j - k * (k + 1) // 2
    return m1, k - m1, k


def _rhs_function(rhs) -> Callable:
    if callable(rhs):
        return rhs
    if rhs == "x2":
        return lambda x1, x2: x2
    if rhs == "one":
        return lambda x1, x2: np.ones_like(x1)
    if rhs == "trig":
        return lambda x1, x2: (np.sin(1.3 * np.pi * x1 + 3.4 * np.pi * x2)
                               * np.cos(4.3 * np.pi * x1 - 3.1 * np.pi * x2))
    raise ModelError(f"unknown right-hand side {rhs!r}; expected one of {RHS} or a callable")


@dataclass(frozen=True)
class PdeModel:
    """Coefficient family, stochastic dimension and right-hand side.

    ``mu`` and ``c`` are used by the periodic and affine families only.
    ``rhs`` is one of ``"x2"``, ``"one"``, ``"trig"`` or a callable
    ``f(x1, x2)``.
    """

    kind: str
    d_y: int
    mu: float = 2.0
    c: float = 0.0
    rhs: object = "x2"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if int(self.d_y) != self.d_y or self.d_y < 1:
            raise ModelError(f"d_y must be a positive integer, got {self.d_y}")
        _rhs_function(self.rhs)
        if self.kind == "lognormal":
            warnings.warn("the lognormal coefficient is neither uniformly elliptic nor bounded",
                          stacklevel=2)
            return
        if not self.mu > 1.0:
            raise ModelError(f"decay rate mu must exceed 1, got {self.mu}")
        if self.c < 0:
            raise ModelError(f"c must be non-negative, got {self.c}")
        z = zeta(self.mu)
        limit = math.sqrt(6.0) / z if self.kind == "periodic" else 1.0 / z
        if not self.c < limit:
            raise ModelError(f"{self.kind} model with mu={self.mu} needs c < {limit:.6g} "
                             f"for uniform ellipticity, got c={self.c}")

    def basis(self, x: np.ndarray) -> np.ndarray:
        """Spatial functions ``psi_j`` at points ``x`` of shape (P, 2); returns (d_y, P)."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        x1, x2 = x[:, 0], x[:, 1]
        j = np.arange(1, self.d_y + 1, dtype=float)[:, None]
        if self.kind == "periodic":
            return (self.c / math.sqrt(6.0)) * j ** -self.mu * np.sin(j * np.pi * x1) * np.sin(j * np.pi * x2)
        if self.kind == "affine":
            m = np.array([diag_index(i)[:2] for i in range(1, self.d_y + 1)], dtype=float)
            return (self.c * j ** -self.mu * np.cos(2 * np.pi * m[:, :1] * x1)
                    * np.cos(2 * np.pi * m[:, 1:] * x2))
        return np.sin(2 * np.pi * j * x1) * np.cos(2 * np.pi * (self.d_y + 1 - j) * x2) / j

    def features(self, y: np.ndarray) -> np.ndarray:
        """Map parameters to the factors multiplying ``psi_j``."""
        return np.sin(2 * np.pi * y) if self.kind == "periodic" else y

    def combine(self, terms: np.ndarray) -> np.ndarray:
        """Coefficient from the sum over ``j`` of ``features * psi``."""
        return np.exp(terms) if self.kind == "lognormal" else 1.0 + terms

    def rhs_function(self) -> Callable:
        return _rhs_function(self.rhs)


def coefficient_at(model: PdeModel, psi: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coefficient values for parameters ``y`` (B, d_y) given ``psi = model.basis(x)``.

    The sum over ``j`` is an explicit loop so every entry is computed by the
    same sequence of operations whatever the batch size.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] != model.d_y:
        raise ValueError(f"parameters have {y.shape[1]} components, model has d_y={model.d_y}")
    feat = model.features(y)
    acc = np.zeros((y.shape[0], psi.shape[1]))
    for j in range(model.d_y):
        acc += feat[:, j:j + 1] * psi[j]
    return model.combine(acc)


def coeff_eval(model: PdeModel, x, y) -> np.ndarray:
    """``a(x, y)`` for spatial points ``x`` (P, 2) and parameters ``y`` (B, d_y); shape (B, P)."""
    return coefficient_at(model, model.basis(x), y)


def ellipticity_bounds(model: PdeModel) -> tuple[float, float]:
    """Closed-form ``(a_min, a_max)`` of the periodic and affine families."""
    if model.kind == "lognormal":
        raise ModelError("the lognormal model has no ellipticity constants")
    spread = model.c * zeta(model.mu)
    if model.kind == "periodic":
        spread /= math.sqrt(6.0)
    return 1.0 - spread, 1.0 + spread


def sample_parameters(model: PdeModel, rng: np.random.Generator, n: int,
                      periodization: Periodization | None = None) -> np.ndarray:
    """Draw ``n`` parameter vectors from the model's distribution on its domain.

    Uniform on ``[-1/2, 1/2]`` (periodic), uniform on ``[alpha, beta]``
    (affine, default ``[-1, 1]``) or standard normal (lognormal).
    """
    shape = (int(n), model.d_y)
    if model.kind == "periodic":
        return rng.uniform(-0.5, 0.5, size=shape)
    if model.kind == "affine":
        alpha, beta = -1.0, 1.0
        if periodization is not None and periodization.kind == "tent":
            alpha, beta = periodization.alpha, periodization.beta
        return rng.uniform(alpha, beta, size=shape)
    return rng.standard_normal(size=shape)


# mesh --------------------------------------------------------------------------


class Mesh:
    """Uniform right-triangle mesh of the unit square with ``n`` cells per side.

    Interior node ``g`` sits at ``(i/n, j/n)`` with ``g = (j-1)(n-1) + (i-1)``,
    so ``x1`` varies fastest. Each cell is split along its rising diagonal.
    """

    def __init__(self, n: int):
        if int(n) != n or n < 2:
            raise ValueError(f"mesh needs n >= 2 cells per side, got {n}")
        self.n = n = int(n)
        self.h = 1.0 / n
        i, j = np.meshgrid(np.arange(1, n), np.arange(1, n))
        self.nodes = np.column_stack([i.ravel() / n, j.ravel() / n])
        self.G = (n - 1) ** 2
        # triangles as vertex index triples into the (n+1)^2 grid, v = j (n+1) + i
        ci, cj = np.meshgrid(np.arange(n), np.arange(n))
        ci, cj = ci.ravel(), cj.ravel()
        v = lambda a, b: b * (n + 1) + a
        lower = np.column_stack([v(ci, cj), v(ci + 1, cj), v(ci + 1, cj + 1)])
        upper = np.column_stack([v(ci, cj), v(ci + 1, cj + 1), v(ci, cj + 1)])
        self.triangles = np.vstack([lower, upper])
        gi, gj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
        self.vertices = np.column_stack([gi.ravel() / n, gj.ravel() / n])
        self.centroids = self.vertices[self.triangles].mean(axis=1)
        # vertex -> interior index, -1 on the boundary
        interior = (gi.ravel() > 0) & (gi.ravel() < n) & (gj.ravel() > 0) & (gj.ravel() < n)
        self.vertex_to_node = np.full(interior.size, -1, dtype=np.int64)
        self.vertex_to_node[interior] = np.arange(self.G)

    def local_stiffness(self) -> np.ndarray:
        """Unit-coefficient element matrices, shape (T, 3, 3)."""
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        # gradients of the barycentric coordinates
        edges = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        grads = np.stack([edges[..., 1], -edges[..., 0]], axis=-1) / (2 * area[:, None, None])
        return area[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)

    def areas(self) -> np.ndarray:
        return np.full(len(self.triangles), 0.5 * self.h * self.h)


class BandedAssembler:
    """Maps centroid coefficients to upper banded storage of the interior stiffness matrix."""

    def __init__(self, mesh: Mesh):
        local = mesh.local_stiffness()
        node = mesh.vertex_to_node[mesh.triangles]
        rows, cols, tris, weights = [], [], [], []
        for a in range(3):
            for b in range(a, 3):
                ga, gb = node[:, a], node[:, b]
                w = local[:, a, b]
                keep = (ga >= 0) & (gb >= 0) & (np.abs(w) > 1e-14)
                r, c = np.minimum(ga, gb)[keep], np.maximum(ga, gb)[keep]
                rows.append(r)
                cols.append(c)
                tris.append(np.flatnonzero(keep))
                weights.append(w[keep])
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        tris, weights = np.concatenate(tris), np.concatenate(weights)
        self.N = mesh.G
        self.u = int((cols - rows).max()) if rows.size else 0
        flat = (self.u + rows - cols) * self.N + cols
        self.positions, slot = np.unique(flat, return_inverse=True)
        # sparse map: centroid coefficients -> band entries (duplicates summed)
        self.matrix = csr_matrix((weights, (slot, tris)), shape=(self.positions.size, len(local)))
        self.matrix.sum_duplicates()

    def banded(self, coeff: np.ndarray) -> np.ndarray:
        """Upper band storage ``(B, u+1, N)`` for centroid coefficients ``(B, T)``."""
        coeff = np.atleast_2d(coeff)
        ab = np.zeros((coeff.shape[0], (self.u + 1) * self.N))
        # CSR times dense sums each entry in a fixed order, independent of the batch size
        ab[:, self.positions] = (self.matrix @ coeff.T).T
        return ab.reshape(coeff.shape[0], self.u + 1, self.N)


def load_vector(mesh: Mesh, f: Callable) -> np.ndarray:
    """Centroid-rule load vector at the interior nodes."""
    fc = np.asarray(f(mesh.centroids[:, 0], mesh.centroids[:, 1]), dtype=float)
    share = np.repeat((fc * mesh.areas() / 3.0)[:, None], 3, axis=1)
    node = mesh.vertex_to_node[mesh.triangles]
    keep = node >= 0
    return np.bincount(node[keep], weights=share[keep], minlength=mesh.G)


class Solver:
    """Batch P1 solver for one (model, mesh) pair.

    Parameters
    ----------
    model : PdeModel
    mesh : Mesh
    workers : int
        Process count for batches; 1 solves in-process.
    """

    def __init__(self, model: PdeModel, mesh: Mesh, workers: int = 1):
        self.model = model
        self.mesh = mesh
        self.workers = max(1, int(workers))
        self.psi = model.basis(mesh.centroids)
        self.assembler = BandedAssembler(mesh)
        self.load = load_vector(mesh, model.rhs_function())
        self._pool = None

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_pool"] = None
        state["workers"] = 1
        return state

    def solve_serial(self, y: np.ndarray) -> np.ndarray:
        """Nodal solutions for parameters ``y`` (B, d_y); returns (G, B)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        coeff = coefficient_at(self.model, self.psi, y)
        bad = ~(coeff > 0.0)
        if bad.any():
            b, t = np.argwhere(bad)[0]
            raise ModelError(f"coefficient {coeff[b, t]!r} at centroid {self.mesh.centroids[t].tolist()} "
                             f"is not positive for y={y[b].tolist()}")
        ab = self.assembler.banded(coeff)
        out = np.empty((self.mesh.G, y.shape[0]))
        for b in range(y.shape[0]):
            try:
                out[:, b] = solveh_banded(ab[b], self.load, overwrite_ab=True, check_finite=False)
            except LinAlgError as exc:
                raise SolverError(f"Cholesky factorization failed for y={y[b].tolist()}: {exc}") from exc
        return out

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.workers == 1 or y.shape[0] < 2 * self.workers:
            return self.solve_serial(y)
        if self._pool is None:
            self._pool = ProcessPoolExecutor(self.workers)
        chunks = np.array_split(y, self.workers)
        parts = list(self._pool.map(self.solve_serial, chunks))
        return np.hstack(parts)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def solve(model: PdeModel, mesh: Mesh, y) -> np.ndarray:
    """Nodal values of the FE solution for one parameter vector, in mesh order."""
    return Solver(model, mesh).solve_serial(np.reshape(y, (1, -1)))[:, 0]


class _Forward:
    """Torus points -> parameters -> solutions."""

    def __init__(self, solver: Solver, periodization: Periodization | None):
        self.solver = solver
        self.periodization = periodization

    def __call__(self, points: np.ndarray) -> np.ndarray:
        y = points if self.periodization is None else self.periodization.forward(points)
        if self.solver.model.kind == "lognormal":
            y = np.clip(y, -LOGNORMAL_CLAMP, LOGNORMAL_CLAMP)
        return self.solver(y)


def as_blackbox(model: PdeModel, mesh: Mesh, periodization: Periodization | None = None, *,
                workers: int = 1, cache_size: int = 8192) -> CachedBlackBox:
    """Expose the solver as a cached black box.

    With a periodization the inputs are torus points; with ``None`` they are
    parameters in the model's own domain (the reference for error reports).
    """
    if periodization is not None and periodization.kind != PERIODIZATION_FOR[model.kind]:
        raise ModelError(f"model kind {model.kind!r} needs periodization "
                         f"{PERIODIZATION_FOR[model.kind]!r}, got {periodization.kind!r}")
    solver = Solver(model, mesh, workers=workers)
    bb = CachedBlackBox(_Forward(solver, periodization), model.d_y, mesh.G, cache_size=cache_size)
    bb.solver = solver
    bb.mesh = mesh
    return bb


def write_snapshot(path, mesh: Mesh, values) -> None:
    """Write one solution as CSV ``x1,x2,value``."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size != mesh.G:
        raise ValueError(f"expected {mesh.G} nodal values, got {values.size}")
    with open(path, "w") as fh:
        fh.write("x1,x2,value\n")
        for (x1, x2), v in zip(mesh.nodes, values):
            fh.write(f"{float(x1)!r},{float(x2)!r},{float(v)!r}\n")
