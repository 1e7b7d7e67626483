"""Black-box sampling contract and a deduplicating cache around it.

A black box maps a batch of points ``(B, d)`` to a ``(G, B)`` matrix: one
evaluation yields the values of all ``G`` functionals at once.
"""

from __future__ import annotations

from typing import Callable, Protocol

import numpy as np


class BlackBoxError(RuntimeError):
    """A black-box evaluation failed; ``point`` holds the offending input."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class BlackBox(Protocol):
    dimension: int
    G: int

    def evaluate(self, points: np.ndarray) -> np.ndarray: ...


def _as_points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"expected points of shape (B, {d}), got {np.shape(points)}")
    # + 0.0 folds -0.0 onto 0.0 so both share a cache key
    return np.ascontiguousarray(pts + 0.0)


_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def row_hash(points: np.ndarray) -> np.ndarray:
    """64-bit hash of the float64 bytes of each row."""
    words = np.ascontiguousarray(points, dtype=np.float64).view(np.uint64)
    h = np.full(words.shape[0], np.uint64(len(words[0]) if words.size else 0), dtype=np.uint64)
    for col in words.T:
        h = (h ^ col) * _GOLDEN
        h ^= h >> np.uint64(30)
        h *= _MIX1
        h ^= h >> np.uint64(27)
        h *= _MIX2
        h ^= h >> np.uint64(31)
    return h


class CachedBlackBox:
    """Wrap a batch function ``fn(points) -> (G, B)`` with exact-point caching.

    Points are identified by a 64-bit hash of their float64 bytes; cache
    hits are confirmed by comparing the stored point. The values of the most
    recent ``cache_size`` distinct points are kept in a ring buffer, and a
    sorted record of all hashes counts every distinct point ever evaluated,
    so ``distinct`` stays exact after evictions.

    Parameters
    ----------
    fn : callable
        Batch evaluator. Must be deterministic.
    dimension, G : int
        Point dimension and number of functionals.
    cache_size : int
        Number of value columns kept in memory.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dimension: int, G: int,
                 cache_size: int = 8192, dtype=float):
        self.fn = fn
        self.dimension = int(dimension)
        self.G = int(G)
        self.dtype = np.dtype(dtype)
        self.cache_size = max(int(cache_size), 1)
        self._seen = np.zeros(0, dtype=np.uint64)
        self._ring_keys = np.zeros(0, dtype=np.uint64)
        self._ring_points = np.zeros((0, self.dimension))
        self._ring_values = np.zeros((0, self.G), dtype=self.dtype)
        self.evaluations = 0

    @property
    def distinct(self) -> int:
        """Number of distinct points evaluated so far."""
        return int(self._seen.size)

    def _call(self, pts: np.ndarray) -> np.ndarray:
        try:
            vals = np.asarray(self.fn(pts))
        except Exception as exc:
            if len(pts) == 1:
                raise BlackBoxError(f"black box failed at point {pts[0].tolist()}: {exc}",
                                    pts[0].copy()) from exc
            for p in pts:
                self._call(p[None, :])
            raise
        if vals.shape != (self.G, len(pts)):
            raise BlackBoxError(f"black box returned shape {vals.shape}, "
                                f"expected {(self.G, len(pts))}")
        return vals

    def _lookup(self, keys: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Ring position of each key (confirmed by the stored point) or -1."""
        pos = np.full(keys.size, -1, dtype=np.int64)
        if self._ring_keys.size == 0:
            return pos
        order = np.argsort(self._ring_keys, kind="stable")
        sorted_keys = self._ring_keys[order]
        at = np.minimum(np.searchsorted(sorted_keys, keys), sorted_keys.size - 1)
        cand = order[at]
        ok = (sorted_keys[at] == keys) & np.all(self._ring_points[cand] == pts, axis=1)
        pos[ok] = cand[ok]
        return pos

    def evaluate(self, points) -> np.ndarray:
        pts = _as_points(points, self.dimension)
        keys = row_hash(pts)
        ukeys, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        upts = pts[first]
        pos = self._lookup(ukeys, upts)
        need = np.flatnonzero(pos < 0)
        dtype = self._ring_values.dtype
        fresh = None
        if need.size:
            fresh = self._call(upts[need])
            dtype = np.result_type(dtype, fresh.dtype)
            self.evaluations += need.size
            new = ukeys[need]
            at = np.searchsorted(self._seen, new)
            known = (at < self._seen.size) & (self._seen[np.minimum(at, self._seen.size - 1)] == new) \
                if self._seen.size else np.zeros(new.size, dtype=bool)
            # new is sorted, so one insert keeps the record sorted
            self._seen = np.insert(self._seen, at[~known], new[~known])
        uvals = np.empty((ukeys.size, self.G), dtype=dtype)
        hit = pos >= 0
        uvals[hit] = self._ring_values[pos[hit]]
        if fresh is not None:
            uvals[need] = fresh.T
            self._remember(ukeys[need], upts[need], uvals[need])
        return uvals[inverse.ravel()].T

    def _remember(self, keys, pts, vals):
        keep = self.cache_size
        self._ring_keys = np.concatenate([self._ring_keys, keys])[-keep:]
        self._ring_points = np.concatenate([self._ring_points, pts])[-keep:]
        self._ring_values = np.concatenate([self._ring_values.astype(vals.dtype), vals])[-keep:]


class TrigPolynomial:
    """``G`` trigonometric polynomials on the torus, as an uncached batch function.

    ``coefficients`` has shape ``(G, |I|)``.
    """

    def __init__(self, frequencies, coefficients):
        self.frequencies = np.asarray(frequencies.array if hasattr(frequencies, "array")
                                      else frequencies, dtype=np.int64)
        self.coefficients = np.atleast_2d(np.asarray(coefficients, dtype=complex))
        if self.coefficients.shape[1] != self.frequencies.shape[0]:
            raise ValueError("coefficient columns must match the number of frequencies")
        self.dimension = self.frequencies.shape[1]
        self.G = self.coefficients.shape[0]

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        phase = pts @ self.frequencies.T.astype(float)
        return self.coefficients @ np.exp(2j * np.pi * phase).T

    def blackbox(self, cache_size: int = 8192) -> CachedBlackBox:
        return CachedBlackBox(self, self.dimension, self.G, cache_size=cache_size, dtype=complex)
