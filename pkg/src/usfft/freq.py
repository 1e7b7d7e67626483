"""Integer frequency vectors, frequency sets and candidate grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FrequencySet",
    "CandidateGrid",
    "project",
    "cross_intersect",
    "nnz_partition",
    "union",
]


def _dedupe_rows(arr: np.ndarray) -> np.ndarray:
    """Drop repeated rows, keeping the first occurrence of each."""
    if arr.shape[0] <= 1:
        return arr
    _, first = np.unique(arr, axis=0, return_index=True)
    if first.size == arr.shape[0]:
        return arr
    return arr[np.sort(first)]


class FrequencySet:
    """Ordered, duplicate-free set of integer frequency vectors in Z^d.

    Elements are stored as a read-only ``(n, d)`` int64 array in insertion
    order. Iteration yields tuples.
    """

    __slots__ = ("_arr", "_index")

    def __init__(self, elements=(), dimension: int | None = None):
        if isinstance(elements, FrequencySet):
            elements = elements.array
        elif not isinstance(elements, np.ndarray):
            elements = list(elements)
        arr = np.asarray(elements, dtype=np.int64)
        if arr.size == 0:
            if dimension is None:
                raise ValueError("dimension is required for an empty FrequencySet")
            arr = np.zeros((0, dimension), dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d array of frequencies, got shape {arr.shape}")
        if dimension is not None and arr.shape[1] != dimension:
            raise ValueError(f"frequencies have length {arr.shape[1]}, expected {dimension}")
        if arr.shape[1] < 1:
            raise ValueError("dimension must be positive")
        arr = np.ascontiguousarray(_dedupe_rows(arr))
        arr.setflags(write=False)
        self._arr = arr
        self._index = None

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FrequencySet":
        arr = np.asarray(arr, dtype=np.int64)
        return cls(arr.reshape(-1, arr.shape[-1]), dimension=arr.shape[-1])

    @property
    def array(self) -> np.ndarray:
        return self._arr

    @property
    def dimension(self) -> int:
        return self._arr.shape[1]

    def __len__(self) -> int:
        return self._arr.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self._arr)

    def __getitem__(self, i) -> tuple:
        return tuple(int(v) for v in self._arr[i])

    def _lookup(self) -> dict:
        if self._index is None:
            self._index = {tuple(row): i for i, row in enumerate(self._arr.tolist())}
        return self._index

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self._lookup()

    def index(self, k) -> int:
        return self._lookup()[tuple(int(v) for v in k)]

    def indices_of(self, other: "FrequencySet") -> np.ndarray:
        """Positions of the elements of ``other`` inside this set (KeyError if absent)."""
        lut = self._lookup()
        return np.array([lut[tuple(k)] for k in other.array.tolist()], dtype=np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrequencySet):
            return NotImplemented
        return self.dimension == other.dimension and set(self._lookup()) == set(other._lookup())

    def __hash__(self):
        return hash((self.dimension, frozenset(self._lookup())))

    def __repr__(self) -> str:
        head = ", ".join(str(k) for k in list(self)[:4])
        tail = ", ..." if len(self) > 4 else ""
        return f"FrequencySet(d={self.dimension}, n={len(self)}: {{{head}{tail}}})"

    def issubset(self, other: "FrequencySet") -> bool:
        lut = other._lookup()
        return all(k in lut for k in self._lookup())

    def sorted(self) -> "FrequencySet":
        """Canonical lexicographic order, used for archives."""
        if len(self) == 0:
            return self
        order = np.lexsort(self._arr.T[::-1])
        return FrequencySet(self._arr[order], dimension=self.dimension)

    def lexicographic_order(self) -> np.ndarray:
        return np.lexsort(self._arr.T[::-1]) if len(self) else np.zeros(0, dtype=np.int64)

    def extent(self) -> int:
        """Largest per-dimension spread ``max_t (max k_t - min k_t)``."""
        if len(self) == 0:
            return 0
        return int((self._arr.max(axis=0) - self._arr.min(axis=0)).max())

    # text format ---------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"d={self.dimension} n={len(self)}"]
        lines += [",".join(str(v) for v in row) for row in self._arr.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_lines(cls, lines: Sequence[str], start: int = 0) -> tuple["FrequencySet", int]:
        """Parse a frequency block beginning at ``lines[start]``.

        Returns the set and the index of the first line after the block.
        """
        header = _parse_header(lines[start], start + 1)
        try:
            d, n = int(header["d"]), int(header["n"])
        except KeyError as exc:
            raise FormatError(f"line {start + 1}: missing key {exc}") from None
        rows = []
        for j in range(start + 1, start + 1 + n):
            if j >= len(lines):
                raise FormatError(f"line {j + 1}: expected {n} frequencies, file ended")
            try:
                row = [int(v) for v in lines[j].strip().split(",")]
            except ValueError:
                raise FormatError(f"line {j + 1}: malformed frequency {lines[j].strip()!r}") from None
            if len(row) != d:
                raise FormatError(f"line {j + 1}: frequency has {len(row)} components, expected {d}")
            rows.append(row)
        arr = np.array(rows, dtype=np.int64).reshape(n, d)
        if len(np.unique(arr, axis=0)) != n:
            raise FormatError(f"line {start + 1}: frequency block contains duplicates")
        return cls(arr, dimension=d), start + 1 + n

    @classmethod
    def from_text(cls, text: str) -> "FrequencySet":
        return cls.from_lines(text.splitlines())[0]


class FormatError(ValueError):
    """Malformed text archive; the message carries the 1-based line number."""


def _parse_header(line: str, lineno: int) -> dict:
    out = {}
    for tok in line.split():
        if "=" not in tok:
            raise FormatError(f"line {lineno}: expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        out[key] = val
    return out


@dataclass(frozen=True)
class CandidateGrid:
    """Axis-aligned box of candidate frequencies ``prod_t [lo_t, hi_t]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must be non-empty and of equal length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"need lo <= hi in every dimension, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric(cls, N: int, d: int) -> "CandidateGrid":
        return cls((-N,) * d, (N,) * d)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def extent(self) -> int:
        """N_Gamma, the largest side length ``hi_t - lo_t``."""
        return max(h - l for l, h in zip(self.lo, self.hi))

    def size(self, t: int) -> int:
        """Number of candidates along dimension ``t`` (0-based)."""
        return self.hi[t] - self.lo[t] + 1

    def contains(self, k) -> bool:
        k = tuple(k)
        return len(k) <= self.dimension and all(
            l <= v <= h for v, l, h in zip(k, self.lo, self.hi))

    def mask(self, arr: np.ndarray) -> np.ndarray:
        """Row mask for ``arr`` (n, m) checking bounds of the first m dimensions."""
        m = arr.shape[1]
        lo = np.asarray(self.lo[:m])
        hi = np.asarray(self.hi[:m])
        return np.all((arr >= lo) & (arr <= hi), axis=1)


def project(fset: FrequencySet, dims: Sequence[int]) -> FrequencySet:
    """Projection onto the (1-based) dimension indices ``dims``."""
    dims = [int(i) for i in dims]
    if not dims:
        raise ValueError("dims must be non-empty")
    if len(set(dims)) != len(dims):
        raise ValueError(f"dims must be duplicate-free, got {dims}")
    bad = [i for i in dims if not 1 <= i <= fset.dimension]
    if bad:
        raise ValueError(f"dimension indices {bad} outside [1, {fset.dimension}]")
    cols = np.asarray(dims) - 1
    return FrequencySet(fset.array[:, cols], dimension=len(dims))


def cross_intersect(left: FrequencySet, right: FrequencySet, grid: CandidateGrid) -> FrequencySet:
    """All concatenations ``(k, k_t)`` with ``k`` in left and ``k_t`` in right inside grid."""
    if right.dimension != 1:
        raise ValueError(f"right operand must be one-dimensional, got d={right.dimension}")
    t = left.dimension + 1
    if grid.dimension < t:
        raise ValueError(f"grid has dimension {grid.dimension}, need at least {t}")
    a, b = left.array, right.array
    if len(a) == 0 or len(b) == 0:
        return FrequencySet(dimension=t)
    prod = np.hstack([np.repeat(a, len(b), axis=0), np.tile(b, (len(a), 1))])
    return FrequencySet(prod[grid.mask(prod)], dimension=t)


def nnz_partition(fset: FrequencySet) -> dict[int, FrequencySet]:
    """Split into the sets ``J_l`` of frequencies with exactly ``l`` nonzero entries.

    Keys are the occurring values of ``l`` only, in increasing order.
    """
    nnz = np.count_nonzero(fset.array, axis=1)
    return {int(l): FrequencySet(fset.array[nnz == l], dimension=fset.dimension)
            for l in np.unique(nnz)}


def union(sets: Iterable[FrequencySet], dimension: int) -> FrequencySet:
    """Order-preserving union (first occurrence wins)."""
    arrs = [s.array for s in sets if len(s)]
    if not arrs:
        return FrequencySet(dimension=dimension)
    return FrequencySet(np.vstack(arrs), dimension=dimension)
