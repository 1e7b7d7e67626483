"""Rank-1 lattices: node sets, lattice FFT, reconstructing lattices and covers.

A rank-1 lattice of prime size ``M`` with generating vector ``z`` has the
nodes ``(i * z mod M) / M`` for ``i = 0..M-1``. A trigonometric polynomial
sampled on those nodes collapses onto a one-dimensional signal of length
``M``: frequency ``k`` lands in FFT bin ``k . z mod M``. When that map is
injective on a frequency set the lattice is *reconstructing* for it and a
single length-``M`` FFT returns the exact coefficients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .freq import FrequencySet

log = logging.getLogger(__name__)

DEFAULT_MAX_SIZE = 2 ** 26

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class LatticeError(RuntimeError):
    """Raised when a lattice or cover cannot be constructed within budget."""


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all 64-bit integers."""
    n = int(n)
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime ``>= n``."""
    n = max(int(n), 2)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class Rank1Lattice:
    z: tuple
    M: int

    def __post_init__(self):
        M = int(self.M)
        if M <= 2 or not is_prime(M):
            raise ValueError(f"lattice size must be a prime > 2, got {M}")
        z = tuple(int(v) % M for v in self.z)
        if not z:
            raise ValueError("generating vector must be non-empty")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "z", z)

    @property
    def dimension(self) -> int:
        return len(self.z)

    def to_line(self) -> str:
        return f"M={self.M} z={','.join(str(v) for v in self.z)}"

    @classmethod
    def from_line(cls, line: str) -> "Rank1Lattice":
        fields = dict(tok.split("=", 1) for tok in line.split())
        return cls(tuple(int(v) for v in fields["z"].split(",")), int(fields["M"]))


def nodes(lat: Rank1Lattice) -> np.ndarray:
    """The ``M`` lattice points as an ``(M, d)`` array, row ``i`` = ``frac(i z / M)``."""
    i = np.arange(lat.M, dtype=np.int64)[:, None]
    return ((i * np.asarray(lat.z, dtype=np.int64)) % lat.M) / lat.M


def residues(fset: FrequencySet, lat: Rank1Lattice) -> np.ndarray:
    if fset.dimension != lat.dimension:
        raise ValueError(f"set has dimension {fset.dimension}, lattice {lat.dimension}")
    return (fset.array @ np.asarray(lat.z, dtype=np.int64)) % lat.M


def is_reconstructing(fset: FrequencySet, lat: Rank1Lattice) -> bool:
    res = residues(fset, lat)
    return np.unique(res).size == res.size


def pole_clearance(M: int, delta: float) -> float:
    """Torus distance of the grid ``{n / M}`` to the nearer of ``delta`` and ``delta + 1/2``."""
    best = np.inf
    for pole in (delta % 1.0, (delta + 0.5) % 1.0):
        n = np.floor(pole * M)
        for cand in (n, n + 1):
            dist = abs(cand / M - pole)
            best = min(best, dist, 1.0 - dist)
    return float(best)


def clear_of_poles(M: int, delta: float | None) -> bool:
    """Node-to-pole safety check used when a lognormal shift is active."""
    if delta is None:
        return True
    return pole_clearance(M, delta) >= min(1.0 / (8 * M), delta / 2)


def find_reconstructing(fset: FrequencySet, rng_seed=None, *, min_size: int | None = None,
                        max_size: int = DEFAULT_MAX_SIZE, tries: int = 50, growth: float = 1.05,
                        delta: float | None = None) -> Rank1Lattice:
    """Search a single reconstructing rank-1 lattice for ``fset``.

    Starting from the first prime above ``max(2|fset|, N_Gamma + 1)``, draws
    up to ``tries`` uniform generating vectors per size and accepts the first
    reconstructing one. Sizes grow by the factor ``growth`` between rounds.
    """
    if len(fset) == 0:
        raise ValueError("cannot build a lattice for an empty frequency set")
    rng = np.random.default_rng(rng_seed)
    d = fset.dimension
    start = max(2 * len(fset), fset.extent() + 1, 3)
    if min_size is not None:
        start = max(start, int(min_size))
    M = next_prime(start)
    arr = fset.array
    while M <= max_size:
        if clear_of_poles(M, delta):
            for _ in range(tries):
                z = rng.integers(0, M, size=d)
                res = (arr @ z) % M
                if np.unique(res).size == res.size:
                    return Rank1Lattice(tuple(z), M)
        M = next_prime(max(M + 1, int(math.ceil(M * growth))))
    raise LatticeError(f"no reconstructing lattice with M <= {max_size} for {len(fset)} frequencies")


@dataclass(frozen=True)
class LatticeCover:
    """Several lattices plus, per frequency, the lattice on which it is alias-free."""

    lattices: tuple
    assignment: np.ndarray = field(repr=False)

    @property
    def total_nodes(self) -> int:
        return sum(lat.M for lat in self.lattices)

    def to_text(self) -> str:
        return "".join(lat.to_line() + "\n" for lat in self.lattices)


def cover_size_bound(n: int) -> int:
    """Rough a-priori bound on the node count of a cover for ``n`` frequencies."""
    return math.ceil(2 * math.log(2 * n)) * 4 * (n - 1)


def build_cover(fset: FrequencySet, rng_seed=None, *, min_size: int | None = None,
                max_empty: int = 100, delta: float | None = None) -> LatticeCover:
    """Cover ``fset`` by rank-1 lattices so each frequency is alias-free on one of them.

    Each round draws a lattice of size ``M > max(2|R|, |I|, N_Gamma)`` where
    ``R`` is the unassigned remainder and ``I`` the full set. Frequencies of
    ``R`` whose residue is unique among the residues of the *full* set are
    assigned to it.
    """
    n = len(fset)
    if n == 0:
        raise ValueError("cannot cover an empty frequency set")
    rng = np.random.default_rng(rng_seed)
    d = fset.dimension
    arr = fset.array
    floor = max(fset.extent(), n, 2)
    if min_size is not None:
        floor = max(floor, int(min_size) - 1)
    assignment = np.full(n, -1, dtype=np.int64)
    lattices = []
    empty = 0
    while True:
        remaining = np.flatnonzero(assignment < 0)
        if remaining.size == 0:
            break
        M = next_prime(max(2 * remaining.size, floor) + 1)
        while not clear_of_poles(M, delta):
            M = next_prime(M + 1)
        z = rng.integers(0, M, size=d)
        res = (arr @ z) % M
        counts = np.bincount(res, minlength=M)
        hit = remaining[counts[res[remaining]] == 1]
        if hit.size == 0:
            empty += 1
            if empty >= max_empty:
                raise LatticeError(f"cover construction stalled: {max_empty} consecutive empty "
                                   f"draws with {remaining.size} of {n} frequencies unassigned")
            continue
        empty = 0
        assignment[hit] = len(lattices)
        lattices.append(Rank1Lattice(tuple(z), M))
    cover = LatticeCover(tuple(lattices), assignment)
    if n > 1 and cover.total_nodes > cover_size_bound(n):
        log.info("cover uses %d nodes, above the rough bound %d for %d frequencies",
                 cover.total_nodes, cover_size_bound(n), n)
    return cover


def lattice_coefficients(samples, fset: FrequencySet, lat: Rank1Lattice) -> np.ndarray:
    """Fourier coefficients on ``fset`` from samples at ``nodes(lat)``.

    ``samples`` has shape ``(M,)`` or ``(G, M)``; the result has shape
    ``(|fset|,)`` or ``(G, |fset|)``.
    """
    samples = np.asarray(samples)
    if samples.shape[-1] != lat.M:
        raise ValueError(f"expected {lat.M} samples per row, got {samples.shape[-1]}")
    spectrum = np.fft.fft(samples, axis=-1) / lat.M
    return spectrum[..., residues(fset, lat)]


def cover_coefficients(samples, cover: LatticeCover, fset: FrequencySet) -> np.ndarray:
    """Coefficients from per-lattice sample blocks, each read on its assigned lattice."""
    if len(samples) != len(cover.lattices):
        raise ValueError(f"expected {len(cover.lattices)} sample blocks, got {len(samples)}")
    first = np.asarray(samples[0])
    out = np.zeros(first.shape[:-1] + (len(fset),), dtype=complex)
    arr = fset.array
    for j, (block, lat) in enumerate(zip(samples, cover.lattices)):
        block = np.asarray(block)
        if block.shape[-1] != lat.M:
            raise ValueError(f"sample block {j} has {block.shape[-1]} values, lattice size {lat.M}")
        idx = np.flatnonzero(cover.assignment == j)
        if idx.size == 0:
            continue
        spectrum = np.fft.fft(block, axis=-1) / lat.M
        bins = (arr[idx] @ np.asarray(lat.z, dtype=np.int64)) % lat.M
        out[..., idx] = spectrum[..., bins]
    return out


def delta_opt(M: int) -> float:
    """Smallest pole shift maximising the node-to-pole distance for prime ``M``."""
    M = int(M)
    if M <= 2 or not is_prime(M):
        raise ValueError(f"M must be a prime > 2, got {M}")
    return 1.0 / (4 * M)
