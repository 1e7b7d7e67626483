"""Uniform dimension-incremental sparse FFT over G black-box functionals.

The frequency support is built one coordinate at a time. Every sampling set
is shared by all ``G`` functionals and the detected sets are united over
them, so a single black-box evaluation per node serves every functional.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .blackbox import BlackBoxError, CachedBlackBox, TrigPolynomial
from .freq import CandidateGrid, FormatError, FrequencySet, _parse_header, cross_intersect
from .lattice import (LatticeError, build_cover, find_reconstructing, nodes)
from .periodize import Periodization

log = logging.getLogger(__name__)

ALGO_A = ("single_r1l", "multiple_r1l")

# Failure-probability split of the underlying recovery guarantee. The
# deterministic lattice realizations do not use them; kept for reference.
GAMMA_A = "delta / (3 d s G)"
GAMMA_B = "delta / (3 d)"


class DetectionError(RuntimeError):
    """A detection step failed; the message names the dimension step."""


@dataclass(frozen=True)
class DetectionConfig:
    """Parameters of one detection run.

    Attributes
    ----------
    grid : CandidateGrid
    s, s_local : int
        Sparsity of the final step and of the intermediate steps.
        ``s_local`` defaults to ``s``.
    theta : float
        Absolute magnitude threshold.
    r : int
        Number of random detection iterations per dimension step.
    seed : int
    algoA : str
        ``"single_r1l"`` or ``"multiple_r1l"``.
    sample_batch_limit : int
        Largest number of points passed to the black box in one call.
    """

    grid: CandidateGrid
    s: int
    s_local: int | None = None
    theta: float = 1e-12
    r: int = 5
    seed: int = 0
    algoA: str = "single_r1l"
    sample_batch_limit: int = 65536

    def __post_init__(self):
        if self.s_local is None:
            object.__setattr__(self, "s_local", self.s)
        if self.s < 1 or self.s_local < 1:
            raise ValueError(f"s and s_local must be >= 1, got {self.s}, {self.s_local}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.algoA not in ALGO_A:
            raise ValueError(f"unknown algoA {self.algoA!r}; expected one of {ALGO_A}")
        if self.sample_batch_limit < 1:
            raise ValueError("sample_batch_limit must be positive")


@dataclass
class Approximant:
    """Frequencies, a ``(G, |I|)`` coefficient matrix and the periodization used.

    ``nodes`` optionally holds the spatial coordinates of the ``G``
    functionals, ``info`` the run metadata (sample counts, seed, ...).
    """

    frequencies: FrequencySet
    coefficients: np.ndarray
    periodization: Periodization = field(default_factory=Periodization.none)
    nodes: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=complex))
        if self.coefficients.shape[1] != len(self.frequencies):
            if len(self.frequencies) == 0 and self.coefficients.size == 0:
                self.coefficients = self.coefficients.reshape(max(self.coefficients.shape[0], 1), 0)
            else:
                raise ValueError(f"{self.coefficients.shape[1]} coefficient columns for "
                                 f"{len(self.frequencies)} frequencies")

    @property
    def G(self) -> int:
        return self.coefficients.shape[0]

    @property
    def dimension(self) -> int:
        return self.frequencies.dimension

    def evaluate(self, points, chunk: int = 2048) -> np.ndarray:
        """Approximant values at parameter-domain points ``(n, d)``; shape ``(G, n)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dimension:
            raise ValueError(f"points have {pts.shape[1]} components, approximant has d={self.dimension}")
        torus = self.periodization.inverse(pts)
        freqs = self.frequencies.array.astype(float)
        out = np.zeros((self.G, len(pts)), dtype=complex)
        for a in range(0, len(pts), chunk):
            phase = torus[a:a + chunk] @ freqs.T
            out[:, a:a + chunk] = self.coefficients @ np.exp(2j * np.pi * phase).T
        return out


# sampling ------------------------------------------------------------------------


def _evaluate(bb, points: np.ndarray, limit: int) -> np.ndarray:
    parts = [bb.evaluate(points[a:a + limit]) for a in range(0, len(points), limit)]
    return parts[0] if len(parts) == 1 else np.hstack(parts)


def _with_trailing(head: np.ndarray, trailing: np.ndarray) -> np.ndarray:
    if trailing.size == 0:
        return head
    return np.hstack([head, np.broadcast_to(trailing, (len(head), trailing.size))])


class SamplingPlan:
    """Lattice sampling set for a candidate set: one reconstructing lattice or a cover."""

    def __init__(self, candidates: FrequencySet, algo: str, seed, delta=None):
        self.candidates = candidates
        self.algo = algo
        if algo == "single_r1l":
            self.lattices = (find_reconstructing(candidates, seed, delta=delta),)
            self.assignment = np.zeros(len(candidates), dtype=np.int64)
        else:
            cover = build_cover(candidates, seed, delta=delta)
            self.lattices, self.assignment = cover.lattices, cover.assignment

    @property
    def total_nodes(self) -> int:
        return sum(lat.M for lat in self.lattices)

    def coefficients(self, bb, trailing: np.ndarray, limit: int) -> np.ndarray:
        """Sample ``bb`` on every lattice (trailing components appended) and recover ``(G, |J|)``."""
        arr = self.candidates.array
        out = None
        for j, lat in enumerate(self.lattices):
            idx = np.flatnonzero(self.assignment == j)
            if idx.size == 0:
                continue
            values = _evaluate(bb, _with_trailing(nodes(lat), trailing), limit)
            spectrum = np.fft.fft(values, axis=-1) / lat.M
            if out is None:
                out = np.zeros((values.shape[0], len(arr)), dtype=complex)
            out[:, idx] = spectrum[:, (arr[idx] @ np.asarray(lat.z, dtype=np.int64)) % lat.M]
        return out


def _top(mags: np.ndarray, s: int, theta: float) -> np.ndarray:
    """Boolean ``(G, n)`` mask of the ``s`` largest entries per row that reach ``theta``."""
    keep = np.zeros(mags.shape, dtype=bool)
    if mags.shape[1] == 0:
        return keep
    order = np.argsort(-mags, axis=1, kind="stable")[:, :s]
    rows = np.arange(mags.shape[0])[:, None]
    keep[rows, order] = True
    return keep & (mags >= theta)


def detect_1d_components(bb, cfg: DetectionConfig, t: int, rng: np.random.Generator | None = None,
                         *, trace: list | None = None) -> FrequencySet:
    """Single-coordinate support detection along random lines in direction ``t`` (1-based).

    Returns the union over iterations and functionals of the ``s_local``
    largest line coefficients per functional that reach ``theta``.
    """
    d = cfg.grid.dimension
    if not 1 <= t <= d:
        raise ValueError(f"dimension index {t} outside [1, {d}]")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    lo, hi = cfg.grid.lo[t - 1], cfg.grid.hi[t - 1]
    K = hi - lo + 1
    ks = np.arange(lo, hi + 1)
    hit = np.zeros(K, dtype=bool)
    for _ in range(cfg.r):
        base = rng.random(d)
        pts = np.repeat(base[None, :], K, axis=0)
        pts[:, t - 1] = np.arange(K) / K
        values = _evaluate(bb, pts, cfg.sample_batch_limit)
        spectrum = np.fft.fft(values, axis=-1)[:, ks % K] / K
        found = _top(np.abs(spectrum), cfg.s_local, cfg.theta)
        hit |= found.any(axis=0)
        if trace is not None:
            trace.append(found)
    return FrequencySet(ks[hit][:, None], dimension=1)


def _algoA_masks(bb, plan: SamplingPlan, s_tilde: int, theta: float, trailing, limit: int):
    trailing = np.zeros(0) if trailing is None else np.asarray(trailing, dtype=float)
    coef = plan.coefficients(bb, trailing, limit)
    return _top(np.abs(coef), s_tilde, theta), coef


def algoA_detect(bb, candidates: FrequencySet, s_tilde: int, theta: float, seed=None, *,
                 trailing=None, algo: str = "single_r1l", plan: SamplingPlan | None = None,
                 delta: float | None = None, batch_limit: int = 65536):
    """Per-functional detection on a candidate set.

    Samples ``bb`` on a lattice sampling set for ``candidates`` (with fixed
    trailing components appended), computes the coefficients of every
    functional and keeps, per functional, the ``s_tilde`` largest that
    reach ``theta``.

    Returns
    -------
    list of (FrequencySet, ndarray)
        One entry per functional: detected frequencies and their coefficients.
    """
    if len(candidates) == 0:
        raise ValueError("algoA_detect needs a non-empty candidate set")
    if plan is None:
        plan = SamplingPlan(candidates, algo, seed, delta)
    keep, coef = _algoA_masks(bb, plan, s_tilde, theta, trailing, batch_limit)
    arr = candidates.array
    return [(FrequencySet(arr[row], dimension=candidates.dimension), coef[g, row])
            for g, row in enumerate(keep)]


def _pole_delta(periodization: Periodization | None):
    if periodization is not None and periodization.kind == "lognormal":
        return periodization.delta
    return None


def usfft(bb, cfg: DetectionConfig, periodization: Periodization | None = None, *,
          nodes_xy=None, trace: dict | None = None) -> Approximant:
    """Detect a common sparse frequency set for all functionals of ``bb`` and its coefficients.

    Parameters
    ----------
    bb : black box
        Any object with ``dimension``, ``G`` and ``evaluate``. Wrapped in a
        :class:`CachedBlackBox` unless it already is one; the cache's
        distinct-point counter provides the sample accounting.
    cfg : DetectionConfig
    periodization : Periodization, optional
        Recorded in the approximant; a lognormal shift also keeps lattice
        nodes away from the poles.
    nodes_xy : array, optional
        Spatial coordinates of the functionals, stored with the result.
    trace : dict, optional
        Filled with the per-step, per-functional detections.

    Returns
    -------
    Approximant
    """
    d = cfg.grid.dimension
    if d < 2:
        raise ValueError("usfft needs dimension >= 2")
    if getattr(bb, "dimension", d) != d:
        raise ValueError(f"black box has dimension {bb.dimension}, grid has {d}")
    if not isinstance(bb, CachedBlackBox):
        bb = CachedBlackBox(bb.evaluate if hasattr(bb, "evaluate") else bb, d, bb.G,
                            dtype=complex)
    periodization = Periodization.none() if periodization is None else periodization
    delta = _pole_delta(periodization)
    rng = np.random.default_rng(cfg.seed)
    limit = cfg.sample_batch_limit
    start = bb.distinct
    steps = []

    # step 1: single coordinates
    one_d = []
    for t in range(1, d + 1):
        before = bb.distinct
        lines = [] if trace is not None else None
        found = detect_1d_components(bb, cfg, t, rng, trace=lines)
        if len(found) == 0:
            log.info("no component survives theta in dimension %d; using {0}", t)
            found = FrequencySet([(0,)], dimension=1)
        one_d.append(found)
        steps.append({"step": 1, "t": t, "candidates": cfg.grid.size(t - 1), "detected": len(found),
                      "samples": bb.distinct - before})
        if trace is not None:
            trace.setdefault("step1", []).append(lines)

    # step 2: couple coordinates
    current = one_d[0]
    for t in range(2, d + 1):
        before = bb.distinct
        last = t == d
        r_t, s_t = (1, cfg.s) if last else (cfg.r, cfg.s_local)
        J = cross_intersect(current, one_d[t - 1], cfg.grid)
        lattice_seed = int(rng.integers(2 ** 63))
        trailing = [rng.random(d - t) for _ in range(r_t)]
        try:
            plan = SamplingPlan(J, cfg.algoA, lattice_seed, delta)
        except LatticeError as exc:
            raise DetectionError(f"dimension step t={t}: {exc}") from exc
        hit = np.zeros(len(J), dtype=bool)
        per_i = []
        for x_tail in trailing:
            keep, _ = _algoA_masks(bb, plan, s_t, cfg.theta, x_tail, limit)
            hit |= keep.any(axis=0)
            if trace is not None:
                per_i.append([FrequencySet(J.array[row], dimension=t) for row in keep])
        current = FrequencySet(J.array[hit], dimension=t)
        if len(current) == 0 and not last:
            log.info("nothing detected at step t=%d; continuing with the zero frequency", t)
            current = FrequencySet([(0,) * t], dimension=t)
        steps.append({"step": 2, "t": t, "candidates": len(J), "detected": len(current),
                      "lattices": len(plan.lattices), "nodes": plan.total_nodes,
                      "iterations": r_t, "samples": bb.distinct - before})
        if trace is not None:
            trace.setdefault("step2", []).append({"t": t, "candidates": J, "result": current,
                                                  "trailing": trailing, "per_iteration": per_i})

    # step 3: coefficients on the detected set
    before = bb.distinct
    cover_seed = int(rng.integers(2 ** 63))
    final = current
    if len(final) == 0:
        final = FrequencySet([(0,) * d], dimension=d)
    try:
        plan = SamplingPlan(final, "multiple_r1l", cover_seed, delta)
    except LatticeError as exc:
        raise DetectionError(f"coefficient step: {exc}") from exc
    coef = plan.coefficients(bb, np.zeros(0), limit)
    if len(current) == 0:
        if np.any(np.abs(coef) >= cfg.theta):
            log.info("empty detection; keeping the zero frequency")
        else:
            warnings.warn("no frequency detected; returning an empty approximant", stacklevel=2)
            final = FrequencySet(dimension=d)
            coef = np.zeros((coef.shape[0], 0), dtype=complex)
    steps.append({"step": 3, "t": d, "candidates": len(final), "detected": len(final),
                  "lattices": len(plan.lattices), "nodes": plan.total_nodes,
                  "samples": bb.distinct - before})
    info = {
        "samples": bb.distinct - start,
        "distinct_total": bb.distinct,
        "steps": steps,
        "nI": len(final),
        "s": cfg.s,
        "q": len(final) / cfg.s,
        "seed": cfg.seed,
    }
    return Approximant(final, coef, periodization, nodes_xy, info)


# archive ---------------------------------------------------------------------------


def _fmt_complex(z: complex) -> str:
    return f"{float(z.real)!r}:{float(z.imag)!r}"


def write_archive(path, app: Approximant, extra: dict | None = None) -> None:
    """Write ``app`` as text: header, lexicographic frequency block, ``G`` coefficient rows.

    ``extra`` adds ``key=value`` header fields (values without whitespace).
    """
    with open(path, "w") as fh:
        fh.write(archive_text(app, extra))


def archive_text(app: Approximant, extra: dict | None = None) -> str:
    order = app.frequencies.lexicographic_order()
    freqs = FrequencySet(app.frequencies.array[order], dimension=app.dimension)
    coef = app.coefficients[:, order]
    fields = {"d": app.dimension, "G": app.G, "nI": len(freqs)}
    fields.update(app.periodization.header_fields())
    for key, val in (extra or {}).items():
        if any(ch.isspace() for ch in str(val)) or "=" in str(key):
            raise ValueError(f"header field {key}={val!r} must not contain whitespace")
        fields[key] = val
    lines = [" ".join(f"{k}={v}" for k, v in fields.items())]
    lines.append(freqs.to_text().rstrip("\n"))
    lines += [",".join(_fmt_complex(z) for z in row) for row in coef]
    return "\n".join(lines) + "\n"


def read_archive(path) -> tuple[Approximant, dict]:
    """Parse an archive; returns the approximant and the header fields.

    Raises
    ------
    FormatError
        With the 1-based line number of the first malformed line.
    """
    with open(path) as fh:
        return parse_archive(fh.read())


def parse_archive(text: str) -> tuple[Approximant, dict]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("line 1: empty archive")
    header = _parse_header(lines[0], 1)
    try:
        d, G, nI = int(header["d"]), int(header["G"]), int(header["nI"])
    except KeyError as exc:
        raise FormatError(f"line 1: missing header key {exc}") from None
    except ValueError as exc:
        raise FormatError(f"line 1: {exc}") from None
    try:
        periodization = Periodization.from_header_fields(header)
    except ValueError as exc:
        raise FormatError(f"line 1: {exc}") from None
    if len(lines) < 2:
        raise FormatError("line 2: missing frequency block")
    freqs, nxt = FrequencySet.from_lines(lines, 1)
    if freqs.dimension != d or len(freqs) != nI:
        raise FormatError(f"line 2: frequency block d={freqs.dimension} n={len(freqs)} "
                          f"does not match header d={d} nI={nI}")
    coef = np.zeros((G, nI), dtype=complex)
    for g in range(G):
        j = nxt + g
        if j >= len(lines):
            raise FormatError(f"line {j + 1}: expected {G} coefficient rows, file ended")
        row = lines[j].strip()
        vals = row.split(",") if row else []
        if len(vals) != nI:
            raise FormatError(f"line {j + 1}: {len(vals)} coefficients, expected {nI}")
        try:
            for k, tok in enumerate(vals):
                re, im = tok.split(":")
                coef[g, k] = complex(float(re), float(im))
        except ValueError:
            raise FormatError(f"line {j + 1}: malformed coefficient {tok!r}") from None
    if nxt + G != len(lines):
        raise FormatError(f"line {nxt + G + 1}: unexpected trailing content")
    return Approximant(freqs, coef, periodization), header


__all__ = [
    "ALGO_A", "Approximant", "BlackBoxError", "CachedBlackBox", "DetectionConfig",
    "DetectionError", "SamplingPlan", "TrigPolynomial", "algoA_detect", "archive_text",
    "detect_1d_components", "parse_archive", "read_archive", "usfft", "write_archive",
]
