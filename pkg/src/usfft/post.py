"""Quantities derived from an approximant: moments, sensitivities and errors."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .detect import Approximant, SamplingPlan
from .freq import FrequencySet, nnz_partition
from .periodize import Periodization

log = logging.getLogger(__name__)

BASELINE_KINDS = ("axis_cross", "hyperbolic_uniform", "hyperbolic_decay", "l1_decay")

IMAG_TOLERANCE = 1e-8


# expectation -----------------------------------------------------------------


def expectation_factors(k, kind: str = "tent", delta: float = 0.0) -> np.ndarray:
    """One-dimensional factors ``D_k`` (tent) or ``D_{k, delta}`` (lognormal).

    ``2i / (pi k)`` for odd ``k``, 1 for ``k = 0`` and 0 otherwise; the
    lognormal variant multiplies odd entries by ``exp(2 pi i k delta)``.
    """
    k = np.asarray(k, dtype=np.int64)
    out = np.zeros(k.shape, dtype=complex)
    out[k == 0] = 1.0
    odd = (k % 2) == 1
    out[odd] = 2j / (np.pi * k[odd])
    if kind == "lognormal":
        out[odd] *= np.exp(2j * np.pi * k[odd] * delta)
    elif kind != "tent":
        raise ValueError(f"expectation factors exist for tent and lognormal, not {kind!r}")
    return out


def expectation(app: Approximant, return_residue: bool = False):
    """Expectation of every functional under the parameter distribution.

    Returns the real part; with ``return_residue`` also the imaginary part,
    which should vanish for real targets. A residue above 1e-8 warns.
    """
    per = app.periodization
    arr = app.frequencies.array
    if per.kind == "none":
        weights = np.all(arr == 0, axis=1).astype(complex)
    else:
        weights = np.prod(expectation_factors(arr, per.kind, per.delta or 0.0), axis=1)
    value = app.coefficients @ weights if len(arr) else np.zeros(app.G, dtype=complex)
    residue = np.abs(value.imag)
    if residue.size and residue.max() > IMAG_TOLERANCE:
        warnings.warn(f"expectation has an imaginary residue up to {residue.max():.3g}",
                      stacklevel=2)
    if return_residue:
        return value.real, value.imag
    return value.real


# sensitivity ------------------------------------------------------------------


def variance(app: Approximant) -> np.ndarray:
    """``sum_{k != 0} |c_k|^2`` per functional."""
    nonzero = np.any(app.frequencies.array != 0, axis=1)
    return np.sum(np.abs(app.coefficients[:, nonzero]) ** 2, axis=1)


def variance_gsi(app: Approximant, subset: FrequencySet) -> np.ndarray:
    """Share of the variance carried by ``subset``, per functional.

    Nodes with zero variance get 0 and a warning.
    """
    if subset.dimension != app.dimension:
        raise ValueError(f"subset has dimension {subset.dimension}, approximant {app.dimension}")
    try:
        idx = app.frequencies.indices_of(subset)
    except KeyError as exc:
        raise ValueError(f"frequency {exc.args[0]} is not in the approximant") from None
    sub = app.frequencies.array[idx]
    idx = idx[np.any(sub != 0, axis=1)]
    part = np.sum(np.abs(app.coefficients[:, idx]) ** 2, axis=1)
    total = variance(app)
    out = np.zeros(app.G)
    pos = total > 0
    if not pos.all():
        warnings.warn(f"{int((~pos).sum())} node(s) with zero variance; their index is set to 0",
                      stacklevel=2)
    out[pos] = part[pos] / total[pos]
    return out


def gsi_by_nnz(app: Approximant) -> dict[int, np.ndarray]:
    """Sensitivity of the sets ``J_l`` of frequencies with ``l`` nonzero entries, ``l >= 1``."""
    parts = nnz_partition(app.frequencies)
    return {l: variance_gsi(app, part) for l, part in parts.items() if l > 0}


# errors ------------------------------------------------------------------------


@dataclass
class ErrorReport:
    """Per-node ``err_1``, ``err_2`` and ``err_inf`` over ``n_test`` random draws."""

    err1: np.ndarray
    err2: np.ndarray
    errinf: np.ndarray
    n_test: int
    seed: int | None

    @property
    def max_err1(self) -> float:
        return float(self.err1.max())

    @property
    def max_err2(self) -> float:
        return float(self.err2.max())

    @property
    def max_errinf(self) -> float:
        return float(self.errinf.max())


def error_report(app: Approximant, bb_reference, n_test: int, seed, sampler,
                 batch: int = 4096) -> ErrorReport:
    """Compare ``app`` with the reference black box on random parameter draws.

    Parameters
    ----------
    app : Approximant
    bb_reference : black box
        Evaluated directly at parameter-domain points.
    n_test : int
    seed : int
    sampler : callable
        ``sampler(rng, n)`` returns ``n`` parameter vectors.
    """
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    rng = np.random.default_rng(seed)
    y = sampler(rng, n_test)
    s1 = np.zeros(app.G)
    s2 = np.zeros(app.G)
    smax = np.zeros(app.G)
    for a in range(0, n_test, batch):
        part = y[a:a + batch]
        diff = np.abs(bb_reference.evaluate(part) - app.evaluate(part))
        s1 += diff.sum(axis=1)
        s2 += (diff ** 2).sum(axis=1)
        smax = np.maximum(smax, diff.max(axis=1))
    return ErrorReport(s1 / n_test, np.sqrt(s2 / n_test), smax, n_test, seed)


def mc_expectation(bb_reference, n_mc: int, seed, sampler, batch: int = 4096):
    """Monte-Carlo mean and standard error per functional."""
    if n_mc < 2:
        raise ValueError("n_mc must be >= 2")
    rng = np.random.default_rng(seed)
    y = sampler(rng, n_mc)
    total = None
    for a in range(0, n_mc, batch):
        vals = np.real(bb_reference.evaluate(y[a:a + batch]))
        total = vals if total is None else np.hstack([total, vals])
    mean = total.mean(axis=1)
    stderr = total.std(axis=1, ddof=1) / np.sqrt(n_mc)
    return mean, stderr


# fixed index sets -----------------------------------------------------------------


def _weights(kind: str, d: int, q: int) -> np.ndarray:
    if kind == "hyperbolic_uniform":
        return np.full(d, 4, dtype=np.int64)
    return np.arange(1, d + 1, dtype=np.int64) ** int(q)


def baseline_index_set(kind: str, N: int, d: int, q: int = 1) -> FrequencySet:
    """A-priori frequency sets.

    * ``axis_cross``: one nonzero entry, ``|k|_1 <= N``;
    * ``hyperbolic_uniform``: ``prod max(1, 4 |k_j|) <= N``;
    * ``hyperbolic_decay``: ``prod max(1, j^q |k_j|) <= N``;
    * ``l1_decay``: ``sum j^q |k_j| <= N``.

    Built one dimension at a time, carrying the used budget of each prefix,
    so no full grid is ever scanned.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown index set kind {kind!r}; expected one of {BASELINE_KINDS}")
    if N < 0 or d < 1:
        raise ValueError(f"need N >= 0 and d >= 1, got N={N}, d={d}")
    if kind in ("hyperbolic_decay", "l1_decay") and int(q) < 1:
        raise ValueError(f"decay exponent q must be a positive integer, got {q}")
    N = int(N)
    if kind == "axis_cross":
        rows = []
        for j in range(d):
            for m in range(1, N + 1):
                for sign in (1, -1):
                    k = [0] * d
                    k[j] = sign * m
                    rows.append(k)
        return FrequencySet(rows, dimension=d)
    w = _weights(kind, d, q)
    product = kind != "l1_decay"
    prefixes = np.zeros((1, 0), dtype=np.int64)
    used = np.array([1 if product else 0], dtype=np.int64)
    for j in range(d):
        blocks, budgets = [prefixes], [used]
        m = 1
        while True:
            nxt = used * (w[j] * m) if product else used + w[j] * m
            ok = nxt <= N
            if not ok.any():
                break
            for sign in (1, -1):
                col = np.full((int(ok.sum()), 1), sign * m, dtype=np.int64)
                blocks.append(np.hstack([prefixes[ok], col]) if prefixes.shape[1] else col)
                budgets.append(nxt[ok])
            m += 1
        blocks[0] = np.hstack([prefixes, np.zeros((len(prefixes), 1), dtype=np.int64)])
        prefixes, used = np.vstack(blocks), np.concatenate(budgets)
    if product and N < 1:
        prefixes = prefixes[:0]
    return FrequencySet(prefixes, dimension=d).sorted()


def fixed_set_approximation(bb, fset: FrequencySet, seed, periodization=None, *,
                            nodes_xy=None, batch_limit: int = 65536) -> Approximant:
    """Coefficients on a given frequency set, sampled on a lattice cover."""
    if len(fset) == 0:
        raise ValueError("fixed_set_approximation needs a non-empty frequency set")
    periodization = Periodization.none() if periodization is None else periodization
    delta = periodization.delta if periodization.kind == "lognormal" else None
    before = getattr(bb, "distinct", 0)
    plan = SamplingPlan(fset, "multiple_r1l", seed, delta)
    coef = plan.coefficients(bb, np.zeros(0), batch_limit)
    info = {"samples": getattr(bb, "distinct", 0) - before, "nI": len(fset),
            "lattices": len(plan.lattices), "nodes": plan.total_nodes, "seed": seed}
    return Approximant(fset, coef, periodization, nodes_xy, info)


# CSV output -----------------------------------------------------------------------


def _prefix(comment: str | None) -> str:
    return "" if comment is None else f"# {comment}\n"


def _node_columns(nodes_xy, G: int):
    if nodes_xy is None:
        return [("", "")] * G
    return [(repr(float(x1)), repr(float(x2))) for x1, x2 in np.asarray(nodes_xy)]


def expectation_csv(values, nodes_xy=None, comment: str | None = None) -> str:
    lines = ["g,x1,x2,expectation"]
    for g, ((x1, x2), v) in enumerate(zip(_node_columns(nodes_xy, len(values)), values), start=1):
        lines.append(f"{g},{x1},{x2},{float(v)!r}")
    return _prefix(comment) + "\n".join(lines) + "\n"


def mc_csv(values, mc_mean, mc_stderr, nodes_xy=None, comment: str | None = None) -> str:
    lines = ["g,x1,x2,expectation,mc_mean,mc_stderr"]
    cols = _node_columns(nodes_xy, len(values))
    for g, ((x1, x2), v, m, e) in enumerate(zip(cols, values, mc_mean, mc_stderr), start=1):
        lines.append(f"{g},{x1},{x2},{float(v)!r},{float(m)!r},{float(e)!r}")
    return _prefix(comment) + "\n".join(lines) + "\n"


def errors_csv(report: ErrorReport, nodes_xy=None, comment: str | None = None) -> str:
    lines = ["g,x1,x2,err1,err2,errinf"]
    cols = _node_columns(nodes_xy, len(report.err1))
    for g, ((x1, x2), a, b, c) in enumerate(zip(cols, report.err1, report.err2, report.errinf), start=1):
        lines.append(f"{g},{x1},{x2},{float(a)!r},{float(b)!r},{float(c)!r}")
    return _prefix(comment) + "\n".join(lines) + "\n"


def gsi_csv(gsi: dict, nodes_xy=None, sizes: dict | None = None, comment: str | None = None) -> str:
    """Per-node sensitivities by ``J_l``; ``sizes`` adds a ``|J_l|`` comment line."""
    levels = sorted(gsi)
    head = "g,x1,x2," + ",".join(f"J{l}" for l in levels)
    lines = []
    if sizes is not None:
        lines.append("# sizes " + " ".join(f"J{l}={sizes[l]}" for l in sorted(sizes)))
    lines.append(head)
    if gsi:
        G = len(next(iter(gsi.values())))
    else:
        G = 0 if nodes_xy is None else len(nodes_xy)
    for g, (x1, x2) in enumerate(_node_columns(nodes_xy, G)):
        vals = ",".join(repr(float(gsi[l][g])) for l in levels)
        lines.append(f"{g + 1},{x1},{x2}" + ("," + vals if vals else ""))
    return _prefix(comment) + "\n".join(lines) + "\n"
