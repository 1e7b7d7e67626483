"""Maps between the torus and the parameter domain of the random coefficient.

Two periodizations are provided:

* ``tent``: piecewise linear, ``[0, 1) -> [alpha, beta]``, for uniformly
  distributed parameters;
* ``lognormal``: a shifted tent onto ``(-1/2, 1/2)`` followed by the
  normal quantile map, for standard normal parameters. The shift ``delta``
  moves the two poles off the lattice nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfcx

SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

#: Clamp applied by black-box adapters to lognormal parameters.
LOGNORMAL_CLAMP = 8.3


class DomainError(ValueError):
    """Input outside the domain of a transformation."""


# inverse error function --------------------------------------------------------


def _erfinv_initial(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    # single precision rational start (Giles); q = 1 - |x| keeps the tails exact
    w = -np.log(q * (2.0 - q))
    central = w < 5.0
    out = np.empty_like(x)
    wc = w[central] - 2.5
    p = np.full_like(wc, 2.81022636e-08)
    for c in (3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 0.00021858087,
              -0.00125372503, -0.00417768164, 0.246640727, 1.50140941):
        p = c + p * wc
    out[central] = p * x[central]
    wt = np.sqrt(w[~central]) - 3.0
    p = np.full_like(wt, -0.000200214257)
    for c in (0.000100950558, 0.00134934322, -0.00367342844, 0.00573950773,
              -0.0076224613, 0.00943887047, 1.00167406, 2.83297682):
        p = c + p * wt
    out[~central] = p * x[~central]
    # beyond single-precision range: asymptotic root of erfc(t) = q
    far = q < 1e-9
    L = -np.log(q[far] * math.sqrt(math.pi))
    out[far] = np.copysign(np.sqrt(L - 0.5 * np.log(L)), x[far])
    return out


def _erfinv_refined(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``erfinv(x)`` given ``x`` and ``q = 1 - |x|``, both exact on input."""
    ax = np.abs(_erfinv_initial(x, q))
    ay = np.abs(x)
    central = q > 0.5
    c, t = ax[central], ax[~central]
    yc, qt = ay[central], q[~central]
    logq = np.log(qt)
    for _ in range(2):
        step = (erf(c) - yc) / (_TWO_OVER_SQRT_PI * np.exp(-c * c))
        c = c - step / (1.0 + c * step)
        # (q - erfc(t)) / erfc'(t) via erfcx, safe far into the tail
        step = (np.exp(logq + t * t) - erfcx(t)) / _TWO_OVER_SQRT_PI
        t = t - step / (1.0 + t * step)
    ax[central], ax[~central] = c, t
    return np.copysign(ax, x)


def erfinv(y) -> np.ndarray:
    """Inverse error function on (-1, 1)."""
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) >= 1.0) or np.any(np.isnan(y)):
        raise DomainError("erfinv is defined on the open interval (-1, 1)")
    flat = y.ravel()
    out = _erfinv_refined(flat, 1.0 - np.abs(flat))
    return out.reshape(y.shape)


def normal_quantile(u) -> np.ndarray:
    """Standard normal quantile, evaluated from the nearer tail."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)) or np.any(np.isnan(u)):
        raise DomainError("normal quantile is defined on the open interval (0, 1)")
    flat = u.ravel()
    q = np.where(flat < 0.5, 2.0 * flat, 2.0 * (1.0 - flat))
    x = np.copysign(1.0 - q, flat - 0.5)
    out = SQRT2 * _erfinv_refined(x, q)
    return out.reshape(u.shape)


# building blocks -------------------------------------------------------------


def tau1(b):
    """``sqrt(2) erfinv(2 b)`` on (-1/2, 1/2)."""
    b = np.asarray(b, dtype=float)
    if np.any(np.abs(b) >= 0.5):
        raise DomainError("tau1 is defined on the open interval (-1/2, 1/2)")
    return SQRT2 * erfinv(2.0 * b)


def tau1_inverse(y):
    return 0.5 * erf(np.asarray(y, dtype=float) / SQRT2)


def tent_forward(yt, alpha: float, beta: float):
    yt = np.mod(np.asarray(yt, dtype=float), 1.0)
    return beta - np.abs((beta - alpha) * (1.0 - 2.0 * yt))


def tent_inverse(y, alpha: float, beta: float):
    y = np.asarray(y, dtype=float)
    if np.any((y < alpha) | (y > beta)):
        raise DomainError(f"tent inverse needs values in [{alpha}, {beta}]")
    return (y - alpha) / (2.0 * (beta - alpha))


def shifted_tent(yt, delta: float):
    yt = np.mod(np.asarray(yt, dtype=float), 1.0)
    s = yt - delta
    return np.where(yt < delta, -0.5 - 2.0 * s,
                    np.where(yt < 0.5 + delta, -0.5 + 2.0 * s, 1.5 - 2.0 * s))


def shifted_tent_inverse(b, delta: float):
    return np.asarray(b, dtype=float) / 2.0 + delta + 0.25


def lognormal_forward(yt, delta: float):
    """``tau1(shifted_tent(yt))``; raises DomainError at the poles ``delta``, ``delta + 1/2``."""
    yt = np.mod(np.asarray(yt, dtype=float), 1.0)
    s = yt - delta
    # u = shifted_tent + 1/2, formed per branch without cancellation
    u = np.where(yt < delta, -2.0 * s,
                 np.where(yt < 0.5 + delta, 2.0 * s, 2.0 - 2.0 * s))
    bad = (u <= 0.0) | (u >= 1.0)
    if np.any(bad):
        where = float(np.asarray(yt)[bad].flat[0]) if np.ndim(yt) else float(yt)
        raise DomainError(f"lognormal periodization has a pole at {where!r} "
                          f"(poles at {delta!r} and {delta + 0.5!r})")
    return normal_quantile(u)


def lognormal_inverse(y, delta: float):
    return shifted_tent_inverse(tau1_inverse(y), delta)


# descriptor ------------------------------------------------------------------


@dataclass(frozen=True)
class Periodization:
    """Which torus-to-domain map a black box or approximant uses.

    ``kind`` is one of ``"none"``, ``"tent"`` or ``"lognormal"``.
    """

    kind: str = "none"
    alpha: float | None = None
    beta: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind == "none":
            pass
        elif self.kind == "tent":
            if self.alpha is None or self.beta is None or not self.alpha < self.beta:
                raise ValueError(f"tent periodization needs alpha < beta, got {self.alpha}, {self.beta}")
        elif self.kind == "lognormal":
            if self.delta is None or not 0.0 < self.delta < 0.5:
                raise ValueError(f"lognormal shift must lie in (0, 1/2), got {self.delta}")
        else:
            raise ValueError(f"unknown periodization kind {self.kind!r}")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def tent(cls, alpha: float = -1.0, beta: float = 1.0):
        return cls("tent", alpha=float(alpha), beta=float(beta))

    @classmethod
    def lognormal(cls, delta: float):
        return cls("lognormal", delta=float(delta))

    def forward(self, yt):
        """Torus points to parameter-domain points."""
        if self.kind == "none":
            return np.asarray(yt, dtype=float)
        if self.kind == "tent":
            return tent_forward(yt, self.alpha, self.beta)
        return lognormal_forward(yt, self.delta)

    def inverse(self, y):
        """Parameter-domain points back to the torus."""
        if self.kind == "none":
            return np.asarray(y, dtype=float)
        if self.kind == "tent":
            return tent_inverse(y, self.alpha, self.beta)
        return lognormal_inverse(y, self.delta)

    def header_fields(self) -> dict:
        def fmt(v):
            return "-" if v is None else repr(float(v))
        return {"model": self.kind, "alpha": fmt(self.alpha), "beta": fmt(self.beta),
                "delta": fmt(self.delta)}

    @classmethod
    def from_header_fields(cls, fields: dict) -> "Periodization":
        def get(key):
            v = fields.get(key, "-")
            return None if v == "-" else float(v)
        return cls(fields.get("model", "none"), alpha=get("alpha"), beta=get("beta"),
                   delta=get("delta"))
