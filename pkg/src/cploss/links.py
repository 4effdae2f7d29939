"""Link functions: strictly increasing maps from probabilities to scores.

A :class:`Link` carries the forward map ``psi`` on (0, 1), its derivatives,
the inverse map ``q``, and the score range.  The catalog covers the identity,
logit, complementary log-log, square and cosine links; :func:`canonical_link`
builds the link whose derivative equals a given weight function, which makes
the link-adjusted weight ``rho = w / psi'`` identically one.

Instances are immutable and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import NumericsError
from .weights import WeightFunction, _as_array_fn, synthesize_antiderivatives

__all__ = [
    "Link",
    "Rho",
    "catalog_link",
    "canonical_link",
    "rho_of",
    "numeric_inverse",
    "LINK_CATALOG_INFO",
]

_GRID = np.linspace(0.01, 0.99, 99)


@dataclass(frozen=True)
class Link:
    """Strictly increasing map ``psi`` from (0,1) to scores, with inverse ``q``."""

    psi: Callable
    psi_prime: Callable
    q: Callable
    psi_second: Callable | None = None
    q_prime: Callable | None = None
    range: tuple[float, float] = (-math.inf, math.inf)
    name: str = "custom"

    def __post_init__(self):
        dpsi = np.asarray(self.psi_prime(_GRID), dtype=float)
        if np.any(dpsi <= 0) or not np.all(np.isfinite(dpsi)):
            raise ValueError(f"link {self.name!r} needs psi_prime > 0 on (0,1)")
        round_trip = np.asarray(self.q(np.asarray(self.psi(_GRID), dtype=float)), dtype=float)
        if not np.allclose(round_trip, _GRID, atol=1e-9, rtol=0):
            raise ValueError(f"link {self.name!r}: q(psi(x)) != x on the check grid")

    def contains(self, v: float, tol: float = 1e-9) -> bool:
        lo, hi = self.range
        return (lo - tol) <= v <= (hi + tol)


@dataclass(frozen=True)
class Rho:
    """Link-adjusted weight rho = w / psi', the intrinsic composite parametrisation."""

    fn: Callable
    name: str = "rho"

    def __call__(self, x):
        return self.fn(x)


def rho_of(wf: WeightFunction, link: Link) -> Rho:
    """rho(x) = w(x) / psi'(x); rejects weights with atoms."""
    if wf.has_atoms:
        raise ValueError("rho is undefined for weights with atoms")
    if wf.w is link.psi_prime:
        # canonical pairing shares the very same function object
        return Rho(_as_array_fn(lambda x: np.ones_like(np.asarray(x, dtype=float))),
                   name=f"rho({wf.name},{link.name})")
    return Rho(
        _as_array_fn(lambda x: np.asarray(wf.w(x), dtype=float)
                     / np.asarray(link.psi_prime(x), dtype=float)),
        name=f"rho({wf.name},{link.name})",
    )


def numeric_inverse(psi: Callable, tol: float = 1e-12,
                    domain: tuple[float, float] = (1e-15, 1.0 - 1e-15)) -> Callable:
    """Invert a strictly increasing map on (0,1) by safeguarded bisection."""
    from functools import lru_cache

    @lru_cache(maxsize=65536)
    def q_scalar(v: float) -> float:
        lo, hi = domain
        flo = float(psi(np.asarray(lo)))
        fhi = float(psi(np.asarray(hi)))
        if v <= flo:
            return lo
        if v >= fhi:
            return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = float(psi(np.asarray(mid)))
            if fm < v:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * max(1.0, abs(mid)):
                break
        return 0.5 * (lo + hi)

    vec = np.vectorize(q_scalar, otypes=[float])
    return _as_array_fn(vec)


def _identity() -> Link:
    return Link(
        psi=_as_array_fn(lambda x: x),
        psi_prime=_as_array_fn(lambda x: np.ones_like(x)),
        psi_second=_as_array_fn(lambda x: np.zeros_like(x)),
        q=_as_array_fn(lambda v: v),
        q_prime=_as_array_fn(lambda v: np.ones_like(v)),
        range=(0.0, 1.0),
        name="identity",
    )


def _logit() -> Link:
    def q(v):
        v = np.asarray(v, dtype=float)
        return np.where(v >= 0, 1.0 / (1.0 + np.exp(-v)),
                        np.exp(v) / (1.0 + np.exp(v)))

    return Link(
        psi=_as_array_fn(lambda x: np.log(x / (1.0 - x))),
        psi_prime=_as_array_fn(lambda x: 1.0 / (x * (1.0 - x))),
        psi_second=_as_array_fn(lambda x: (2.0 * x - 1.0) / (x * (1.0 - x)) ** 2),
        q=_as_array_fn(q),
        q_prime=_as_array_fn(lambda v: q(v) * (1.0 - q(v))),
        name="logit",
    )


def _cll() -> Link:
    # psi(x) = log(-log(1-x)); q(v) = 1 - exp(-exp(v))
    def psi_prime(x):
        L = -np.log(1.0 - x)
        return 1.0 / ((1.0 - x) * L)

    def psi_second(x):
        L = -np.log(1.0 - x)
        return (L - 1.0) / ((1.0 - x) * L) ** 2

    return Link(
        psi=_as_array_fn(lambda x: np.log(-np.log(1.0 - x))),
        psi_prime=_as_array_fn(psi_prime),
        psi_second=_as_array_fn(psi_second),
        q=_as_array_fn(lambda v: -np.expm1(-np.exp(v))),
        q_prime=_as_array_fn(lambda v: np.exp(v - np.exp(v))),
        name="cll",
    )


def _square_link() -> Link:
    return Link(
        psi=_as_array_fn(lambda x: x * x),
        psi_prime=_as_array_fn(lambda x: 2.0 * x),
        psi_second=_as_array_fn(lambda x: 2.0 * np.ones_like(x)),
        q=_as_array_fn(lambda v: np.sqrt(np.maximum(v, 0.0))),
        q_prime=_as_array_fn(lambda v: 0.5 / np.sqrt(np.maximum(v, 1e-300))),
        range=(0.0, 1.0),
        name="square-link",
    )


def _cosine() -> Link:
    return Link(
        psi=_as_array_fn(lambda x: 1.0 - np.cos(np.pi * x)),
        psi_prime=_as_array_fn(lambda x: np.pi * np.sin(np.pi * x)),
        psi_second=_as_array_fn(lambda x: np.pi ** 2 * np.cos(np.pi * x)),
        q=_as_array_fn(lambda v: np.arccos(np.clip(1.0 - v, -1.0, 1.0)) / np.pi),
        q_prime=_as_array_fn(lambda v: 1.0 / (np.pi * np.sqrt(np.maximum(v * (2.0 - v), 1e-300)))),
        range=(0.0, 2.0),
        name="cosine",
    )


LINK_CATALOG_INFO: dict[str, str] = {
    "identity": "psi(x) = x",
    "logit": "psi(x) = log(x/(1-x)), q(v) = 1/(1+exp(-v))",
    "cll": "psi(x) = log(-log(1-x)), q(v) = 1-exp(-exp(v))",
    "square-link": "psi(x) = x^2",
    "cosine": "psi(x) = 1 - cos(pi*x)",
}


def catalog_link(name: str) -> Link:
    """Construct a catalog link by name."""
    builders = {
        "identity": _identity,
        "logit": _logit,
        "cll": _cll,
        "square-link": _square_link,
        "cosine": _cosine,
    }
    if name not in builders:
        raise ValueError(f"unknown link name {name!r}")
    return builders[name]()


def canonical_link(wf: WeightFunction) -> Link:
    """The link with psi' = w, anchored so that psi(1/2) = 0.

    With this link the composite's intrinsic weight ``rho = w / psi'`` is
    identically one.  The ``psi_prime`` of the returned link is the weight's
    own ``w`` callable (shared object).
    """
    if wf.has_atoms:
        raise ValueError("canonical link is undefined for weights with atoms")
    wf = synthesize_antiderivatives(wf)
    W_half = float(wf.W(np.asarray(0.5)))
    psi = _as_array_fn(lambda x, _W=wf.W: np.asarray(_W(x), dtype=float) - W_half)

    # A synthesized antiderivative of a weight with a strong endpoint
    # singularity may not be evaluable arbitrarily close to 0 or 1; back off
    # to the nearest offset that works and treat it as the score range.
    def probe(side: float) -> tuple[float, float]:
        for eps in (1e-12, 1e-9, 1e-6, 1e-4):
            x = eps if side == 0.0 else 1.0 - eps
            try:
                val = float(psi(np.asarray(x)))
            except NumericsError:
                continue
            if np.isfinite(val):
                return x, val
        raise ValueError(f"canonical link of {wf.name!r}: psi not evaluable near {side}")

    x_lo, v_lo = probe(0.0)
    x_hi, v_hi = probe(1.0)
    q = numeric_inverse(psi, domain=(x_lo, x_hi))
    return Link(
        psi=psi,
        psi_prime=wf.w,
        psi_second=wf.w_prime,
        q=q,
        q_prime=None,
        range=(v_lo, v_hi),
        name=f"canonical({wf.name})",
    )
