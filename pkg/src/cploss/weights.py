"""Weight functions: the curvature parametrisation of proper losses.

A weight function is a nonnegative density ``w`` on (0, 1), optionally with
point masses (``atoms``), a derivative, and antiderivatives ``W`` (of w) and
``Wbar`` (of W).  Atoms are carried symbolically as ``(location, mass)``
pairs and are never smoothed; operations that cannot handle them reject
them explicitly.

All instances are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .numerics import finite_diff, integrate

__all__ = [
    "WeightFunction",
    "catalog_weight",
    "normalize_weight",
    "tabulated_weight",
    "WEIGHT_CATALOG_INFO",
]

# Sanity grid for construction-time checks; avoids 0.5 where piecewise
# catalog entries (minimal) have a kink that degrades central differences.
_CHECK_GRID = np.array([0.1, 0.2, 0.3, 0.4, 0.45, 0.55, 0.6, 0.7, 0.8, 0.9])


def _as_array_fn(fn: Callable) -> Callable:
    """Wrap a scalar/array function so numpy warnings from dead branches stay quiet."""

    def wrapped(x):
        with np.errstate(all="ignore"):
            return fn(np.asarray(x, dtype=float))

    return wrapped


@dataclass(frozen=True)
class WeightFunction:
    """Nonnegative weight ``w`` on (0, 1) with optional structure.

    Parameters
    ----------
    w : callable
        Continuous part of the weight; must accept ndarrays.
    w_prime, W, Wbar : callable, optional
        Derivative of ``w`` and the antiderivatives of ``w`` and ``W``.
        Any antiderivative constant is acceptable: every consumer is
        invariant to it.
    atoms : sequence of (location, mass)
        Point masses in (0, 1) with positive mass.
    """

    w: Callable
    w_prime: Callable | None = None
    W: Callable | None = None
    Wbar: Callable | None = None
    atoms: tuple[tuple[float, float], ...] = ()
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(c), float(m)) for c, m in self.atoms))
        for c, m in self.atoms:
            if not 0.0 < c < 1.0:
                raise ValueError(f"atom location must lie in (0,1), got {c}")
            if not m > 0.0:
                raise ValueError(f"atom mass must be positive, got {m}")
        vals = np.asarray(self.w(_CHECK_GRID), dtype=float)
        if np.any(vals < -1e-12) or not np.all(np.isfinite(vals)):
            raise ValueError(f"weight {self.name!r} must be finite and nonnegative on (0,1)")
        # Interior integrability probe: finite mass over [1e-3, 1-1e-3],
        # estimated on a fixed composite grid (bounded cost by design; this
        # is a sanity net, not a tolerance-grade integral).
        probe = np.linspace(1e-3, 1.0 - 1e-3, 257)
        pv = np.asarray(self.w(probe), dtype=float)
        mass = float(np.trapezoid(pv, probe)) if hasattr(np, "trapezoid") else float(np.trapz(pv, probe))
        if not np.isfinite(mass):
            raise ValueError(f"weight {self.name!r} has non-integrable interior mass")
        # Supplied antiderivatives must differentiate back to their integrands.
        if self.W is not None:
            for x in _CHECK_GRID:
                got = finite_diff(lambda t: float(self.W(np.asarray(t))), float(x), 1)
                want = float(self.w(np.asarray(x)))
                if abs(got - want) > 1e-6 * max(1.0, abs(want)):
                    raise ValueError(f"W inconsistent with w for {self.name!r} at x={x}")
        if self.Wbar is not None:
            if self.W is None:
                raise ValueError("Wbar supplied without W")
            for x in _CHECK_GRID:
                got = finite_diff(lambda t: float(self.Wbar(np.asarray(t))), float(x), 1)
                want = float(self.W(np.asarray(x)))
                if abs(got - want) > 1e-6 * max(1.0, abs(want)):
                    raise ValueError(f"Wbar inconsistent with W for {self.name!r} at x={x}")

    @property
    def has_atoms(self) -> bool:
        return len(self.atoms) > 0

    @property
    def is_pure_atomic(self) -> bool:
        """True when the continuous part vanishes identically (probed on a grid)."""
        return self.has_atoms and bool(np.all(np.abs(self.w(_CHECK_GRID)) < 1e-300))

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        """Whether w(c) = w(1-c) (atoms included) within ``tol`` on a grid."""
        xs = np.linspace(0.01, 0.99, 197)
        vals = np.asarray(self.w(xs), dtype=float)
        if not np.allclose(vals, vals[::-1], atol=tol, rtol=tol):
            return False
        mirrored = sorted((round(1.0 - c, 12), m) for c, m in self.atoms)
        return mirrored == sorted((round(c, 12), m) for c, m in self.atoms)


def _square() -> WeightFunction:
    return WeightFunction(
        w=_as_array_fn(lambda c: np.ones_like(c)),
        w_prime=_as_array_fn(lambda c: np.zeros_like(c)),
        W=_as_array_fn(lambda c: c),
        Wbar=_as_array_fn(lambda c: c * c / 2.0),
        name="square",
    )


def _log() -> WeightFunction:
    return WeightFunction(
        w=_as_array_fn(lambda c: 1.0 / ((1.0 - c) * c)),
        w_prime=_as_array_fn(lambda c: (2.0 * c - 1.0) / ((1.0 - c) * c) ** 2),
        W=_as_array_fn(lambda c: np.log(c / (1.0 - c))),
        Wbar=_as_array_fn(
            lambda c: np.where(c > 0, c * np.log(np.maximum(c, 1e-300)), 0.0)
            + np.where(c < 1, (1.0 - c) * np.log(np.maximum(1.0 - c, 1e-300)), 0.0)
        ),
        name="log",
    )


def _boosting() -> WeightFunction:
    return WeightFunction(
        w=_as_array_fn(lambda c: ((1.0 - c) * c) ** -1.5),
        w_prime=_as_array_fn(lambda c: 1.5 * (2.0 * c - 1.0) * ((1.0 - c) * c) ** -2.5),
        W=_as_array_fn(lambda c: 2.0 * (2.0 * c - 1.0) / np.sqrt(c * (1.0 - c))),
        Wbar=_as_array_fn(lambda c: -4.0 * np.sqrt(c * (1.0 - c))),
        name="boosting",
    )


def _one_over_c() -> WeightFunction:
    return WeightFunction(
        w=_as_array_fn(lambda c: 1.0 / c),
        w_prime=_as_array_fn(lambda c: -1.0 / c ** 2),
        W=_as_array_fn(lambda c: np.log(c)),
        Wbar=_as_array_fn(lambda c: np.where(c > 0, c * np.log(np.maximum(c, 1e-300)) - c, 0.0)),
        name="w1-over-c",
    )


def _one_over_1mc() -> WeightFunction:
    return WeightFunction(
        w=_as_array_fn(lambda c: 1.0 / (1.0 - c)),
        w_prime=_as_array_fn(lambda c: 1.0 / (1.0 - c) ** 2),
        W=_as_array_fn(lambda c: -np.log(1.0 - c)),
        Wbar=_as_array_fn(
            lambda c: np.where(c < 1, (1.0 - c) * np.log(np.maximum(1.0 - c, 1e-300)), 0.0) + c
        ),
        name="w1-over-1mc",
    )


def _minimal() -> WeightFunction:
    # Lower envelope of the identity-link convexity region: the pointwise
    # smallest weight (normalised to w(1/2)=1) whose loss is still convex.
    def w(c):
        return 0.5 * np.minimum(1.0 / c, 1.0 / (1.0 - c))

    def w_prime(c):
        c = np.asarray(c, dtype=float)
        # subgradient convention at the kink: 0 (interior of [-2, 2])
        out = np.where(c < 0.5, 0.5 / (1.0 - c) ** 2, -0.5 / c ** 2)
        return np.where(c == 0.5, 0.0, out)

    def W(c):
        c = np.asarray(c, dtype=float)
        low = -0.5 * np.log(2.0 * np.maximum(1.0 - c, 1e-300))
        high = 0.5 * np.log(2.0 * np.maximum(c, 1e-300))
        return np.where(c < 0.5, low, high)

    def Wbar(c):
        c = np.asarray(c, dtype=float)
        cm = np.maximum(c, 1e-300)
        om = np.maximum(1.0 - c, 1e-300)
        low = 0.5 * ((1.0 - c) * np.log(2.0 * om) + c) - 0.25
        high = 0.5 * (c * np.log(2.0 * cm) - c) + 0.25
        return np.where(c < 0.5, low, high)

    return WeightFunction(
        w=_as_array_fn(w), w_prime=_as_array_fn(w_prime),
        W=_as_array_fn(W), Wbar=_as_array_fn(Wbar), name="minimal",
    )


def _zero_w(c):
    return np.zeros_like(np.asarray(c, dtype=float))


def tabulated_weight(table: Sequence[Sequence[float]], name: str = "custom-tabulated") -> WeightFunction:
    """Weight from a table of ``(c, w(c))`` pairs, linearly interpolated."""
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ValueError("table must be a sequence of at least two (c, w) pairs")
    order = np.argsort(arr[:, 0])
    cs, ws = arr[order, 0], arr[order, 1]
    if np.any(ws < 0):
        raise ValueError("tabulated weight values must be nonnegative")

    def w(c):
        return np.interp(np.asarray(c, dtype=float), cs, ws)

    return WeightFunction(w=_as_array_fn(w), name=name)


WEIGHT_CATALOG_INFO: dict[str, str] = {
    "zero-one": "w(c) = 2*delta(c - 1/2)",
    "cost": "w(c) = delta(c - c0), parameter c0 in (0,1)",
    "square": "w(c) = 1",
    "log": "w(c) = 1/((1-c)c)",
    "boosting": "w(c) = ((1-c)c)^(-3/2)",
    "w1-over-c": "w(c) = 1/c",
    "w1-over-1mc": "w(c) = 1/(1-c)",
    "minimal": "w(c) = (1/2)(1/c ^ 1/(1-c))  (pointwise minimum)",
    "custom-tabulated": "linear interpolation of (c, w) pairs",
}


def catalog_weight(name: str, params: dict | None = None) -> WeightFunction:
    """Construct a catalog weight function by name.

    ``cost`` requires ``params={"c0": ...}`` with c0 in (0,1);
    ``custom-tabulated`` requires ``params={"table": [[c, w], ...]}``.
    """
    params = dict(params or {})
    if name == "square":
        return _square()
    if name == "log":
        return _log()
    if name == "boosting":
        return _boosting()
    if name == "w1-over-c":
        return _one_over_c()
    if name == "w1-over-1mc":
        return _one_over_1mc()
    if name == "minimal":
        return _minimal()
    if name == "zero-one":
        return WeightFunction(w=_as_array_fn(_zero_w), atoms=((0.5, 2.0),), name="zero-one")
    if name == "cost":
        c0 = params.get("c0")
        if c0 is None or not 0.0 < float(c0) < 1.0:
            raise ValueError("cost weight requires parameter c0 in (0,1)")
        c0 = float(c0)
        return WeightFunction(w=_as_array_fn(_zero_w), atoms=((c0, 1.0),), name=f"cost({c0})")
    if name == "custom-tabulated":
        if "table" not in params:
            raise ValueError("custom-tabulated weight requires parameter 'table'")
        return tabulated_weight(params["table"])
    raise ValueError(f"unknown weight name {name!r}")


def normalize_weight(wf: WeightFunction) -> WeightFunction:
    """Rescale so that w(1/2) = 1 (atoms scaled by the same factor)."""
    for c, _ in wf.atoms:
        if abs(c - 0.5) < 1e-12:
            raise ValueError("cannot normalise a weight with an atom at 1/2")
    w_half = float(wf.w(np.asarray(0.5)))
    if not np.isfinite(w_half) or w_half <= 0.0:
        raise ValueError(f"w(1/2) must be finite and positive to normalise, got {w_half}")
    s = 1.0 / w_half
    scale = lambda fn: (None if fn is None else _as_array_fn(lambda c, _f=fn: s * np.asarray(_f(c))))
    return WeightFunction(
        w=scale(wf.w),
        w_prime=scale(wf.w_prime),
        W=scale(wf.W),
        Wbar=scale(wf.Wbar),
        atoms=tuple((c, s * m) for c, m in wf.atoms),
        name=f"{wf.name}-normalized",
    )


def synthesize_antiderivatives(wf: WeightFunction) -> WeightFunction:
    """Fill in missing W and Wbar numerically, anchored at W(1/2) = Wbar(1/2) = 0."""
    if wf.W is not None and wf.Wbar is not None:
        return wf
    if wf.is_pure_atomic:
        raise ValueError("cannot synthesize antiderivatives for a purely atomic weight")
    base = wf
    W = wf.W
    if W is None:
        def W_scalar(t: float) -> float:
            t = float(t)
            if t >= 0.5:
                return integrate(base.w, 0.5, t)
            return -integrate(base.w, t, 0.5)

        W = _as_array_fn(np.vectorize(W_scalar, otypes=[float]))
    Wfn = W

    def Wbar_scalar(t: float) -> float:
        t = float(t)
        if t >= 0.5:
            return integrate(Wfn, 0.5, t)
        return -integrate(Wfn, t, 0.5)

    Wbar = _as_array_fn(np.vectorize(Wbar_scalar, otypes=[float]))
    return replace(wf, W=W, Wbar=Wbar)
