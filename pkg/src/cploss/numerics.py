"""Deterministic scalar numerics used by every other module.

Adaptive quadrature tolerant of integrable endpoint singularities, bracketed
scalar minimisation, the principal branch of the Lambert W function, and
central finite differences.  Everything here is pure and reentrant: no global
mutable state, safe to call from multiple threads.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NumericsError",
    "IntegrationError",
    "QuadratureSpec",
    "MinimizeResult",
    "DEFAULT_QUADRATURE",
    "integrate",
    "minimize_scalar",
    "lambert_w0",
    "finite_diff",
]


class NumericsError(Exception):
    """A numeric routine received bad input or an evaluation failed hard."""


class IntegrationError(NumericsError):
    """Adaptive quadrature ran out of depth.

    Attributes
    ----------
    estimate : float
        The partial estimate accumulated before giving up.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureSpec:
    """Error targets and subdivision limits for :func:`integrate`.

    ``endpoint_shrink`` is the width below which an interval is accepted
    without further refinement; it caps the recursion chain that forms
    against an integrable endpoint singularity.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_depth: int = 60
    endpoint_shrink: float = 1e-12

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if not 0 < self.endpoint_shrink <= 1e-6:
            raise ValueError("endpoint_shrink must lie in (0, 1e-6]")


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True)
class MinimizeResult:
    argmin: float
    min_value: float
    iterations: int
    converged: bool


# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK constants).
_XGK = np.array([
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0,
])
_WGK = np.array([
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278,
])
_WG = np.array([
    0.1294849661688697, 0.2797053914892767,
    0.3818300505051189, 0.4179591836734694,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 ascending nodes
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[1:-1:2] = np.concatenate([_WG[:-1], _WG[::-1]])   # Gauss nodes sit at odd slots


def _gk15(f: Callable, a: float, b: float) -> tuple[float, float]:
    """One Gauss-Kronrod 7/15 panel; returns (estimate, error_estimate)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    xs = mid + half * _NODES
    ys = np.asarray(f(xs), dtype=float)
    if ys.shape != xs.shape:
        raise NumericsError("integrand must map an ndarray of points to an ndarray")
    if not np.all(np.isfinite(ys)):
        bad = xs[~np.isfinite(ys)][0]
        raise NumericsError(f"integrand returned a non-finite value at x={bad!r}")
    k15 = half * float(_KRONROD_W @ ys)
    g7 = half * float(_GAUSS_W @ ys)
    return k15, abs(k15 - g7)


def integrate(f: Callable, a: float, b: float,
              spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Estimate the integral of ``f`` over ``[a, b]``.

    ``f`` must accept an ndarray of evaluation points and return an ndarray
    of values.  Quadrature nodes are strictly interior, so integrable
    singularities at ``a`` or ``b`` are permitted: the adaptive bisection
    refines toward them and stops once an interval is narrower than
    ``spec.endpoint_shrink``.  Logarithmic endpoint singularities resolve to
    the requested tolerance; algebraic ones (such as x**-0.5) bottom out
    around 1e-7 absolute, the truncation cost of the width cutoff.

    Raises
    ------
    NumericsError
        If the integrand returns NaN/inf at an interior node or the bounds
        are invalid.
    IntegrationError
        If ``spec.max_depth`` is exhausted before the tolerance is met; the
        exception carries the partial estimate.
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NumericsError("integration bounds must be finite")
    if a > b:
        raise NumericsError("integrate requires a <= b; negate for reversed bounds")
    if a == b:
        return 0.0

    # Globally adaptive bisection: keep a worst-first queue of open panels
    # and split the one with the largest error estimate until the total
    # (open + frozen) error meets the tolerance.  Panels narrower than
    # endpoint_shrink are frozen instead of split, which is what bounds the
    # refinement chain that forms against an integrable endpoint
    # singularity.
    est0, err0 = _gk15(f, a, b)
    counter = itertools.count()
    heap = [(-err0, next(counter), a, b, est0, 0)]
    total_est = est0
    open_err = err0
    frozen_err = 0.0
    while heap:
        tol = max(spec.abs_tol, spec.rel_tol * abs(total_est))
        # Stop when within tolerance, or when the open error is dominated by
        # the irreducible frozen part (further splitting cannot help).
        if open_err <= max(tol - frozen_err, 0.25 * frozen_err):
            break
        neg_err, _, lo, hi, est, depth = heapq.heappop(heap)
        err = -neg_err
        if (hi - lo) <= spec.endpoint_shrink:
            frozen_err += err
            open_err -= err
            continue
        if depth >= spec.max_depth:
            raise IntegrationError(
                f"quadrature did not converge on [{lo!r}, {hi!r}] at depth {depth}",
                estimate=total_est,
            )
        mid = 0.5 * (lo + hi)
        left, lerr = _gk15(f, lo, mid)
        right, rerr = _gk15(f, mid, hi)
        total_est += left + right - est
        open_err += lerr + rerr - err
        heapq.heappush(heap, (-lerr, next(counter), lo, mid, left, depth + 1))
        heapq.heappush(heap, (-rerr, next(counter), mid, hi, right, depth + 1))

    total_err = open_err + frozen_err
    tol = max(spec.abs_tol, spec.rel_tol * abs(total_est))
    if total_err > max(1e6 * tol, 1e-3 * abs(total_est)):
        raise IntegrationError(
            f"quadrature error estimate {total_err!r} far exceeds tolerance {tol!r}",
            estimate=total_est,
        )
    return total_est


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_scalar(f: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-9, max_iter: int = 500) -> MinimizeResult:
    """Minimise ``f`` on ``[lo, hi]`` by golden-section search with parabolic steps.

    For a unimodal objective the returned argmin is within ``tol`` (absolute)
    of the minimiser.  The bracket endpoints are compared explicitly, so
    boundary minima are returned exactly (``argmin == lo`` or ``argmin ==
    hi``); when the objective cannot distinguish the endpoint from the final
    interior iterate, the endpoint is preferred.

    Like every derivative-free minimiser, the achievable argument resolution
    is bounded below by sqrt(eps * |f| / f''); ``tol`` below that limit is
    not enforceable.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo = float(lo)
    hi = float(hi)
    if not lo < hi:
        raise ValueError("minimize_scalar requires lo < hi")

    # Brent-style bounded minimisation: golden-section fallback, parabolic
    # interpolation when the fitted step is sane.
    a, b = lo, hi
    x = w = v = a + _INVPHI * (b - a)
    fx = fw = fv = f(x)
    d = e = 0.0
    iterations = 1
    converged = False
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = 0.25 * tol + 1e-15 * abs(x)
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            converged = True
            break
        use_golden = True
        if abs(e) > tol1:
            # parabola through (v, fv), (w, fw), (x, fx)
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev = e
            e = d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < m else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < m else (a - x)
            d = (1.0 - _INVPHI) * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = f(u)
        iterations += 1
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu

    # Endpoint awareness: a minimiser sitting on the bracket boundary is
    # reported as that boundary when it is at least as good.  The second
    # branch snaps an interior iterate crowded against the boundary (equal
    # value up to evaluation noise) onto the boundary itself.  Endpoints
    # where the objective fails or blows up are skipped.
    margin = 1e-12 * (1.0 + abs(fx))
    snap = max(4.0 * tol, 1e-7 * (1.0 + abs(x)))
    for end in (lo, hi):
        try:
            fe = float(f(end))
        except Exception:
            continue
        iterations += 1
        if not math.isfinite(fe):
            continue
        if fe < fx - margin:
            x, fx = end, fe
        elif fe <= fx + margin and abs(end - x) <= snap:
            x, fx = end, fe
    return MinimizeResult(argmin=x, min_value=fx, iterations=iterations,
                          converged=converged)


_BRANCH_POINT = -1.0 / math.e


def lambert_w0(z: float) -> float:
    """Principal branch of the Lambert W function: w with w*exp(w) = z, w >= -1.

    Defined for ``z >= -1/e``; values within 1e-12 below the branch point are
    clamped to it so that exact-arithmetic corner cases survive rounding.
    """
    z = float(z)
    if math.isnan(z):
        raise NumericsError("lambert_w0: NaN argument")
    if z < _BRANCH_POINT:
        if z > _BRANCH_POINT - 1e-12:
            return -1.0
        raise NumericsError(f"lambert_w0 requires z >= -1/e, got {z!r}")
    if z == _BRANCH_POINT:
        return -1.0
    if z == 0.0:
        return 0.0

    # Initial guess: series near the branch point, log asymptotics elsewhere.
    if z < -0.25:
        p = math.sqrt(2.0 * (math.e * z + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
    elif z < math.e:
        w = z / (1.0 + z) if z > 0 else z * (1.0 - z)
        w = max(w, -0.99)
    else:
        lz = math.log(z)
        w = lz - math.log(lz)

    # Halley iterations.
    for _ in range(60):
        ew = math.exp(w)
        resid = w * ew - z
        if resid == 0.0:
            break
        denom = ew * (w + 1.0) - (w + 2.0) * resid / (2.0 * w + 2.0)
        step = resid / denom
        w -= step
        if abs(step) <= 1e-14 * (1.0 + abs(w)):
            break
    return w


def finite_diff(f: Callable[[float], float], x: float, order: int = 1,
                h: float | None = None) -> float:
    """Central finite-difference estimate of f' or f'' at ``x``."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if h is None:
        h = 1e-5 * max(1.0, abs(x))
    if h <= 0:
        raise ValueError("h must be positive")
    if order == 1:
        return (float(f(x + h)) - float(f(x - h))) / (2.0 * h)
    return (float(f(x + h)) - 2.0 * float(f(x)) + float(f(x - h))) / (h * h)
