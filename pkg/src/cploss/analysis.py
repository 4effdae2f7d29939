"""Certifiers for properness, convexity and classification calibration.

Convexity of a composite loss is decided two independent ways: through the
weight/link characterisation

    -1/x  <=  w'(x)/w(x) - psi''(x)/psi'(x)  <=  1/(1-x)    on (0,1),

and through a brute-force oracle on discrete second differences of the
partial losses over a score grid.  Either route produces a
:class:`ConvexityReport` whose violations carry both compared quantities.
Certification is grid-based and reported as such, never as a formal proof.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .composite import CompositeLoss
from .links import Link
from .numerics import finite_diff
from .proper import CostLoss, ProperLoss
from .weights import WeightFunction, normalize_weight, tabulated_weight

__all__ = [
    "ConvexityReport",
    "RegionCurve",
    "StrictnessError",
    "certification_grid",
    "check_proper",
    "convexity_characterization",
    "convexity_oracle",
    "allowable_region",
    "calibration_cc",
    "calibration_composite",
]


class StrictnessError(ValueError):
    """The convexity characterisation needs a strictly positive weight."""


@dataclass(frozen=True)
class ConvexityReport:
    """Outcome of a convexity certification.

    ``violations`` holds ``(x, side, lhs, rhs)`` tuples: the probability
    coordinate, which bound failed ("lower" tracks the negative partial,
    "upper" the positive one), and the two compared quantities.
    """

    convex: bool
    violations: tuple[tuple[float, str, float, float], ...]
    method: str
    grid_size: int = 0
    tolerance: float = 1e-9

    def violation_xs(self, side: str | None = None) -> np.ndarray:
        xs = [v[0] for v in self.violations if side is None or v[1] == side]
        return np.asarray(xs, dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "convex": self.convex,
            "method": self.method,
            "grid_size": self.grid_size,
            "tolerance": self.tolerance,
            "violations": [
                {"x": float(x), "side": side, "lhs": float(l), "rhs": float(r)}
                for x, side, l, r in self.violations
            ],
        }


@dataclass(frozen=True)
class RegionCurve:
    """The two envelope curves bounding convexity-compatible weights.

    For a link psi (weight normalised to w(1/2) = 1) the curves are
    ``lower = psi'(x) / (2 psi'(1/2) x)`` and
    ``upper = psi'(x) / (2 psi'(1/2) (1-x))``.  Which curve binds from
    below flips at x = 1/2: for x <= 1/2 admissibility means
    upper <= w <= lower, and for x >= 1/2 it means lower <= w <= upper.
    """

    xs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    link_name: str = ""

    def contains(self, wf: WeightFunction, tol: float = 1e-9) -> bool:
        """Whether the (normalised) weight lies inside the region on the grid."""
        w = np.asarray(normalize_weight(wf).w(self.xs), dtype=float)
        lo_bound = np.where(self.xs >= 0.5, self.lower, self.upper)
        hi_bound = np.where(self.xs >= 0.5, self.upper, self.lower)
        slack = tol * np.maximum(1.0, np.maximum(np.abs(lo_bound), np.abs(hi_bound)))
        return bool(np.all(w >= lo_bound - slack) and np.all(w <= hi_bound + slack))

    def to_csv(self, file) -> None:
        """Write ``x,lower,upper`` rows at 17 significant digits."""
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["x", "lower", "upper"])
        for x, lo, hi in zip(self.xs, self.lower, self.upper):
            writer.writerow([f"{x:.17g}", f"{lo:.17g}", f"{hi:.17g}"])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def certification_grid(n: int = 999,
                       boundary: Sequence[float] = (1e-3, 1e-4)) -> np.ndarray:
    """n interior points i/(n+1) plus extra probes near both endpoints."""
    core = np.arange(1, n + 1) / (n + 1.0)
    extra = np.concatenate([np.asarray(boundary, dtype=float),
                            1.0 - np.asarray(boundary, dtype=float)])
    return np.unique(np.concatenate([core, extra]))


def check_proper(ell_pos: Callable, ell_neg: Callable, grid: Sequence[float],
                 tol: float = 1e-3) -> tuple[bool, WeightFunction, float]:
    """Test a pair of partial losses for properness.

    A differentiable pair is proper exactly when the two slope ratios
    ``-ell_pos'(x)/(1-x)`` and ``ell_neg'(x)/x`` agree and are nonnegative;
    their common value is the weight.  Returns ``(proper, weight_estimate,
    max_residual)`` where the estimate averages the two ratios and the
    residual is the largest normalised disagreement.
    """
    grid = np.asarray(grid, dtype=float)
    r_pos = np.empty_like(grid)
    r_neg = np.empty_like(grid)
    for i, x in enumerate(grid):
        dp = finite_diff(lambda t: float(np.asarray(ell_pos(np.asarray(t)))), x, 1)
        dn = finite_diff(lambda t: float(np.asarray(ell_neg(np.asarray(t)))), x, 1)
        r_pos[i] = -dp / (1.0 - x)
        r_neg[i] = dn / x
    scale = np.maximum(1.0, np.maximum(np.abs(r_pos), np.abs(r_neg)))
    resid = np.abs(r_pos - r_neg) / scale
    max_resid = float(np.max(resid))
    proper = bool(max_resid <= tol
                  and np.all(r_pos >= -tol * scale)
                  and np.all(r_neg >= -tol * scale))
    est = np.maximum(0.5 * (r_pos + r_neg), 0.0)
    weight = tabulated_weight(np.column_stack([grid, est]), name="slope-ratio-estimate")
    return proper, weight, max_resid


def _log_weight_slope(wf: WeightFunction, xs: np.ndarray) -> np.ndarray:
    if wf.w_prime is not None:
        return (np.asarray(wf.w_prime(xs), dtype=float)
                / np.asarray(wf.w(xs), dtype=float))
    # derivative of log w by central differences: better conditioned when w
    # is small
    h = 1e-6
    up = np.log(np.asarray(wf.w(xs + h), dtype=float))
    dn = np.log(np.asarray(wf.w(xs - h), dtype=float))
    return (up - dn) / (2.0 * h)


def _link_curvature_ratio(link: Link, xs: np.ndarray) -> np.ndarray:
    dpsi = np.asarray(link.psi_prime(xs), dtype=float)
    if link.psi_second is not None:
        return np.asarray(link.psi_second(xs), dtype=float) / dpsi
    dd = np.array([finite_diff(lambda t: float(np.asarray(link.psi_prime(np.asarray(t)))),
                               x, 1, h=1e-6) for x in xs])
    return dd / dpsi


def convexity_characterization(wf: WeightFunction, link: Link,
                               grid: Sequence[float] | None = None,
                               tol: float = 1e-9) -> ConvexityReport:
    """Certify composite convexity through the weight/link slope condition.

    Evaluates ``w'/w - psi''/psi'`` against the bounds ``-1/x`` and
    ``1/(1-x)`` at every grid point.  The weight must be a strictly positive
    density on the grid (the characterisation assumes strict properness).
    """
    if grid is None:
        grid = certification_grid()
    xs = np.asarray(grid, dtype=float)
    if wf.has_atoms:
        raise StrictnessError("characterisation requires an atom-free weight")
    wvals = np.asarray(wf.w(xs), dtype=float)
    if np.any(wvals <= 0):
        raise StrictnessError("characterisation requires w > 0 on the grid")
    mid = _log_weight_slope(wf, xs) - _link_curvature_ratio(link, xs)
    lower = -1.0 / xs
    upper = 1.0 / (1.0 - xs)
    slack_lo = tol * np.maximum(1.0, np.maximum(np.abs(mid), np.abs(lower)))
    slack_hi = tol * np.maximum(1.0, np.maximum(np.abs(mid), np.abs(upper)))
    violations = []
    for i, x in enumerate(xs):
        if mid[i] < lower[i] - slack_lo[i]:
            violations.append((float(x), "lower", float(mid[i]), float(lower[i])))
        if mid[i] > upper[i] + slack_hi[i]:
            violations.append((float(x), "upper", float(mid[i]), float(upper[i])))
    return ConvexityReport(convex=not violations, violations=tuple(violations),
                           method="characterization", grid_size=len(xs), tolerance=tol)


def convexity_oracle(cl: CompositeLoss,
                     score_grid: Sequence[float] | None = None,
                     tol: float = 1e-8) -> ConvexityReport:
    """Brute-force convexity check on second differences of the partials.

    Convexity of both score-space partial losses is equivalent to convexity
    of every conditional risk, so checking y = -1 and y = +1 suffices.
    Violations are reported in probability coordinates ``x = q(v)`` with
    side "lower" for the negative partial and "upper" for the positive one.
    """
    if score_grid is None:
        score_grid = np.asarray(cl.link.psi(certification_grid()), dtype=float)
    vs = np.unique(np.asarray(score_grid, dtype=float))
    qs = np.asarray(cl.link.q(vs), dtype=float)
    violations = []
    for y, side in ((-1, "lower"), (1, "upper")):
        fv = np.asarray(cl.ell(y, vs), dtype=float)
        x0, x1, x2 = vs[:-2], vs[1:-1], vs[2:]
        f0, f1, f2 = fv[:-2], fv[1:-1], fv[2:]
        dd = 2.0 * ((f2 - f1) / (x2 - x1) - (f1 - f0) / (x1 - x0)) / (x2 - x0)
        # rounding floor of a divided difference: eps * |f| / dx^2
        step = np.minimum(x1 - x0, x2 - x1)
        floor = 4e-15 * np.maximum(1.0, np.abs(f1)) / (step * step)
        bad = dd < -(tol + floor)
        for i in np.nonzero(bad)[0]:
            violations.append((float(qs[i + 1]), side, float(dd[i]), 0.0))
    violations.sort()
    return ConvexityReport(convex=not violations, violations=tuple(violations),
                           method="oracle", grid_size=len(vs), tolerance=tol)


def allowable_region(link: Link, grid: Sequence[float] | None = None) -> RegionCurve:
    """Envelope curves for weights that keep the composite convex."""
    if grid is None:
        grid = certification_grid()
    xs = np.asarray(grid, dtype=float)
    dpsi_half = float(link.psi_prime(np.asarray(0.5)))
    if dpsi_half == 0.0 or not np.isfinite(dpsi_half):
        raise ValueError("allowable_region needs psi'(1/2) finite and nonzero")
    dpsi = np.asarray(link.psi_prime(xs), dtype=float)
    lower = dpsi / (2.0 * dpsi_half * xs)
    upper = dpsi / (2.0 * dpsi_half * (1.0 - xs))
    return RegionCurve(xs=xs, lower=lower, upper=upper, link_name=link.name)


def _atom_at(wf: WeightFunction, c: float, tol: float = 1e-12) -> bool:
    return any(abs(loc - c) <= tol for loc, _ in wf.atoms)


def calibration_cc(ell, c: float) -> bool | None:
    """Classification calibration at threshold ``c``.

    Accepts a :class:`ProperLoss`, a :class:`CostLoss`, or a pair of partial
    losses ``(ell_pos, ell_neg)``.  For proper losses calibration at ``c``
    is equivalent to the weight not vanishing there (atoms count); for raw
    partials the slope conditions are tested directly:
    ``ell_neg'(c) > 0``, ``ell_pos'(c) < 0`` and the stationarity identity
    ``c ell_pos'(c) + (1-c) ell_neg'(c) = 0`` within 1e-8 after normalising
    by ``|ell_neg'(c)|``.  Returns None ("indeterminate") when a derivative
    is numerically zero and the verdict would be a guess.
    """
    c = float(c)
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0,1)")
    if isinstance(ell, CostLoss):
        return abs(ell.c0 - c) <= 1e-12
    if isinstance(ell, ProperLoss):
        wf = ell.weight
        if _atom_at(wf, c):
            return True
        if wf.is_pure_atomic:
            return False
        wc = float(wf.w(np.asarray(c)))
        if wc > 1e-12:
            return True
        return False
    ell_pos, ell_neg = ell
    dp = finite_diff(lambda t: float(np.asarray(ell_pos(np.asarray(t)))), c, 1)
    dn = finite_diff(lambda t: float(np.asarray(ell_neg(np.asarray(t)))), c, 1)
    tau = 1e-8 * max(1.0, abs(dp), abs(dn))
    if abs(dn) <= tau or abs(dp) <= tau:
        return None
    stationary = abs(c * dp + (1.0 - c) * dn) / abs(dn) <= 1e-8
    return bool(dn > 0 and dp < 0 and stationary)


def calibration_composite(cl: CompositeLoss, c: float) -> bool | None:
    """Calibration of a composite loss: delegated to its base proper loss."""
    return calibration_cc(cl.base, c)
