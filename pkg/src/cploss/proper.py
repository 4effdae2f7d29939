"""Proper losses for class probability estimation.

A proper loss is determined (up to constants) by its weight function: the
partial losses are recovered from the weight by integration, the conditional
Bayes risk is concave with curvature equal to minus the weight, and the
regret is the Bregman divergence of the negative Bayes risk.  This module
constructs losses from weights, evaluates risks and regrets, checks the
tangent and mixture representations, recovers weights from losses, and
completes symmetric losses specified on half the unit interval.

ProperLoss values are immutable; every function here is pure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .numerics import IntegrationError, finite_diff, integrate
from .weights import (
    WeightFunction,
    _as_array_fn,
    catalog_weight,
    tabulated_weight,
)

__all__ = [
    "ImpropernessError",
    "ProperLoss",
    "CostLoss",
    "from_weight",
    "cost_loss",
    "zero_one_loss",
    "catalog_loss",
    "conditional_risk",
    "bayes_risk",
    "bayes_risk_prime",
    "regret",
    "savage_check",
    "schervish_check",
    "weight_from_loss",
    "reconstruct_symmetric",
]


class ImpropernessError(ValueError):
    """A construction or check found the loss not to be proper."""


@dataclass(frozen=True)
class ProperLoss:
    """Partial losses on [0, 1] together with their weight function.

    ``ell_pos`` is the penalty for predicting ``etahat`` when the label is
    positive, ``ell_neg`` for the negative label.  Both accept ndarrays.
    Derivative callables are closed forms when known, else None (consumers
    fall back to finite differences).
    """

    ell_pos: Callable
    ell_neg: Callable
    weight: WeightFunction
    fair: bool = True
    strictly_proper: bool = True
    ell_pos_prime: Callable | None = None
    ell_neg_prime: Callable | None = None
    name: str = "proper-loss"

    def ell(self, y: int, etahat):
        """Loss of predicting ``etahat`` against label ``y`` in {-1, +1}."""
        if y == 1:
            return self.ell_pos(etahat)
        if y == -1:
            return self.ell_neg(etahat)
        raise ValueError(f"label must be +1 or -1, got {y!r}")

    def validate(self) -> None:
        """Probe fairness, nonnegativity and regularity on small grids."""
        xs = np.linspace(0.01, 0.99, 25)
        if self.fair:
            lp = np.asarray(self.ell_pos(xs), dtype=float)
            ln_ = np.asarray(self.ell_neg(xs), dtype=float)
            if np.any(lp < -1e-9) or np.any(ln_ < -1e-9):
                raise ImpropernessError(f"{self.name}: fair loss has negative partial values")
            edge = max(abs(float(self.ell_neg(np.asarray(0.0)))),
                       abs(float(self.ell_pos(np.asarray(1.0)))))
            if not edge <= 1e-9:
                raise ImpropernessError(f"{self.name}: fairness anchors are not zero")
        for eps in (1e-4, 1e-6):
            a = eps * float(self.ell_pos(np.asarray(eps)))          # eta -> 0 side
            b = eps * float(self.ell_neg(np.asarray(1.0 - eps)))    # eta -> 1 side
            if not (np.isfinite(a) and np.isfinite(b) and abs(a) < 0.1 and abs(b) < 0.1):
                raise ImpropernessError(f"{self.name}: regularity probe failed near eta={eps}")


@dataclass(frozen=True)
class CostLoss:
    """Cost-weighted misclassification loss with threshold ``c0``.

    ``ell_neg(etahat) = c0 * [etahat >= c0]`` and
    ``ell_pos(etahat) = (1 - c0) * [etahat < c0]``; the indicator conventions
    at the threshold are exact, never smoothed.
    """

    c0: float

    def __post_init__(self):
        if not 0.0 < self.c0 < 1.0:
            raise ValueError(f"c0 must lie in (0,1), got {self.c0}")

    def ell_pos(self, etahat):
        e = np.asarray(etahat, dtype=float)
        return (1.0 - self.c0) * (e < self.c0)

    def ell_neg(self, etahat):
        e = np.asarray(etahat, dtype=float)
        return self.c0 * (e >= self.c0)

    def ell(self, y: int, etahat):
        return self.ell_pos(etahat) if y == 1 else self.ell_neg(etahat)

    def as_proper_loss(self) -> ProperLoss:
        return cost_loss(self.c0)


def _dyadic_strictness(wf: WeightFunction) -> bool:
    # strictness needs mass on every open subinterval; approximated by
    # probing the continuous part on 1023 dyadic interior points: a zero
    # stretch of more than 2 adjacent points means not strictly proper.
    grid = np.arange(1, 1024) / 1024.0
    vals = np.asarray(wf.w(grid), dtype=float)
    zero = vals <= 1e-12
    if not zero.any():
        return True
    run = 0
    for z in zero:
        run = run + 1 if z else 0
        if run > 2:
            return False
    return True


def from_weight(wf: WeightFunction) -> ProperLoss:
    """Build the fair proper loss whose weight function is ``wf``.

    Closed antiderivatives are used when the weight carries them; otherwise
    the partial-loss integrals are evaluated by quadrature.  Atoms contribute
    exact step terms.  Partial losses of non-definite weights evaluate to
    +inf at the offending endpoint but remain usable on (0, 1).
    """
    atoms = wf.atoms

    if wf.is_pure_atomic:
        continuous_pos = continuous_neg = None
    elif wf.W is not None and wf.Wbar is not None:
        Wf, Wbar = wf.W, wf.Wbar
        wbar0 = float(Wbar(np.asarray(0.0)))
        wbar1 = float(Wbar(np.asarray(1.0)))
        if not (np.isfinite(wbar0) and np.isfinite(wbar1)):
            raise ImpropernessError(
                f"weight {wf.name!r} is not definite: its partial-loss integrals diverge")

        # The 0*inf products at the very endpoints are the regularity limits
        # and evaluate to zero.
        def continuous_pos(e):
            e = np.asarray(e, dtype=float)
            We = np.asarray(Wf(e), dtype=float)
            with np.errstate(all="ignore"):
                term = np.where(e < 1.0, (1.0 - e) * We, 0.0)
            return wbar1 - np.asarray(Wbar(e), dtype=float) - term

        def continuous_neg(e):
            e = np.asarray(e, dtype=float)
            We = np.asarray(Wf(e), dtype=float)
            with np.errstate(all="ignore"):
                term = np.where(e > 0.0, e * We, 0.0)
            return wbar0 - np.asarray(Wbar(e), dtype=float) + term
    else:
        w = wf.w

        @lru_cache(maxsize=4096)
        def _pos_scalar(e: float) -> float:
            return integrate(lambda c: (1.0 - c) * np.asarray(w(c), dtype=float), e, 1.0)

        @lru_cache(maxsize=4096)
        def _neg_scalar(e: float) -> float:
            return integrate(lambda c: c * np.asarray(w(c), dtype=float), 0.0, e)

        continuous_pos = np.vectorize(_pos_scalar, otypes=[float])
        continuous_neg = np.vectorize(_neg_scalar, otypes=[float])

    def ell_pos(etahat):
        e = np.asarray(etahat, dtype=float)
        total = np.zeros_like(e, dtype=float)
        if continuous_pos is not None:
            total = total + np.asarray(continuous_pos(e), dtype=float)
        for c, m in atoms:
            total = total + m * (1.0 - c) * (e < c)
        return total

    def ell_neg(etahat):
        e = np.asarray(etahat, dtype=float)
        total = np.zeros_like(e, dtype=float)
        if continuous_neg is not None:
            total = total + np.asarray(continuous_neg(e), dtype=float)
        for c, m in atoms:
            total = total + m * c * (e >= c)
        return total

    if atoms:
        dpos = dneg = None
    else:
        dpos = _as_array_fn(lambda e: -(1.0 - np.asarray(e, dtype=float))
                            * np.asarray(wf.w(e), dtype=float))
        dneg = _as_array_fn(lambda e: np.asarray(e, dtype=float)
                            * np.asarray(wf.w(e), dtype=float))

    loss = ProperLoss(
        ell_pos=_as_array_fn(ell_pos),
        ell_neg=_as_array_fn(ell_neg),
        weight=wf,
        fair=True,
        strictly_proper=_dyadic_strictness(wf),
        ell_pos_prime=dpos,
        ell_neg_prime=dneg,
        name=f"loss({wf.name})",
    )
    loss.validate()
    return loss


def cost_loss(c0: float) -> ProperLoss:
    """The cost-weighted misclassification loss as a ProperLoss (atom weight)."""
    return from_weight(catalog_weight("cost", {"c0": c0}))


def zero_one_loss() -> ProperLoss:
    """Misclassification loss: twice the cost loss at threshold 1/2."""
    return from_weight(catalog_weight("zero-one"))


def catalog_loss(name: str, params: dict | None = None) -> ProperLoss:
    """Shorthand for ``from_weight(catalog_weight(name, params))``."""
    return from_weight(catalog_weight(name, params))


def _risk_terms(loss, eta: float, etahat):
    lp = np.asarray(loss.ell_pos(etahat), dtype=float)
    ln_ = np.asarray(loss.ell_neg(etahat), dtype=float)
    with np.errstate(all="ignore"):
        pos = eta * lp if eta > 0 else np.zeros_like(lp)
        neg = (1.0 - eta) * ln_ if eta < 1 else np.zeros_like(ln_)
    return pos + neg


def conditional_risk(loss, eta: float, etahat):
    """Expected loss eta*ell_pos(etahat) + (1-eta)*ell_neg(etahat).

    Terms with zero probability weight are dropped before multiplying, so a
    perfect deterministic prediction never produces 0*inf.
    """
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0,1], got {eta}")
    e = np.asarray(etahat, dtype=float)
    if np.any(e < 0.0) or np.any(e > 1.0):
        raise ValueError("etahat must lie in [0,1]")
    out = _risk_terms(loss, eta, e)
    return float(out) if np.isscalar(etahat) or np.ndim(etahat) == 0 else out


def bayes_risk(loss, eta: float) -> float:
    """Conditional risk of the honest prediction etahat = eta."""
    return conditional_risk(loss, eta, eta)


def bayes_risk_prime(loss, eta: float) -> float:
    """Derivative of the conditional Bayes risk.

    For a proper loss the stationarity of the risk at the honest prediction
    collapses the derivative to ell_pos(eta) - ell_neg(eta).
    """
    return float(loss.ell_pos(np.asarray(eta))) - float(loss.ell_neg(np.asarray(eta)))


def regret(loss, eta: float, etahat: float) -> float:
    """Excess conditional risk over the Bayes risk (a Bregman divergence)."""
    return conditional_risk(loss, eta, etahat) - bayes_risk(loss, eta)


def savage_check(loss, grid: Iterable[tuple[float, float]]) -> float:
    """Max residual of the tangent representation of the conditional risk.

    Checks ``L(eta, etahat) = Lbar(etahat) + (eta - etahat) * Lbar'(etahat)``
    with the Bayes-risk derivative estimated by central differences, so the
    check is independent of the closed-form route.
    """
    worst = 0.0
    for eta, etahat in grid:
        lhs = conditional_risk(loss, eta, etahat)
        dbar = finite_diff(lambda t: bayes_risk(loss, t), etahat, 1)
        rhs = bayes_risk(loss, etahat) + (eta - etahat) * dbar
        worst = max(worst, abs(lhs - rhs))
    return worst


def schervish_check(loss, y: int, etahat: float) -> float:
    """Mixture representation: integral of cost losses weighted by w.

    Returns ``integral over c of ell_c(y, etahat) * w(c) dc`` plus the atom
    contributions; for a fair proper loss this reproduces the partial loss.
    A divergent tail is truncated with a warning.
    """
    if y not in (1, -1):
        raise ValueError("y must be +1 or -1")
    etahat = float(etahat)
    wf = loss.weight
    atom_term = 0.0
    for c, m in wf.atoms:
        if y == -1:
            atom_term += m * c * (etahat >= c)
        else:
            atom_term += m * (1.0 - c) * (etahat < c)
    if wf.is_pure_atomic:
        return atom_term
    if y == -1:
        f = lambda c: c * np.asarray(wf.w(c), dtype=float)
        a, b = 0.0, etahat
    else:
        f = lambda c: (1.0 - c) * np.asarray(wf.w(c), dtype=float)
        a, b = etahat, 1.0
    try:
        val = integrate(f, a, b)
    except IntegrationError as err:
        warnings.warn(f"mixture integral truncated: {err}", RuntimeWarning)
        val = err.estimate
    return val + atom_term


def weight_from_loss(loss, grid: Sequence[float] | None = None,
                     h: float = 1e-4) -> WeightFunction:
    """Recover the weight as minus the curvature of the Bayes risk.

    Returns a tabulated WeightFunction estimated by central second
    differences of :func:`bayes_risk` on ``grid`` (default: 511 interior
    points).  Raises :class:`ImpropernessError` when the curvature estimate
    is significantly positive anywhere.
    """
    if grid is None:
        grid = np.linspace(1.0 / 512.0, 511.0 / 512.0, 511)
    grid = np.asarray(grid, dtype=float)
    est = np.array([-finite_diff(lambda t: bayes_risk(loss, t), x, 2, h=h) for x in grid])
    scale = max(1.0, float(np.nanmax(np.abs(est))))
    if np.any(est < -1e-3 * scale):
        raise ImpropernessError("negative weight estimate: loss is not proper")
    est = np.maximum(est, 0.0)
    return tabulated_weight(np.column_stack([grid, est]), name=f"weight({loss.name})")


def _half_derivative(half: Callable, lo: float, hi: float) -> Callable[[float], float]:
    # Central difference with the stencil clamped inside [lo, hi].
    def d(t: float) -> float:
        room = min(t - lo, hi - t)
        h = min(1e-5, 0.45 * room) if room > 0 else 0.0
        if h <= 0:
            h = 1e-7
            return (float(half(np.asarray(t))) - float(half(np.asarray(t - h)))) / h
        return (float(half(np.asarray(t + h))) - float(half(np.asarray(t - h)))) / (2.0 * h)

    return d


def reconstruct_symmetric(half: Callable, side: str,
                          ell_neg_at_half: float | None = None) -> ProperLoss:
    """Complete a symmetric proper loss from half of its negative partial.

    ``half`` specifies ``ell_neg`` on [0, 1/2] (``side="lower"``) or on
    [1/2, 1] (``side="upper"``).  The other half follows from the symmetry
    coupling of the partial-loss derivatives,

        ell_neg(e) = ell_neg(1/2) + integral from 1/2 to e of
                     (x / (1-x)) * ell_neg'(1-x) dx,

    read with the orientation convention that integrating backwards flips
    the sign.  The positive partial is ``ell_pos(e) = ell_neg(1-e)``.  The
    result is checked for properness (nonnegative implied weight) on a probe
    grid.
    """
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    dom = (0.0, 0.5) if side == "lower" else (0.5, 1.0)
    anchor = float(half(np.asarray(0.5))) if ell_neg_at_half is None else float(ell_neg_at_half)
    dhalf = _half_derivative(half, *dom)

    def integrand(x):
        xs = np.asarray(x, dtype=float)
        vals = np.array([dhalf(1.0 - xi) for xi in np.atleast_1d(xs)])
        ratio = np.atleast_1d(xs) / (1.0 - np.atleast_1d(xs))
        out = ratio * vals
        return out.reshape(np.shape(xs)) if np.ndim(xs) else float(out[0])

    @lru_cache(maxsize=4096)
    def reconstructed(e: float) -> float:
        if e >= 0.5:
            return anchor + integrate(integrand, 0.5, e)
        return anchor - integrate(integrand, e, 0.5)

    in_given = (lambda e: e <= 0.5) if side == "lower" else (lambda e: e >= 0.5)

    def ell_neg_scalar(e: float) -> float:
        return float(half(np.asarray(e))) if in_given(e) else reconstructed(float(e))

    ell_neg = _as_array_fn(np.vectorize(ell_neg_scalar, otypes=[float]))
    ell_pos = _as_array_fn(lambda e: ell_neg(1.0 - np.asarray(e, dtype=float)))

    # Properness probe: the implied weight ell_neg'(e)/e must be nonnegative.
    probe = np.linspace(0.02, 0.98, 49)
    dneg = np.array([finite_diff(lambda t: float(ell_neg(np.asarray(t))), x, 1) for x in probe])
    w_est = dneg / probe
    if np.any(w_est < -1e-6 * max(1.0, float(np.max(np.abs(w_est))))):
        raise ImpropernessError("reconstructed loss has negative implied weight")
    weight = tabulated_weight(np.column_stack([probe, np.maximum(w_est, 0.0)]),
                              name="reconstructed")

    def _safe_zero(fn, x) -> bool:
        try:
            return abs(float(fn(np.asarray(x)))) <= 1e-9
        except Exception:
            return False

    return ProperLoss(
        ell_pos=ell_pos,
        ell_neg=ell_neg,
        weight=weight,
        fair=_safe_zero(ell_neg, 0.0) and _safe_zero(ell_pos, 1.0),
        strictly_proper=bool(np.all(w_est > 1e-12)),
        name=f"symmetric-reconstruction({side})",
    )
