"""Full-risk machinery over the unit instance space and the surrogate study.

An experiment is an observation-conditional probability ``eta`` on X = [0,1]
with the uniform marginal.  This module integrates conditional risks into
full risks, minimises them over the linear hypothesis class h_alpha(x) =
alpha*x, evaluates the reference misclassification risk of the resulting
classifiers, and reproduces the two-experiment/two-surrogate study whose
reference values are frozen below, including both strict preference
reversals.  It also provides the minimal convex proper loss and the
regret-bound curve with its closed-form inversion.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .composite import CompositeLoss
from .numerics import MinimizeResult, QuadratureSpec, integrate, lambert_w0, minimize_scalar
from .proper import ProperLoss, bayes_risk, catalog_loss
from .weights import catalog_weight, _as_array_fn

__all__ = [
    "Experiment",
    "LinearHypothesisClass",
    "SurrogateReport",
    "quadratic_experiment",
    "affine_experiment",
    "full_risk",
    "constrained_bayes",
    "zero_one_linear_risk",
    "surrogate_penalty",
    "minimal_loss",
    "regret_bound_rhs",
    "regret_bound_invert",
    "run_surrogate_experiment",
    "REFERENCE_ALPHA_STARS",
    "REFERENCE_ZERO_ONE_RISKS",
]

_RISK_QUAD = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-12, max_depth=60)


@dataclass(frozen=True)
class Experiment:
    """Conditional probability eta on [0,1] under the uniform marginal."""

    eta: Callable
    marginal: str = "uniform"
    name: str = "experiment"

    def __post_init__(self):
        if self.marginal != "uniform":
            raise ValueError("only the uniform marginal is supported")
        xs = np.linspace(0.0, 1.0, 41)
        vals = np.asarray(self.eta(xs), dtype=float)
        if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-12):
            raise ValueError(f"experiment {self.name!r}: eta must map into [0,1]")


@dataclass(frozen=True)
class LinearHypothesisClass:
    """Hypotheses h_alpha(x) = alpha * x with alpha in [0, 1]."""

    alpha_range: tuple[float, float] = (0.0, 1.0)

    def hypothesis(self, alpha: float) -> Callable:
        return _as_array_fn(lambda x: alpha * np.asarray(x, dtype=float))


def quadratic_experiment() -> Experiment:
    return Experiment(eta=_as_array_fn(lambda x: np.asarray(x, dtype=float) ** 2),
                      name="eta1")


def affine_experiment() -> Experiment:
    return Experiment(eta=_as_array_fn(lambda x: 1.0 / 3.0 + np.asarray(x, dtype=float) / 3.0),
                      name="eta2")


def _pointwise_risk(loss, etas: np.ndarray, preds: np.ndarray) -> np.ndarray:
    if isinstance(loss, CompositeLoss):
        preds = np.asarray(loss.link.q(preds), dtype=float)
        loss = loss.base
    with np.errstate(all="ignore"):
        lp = np.asarray(loss.ell_pos(preds), dtype=float)
        ln_ = np.asarray(loss.ell_neg(preds), dtype=float)
        return (np.where(etas > 0.0, etas * lp, 0.0)
                + np.where(etas < 1.0, (1.0 - etas) * ln_, 0.0))


def full_risk(exp: Experiment, loss, h: Callable,
              spec: QuadratureSpec = _RISK_QUAD) -> float:
    """Marginal average of the conditional risk of predictor ``h``."""

    def integrand(xs):
        xs = np.asarray(xs, dtype=float)
        return _pointwise_risk(loss, np.asarray(exp.eta(xs), dtype=float),
                               np.asarray(h(xs), dtype=float))

    return integrate(integrand, 0.0, 1.0, spec)


def constrained_bayes(exp: Experiment, loss,
                      family: LinearHypothesisClass | None = None,
                      tol: float = 1e-10) -> MinimizeResult:
    """Minimise the full risk over the linear class, boundary-aware."""
    family = family or LinearHypothesisClass()
    lo, hi = family.alpha_range

    def objective(alpha: float) -> float:
        return full_risk(exp, loss, family.hypothesis(alpha))

    return minimize_scalar(objective, lo, hi, tol=tol)


def zero_one_linear_risk(exp: Experiment, alpha: float) -> float:
    """Misclassification risk of the slope-``alpha`` linear predictor.

    The predictor is read as the classifier "positive iff x >= alpha/2",
    the decision rule under which this suite's frozen reference risks were
    generated; the risk is eta-mass below the boundary plus (1-eta)-mass
    above it.
    """
    x0 = min(max(float(alpha) / 2.0, 0.0), 1.0)
    neg_side = integrate(lambda xs: np.asarray(exp.eta(xs), dtype=float), 0.0, x0,
                         _RISK_QUAD) if x0 > 0 else 0.0
    pos_side = integrate(lambda xs: 1.0 - np.asarray(exp.eta(xs), dtype=float), x0, 1.0,
                         _RISK_QUAD) if x0 < 1 else 0.0
    return neg_side + pos_side


def surrogate_penalty(exp: Experiment, ref_loss, surrogate,
                      family: LinearHypothesisClass | None = None) -> float:
    """Reference risk of the hypothesis that minimises the surrogate risk.

    ``ref_loss`` is either an evaluable CPE/composite loss (scored through
    :func:`full_risk`) or a callable ``(exp, alpha) -> risk`` such as
    :func:`zero_one_linear_risk`.  The surrogate minimiser is assumed unique;
    a flat objective (near-minimal spread beyond 1e-4) triggers a warning.
    """
    family = family or LinearHypothesisClass()
    res = constrained_bayes(exp, surrogate, family)
    a = res.argmin
    lo, hi = family.alpha_range
    spread_tol = 1e-9 * (1.0 + abs(res.min_value))
    for probe in (max(lo, a - 1e-4), min(hi, a + 1e-4)):
        if probe != a:
            if full_risk(exp, surrogate, family.hypothesis(probe)) <= res.min_value + spread_tol:
                warnings.warn("surrogate objective is flat near its minimiser; "
                              "the constrained minimiser may not be unique", RuntimeWarning)
                break
    if callable(ref_loss) and not hasattr(ref_loss, "ell_pos"):
        return ref_loss(exp, a)
    return full_risk(exp, ref_loss, family.hypothesis(a))


def minimal_loss() -> ProperLoss:
    """The pointwise-minimal convex proper loss (normalised to w(1/2) = 1).

    Partial losses are piecewise: linear on the half where the weight rides
    the 1/(2(1-c)) or 1/(2c) envelope and logarithmic on the other half.
    """
    log_half = math.log(0.5)

    def ell_neg(e):
        e = np.asarray(e, dtype=float)
        with np.errstate(all="ignore"):
            low = -e - np.log1p(-np.minimum(e, 1.0 - 1e-300))
            high = e - 1.0 - log_half
        return 0.5 * np.where(e < 0.5, low, high)

    def ell_pos(e):
        e = np.asarray(e, dtype=float)
        with np.errstate(all="ignore"):
            low = -e - log_half
            high = e - 1.0 - np.log(np.maximum(e, 1e-300))
        return 0.5 * np.where(e < 0.5, low, high)

    wf = catalog_weight("minimal")
    return ProperLoss(
        ell_pos=_as_array_fn(ell_pos),
        ell_neg=_as_array_fn(ell_neg),
        weight=wf,
        fair=True,
        strictly_proper=True,
        ell_pos_prime=_as_array_fn(lambda e: -(1.0 - np.asarray(e, dtype=float))
                                   * np.asarray(wf.w(e), dtype=float)),
        ell_neg_prime=_as_array_fn(lambda e: np.asarray(e, dtype=float)
                                   * np.asarray(wf.w(e), dtype=float)),
        name="minimal",
    )


def regret_bound_rhs(alpha_reg: float, loss: ProperLoss | None = None) -> float:
    """Bayes-risk drop between 1/2 and 1/2 + alpha: the regret lower bound.

    For the minimal loss the closed form is
    ``(alpha/2 + 1/4) log(2 alpha + 1) - alpha/2``; any other symmetric
    proper loss is evaluated through its Bayes risk.
    """
    a = float(alpha_reg)
    if not 0.0 <= a <= 0.5:
        raise ValueError("alpha_reg must lie in [0, 1/2]")
    if loss is None or loss.name == "minimal":
        return (a / 2.0 + 0.25) * math.log(2.0 * a + 1.0) - a / 2.0
    return bayes_risk(loss, 0.5) - bayes_risk(loss, 0.5 + a)


def regret_bound_invert(x: float) -> float:
    """Largest threshold-1/2 regret compatible with minimal-loss regret ``x``.

    Closed-form inversion of :func:`regret_bound_rhs` through the principal
    Lambert W branch: ``exp(W((4x-1)/e) + 1)/2 - 1/2``.
    """
    x = float(x)
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    return 0.5 * math.exp(lambert_w0((4.0 * x - 1.0) / math.e) + 1.0) - 0.5


# Frozen reference values for the two-experiment/two-surrogate study
# (surrogate index, experiment index) -> value.
REFERENCE_ALPHA_STARS = {
    (1, 1): 0.66666667,
    (2, 1): 0.81779259,
    (1, 2): 1.00000000,
    (2, 2): 0.77763472,
}
REFERENCE_ZERO_ONE_RISKS = {
    (1, 1): 0.3580272,
    (2, 1): 0.3033476,
    (1, 2): 0.4166666,
    (2, 2): 0.4207872,
}


@dataclass(frozen=True)
class SurrogateReport:
    surrogate: int
    experiment: int
    alpha_star: float
    surrogate_risk: float
    zero_one_risk: float

    def to_json_dict(self) -> dict:
        key = (self.surrogate, self.experiment)
        return {
            "surrogate": self.surrogate,
            "experiment": self.experiment,
            "alpha_star": self.alpha_star,
            "surrogate_risk": self.surrogate_risk,
            "zero_one_risk": self.zero_one_risk,
            "reference_alpha_star": REFERENCE_ALPHA_STARS[key],
            "alpha_star_abs_dev": abs(self.alpha_star - REFERENCE_ALPHA_STARS[key]),
            "reference_zero_one_risk": REFERENCE_ZERO_ONE_RISKS[key],
            "zero_one_risk_abs_dev": abs(self.zero_one_risk - REFERENCE_ZERO_ONE_RISKS[key]),
        }


def run_surrogate_experiment() -> dict:
    """Four-cell sweep: two surrogates crossed with two experiments.

    Surrogate 1 has weight 1/c, surrogate 2 has weight 1/(1-c); both use
    the identity link over the linear hypothesis class.  Returns a JSON
    report with every constrained minimiser, its misclassification risk,
    deviations from the frozen reference values, and the two strict
    preference reversals that make the surrogates incommensurable.
    """
    t0 = time.perf_counter()
    experiments = {1: quadratic_experiment(), 2: affine_experiment()}
    surrogates = {1: catalog_loss("w1-over-c"), 2: catalog_loss("w1-over-1mc")}
    family = LinearHypothesisClass()
    cells: dict[tuple[int, int], SurrogateReport] = {}
    for j, exp in experiments.items():
        for i, loss in surrogates.items():
            res = constrained_bayes(exp, loss, family)
            cells[(i, j)] = SurrogateReport(
                surrogate=i,
                experiment=j,
                alpha_star=res.argmin,
                surrogate_risk=res.min_value,
                zero_one_risk=zero_one_linear_risk(exp, res.argmin),
            )
    elapsed = time.perf_counter() - t0
    risk = {k: c.zero_one_risk for k, c in cells.items()}
    return {
        "schema": "cploss/1",
        "report": "surrogate-experiment",
        "note": ("cells are indexed (surrogate, experiment); surrogate 1 has "
                 "weight 1/c, surrogate 2 has weight 1/(1-c)"),
        "cells": [cells[k].to_json_dict() for k in sorted(cells)],
        "incommensurable": {
            "experiment_1_prefers_surrogate_2": bool(risk[(2, 1)] < risk[(1, 1)]),
            "experiment_2_prefers_surrogate_1": bool(risk[(1, 2)] < risk[(2, 2)]),
            "strict_reversal": bool(risk[(2, 1)] < risk[(1, 1)] and risk[(1, 2)] < risk[(2, 2)]),
        },
        "runtime_seconds": elapsed,
    }
