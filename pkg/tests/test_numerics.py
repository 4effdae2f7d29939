"""Quadrature, minimisation, Lambert W and finite differences.

Independent oracles: a fixed-grid composite Gauss-Legendre rule for the
integrals and scipy for the transcendental functions.
"""

import math

import numpy as np
import pytest
import scipy.special
from scipy.optimize import minimize_scalar as scipy_minimize

from cploss.numerics import (
    IntegrationError,
    NumericsError,
    QuadratureSpec,
    finite_diff,
    integrate,
    lambert_w0,
    minimize_scalar,
)


def gauss_legendre_fixed(f, a, b, panels=256, order=20):
    """Independent high-order fixed-grid rule (no adaptivity shared with integrate)."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        xs = 0.5 * (lo + hi) + half * nodes
        total += half * float(weights @ np.asarray(f(xs), dtype=float))
    return total


class TestIntegrate:
    def test_constant(self):
        assert integrate(lambda x: np.ones_like(x), 0.0, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_monomial(self):
        assert integrate(lambda x: x ** 2, 0.0, 1.0) == pytest.approx(1 / 3, abs=1e-13)

    def test_full_risk_integrand_vs_fixed_grid_oracle(self):
        # the slope-2/3 linear-predictor risk integrand; integrable log
        # singularity in the derivative at the left endpoint
        def f(x):
            return x * x * (x * (2 / 3) - 1.0 - np.log((2 / 3) * x)) + (1 - x * x) * (2 / 3) * x

        got = integrate(f, 0.0, 1.0)
        oracle = gauss_legendre_fixed(f, 1e-12, 1.0)
        assert got == pytest.approx(oracle, abs=1e-8)
        # frozen closed form: 1/9 + log(3/2)/3
        assert got == pytest.approx(1 / 9 + math.log(1.5) / 3, abs=1e-11)

    def test_log_endpoint_singularity(self):
        assert integrate(lambda x: np.log(x), 0.0, 1.0) == pytest.approx(-1.0, abs=1e-10)

    def test_linearity_on_random_polynomials(self):
        rng = np.random.default_rng(20240817)
        for _ in range(20):
            cf = rng.uniform(-2, 2, size=rng.integers(2, 7))
            cg = rng.uniform(-2, 2, size=rng.integers(2, 7))
            a, b = rng.uniform(-3, 3, size=2)
            f = np.polynomial.Polynomial(cf)
            g = np.polynomial.Polynomial(cg)
            lhs = integrate(lambda x: a * f(x) + b * g(x), 0.0, 1.0)
            rhs = a * integrate(f, 0.0, 1.0) + b * integrate(g, 0.0, 1.0)
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_interval_additivity(self):
        rng = np.random.default_rng(7)
        f = lambda x: np.sin(3 * x) + x ** 3
        for _ in range(10):
            c = float(rng.uniform(0.05, 0.95))
            whole = integrate(f, 0.0, 1.0)
            split = integrate(f, 0.0, c) + integrate(f, c, 1.0)
            assert whole == pytest.approx(split, abs=1e-9)

    def test_reversed_bounds_rejected(self):
        with pytest.raises(NumericsError):
            integrate(lambda x: x, 1.0, 0.0)

    def test_nan_integrand_is_hard_error(self):
        with pytest.raises(NumericsError):
            integrate(lambda x: np.where(x > 0.3, np.nan, 1.0), 0.0, 1.0)

    def test_depth_exhaustion_carries_partial_estimate(self):
        spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-14, max_depth=3)
        with pytest.raises(IntegrationError) as exc:
            integrate(lambda x: np.sin(50.0 / (x + 0.01)), 0.0, 1.0, spec)
        assert math.isfinite(exc.value.estimate)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_depth=0)
        with pytest.raises(ValueError):
            QuadratureSpec(endpoint_shrink=1e-3)


class TestMinimizeScalar:
    def test_parabola(self):
        res = minimize_scalar(lambda x: x * x, -1.0, 1.0, tol=1e-8)
        assert res.converged
        assert res.argmin == pytest.approx(0.0, abs=1e-8)
        assert res.min_value == pytest.approx(0.0, abs=1e-15)

    def test_shifted_unimodal_closed_forms(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = float(rng.uniform(0.1, 0.9))
            res = minimize_scalar(lambda x: (x - a) ** 2, 0.0, 1.0, tol=1e-8)
            assert res.argmin == pytest.approx(a, abs=1e-8)

    def test_quartic(self):
        res = minimize_scalar(lambda x: (x - 0.3) ** 4, 0.0, 1.0, tol=1e-9)
        assert res.argmin == pytest.approx(0.3, abs=1e-3)  # quartic valley is flat

    def test_boundary_minimum_left(self):
        res = minimize_scalar(lambda x: x, 0.0, 1.0, tol=1e-9)
        assert res.argmin == 0.0

    def test_boundary_minimum_right_with_stationary_endpoint(self):
        # derivative vanishes exactly at the right bracket endpoint
        f = lambda a: a / 2 - (math.log(a) / 2 if a > 0 else -1e9) - 1 / 12
        res = minimize_scalar(f, 0.0, 1.0, tol=1e-10)
        assert res.argmin == 1.0

    def test_matches_scipy_bounded(self):
        f = lambda x: math.cos(x) + 0.1 * x
        ours = minimize_scalar(f, 0.0, 6.0, tol=1e-9)
        ref = scipy_minimize(f, bounds=(0.0, 6.0), method="bounded",
                             options={"xatol": 1e-10})
        assert ours.argmin == pytest.approx(ref.x, abs=1e-6)

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            minimize_scalar(lambda x: x * x, 0.0, 1.0, tol=0.0)

    def test_min_value_matches_objective(self):
        f = lambda x: (x - 0.4) ** 2 + 1.0
        res = minimize_scalar(f, 0.0, 1.0, tol=1e-9)
        assert res.min_value == pytest.approx(f(res.argmin), abs=1e-12)


class TestLambertW:
    def test_trivial_values(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
        assert lambert_w0(-1.0 / math.e) == -1.0

    def test_round_trip_on_log_grid(self):
        lo = -1.0 / math.e + 1e-9
        zs = np.concatenate([
            np.array([lo, -0.3, -0.1, -1e-6]),
            np.exp(np.linspace(np.log(1e-9), np.log(1e6), 120)),
        ])
        for z in zs:
            w = lambert_w0(float(z))
            # residual evaluated in extended precision; scaled tolerance
            # because one double ulp of w already moves w*e^w by ~eps*|z|
            wl = np.longdouble(w)
            resid = float(abs(wl * np.exp(wl) - np.longdouble(z)))
            assert resid <= 1e-12 * max(1.0, abs(float(z)))

    def test_against_scipy(self):
        for z in [-0.36, -0.2, -1e-3, 0.5, 1.0, 10.0, 1e4]:
            ref = float(scipy.special.lambertw(z).real)
            assert lambert_w0(z) == pytest.approx(ref, abs=1e-13, rel=1e-13)

    def test_domain_error(self):
        with pytest.raises(NumericsError):
            lambert_w0(-1.0)


class TestFiniteDiff:
    def test_first_order_exact_for_quadratics(self):
        assert finite_diff(lambda x: x * x, 3.0, 1) == pytest.approx(6.0, abs=1e-7)

    def test_square_loss_bayes_curvature(self):
        # Bayes risk of the square loss is e(1-e)/2, so curvature is -1
        assert finite_diff(lambda e: e * (1 - e) / 2, 0.3, 2) == pytest.approx(-1.0, abs=1e-5)

    def test_log_loss_bayes_curvature(self):
        lbar = lambda e: -(e * math.log(e) + (1 - e) * math.log(1 - e))
        assert finite_diff(lbar, 0.5, 2) == pytest.approx(-4.0, abs=1e-4)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            finite_diff(lambda x: x, 0.0, 3)
        with pytest.raises(ValueError):
            finite_diff(lambda x: x, 0.0, 1, h=0.0)
