import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import exp1

from blobflow import DriftPotential, InteractionPotential, Mollifier


class TestDrift:
    def test_none_is_zero(self):
        V = DriftPotential("none")
        x = np.array([[1.0, 2.0], [0.5, -0.5]])
        assert V.is_none
        np.testing.assert_array_equal(V.value(x), 0.0)
        np.testing.assert_array_equal(V.grad(x), 0.0)

    def test_quadratic(self, rng):
        V = DriftPotential("quadratic")
        x = rng.normal(size=(10, 2))
        np.testing.assert_allclose(V.value(x), 0.5 * (x * x).sum(axis=1), rtol=1e-15)
        np.testing.assert_array_equal(V.grad(x), x)

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="drift"):
            DriftPotential("cubic")


class TestLog1d:
    def test_grad_saturates_inside_eps(self):
        W = InteractionPotential("log1d", chi=1.5, epsilon=0.1)
        # outside: 2 chi / x, inside: 2 chi sign(x) / eps
        assert float(W.grad(0.5)[0]) == pytest.approx(2 * 1.5 / 0.5, rel=1e-14)
        assert float(W.grad(0.02)[0]) == pytest.approx(2 * 1.5 / 0.1, rel=1e-14)
        assert float(W.grad(-0.02)[0]) == pytest.approx(-2 * 1.5 / 0.1, rel=1e-14)
        assert float(W.grad(0.0)[0]) == 0.0

    def test_value_is_antiderivative_of_grad(self):
        W = InteractionPotential("log1d", chi=0.7, epsilon=0.2)
        for a, b in [(0.05, 0.15), (0.1, 0.5), (0.3, 1.7), (0.15, 0.25)]:
            integral, _ = quad(lambda r: float(W.grad(r)[0]), a, b, limit=200,
                               points=[0.2])
            diff = float(W.value(b) - W.value(a))
            assert diff == pytest.approx(integral, rel=1e-9, abs=1e-12)

    def test_value_c1_at_eps(self):
        W = InteractionPotential("log1d", chi=1.0, epsilon=0.3)
        eps = 0.3
        below = float(W.value(eps - 1e-10))
        above = float(W.value(eps + 1e-10))
        assert below == pytest.approx(above, abs=1e-8)
        assert float(W.value(eps)) == pytest.approx(2.0 * math.log(eps), rel=1e-12)
        # matching outside log for large r
        assert float(W.value(2.0)) == pytest.approx(2.0 * math.log(2.0), rel=1e-14)

    def test_value_finite_at_zero(self):
        W = InteractionPotential("log1d", chi=1.0, epsilon=0.25)
        assert float(W.value(0.0)) == pytest.approx(2.0 * (math.log(0.25) - 1.0), rel=1e-14)


class TestLog2d:
    def test_grad_matches_gaussian_field(self):
        # The regularized kernel is grad(2 chi log|x|) convolved with a
        # centered Gaussian of variance 4 eps^2 per axis; by the 2-D shell
        # theorem that equals 2 chi x/|x|^2 times the Gaussian mass inside
        # radius |x|, which is 1 - exp(-|x|^2/(8 eps^2)).
        chi, eps = 0.8, 0.2
        W = InteractionPotential("log2d", chi=chi, epsilon=eps)
        for r in [0.05, 0.3, 1.0]:
            x = np.array([r, 0.0])
            expected = 2 * chi / r * (1.0 - math.exp(-r * r / (8 * eps * eps)))
            assert float(W.grad(x)[0]) == pytest.approx(expected, rel=1e-13)
            assert float(W.grad(x)[1]) == 0.0

    def test_grad_ring_quadrature_oracle(self):
        # Independent check of the shell theorem: convolve the exact
        # log-gradient with the smoothing Gaussian.  In polar coordinates
        # centered on the kernel singularity the 1/s force cancels the
        # Jacobian, leaving the smooth integrand 2 chi cos(theta) G(x - z).
        chi, eps = 1.0, 0.25
        W = InteractionPotential("log2d", chi=chi, epsilon=eps)
        x = np.array([0.4, 0.0])
        var = 4 * eps * eps

        def slice_integral(theta):
            ct, st_ = math.cos(theta), math.sin(theta)

            def f(s):
                wx, wy = x[0] - s * ct, x[1] - s * st_
                gauss = math.exp(-(wx * wx + wy * wy) / (2 * var)) / (2 * math.pi * var)
                return 2 * chi * ct * gauss

            val, _ = quad(f, 0.0, float(np.hypot(*x)) + 16 * eps, limit=200,
                          epsabs=1e-12)
            return val

        n_theta = 256
        total = sum(slice_integral(2 * math.pi * (k + 0.5) / n_theta)
                    for k in range(n_theta)) * (2 * math.pi / n_theta)
        assert float(W.grad(x)[0]) == pytest.approx(total, rel=1e-9)

    def test_grad_vanishes_at_origin(self):
        W = InteractionPotential("log2d", chi=1.0, epsilon=0.2)
        np.testing.assert_array_equal(W.grad(np.array([0.0, 0.0])), 0.0)
        # small-r force behaves like r/(4 eps^2), not like 1/r
        r = 1e-6
        g = float(W.grad(np.array([r, 0.0]))[0])
        assert g == pytest.approx(2.0 * r / (8 * 0.2 ** 2), rel=1e-5)

    def test_value_is_antiderivative_of_grad(self):
        W = InteractionPotential("log2d", chi=0.6, epsilon=0.15)
        for a, b in [(0.01, 0.1), (0.1, 0.6), (0.5, 2.0)]:
            integral, _ = quad(
                lambda r: float(W.grad(np.array([r, 0.0]))[0]), a, b, limit=200)
            diff = float(W.value(np.array([b, 0.0])) - W.value(np.array([a, 0.0])))
            assert diff == pytest.approx(integral, rel=1e-9, abs=1e-12)

    def test_value_approaches_log_far_out(self):
        chi, eps = 1.0, 0.1
        W = InteractionPotential("log2d", chi=chi, epsilon=eps)
        r = 10 * eps
        exact_log = 2 * chi * math.log(r)
        got = float(W.value(np.array([r, 0.0])))
        # correction is E1(r^2/8eps^2) = E1(12.5), below 3e-7 here
        assert got == pytest.approx(exact_log, abs=1e-6)
        assert got - exact_log == pytest.approx(chi * exp1(12.5), rel=1e-10)

    def test_value_finite_limit_at_zero(self):
        chi, eps = 1.0, 0.2
        W = InteractionPotential("log2d", chi=chi, epsilon=eps)
        limit = chi * (math.log(8 * eps * eps) - 0.5772156649015329)
        assert float(W.value(np.array([0.0, 0.0]))) == pytest.approx(limit, rel=1e-12)
        # continuity: tiny radius approaches the limit
        near = float(W.value(np.array([1e-9, 0.0])))
        assert near == pytest.approx(limit, abs=1e-12)


class TestCommon:
    def test_none_interaction(self):
        W = InteractionPotential("none")
        assert W.is_none
        diff = np.zeros((3, 3, 2))
        np.testing.assert_array_equal(W.grad_pairs(diff, np.zeros((3, 3))), 0.0)
        np.testing.assert_array_equal(W.value_of_r(np.ones(4)), 0.0)

    def test_grad_pairs_diagonal_is_zero(self, rng):
        for variant, d in [("log1d", 1), ("log2d", 2)]:
            W = InteractionPotential(variant, chi=1.0, epsilon=0.2)
            X = rng.normal(size=(6, d))
            diff = X[:, None, :] - X[None, :, :]
            r2 = (diff * diff).sum(axis=-1)
            kern = W.grad_pairs(diff, r2)
            np.testing.assert_array_equal(np.diagonal(kern, axis1=0, axis2=1), 0.0)

    def test_grad_is_odd(self, rng):
        for variant, d in [("log1d", 1), ("log2d", 2)]:
            W = InteractionPotential(variant, chi=0.9, epsilon=0.3)
            x = rng.normal(size=(8, d))
            np.testing.assert_allclose(W.grad(-x), -W.grad(x), rtol=0, atol=0)

    def test_validation(self):
        with pytest.raises(ValueError, match="interaction"):
            InteractionPotential("log3d")
        with pytest.raises(ValueError, match="regularization"):
            InteractionPotential("log1d", chi=1.0, epsilon=0.0)
        assert InteractionPotential("log1d", chi=1.0, epsilon=0.1).dimension == 1
        assert InteractionPotential("log2d", chi=1.0, epsilon=0.1).dimension == 2
        assert InteractionPotential("none").dimension is None
