import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnlab.autodiff import (Jet2, ParamVector, Tape, check_grad, grad,
                              jet_add, jet_const, jet_cos, jet_mul, jet_scale,
                              jet_sin, jet_space, jet_sub, jet_tanh, jet_time)
from pinnlab.errors import StructuralError


def jets_close(a: Jet2, b: Jet2, tol=1e-12):
    return (abs(a.v - b.v) < tol and abs(a.dt - b.dt) < tol
            and abs(a.dx - b.dx) < tol and abs(a.dxx - b.dxx) < tol)


class TestJetOps:
    def test_mul_product_rule(self):
        # (a*b).dxx = a.dxx*b.v + 2*a.dx*b.dx + a.v*b.dxx: the mixed dt*dx
        # coefficient is deliberately not carried, so dxx here is 0
        out = jet_mul(Jet2(2, 1, 0, 0), Jet2(3, 0, 1, 0))
        assert jets_close(out, Jet2(6, 3, 2, 0))

    def test_mul_constant_scaling(self):
        out = jet_mul(jet_const(5.0), jet_space(2.0))
        assert jets_close(out, Jet2(10, 0, 5, 0))

    def test_mul_square_of_x(self):
        x = jet_space(1.5)
        assert jets_close(jet_mul(x, x), Jet2(2.25, 0, 3, 2))

    def test_seeds(self):
        assert jets_close(jet_time(2.0), Jet2(2, 1, 0, 0))
        assert jets_close(jet_space(3.0), Jet2(3, 0, 1, 0))
        assert jets_close(jet_const(4.0), Jet2(4, 0, 0, 0))

    def test_add_sub_scale(self):
        a, b = Jet2(1, 2, 3, 4), Jet2(5, 6, 7, 8)
        assert jets_close(jet_add(a, b), Jet2(6, 8, 10, 12))
        assert jets_close(jet_sub(a, b), Jet2(-4, -4, -4, -4))
        assert jets_close(jet_scale(a, 2.0), Jet2(2, 4, 6, 8))

    def test_tanh_at_zero(self):
        assert jets_close(jet_tanh(Jet2(0, 1, 1, 0)), Jet2(0, 1, 1, 0))

    def test_tanh_saturation(self):
        out = jet_tanh(Jet2(10, 0, 1, 0))
        assert abs(out.v - 1) < 1e-8 and abs(out.dx) < 1e-7 and abs(out.dxx) < 1e-7

    def test_tanh_second_derivative(self):
        # dxx' = -2*tanh(0.5)*(1 - tanh(0.5)^2), evaluated numerically
        t = math.tanh(0.5)
        expected = -2.0 * t * (1.0 - t * t)
        out = jet_tanh(Jet2(0.5, 0, 1, 0))
        assert abs(out.dxx - expected) < 1e-12

    def test_trig(self):
        assert jets_close(jet_sin(Jet2(0, 1, 0, 0)), Jet2(0, 1, 0, 0))
        assert jets_close(jet_cos(Jet2(0, 0, 1, 0)), Jet2(1, 0, 0, -1))
        assert jets_close(jet_sin(Jet2(math.pi / 2, 0, 1, 0)), Jet2(1, 0, 0, -1))

    def test_array_components_broadcast(self):
        xs = np.array([0.5, 1.0, 2.0])
        out = jet_mul(jet_space(xs), jet_space(xs))
        assert np.allclose(out.v, xs * xs)
        assert np.allclose(out.dx, 2 * xs)
        assert np.allclose(out.dxx, 2.0)


class TestAgainstSympy:
    """Sum/product/chain rules vs symbolic expansion on random expressions."""

    def test_random_expressions(self):
        import sympy as sp

        t_s, x_s = sp.symbols("t x")
        rng = np.random.default_rng(42)
        for _ in range(20):
            depth = rng.integers(1, 4)
            expr, jet = self._random_expr(rng, depth, t_s, x_s)
            t0, x0 = rng.uniform(-1, 1, 2)
            jv = jet(t0, x0)
            subs = {t_s: t0, x_s: x0}
            assert abs(jv.v - float(expr.subs(subs))) < 1e-9
            assert abs(jv.dt - float(sp.diff(expr, t_s).subs(subs))) < 1e-9
            assert abs(jv.dx - float(sp.diff(expr, x_s).subs(subs))) < 1e-9
            assert abs(jv.dxx - float(sp.diff(expr, x_s, 2).subs(subs))) < 1e-9

    def _random_expr(self, rng, depth, t_s, x_s):
        import sympy as sp

        if depth == 0:
            kind = rng.integers(0, 3)
            if kind == 0:
                c = float(np.round(rng.uniform(-2, 2), 3))
                return sp.Float(c), lambda t, x, c=c: jet_const(c)
            if kind == 1:
                return t_s, lambda t, x: jet_time(t)
            return x_s, lambda t, x: jet_space(x)
        op = rng.integers(0, 4)
        if op == 3:
            inner_e, inner_j = self._random_expr(rng, depth - 1, t_s, x_s)
            fn = rng.integers(0, 3)
            if fn == 0:
                return sp.tanh(inner_e), lambda t, x: jet_tanh(inner_j(t, x))
            if fn == 1:
                return sp.sin(inner_e), lambda t, x: jet_sin(inner_j(t, x))
            return sp.cos(inner_e), lambda t, x: jet_cos(inner_j(t, x))
        ae, aj = self._random_expr(rng, depth - 1, t_s, x_s)
        be, bj = self._random_expr(rng, depth - 1, t_s, x_s)
        if op == 0:
            return ae + be, lambda t, x: jet_add(aj(t, x), bj(t, x))
        if op == 1:
            return ae - be, lambda t, x: jet_sub(aj(t, x), bj(t, x))
        return ae * be, lambda t, x: jet_mul(aj(t, x), bj(t, x))


class TestTape:
    def test_theta_squared(self):
        p = ParamVector(np.array([3.0]))
        tape = Tape(p)
        th = tape.param(0)
        loss = tape.mul(th, th)
        assert np.allclose(grad(loss, p), [6.0])

    def test_residual_through_derivative(self):
        # loss = ((theta*x).dx)^2 at theta = 2 -> d(theta^2)/dtheta = 4
        p = ParamVector(np.array([2.0]))
        tape = Tape(p)
        prod = tape.mul(tape.param(0), tape.seed_x(1.7))
        loss = tape.mean_sq(tape.comp(prod, "dx"))
        assert np.allclose(grad(loss, p), [4.0])

    def test_small_network_residual_grad_matches_fd(self):
        # random 2->4->1 tanh net, loss = mean((u.dt - u.dxx)^2) over 8 points
        rng = np.random.default_rng(1)
        p = ParamVector(rng.normal(scale=0.7, size=2 * 4 + 4 + 4 + 1))
        ts = rng.uniform(0, 1, 8)
        xs = rng.uniform(0, 1, 8)

        def build(tape, params):
            x = tape.inputs(ts, xs)
            h = tape.tanh(tape.affine(x, slice(0, 8), slice(8, 12), 2, 4))
            u = tape.affine(h, slice(12, 16), slice(16, 17), 4, 1)
            u = tape.row(u, 0)
            # u.dt - 1.0*u.dxx is the residual with lin=1, nonlin=0, no forcing
            r = tape.pde_residual(u, 1.0, 0.0, np.zeros(8))
            return tape.mean_sq(r)

        assert check_grad(build, p, step=1e-5) < 1e-4

    def test_check_grad_constant(self):
        p = ParamVector(np.array([1.0, -2.0]))

        def const_build(tape, params):
            return tape.mean_sq(tape.comp(tape.const(3.0), "v"))

        assert check_grad(const_build, p) == 0.0

    def test_check_grad_linear_exact(self):
        # FD is exact for functions linear in the parameters
        p = ParamVector(np.array([0.3, 0.4]))

        def lin(tape, params):
            return tape.add(tape.param(0), tape.scale(tape.param(1), 2.0))

        assert check_grad(lin, p, step=1e-4) < 1e-10

    def test_reverse_sweep_deterministic(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=12)

        def run():
            p = ParamVector(vals.copy())
            tape = Tape(p)
            x = tape.inputs(rng2.uniform(0, 1, 5), rng2.uniform(0, 1, 5))
            h = tape.tanh(tape.affine(x, slice(0, 6), slice(6, 9), 2, 3))
            u = tape.affine(h, slice(9, 12), None, 3, 1)
            loss = tape.mean_sq(tape.comp(tape.row(u, 0), "dxx"))
            return tape.backward(loss).copy()

        rng2 = np.random.default_rng(7)
        g1 = run()
        rng2 = np.random.default_rng(7)
        g2 = run()
        assert np.array_equal(g1, g2)

    def test_cross_tape_use_rejected(self):
        p = ParamVector(np.array([1.0]))
        t1, t2 = Tape(p), Tape(p)
        a = t1.param(0)
        with pytest.raises(StructuralError):
            t2.mul(a, a)

    def test_cols_slice(self):
        p = ParamVector(np.array([2.0]))
        tape = Tape(p)
        xs = np.array([1.0, 2.0, 3.0, 4.0])
        u = tape.mul(tape.param(0), tape.seed_x(xs))
        left = tape.cols(u, 0, 2)
        loss = tape.mse_to(left, np.zeros(2))
        g = grad(loss, p)
        # d/dtheta mean((theta*x_i)^2 for i<2) = mean(2*theta*x_i^2) = 2*2*(1+4)/2
        assert np.allclose(g, [2 * 2.0 * (1 + 4) / 2])


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-2, 2), st.floats(-2, 2))
def test_mul_matches_polynomial_expansion(av, adx, bv, bdx, adxx, bdxx):
    # against direct second-derivative of (a(x)*b(x)) for quadratic a, b
    a = Jet2(av, 0.0, adx, adxx)
    b = Jet2(bv, 0.0, bdx, bdxx)
    out = jet_mul(a, b)
    assert out.dxx == pytest.approx(adxx * bv + 2 * adx * bdx + av * bdxx, abs=1e-9)
    assert out.dx == pytest.approx(adx * bv + av * bdx, abs=1e-9)
