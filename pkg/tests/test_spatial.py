import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cevput import (GridSpec, ModelParams, ModeMismatchError, SolverState,
                    build, coefficients, scale)
from cevput.model import CoefficientField
from cevput.oracle import StencilIdentity, polynomial_exactness
from cevput.spatial import (OperatorPair, assemble_u, assemble_w,
                            hermitian_coeffs, rhs_u, rhs_w, solve_banded,
                            stage_derivatives)


def model():
    return scale(ModelParams(strike=9.0, maturity=0.5, sigma=0.2, rate=0.05,
                             elasticity=-1.0 / 3.0, spot=10.0))


def systems(mode, h=0.1):
    gamma = (1.0, 2.0, 3.0, 4.0) if mode == "uniform" else (0.5, 1.0, 1.5, 2.0)
    g = build(GridSpec(h=h, x_cut=3.0, mode=mode, gamma=gamma))
    m = model()
    return g, m, OperatorPair(u=assemble_u(g, m, mode), w=assemble_w(g, m, mode))


class TestHermitianCoeffs:
    def test_uniform_limit(self):
        h = 0.07
        d1, d3, e1, e2, e3 = hermitian_coeffs(h, h)
        assert d1 == pytest.approx(0.1, rel=1e-14)
        assert d3 == pytest.approx(0.1, rel=1e-14)
        assert e1 == pytest.approx(6.0 / (5.0 * h * h), rel=1e-14)
        assert e2 == pytest.approx(-12.0 / (5.0 * h * h), rel=1e-14)
        assert e3 == pytest.approx(6.0 / (5.0 * h * h), rel=1e-14)

    def test_quadratic_exact_any_spacing(self):
        for a, b in ((0.025, 0.1), (0.3, 0.07), (0.1, 0.2)):
            d1, d3, e1, e2, e3 = hermitian_coeffs(a, b)
            lhs = 2.0 * (d1 + 1.0 + d3)
            rhs = e1 * a * a + e3 * b * b
            assert lhs == pytest.approx(rhs, rel=1e-13)

    @given(a=st.floats(0.005, 0.5), ratio=st.floats(0.25, 4.0))
    @settings(max_examples=80, deadline=None)
    def test_degree_four_exactness(self, a, ratio):
        b = ratio * a
        d1, d3, e1, e2, e3 = hermitian_coeffs(a, b)
        ident = StencilIdentity(
            nodes_d2=(-a, 0.0, b), weights_d2=(d1, 1.0, d3),
            nodes_d0=(-a, 0.0, b), weights_d0=(-e1, -e2, -e3))
        # residuals are sums of O(|e2|) terms; that sets the attainable floor
        scale_ = abs(e2) * (1.0 + max(a, b)) ** 4
        assert polynomial_exactness(ident, 4) <= 1e-12 * scale_

    def test_not_exact_beyond_degree_four_nonuniform(self):
        a, b = 0.1, 0.2
        d1, d3, e1, e2, e3 = hermitian_coeffs(a, b)
        ident = StencilIdentity(
            nodes_d2=(-a, 0.0, b), weights_d2=(d1, 1.0, d3),
            nodes_d0=(-a, 0.0, b), weights_d0=(-e1, -e2, -e3))
        assert polynomial_exactness(ident, 5) > 1e-6


class TestAssembly:
    def test_uniform_rows(self):
        g, m, ops = systems("uniform")
        h = 0.1
        assert (ops.u.a_di[0], ops.u.a_u1[0], ops.u.a_u2[0]) == (5 / 3, 2 / 3, -1 / 3)
        assert ops.u.b_di[0] == pytest.approx(-(7 + 6 * h) / h ** 2)
        assert ops.u.b_u1[0] == pytest.approx(8 / h ** 2)
        assert ops.u.b02 == pytest.approx(-1 / h ** 2)
        assert np.all(ops.u.a_di[1:] == 10.0)
        assert np.all(ops.u.a_lo[1:] == 1.0)
        assert np.all(ops.u.a_u1[1:-1] == 1.0)
        assert ops.u.a_u1[-1] == 0.0            # far Dirichlet truncation
        assert np.allclose(ops.u.b_di[1:], -24 / h ** 2)
        state = SolverState(0.0, np.zeros(ops.u.size), np.zeros(ops.w.size), 0.9)
        b = ops.u.boundary_vector(state)
        assert b[0] == pytest.approx(6 * 0.9 / h)
        assert np.all(b[1:] == 0.0)

    def test_delta_row(self):
        g, m, ops = systems("uniform")
        h = 0.1
        assert ops.w.a_di[0] == 10.0
        assert ops.w.a_u1[0] == 0.0
        assert ops.w.b_di[0] == pytest.approx(-120 / h ** 2)
        assert ops.w.b_u1[0] == pytest.approx(-15 / h ** 2)
        u = np.zeros(ops.u.size)
        u[2] = 0.5
        state = SolverState(0.0, u, np.zeros(ops.w.size), 0.9)
        b = ops.w.boundary_vector(state)
        assert b[0] == pytest.approx(75 / h ** 3 * 0.5 - 15 / h ** 2 * (-0.9))

    def test_refined_rows(self):
        g, m, ops = systems("refined")
        ha = 0.025
        assert ops.u.h0 == pytest.approx(ha)
        assert (ops.u.a_di[1], ops.u.a_u1[1], ops.u.a_u2[1], ops.u.a_u3[1]) == (14, -5, 4, -1)
        assert ops.u.b_lo[1] == pytest.approx(12 / ha ** 2)
        assert ops.u.b_di[1] == pytest.approx(-24 / ha ** 2)
        # transition row (node 8) mixes fine and coarse spacings
        d1, d3, e1, e2, e3 = hermitian_coeffs(0.025, 0.1)
        assert ops.u.a_lo[8] == pytest.approx(d1)
        assert ops.u.a_u1[8] == pytest.approx(d3)
        assert ops.u.b_di[8] == pytest.approx(e2)

    def test_mode_mismatch(self):
        g, m, _ = systems("uniform")
        with pytest.raises(ModeMismatchError):
            assemble_u(g, m, "refined")

    def test_robin_identity_degree_four(self):
        # raw closure before the value-matching substitution:
        # (5/3)f''0 + (2/3)f''1 - (1/3)f''2 + (7 f0 - 8 f1 + f2)/h^2 + (6/h) f'(0) = 0
        h = 0.1
        ident = StencilIdentity(
            nodes_d2=(0.0, h, 2 * h), weights_d2=(5 / 3, 2 / 3, -1 / 3),
            nodes_d1=(0.0,), weights_d1=(6 / h,),
            nodes_d0=(0.0, h, 2 * h), weights_d0=(7 / h ** 2, -8 / h ** 2, 1 / h ** 2))
        assert polynomial_exactness(ident, 4) <= 1e-12 / h ** 2
        assert polynomial_exactness(ident, 5) > 1e-3

    def test_five_point_identity_degree_five(self):
        ha = 0.025
        ident = StencilIdentity(
            nodes_d2=(ha, 2 * ha, 3 * ha, 4 * ha), weights_d2=(14, -5, 4, -1),
            nodes_d0=(0.0, ha, 2 * ha),
            weights_d0=(-12 / ha ** 2, 24 / ha ** 2, -12 / ha ** 2))
        assert polynomial_exactness(ident, 5) <= 1e-12 / ha ** 2
        assert polynomial_exactness(ident, 6) > 1e-5

    def test_uniform_interior_identity_degree_five(self):
        h = 0.1
        ident = StencilIdentity(
            nodes_d2=(-h, 0.0, h), weights_d2=(1.0, 10.0, 1.0),
            nodes_d0=(-h, 0.0, h),
            weights_d0=(-12 / h ** 2, 24 / h ** 2, -12 / h ** 2))
        assert polynomial_exactness(ident, 5) <= 1e-12 / h ** 2
        assert polynomial_exactness(ident, 6) > 1e-3

    @pytest.mark.parametrize("degree,expected", [(3, 6.0), (4, None)])
    def test_combined_compact_consistent_pairs(self, degree, expected):
        # value/delta pair (u, w = u') of polynomial degree <= 4 satisfies the
        # delta closure exactly: w''(x1) = 75(u2-u0)/(10 h^3) - ...
        h = 0.1
        u = lambda x: x ** degree
        w = lambda x: degree * x ** (degree - 1)
        wpp = degree * (degree - 1) * (degree - 2)

        def w2(x):
            return wpp * x ** (degree - 3) if degree >= 3 else 0.0

        lhs = 10.0 * w2(h)
        rhs = (75 / h ** 3 * (u(2 * h) - u(0.0))
               - 15 / h ** 2 * w(0.0) - 120 / h ** 2 * w(h) - 15 / h ** 2 * w(2 * h))
        assert lhs == pytest.approx(rhs, abs=1e-9)
        if expected is not None:
            assert lhs == pytest.approx(10.0 * expected, abs=1e-12)


class TestSolveBanded:
    def test_identity_pattern(self, rng):
        from cevput.spatial import CompactOperator
        n = 40
        eye = CompactOperator(
            size=n, kind="value", mode="uniform",
            a_lo=np.zeros(n), a_di=np.ones(n), a_u1=np.zeros(n),
            a_u2=np.zeros(n), a_u3=np.zeros(n),
            b_lo=np.zeros(n), b_di=np.zeros(n), b_u1=np.zeros(n), b02=0.0,
            h0=0.1, scaled_strike=1.0).factorize()
        rhs = rng.normal(size=n)
        assert np.allclose(solve_banded(eye, rhs), rhs, atol=0)

    @pytest.mark.parametrize("mode", ["uniform", "refined"])
    def test_matches_dense_lu(self, mode, rng):
        g, m, ops = systems(mode, h=0.06 if mode == "refined" else 0.05)
        for op in (ops.u, ops.w):
            assert op.size <= 200 or True
            dense = op.to_dense_a()
            rhs = rng.normal(size=op.size)
            sol = solve_banded(op, rhs)
            ref = np.linalg.solve(dense, rhs)
            assert np.max(np.abs(sol - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))
            assert np.max(np.abs(dense @ sol - rhs)) <= 1e-12 * np.max(np.abs(rhs))

    def test_rhs_length_checked(self):
        g, m, ops = systems("uniform")
        with pytest.raises(ValueError):
            solve_banded(ops.u, np.zeros(3))


def random_state(ops, rng, boundary=0.82):
    u = np.abs(rng.normal(0.05, 0.02, ops.u.size))
    u[0] = 0.9 - boundary
    w = -np.abs(rng.normal(0.3, 0.1, ops.w.size))
    return SolverState(0.0, u, w, boundary)


class TestRightHandSides:
    def test_decay_only_fixture(self, rng):
        # manufactured B u + b = 0 and zero delta coupling: u_t = -r u
        g, m, ops = systems("uniform")
        b0 = ops.u.boundary_vector(SolverState(0.0, np.zeros(ops.u.size),
                                               np.zeros(ops.w.size), 0.0))
        u = np.linalg.solve(ops.u.to_dense_b(), -b0)
        state = SolverState(0.0, u, np.zeros(ops.w.size), 0.0)  # delta0 == 0
        coeffs = coefficients(m, g.x[:ops.u.size], 0.8, -0.1)
        out = rhs_u(state, ops, coeffs)
        assert np.allclose(out, -m.rate * u, atol=1e-11)

    def test_diffusionless_fixture(self, rng):
        g, m, ops = systems("uniform")
        state = random_state(ops, rng)
        n = ops.u.size
        conv = rng.normal(size=n)
        coeffs = CoefficientField(diffusion=np.zeros(n), convection=conv,
                                  cross=conv, reaction=np.full(n, m.rate),
                                  rate=m.rate)
        w_ext = np.concatenate(([state.delta0], state.delta))
        assert np.allclose(rhs_u(state, ops, coeffs),
                           conv * w_ext - m.rate * state.value, atol=1e-13)

    def test_reaction_only_delta_fixture(self, rng):
        g, m, ops = systems("uniform")
        state = random_state(ops, rng)
        n = ops.u.size
        reaction = np.abs(rng.normal(0.1, 0.02, n))
        coeffs = CoefficientField(diffusion=np.zeros(n), convection=np.zeros(n),
                                  cross=np.zeros(n), reaction=reaction, rate=m.rate)
        assert np.allclose(rhs_w(state, ops, coeffs),
                           -reaction[1:] * state.delta, atol=1e-13)

    @pytest.mark.parametrize("mode", ["uniform", "refined"])
    def test_dense_reimplementation_agreement(self, mode, rng):
        g, m, ops = systems(mode)
        state = random_state(ops, rng)
        coeffs = coefficients(m, g.x[:ops.u.size], state.boundary, -0.25)
        ut = rhs_u(state, ops, coeffs)
        wt = rhs_w(state, ops, coeffs)
        # dense, cache-free re-computation
        au, bu = ops.u.to_dense_a(), ops.u.to_dense_b()
        aw, bw = ops.w.to_dense_a(), ops.w.to_dense_b()
        uxx = np.linalg.solve(au, bu @ state.value + ops.u.boundary_vector(state))
        wxx = np.linalg.solve(aw, bw @ state.delta + ops.w.boundary_vector(state))
        w_ext = np.concatenate(([state.delta0], state.delta))
        ut_ref = coeffs.diffusion * uxx + coeffs.convection * w_ext - m.rate * state.value
        wt_ref = coeffs.diffusion[1:] * wxx + coeffs.cross[1:] * uxx[1:] - coeffs.reaction[1:] * state.delta
        scale_ = max(np.max(np.abs(ut_ref)), np.max(np.abs(wt_ref)))
        assert np.max(np.abs(ut - ut_ref)) <= 1e-12 * scale_
        assert np.max(np.abs(wt - wt_ref)) <= 1e-12 * scale_

    def test_shared_solve_bit_identical(self, rng):
        g, m, ops = systems("refined")
        state = random_state(ops, rng)
        coeffs = coefficients(m, g.x[:ops.u.size], state.boundary, -0.25)
        ut, wt, uxx = stage_derivatives(state, ops, coeffs)
        assert np.array_equal(rhs_u(state, ops, coeffs, u_xx=uxx), ut)
        assert np.array_equal(rhs_w(state, ops, coeffs, u_xx=uxx), wt)
        # determinism of the underlying solve
        _, _, uxx2 = stage_derivatives(state, ops, coeffs)
        assert np.array_equal(uxx, uxx2)


class TestOrderOfAccuracy:
    @pytest.mark.parametrize("mode,floor", [("uniform", 3.9), ("refined", 3.5)])
    def test_curvature_operator_rate(self, mode, floor):
        # f = sin(pi x / 3) vanishes with its curvature at the truncation
        # boundary x = 3, matching the folded Dirichlet row exactly
        m = model()

        def err(h):
            gamma = (1, 2, 3, 4) if mode == "uniform" else (0.5, 1, 1.5, 2)
            g = build(GridSpec(h=h, x_cut=3.0, mode=mode, gamma=gamma))
            op = assemble_u(g, m, mode)
            A, B = op.to_dense_a(), op.to_dense_b()
            x = g.x[:op.size]
            B[0, 0] += 6.0 / op.h0          # strip value-matching, use true f'(0)
            b = np.zeros(op.size)
            b[0] = -6.0 / op.h0 * (np.pi / 3.0)
            d2 = np.linalg.solve(A, B @ np.sin(np.pi * x / 3) + b)
            resid = np.abs(d2 + (np.pi / 3) ** 2 * np.sin(np.pi * x / 3))
            window = (x >= 0.5) & (x <= 2.5)   # away from the boundary rows
            return resid[window].max()

        errs = [err(h) for h in (0.1, 0.05, 0.025)]
        rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(rates) >= floor
