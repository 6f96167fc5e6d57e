"""Acceptance suite: every criterion prints one labelled line per check.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the measured values
next to their targets.  Heavy runs share module-scoped fixtures; the whole
module is budgeted for a few minutes with the compiled backend.
"""

import time

import numpy as np

from cevput import (DORMAND_PRINCE_54, GridSpec, LcpGrid, ModelParams,
                    build, cn_psor_price, scale)
from cevput.cli import RunConfig, price_one, run_converge, run_sweep
from cevput.freeboundary import (SqrtProfile, boundary_derivative, q_prime_x0,
                                 q_second_x0, staggered_weights, uniform_weights)
from cevput.integrator import embedded_step
from cevput.oracle import StencilIdentity, polynomial_exactness
from cevput.spatial import assemble_u, assemble_w, hermitian_coeffs, solve_banded


def report(label, measured, target, tol):
    ok = abs(measured - target) <= tol
    print(f"  [{'PASS' if ok else 'FAIL'}] {label}: {measured:.6g} "
          f"vs {target:.6g} (tol {tol:.1e})")
    return ok


def nicholls_cfg(**kw):
    base = dict(strikes=(9.0, 10.0, 11.0), maturity=0.5, sigma=0.2, rate=0.05,
                alpha=-1.0 / 3.0, spot=10.0, h=0.06, scheme="dcsl",
                gamma=(0.5, 1.0, 1.5, 2.0), epsilon=1e-6)
    base.update(kw)
    return RunConfig(**base)


class TestCriterion1:
    def test_table2_values_and_runtime(self):
        print("\ncriterion 1: short-maturity values, DCSL h=0.06")
        cfg = nicholls_cfg(h=0.06)
        targets = {9.0: 0.1385, 10.0: 0.4649, 11.0: 1.0894}
        ok, worst_wall = True, 0.0
        for strike, target in targets.items():
            row = price_one(cfg, strike)
            ok &= report(f"K={strike:g} value", row.value, target, 5e-4)
            worst_wall = max(worst_wall, row.wall_s)
        print(f"  [{'PASS' if worst_wall < 10 else 'FAIL'}] slowest strike: "
              f"{worst_wall:.3f}s (budget 10s)")
        assert ok
        assert worst_wall < 10.0


class TestCriterion2:
    def test_table3_deltas(self):
        print("\ncriterion 2: delta sensitivities, DCSL h=0.03")
        cfg = nicholls_cfg(h=0.03)
        targets = {9.0: -0.1775, 10.0: -0.4409, 11.0: -0.7594}
        ok = True
        for strike, target in targets.items():
            row = price_one(cfg, strike)
            ok &= report(f"K={strike:g} delta", row.delta, target, 1e-3)
        assert ok


class TestCriterion3:
    def test_table5_precision_anchor(self):
        print("\ncriterion 3: nine-decimal anchor, DCSL h=0.01, K=9")
        row = price_one(nicholls_cfg(h=0.01), 9.0)
        ok = report("value", row.value, 0.13845314, 5e-5)
        ok &= report("delta", row.delta, -0.17749883, 5e-5)
        assert ok


class TestCriterion4:
    def test_table8_values_and_oracle(self):
        print("\ncriterion 4: alpha=1/2 family, h=0.03, with CN-PSOR cross-check")
        cfg = RunConfig(strikes=(80.0, 90.0, 100.0, 110.0, 120.0), maturity=0.5,
                        sigma=0.3, rate=0.07, alpha=0.5, spot=100.0, h=0.03)
        targets = {80.0: 0.852, 90.0: 2.969, 100.0: 7.060, 110.0: 13.175,
                   120.0: 20.992}
        ok = True
        for strike, target in targets.items():
            row = price_one(cfg, strike)
            ok &= report(f"K={strike:g} value", row.value, target, 2e-3)
            oracle = cn_psor_price(cfg.params(strike),
                                   LcpGrid(n_space=2400, n_time=600))
            ok &= report(f"K={strike:g} vs oracle", row.value, oracle.value, 3e-3)
        assert ok


class TestCriterion5:
    def test_table12_values(self):
        print("\ncriterion 5: alpha=-1 long-maturity family, h=0.06")
        cfg = RunConfig(strikes=(35.0, 40.0, 45.0), maturity=3.0, sigma=0.3,
                        rate=0.05, alpha=-1.0, spot=40.0, h=0.06)
        targets = {35.0: 4.041, 40.0: 5.792, 45.0: 8.114}
        ok = True
        for strike, target in targets.items():
            row = price_one(cfg, strike)
            ok &= report(f"K={strike:g} value", row.value, target, 2e-3)
        assert ok


class TestCriterion6:
    def test_boundary_convergence_order(self):
        print("\ncriterion 6: boundary self-convergence, fixed k=1e-5")
        cfg = RunConfig(strikes=(9.0,), maturity=0.2, sigma=0.2, rate=0.05,
                        alpha=-1.0 / 3.0, spot=10.0, h=0.1,
                        gamma=(1.0, 2.0, 3.0, 4.0), k_fixed=1e-5,
                        h_list=(0.1, 0.05, 0.025, 0.0125))
        rows = run_converge(cfg)
        ok = True
        for r in rows:
            if not np.isnan(r.rate):
                passed = r.rate >= 2.8
                ok &= passed
                print(f"  [{'PASS' if passed else 'FAIL'}] h={r.h:g}: "
                      f"err={r.max_error:.3e} rate={r.rate:.3f} (floor 2.8)")
            elif not np.isnan(r.max_error):
                print(f"  [ -- ] h={r.h:g}: err={r.max_error:.3e}")
        assert ok


class TestCriterion7:
    CFG = dict(strikes=(35.0,), maturity=3.0, sigma=0.3, rate=0.05, alpha=-1.0,
               spot=40.0, h=0.05)

    def test_safety_factor_sweep_is_flat(self):
        print("\ncriterion 7a: safety-factor sweep flat at 4.0408")
        rows = run_sweep(RunConfig(rho_list=(0.3, 0.6, 0.9), **self.CFG))
        ok = True
        for r in rows:
            ok &= report(f"rho={r.setting:g}", r.value, 4.0408, 5e-4)
        assert ok

    def test_tolerance_sweep_anchors(self):
        print("\ncriterion 7b: tolerance sweep against (4.3855, 4.0429, 4.0408)")
        rows = run_sweep(RunConfig(epsilon_list=(1e-4, 1e-5, 1e-6), **self.CFG))
        vals = [r.value for r in rows]
        converged = vals[-1]
        drift = [abs(v - converged) for v in vals]
        mono = drift[0] >= drift[1] >= drift[2]
        print(f"  [{'PASS' if mono else 'FAIL'}] monotone toward converged: "
              f"{[f'{v:.4f}' for v in vals]}")
        ok = mono
        for r, target, tol in zip(rows, (4.3855, 4.0429, 4.0408),
                                  (5e-3, 1e-3, 5e-4)):
            ok &= report(f"eps={r.setting:g}", r.value, target, tol)
        if not ok:
            print("  note: the loose-tolerance table values could not be "
                  "reproduced by any faithful controller variant (see the "
                  "decisions ledger); this solver's loose-eps prices stay "
                  "within 2e-4 of the converged value.")
        assert ok


class TestCriterion8:
    """Property bundle; the whole class must run in under 60 seconds."""

    started = None

    @classmethod
    def setup_class(cls):
        cls.started = time.perf_counter()

    @classmethod
    def teardown_class(cls):
        elapsed = time.perf_counter() - cls.started
        print(f"\ncriterion 8 property bundle: {elapsed:.1f}s (budget 60s)")
        assert elapsed < 60.0

    def test_tableau_order_conditions(self):
        t = DORMAND_PRINCE_54
        assert np.max(np.abs(t.a.sum(axis=1) - t.c)) <= 1e-15
        for q in range(1, 6):
            assert abs(np.dot(t.b_high, t.c ** (q - 1)) - 1.0 / q) <= 1e-15
        for q in range(1, 5):
            assert abs(np.dot(t.b_low, t.c ** (q - 1)) - 1.0 / q) <= 1e-15

    def test_stencil_polynomial_exactness(self):
        h, ha = 0.1, 0.025
        interior = StencilIdentity(
            nodes_d2=(-h, 0.0, h), weights_d2=(1, 10, 1),
            nodes_d0=(-h, 0.0, h), weights_d0=(-12 / h ** 2, 24 / h ** 2, -12 / h ** 2))
        assert polynomial_exactness(interior, 5) <= 1e-12 / h ** 2
        d1, d3, e1, e2, e3 = hermitian_coeffs(ha, h)
        nonuni = StencilIdentity(
            nodes_d2=(-ha, 0.0, h), weights_d2=(d1, 1.0, d3),
            nodes_d0=(-ha, 0.0, h), weights_d0=(-e1, -e2, -e3))
        assert polynomial_exactness(nonuni, 4) <= 1e-12 * abs(e2)
        robin = StencilIdentity(
            nodes_d2=(0.0, h, 2 * h), weights_d2=(5 / 3, 2 / 3, -1 / 3),
            nodes_d1=(0.0,), weights_d1=(6 / h,),
            nodes_d0=(0.0, h, 2 * h), weights_d0=(7 / h ** 2, -8 / h ** 2, 1 / h ** 2))
        assert polynomial_exactness(robin, 3) <= 1e-12 / h ** 2
        # combined compact delta closure on consistent (u, u') pairs
        for degree in range(5):
            u = lambda x: x ** degree
            w = lambda x: degree * x ** (degree - 1) if degree >= 1 else 0.0
            w2 = (degree * (degree - 1) * (degree - 2) * h ** (degree - 3)
                  if degree >= 3 else 0.0)
            rhs = (75 / h ** 3 * (u(2 * h) - u(0.0)) - 15 / h ** 2 * w(0.0)
                   - 120 / h ** 2 * w(h) - 15 / h ** 2 * w(2 * h))
            assert abs(10.0 * w2 - rhs) <= 1e-12 / h ** 3

    def test_weight_moment_conditions(self):
        uni = uniform_weights()
        offs = np.arange(1.0, 5.0)
        assert abs(np.dot(uni.node_weights, offs) - 25 / 6) <= 1e-10
        assert abs(np.dot(uni.node_weights, offs ** 2) / 2 - 1.0) <= 1e-10
        for m in (3, 4, 5):
            assert abs(np.dot(uni.node_weights, offs ** m)) <= 1e-10
        stag = staggered_weights(0.06, (0.5, 1.0, 1.5, 2.0))
        so = stag.offsets
        scale_ = np.abs(stag.node_weights).max()
        for m in (3, 4, 5):
            assert abs(np.dot(stag.node_weights, so ** m)) <= 1e-10 * scale_
        assert abs(np.dot(stag.node_weights, so) - stag.slope_weight) <= 1e-10
        assert abs(np.dot(stag.node_weights, so ** 2) / 2
                   - stag.curvature_weight) <= 1e-10

    def test_boundary_rate_round_trip(self):
        model = scale(ModelParams(strike=9.0, maturity=0.5, sigma=0.2, rate=0.05,
                                  elasticity=-1.0 / 3.0, spot=10.0))
        for family in ("uniform", "staggered"):
            w = (uniform_weights(0.06) if family == "uniform"
                 else staggered_weights(0.06, (0.5, 1.0, 1.5, 2.0)))
            for g_true in (0.0, -0.37, -2.5):
                offs = np.asarray(w.offsets)
                prof = SqrtProfile(
                    q_prime_x0(model, 0.85) * offs
                    + 0.5 * q_second_x0(model, 0.85, g_true) * offs ** 2,
                    tuple(range(4)))
                got = boundary_derivative(prof, w, model, 0.85).rate
                assert abs(got - g_true) <= 1e-10

    def test_banded_solver_against_dense(self, rng):
        model = scale(ModelParams(strike=9.0, maturity=0.5, sigma=0.2, rate=0.05,
                                  elasticity=-1.0 / 3.0, spot=10.0))
        for mode, h in (("uniform", 0.05), ("refined", 0.06)):
            gamma = (1, 2, 3, 4) if mode == "uniform" else (0.5, 1, 1.5, 2)
            grid = build(GridSpec(h=h, mode=mode, gamma=gamma))
            for op in (assemble_u(grid, model, mode), assemble_w(grid, model, mode)):
                assert op.size <= 200
                rhs = rng.normal(size=op.size)
                sol = solve_banded(op, rhs)
                ref = np.linalg.solve(op.to_dense_a(), rhs)
                assert np.max(np.abs(sol - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))

    def test_ode_fixture_local_accuracy(self):
        y5, _, _ = embedded_step(lambda y: -y, np.array([1.0]), 0.1)
        assert abs(y5[0] - np.exp(-0.1)) <= 1e-8


class TestCriterion9:
    def test_mean_step_decreases_with_elasticity_magnitude(self):
        print("\ncriterion 9: mean accepted step vs |alpha|")
        means = []
        for alpha in (-1.0 / 3.0, -0.5, -1.0):
            cfg = RunConfig(strikes=(40.0,), maturity=3.0, sigma=0.3, rate=0.05,
                            alpha=alpha, spot=40.0, h=0.05)
            row = price_one(cfg, 40.0)
            means.append(cfg.maturity / row.accepted)
            print(f"  alpha={alpha:+.4f}: accepted={row.accepted} "
                  f"mean_k={means[-1]:.3e}")
        ok = means[0] > means[1] > means[2]
        print(f"  [{'PASS' if ok else 'FAIL'}] strictly decreasing in |alpha|")
        assert ok
