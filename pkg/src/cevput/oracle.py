"""Independent reference pricer and scheme-verification utilities.

The pricer solves the untransformed American put variational inequality in
asset space with Crank-Nicolson time stepping and projected SOR, exactly the
kind of benchmark the solver's tables are checked against.  It shares no
discretization machinery with the main solver: different variables, different
mesh, different linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateOffsetsError, InvalidParameterError, SingularSystemError, SorConvergenceError
from .interp import lagrange_slope, lagrange_value
from .model import ModelParams


@dataclass(frozen=True)
class LcpGrid:
    """Asset-space/time resolution and SOR settings for the benchmark pricer."""

    n_space: int = 2400
    n_time: int = 600
    s_max: float = None           # defaults to 4 * max(K, S0)
    omega: float = 1.2
    tol: float = 1e-9
    max_iter: int = 10000

    def __post_init__(self):
        if self.n_space < 8 or self.n_time < 1:
            raise InvalidParameterError("n_space/n_time too small")
        if not (0.0 < self.omega < 2.0):
            raise InvalidParameterError(f"omega must lie in (0, 2), got {self.omega}")


@dataclass(frozen=True)
class OraclePrice:
    value: float                  # V(T, S0), currency
    delta: float                  # dV/dS at S0
    boundary_tau: np.ndarray
    boundary: np.ndarray          # largest S with V == payoff, per time level


def cn_psor_price(params: ModelParams, grid: LcpGrid = LcpGrid(),
                  backend: str = None) -> OraclePrice:
    """Crank-Nicolson + projected SOR solve of min(L V, V - payoff) = 0.

    The CEV diffusion is sigma_u^2 S^(2 alpha + 2)/2 with
    sigma_u = sigma * S0^(-alpha), matching the spot-scaled volatility
    convention of the main solver.  S = 0 sits in the exercise region
    (V = K); V(S_max) = 0.
    """
    K, S0, T = params.strike, params.spot, params.maturity
    r, alpha = params.rate, params.elasticity
    s_max = grid.s_max if grid.s_max is not None else 4.0 * max(K, S0)
    if s_max < 4.0 * max(K, S0) - 1e-12:
        raise InvalidParameterError(
            f"s_max {s_max} below 4*max(K, S0) = {4.0 * max(K, S0)}")
    sigma_u = params.sigma * S0 ** (-alpha)
    n = grid.n_space
    S = np.linspace(0.0, s_max, n + 1)
    dS = S[1] - S[0]
    dt = T / grid.n_time
    payoff = np.maximum(K - S, 0.0)
    V = payoff.copy()
    i = np.arange(1, n)
    Si = S[i]
    diff = 0.5 * sigma_u ** 2 * Si ** (2.0 * alpha + 2.0) / dS ** 2
    conv = 0.5 * r * Si / dS
    lo = diff - conv
    di = -2.0 * diff - r
    up = diff + conv
    a_lo = -0.5 * dt * lo
    a_di = 1.0 - 0.5 * dt * di
    a_up = -0.5 * dt * up
    floor = payoff[i]
    boundary = np.empty(grid.n_time + 1)
    boundary[0] = K
    taus = np.linspace(0.0, T, grid.n_time + 1)
    for step in range(grid.n_time):
        rhs = V[i] + 0.5 * dt * (lo * V[i - 1] + di * V[i] + up * V[i + 1])
        rhs[0] -= a_lo[0] * K            # V(0) = K on the new level
        sol, iters = kernels.psor_solve(a_lo, a_di, a_up, rhs, floor, V[i],
                                        grid.omega, grid.tol, grid.max_iter,
                                        backend=backend)
        if iters > grid.max_iter:
            raise SorConvergenceError(
                f"projected SOR hit the {grid.max_iter}-iteration cap at "
                f"time level {step + 1}")
        V[i] = sol
        V[0] = K
        V[-1] = 0.0
        exercised = np.nonzero((V <= payoff + 1e-12) & (payoff > 0.0))[0]
        boundary[step + 1] = S[exercised[-1]] if exercised.size else 0.0
    return OraclePrice(
        value=float(lagrange_value(S, V, S0, npts=4)),
        delta=float(lagrange_slope(S, V, S0, npts=4)),
        boundary_tau=taus,
        boundary=boundary,
    )


def moment_oracle(offsets, targets, powers=None) -> np.ndarray:
    """Dense solve of the moment conditions sum_i w_i x_i^m = target_m.

    powers defaults to m = 1..len(targets).  This is the independent check
    behind the closed-form weight constructions: any of them can be re-derived
    by choosing the offsets, targets, and moment powers of its defining
    Hermite-Birkhoff system.
    """
    offsets = np.asarray(offsets, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if powers is None:
        powers = range(1, len(targets) + 1)
    powers = list(powers)
    if len(offsets) != len(targets) or len(powers) != len(targets):
        raise InvalidParameterError("offsets, targets, powers must have equal length")
    if len(np.unique(offsets)) != len(offsets):
        raise DegenerateOffsetsError(f"coincident offsets in {offsets}")
    rows = np.array([[x ** m for x in offsets] for m in powers])
    try:
        return np.linalg.solve(rows, targets)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from None


@dataclass(frozen=True)
class StencilIdentity:
    """Linear identity sum w2_i f''(x2_i) + sum w1_i f'(x1_i) + sum w0_i f(x0_i) = 0."""

    nodes_d2: tuple = ()
    weights_d2: tuple = ()
    nodes_d1: tuple = ()
    weights_d1: tuple = ()
    nodes_d0: tuple = ()
    weights_d0: tuple = ()


def polynomial_exactness(stencil: StencilIdentity, degree: int) -> float:
    """Worst residual of the identity over monomials x^m, m = 0..degree."""
    worst = 0.0
    for m in range(degree + 1):
        total = 0.0
        for x, wgt in zip(stencil.nodes_d2, stencil.weights_d2):
            total += wgt * (m * (m - 1) * x ** (m - 2) if m >= 2 else 0.0)
        for x, wgt in zip(stencil.nodes_d1, stencil.weights_d1):
            total += wgt * (m * x ** (m - 1) if m >= 1 else 0.0)
        for x, wgt in zip(stencil.nodes_d0, stencil.weights_d0):
            total += wgt * x ** m
        worst = max(worst, abs(total))
    return worst
