"""Compact finite-difference operators and the semi-discrete right-hand sides.

Each operator is the implicit relation A f'' = B f + b(state): A couples
second-derivative values on a three-node stencil (plus a wider first row at
the boundary), B is the matching function-value stencil, and b carries the
boundary closure.  Row conventions:

value operator (size M x M over nodes x_0..x_{M-1}):
  row 0        Robin closure built from w0 - u0 = -E, spacing = first interval
  row 1        (refined grids only) five-point locally uniform relation
  interior     classical (1,10,1)/(12,-24,12)/h^2 on uniform grids, the
               degree-4-exact non-uniform Hermitian rows otherwise
  last row     the x_M terms drop: the far field is a hard Dirichlet zero

delta operator (size (M-1) x (M-1) over x_1..x_{M-1}):
  row 0        combined compact closure using u_0, u_2 and the pasted w_0
  interior     as above

A is tridiagonal except for at most two extra superdiagonal entries in the
first rows, so a banded LU with bandwidths (1, 3) factorizes it exactly once
per grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import ModeMismatchError, SingularSystemError
from .grid import Grid
from .model import CoefficientField, ScaledModel, SolverState

_KL, _KU = 1, 3


def hermitian_coeffs(h_left: float, h_right: float):
    """Non-uniform compact coefficients (d1, d3, e1, e2, e3).

    Unique row with d1 f''(x-h_left) + f''(x) + d3 f''(x+h_right) equal to
    e1 f(x-h_left) + e2 f(x) + e3 f(x+h_right) for all polynomials of degree
    <= 4; the uniform limit is the classical compact row scaled by 1/10.
    """
    a, b = h_left, h_right
    den = a * a + 3.0 * a * b + b * b
    d1 = b * (a * a + a * b - b * b) / ((a + b) * den)
    d3 = a * (b * b + a * b - a * a) / ((a + b) * den)
    e1 = 12.0 * b / ((a + b) * den)
    e2 = -12.0 / den
    e3 = 12.0 * a / ((a + b) * den)
    return d1, d3, e1, e2, e3


@dataclass
class CompactOperator:
    """Banded A/B pair with a state-dependent boundary vector.

    Band arrays are indexed by row: a_lo[i] sits at column i-1, a_u1[i] at
    column i+1, and so on.  b02 is the lone B entry at (0, 2).
    """

    size: int
    kind: str                       # 'value' or 'delta'
    mode: str
    a_lo: np.ndarray
    a_di: np.ndarray
    a_u1: np.ndarray
    a_u2: np.ndarray
    a_u3: np.ndarray
    b_lo: np.ndarray
    b_di: np.ndarray
    b_u1: np.ndarray
    b02: float
    h0: float                       # spacing entering the boundary closure
    scaled_strike: float
    _lu: tuple = field(default=None, repr=False)

    def factorize(self):
        """Banded LU (LAPACK gbtrf), cached; called once at assembly."""
        n = self.size
        ab = np.zeros((2 * _KL + _KU + 1, n))
        for off, band in ((-1, self.a_lo), (0, self.a_di), (1, self.a_u1),
                          (2, self.a_u2), (3, self.a_u3)):
            for i in range(n):
                j = i + off
                if 0 <= j < n and band[i] != 0.0:
                    ab[_KL + _KU + i - j, j] = band[i]
        lu, piv, info = lapack.dgbtrf(ab, _KL, _KU)
        if info != 0:
            raise SingularSystemError(f"banded LU failed with info={info}")
        self._lu = (lu, piv)
        return self

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol, info = lapack.dgbtrs(self._lu[0], _KL, _KU, rhs, self._lu[1])
        if info != 0:
            raise SingularSystemError(f"banded solve failed with info={info}")
        return sol

    def apply_right(self, vec: np.ndarray) -> np.ndarray:
        """B @ vec for the banded right matrix."""
        out = self.b_di * vec
        out[:-1] += self.b_u1[:-1] * vec[1:]
        out[1:] += self.b_lo[1:] * vec[:-1]
        if self.b02 != 0.0:
            out[0] += self.b02 * vec[2]
        return out

    def boundary_vector(self, state: SolverState) -> np.ndarray:
        out = np.zeros(self.size)
        if self.kind == "value":
            out[0] = 6.0 * self.scaled_strike / self.h0
        else:
            out[0] = (75.0 / self.h0 ** 3 * (state.value[2] - state.value[0])
                      + (-15.0 / self.h0 ** 2) * state.delta0)
        return out

    # dense reconstructions are for tests and small-problem oracles
    def to_dense_a(self) -> np.ndarray:
        n = self.size
        dense = np.zeros((n, n))
        for off, band in ((-1, self.a_lo), (0, self.a_di), (1, self.a_u1),
                          (2, self.a_u2), (3, self.a_u3)):
            for i in range(n):
                if 0 <= i + off < n:
                    dense[i, i + off] = band[i]
        return dense

    def to_dense_b(self) -> np.ndarray:
        n = self.size
        dense = np.zeros((n, n))
        for off, band in ((-1, self.b_lo), (0, self.b_di), (1, self.b_u1)):
            for i in range(n):
                if 0 <= i + off < n:
                    dense[i, i + off] = band[i]
        dense[0, 2] += self.b02
        return dense


def _check_dominance(op: CompactOperator):
    off = (np.abs(op.a_lo) + np.abs(op.a_u1) + np.abs(op.a_u2) + np.abs(op.a_u3))
    if not np.all(np.abs(op.a_di) > off - 1e-14):
        worst = int(np.argmin(np.abs(op.a_di) - off))
        raise SingularSystemError(
            f"{op.kind} operator row {worst} lost diagonal dominance")


def _interior_rows(op: CompactOperator, grid: Grid, start: int, node_of_row):
    """Fill rows start.. with uniform compact or Hermitian relations."""
    spacing = grid.spacing
    for row in range(start, op.size):
        i = node_of_row(row)
        hl = spacing[i - 1]
        hr = spacing[i]
        if grid.mode == "uniform":
            op.a_lo[row], op.a_di[row], op.a_u1[row] = 1.0, 10.0, 1.0
            op.b_lo[row] = op.b_u1[row] = 12.0 / hl ** 2
            op.b_di[row] = -24.0 / hl ** 2
        else:
            d1, d3, e1, e2, e3 = hermitian_coeffs(hl, hr)
            op.a_lo[row], op.a_di[row], op.a_u1[row] = d1, 1.0, d3
            op.b_lo[row], op.b_di[row], op.b_u1[row] = e1, e2, e3
    # the row at the last unknown references the x_M node; those terms are
    # dropped because u and u'' both vanish at the truncation boundary
    op.a_u1[op.size - 1] = 0.0
    op.b_u1[op.size - 1] = 0.0


def assemble_u(grid: Grid, model: ScaledModel, mode: str) -> CompactOperator:
    """Value operator; see the module docstring for the row layout."""
    if mode != grid.mode:
        raise ModeMismatchError(f"operator mode {mode!r} vs grid mode {grid.mode!r}")
    n = grid.n_nodes - 1
    op = CompactOperator(
        size=n, kind="value", mode=mode,
        a_lo=np.zeros(n), a_di=np.zeros(n), a_u1=np.zeros(n),
        a_u2=np.zeros(n), a_u3=np.zeros(n),
        b_lo=np.zeros(n), b_di=np.zeros(n), b_u1=np.zeros(n), b02=0.0,
        h0=grid.h0, scaled_strike=model.scaled_strike,
    )
    h0 = grid.h0
    op.a_di[0], op.a_u1[0], op.a_u2[0] = 5.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0
    op.b_di[0] = -(7.0 + 6.0 * h0) / h0 ** 2
    op.b_u1[0] = 8.0 / h0 ** 2
    op.b02 = -1.0 / h0 ** 2
    start = 1
    if mode == "refined":
        # row 1 couples f'' at nodes 1..4 only; spacing is locally uniform h0
        op.a_di[1], op.a_u1[1], op.a_u2[1], op.a_u3[1] = 14.0, -5.0, 4.0, -1.0
        op.b_lo[1] = 12.0 / h0 ** 2
        op.b_di[1] = -24.0 / h0 ** 2
        op.b_u1[1] = 12.0 / h0 ** 2
        start = 2
    _interior_rows(op, grid, start, node_of_row=lambda row: row)
    _check_dominance(op)
    return op.factorize()


def assemble_w(grid: Grid, model: ScaledModel, mode: str) -> CompactOperator:
    """Delta operator over x_1..x_{M-1}; row 0 is the combined compact closure."""
    if mode != grid.mode:
        raise ModeMismatchError(f"operator mode {mode!r} vs grid mode {grid.mode!r}")
    n = grid.n_nodes - 2
    op = CompactOperator(
        size=n, kind="delta", mode=mode,
        a_lo=np.zeros(n), a_di=np.zeros(n), a_u1=np.zeros(n),
        a_u2=np.zeros(n), a_u3=np.zeros(n),
        b_lo=np.zeros(n), b_di=np.zeros(n), b_u1=np.zeros(n), b02=0.0,
        h0=grid.h0, scaled_strike=model.scaled_strike,
    )
    h0 = grid.h0
    op.a_di[0] = 10.0
    op.b_di[0] = -120.0 / h0 ** 2
    op.b_u1[0] = -15.0 / h0 ** 2
    _interior_rows(op, grid, 1, node_of_row=lambda row: row + 1)
    _check_dominance(op)
    return op.factorize()


@dataclass(frozen=True)
class OperatorPair:
    u: CompactOperator
    w: CompactOperator


def solve_banded(op: CompactOperator, rhs: np.ndarray) -> np.ndarray:
    """A^{-1} rhs through the cached banded factorization."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.size,):
        raise ValueError(f"rhs length {rhs.shape} does not match operator size {op.size}")
    return op.solve(rhs)


def curvature_u(state: SolverState, ops: OperatorPair) -> np.ndarray:
    """u_xx = A_u^{-1}(B_u u + b_u); shared between both right-hand sides."""
    return ops.u.solve(ops.u.apply_right(state.value) + ops.u.boundary_vector(state))


def rhs_u(state: SolverState, ops: OperatorPair, coeffs: CoefficientField,
          u_xx: np.ndarray = None) -> np.ndarray:
    """Time derivative of the scaled value vector."""
    if u_xx is None:
        u_xx = curvature_u(state, ops)
    w_ext = np.concatenate(([state.delta0], state.delta))
    return (coeffs.diffusion * u_xx + coeffs.convection * w_ext
            - coeffs.rate * state.value)


def rhs_w(state: SolverState, ops: OperatorPair, coeffs: CoefficientField,
          u_xx: np.ndarray = None) -> np.ndarray:
    """Time derivative of the scaled delta vector (reuses the value solve)."""
    if u_xx is None:
        u_xx = curvature_u(state, ops)
    w_xx = ops.w.solve(ops.w.apply_right(state.delta) + ops.w.boundary_vector(state))
    return (coeffs.diffusion[1:] * w_xx + coeffs.cross[1:] * u_xx[1:]
            - coeffs.reaction[1:] * state.delta)


def stage_derivatives(state: SolverState, ops: OperatorPair,
                      coeffs: CoefficientField):
    """(u_t, w_t, u_xx) with the value solve computed once and shared."""
    u_xx = curvature_u(state, ops)
    return (rhs_u(state, ops, coeffs, u_xx=u_xx),
            rhs_w(state, ops, coeffs, u_xx=u_xx),
            u_xx)
