"""Pure numpy fallback kernels.

The stepper composes the public building blocks (stage_refresh, the banded
operator solves, the semi-discrete right-hand sides), so it doubles as the
executable definition the compiled stepper is tested against.
"""

from __future__ import annotations

import numpy as np

from ..errors import BoundaryEscapeError
from ..model import SolverState
from ..spatial import stage_derivatives
from . import StepResult


class ReferenceStepper:
    backend = "python"

    def __init__(self, system, tableau):
        self.system = system
        self.a = np.asarray(tableau.a)
        self.b_high = np.asarray(tableau.b_high)
        self.b_low = np.asarray(tableau.b_low)
        self.stages = tableau.stages

    def _derivs(self, u, w):
        ctx = self.system.stage_refresh(u)
        state = SolverState(0.0, u, w, ctx.boundary)
        ut, wt, _ = stage_derivatives(state, self.system.ops, ctx.coeffs)
        return ut, wt, ctx.clamped

    def step(self, u, w, k, fsal_ku=None, fsal_kw=None) -> StepResult:
        n_u, n_w = u.size, w.size
        ku = np.empty((self.stages, n_u))
        kw = np.empty((self.stages, n_w))
        clamps = 0
        for i in range(self.stages):
            if i == 0 and fsal_ku is not None:
                ku[0], kw[0] = fsal_ku, fsal_kw
                continue
            if i == 0:
                ui, wi = u, w
            else:
                ui = u + k * (self.a[i, :i] @ ku[:i])
                wi = w + k * (self.a[i, :i] @ kw[:i])
            try:
                ku[i], kw[i], clamped = self._derivs(ui, wi)
            except BoundaryEscapeError:
                z = np.empty(0)
                return StepResult(z, z, z, z, np.inf, np.inf, z, z, clamps, 1)
            clamps += clamped
        u5 = u + k * (self.b_high @ ku)
        w5 = w + k * (self.b_high @ kw)
        u4 = u + k * (self.b_low @ ku)
        w4 = w + k * (self.b_low @ kw)
        return StepResult(
            u_high=u5, w_high=w5, u_low=u4, w_low=w4,
            err_value=float(np.max(np.abs(u5 - u4))),
            err_delta=float(np.max(np.abs(w5 - w4))),
            ku_last=ku[-1], kw_last=kw[-1],
            clamp_events=clamps, status=0,
        )


def psor_redblack(sub, diag, sup, rhs, floor, start, omega, tol, max_iter):
    """Projected SOR with red-black ordering (vectorizable Gauss-Seidel).

    sub[i] multiplies v[i-1] (sub[0] unused), sup[i] multiplies v[i+1]
    (sup[-1] unused).  Returns (v, iterations); iterations == max_iter + 1
    signals non-convergence, which callers turn into an error.
    """
    v = np.asarray(start, dtype=float).copy()
    n = v.size
    reds = np.arange(0, n, 2)
    blacks = np.arange(1, n, 2)
    for it in range(1, max_iter + 1):
        delta = 0.0
        for idx in (reds, blacks):
            vm = np.where(idx > 0, v[np.maximum(idx - 1, 0)], 0.0)
            vp = np.where(idx < n - 1, v[np.minimum(idx + 1, n - 1)], 0.0)
            resid = rhs[idx] - (sub[idx] * vm + diag[idx] * v[idx] + sup[idx] * vp)
            vnew = np.maximum(floor[idx], v[idx] + omega * resid / diag[idx])
            delta = max(delta, float(np.max(np.abs(vnew - v[idx]))) if idx.size else 0.0)
            v[idx] = vnew
        if delta < tol:
            return v, it
    return v, max_iter + 1
