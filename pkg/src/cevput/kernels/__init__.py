"""Hot-loop backends: compiled extension when built, pure numpy otherwise.

The time stepper and the projected-SOR sweep dominate runtime; both exist in
two interchangeable forms.  The compiled form (Cython, `cevput._compiled`)
fuses the seven-stage step into C loops with its own bordered-tridiagonal
factorization; the reference form composes the public module functions and
LAPACK banded solves.  Selection happens here at import, overridable with the
CEVPUT_BACKEND environment variable ('compiled' or 'python') or per call via
the backend argument.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError

try:
    from .. import _compiled as _ext
except ImportError:
    _ext = None

_env = os.environ.get("CEVPUT_BACKEND", "").strip().lower()
if _env == "compiled" and _ext is None:
    raise ImportError("CEVPUT_BACKEND=compiled but the extension is not built")
if _env == "python":
    _default_backend = "python"
elif _env == "compiled":
    _default_backend = "compiled"
else:
    _default_backend = "compiled" if _ext is not None else "python"

#: backend used when none is requested explicitly
BACKEND = _default_backend


@dataclass(frozen=True)
class StepResult:
    """Everything one embedded step produces."""

    u_high: np.ndarray
    w_high: np.ndarray
    u_low: np.ndarray
    w_low: np.ndarray
    err_value: float
    err_delta: float
    ku_last: np.ndarray     # last-stage derivatives, reusable as the next
    kw_last: np.ndarray     # step's first stage when the step is accepted
    clamp_events: int
    status: int             # 0 ok, 1 boundary escaped during a stage


def pack_problem(system) -> dict:
    """Flatten a Discretization into plain arrays for the compiled stepper."""
    ops = system.ops
    model = system.model
    w = system.weights
    qidx = np.asarray(system.qnodes, dtype=np.int64)
    return dict(
        au=np.ascontiguousarray(np.vstack([ops.u.a_lo, ops.u.a_di, ops.u.a_u1,
                                           ops.u.a_u2, ops.u.a_u3])),
        aw=np.ascontiguousarray(np.vstack([ops.w.a_lo, ops.w.a_di, ops.w.a_u1,
                                           ops.w.a_u2, ops.w.a_u3])),
        bu=np.ascontiguousarray(np.vstack([ops.u.b_lo, ops.u.b_di, ops.u.b_u1])),
        bw=np.ascontiguousarray(np.vstack([ops.w.b_lo, ops.w.b_di, ops.w.b_u1])),
        bu02=float(ops.u.b02),
        bu0=float(6.0 * model.scaled_strike / ops.u.h0),
        cw_du=float(75.0 / ops.w.h0 ** 3),
        cw_w0=float(-15.0 / ops.w.h0 ** 2),
        ebx=np.ascontiguousarray(system._ebx),
        qidx=qidx,
        qex=np.ascontiguousarray(np.exp(system.grid.x[qidx])),
        qwt=np.ascontiguousarray(np.asarray(w.node_weights, dtype=float)),
        c0=float(w.slope_weight),
        d0=float(w.curvature_weight),
        strike=float(model.scaled_strike),
        rate=float(model.rate),
        sigma=float(model.sigma),
        alpha=float(model.elasticity),
        beta=float(model.beta),
    )


def make_stepper(system, tableau, backend: str = None):
    """Stepper object with .step(u, w, k, fsal_ku, fsal_kw) -> StepResult."""
    choice = (backend or BACKEND).lower()
    if choice in ("auto", ""):
        choice = BACKEND
    if choice == "compiled":
        if _ext is None:
            raise InvalidParameterError("compiled backend requested but not built")
        return _CompiledStepper(system, tableau)
    if choice == "python":
        from .reference import ReferenceStepper
        return ReferenceStepper(system, tableau)
    raise InvalidParameterError(f"unknown backend {backend!r}")


class _CompiledStepper:
    backend = "compiled"

    def __init__(self, system, tableau):
        data = pack_problem(system)
        self._core = _ext.Stepper(
            data["au"], data["aw"], data["bu"], data["bw"],
            data["bu02"], data["bu0"], data["cw_du"], data["cw_w0"],
            data["ebx"], data["qidx"], data["qex"], data["qwt"],
            data["c0"], data["d0"], data["strike"], data["rate"],
            data["sigma"], data["alpha"], data["beta"],
            np.ascontiguousarray(tableau.a), np.ascontiguousarray(tableau.b_high),
            np.ascontiguousarray(tableau.b_low),
        )

    def step(self, u, w, k, fsal_ku=None, fsal_kw=None) -> StepResult:
        have_fsal = fsal_ku is not None
        out = self._core.step(
            np.ascontiguousarray(u), np.ascontiguousarray(w), float(k),
            fsal_ku if have_fsal else np.empty(0),
            fsal_kw if have_fsal else np.empty(0),
            1 if have_fsal else 0,
        )
        (u5, w5, u4, w4, e_u, e_w, ku6, kw6, clamps, status) = out
        return StepResult(u5, w5, u4, w4, e_u, e_w, ku6, kw6, clamps, status)


def psor_solve(sub, diag, sup, rhs, floor, start, omega, tol, max_iter,
               backend: str = None):
    """Projected SOR for the tridiagonal complementarity system
    min(A v - rhs, v - floor) = 0; returns (v, iterations).

    The compiled sweep is plain lexicographic Gauss-Seidel; the numpy
    fallback uses the red-black ordering so each half-sweep vectorizes.  Both
    converge to the same fixed point of the projection.
    """
    choice = (backend or BACKEND).lower()
    if choice == "compiled" and _ext is not None:
        v = np.ascontiguousarray(start, dtype=float).copy()
        iters = _ext.psor_sweep(
            np.ascontiguousarray(sub), np.ascontiguousarray(diag),
            np.ascontiguousarray(sup), np.ascontiguousarray(rhs),
            np.ascontiguousarray(floor), v, float(omega), float(tol),
            int(max_iter))
        return v, iters
    from .reference import psor_redblack
    return psor_redblack(sub, diag, sup, rhs, floor, start, omega, tol, max_iter)
