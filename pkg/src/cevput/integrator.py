"""Adaptive 5(4) embedded Runge-Kutta driver for the coupled value/delta system.

Every stage re-derives the exercise boundary from value matching
(s_f = E - u[0]), the pasted boundary delta (w0 = -s_f), the boundary speed
estimate, and the coefficient field, so the nonlinearity is refreshed seven
times per step.  The fifth-order solution propagates (local extrapolation,
first-same-as-last), the fourth-order one only feeds the error estimate
e = max(||du||_inf, ||dw||_inf) driving the step controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BoundaryEscapeError, InvalidParameterError, StagnationError
from .freeboundary import (boundary_derivative, q_profile, staggered_weights,
                           uniform_weights)
from .grid import GridSpec, build, gamma_nodes
from .model import CoefficientField, ScaledModel, SolverState, coefficients
from .spatial import OperatorPair, assemble_u, assemble_w

#: relative tolerance above E before a stage boundary counts as escaped
BOUNDARY_SLACK = 1e-8


@dataclass(frozen=True)
class Tableau:
    """Embedded explicit Runge-Kutta pair (shared stages, two weight rows)."""

    c: np.ndarray
    a: np.ndarray          # strictly lower-triangular stage coupling
    b_high: np.ndarray     # propagating (fifth-order) weights
    b_low: np.ndarray      # embedded (fourth-order) weights

    @property
    def stages(self) -> int:
        return len(self.c)


def _dp54() -> Tableau:
    a = np.zeros((7, 7))
    a[1, :1] = [1 / 5]
    a[2, :2] = [3 / 40, 9 / 40]
    a[3, :3] = [44 / 45, -56 / 15, 32 / 9]
    a[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
    a[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
    a[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
    return Tableau(
        c=np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0]),
        a=a,
        b_high=np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0]),
        b_low=np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                        -92097 / 339200, 187 / 2100, 1 / 40]),
    )


DORMAND_PRINCE_54 = _dp54()


def embedded_step(f, y, k, tableau: Tableau = DORMAND_PRINCE_54, fsal_deriv=None):
    """One generic embedded step: returns (y_high, y_low, last_stage_deriv).

    f maps a state vector to its time derivative; fsal_deriv, when given, is
    reused as the first stage (first-same-as-last across accepted steps).
    """
    s = tableau.stages
    derivs = [None] * s
    derivs[0] = f(y) if fsal_deriv is None else fsal_deriv
    for i in range(1, s):
        yi = y + k * sum(tableau.a[i, j] * derivs[j] for j in range(i) if tableau.a[i, j] != 0.0)
        derivs[i] = f(yi)
    y_high = y + k * sum(b * d for b, d in zip(tableau.b_high, derivs) if b != 0.0)
    y_low = y + k * sum(b * d for b, d in zip(tableau.b_low, derivs) if b != 0.0)
    return y_high, y_low, derivs[-1]


@dataclass
class StepController:
    """Accept/step-size policy for the embedded pair.

    policy 'reject' retries any step whose error exceeds the tolerance;
    'scale-only' commits every step and only rescales k (the weaker policy the
    step-update formula alone implies).  Growth per step is clamped to
    [growth_min, growth_max] and k to [k_min, min(k_max, horizon remainder)].
    """

    tolerance: float = 1e-6
    safety: float = 0.9
    growth_min: float = 0.2
    growth_max: float = 5.0
    k_init: float = 1e-6
    k_min: float = 1e-12
    k_max: float = None          # defaults to T/10 at run start
    policy: str = "reject"
    max_stalls: int = 50

    def __post_init__(self):
        if not (0.0 < self.safety <= 1.0):
            raise InvalidParameterError(f"safety must lie in (0, 1], got {self.safety}")
        if not (self.growth_min < 1.0 < self.growth_max):
            raise InvalidParameterError("growth clamps must straddle 1")
        if self.policy not in ("reject", "scale-only"):
            raise InvalidParameterError(f"unknown policy {self.policy!r}")


@dataclass(frozen=True)
class StepReport:
    accepted: bool
    err_value: float
    err_delta: float
    err: float
    k_used: float
    k_next: float
    stages: int = 7


def next_step(err: float, k_old: float, controller: StepController,
              remaining: float = math.inf) -> float:
    """Controller update: k * safety * (tol/err)^p, p = 1/4 below tolerance
    and 1/5 at or above it, with growth and absolute clamps applied."""
    if err == 0.0:
        factor = controller.growth_max
    else:
        p = 0.25 if err < controller.tolerance else 0.2
        factor = controller.safety * (controller.tolerance / err) ** p
        factor = min(controller.growth_max, max(controller.growth_min, factor))
    k_new = k_old * factor
    cap = controller.k_max if controller.k_max is not None else math.inf
    k_new = min(k_new, cap, remaining)
    return max(k_new, controller.k_min)


@dataclass(frozen=True)
class StageContext:
    """Per-stage refresh products: boundary level, pasted delta, speed, coefficients."""

    boundary: float
    delta0: float
    rate: float                     # g = s_f'/s_f estimate
    coeffs: CoefficientField
    clamped: bool


class Discretization:
    """Everything fixed across a run: grid, operators, stencil, stepper backend.

    weight_family 'staggered' uses the general offset weights; 'uniform'
    requires gamma to be consecutive multiples of gamma_1 and uses the
    equispaced extrapolation row (the two coincide up to a common factor when
    the offsets are equispaced).
    """

    def __init__(self, model: ScaledModel, spec: GridSpec,
                 weight_family: str = None, backend: str = None):
        self.model = model
        self.spec = spec
        self.grid = build(spec)
        self.ops = OperatorPair(
            u=assemble_u(self.grid, model, spec.mode),
            w=assemble_w(self.grid, model, spec.mode),
        )
        self.qnodes = gamma_nodes(self.grid, spec)
        if max(self.qnodes) >= self.grid.n_nodes - 1:
            raise InvalidParameterError(
                "boundary stencil offsets reach the truncation node; enlarge "
                "x_cut or shrink gamma * h")
        if weight_family is None:
            weight_family = "uniform" if spec.mode == "uniform" else "staggered"
        if weight_family == "uniform":
            g = np.asarray(spec.gamma)
            if not np.allclose(g, g[0] * np.arange(1, 5), rtol=0, atol=1e-12):
                raise InvalidParameterError(
                    f"uniform weights need offsets gamma_1*(1,2,3,4), got {spec.gamma}")
            self.weights = uniform_weights(x_bar=g[0] * spec.h)
        elif weight_family == "staggered":
            self.weights = staggered_weights(spec.h, spec.gamma)
        else:
            raise InvalidParameterError(f"unknown weight family {weight_family!r}")
        self.weight_family = weight_family
        # x-dependent factor of the coefficient power, cached for stage refreshes
        n_u = self.grid.n_nodes - 1
        self._ebx = np.exp(model.beta * self.grid.x[:n_u])
        self.stepper = kernels.make_stepper(self, DORMAND_PRINCE_54, backend=backend)

    @property
    def n_value(self) -> int:
        return self.grid.n_nodes - 1

    @property
    def n_delta(self) -> int:
        return self.grid.n_nodes - 2

    def stage_refresh(self, value_vec: np.ndarray) -> StageContext:
        """Value matching, smooth pasting, boundary speed, coefficient field."""
        E = self.model.scaled_strike
        boundary = E - float(value_vec[0])
        if not (0.0 < boundary <= E * (1.0 + BOUNDARY_SLACK)):
            raise BoundaryEscapeError(
                f"stage boundary {boundary} escaped (0, {E}]")
        boundary = min(boundary, E)
        profile = q_profile(value_vec, boundary, self.qnodes, self.model, self.grid)
        deriv = boundary_derivative(profile, self.weights, self.model, boundary)
        power = boundary ** self.model.beta * self._ebx
        sig2 = self.model.sigma ** 2
        diffusion = 0.5 * sig2 * power
        shift = self.model.elasticity * sig2 * power
        convection = self.model.rate + deriv.rate - diffusion
        coeffs = CoefficientField(
            diffusion=diffusion,
            convection=convection,
            cross=convection + shift,
            reaction=self.model.rate + shift,
            rate=self.model.rate,
        )
        return StageContext(boundary=boundary, delta0=-boundary, rate=deriv.rate,
                            coeffs=coeffs, clamped=deriv.clamped)

    def initial_state(self) -> SolverState:
        from .model import initial_state
        return initial_state(self.model, self.grid)


def dp54_step(state: SolverState, k: float, system: Discretization,
              controller: StepController):
    """One embedded step from `state`; returns (state5, state4, report).

    Raises BoundaryEscapeError if any stage drives the boundary out of range
    (advance treats that as a rejection at half the step).
    """
    out = system.stepper.step(state.value, state.delta, k, None, None)
    if out.status != 0:
        raise BoundaryEscapeError("stage boundary escaped during step")
    E = system.model.scaled_strike
    state5 = SolverState(state.tau + k, out.u_high, out.w_high,
                         min(E - float(out.u_high[0]), E))
    state4 = SolverState(state.tau + k, out.u_low, out.w_low,
                         min(E - float(out.u_low[0]), E))
    err = max(out.err_value, out.err_delta)
    accepted = err <= controller.tolerance or controller.policy == "scale-only"
    report = StepReport(accepted=accepted, err_value=out.err_value,
                        err_delta=out.err_delta, err=err, k_used=k,
                        k_next=next_step(err, k, controller))
    return state5, state4, report


@dataclass
class RunResult:
    """Final state plus the accepted-step boundary history and the step log."""

    state: SolverState
    boundary_tau: np.ndarray        # accepted times, tau=0 first
    boundary: np.ndarray            # s_f at those times (scaled)
    step_log: list                  # (tau_after, k, err_value, err_delta, accepted)
    accepted: int
    rejected: int
    clamp_events: int
    backend: str

    def write_step_log(self, fileobj):
        fileobj.write("tau,k,err_value,err_delta,accepted\n")
        for tau, k, eu, ew, acc in self.step_log:
            fileobj.write(f"{tau:.12e},{k:.12e},{eu:.6e},{ew:.6e},{int(acc)}\n")


def advance(state: SolverState, system: Discretization, controller: StepController,
            t_end: float) -> RunResult:
    """Integrate to t_end with acceptance, FSAL reuse, and exact final landing."""
    model = system.model
    E = model.scaled_strike
    tau = state.tau
    if t_end < tau:
        raise InvalidParameterError(f"t_end {t_end} precedes state time {tau}")
    u = state.value.copy()
    w = state.delta.copy()
    horizon = t_end - tau
    k_cap = controller.k_max if controller.k_max is not None else horizon / 10.0
    k = min(controller.k_init, horizon) if horizon > 0 else 0.0
    fsal_u = fsal_w = None
    taus = [tau]
    bdry = [E - float(u[0])] if u.size else [E]
    log = []
    accepted = rejected = clamps = 0
    stalls = 0
    while tau < t_end - 1e-14 * max(1.0, t_end):
        k = min(k, t_end - tau, k_cap)
        out = system.stepper.step(u, w, k, fsal_u, fsal_w)
        clamps += out.clamp_events
        if out.status != 0:
            rejected += 1
            log.append((tau, k, np.nan, np.nan, False))
            k = max(k / 2.0, controller.k_min)
            if k <= controller.k_min * (1.0 + 1e-12):
                stalls += 1
                if stalls > controller.max_stalls:
                    raise StagnationError(
                        f"step size pinned at k_min={controller.k_min} after "
                        f"{stalls} consecutive attempts at tau={tau}")
            continue
        err = max(out.err_value, out.err_delta)
        if err <= controller.tolerance or controller.policy == "scale-only":
            u, w = out.u_high, out.w_high
            tau += k
            fsal_u, fsal_w = out.ku_last, out.kw_last
            accepted += 1
            stalls = 0
            taus.append(tau)
            bdry.append(min(E - float(u[0]), E))
            log.append((tau, k, out.err_value, out.err_delta, True))
            k = next_step(err, k, controller, remaining=t_end - tau)
        else:
            rejected += 1
            log.append((tau, k, out.err_value, out.err_delta, False))
            k_new = next_step(err, k, controller, remaining=t_end - tau)
            if k_new <= controller.k_min * (1.0 + 1e-12) and k <= controller.k_min * (1.0 + 1e-12):
                stalls += 1
                if stalls > controller.max_stalls:
                    raise StagnationError(
                        f"step size pinned at k_min={controller.k_min} after "
                        f"{stalls} consecutive rejections at tau={tau}")
            k = k_new
    final = SolverState(tau, u, w, min(E - float(u[0]), E) if u.size else E)
    return RunResult(
        state=final,
        boundary_tau=np.array(taus),
        boundary=np.array(bdry),
        step_log=log,
        accepted=accepted,
        rejected=rejected,
        clamp_events=clamps,
        backend=kernels.BACKEND,
    )


def advance_fixed(state: SolverState, system: Discretization, k: float,
                  t_end: float) -> RunResult:
    """Fixed-step variant (propagating weights only) for convergence studies."""
    E = system.model.scaled_strike
    tau = state.tau
    u = state.value.copy()
    w = state.delta.copy()
    fsal_u = fsal_w = None
    taus = [tau]
    bdry = [E - float(u[0])]
    accepted = 0
    clamps = 0
    while tau < t_end - 1e-14 * max(1.0, t_end):
        kk = min(k, t_end - tau)
        out = system.stepper.step(u, w, kk, fsal_u, fsal_w)
        clamps += out.clamp_events
        if out.status != 0:
            raise BoundaryEscapeError(f"boundary escaped at tau={tau} with fixed k={kk}")
        u, w = out.u_high, out.w_high
        fsal_u, fsal_w = out.ku_last, out.kw_last
        tau += kk
        accepted += 1
        taus.append(tau)
        bdry.append(min(E - float(u[0]), E))
    final = SolverState(tau, u, w, min(E - float(u[0]), E))
    return RunResult(state=final, boundary_tau=np.array(taus), boundary=np.array(bdry),
                     step_log=[], accepted=accepted, rejected=0,
                     clamp_events=clamps, backend=kernels.BACKEND)
