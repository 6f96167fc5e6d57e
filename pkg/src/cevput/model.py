"""Market contract, spot scaling, and the time/space-dependent PDE coefficients.

The solver works in spot-scaled units: values are divided by the spot S0 and
the strike becomes E = K/S0.  The front-fixing change of variables
x = ln(S / S_f(tau)) maps the moving exercise boundary to x = 0, at the cost
of coefficients that depend on the boundary level s_f = S_f/S0 and on its
logarithmic speed g = s_f'/s_f.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class ModelParams:
    """Market contract for one American put under CEV local volatility.

    sigma is quoted in spot-scaled units: the diffusion coefficient is
    sigma^2 (e^x s_f)^(2 alpha) / 2 with s_f = S_f/S0, so the at-the-money
    lognormal volatility equals sigma regardless of alpha.
    """

    strike: float            # K, currency
    maturity: float          # T, years
    sigma: float             # scaled volatility, dimensionless
    rate: float              # r, 1/years
    elasticity: float        # alpha, dimensionless rational in [-1, 1]
    spot: float              # S0, currency
    x_cut: float = 3.0       # far-field truncation in log-moneyness

    def __post_init__(self):
        for name in ("strike", "maturity", "sigma", "spot", "x_cut"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.rate < 0.0:
            raise InvalidParameterError(f"rate must be non-negative, got {self.rate}")
        if not abs(self.elasticity) <= 1.0:
            raise InvalidParameterError(
                f"elasticity must lie in [-1, 1], got {self.elasticity}")

    def with_strike(self, strike: float) -> "ModelParams":
        return replace(self, strike=strike)


@dataclass(frozen=True)
class ScaledModel:
    """ModelParams plus the derived scaled strike E = K/S0 and beta = 2 alpha."""

    strike: float
    maturity: float
    sigma: float
    rate: float
    elasticity: float
    spot: float
    x_cut: float
    scaled_strike: float     # E
    beta: float              # 2 * alpha, exact


@dataclass(frozen=True)
class CoefficientField:
    """The four node-wise PDE coefficients at one stage time (units 1/years).

    diffusion multiplies u_xx and w_xx; convection multiplies w in the value
    equation; cross multiplies u_xx in the delta equation; reaction multiplies
    -w in the delta equation.  convection and cross are the only two carrying
    the boundary speed g.
    """

    diffusion: np.ndarray    # sigma^2 (e^x s_f)^(2a) / 2
    convection: np.ndarray   # r + g - diffusion
    cross: np.ndarray        # convection + a sigma^2 (e^x s_f)^(2a)
    reaction: np.ndarray     # r + a sigma^2 (e^x s_f)^(2a)
    rate: float              # r, kept alongside for the -r u term


@dataclass
class SolverState:
    """Current integration state: scaled values, scaled deltas, boundary.

    value has one entry per non-Dirichlet node x_0..x_{M-1}; delta covers
    x_1..x_{M-1} (its x_0 entry is the smooth-pasting value -boundary, exposed
    as delta0).  Far-field entries at x_M are hard zeros, not stored.
    """

    tau: float
    value: np.ndarray
    delta: np.ndarray
    boundary: float

    @property
    def delta0(self) -> float:
        return -self.boundary

    def copy(self) -> "SolverState":
        return SolverState(self.tau, self.value.copy(), self.delta.copy(), self.boundary)


def scale(params: ModelParams) -> ScaledModel:
    """Spot-scale the contract: E = K/S0, beta = 2*alpha, other fields copied."""
    return ScaledModel(
        strike=params.strike,
        maturity=params.maturity,
        sigma=params.sigma,
        rate=params.rate,
        elasticity=params.elasticity,
        spot=params.spot,
        x_cut=params.x_cut,
        scaled_strike=params.strike / params.spot,
        beta=2.0 * params.elasticity,
    )


def coefficients(model: ScaledModel, x: np.ndarray, boundary: float,
                 log_slope: float) -> CoefficientField:
    """Evaluate the four coefficient vectors at boundary level s_f and speed g.

    Uses (e^x s_f)^(2a) = e^(beta x) * s_f^beta so the x-dependent factor can
    be cached by callers that evaluate many stages on a fixed grid.
    """
    if boundary <= 0.0:
        raise InvalidParameterError(f"boundary level must be positive, got {boundary}")
    power = np.exp(model.beta * np.asarray(x)) * boundary ** model.beta
    sig2 = model.sigma * model.sigma
    diffusion = 0.5 * sig2 * power
    convection = model.rate + log_slope - diffusion
    shift = model.elasticity * sig2 * power
    return CoefficientField(
        diffusion=diffusion,
        convection=convection,
        cross=convection + shift,
        reaction=model.rate + shift,
        rate=model.rate,
    )


def initial_state(model: ScaledModel, grid) -> SolverState:
    """Payoff-time state: u = 0, w = 0, boundary at the scaled strike.

    Value matching at tau = 0 gives u(0, x0) = E - s_f(0) = 0 and smooth
    pasting gives w(0, x0) = -E; both are consistent with the zero vectors
    because the x0 delta entry is derived, not stored.
    """
    n_unknown = grid.x.size - 1
    return SolverState(
        tau=0.0,
        value=np.zeros(n_unknown),
        delta=np.zeros(n_unknown - 1),
        boundary=model.scaled_strike,
    )
