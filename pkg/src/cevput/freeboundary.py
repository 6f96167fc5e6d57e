"""Square-root boundary profile and fourth-order estimators of the boundary speed.

Near the exercise boundary the scaled value behaves like a degenerate
parabola; the transform Q = sqrt(u - E + e^x s_f) vanishes at x = 0 and is
smooth enough there that its first two boundary derivatives are known in
closed form.  Sampling Q at four one-sided stencil nodes and eliminating
Q'(0), Q''(0) yields a fourth-order estimate of g = s_f'/s_f, the quantity
feeding the convection and cross coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOffsetsError, InvalidParameterError
from .model import ScaledModel

#: hard cap on |g|; a put boundary never rises, so g is clamped to [-GMAX, 0]
GMAX = 1e6

#: closed-form Lemma weights disagreeing with the moment system beyond this
#: are replaced by the moment solution
_CHAIN_TOL = 1e-8


@dataclass(frozen=True)
class SqrtProfile:
    """Q sampled at selected nodes (radicand clamped at zero before the root)."""

    values: np.ndarray
    node_indexes: tuple


@dataclass(frozen=True)
class UniformWeights:
    """Equispaced four-point boundary extrapolation at offsets (1,2,3,4)*x_bar.

    The node weights are exact rationals; slope_weight and curvature_weight
    are the Q'(0) and Q''(0) coefficients of the extrapolation identity
    sum_i b_i Q(i*x_bar) = slope_weight*Q'(0) + curvature_weight*Q''(0).
    """

    x_bar: float

    @property
    def offsets(self) -> np.ndarray:
        return self.x_bar * np.array([1.0, 2.0, 3.0, 4.0])

    @property
    def node_weights(self) -> np.ndarray:
        return np.array([8.0, -3.0, 8.0 / 9.0, -1.0 / 8.0])

    @property
    def origin_weight(self) -> float:
        return -415.0 / 72.0

    @property
    def slope_weight(self) -> float:
        return 25.0 * self.x_bar / 6.0

    @property
    def curvature_weight(self) -> float:
        return self.x_bar * self.x_bar


@dataclass(frozen=True)
class StaggeredWeights:
    """General one-sided weights on offsets gamma_i * h with b4 = 1.

    chain holds the intermediate ratios (a3..a8) of the closed-form
    construction; they are retained for diagnostics only.
    """

    offsets: np.ndarray
    node_weights: np.ndarray          # b1..b4, with b4 == 1
    origin_weight: float              # b0 = -(b1+..+b4)
    slope_weight: float               # c0
    curvature_weight: float           # d0
    chain: tuple                      # (a3, .., a8)


def q_profile(value, boundary, node_indexes, model: ScaledModel, grid) -> SqrtProfile:
    """Sample Q = sqrt(max(u - E + e^x s_f, 0)) at the given node indexes."""
    if boundary <= 0.0:
        raise InvalidParameterError(f"boundary must be positive, got {boundary}")
    idx = tuple(node_indexes)
    x = grid.x[list(idx)]
    radicand = np.asarray(value)[list(idx)] - model.scaled_strike + np.exp(x) * boundary
    return SqrtProfile(values=np.sqrt(np.maximum(radicand, 0.0)), node_indexes=idx)


def q_prime_x0(model: ScaledModel, boundary: float) -> float:
    """Boundary slope of Q: sqrt(rE) / (sigma * s_f^(beta/2))."""
    return np.sqrt(model.rate * model.scaled_strike) / (
        model.sigma * boundary ** (model.beta / 2.0))


def q_second_x0(model: ScaledModel, boundary: float, log_slope: float) -> float:
    """Boundary curvature of Q, with the convection coefficient at x0 = nu + g."""
    root = np.sqrt(model.rate * model.scaled_strike)
    beta, sig = model.beta, model.sigma
    conv0 = model.rate - 0.5 * sig * sig * boundary ** beta + log_slope
    return (-beta * root / (3.0 * sig * boundary ** (beta / 2.0))
            - 2.0 * conv0 * root / (3.0 * sig ** 3 * boundary ** (1.5 * beta)))


def uniform_weights(x_bar: float = 1.0) -> UniformWeights:
    """Four-point equispaced weight row; the offsets scale with x_bar."""
    return UniformWeights(x_bar=float(x_bar))


def _moment_weights(offsets: np.ndarray):
    """Solve the zero-moment conditions m = 3,4,5 with the last weight pinned to 1."""
    rows = np.array([[offsets[i] ** m for i in range(3)] for m in (3, 4, 5)])
    rhs = np.array([-offsets[3] ** m for m in (3, 4, 5)])
    b123 = np.linalg.solve(rows, rhs)
    return np.append(b123, 1.0)


def staggered_weights(h: float, gamma) -> StaggeredWeights:
    """Weights for arbitrary increasing offsets gamma_i * h.

    Built from the closed-form ratio chain (with the b1/b3/c0/d0 signs fixed;
    the printed chain drops them), then checked against the moment conditions;
    the moment solution is authoritative on disagreement.
    """
    g = np.asarray(gamma, dtype=float)
    if len(g) != 4 or np.any(np.diff(g) <= 0.0):
        raise DegenerateOffsetsError(f"need 4 strictly increasing offsets, got {gamma}")
    h1, h2, h3, h4 = offs = g * h

    a3 = h2 ** 5 / h1 ** 5
    a4 = h3 ** 5 / h2 ** 5
    a5 = h4 ** 5 / h3 ** 5
    a6 = (a4 * h2 ** 4 - h3 ** 4) / (a3 * h1 ** 4 - h2 ** 4)
    a7 = (a5 * h3 ** 4 - h4 ** 4) / (a4 * h2 ** 4 - h3 ** 4)
    a8 = ((a7 * (a4 * h2 ** 3 - h3 ** 3) - (a5 * h3 ** 3 - h4 ** 3))
          / (a6 * (a3 * h1 ** 3 - h2 ** 3) - (a4 * h2 ** 3 - h3 ** 3)))
    b = np.array([
        -a8 * a6 * a3,
        a6 * a8 + a4 * a8 + a4 * a7,
        -(a5 + a7 + a8),
        1.0,
    ])
    c0 = -(a8 * (a6 * (a3 * h1 - h2) - (a4 * h2 - h3))
           - (a7 * (a4 * h2 - h3) - (a5 * h3 - h4)))
    d0 = -(0.5 * a8 * (a6 * (a3 * h1 ** 2 - h2 ** 2) - (a4 * h2 ** 2 - h3 ** 2))
           - 0.5 * (a7 * (a4 * h2 ** 2 - h3 ** 2) - (a5 * h3 ** 2 - h4 ** 2)))

    # gate: zero moments m=3..5, and c0/d0 as the m=1,2 moments
    scale = np.abs(b).max()
    resid = max(
        max(abs(float(np.dot(b, offs ** m))) / (scale * max(offs) ** m) for m in (3, 4, 5)),
        abs(float(np.dot(b, offs)) - c0) / (scale * max(offs)),
        abs(float(np.dot(b, offs ** 2)) / 2.0 - d0) / (scale * max(offs) ** 2),
    )
    if resid > _CHAIN_TOL:
        b = _moment_weights(offs)
        c0 = float(np.dot(b, offs))
        d0 = float(np.dot(b, offs ** 2) / 2.0)

    return StaggeredWeights(
        offsets=offs,
        node_weights=b,
        origin_weight=-float(b.sum()),
        slope_weight=float(c0),
        curvature_weight=float(d0),
        chain=(a3, a4, a5, a6, a7, a8),
    )


@dataclass(frozen=True)
class BoundaryDerivative:
    """Estimated boundary log-speed g = s_f'/s_f plus its four building blocks.

    terms = (denominator, curvature_term, slope_term, data_term) so that
    rate = (curvature_term - slope_term + data_term) / denominator before
    clamping to [-GMAX, 0].
    """

    rate: float
    terms: tuple
    clamped: bool


def boundary_derivative(profile: SqrtProfile, weights, model: ScaledModel,
                        boundary: float) -> BoundaryDerivative:
    """Invert the extrapolation identity for g given sampled Q values.

    Works for both weight families: only (node_weights, slope_weight,
    curvature_weight) enter, and g is invariant under common rescaling of the
    three.  With r = 0 every term carries the factor sqrt(rE) = 0 and the
    estimator degenerates; g = 0 is returned (the boundary does not move).
    """
    if boundary <= 0.0:
        raise InvalidParameterError(f"boundary must be positive, got {boundary}")
    root = np.sqrt(model.rate * model.scaled_strike)
    if root == 0.0:
        return BoundaryDerivative(rate=0.0, terms=(0.0, 0.0, 0.0, 0.0), clamped=False)
    sig, beta = model.sigma, model.beta
    sf_half = boundary ** (beta / 2.0)
    sf_three_half = boundary ** (1.5 * beta)
    c0 = weights.slope_weight
    d0 = weights.curvature_weight
    nu = model.rate - 0.5 * sig * sig * boundary ** beta
    denominator = -2.0 * d0 * root / (3.0 * sig ** 3 * sf_three_half)
    curvature_term = (beta * d0 * root / (3.0 * sig * sf_half)
                      + 2.0 * nu * d0 * root / (3.0 * sig ** 3 * sf_three_half))
    slope_term = c0 * root / (sig * sf_half)
    data_term = float(np.dot(weights.node_weights, profile.values))
    rate = (curvature_term - slope_term + data_term) / denominator
    clamped = False
    if rate > 0.0:
        rate, clamped = 0.0, True
    elif rate < -GMAX:
        rate, clamped = -GMAX, True
    return BoundaryDerivative(
        rate=float(rate),
        terms=(denominator, curvature_term, slope_term, data_term),
        clamped=clamped,
    )
