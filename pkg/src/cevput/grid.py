"""Spatial meshes on [0, x_cut]: uniform, or locally refined near x = 0.

The refined mesh keeps a locally uniform patch of n_fine intervals with fine
spacing h_a = refine_ratio * h at the left edge (so the one-sided boundary
stencils see constant spacing), then continues with coarse spacing h.  The
single transition interval between the two regions is handled by the
non-uniform interior scheme, not by grading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, InvalidParameterError

_ALIGN_TOL = 1e-10


def _default_gamma(mode: str) -> tuple:
    return (1.0, 2.0, 3.0, 4.0) if mode == "uniform" else (0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class GridSpec:
    """Mesh recipe: coarse spacing, domain cut, refinement, stencil offsets.

    gamma holds the four boundary-stencil offsets in multiples of h; each
    gamma_i * h must land exactly on a node (the staggered sampling never
    interpolates).
    """

    h: float
    x_cut: float = 3.0
    mode: str = "uniform"
    refine_ratio: float = 0.25        # h_a / h
    n_fine: int = 8                   # fine intervals at the left edge
    gamma: tuple = None

    def __post_init__(self):
        if self.mode not in ("uniform", "refined"):
            raise InvalidParameterError(f"unknown grid mode {self.mode!r}")
        if not (self.h > 0.0 and self.x_cut > 0.0):
            raise InvalidParameterError("h and x_cut must be positive")
        if not (0.0 < self.refine_ratio <= 1.0):
            raise InvalidParameterError(
                f"refine_ratio must lie in (0, 1], got {self.refine_ratio}")
        if self.mode == "refined" and self.n_fine < 8:
            raise InvalidParameterError(
                f"n_fine must be >= 8 so the boundary stencils stay inside the "
                f"locally uniform patch, got {self.n_fine}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", _default_gamma(self.mode))
        g = tuple(float(v) for v in self.gamma)
        object.__setattr__(self, "gamma", g)
        if len(g) != 4 or any(b <= a for a, b in zip(g, g[1:])) or g[0] <= 0:
            raise InvalidParameterError(f"gamma must be 4 increasing positive offsets, got {g}")

    @property
    def h_fine(self) -> float:
        return self.refine_ratio * self.h if self.mode == "refined" else self.h


@dataclass(frozen=True)
class Grid:
    """Built mesh: node coordinates, per-interval spacings, fine-prefix length."""

    x: np.ndarray                     # x_0 = 0 < x_1 < ... ; last node >= x_cut
    spacing: np.ndarray               # spacing[i] = x_{i+1} - x_i
    mode: str
    n_fine_prefix: int                # intervals of fine spacing at the left edge

    def __post_init__(self):
        self.x.setflags(write=False)
        self.spacing.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.x.size

    @property
    def h0(self) -> float:
        """Spacing seen by the boundary rows (h on uniform, h_a on refined grids)."""
        return float(self.spacing[0])


def build(spec: GridSpec) -> Grid:
    """Construct the node set for a spec; deterministic and bit-reproducible."""
    if spec.mode == "uniform":
        n = int(np.ceil(spec.x_cut / spec.h - _ALIGN_TOL))
        x = np.arange(n + 1, dtype=float) * spec.h
        n_fine = 0
    else:
        ha = spec.h_fine
        fine = np.arange(spec.n_fine + 1, dtype=float) * ha
        start = fine[-1]
        n = int(np.ceil((spec.x_cut - start) / spec.h - _ALIGN_TOL))
        coarse = start + np.arange(1, n + 1, dtype=float) * spec.h
        x = np.concatenate([fine, coarse])
        n_fine = spec.n_fine
    spacing = np.diff(x)
    grid = Grid(x=x, spacing=spacing, mode=spec.mode, n_fine_prefix=n_fine)
    gamma_nodes(grid, spec)  # fail fast on misaligned stencil offsets
    return grid


def gamma_nodes(grid: Grid, spec: GridSpec) -> tuple:
    """Indices of the four nodes at coordinates gamma_i * h."""
    idx = []
    for g in spec.gamma:
        target = g * spec.h
        j = int(np.argmin(np.abs(grid.x - target)))
        if abs(grid.x[j] - target) > _ALIGN_TOL:
            raise AlignmentError(
                f"stencil offset {g} * h = {target} does not coincide with a grid "
                f"node (nearest: {grid.x[j]})")
        idx.append(j)
    return tuple(idx)
