"""American put pricing under CEV local volatility.

The solver integrates the front-fixed coupled system for the scaled option
value, its delta, and the optimal exercise boundary with fourth-order compact
finite differences in space and an adaptive 5(4) embedded Runge-Kutta pair in
time, on uniform or locally refined grids.
"""

from .errors import (AlignmentError, BoundaryEscapeError, CevPutError,
                     ConfigError, DegenerateOffsetsError, InvalidParameterError,
                     ModeMismatchError, SingularSystemError, SorConvergenceError,
                     StagnationError)
from .grid import Grid, GridSpec, build, gamma_nodes
from .integrator import (DORMAND_PRINCE_54, Discretization, RunResult,
                         StepController, StepReport, advance, advance_fixed,
                         dp54_step, next_step)
from .kernels import BACKEND
from .model import (CoefficientField, ModelParams, ScaledModel, SolverState,
                    coefficients, initial_state, scale)
from .oracle import LcpGrid, OraclePrice, cn_psor_price, moment_oracle, polynomial_exactness

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "BoundaryEscapeError", "CevPutError", "ConfigError",
    "DegenerateOffsetsError", "InvalidParameterError", "ModeMismatchError",
    "SingularSystemError", "SorConvergenceError", "StagnationError",
    "Grid", "GridSpec", "build", "gamma_nodes",
    "DORMAND_PRINCE_54", "Discretization", "RunResult", "StepController",
    "StepReport", "advance", "advance_fixed", "dp54_step", "next_step",
    "BACKEND",
    "CoefficientField", "ModelParams", "ScaledModel", "SolverState",
    "coefficients", "initial_state", "scale",
    "LcpGrid", "OraclePrice", "cn_psor_price", "moment_oracle",
    "polynomial_exactness",
    "__version__",
]
