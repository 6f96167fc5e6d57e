"""Batch front-end: config-driven pricing, convergence, and sensitivity runs.

Commands read a flat ``key = value`` config file and emit CSV.  Values and
deltas print with 9 decimals, error measures in scientific notation; rows are
ordered by input index so identical configs produce identical reports (the
wall-time column is the one nondeterministic field).

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from multiprocessing import Pool

import numpy as np

from .errors import CevPutError, ConfigError
from .grid import GridSpec
from .integrator import Discretization, StepController, advance, advance_fixed
from .interp import lagrange_value
from .model import ModelParams, scale

_SCHEMES = {
    "dcu": dict(mode="uniform", gamma=(1.0, 2.0, 3.0, 4.0), family="uniform"),
    "dcsl": dict(mode="refined", gamma=(0.5, 1.0, 1.5, 2.0), family="staggered"),
}

_KEYS = {
    "strike", "strikes", "maturity", "sigma", "rate", "alpha", "spot", "x_cut",
    "scheme", "h", "refine_ratio", "n_fine", "gamma",
    "epsilon", "safety", "k0", "policy",
    "h_list", "k_fixed", "epsilon_list", "rho_list", "out",
}


@dataclass(frozen=True)
class RunConfig:
    strikes: tuple
    maturity: float
    sigma: float
    rate: float
    alpha: float
    spot: float
    h: float
    x_cut: float = 3.0
    scheme: str = "dcsl"
    refine_ratio: float = 0.25
    n_fine: int = 8
    gamma: tuple = None
    epsilon: float = 1e-6
    safety: float = 0.9
    k0: float = 1e-6
    policy: str = "reject"
    h_list: tuple = ()
    k_fixed: float = 1e-5
    epsilon_list: tuple = ()
    rho_list: tuple = ()
    out: str = None

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"scheme must be dcu or dcsl, got {self.scheme!r}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", _SCHEMES[self.scheme]["gamma"])

    @property
    def grid_mode(self) -> str:
        return _SCHEMES[self.scheme]["mode"]

    @property
    def weight_family(self) -> str:
        return _SCHEMES[self.scheme]["family"]

    def grid_spec(self, h: float = None) -> GridSpec:
        return GridSpec(h=h if h is not None else self.h, x_cut=self.x_cut,
                        mode=self.grid_mode, refine_ratio=self.refine_ratio,
                        n_fine=self.n_fine, gamma=self.gamma)

    def params(self, strike: float) -> ModelParams:
        return ModelParams(strike=strike, maturity=self.maturity, sigma=self.sigma,
                           rate=self.rate, elasticity=self.alpha, spot=self.spot,
                           x_cut=self.x_cut)

    def controller(self, epsilon: float = None, safety: float = None) -> StepController:
        return StepController(
            tolerance=epsilon if epsilon is not None else self.epsilon,
            safety=safety if safety is not None else self.safety,
            k_init=self.k0, policy=self.policy)


def _parse_number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        try:
            return float(Fraction(text))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"not a number: {text!r}") from None


def _parse_list(text: str) -> tuple:
    return tuple(_parse_number(part) for part in text.split(",") if part.strip())


def parse_config(path: str) -> RunConfig:
    """Read a flat key = value file; unknown keys are hard errors."""
    raw = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip().lower(), value.strip()
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = (lineno, value)

    required = object()

    def take(key, default=required, kind=float):
        if key not in raw:
            if default is required:
                raise ConfigError(f"{path}: missing required key {key!r}")
            return default
        lineno, value = raw.pop(key)
        try:
            if kind is float:
                return _parse_number(value)
            if kind is int:
                return int(value)
            if kind is str:
                return value
            if kind is tuple:
                return _parse_list(value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None

    strikes = ()
    if "strikes" in raw:
        strikes = take("strikes", kind=tuple)
    if "strike" in raw:
        strikes = strikes + (take("strike"),)
    try:
        return RunConfig(
            strikes=strikes,
            maturity=take("maturity"),
            sigma=take("sigma"),
            rate=take("rate"),
            alpha=take("alpha"),
            spot=take("spot"),
            h=take("h"),
            x_cut=take("x_cut", 3.0),
            scheme=take("scheme", "dcsl", str).lower(),
            refine_ratio=take("refine_ratio", 0.25),
            n_fine=take("n_fine", 8, int),
            gamma=take("gamma", None, tuple),
            epsilon=take("epsilon", 1e-6),
            safety=take("safety", 0.9),
            k0=take("k0", 1e-6),
            policy=take("policy", "reject", str),
            h_list=take("h_list", (), tuple),
            k_fixed=take("k_fixed", 1e-5),
            epsilon_list=take("epsilon_list", (), tuple),
            rho_list=take("rho_list", (), tuple),
            out=take("out", None, str),
        )
    except CevPutError:
        raise
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class PriceRow:
    strike: float
    scaled_value: float
    value: float
    delta: float
    boundary: float            # S_f(T) in currency
    accepted: int
    rejected: int
    wall_s: float


def readout(state, system):
    """Value and delta at the spot: interpolate at x* = -ln s_f(T).

    The spot sits at x* because S = S0 e^x s_f; a five-point (quartic)
    Lagrange window keeps the readout at the scheme's interior order.  The
    unscaled delta is w(x*) / (e^{x*} s_f), which is exactly w(x*) at x*.
    When the boundary ends at or above the spot (s_f >= 1) the spot is in the
    exercise region: the value is the payoff and the delta is -1.
    """
    s_f = state.boundary
    E = system.model.scaled_strike
    if s_f >= 1.0:
        return E - 1.0, -1.0
    x_star = -np.log(s_f)
    x = system.grid.x
    u_full = np.concatenate((state.value, [0.0]))
    w_full = np.concatenate(([state.delta0], state.delta, [0.0]))
    u_at = lagrange_value(x, u_full, x_star, npts=5)
    w_at = lagrange_value(x, w_full, x_star, npts=5)
    return u_at, w_at / (np.exp(x_star) * s_f)


def price_one(cfg: RunConfig, strike: float, backend: str = None) -> PriceRow:
    params = cfg.params(strike)
    model = scale(params)
    system = Discretization(model, cfg.grid_spec(),
                            weight_family=cfg.weight_family, backend=backend)
    start = time.perf_counter()
    result = advance(system.initial_state(), system, cfg.controller(), model.maturity)
    wall = time.perf_counter() - start
    u_at, delta = readout(result.state, system)
    return PriceRow(
        strike=strike,
        scaled_value=u_at,
        value=params.spot * u_at,
        delta=delta,
        boundary=params.spot * result.state.boundary,
        accepted=result.accepted,
        rejected=result.rejected,
        wall_s=wall,
    )


def run_price(cfg: RunConfig, threads: int = 1, backend: str = None) -> list:
    if threads > 1 and len(cfg.strikes) > 1:
        with Pool(processes=threads) as pool:
            return pool.starmap(price_one, [(cfg, k, backend) for k in cfg.strikes])
    return [price_one(cfg, k, backend) for k in cfg.strikes]


@dataclass(frozen=True)
class ConvergeRow:
    h: float
    n_nodes: int
    max_error: float           # nan on the first ladder rung
    rate: float                # nan until two differences exist
    note: str = ""


def boundary_history(cfg: RunConfig, h: float, backend: str = None):
    """Fixed-step boundary curve for one ladder rung."""
    params = cfg.params(cfg.strikes[0])
    model = scale(params)
    system = Discretization(model, cfg.grid_spec(h),
                            weight_family=cfg.weight_family, backend=backend)
    result = advance_fixed(system.initial_state(), system, cfg.k_fixed, model.maturity)
    return result.boundary_tau, result.boundary, system.grid.n_nodes


def run_converge(cfg: RunConfig, h_list=None, backend: str = None) -> list:
    """Boundary self-convergence under grid halving at a fixed time step.

    Differences between successive rungs are measured in max norm over the
    second half of the horizon, tau in [T/2, T]: the payoff-time boundary
    layer (where the estimator sees the square-root startup) converges slower
    than the scheme and would mask the spatial order.
    """
    hs = tuple(h_list) if h_list else cfg.h_list
    if len(hs) < 2:
        raise ConfigError("converge needs at least two h values")
    if any(b > a for a, b in zip(hs, hs[1:])):
        raise ConfigError(f"h_list must be non-increasing, got {hs}")
    curves = []
    rows = []
    for h in hs:
        taus, bdry, n_nodes = boundary_history(cfg, h, backend=backend)
        keep = taus >= cfg.maturity / 2.0
        curves.append((taus[keep], bdry[keep]))
        rows.append([h, n_nodes, np.nan, np.nan, ""])
    diffs = []
    for i in range(1, len(hs)):
        ta, ba = curves[i - 1]
        tb, bb = curves[i]
        n = min(ba.size, bb.size)
        err = float(np.max(np.abs(ba[:n] - bb[:n])))
        diffs.append(err)
        rows[i][2] = err
        if err == 0.0:
            rows[i][4] = "zero-difference"
        if i >= 2 and diffs[i - 2] > 0 and err > 0:
            rows[i][3] = float(np.log2(diffs[i - 2] / err))
    return [ConvergeRow(*row) for row in rows]


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    setting: float
    value: float
    delta: float
    accepted: int
    rejected: int


def run_sweep(cfg: RunConfig, backend: str = None) -> list:
    """Price the first strike across an epsilon list or a safety-factor list."""
    if bool(cfg.epsilon_list) == bool(cfg.rho_list):
        raise ConfigError("sweep needs exactly one of epsilon_list / rho_list")
    name, values = (("epsilon", cfg.epsilon_list) if cfg.epsilon_list
                    else ("rho", cfg.rho_list))
    rows = []
    for setting in values:
        sub = replace(cfg,
                      epsilon=setting if name == "epsilon" else cfg.epsilon,
                      safety=setting if name == "rho" else cfg.safety)
        row = price_one(sub, cfg.strikes[0], backend=backend)
        rows.append(SweepRow(parameter=name, setting=setting, value=row.value,
                             delta=row.delta, accepted=row.accepted,
                             rejected=row.rejected))
    return rows


@dataclass(frozen=True)
class BoundaryReport:
    taus: np.ndarray
    boundary: np.ndarray       # in currency, S_f = s_f * S0
    steps: np.ndarray          # accepted k per row (0 for the tau = 0 row)
    increase_events: int       # soft monotonicity violations, counted not hidden


def run_boundary(cfg: RunConfig, backend: str = None) -> BoundaryReport:
    params = cfg.params(cfg.strikes[0])
    model = scale(params)
    system = Discretization(model, cfg.grid_spec(),
                            weight_family=cfg.weight_family, backend=backend)
    result = advance(system.initial_state(), system, cfg.controller(), model.maturity)
    ks = np.concatenate(([0.0], np.diff(result.boundary_tau)))
    rises = int(np.sum(np.diff(result.boundary) > 1e-12))
    return BoundaryReport(taus=result.boundary_tau,
                          boundary=params.spot * result.boundary,
                          steps=ks, increase_events=rises)


# ---------------------------------------------------------------- CSV output

def _write(rows, header, fmt, out):
    sink = open(out, "w", encoding="utf-8") if out else sys.stdout
    try:
        sink.write(",".join(header) + "\n")
        for row in rows:
            sink.write(",".join(f(row) for f in fmt) + "\n")
    finally:
        if out:
            sink.close()


def _fixed9(v: float) -> str:
    return f"{v:.9f}"


def write_price_csv(rows, out=None):
    _write(rows, ["strike", "scaled_value", "value", "delta", "boundary",
                  "accepted", "rejected", "wall_s"],
           [lambda r: _fixed9(r.strike), lambda r: _fixed9(r.scaled_value),
            lambda r: _fixed9(r.value), lambda r: _fixed9(r.delta),
            lambda r: _fixed9(r.boundary), lambda r: str(r.accepted),
            lambda r: str(r.rejected), lambda r: f"{r.wall_s:.3f}"], out)


def write_converge_csv(rows, out=None):
    def _err(r):
        return "" if np.isnan(r.max_error) else f"{r.max_error:.6e}"

    def _rate(r):
        return "" if np.isnan(r.rate) else f"{r.rate:.3f}"

    _write(rows, ["h", "n_nodes", "max_error", "rate", "note"],
           [lambda r: f"{r.h:g}", lambda r: str(r.n_nodes), _err, _rate,
            lambda r: r.note], out)


def write_sweep_csv(rows, out=None):
    _write(rows, ["parameter", "setting", "value", "delta", "accepted", "rejected"],
           [lambda r: r.parameter, lambda r: f"{r.setting:g}",
            lambda r: _fixed9(r.value), lambda r: _fixed9(r.delta),
            lambda r: str(r.accepted), lambda r: str(r.rejected)], out)


def write_boundary_csv(report: BoundaryReport, out=None):
    sink = open(out, "w", encoding="utf-8") if out else sys.stdout
    try:
        sink.write("tau,boundary,k\n")
        for tau, b, k in zip(report.taus, report.boundary, report.steps):
            sink.write(f"{tau:.12e},{b:.9f},{k:.12e}\n")
    finally:
        if out:
            sink.close()


# ------------------------------------------------------------------- driver

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cevput",
        description="American CEV put solver: pricing, convergence, and sweeps")
    parser.add_argument("command", choices=["price", "converge", "sweep", "boundary"])
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--out", default=None, help="output CSV path (default stdout)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--backend", default=None, choices=["compiled", "python"])
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        out = args.out if args.out is not None else cfg.out
        if args.command != "converge" and not cfg.strikes:
            if args.command == "price":
                write_price_csv([], out)
                return 0
            raise ConfigError(f"{args.command} needs at least one strike")
        if args.command == "price":
            write_price_csv(run_price(cfg, threads=args.threads,
                                      backend=args.backend), out)
        elif args.command == "converge":
            write_converge_csv(run_converge(cfg, backend=args.backend), out)
        elif args.command == "sweep":
            write_sweep_csv(run_sweep(cfg, backend=args.backend), out)
        elif args.command == "boundary":
            report = run_boundary(cfg, backend=args.backend)
            write_boundary_csv(report, out)
            if report.increase_events:
                print(f"note: boundary rose on {report.increase_events} accepted steps",
                      file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CevPutError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
