"""Explicit time stepping for u_t = L u + f with the lattice operator.

The Cauchy problem is truncated to the cube of lattice indices [-n, n]^d;
lattice points outside the cube keep the constant far-field value and the
kernel mass they carry is lumped into one exterior weight per box point.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import CflViolation, ConfigurationError, NumericalFailure, ParameterDomainError
from .fields import ScalarField
from .kernel import OperatorParams, jp, s_nu
from .lattice import (ExtensionKind, GridSpec, WeightKind, WeightTable, build_weights,
                      summability_ratios)

ROUNDING_SLACK = 1e-12


@dataclass(frozen=True)
class EvolutionProblem:
    """Data u0, f (bounded, Hölder with a common exponent a), p > 2, final time T."""

    u0: ScalarField
    f: ScalarField
    params: OperatorParams
    T: float

    def __post_init__(self):
        if not self.params.p > 2:
            raise ParameterDomainError("the explicit scheme is analysed for p > 2 only")
        if not self.T > 0:
            raise ParameterDomainError("T must be positive")
        if self.u0.holder is None or self.u0.sup_bound is None:
            raise ConfigurationError("u0 needs Hölder data and a sup bound")
        if self.f.sup_bound is None:
            raise ConfigurationError("f needs a sup bound")
        if self.f.holder is None and self.f.sup_bound != 0:
            raise ConfigurationError("f needs Hölder data unless it vanishes")
        # a constant source is Hölder continuous with every exponent
        constant_f = self.f.meta.get("constant", False)
        if self.f.holder is not None and self.f.holder.a != self.u0.holder.a and not constant_f:
            raise ConfigurationError("u0 and f must share the Hölder exponent a")
        if self.u0.d != self.params.d or self.f.d != self.params.d:
            raise ConfigurationError("data and params disagree on the dimension")

    @property
    def a(self) -> float:
        return self.u0.holder.a

    @property
    def L_u0(self) -> float:
        """max(Hölder constant, sup norm) of u0."""
        return max(self.u0.holder.L, self.u0.sup_bound)

    @property
    def L_f(self) -> float:
        l_f = 0.0 if self.f.holder is None else self.f.holder.L
        return max(l_f, self.f.sup_bound)


class CflModeKind(str, Enum):
    PAPER = "PaperFormula"
    USER = "UserValue"


@dataclass(frozen=True)
class CflMode:
    """PaperFormula: K_{s,p,d} from the calibrated constants, with the
    lemma constant K (default 1) replaceable by ``value``.
    UserValue: ``value`` is K_{s,p,d} itself."""

    kind: CflModeKind = CflModeKind.PAPER
    value: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CflModeKind(self.kind))
        if self.kind is CflModeKind.USER and not (self.value is not None and self.value > 0):
            raise ConfigurationError("UserValue CFL mode needs a positive constant")
        if self.value is not None and not self.value > 0:
            raise ConfigurationError("CFL constants must be positive")


@dataclass(frozen=True)
class SchemeConfig:
    grid: GridSpec
    r: float
    kind: WeightKind = WeightKind.W1
    tau: Optional[float] = None            # None: largest step allowed by the CFL rule
    cfl_mode: CflMode = CflMode()
    box_radius: float = 4.0
    store_every: Optional[int] = None      # None: ceil(N / 200)
    allow_unstable: bool = False
    monitor_holder: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", WeightKind(self.kind))
        if self.grid.extension.kind is ExtensionKind.CALLER:
            raise ConfigurationError("evolution needs a constant or zero far field")
        if not self.box_radius > 0:
            raise ConfigurationError("box_radius must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        diameter = 2 * self.box_radius * math.sqrt(self.grid.d)
        if self.grid.rho_max < diameter * (1 - 1e-12):
            raise ConfigurationError(
                f"rho_max={self.grid.rho_max:g} must cover the box diameter {diameter:g}")


# ---------------------------------------------------------------- CFL

CALIBRATION_RADII = (0.2, 0.1, 0.05, 0.025)


@lru_cache(maxsize=64)
def calibrate_summability(d: int, p: float, s: float, kind: str, a: float,
                          radii=CALIBRATION_RADII) -> float:
    """Largest summability ratio over an r-sweep: an empirical C_{s,p,d}.

    Ratios are total * r^{sp}, the far mass, and the |y|^nu moments over
    S_nu(r) for nu = a(p-2) and a(p-1), the two moments the stability and
    time-modulus bounds use.
    """
    params = OperatorParams(d, p, s)
    nus = (a * (p - 2), a * (p - 1))
    worst = 0.0
    for r in radii:
        h = r / 4 if WeightKind(kind) is WeightKind.W1 else r / (4 * math.sqrt(d))
        rho_max = 4.0 if d == 1 else 2.0
        table = build_weights(GridSpec(h, d, rho_max), r, params, kind)
        rat = summability_ratios(table, nus)
        worst = max(worst, rat["total_scaled"], rat["far"], *rat["moment_scaled"].values())
    return worst


def cfl_exponent(params: OperatorParams, a: float) -> tuple:
    """Branch name and r-power of the CFL rule."""
    s, p = params.s, params.p
    if a < s * p / (p - 1):
        return "power", 2 * s + (s - a) * (p - 2)
    return "log", a


def cfl_constants(params: OperatorParams, a: float, L_u0: float, L_f: float, T: float,
                  mode: CflMode = CflMode(), kind: WeightKind = WeightKind.W1,
                  C: Optional[float] = None) -> dict:
    """K_{s,p,d} and the constants it is assembled from."""
    if mode.kind is CflModeKind.USER:
        return {"K": mode.value, "C": None, "K_tilde2": None, "K_lemma": None,
                "mode": mode.kind.value}
    if C is None:
        C = calibrate_summability(params.d, params.p, params.s, WeightKind(kind).value, a)
    K_lemma = 1.0 if mode.value is None else mode.value
    K2 = K_lemma * L_u0 ** (params.p - 1) * C
    p = params.p
    K = 1.0 / ((p - 1) * 2 ** p * C * (L_u0 + T * L_f + 3 * K2 + 1) ** (p - 2))
    return {"K": K, "C": C, "K_tilde2": K2, "K_lemma": K_lemma, "mode": mode.kind.value}


def cfl_tau(r: float, params: OperatorParams, a: float, L_u0: float, L_f: float, T: float,
            mode: CflMode = CflMode(), kind: WeightKind = WeightKind.W1,
            C: Optional[float] = None) -> float:
    """Largest time step allowed by the CFL rule."""
    if not 0 < r < 1:
        raise ParameterDomainError(f"r must lie in (0, 1), got {r}")
    if not 0 < a <= 1:
        raise ParameterDomainError("Hölder exponent must lie in (0, 1]")
    K = cfl_constants(params, a, L_u0, L_f, T, mode, kind, C)["K"]
    branch, e = cfl_exponent(params, a)
    if branch == "power":
        return K * r ** e
    return K * r ** a / abs(math.log(r))


# ---------------------------------------------------------------- operator on a box

@dataclass(frozen=True, eq=False)
class BoxOperator:
    """Dense pair weights between box points plus lumped exterior mass."""

    n: int
    h: float
    d: int
    p: float
    coords: np.ndarray        # (m, d)
    pair: np.ndarray          # (m, m), zero diagonal
    exterior_mass: np.ndarray  # (m,)
    far_value: float

    @classmethod
    def build(cls, table: WeightTable, box_radius: float, far_value: float) -> "BoxOperator":
        d, h = table.d, table.h
        n = int(round(box_radius / h))
        axes = [np.arange(-n, n + 1)] * d
        idx = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
        offs, w = table.all_offsets()
        side = 4 * n + 1
        grid = np.zeros((side,) * d)
        sel = np.all(np.abs(offs) <= 2 * n, axis=1)
        grid[tuple((offs[sel] + 2 * n).T)] = w[sel]
        diff = idx[None, :, :] - idx[:, None, :] + 2 * n
        pair = grid[tuple(np.moveaxis(diff, -1, 0))]
        total = float(np.sum(w)) + table.tail_mass
        ext = total - pair.sum(axis=1)
        return cls(n, h, d, table.p, idx * h, pair, np.maximum(ext, 0.0), float(far_value))

    @property
    def shape(self):
        return (2 * self.n + 1,) * self.d

    def apply(self, U: np.ndarray) -> np.ndarray:
        """L_h U at every box point (U flattened)."""
        D = U[None, :] - U[:, None]
        return (jp(D, self.p) * self.pair).sum(axis=1) + \
            self.exterior_mass * jp(self.far_value - U, self.p)

    def bracket(self, U: np.ndarray) -> np.ndarray:
        """sum_beta |U_{alpha+beta} - U_alpha|^{p-2} w_beta per point (stability factor)."""
        D = np.abs(U[None, :] - U[:, None]) ** (self.p - 2)
        return (D * self.pair).sum(axis=1) + \
            self.exterior_mass * np.abs(self.far_value - U) ** (self.p - 2)


def step(U: np.ndarray, op: BoxOperator, f: np.ndarray, tau: float, index: int = 0) -> np.ndarray:
    """One explicit step U + tau (L_h U + f); raises on non-finite values."""
    out = U + tau * (op.apply(U) + f)
    bad = ~np.isfinite(out)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NumericalFailure(f"non-finite value at box point {k} in step {index}", k, index)
    return out


# ---------------------------------------------------------------- runs

@dataclass
class EvolutionState:
    problem: EvolutionProblem
    config: SchemeConfig
    op: BoxOperator
    f_values: np.ndarray
    tau: float
    N: int
    snapshot_steps: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    cfl: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.snapshot_steps, dtype=float) * self.tau

    @property
    def coords(self) -> np.ndarray:
        return self.op.coords

    def snapshot_at_step(self, j: int) -> np.ndarray:
        """U^j, re-stepped from the closest stored earlier snapshot if thinned out."""
        if not 0 <= j <= self.N:
            raise ParameterDomainError(f"step {j} outside 0..{self.N}")
        pos = int(np.searchsorted(self.snapshot_steps, j, side="right")) - 1
        U = self.snapshots[pos]
        for k in range(self.snapshot_steps[pos], j):
            U = step(U, self.op, self.f_values, self.tau, k + 1)
        return U

    def point_index(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.rint(x / self.op.h).astype(int)
        if np.any(np.abs(k * self.op.h - x) > 1e-9) or np.any(np.abs(k) > self.op.n):
            raise ParameterDomainError(f"{x.tolist()} is not a lattice point of the box")
        return int(np.ravel_multi_index(tuple(k + self.op.n), self.op.shape))


def _resolve_tau(problem: EvolutionProblem, config: SchemeConfig):
    if not 0 < config.r < 1:
        raise ConfigurationError("r must lie in (0, 1)")
    consts = cfl_constants(problem.params, problem.a, problem.L_u0, problem.L_f, problem.T,
                           config.cfl_mode, config.kind)
    branch, e = cfl_exponent(problem.params, problem.a)
    tau_max = cfl_tau(config.r, problem.params, problem.a, problem.L_u0, problem.L_f,
                      problem.T, config.cfl_mode, config.kind, consts["C"])
    requested = tau_max if config.tau is None else config.tau
    N = max(1, math.ceil(problem.T / requested - 1e-9))
    tau = problem.T / N
    satisfied = tau <= tau_max * (1 + 1e-12)
    if not satisfied and not config.allow_unstable:
        raise CflViolation(
            f"tau={tau:.3e} violates the CFL bound {tau_max:.3e}; set allow_unstable (--allow-unstable) to run anyway")
    info = dict(consts, branch=branch, exponent=e, tau_max=tau_max, tau=tau, N=N,
                cfl_satisfied=satisfied, overridden=not satisfied)
    return tau, N, info


def prepare(problem: EvolutionProblem, config: SchemeConfig, table: Optional[WeightTable] = None):
    """Weight table, box operator and sampled data for a run."""
    if table is None:
        table = build_weights(config.grid, config.r, problem.params, config.kind)
    op = BoxOperator.build(table, config.box_radius, config.grid.extension.value)
    U0 = np.asarray(problem.u0(op.coords), dtype=float).reshape(-1)
    F = np.asarray(problem.f(op.coords), dtype=float).reshape(-1)
    return op, U0, F


class _Monitor:
    """Per-step checks of the sup bound, the maximum principle and Hölder propagation."""

    def __init__(self, problem, op, U0, F, holder: bool, enforce: bool):
        self.enforce = enforce
        self.u0_sup = max(float(np.max(np.abs(U0))), abs(op.far_value))
        self.f_sup = float(np.max(np.abs(F))) if F.size else 0.0
        self.f_zero = self.f_sup == 0.0
        self.prev_max = float(np.max(U0))
        self.sup_margin = math.inf
        self.max_principle_margin = math.inf
        self.holder_margin = math.inf
        self.holder = holder
        if holder:
            dist = np.linalg.norm(op.coords[:, None, :] - op.coords[None, :, :], axis=-1)
            a = problem.a
            self.mod_u0 = problem.L_u0 * dist ** a
            np.fill_diagonal(self.mod_u0, np.inf)   # a point paired with itself is trivial
            self.mod_f = problem.L_f * dist ** a
        self.check(U0, 0, 0.0)

    def check(self, U, j, t):
        scale = max(1.0, self.u0_sup)
        m = self.u0_sup + t * self.f_sup - float(np.max(np.abs(U)))
        self.sup_margin = min(self.sup_margin, m)
        if self.enforce and m < -ROUNDING_SLACK * scale:
            raise NumericalFailure(f"sup bound violated by {-m:.3e} at step {j}", None, j)
        if self.f_zero and j > 0:
            top = float(np.max(U))
            self.max_principle_margin = min(self.max_principle_margin, self.prev_max - top)
            self.prev_max = top
        if self.holder:
            gap = self.mod_u0 + t * self.mod_f - np.abs(U[:, None] - U[None, :])
            hm = float(gap.min())
            self.holder_margin = min(self.holder_margin, hm)
            if self.enforce and hm < -ROUNDING_SLACK * scale:
                raise NumericalFailure(f"Hölder bound violated by {-hm:.3e} at step {j}", None, j)

    def summary(self):
        return {"sup_margin": self.sup_margin,
                "max_principle_margin": self.max_principle_margin if self.f_zero else None,
                "holder_margin": self.holder_margin if self.holder else None}


def run(problem: EvolutionProblem, config: SchemeConfig,
        table: Optional[WeightTable] = None) -> EvolutionState:
    """Run the scheme to time T, storing every ``store_every``-th snapshot.

    With the CFL rule satisfied the sup bound and Hölder bound are enforced
    at every step; with an overridden CFL rule they are only recorded.
    """
    tau, N, info = _resolve_tau(problem, config)
    op, U, F = prepare(problem, config, table)
    every = config.store_every or max(1, math.ceil(N / 200))
    mon = _Monitor(problem, op, U, F, config.monitor_holder, enforce=info["cfl_satisfied"])
    state = EvolutionState(problem, config, op, F, tau, N, cfl=info)
    state.snapshot_steps.append(0)
    state.snapshots.append(U.copy())
    blew_up = None
    for j in range(1, N + 1):
        try:
            U = step(U, op, F, tau, j)
        except NumericalFailure as exc:
            if info["cfl_satisfied"]:
                raise
            blew_up = exc.step
            break
        mon.check(U, j, j * tau)
        if j % every == 0 or j == N:
            state.snapshot_steps.append(j)
            state.snapshots.append(U.copy())
    state.diagnostics = dict(mon.summary(), blow_up_step=blew_up, store_every=every)
    return state


def interpolate(state: EvolutionState, x, t: float) -> float:
    """Piecewise linear in time: U^j + (t - t_j)(L_h U^j + f) on [t_j, t_{j+1}]."""
    T = state.problem.T
    if not -1e-15 * T <= t <= T * (1 + 1e-15):
        raise ParameterDomainError(f"t={t} outside [0, {T}]")
    i = state.point_index(x)
    j = min(int(math.floor(t / state.tau + 1e-12)), state.N)
    U = state.snapshot_at_step(j)
    if j == state.N:
        return float(U[i])
    dt = t - j * state.tau
    LU = state.op.apply(U)
    return float(U[i] + dt * (LU[i] + state.f_values[i]))


def interpolate_field(state: EvolutionState, t: float) -> np.ndarray:
    """The interpolant at time t on every box point."""
    j = min(int(math.floor(t / state.tau + 1e-12)), state.N)
    U = state.snapshot_at_step(j)
    if j == state.N:
        return U.copy()
    return U + (t - j * state.tau) * (state.op.apply(U) + state.f_values)


def time_modulus_check(state: EvolutionState) -> dict:
    """Compare ||U^{j+k} - U^j|| over stored snapshots with K2 t_k S_{a(p-1)}(r) + ||f|| t_k."""
    prob = state.problem
    K2 = state.cfl.get("K_tilde2")
    if K2 is None:
        C = calibrate_summability(prob.params.d, prob.params.p, prob.params.s,
                                  state.config.kind.value, prob.a)
        K2 = prob.L_u0 ** (prob.params.p - 1) * C
    snu = s_nu(prob.a * (prob.params.p - 1), state.config.r, prob.params.s, prob.params.p)
    fsup = float(prob.f.sup_bound)
    S = np.array(state.snapshots)
    steps = np.array(state.snapshot_steps)
    max_ratio = 0.0
    lags, observed = [], []
    for lag in range(1, len(steps)):
        diff = np.max(np.abs(S[lag:] - S[:-lag]), axis=1)
        tk = (steps[lag:] - steps[:-lag]) * state.tau
        bound = K2 * tk * snu + fsup * tk
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, diff / bound, np.where(diff > 0, np.inf, 0.0))
        max_ratio = max(max_ratio, float(np.max(ratio)))
        lags.append(float(np.mean(tk)))
        observed.append(float(np.max(diff)))
    return {"max_ratio": max_ratio, "K_tilde2": K2, "S": snu,
            "lag_times": lags, "max_modulus": observed}


def paired_run(problem: EvolutionProblem, other: EvolutionProblem, config: SchemeConfig) -> dict:
    """Run two data sets in lockstep with one time step and record sup|U^j - V^j|
    against the continuous-dependence bound ||u0 - v0|| + t_j ||f - g||."""
    tau_a, N_a, info_a = _resolve_tau(problem, config)
    tau_b, N_b, info_b = _resolve_tau(other, config)
    tau, N = (tau_a, N_a) if tau_a <= tau_b else (tau_b, N_b)
    table = build_weights(config.grid, config.r, problem.params, config.kind)
    op, U, F = prepare(problem, config, table)
    _, V, G = prepare(other, config, table)
    du0 = float(np.max(np.abs(U - V)))
    df = float(np.max(np.abs(F - G)))
    margin = math.inf
    worst = 0.0
    for j in range(1, N + 1):
        U = step(U, op, F, tau, j)
        V = step(V, op, G, tau, j)
        gap = float(np.max(np.abs(U - V)))
        worst = max(worst, gap)
        margin = min(margin, du0 + j * tau * df - gap)
    return {"tau": tau, "N": N, "delta_u0": du0, "delta_f": df, "max_gap": worst,
            "margin": margin, "cfl_satisfied": info_a["cfl_satisfied"] and info_b["cfl_satisfied"]}


# ---------------------------------------------------------------- output

def _atomic_write(path, writer, mode="w"):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, encoding="utf-8", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(v):
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def run_metadata(state: EvolutionState) -> dict:
    prob, cfg = state.problem, state.config
    return _jsonable({
        "params": asdict(prob.params),
        "T": prob.T,
        "u0": prob.u0.name,
        "f": prob.f.name,
        "a": prob.a,
        "L_u0": prob.L_u0,
        "L_f": prob.L_f,
        "grid": {"h": cfg.grid.h, "d": cfg.grid.d, "rho_max": cfg.grid.rho_max,
                 "extension": cfg.grid.extension.kind.value,
                 "far_value": cfg.grid.extension.value},
        "r": cfg.r,
        "kind": cfg.kind.value,
        "box_radius": cfg.box_radius,
        "tau": state.tau,
        "N": state.N,
        "cfl": state.cfl,
        "diagnostics": state.diagnostics,
        "stored_steps": len(state.snapshot_steps),
    })


def write_metadata(state: EvolutionState, path) -> None:
    meta = run_metadata(state)
    _atomic_write(path, lambda fh: json.dump(meta, fh, indent=2, sort_keys=True))


def write_snapshots_csv(state: EvolutionState, path) -> None:
    """One row per box point: flat index, coordinates, then U at each stored time."""
    d = state.op.d
    times = state.times

    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [f"x{i}" for i in range(d)] + [f"t={t:.16e}" for t in times])
        S = np.array(state.snapshots)
        for i, x in enumerate(state.op.coords):
            w.writerow([i] + [f"{c:.16e}" for c in x] + [f"{v:.16e}" for v in S[:, i]])

    _atomic_write(path, writer)
