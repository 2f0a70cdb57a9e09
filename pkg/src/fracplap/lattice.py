"""Lattice geometry hZ^d, discretisation weights and summability diagnostics.

A :class:`WeightTable` stores one constant weight for every lattice offset
inside B_r, an explicit weight for every offset with r <= |y_alpha| <= rho_max,
and the closed-form kernel mass beyond the truncation radius.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, ParameterDomainError
from .kernel import OperatorParams, s_nu, sphere_area
from .quad import SUPPORTED_DIMS

FORMAT_VERSION = 1


class ExtensionKind(str, Enum):
    ZERO = "ZeroFarField"
    CONSTANT = "ConstantFarField"
    CALLER = "CallerField"


@dataclass(frozen=True)
class Extension:
    """How a field is continued beyond the resolved region.

    ZERO and CONSTANT use ``value`` (0 for ZERO); CALLER evaluates the
    field's own callable.
    """

    kind: ExtensionKind = ExtensionKind.ZERO
    value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ExtensionKind(self.kind))
        if self.kind is ExtensionKind.ZERO:
            object.__setattr__(self, "value", 0.0)

    @classmethod
    def constant(cls, value: float) -> "Extension":
        return cls(ExtensionKind.CONSTANT, float(value))

    @classmethod
    def caller(cls) -> "Extension":
        return cls(ExtensionKind.CALLER)


class WeightKind(str, Enum):
    W1 = "W1"   # kernel mass of the lattice cube around y_alpha
    W2 = "W2"   # h^d |y_alpha|^{-(d+sp)}


@dataclass(frozen=True)
class GridSpec:
    h: float
    d: int = 1
    rho_max: float = 10.0
    extension: Extension = field(default_factory=Extension)

    def __post_init__(self):
        if not 0 < self.h < 1:
            raise ParameterDomainError(f"mesh width h must lie in (0, 1), got {self.h}")
        if self.d not in SUPPORTED_DIMS:
            raise ParameterDomainError(f"dimension d={self.d} not supported")
        if not self.rho_max > 1:
            raise ParameterDomainError(f"rho_max must exceed 1, got {self.rho_max}")


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Immutable weight table; offsets are integer multi-indices."""

    r: float
    kind: WeightKind
    h: float
    d: int
    p: float
    s: float
    rho_max: float
    inner_weight: float
    inner_offsets: np.ndarray
    outer_offsets: np.ndarray
    outer_weights: np.ndarray
    tail_radius: float
    tail_mass: float

    def __post_init__(self):
        for name in ("inner_offsets", "outer_offsets", "outer_weights"):
            getattr(self, name).setflags(write=False)

    @property
    def params(self) -> OperatorParams:
        return OperatorParams(self.d, self.p, self.s)

    @property
    def outer(self) -> dict:
        """Offset tuple -> weight."""
        return {tuple(int(i) for i in a): float(w)
                for a, w in zip(self.outer_offsets, self.outer_weights)}

    @property
    def inner_vectors(self) -> np.ndarray:
        return self.inner_offsets * self.h

    @property
    def outer_vectors(self) -> np.ndarray:
        return self.outer_offsets * self.h

    def all_offsets(self):
        """All offsets with their weights, inner ones first."""
        offs = np.concatenate([self.inner_offsets, self.outer_offsets])
        w = np.concatenate([np.full(len(self.inner_offsets), self.inner_weight),
                            self.outer_weights])
        return offs, w

    def key(self) -> dict:
        return {"d": self.d, "p": self.p, "s": self.s, "h": self.h, "r": self.r,
                "kind": self.kind.value, "rho_max": self.rho_max}


def _lattice_offsets(n: int, d: int) -> np.ndarray:
    """All integer multi-indices in [-n, n]^d except 0."""
    axes = [np.arange(-n, n + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return grid[np.any(grid != 0, axis=1)]


def _w1_1d(n: np.ndarray, h: float, sigma: float) -> np.ndarray:
    """Closed form of the kernel mass over [(|n|-1/2)h, (|n|+1/2)h] in d = 1."""
    a = (np.abs(n) - 0.5) * h
    return -a ** (-sigma) * np.expm1(-sigma * np.log1p(h / a)) / sigma


_GL4 = np.polynomial.legendre.leggauss(4)
_GL8 = np.polynomial.legendre.leggauss(8)


def _cube_rule(centres: np.ndarray, half: float, sigma: float, rule) -> np.ndarray:
    x, w = rule
    d = centres.shape[1]
    nodes = np.stack(np.meshgrid(*[x] * d, indexing="ij"), -1).reshape(-1, d)
    weights = np.prod(np.stack(np.meshgrid(*[w] * d, indexing="ij"), -1).reshape(-1, d), axis=1)
    pts = centres[:, None, :] + half * nodes[None, :, :]
    vals = np.sum(pts * pts, axis=-1) ** (-0.5 * (d + sigma))
    return half ** d * (vals @ weights)


def _cube_masses(centres: np.ndarray, h: float, sigma: float, tol: float = 1e-10,
                 max_depth: int = 6) -> np.ndarray:
    """Integral of |y|^{-(d+sigma)} over cubes of side h, 4- vs 8-point tensor
    Gauss rules, bisecting cubes whose two estimates disagree."""
    d = centres.shape[1]
    acc = np.zeros(len(centres))
    owner = np.arange(len(centres))
    cur_c, cur_h, depth = centres, h, 0
    while len(cur_c):
        coarse = _cube_rule(cur_c, 0.5 * cur_h, sigma, _GL4)
        fine = _cube_rule(cur_c, 0.5 * cur_h, sigma, _GL8)
        ok = (np.abs(fine - coarse) <= tol * np.abs(fine)) | (depth >= max_depth)
        np.add.at(acc, owner[ok], fine[ok])
        bad = ~ok
        shifts = 0.25 * cur_h * np.array(list(itertools.product((-1, 1), repeat=d)))
        cur_c = (cur_c[bad][:, None, :] + shifts[None]).reshape(-1, d)
        owner = np.repeat(owner[bad], 2 ** d)
        cur_h, depth = 0.5 * cur_h, depth + 1
    return acc


def check_mesh(h: float, r: float, d: int, kind: WeightKind) -> None:
    kind = WeightKind(kind)
    slack = 1.0 + 1e-12
    if kind is WeightKind.W1 and not h <= r / 4 * slack:
        raise ConfigurationError(f"W1 weights need h <= r/4, got h={h:g}, r={r:g}")
    if kind is WeightKind.W2 and not h <= r / (4 * math.sqrt(d)) * slack:
        raise ConfigurationError(
            f"W2 weights need h <= r/(4 sqrt(d)), got h={h:g}, r={r:g}, d={d}")


def tail_mass(d: int, sigma: float, radius: float) -> float:
    """Integral of |y|^{-(d+sigma)} over |y| > radius."""
    return sphere_area(d) * radius ** (-sigma) / sigma


def build_weights(grid: GridSpec, r: float, params: OperatorParams,
                  kind: WeightKind = WeightKind.W1, cube_tol: float = 1e-10) -> WeightTable:
    """Weights of the discrete operator on hZ^d with splitting radius r.

    In d = 1 the lattice is cut at the cell boundary (N + 1/2) h with
    N = floor(rho_max / h), so for W1 the explicit weights and the tail mass
    partition the kernel mass outside the first cell exactly.
    """
    kind = WeightKind(kind)
    d, p, s = params.d, params.p, params.s
    if d != grid.d:
        raise ConfigurationError("grid and params disagree on the dimension")
    h = grid.h
    if not 0 < r < grid.rho_max:
        raise ConfigurationError(f"need 0 < r < rho_max, got r={r:g}")
    check_mesh(h, r, d, kind)
    sigma = s * p
    n = int(math.floor(grid.rho_max / h + 1e-9))
    offs = _lattice_offsets(n, d)
    norms = np.linalg.norm(offs * h, axis=1)
    inner = offs[norms < r]
    keep = (norms >= r) & (norms <= grid.rho_max * (1 + 1e-12))
    outer = offs[keep]
    if kind is WeightKind.W2:
        w = h ** d / np.linalg.norm(outer * h, axis=1) ** (d + sigma)
    elif d == 1:
        w = _w1_1d(outer[:, 0].astype(float), h, sigma)
    else:
        w = _cube_masses(outer * h, h, sigma, cube_tol)
    w = _mirror(outer, w)
    radius = (n + 0.5) * h if d == 1 else grid.rho_max
    inner_weight = (p + d) * h ** d / (p * (1 - s) * r ** (d + sigma))
    return WeightTable(r=float(r), kind=kind, h=float(h), d=d, p=float(p), s=float(s),
                       rho_max=float(grid.rho_max), inner_weight=inner_weight,
                       inner_offsets=inner.astype(np.int64), outer_offsets=outer.astype(np.int64),
                       outer_weights=w, tail_radius=float(radius),
                       tail_mass=tail_mass(d, sigma, radius))


def _mirror(offs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Copy each weight from the lexicographically positive member of {alpha, -alpha}."""
    lookup = {tuple(a): i for i, a in enumerate(offs.tolist())}
    out = w.copy()
    for i, a in enumerate(offs.tolist()):
        if tuple(a) < tuple(-v for v in a):
            out[i] = w[lookup[tuple(-v for v in a)]]
    return out


def summability_report(table: WeightTable, nus=()) -> dict:
    """Weighted lattice sums: total mass, far mass and |y|^nu moments near 0."""
    offs, w = table.all_offsets()
    norms = np.linalg.norm(offs * table.h, axis=1)
    total = float(np.sum(w)) + table.tail_mass
    far = float(np.sum(w[norms >= 1.0])) + table.tail_mass
    near = (norms > 0) & (norms < 1.0)
    moment = {float(nu): float(np.sum(norms[near] ** nu * w[near])) for nu in nus}
    return {"total": total, "far": far, "moment": moment}


def summability_ratios(table: WeightTable, nus=()) -> dict:
    """The report rescaled so each entry should stay bounded as r -> 0."""
    rep = summability_report(table, nus)
    sp = table.s * table.p
    return {
        "r": table.r,
        "total_scaled": rep["total"] * table.r ** sp,
        "far": rep["far"],
        "moment_scaled": {nu: m / s_nu(nu, table.r, table.s, table.p)
                          for nu, m in rep["moment"].items()},
    }


def default_rho_max(params: OperatorParams, sup_bound: float, target_error: float) -> float:
    """Radius where tail_mass * (2 sup)^{p-1} drops below 1e-3 * target_error."""
    sigma = params.sp
    amp = (2.0 * sup_bound) ** (params.p - 1)
    if amp == 0:
        return 2.0
    rho = (sphere_area(params.d) * amp / (sigma * 1e-3 * target_error)) ** (1.0 / sigma)
    return max(2.0, rho)


def table_to_dict(table: WeightTable) -> dict:
    return {
        "format": "fracplap-weights",
        "version": FORMAT_VERSION,
        "key": table.key(),
        "h": table.h,
        "inner_weight": table.inner_weight,
        "inner_offsets": table.inner_offsets.tolist(),
        "outer_offsets": table.outer_offsets.tolist(),
        "outer_weights": table.outer_weights.tolist(),
        "tail_radius": table.tail_radius,
        "tail_mass": table.tail_mass,
    }


def table_from_dict(data: dict) -> WeightTable:
    if data.get("format") != "fracplap-weights" or data.get("version") != FORMAT_VERSION:
        raise ConfigurationError("not a weight table file of a supported version")
    k = data["key"]
    d = int(k["d"])
    return WeightTable(
        r=float(k["r"]), kind=WeightKind(k["kind"]), h=float(k["h"]), d=d,
        p=float(k["p"]), s=float(k["s"]), rho_max=float(k["rho_max"]),
        inner_weight=float(data["inner_weight"]),
        inner_offsets=np.asarray(data["inner_offsets"], dtype=np.int64).reshape(-1, d),
        outer_offsets=np.asarray(data["outer_offsets"], dtype=np.int64).reshape(-1, d),
        outer_weights=np.asarray(data["outer_weights"], dtype=float),
        tail_radius=float(data["tail_radius"]), tail_mass=float(data["tail_mass"]))


def save_weights(table: WeightTable, path) -> None:
    """JSON cache; Python's float repr makes the round trip bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_to_dict(table), fh)


def load_weights(path) -> WeightTable:
    with open(path, encoding="utf-8") as fh:
        return table_from_dict(json.load(fh))


def tables_equal(a: WeightTable, b: WeightTable) -> bool:
    return (a.key() == b.key() and a.inner_weight == b.inner_weight
            and a.tail_mass == b.tail_mass and a.tail_radius == b.tail_radius
            and np.array_equal(a.inner_offsets, b.inner_offsets)
            and np.array_equal(a.outer_offsets, b.outer_offsets)
            and np.array_equal(a.outer_weights, b.outer_weights))
