"""The discrete fractional p-Laplacian on hZ^d and its consistency error."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ContractError, DomainCoverageError, ParameterDomainError
from .expansion import reference_fraclap
from .fields import ScalarField
from .kernel import OperatorParams, jp
from .lattice import (Extension, ExtensionKind, GridSpec, WeightKind, WeightTable,
                      build_weights)
from .quad import DEFAULT_SPEC, QuadSpec, integrate_tail


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Lattice values of a field, resolved from a callable or an array.

    An array source holds the values on the cube of lattice indices
    [-n, n]^d (coordinates ``index * h``).  Points outside the box take the
    extension value; with a CALLER extension they need a callable source.
    ``box_radius`` = None means the callable is used everywhere.
    """

    source: Union[ScalarField, np.ndarray]
    h: float
    exterior: Extension = Extension()
    box_radius: Optional[float] = None
    fallback: Optional[ScalarField] = None

    @classmethod
    def from_field(cls, phi: ScalarField, h: float, exterior: Extension = Extension.caller(),
                   box_radius: Optional[float] = None) -> "FieldSample":
        return cls(phi, h, exterior, box_radius)

    @classmethod
    def from_array(cls, values: np.ndarray, h: float, exterior: Extension = Extension(),
                   fallback: Optional[ScalarField] = None) -> "FieldSample":
        values = np.asarray(values, dtype=float)
        n = (values.shape[0] - 1) // 2
        if any(m != 2 * n + 1 for m in values.shape):
            raise ParameterDomainError("array source must have odd, equal side lengths")
        return cls(values, h, exterior, n * h, fallback)

    @property
    def d(self) -> int:
        if isinstance(self.source, ScalarField):
            return self.source.d
        return self.source.ndim

    @property
    def callable(self) -> Optional[ScalarField]:
        return self.source if isinstance(self.source, ScalarField) else self.fallback

    def _box_index(self) -> Optional[int]:
        if self.box_radius is None:
            return None
        return int(round(self.box_radius / self.h))

    def values(self, idx: np.ndarray, offsets: Optional[np.ndarray] = None) -> np.ndarray:
        """Field values at integer lattice indices ``idx`` of shape (m, d)."""
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, self.d)
        n = self._box_index()
        inside = np.ones(len(idx), dtype=bool) if n is None else np.all(np.abs(idx) <= n, axis=1)
        out = np.empty(len(idx))
        if isinstance(self.source, ScalarField):
            out[inside] = self.source(idx[inside] * self.h)
        else:
            out[inside] = self.source[tuple((idx[inside] + n).T)]
        outside = ~inside
        if outside.any():
            if self.exterior.kind is ExtensionKind.CALLER:
                phi = self.callable
                if phi is None:
                    bad = np.flatnonzero(outside)[0]
                    alpha = None if offsets is None else tuple(int(a) for a in offsets[bad])
                    raise DomainCoverageError(
                        f"lattice point {idx[bad].tolist()} (offset {alpha}) lies outside "
                        "the stored box and no callable extension is available", alpha)
                out[outside] = phi(idx[outside] * self.h)
            else:
                out[outside] = self.exterior.value
        return out


def _grid_index(x, h, d) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1, d)
    k = np.rint(x / h)
    if np.any(np.abs(k * h - x) > 1e-9 * np.maximum(1.0, np.abs(x))):
        raise ParameterDomainError("evaluation points must be lattice points of the grid")
    return k.astype(np.int64)


def _tail_term(field: FieldSample, table: WeightTable, u0: float, x_idx, spec: QuadSpec) -> float:
    ext = field.exterior
    if ext.kind is not ExtensionKind.CALLER:
        return float(jp(ext.value - u0, table.p)) * table.tail_mass
    phi = field.callable
    if phi is None:
        raise DomainCoverageError("CALLER extension needs a callable for the tail")
    if phi.sup_bound is None:
        raise ContractError(f"field {phi.name!r} needs a sup_bound for the tail integral")
    x = x_idx * table.h
    bound = (2.0 * phi.sup_bound) ** (table.p - 1)

    def f(y):
        return jp(phi(x + y) - u0, table.p)

    return integrate_tail(f, table.tail_radius, table.d, table.s, table.p, bound, spec).value


def apply_discrete(field: FieldSample, x, table: WeightTable,
                   spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Discrete operator at one lattice point x (coordinates)."""
    return float(apply_discrete_many(field, x, table, spec)[0])


def apply_discrete_many(field: FieldSample, xs, table: WeightTable,
                        spec: QuadSpec = DEFAULT_SPEC) -> np.ndarray:
    """Discrete operator at several lattice points, shape (m, d) or (m,) in d = 1.

    Sum of inner_weight * J_p(u(x+y) - u(x)) over 0 < |y| < r, the weighted
    sum over r <= |y| <= rho_max, and the tail contribution of the extension.
    """
    if field.d != table.d:
        raise ParameterDomainError("field and weight table disagree on the dimension")
    if abs(field.h - table.h) > 1e-15 * table.h:
        raise ParameterDomainError("field and weight table use different mesh widths")
    idx = _grid_index(xs, table.h, table.d)
    offs, w = table.all_offsets()
    out = np.empty(len(idx))
    for i, k in enumerate(idx):
        u0 = field.values(k[None, :])[0]
        vals = field.values(k[None, :] + offs, offs)
        out[i] = float(jp(vals - u0, table.p) @ w) + _tail_term(field, table, u0, k, spec)
    return out


def consistency_error(phi: ScalarField, x, params: OperatorParams, h: float, r: float,
                      kind: WeightKind = WeightKind.W1, spec: QuadSpec = DEFAULT_SPEC,
                      rho_max: float = 4.0, exterior: Extension = Extension.caller(),
                      reference: Optional[float] = None,
                      table: Optional[WeightTable] = None) -> dict:
    """|discrete operator - exact operator| at the lattice point x.

    The exact value defaults to the principal value oracle; pass
    ``reference`` when a closed form is known.  With the default CALLER
    extension the lattice truncation contributes no error.
    """
    if table is None:
        table = build_weights(GridSpec(h, params.d, rho_max, exterior), r, params, kind)
    sample = FieldSample.from_field(phi, h, exterior)
    disc = apply_discrete(sample, x, table, spec)
    if reference is None:
        reference = reference_fraclap(phi, x, params, spec).value
    return {"discrete": disc, "reference": float(reference), "error": abs(disc - reference)}
