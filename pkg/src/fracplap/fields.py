"""Scalar fields on R^d: a vectorised callable plus the metadata the
operators need (sup bound, Hölder data, optional analytic derivatives)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, ContractError, ParameterDomainError


@dataclass(frozen=True)
class Holder:
    """Hölder modulus delta -> L * delta^a."""

    a: float
    L: float

    def __post_init__(self):
        if not 0 < self.a <= 1:
            raise ParameterDomainError("Hölder exponent must lie in (0, 1]")
        if self.L < 0:
            raise ParameterDomainError("Hölder constant must be >= 0")

    def modulus(self, delta):
        return self.L * np.asarray(delta, dtype=float) ** self.a


@dataclass(frozen=True)
class ScalarField:
    """Real function on R^d.

    ``func`` maps an ``(n, d)`` array to ``n`` values.  ``sup_bound`` bounds
    |phi| on all of R^d; ``gradient`` and ``hessian`` map a single point to
    a vector / matrix.
    """

    func: Callable[[np.ndarray], np.ndarray]
    d: int = 1
    sup_bound: Optional[float] = None
    holder: Optional[Holder] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "field"
    meta: dict = field(default_factory=dict, compare=False)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.d:
            raise ParameterDomainError(
                f"field {self.name!r} lives in d={self.d}, got points of dimension {x.shape[-1]}")
        return x

    def __call__(self, x):
        """Evaluate on points of shape ``(..., d)``; d = 1 also accepts bare arrays."""
        x = self._points(x)
        flat = x.reshape(-1, self.d)
        vals = np.asarray(self.func(flat), dtype=float).reshape(x.shape[:-1])
        return float(vals) if vals.ndim == 0 else vals

    def require_sup_bound(self) -> float:
        if self.sup_bound is None:
            raise ContractError(f"field {self.name!r} has no sup_bound")
        return float(self.sup_bound)

    def grad(self, x):
        if self.gradient is None:
            raise ContractError(f"field {self.name!r} has no analytic gradient")
        return np.atleast_1d(np.asarray(self.gradient(self._points(x)), dtype=float))

    def hess(self, x):
        if self.hessian is None:
            raise ContractError(f"field {self.name!r} has no analytic hessian")
        return np.atleast_2d(np.asarray(self.hessian(self._points(x)), dtype=float))

    def scaled(self, lam: float) -> "ScalarField":
        """lam * phi with metadata rescaled."""
        lam = float(lam)
        f = self.func
        return replace(
            self,
            func=lambda x: lam * np.asarray(f(x)),
            sup_bound=None if self.sup_bound is None else abs(lam) * self.sup_bound,
            holder=None if self.holder is None else Holder(self.holder.a, abs(lam) * self.holder.L),
            gradient=None if self.gradient is None else (lambda x, g=self.gradient: lam * np.asarray(g(x))),
            hessian=None if self.hessian is None else (lambda x, h=self.hessian: lam * np.asarray(h(x))),
            name=f"{lam:g}*{self.name}",
        )

    def translated(self, shift) -> "ScalarField":
        """x -> phi(x - shift)."""
        shift = np.atleast_1d(np.asarray(shift, dtype=float))
        f = self.func
        return replace(
            self,
            func=lambda x: f(x - shift),
            gradient=None if self.gradient is None else (lambda x, g=self.gradient: g(x - shift)),
            hessian=None if self.hessian is None else (lambda x, h=self.hessian: h(x - shift)),
            name=f"{self.name}(.-{shift.tolist()})",
        )

    def shifted_by(self, delta: float) -> "ScalarField":
        """phi + delta (used for perturbed-data runs)."""
        f = self.func
        return replace(
            self,
            func=lambda x: np.asarray(f(x)) + delta,
            sup_bound=None if self.sup_bound is None else self.sup_bound + abs(delta),
            holder=None if self.holder is None else Holder(
                self.holder.a, max(self.holder.L, (self.sup_bound or 0.0) + abs(delta))),
            name=f"{self.name}+{delta:g}",
        )

    def check_holder(self, rng: np.random.Generator, n: int = 1000, scale: float = 4.0) -> float:
        """Largest sampled ratio |phi(x)-phi(z)| / (L|x-z|^a); at most 1 if consistent."""
        if self.holder is None:
            raise ContractError(f"field {self.name!r} has no Hölder data")
        x = rng.uniform(-scale, scale, size=(n, self.d))
        z = x + rng.normal(scale=rng.choice([1e-3, 1e-1, 1.0]), size=(n, self.d))
        num = np.abs(self(x) - self(z))
        den = self.holder.modulus(np.linalg.norm(x - z, axis=-1))
        return float(np.max(num / den))

    def check_sup(self, rng: np.random.Generator, n: int = 1000, scale: float = 20.0) -> float:
        x = rng.uniform(-scale, scale, size=(n, self.d))
        return float(np.max(np.abs(self(x))))


def _sq(x):
    return np.sum(x * x, axis=-1)


def const_field(c: float = 1.0, d: int = 1) -> ScalarField:
    c = float(c)
    return ScalarField(
        func=lambda x: np.full(x.shape[0], c), d=d, sup_bound=abs(c),
        holder=Holder(1.0, max(abs(c), 1e-300)),
        gradient=lambda x: np.zeros(d), hessian=lambda x: np.zeros((d, d)),
        name="const", meta={"constant": True, "c": c})


def affine_field(slope=1.0, offset: float = 0.0, clip: float = 10.0, d: int = 1) -> ScalarField:
    """clip(offset + slope . x) into [-clip, clip]; symmetric truncation keeps it bounded."""
    b = np.broadcast_to(np.asarray(slope, dtype=float), (d,)).copy()
    M = float(clip)
    if M <= 0:
        raise ParameterDomainError("clip level must be positive")

    def func(x):
        return np.clip(offset + x @ b, -M, M)

    return ScalarField(
        func=func, d=d, sup_bound=M, holder=Holder(1.0, max(float(np.linalg.norm(b)), M)),
        gradient=lambda x: b.copy(), hessian=lambda x: np.zeros((d, d)),
        name="affine", meta={"slope": b.tolist(), "offset": offset, "clip": M})


def gauss_bump(d: int = 1, width: float = 1.0) -> ScalarField:
    """exp(-|x|^2 / width^2)."""
    w2 = float(width) ** 2

    def func(x):
        return np.exp(-_sq(x) / w2)

    def grad(x):
        return -2.0 * x / w2 * math.exp(-float(_sq(x)) / w2)

    def hess(x):
        e = math.exp(-float(_sq(x)) / w2)
        return e * (4.0 * np.outer(x, x) / w2 ** 2 - 2.0 / w2 * np.eye(d))

    lip = math.sqrt(2.0 / math.e) / math.sqrt(w2)
    return ScalarField(func=func, d=d, sup_bound=1.0, holder=Holder(1.0, max(lip, 1.0)),
                       gradient=grad, hessian=hess, name="gauss-bump")


def rational_field(d: int = 1) -> ScalarField:
    """1 / (1 + |x|^2)."""

    def func(x):
        return 1.0 / (1.0 + _sq(x))

    def grad(x):
        return -2.0 * x / (1.0 + float(_sq(x))) ** 2

    def hess(x):
        q = 1.0 + float(_sq(x))
        return 8.0 * np.outer(x, x) / q ** 3 - 2.0 / q ** 2 * np.eye(d)

    lip = 3.0 * math.sqrt(3.0) / 8.0
    return ScalarField(func=func, d=d, sup_bound=1.0, holder=Holder(1.0, 1.0),
                       gradient=grad, hessian=hess, name="rational",
                       meta={"lipschitz": lip})


def minx2_field(d: int = 1) -> ScalarField:
    """min(|x|^2, 1)."""

    def func(x):
        return np.minimum(_sq(x), 1.0)

    def grad(x):
        q = float(_sq(x))
        return 2.0 * x if q < 1 else np.zeros(d)

    def hess(x):
        q = float(_sq(x))
        return 2.0 * np.eye(d) if q < 1 else np.zeros((d, d))

    return ScalarField(func=func, d=d, sup_bound=1.0, holder=Holder(1.0, 2.0),
                       gradient=grad, hessian=hess, name="minx2")


def minexp_field() -> ScalarField:
    """min(e^x, 2) in one dimension."""

    def func(x):
        return np.minimum(np.exp(np.minimum(x[:, 0], 1.0)), 2.0)

    def grad(x):
        v = float(x[..., 0])
        return np.array([math.exp(v) if v < math.log(2.0) else 0.0])

    def hess(x):
        v = float(x[..., 0])
        return np.array([[math.exp(v) if v < math.log(2.0) else 0.0]])

    return ScalarField(func=func, d=1, sup_bound=2.0, holder=Holder(1.0, 2.0),
                       gradient=grad, hessian=hess, name="minexp")


def heaviside_s_field(s: float, cutoff: float = 10.0) -> ScalarField:
    """max(0, x)^s, frozen at cutoff^s for x >= cutoff (one dimension)."""
    if not 0 < s < 1:
        raise ParameterDomainError("s must lie in (0, 1)")
    M = float(cutoff)

    def func(x):
        return np.clip(x[:, 0], 0.0, M) ** s

    def grad(x):
        v = float(x[..., 0])
        return np.array([s * v ** (s - 1) if 0 < v < M else 0.0])

    def hess(x):
        v = float(x[..., 0])
        return np.array([[s * (s - 1) * v ** (s - 2) if 0 < v < M else 0.0]])

    return ScalarField(func=func, d=1, sup_bound=M ** s, holder=Holder(s, max(1.0, M ** s)),
                       gradient=grad, hessian=hess, name="heaviside-s",
                       meta={"s": s, "cutoff": M})


BUILTINS = {
    "const": const_field,
    "affine": affine_field,
    "gauss-bump": gauss_bump,
    "rational": rational_field,
    "minx2": minx2_field,
    "minexp": minexp_field,
    "heaviside-s": heaviside_s_field,
}


def builtin_field(name: str, **kwargs) -> ScalarField:
    """Look up a test function by registry name and build it with ``kwargs``."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown test function {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        return factory(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad arguments for test function {name!r}: {exc}") from None
